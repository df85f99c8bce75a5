//! Probability that the symbol chain reproduces the true itinerary for N
//! steps, on Henon and Lorenz 63.

use znl::diagnostics::{state_itinerary, theta_curve};
use znl::kernel::KernelConfig;
use znl::markov::build_model;
use znl::series::TimeSeries;
use znl::systems::{generate_henon, generate_lorenz63, FlowSpec, HenonParams, Lorenz63Params};

fn report(name: &str, s: &TimeSeries) -> znl::Result<()> {
    let model = build_model(s, 0.1, &KernelConfig::default())?;
    let itin = state_itinerary(&model, s);
    let horizons = [1, 2, 4, 8, 16, 32];
    let curve = theta_curve(model.transitions(), &itin, &horizons, 20_000, 9)?;
    println!("{name} ({} states)", model.len());
    for (n, v) in horizons.iter().zip(curve) {
        println!("  N={n:<3} theta {v:.4}");
    }
    Ok(())
}

fn main() -> znl::Result<()> {
    report("henon", &generate_henon(HenonParams::default(), [0.0, 0.0], 10_000, 100)?)?;
    let l63 = generate_lorenz63(Lorenz63Params::default(), &FlowSpec::standard(vec![1.0, 1.0, 1.0]), 10_000)?;
    report("lorenz63", &l63)
}
