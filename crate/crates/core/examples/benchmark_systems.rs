//! Generate the three benchmark series and print their ranges.
//!
//! cargo run --release --example benchmark_systems

use znl::series::TimeSeries;
use znl::systems::{generate_henon, generate_lorenz63, generate_lorenz96, FlowSpec, HenonParams, Lorenz63Params, Lorenz96Params};

fn summary(name: &str, s: &TimeSeries) {
    let d = s.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in s.points() {
        for c in 0..d {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    println!("{name}: {} samples in R^{d}", s.len());
    for c in 0..d.min(3) {
        println!("  x{c} in [{:.3}, {:.3}]", lo[c], hi[c]);
    }
}

fn main() -> znl::Result<()> {
    let henon = generate_henon(HenonParams::default(), [0.0, 0.0], 10_000, 100)?;
    summary("henon", &henon);

    let l63 = generate_lorenz63(Lorenz63Params::default(), &FlowSpec::standard(vec![1.0, 1.0, 1.0]), 10_000)?;
    summary("lorenz63", &l63);

    let p = Lorenz96Params::default();
    let mut x0 = vec![p.forcing; p.m];
    x0[0] += 0.01;
    let l96 = generate_lorenz96(p, &FlowSpec::standard(x0), 5_000)?;
    summary("lorenz96", &l96);

    print!("{}", henon.slice(0..3)?.to_csv(true));
    Ok(())
}
