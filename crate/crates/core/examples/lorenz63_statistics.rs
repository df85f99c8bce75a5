//! Lorenz 63: autocorrelation of simulated runs against the training data.

use znl::diagnostics::{autocorrelation, l1_directed_hausdorff, relative_l2};
use znl::kernel::KernelConfig;
use znl::markov::{build_model, simulate};
use znl::systems::{generate_lorenz63, FlowSpec, Lorenz63Params};

fn main() -> znl::Result<()> {
    let s = generate_lorenz63(Lorenz63Params::default(), &FlowSpec::standard(vec![1.0, 1.0, 1.0]), 10_000)?;
    let model = build_model(&s, 0.1, &KernelConfig::default())?;
    println!("{} states, {} edges", model.len(), model.transitions().edge_count());

    let truth = autocorrelation(&s, 50)?;
    for seed in 0..3 {
        let run = simulate(&model, s.point(0), s.len() - 1, seed)?;
        let acf = autocorrelation(&run.points, 50)?;
        println!(
            "seed {seed}: acf relative error {:.4}, L1 sim→train {:.4}, train→sim {:.4}",
            relative_l2(&truth, &acf),
            l1_directed_hausdorff(&run.points, &s, None)?,
            l1_directed_hausdorff(&s, &run.points, None)?
        );
    }
    println!("lag  true      sim(seed 0)");
    let run = simulate(&model, s.point(0), s.len() - 1, 0)?;
    let acf = autocorrelation(&run.points, 50)?;
    for t in [1, 5, 10, 25, 50] {
        println!("{t:>3}  {:>8.3}  {:>8.3}", truth[t - 1], acf[t - 1]);
    }
    Ok(())
}
