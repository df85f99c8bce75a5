//! Lorenz 96 with ten oscillators. In ten dimensions δ = 0.1 never revisits
//! a cell at this sample size, so the cover is much coarser.

use znl::diagnostics::{l1_directed_hausdorff, percentile, nearest_distances, SetSearch};
use znl::kernel::KernelConfig;
use znl::markov::{build_model, simulate};
use znl::systems::{generate_lorenz96, FlowSpec, Lorenz96Params};
use znl::transitions::stationary_measure;

fn main() -> znl::Result<()> {
    let p = Lorenz96Params::default();
    let mut x0 = vec![p.forcing; p.m];
    x0[0] += 0.01;
    let s = generate_lorenz96(p, &FlowSpec::standard(x0), 20_000)?;

    if let Err(e) = build_model(&s, 0.1, &KernelConfig::default()) {
        println!("delta 0.1: {e}");
    }
    let model = build_model(&s, 4.0, &KernelConfig::default())?;
    let pi = stationary_measure(model.transitions(), 1e-10, 1_000_000)?;
    println!(
        "delta 4: {} states, {} edges, stationary vector in {} iterations",
        model.len(),
        model.transitions().edge_count(),
        pi.iterations
    );
    let run = simulate(&model, s.point(0), 20_000, 5)?;
    let d = nearest_distances(&run.points, &s, SetSearch::Auto)?;
    println!(
        "distance to training data: median {:.3}, p99 {:.3}; L1 train→sim {:.3}",
        percentile(&d, 0.5),
        percentile(&d, 0.99),
        l1_directed_hausdorff(&s, &run.points, None)?
    );
    Ok(())
}
