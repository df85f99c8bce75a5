//! Fit the Henon map from 10^4 samples and compare a long simulated run
//! with the training cloud.

use std::time::Instant;

use znl::diagnostics::{containment_check, l1_directed_hausdorff};
use znl::kernel::KernelConfig;
use znl::markov::{build_model, simulate};
use znl::systems::{generate_henon, HenonParams};

fn main() -> znl::Result<()> {
    let s = generate_henon(HenonParams::default(), [0.0, 0.0], 10_000, 100)?;
    let t = Instant::now();
    let model = build_model(&s, 0.1, &KernelConfig::default())?;
    println!(
        "fit in {:.2?}: {} states, {} edge maps, bandwidth {:.3e}",
        t.elapsed(),
        model.len(),
        model.edge_map_count(),
        model.bandwidth()
    );

    let t = Instant::now();
    let run = simulate(&model, s.point(0), 100_000, 42)?.into_result()?;
    println!("simulated {} steps in {:.2?}", run.len() - 1, t.elapsed());

    let c = containment_check(&model, &run, &s)?;
    println!(
        "within δ {:.4}, within 2δ {:.4}, training → simulated {:.4}",
        c.within_delta, c.within_2delta, c.reverse_distance
    );
    println!(
        "L1 distance simulated → training {:.4}, training → simulated {:.4}",
        l1_directed_hausdorff(&run.points, &s, None)?,
        l1_directed_hausdorff(&s, &run.points, None)?
    );
    println!("first steps:");
    for n in 0..5 {
        let st = run.state(n);
        println!("  s={:>3} x={:.5?}", st.s, st.x);
    }
    Ok(())
}
