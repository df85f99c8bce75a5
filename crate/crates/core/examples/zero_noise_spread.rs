//! One-step spread of the reconstructed process against the bound
//! 4δ(1+L)+2δ as the cover is refined.

use znl::diagnostics::{percentile, spread_samples};
use znl::kernel::KernelConfig;
use znl::markov::{build_model, estimate_lipschitz};
use znl::systems::{generate_henon, HenonParams};

fn main() -> znl::Result<()> {
    let s = generate_henon(HenonParams::default(), [0.0, 0.0], 10_000, 100)?;
    for delta in [0.4, 0.2, 0.1, 0.05] {
        let model = build_model(&s, delta, &KernelConfig::default())?;
        let lip = estimate_lipschitz(&s, delta)?;
        let spreads = spread_samples(&model, &s, 500, 3)?;
        let bound = 4.0 * delta * (1.0 + lip.value) + 2.0 * delta;
        println!(
            "delta {delta:<5} L {:.3}  p50 {:.4}  p99 {:.4}  max {:.4}  bound {bound:.3}",
            lip.value,
            percentile(&spreads, 0.5),
            percentile(&spreads, 0.99),
            percentile(&spreads, 1.0)
        );
    }
    Ok(())
}
