//! Bandwidth selection and one fitted edge map: weights, interpolation and
//! the convex-hull property of its outputs.

use znl::kernel::{fit_coefficients, select_bandwidth, simplex_weights, EdgeMap, KernelConfig};
use znl::systems::{generate_henon, HenonParams};

fn main() -> znl::Result<()> {
    let s = generate_henon(HenonParams::default(), [0.0, 0.0], 10_000, 100)?;
    let cfg = KernelConfig::default();
    let theta = select_bandwidth(&s, &cfg)?;
    println!("bandwidth {theta:.3e} (eta {}, zero threshold {:e})", cfg.quantile, cfg.zero_threshold);

    // samples whose first coordinate lies in a thin band
    let samples: Vec<usize> = (0..s.len() - 1).filter(|&n| (s.point(n)[0] - 0.5).abs() < 0.02).take(40).collect();
    let map = EdgeMap::fit(&s, 0, 0, &samples, theta, cfg.ridge)?;
    let mut worst = 0.0f64;
    for &n in &samples {
        let y = map.evaluate(&s, s.point(n))?;
        worst = worst.max(znl::geometry::dist(&y, s.point(n + 1)));
    }
    println!("{} samples, worst one-step error at the inputs {worst:.2e} (ridge {})", samples.len(), cfg.ridge);

    let q = [0.5, 0.05];
    let (w, y) = map.evaluate_with_weights(&s, &q)?;
    println!("query {q:?} -> {y:.4?}; weights sum {:.15}, underflow {}", w.v.iter().sum::<f64>(), w.underflow);

    // exact interpolation without ridge on a small separated set
    let inputs: [&[f64]; 3] = [&[0.0], &[0.5], &[1.0]];
    let outputs: [&[f64]; 3] = [&[2.0], &[-1.0], &[4.0]];
    let a = fit_coefficients(&inputs, &outputs, 0.05, 0.0)?;
    for (x, yv) in inputs.iter().zip(outputs) {
        let v = simplex_weights(&inputs, 0.05, x).unwrap().v;
        let got: f64 = a.iter().zip(&v).map(|(a, v)| a * v).sum();
        println!("  f({}) = {got:.12} (target {})", x[0], yv[0]);
    }
    Ok(())
}
