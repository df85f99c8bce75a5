//! Acceptance criteria 1–10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use znl::cli::{cmd_pipeline, PipelineConfig, SystemKind};
use znl::diagnostics::{
    autocorrelation, containment_check, directed_hausdorff_with, l1_directed_hausdorff, l1_directed_hausdorff_with,
    nearest_distances, percentile, relative_l2, state_itinerary, theta_curve, SetSearch,
};
use znl::kernel::{fit_coefficients, EdgeMap, KernelConfig};
use znl::markov::{build_model, empirical_spread, estimate_lipschitz, simulate, simulate_observed, DomainPolicy, ZnlModel};
use znl::rng::SplitMix64;
use znl::series::TimeSeries;
use znl::systems::{generate_henon, generate_lorenz63, generate_lorenz96, FlowSpec, HenonParams, Lorenz63Params, Lorenz96Params};
use znl::transitions::{check_irreducible, stationary_from, TransitionModel, DEFAULT_STATIONARY_MAX_ITERS};

const DELTA: f64 = 0.1;
/// Cover radius for the 10-dimensional benchmark; δ = 0.1 never revisits a cell there.
const L96_DELTA: f64 = 4.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

struct Fixtures {
    henon: TimeSeries,
    henon_model: ZnlModel,
    henon_fit_time: Duration,
    l63: TimeSeries,
    l63_model: ZnlModel,
    l96_model: ZnlModel,
}

fn fixtures() -> Fixtures {
    let t = Instant::now();
    let henon = generate_henon(HenonParams::default(), [0.0, 0.0], 10_000, 100).unwrap();
    let henon_model = build_model(&henon, DELTA, &KernelConfig::default()).unwrap();
    let henon_fit_time = t.elapsed();

    let l63 = generate_lorenz63(Lorenz63Params::default(), &FlowSpec::standard(vec![1.0, 1.0, 1.0]), 10_000).unwrap();
    let l63_model = build_model(&l63, DELTA, &KernelConfig::default()).unwrap();

    let p96 = Lorenz96Params::default();
    let mut x0 = vec![p96.forcing; p96.m];
    x0[0] += 0.01;
    let l96 = generate_lorenz96(p96, &FlowSpec::standard(x0), 20_000).unwrap();
    let l96_model = build_model(&l96, L96_DELTA, &KernelConfig::default()).unwrap();
    Fixtures { henon, henon_model, henon_fit_time, l63, l63_model, l96_model }
}

/// Criteria 1, 2 and the simplex part of 7 share one 10^5-step Henon run.
struct HenonRun {
    within_2: f64,
    within_3: f64,
    reverse: f64,
    complete: bool,
    elapsed: Duration,
    max_simplex_err: f64,
    min_weight: f64,
    evaluations: usize,
    l1_fwd: f64,
    l1_bwd: f64,
}

fn henon_run(f: &Fixtures) -> HenonRun {
    let t = Instant::now();
    let (mut max_err, mut min_w, mut evals) = (0.0f64, f64::INFINITY, 0usize);
    let run = simulate_observed(&f.henon_model, f.henon.point(0), 100_000, 1, DomainPolicy::Count, |rec| {
        let s: f64 = rec.weights.iter().sum();
        max_err = max_err.max((s - 1.0).abs());
        min_w = rec.weights.iter().copied().fold(min_w, f64::min);
        evals += 1;
    })
    .unwrap();
    let c = containment_check(&f.henon_model, &run, &f.henon).unwrap();
    let elapsed = f.henon_fit_time + t.elapsed();
    HenonRun {
        within_2: c.within_2delta,
        within_3: c.within_3delta,
        reverse: c.reverse_distance,
        complete: run.is_complete(),
        elapsed,
        max_simplex_err: max_err,
        min_weight: min_w,
        evaluations: evals,
        l1_fwd: l1_directed_hausdorff(&run.points, &f.henon, None).unwrap(),
        l1_bwd: l1_directed_hausdorff(&f.henon, &run.points, None).unwrap(),
    }
}

fn criterion_1(r: &HenonRun) -> Outcome {
    let pass = r.complete && r.within_2 >= 0.99 && r.within_3 == 1.0 && r.elapsed < Duration::from_secs(120);
    outcome(
        pass,
        format!(
            "within 2δ {:.5}, within 3δ {:.5}, complete {}, fit+run {:.1?}",
            r.within_2, r.within_3, r.complete, r.elapsed
        ),
    )
}

fn criterion_2(r: &HenonRun) -> Outcome {
    outcome(r.reverse <= 4.0 * DELTA, format!("training → simulated {:.4} (limit {})", r.reverse, 4.0 * DELTA))
}

fn criterion_3(f: &Fixtures, r: &HenonRun) -> Outcome {
    let run = simulate(&f.l63_model, f.l63.point(0), 100_000, 1).unwrap();
    let fwd = l1_directed_hausdorff(&run.points, &f.l63, None).unwrap();
    let bwd = l1_directed_hausdorff(&f.l63, &run.points, None).unwrap();
    let pass = r.l1_fwd <= 0.05 && r.l1_bwd <= 0.05 && fwd <= 0.35 && bwd <= 0.35 && run.is_complete();
    outcome(
        pass,
        format!(
            "henon L1 {:.4}/{:.4} (≤ 0.05), lorenz63 L1 {:.4}/{:.4} (≤ 0.35)",
            r.l1_fwd, r.l1_bwd, fwd, bwd
        ),
    )
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn stationarity(name: &str, chain: &TransitionModel, seed: u64) -> (bool, String) {
    if !check_irreducible(chain) {
        return (false, format!("{name}: reducible"));
    }
    let mut rng = SplitMix64::new(seed);
    let mut pis: Vec<Vec<f64>> = Vec::new();
    let mut worst_residual = 0.0f64;
    for _ in 0..10 {
        let start: Vec<f64> = (0..chain.len()).map(|_| rng.next_f64() + 1e-3).collect();
        let est = match stationary_from(chain, &start, 1e-10, DEFAULT_STATIONARY_MAX_ITERS) {
            Ok(e) => e,
            Err(e) => return (false, format!("{name}: {e}")),
        };
        let mut y = vec![0.0; chain.len()];
        chain.apply(&est.pi, &mut y);
        worst_residual = worst_residual.max(l1(&y, &est.pi));
        pis.push(est.pi);
    }
    let spread = pis.iter().map(|p| l1(p, &pis[0])).fold(0.0, f64::max);
    let pass = spread <= 1e-6 && worst_residual <= 1e-10;
    (pass, format!("{name}: m={} spread {spread:.1e} residual {worst_residual:.1e}", chain.len()))
}

fn criterion_4(f: &Fixtures) -> Outcome {
    let parts = [
        stationarity("henon", f.henon_model.transitions(), 10),
        stationarity("lorenz63", f.l63_model.transitions(), 11),
        stationarity("lorenz96", f.l96_model.transitions(), 12),
    ];
    outcome(parts.iter().all(|p| p.0), parts.iter().map(|p| p.1.as_str()).collect::<Vec<_>>().join("; "))
}

fn criterion_5(f: &Fixtures) -> Outcome {
    let mut rng = SplitMix64::new(5);
    let probes: Vec<usize> = (0..100).map(|_| rng.below(f.henon.len())).collect();
    let mut p99s = Vec::new();
    let mut pass = true;
    let mut detail = Vec::new();
    for delta in [0.4, 0.2, 0.1] {
        let model = if delta == DELTA {
            f.henon_model.clone()
        } else {
            build_model(&f.henon, delta, &KernelConfig::default()).unwrap()
        };
        let lip = estimate_lipschitz(&f.henon, delta).unwrap().value;
        let bound = 4.0 * delta * (1.0 + lip) + 2.0 * delta;
        let spreads: Vec<f64> = probes.iter().map(|&n| empirical_spread(&model, f.henon.point(n)).unwrap()).collect();
        let ok = spreads.iter().filter(|&&s| s <= bound).count();
        let p99 = percentile(&spreads, 0.99);
        pass &= ok >= 99;
        p99s.push(p99);
        detail.push(format!("δ={delta}: {ok}/100 ≤ {bound:.3}, p99 {p99:.4}"));
    }
    pass &= p99s.windows(2).all(|w| w[1] <= w[0]);
    outcome(pass, detail.join("; "))
}

fn criterion_6(f: &Fixtures) -> Outcome {
    let t = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();

    let cycle = TransitionModel::from_symbol_paths(3, &[vec![0, 1, 2, 0]]).unwrap();
    let itin: Vec<usize> = (0..200).map(|n| n % 3).collect();
    let ns: Vec<usize> = (1..=20).collect();
    let det = theta_curve(&cycle, &itin, &ns, 10_000, 6).unwrap();
    let det_ok = det.iter().all(|&v| v == 1.0);
    pass &= det_ok;
    detail.push(format!("deterministic θ=1 for N≤20: {det_ok}"));

    let coin = TransitionModel::from_symbol_paths(2, &[vec![0, 0, 1, 1, 0]]).unwrap();
    let mut rng = SplitMix64::new(66);
    let path: Vec<usize> = (0..2_000).map(|_| rng.below(2)).collect();
    let ns6: Vec<usize> = (1..=6).collect();
    let est = theta_curve(&coin, &path, &ns6, 10_000, 7).unwrap();
    let mut worst = 0.0f64;
    for (n, v) in ns6.iter().zip(&est) {
        let p = 0.5f64.powi(*n as i32);
        let sigma = (p * (1.0 - p) / 10_000.0).sqrt();
        worst = worst.max((v - p).abs() / sigma);
    }
    pass &= worst <= 3.0;
    detail.push(format!("fair coin max |θ̂-2^-N|/σ {worst:.2}"));

    for (name, model, series) in [
        ("henon", &f.henon_model, &f.henon),
        ("lorenz63", &f.l63_model, &f.l63),
    ] {
        let itin = state_itinerary(model, series);
        let curve = theta_curve(model.transitions(), &itin, &ns, 10_000, 8).unwrap();
        let mono = curve.windows(2).all(|w| w[1] <= w[0]);
        pass &= mono;
        detail.push(format!("{name} monotone {mono} (θ̂(1)={:.3}, θ̂(20)={:.3})", curve[0], curve[19]));
    }
    let l96_itin = state_itinerary(&f.l96_model, f.l96_model.series());
    let curve = theta_curve(f.l96_model.transitions(), &l96_itin, &ns, 10_000, 8).unwrap();
    let mono = curve.windows(2).all(|w| w[1] <= w[0]);
    pass &= mono;
    detail.push(format!("lorenz96 monotone {mono}"));

    let elapsed = t.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    detail.push(format!("{elapsed:.1?}"));
    outcome(pass, detail.join("; "))
}

/// Rejection-samples `m` points in the unit square at mutual distance ≥ `sep`.
fn separated_points(rng: &mut SplitMix64, m: usize, sep: f64) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = Vec::new();
    while pts.len() < m {
        let p = vec![rng.next_f64(), rng.next_f64()];
        if pts.iter().all(|q| znl::geometry::dist(&p, q) >= sep) {
            pts.push(p);
        }
    }
    pts
}

/// Ridge coefficients by an independent dense solve (row-major d × M).
fn dense_ridge(inputs: &[Vec<f64>], outputs: &[Vec<f64>], theta: f64, gamma: f64) -> Vec<f64> {
    let m = inputs.len();
    let d = outputs[0].len();
    let k = DMatrix::from_fn(m, m, |i, j| {
        let s: f64 = inputs[i].iter().zip(&inputs[j]).map(|(a, b)| (a - b) * (a - b)).sum();
        (-s / theta).exp()
    });
    let mut p = k.clone();
    for i in 0..m {
        let s: f64 = k.row(i).sum();
        for j in 0..m {
            p[(i, j)] = k[(i, j)] / s;
        }
    }
    let y = DMatrix::from_fn(m, d, |i, c| outputs[i][c]);
    let lhs = p.transpose() * &p + DMatrix::identity(m, m) * gamma;
    let rhs = p.transpose() * y;
    let at = lhs.lu().solve(&rhs).expect("nonsingular");
    let mut a = vec![0.0; d * m];
    for n in 0..m {
        for c in 0..d {
            a[c * m + n] = at[(n, c)];
        }
    }
    a
}

fn criterion_7(r: &HenonRun) -> Outcome {
    let mut rng = SplitMix64::new(77);
    // interpolation at γ = 0
    let mut worst_interp = 0.0f64;
    for trial in 0..50 {
        let m = 1 + trial % 20;
        let sep = 0.15;
        let inputs = separated_points(&mut rng, m, sep);
        let outputs: Vec<Vec<f64>> = (0..m).map(|_| vec![rng.normal(), rng.normal()]).collect();
        let mut flat: Vec<Vec<f64>> = Vec::new();
        for (x, y) in inputs.iter().zip(&outputs) {
            flat.push(x.clone());
            flat.push(y.clone());
        }
        let series = TimeSeries::from_points(&flat).unwrap();
        let samples: Vec<usize> = (0..m).map(|n| 2 * n).collect();
        let theta = sep * sep / 5.0;
        let map = EdgeMap::fit(&series, 0, 0, &samples, theta, 0.0).unwrap();
        for (x, y) in inputs.iter().zip(&outputs) {
            let got = map.evaluate(&series, x).unwrap();
            worst_interp = worst_interp.max(l1(&got, y));
        }
    }
    // ridge vs dense oracle
    let mut worst_ridge = 0.0f64;
    for _ in 0..20 {
        let inputs: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.next_f64(), rng.next_f64()]).collect();
        let outputs: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.normal(), rng.normal()]).collect();
        let theta = 0.05;
        let ins: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let outs: Vec<&[f64]> = outputs.iter().map(Vec::as_slice).collect();
        let ours = fit_coefficients(&ins, &outs, theta, 0.001).unwrap();
        let oracle = dense_ridge(&inputs, &outputs, theta, 0.001);
        worst_ridge = worst_ridge.max(ours.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let pass = worst_interp <= 1e-6 && r.max_simplex_err <= 1e-12 && r.min_weight >= 0.0 && worst_ridge <= 1e-10;
    outcome(
        pass,
        format!(
            "interpolation err {worst_interp:.1e}; simplex |Σv-1| ≤ {:.1e} over {} evaluations (min v {:.1e}); ridge vs dense {worst_ridge:.1e}",
            r.max_simplex_err, r.evaluations, r.min_weight
        ),
    )
}

fn literal_autocorrelation(s: &TimeSeries, t_max: usize) -> Vec<f64> {
    let n = s.len();
    let d = s.dim();
    let mut mean = vec![0.0; d];
    for p in s.points() {
        for c in 0..d {
            mean[c] += p[c];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    (1..=t_max)
        .map(|t| {
            let mut acc = 0.0;
            for i in 0..n - t_max {
                for c in 0..d {
                    acc += (s.point(i)[c] - mean[c]) * (s.point(i + t)[c] - mean[c]);
                }
            }
            acc / (n - t_max) as f64
        })
        .collect()
}

fn criterion_8(f: &Fixtures) -> Outcome {
    let truth = autocorrelation(&f.l63, 50).unwrap();
    let mut errs = Vec::new();
    for seed in 0..5 {
        let run = simulate(&f.l63_model, f.l63.point(0), f.l63.len() - 1, seed).unwrap();
        errs.push(relative_l2(&truth, &autocorrelation(&run.points, 50).unwrap()));
    }
    let mean_err = errs.iter().sum::<f64>() / errs.len() as f64;

    let mut rng = SplitMix64::new(88);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = 60 + rng.below(200);
        let d = 1 + rng.below(3);
        let data: Vec<f64> = (0..n * d).map(|_| rng.normal() * 3.0 + 1.0).collect();
        let s = TimeSeries::new(d, data).unwrap();
        let t = 1 + rng.below(50);
        let fast = autocorrelation(&s, t).unwrap();
        let slow = literal_autocorrelation(&s, t);
        worst = worst.max(fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    outcome(
        mean_err <= 0.30 && worst <= 1e-12,
        format!("lorenz63 mean relative L2 {mean_err:.4} over 5 seeds (≤ 0.30); estimator vs literal sum {worst:.1e}"),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut detail = Vec::new();
    let mut pass = true;
    for system in [SystemKind::Henon, SystemKind::Lorenz63] {
        let out = dir.path().join(format!("{system:?}"));
        let cfg = PipelineConfig { system, out: out.clone(), n: 5_000, steps: 20_000, ..Default::default() };
        cmd_pipeline(&cfg).unwrap();
        let first = snapshot(&out);
        cmd_pipeline(&cfg).unwrap();
        let second = snapshot(&out);
        let same = first == second;
        pass &= same;
        detail.push(format!("{system:?}: {} files identical {same}", first.len()));
    }
    outcome(pass, detail.join("; "))
}

fn criterion_10() -> Outcome {
    let mut rng = SplitMix64::new(1010);
    let mut mismatches = 0;
    for _ in 0..100 {
        let d = 1 + rng.below(4);
        let (na, nb) = (1 + rng.below(500), 1 + rng.below(500));
        let scale = 0.1 + 10.0 * rng.next_f64();
        let mut cloud = |n: usize| {
            let v: Vec<f64> = (0..n * d).map(|_| (rng.next_f64() * scale * 10.0).round() / 10.0).collect();
            TimeSeries::new(d, v).unwrap()
        };
        let a = cloud(na);
        let b = cloud(nb);
        let grid = nearest_distances(&a, &b, SetSearch::Grid).unwrap();
        let brute = nearest_distances(&a, &b, SetSearch::Brute).unwrap();
        let same = grid.iter().zip(&brute).all(|(x, y)| x.to_bits() == y.to_bits())
            && directed_hausdorff_with(&a, &b, SetSearch::Grid).unwrap().to_bits()
                == directed_hausdorff_with(&a, &b, SetSearch::Brute).unwrap().to_bits()
            && l1_directed_hausdorff_with(&a, &b, None, SetSearch::Grid).unwrap().to_bits()
                == l1_directed_hausdorff_with(&a, &b, None, SetSearch::Brute).unwrap().to_bits();
        mismatches += usize::from(!same);
    }
    outcome(mismatches == 0, format!("{mismatches}/100 pairs differ between grid and brute force"))
}

fn main() {
    let t = Instant::now();
    let f = fixtures();
    let run = henon_run(&f);
    let results = [
        ("1 forward containment", criterion_1(&run)),
        ("2 reverse coverage", criterion_2(&run)),
        ("3 L1-Hausdorff magnitude", criterion_3(&f, &run)),
        ("4 irreducibility and stationary measure", criterion_4(&f)),
        ("5 spread bound and zero-noise trend", criterion_5(&f)),
        ("6 itinerary fidelity", criterion_6(&f)),
        ("7 kernel correctness", criterion_7(&run)),
        ("8 autocorrelation fidelity", criterion_8(&f)),
        ("9 determinism", criterion_9()),
        ("10 set-metric oracle equivalence", criterion_10()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("criterion {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} passed in {:.1?}", results.len() - failed, results.len(), t.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
