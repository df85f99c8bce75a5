//! Reconstruction-quality measures: set distances between point clouds,
//! coordinate autocorrelation, itinerary fidelity and containment checks.
//!
//! Directed distances read "from A to B": for every point of A, the distance
//! to its nearest point of B. Forward means simulated → training.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::CoverModel;
use crate::error::{Result, ZnlError};
use crate::geometry::{nearest_brute, GridIndex};
use crate::markov::{empirical_spread, SimulationRun, ZnlModel};
use crate::rng::SplitMix64;
use crate::series::TimeSeries;
use crate::transitions::TransitionModel;

/// Above this many target points nearest-distance queries use a grid.
pub const SET_GRID_THRESHOLD: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetSearch {
    Auto,
    Brute,
    Grid,
}

fn check_pair(a: &TimeSeries, b: &TimeSeries) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(ZnlError::Argument("point sets must be nonempty".into()));
    }
    if a.dim() != b.dim() {
        return Err(ZnlError::Argument(format!("dimension mismatch: {} vs {}", a.dim(), b.dim())));
    }
    Ok(())
}

/// Grid side giving roughly one point per occupied cell over the bounding box.
fn grid_side(b: &TimeSeries) -> f64 {
    let k = b.dim().min(3);
    let mut extent = 0.0f64;
    for c in 0..k {
        let (lo, hi) = b.points().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[c]), hi.max(p[c])));
        extent = extent.max(hi - lo);
    }
    let per_axis = (b.len() as f64).powf(1.0 / k as f64).ceil().max(1.0);
    let side = extent / per_axis;
    if side > 0.0 { side } else { 1.0 }
}

/// Distance from every point of `a` to its nearest point of `b`.
pub fn nearest_distances(a: &TimeSeries, b: &TimeSeries, search: SetSearch) -> Result<Vec<f64>> {
    check_pair(a, b)?;
    let use_grid = match search {
        SetSearch::Auto => b.len() > SET_GRID_THRESHOLD,
        SetSearch::Brute => false,
        SetSearch::Grid => true,
    };
    let pts: Vec<&[f64]> = a.points().collect();
    let d2: Vec<f64> = if use_grid {
        let grid = GridIndex::new(b.dim(), b.as_flat(), grid_side(b));
        pts.par_iter().map(|p| grid.nearest(p).expect("nonempty").1).collect()
    } else {
        pts.par_iter().map(|p| nearest_brute(b.points(), p).expect("nonempty").1).collect()
    };
    Ok(d2.into_iter().map(f64::sqrt).collect())
}

pub fn directed_hausdorff(a: &TimeSeries, b: &TimeSeries) -> Result<f64> {
    directed_hausdorff_with(a, b, SetSearch::Auto)
}

/// `max_{a∈A} min_{b∈B} |a - b|`.
pub fn directed_hausdorff_with(a: &TimeSeries, b: &TimeSeries, search: SetSearch) -> Result<f64> {
    Ok(nearest_distances(a, b, search)?.into_iter().fold(0.0, f64::max))
}

pub fn l1_directed_hausdorff(a: &TimeSeries, b: &TimeSeries, weights: Option<&[f64]>) -> Result<f64> {
    l1_directed_hausdorff_with(a, b, weights, SetSearch::Auto)
}

/// Weighted mean over A of the distance to B; uniform weights when `None`.
pub fn l1_directed_hausdorff_with(
    a: &TimeSeries,
    b: &TimeSeries,
    weights: Option<&[f64]>,
    search: SetSearch,
) -> Result<f64> {
    let d = nearest_distances(a, b, search)?;
    match weights {
        None => Ok(d.iter().sum::<f64>() / d.len() as f64),
        Some(w) => {
            if w.len() != d.len() {
                return Err(ZnlError::Argument(format!("{} weights for {} points", w.len(), d.len())));
            }
            let total: f64 = w.iter().sum();
            if w.iter().any(|&v| !(v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(ZnlError::Argument("weights must be nonnegative and sum to 1".into()));
            }
            Ok(w.iter().zip(&d).map(|(w, d)| w * d).sum())
        }
    }
}

/// `Δ(t) = 1/(N-T) Σ_{n<N-T} <x_n - x̄, x_{n+t} - x̄>` for `t = 1..=T`.
///
/// The normalizer is the same for every lag.
pub fn autocorrelation(series: &TimeSeries, max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if max_lag == 0 || max_lag >= n {
        return Err(ZnlError::Argument(format!("lag horizon {max_lag} must be in 1..{n}")));
    }
    let mean = series.mean();
    let d = series.dim();
    let centered: Vec<f64> = series.as_flat().iter().enumerate().map(|(k, v)| v - mean[k % d]).collect();
    let terms = n - max_lag;
    Ok((1..=max_lag)
        .map(|t| {
            let mut acc = 0.0;
            for i in 0..terms {
                let a = &centered[i * d..(i + 1) * d];
                let b = &centered[(i + t) * d..(i + t + 1) * d];
                acc += a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            }
            acc / terms as f64
        })
        .collect())
}

/// `|a - b|_2 / |a|_2`.
pub fn relative_l2(reference: &[f64], other: &[f64]) -> f64 {
    let num: f64 = reference.iter().zip(other).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = reference.iter().map(|a| a * a).sum();
    (num / den).sqrt()
}

/// Cell visited by each sample.
pub fn itinerary(series: &TimeSeries, cover: &CoverModel) -> Vec<usize> {
    cover.labels(series)
}

/// Itinerary in the state indices of a model (nearest kept center).
pub fn state_itinerary(model: &ZnlModel, series: &TimeSeries) -> Vec<usize> {
    let pts: Vec<&[f64]> = series.points().collect();
    pts.par_iter().map(|p| model.locate(p).0).collect()
}

/// Monte Carlo estimate of the probability that the symbol chain follows
/// the true itinerary for `n` steps.
pub fn theta_fidelity(
    chain: &TransitionModel,
    itinerary: &[usize],
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    Ok(theta_curve(chain, itinerary, &[n], n_samples, seed)?[0])
}

/// [`theta_fidelity`] at several horizons with common random numbers.
///
/// Sample `k` uses the generator stream `(seed, k)`: one anchor drawn from
/// the positions that allow the largest horizon, then one chain path. Every
/// horizon scores the same paths, so the curve is non-increasing.
pub fn theta_curve(
    chain: &TransitionModel,
    itinerary: &[usize],
    horizons: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n_max = horizons.iter().copied().max().unwrap_or(0);
    if horizons.contains(&0) || horizons.is_empty() {
        return Err(ZnlError::Argument("horizons must be at least 1".into()));
    }
    if n_samples == 0 {
        return Err(ZnlError::Argument("n_samples must be at least 1".into()));
    }
    if itinerary.len() <= n_max {
        return Err(ZnlError::Argument(format!(
            "itinerary of length {} is too short for horizon {n_max}",
            itinerary.len()
        )));
    }
    if let Some(&s) = itinerary.iter().find(|&&s| s >= chain.len()) {
        return Err(ZnlError::Argument(format!("symbol {s} is not a state of the chain")));
    }
    let anchors = itinerary.len() - n_max;
    // matched[k] = number of leading steps that agree with the itinerary
    let matched: Vec<usize> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = SplitMix64::stream(seed, k as u64);
            let a = rng.below(anchors);
            let mut s = itinerary[a];
            let mut ok = 0;
            for t in 1..=n_max {
                let e = rng.categorical(chain.probs(s));
                s = chain.edges(s)[e].to;
                if s != itinerary[a + t] {
                    break;
                }
                ok = t;
            }
            ok
        })
        .collect();
    Ok(horizons
        .iter()
        .map(|&n| matched.iter().filter(|&&m| m >= n).count() as f64 / n_samples as f64)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Containment {
    /// Fraction of simulated points within δ of the training set.
    pub within_delta: f64,
    pub within_2delta: f64,
    pub within_3delta: f64,
    /// Directed Hausdorff distance from the training set to the simulated cloud.
    pub reverse_distance: f64,
}

pub fn containment_check(model: &ZnlModel, run: &SimulationRun, series: &TimeSeries) -> Result<Containment> {
    let fwd = nearest_distances(&run.points, series, SetSearch::Auto)?;
    let delta = model.delta();
    let frac = |r: f64| fwd.iter().filter(|&&d| d <= r).count() as f64 / fwd.len() as f64;
    Ok(Containment {
        within_delta: frac(delta),
        within_2delta: frac(2.0 * delta),
        within_3delta: frac(3.0 * delta),
        reverse_distance: directed_hausdorff(series, &run.points)?,
    })
}

/// Nearest-rank percentile, `q` in (0, 1].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Empirical spread at `count` training samples drawn with `seed`
/// (every sample when `count` is at least the series length).
pub fn spread_samples(model: &ZnlModel, series: &TimeSeries, count: usize, seed: u64) -> Result<Vec<f64>> {
    let idx: Vec<usize> = if count >= series.len() {
        (0..series.len()).collect()
    } else {
        let mut rng = SplitMix64::new(seed);
        (0..count).map(|_| rng.below(series.len())).collect()
    };
    idx.par_iter().map(|&n| empirical_spread(model, series.point(n))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    pub lags: usize,
    pub theta_horizons: Vec<usize>,
    pub theta_samples: usize,
    pub spread_probes: usize,
    pub seed: u64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            lags: 50,
            theta_horizons: vec![1, 2, 4, 8, 16],
            theta_samples: 10_000,
            spread_probes: 1_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    /// Simulated → training.
    pub hauss_fwd: f64,
    /// Training → simulated.
    pub hauss_bwd: f64,
    pub l1_fwd: f64,
    pub l1_bwd: f64,
    pub autocorr_true: Vec<f64>,
    pub autocorr_sim: Vec<f64>,
    pub autocorr_rel_err: f64,
    pub theta_horizons: Vec<usize>,
    pub theta_curve: Vec<f64>,
    pub spread_p99: f64,
    pub containment: Containment,
    /// Stand-in for an undefined bias column: |mean(sim) - mean(train)|.
    pub mean_offset: f64,
    pub simulated_points: usize,
    pub run_complete: bool,
    /// Simulation steps taken where every raw kernel weight underflowed.
    pub underflow_steps: usize,
}

impl DiagnosticsReport {
    /// Two-column `lag,value` CSV of an autocorrelation curve.
    pub fn curve_csv(curve: &[f64]) -> String {
        let mut out = String::from("lag,value\n");
        for (t, v) in curve.iter().enumerate() {
            out.push_str(&format!("{},{}\n", t + 1, v));
        }
        out
    }

    pub fn theta_csv(&self) -> String {
        let mut out = String::from("n,theta\n");
        for (n, v) in self.theta_horizons.iter().zip(&self.theta_curve) {
            out.push_str(&format!("{n},{v}\n"));
        }
        out
    }
}

pub fn diagnose(model: &ZnlModel, run: &SimulationRun, series: &TimeSeries, cfg: &DiagnosticsConfig) -> Result<DiagnosticsReport> {
    if run.is_empty() {
        return Err(ZnlError::Argument("simulation run is empty".into()));
    }
    let sim = &run.points;
    let fwd = nearest_distances(sim, series, SetSearch::Auto)?;
    let bwd = nearest_distances(series, sim, SetSearch::Auto)?;
    let autocorr_true = autocorrelation(series, cfg.lags)?;
    let autocorr_sim = autocorrelation(sim, cfg.lags)?;
    let itin = state_itinerary(model, series);
    let theta = theta_curve(model.transitions(), &itin, &cfg.theta_horizons, cfg.theta_samples, cfg.seed)?;
    let spreads = spread_samples(model, series, cfg.spread_probes, cfg.seed)?;
    let delta = model.delta();
    let frac = |r: f64| fwd.iter().filter(|&&d| d <= r).count() as f64 / fwd.len() as f64;
    let containment = Containment {
        within_delta: frac(delta),
        within_2delta: frac(2.0 * delta),
        within_3delta: frac(3.0 * delta),
        reverse_distance: bwd.iter().copied().fold(0.0, f64::max),
    };
    let (ms, mt) = (sim.mean(), series.mean());
    Ok(DiagnosticsReport {
        hauss_fwd: fwd.iter().copied().fold(0.0, f64::max),
        hauss_bwd: containment.reverse_distance,
        l1_fwd: fwd.iter().sum::<f64>() / fwd.len() as f64,
        l1_bwd: bwd.iter().sum::<f64>() / bwd.len() as f64,
        autocorr_rel_err: relative_l2(&autocorr_true, &autocorr_sim),
        autocorr_true,
        autocorr_sim,
        theta_horizons: cfg.theta_horizons.clone(),
        theta_curve: theta,
        spread_p99: percentile(&spreads, 0.99),
        containment,
        mean_offset: crate::geometry::dist(&ms, &mt),
        simulated_points: sim.len(),
        run_complete: run.is_complete(),
        underflow_steps: run.underflow_steps,
    })
}
