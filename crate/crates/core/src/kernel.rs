//! Gaussian kernels, bandwidth selection, Markov normalization and the
//! ridge-regressed transition maps.
//!
//! A transition map for edge `j → i` is fitted on the pairs `(x_n, x_{n+1})`,
//! `n ∈ X_{j→i}`. With `K_ab = exp(-|x_a - x_b|² / θ)` and the row-stochastic
//! `P = diag(ρ)⁻¹ K / M`, `ρ = K·1 / M`, the coefficients solve
//!
//! ```text
//! (PᵀP + γ I) Aᵀ = Pᵀ Y
//! ```
//!
//! and the map is evaluated as `y = A v`, where `v` are the kernel weights of
//! the query against the edge's inputs, normalized to sum to one. The output
//! is therefore always a convex combination of the columns of `A`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZnlError};
use crate::geometry::dist2;
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Fixed bandwidth θ; selected from the data when `None`.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    pub zero_threshold: f64,
    pub quantile: f64,
    pub subsample_fraction: f64,
    pub ridge: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            bandwidth: None,
            zero_threshold: 1e-14,
            quantile: 0.01,
            subsample_fraction: 0.1,
            ridge: 0.001,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.bandwidth {
            if !(t > 0.0) || !t.is_finite() {
                return Err(ZnlError::Argument(format!("bandwidth must be positive, got {t}")));
            }
        }
        if !(self.zero_threshold > 0.0 && self.zero_threshold < 1.0) {
            return Err(ZnlError::Argument("zero threshold must lie in (0, 1)".into()));
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(ZnlError::Argument("quantile must lie in (0, 1)".into()));
        }
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(ZnlError::Argument("subsample fraction must lie in (0, 1]".into()));
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            return Err(ZnlError::Argument("ridge coefficient must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Equispaced subsample indices: `k = max(2, ceil(fraction · n))` samples at `floor(i · n / k)`.
pub fn subsample_indices(n: usize, fraction: f64) -> Vec<usize> {
    let k = ((fraction * n as f64).ceil() as usize).clamp(2.min(n), n);
    (0..k).map(|i| i * n / k).collect()
}

/// Bandwidth θ such that an η-fraction of subsampled pairs have kernel value
/// at least `zero_threshold`: `θ = q_η / (-ln zero_threshold)`, where `q_η`
/// is the nearest-rank η-quantile of the nonzero pairwise squared distances.
///
/// If every subsampled point coincides (periodic data can alias with the
/// subsample stride), the subsample is redrawn from the distinct points.
pub fn select_bandwidth(series: &TimeSeries, config: &KernelConfig) -> Result<f64> {
    config.validate()?;
    if series.len() < 2 {
        return Err(ZnlError::Argument("bandwidth selection needs at least 2 samples".into()));
    }
    let all: Vec<&[f64]> = series.points().collect();
    let picked: Vec<&[f64]> = subsample_indices(all.len(), config.subsample_fraction).into_iter().map(|i| all[i]).collect();
    let mut sq = nonzero_sq_distances(&picked);
    if sq.is_empty() {
        let mut distinct = all.clone();
        distinct.sort_by(|a, b| a.iter().zip(*b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        distinct.dedup();
        let picked: Vec<&[f64]> = subsample_indices(distinct.len(), config.subsample_fraction)
            .into_iter()
            .map(|i| distinct[i])
            .collect();
        sq = nonzero_sq_distances(&picked);
    }
    if sq.is_empty() {
        return Err(ZnlError::Data("all samples coincide; the bandwidth would be zero".into()));
    }
    let rank = ((config.quantile * sq.len() as f64).ceil() as usize).clamp(1, sq.len());
    let (_, q, _) = sq.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*q / -config.zero_threshold.ln())
}

fn nonzero_sq_distances(points: &[&[f64]]) -> Vec<f64> {
    let mut sq = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for (a, p) in points.iter().enumerate() {
        for q in &points[a + 1..] {
            let d = dist2(p, q);
            if d > 0.0 {
                sq.push(d);
            }
        }
    }
    sq
}

/// Gaussian kernel matrix, row-major `M × M`, each pair evaluated once.
pub fn kernel_matrix(points: &[&[f64]], theta: f64) -> Vec<f64> {
    let m = points.len();
    let mut k = vec![0.0; m * m];
    for a in 0..m {
        k[a * m + a] = 1.0;
        for b in a + 1..m {
            let v = (-dist2(points[a], points[b]) / theta).exp();
            k[a * m + b] = v;
            k[b * m + a] = v;
        }
    }
    k
}

/// Degree vector `ρ = K·1/M` and row-stochastic `P = diag(ρ)⁻¹ K / M`.
pub fn markov_normalize(k: &[f64], m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    assert_eq!(k.len(), m * m);
    let mut rho = vec![0.0; m];
    let mut p = vec![0.0; m * m];
    for a in 0..m {
        let row = &k[a * m..(a + 1) * m];
        let sum: f64 = row.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(ZnlError::Numeric(format!("kernel row {a} has degree {sum}")));
        }
        rho[a] = sum / m as f64;
        for (dst, v) in p[a * m..(a + 1) * m].iter_mut().zip(row) {
            *dst = v / sum;
        }
    }
    Ok((rho, p))
}

/// In-place Cholesky of a symmetric positive definite row-major `n × n`
/// matrix; the lower triangle receives `L`.
fn cholesky(a: &mut [f64], n: usize) -> Result<()> {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let floor = scale * n as f64 * f64::EPSILON;
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > floor) {
            return Err(ZnlError::RankDeficient { pivot: d });
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    Ok(())
}

/// Solves `L Lᵀ x = b` for each column of the row-major `n × c` block `b`.
fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64], c: usize) {
    for col in 0..c {
        for i in 0..n {
            let mut s = b[i * c + col];
            for k in 0..i {
                s -= l[i * n + k] * b[k * c + col];
            }
            b[i * c + col] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i * c + col];
            for k in i + 1..n {
                s -= l[k * n + i] * b[k * c + col];
            }
            b[i * c + col] = s / l[i * n + i];
        }
    }
}

/// Ridge coefficients for inputs/outputs; returns `A` row-major `d × M`.
///
/// `λ = γ · ‖P‖_∞ = γ` since `P` is row-stochastic.
pub fn fit_coefficients(inputs: &[&[f64]], outputs: &[&[f64]], theta: f64, gamma: f64) -> Result<Vec<f64>> {
    let m = inputs.len();
    if m == 0 || outputs.len() != m {
        return Err(ZnlError::Argument(format!(
            "need matching nonempty inputs and outputs, got {} and {}",
            m,
            outputs.len()
        )));
    }
    let d = outputs[0].len();
    let k = kernel_matrix(inputs, theta);
    let (_, p) = markov_normalize(&k, m)?;

    // normal matrix PᵀP + λI
    let mut pt = vec![0.0; m * m];
    for r in 0..m {
        for a in 0..m {
            pt[a * m + r] = p[r * m + a];
        }
    }
    let mut normal = vec![0.0; m * m];
    for a in 0..m {
        let col_a = &pt[a * m..(a + 1) * m];
        for b in a..m {
            let s: f64 = col_a.iter().zip(&pt[b * m..(b + 1) * m]).map(|(x, y)| x * y).sum();
            normal[a * m + b] = s;
            normal[b * m + a] = s;
        }
        normal[a * m + a] += gamma;
    }
    // right-hand side PᵀY, M × d
    let mut rhs = vec![0.0; m * d];
    for r in 0..m {
        let y = outputs[r];
        for a in 0..m {
            let w = p[r * m + a];
            if w != 0.0 {
                for c in 0..d {
                    rhs[a * d + c] += w * y[c];
                }
            }
        }
    }
    cholesky(&mut normal, m)?;
    cholesky_solve(&normal, m, &mut rhs, d);

    // transpose Aᵀ (M × d) into A (d × M)
    let mut a = vec![0.0; d * m];
    for n in 0..m {
        for c in 0..d {
            a[c * m + n] = rhs[n * d + c];
        }
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(ZnlError::Numeric("non-finite ridge coefficients".into()));
    }
    Ok(a)
}

/// Normalized kernel weights of a query point.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexWeights {
    pub v: Vec<f64>,
    /// Every unnormalized weight `exp(-|x - x_n|^2 / θ)` is zero in f64.
    pub underflow: bool,
}

/// Kernel weights of `x` against `inputs`, normalized to sum to 1.
///
/// The largest weight is factored out before normalizing, so the result is
/// defined even where every raw weight underflows; that case is flagged.
/// `None` only for a non-finite query.
pub fn simplex_weights(inputs: &[&[f64]], theta: f64, x: &[f64]) -> Option<SimplexWeights> {
    let d2: Vec<f64> = inputs.iter().map(|p| dist2(x, p)).collect();
    let d2_min = d2.iter().copied().fold(f64::INFINITY, f64::min);
    if !d2_min.is_finite() {
        return None;
    }
    let mut v: Vec<f64> = d2.iter().map(|d| (-(d - d2_min) / theta).exp()).collect();
    let s: f64 = v.iter().sum();
    if !(s >= 1.0) || !s.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|w| *w /= s);
    Some(SimplexWeights { v, underflow: (-d2_min / theta).exp() == 0.0 })
}

/// `A v` for a row-major `d × M` coefficient block.
pub fn combine(coefficients: &[f64], d: usize, weights: &[f64]) -> Vec<f64> {
    let m = weights.len();
    (0..d)
        .map(|c| coefficients[c * m..(c + 1) * m].iter().zip(weights).map(|(a, w)| a * w).sum())
        .collect()
}

/// Fitted transition map of one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMap {
    pub from: usize,
    pub to: usize,
    /// Training sample indices `X_{j→i}`; outputs are the samples one step later.
    pub samples: Vec<usize>,
    pub bandwidth: f64,
    pub ridge: f64,
    /// Output dimension d.
    pub dim: usize,
    /// `A`, row-major `d × |samples|`.
    pub coefficients: Vec<f64>,
}

impl EdgeMap {
    pub fn fit(
        series: &TimeSeries,
        from: usize,
        to: usize,
        samples: &[usize],
        theta: f64,
        gamma: f64,
    ) -> Result<Self> {
        let inputs: Vec<&[f64]> = samples.iter().map(|&n| series.point(n)).collect();
        let outputs: Vec<&[f64]> = samples.iter().map(|&n| series.point(n + 1)).collect();
        let coefficients = fit_coefficients(&inputs, &outputs, theta, gamma)?;
        Ok(EdgeMap {
            from,
            to,
            samples: samples.to_vec(),
            bandwidth: theta,
            ridge: gamma,
            dim: series.dim(),
            coefficients,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Column `n` of `A`.
    pub fn column(&self, n: usize) -> Vec<f64> {
        let m = self.len();
        (0..self.dim).map(|c| self.coefficients[c * m + n]).collect()
    }

    /// Barycentric weights of `x` and the mapped point.
    pub fn evaluate_with_weights(&self, series: &TimeSeries, x: &[f64]) -> Result<(SimplexWeights, Vec<f64>)> {
        let inputs: Vec<&[f64]> = self.samples.iter().map(|&n| series.point(n)).collect();
        let w = simplex_weights(&inputs, self.bandwidth, x)
            .ok_or_else(|| ZnlError::OutOfDomain { from: self.from, to: self.to, x: x.to_vec() })?;
        let y = combine(&self.coefficients, self.dim, &w.v);
        Ok((w, y))
    }

    pub fn evaluate(&self, series: &TimeSeries, x: &[f64]) -> Result<Vec<f64>> {
        self.evaluate_with_weights(series, x).map(|(_, y)| y)
    }

    /// Like [`EdgeMap::evaluate`], but fails where every raw kernel weight underflows.
    pub fn evaluate_strict(&self, series: &TimeSeries, x: &[f64]) -> Result<Vec<f64>> {
        let (w, y) = self.evaluate_with_weights(series, x)?;
        if w.underflow {
            return Err(ZnlError::OutOfDomain { from: self.from, to: self.to, x: x.to_vec() });
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const NEG_LN_ZERO: f64 = 32.236_191_301_916_64; // -ln(1e-14)

    #[test]
    fn bandwidth_constant_distances() {
        // equilateral triangle with side 2: all squared distances 4
        let h = 3f64.sqrt();
        let s = TimeSeries::from_points(&[[0.0, 0.0], [2.0, 0.0], [1.0, h]]).unwrap();
        let cfg = KernelConfig { subsample_fraction: 1.0, ..Default::default() };
        let theta = select_bandwidth(&s, &cfg).unwrap();
        assert_abs_diff_eq!(theta, 4.0 / NEG_LN_ZERO, epsilon = 1e-12);
        assert_abs_diff_eq!(theta, 0.12408, epsilon = 1e-5);
    }

    #[test]
    fn bandwidth_two_points() {
        let s = TimeSeries::from_scalars(&[0.0, 1.0]).unwrap();
        for q in [0.01, 0.5, 0.99] {
            let cfg = KernelConfig { quantile: q, ..Default::default() };
            let theta = select_bandwidth(&s, &cfg).unwrap();
            assert_abs_diff_eq!(theta, 0.031021, epsilon = 1e-6);
        }
    }

    #[test]
    fn bandwidth_degenerate() {
        let s = TimeSeries::from_scalars(&[2.0, 2.0, 2.0]).unwrap();
        assert!(matches!(select_bandwidth(&s, &KernelConfig::default()), Err(ZnlError::Data(_))));
    }

    #[test]
    fn bandwidth_periodic_data_falls_back_to_distinct_points() {
        // stride 10 picks only the even samples
        let xs: Vec<f64> = (0..40).map(|n| (n % 2) as f64).collect();
        let s = TimeSeries::from_scalars(&xs).unwrap();
        let theta = select_bandwidth(&s, &KernelConfig::default()).unwrap();
        assert_abs_diff_eq!(theta, 1.0 / NEG_LN_ZERO, epsilon = 1e-15);
    }

    #[test]
    fn subsample_is_equispaced() {
        assert_eq!(subsample_indices(100, 0.1), vec![0, 10, 20, 30, 40, 50, 60, 70, 80, 90]);
        assert_eq!(subsample_indices(2, 0.1), vec![0, 1]);
    }

    #[test]
    fn kernel_matrix_basics() {
        assert_eq!(kernel_matrix(&[&[1.0, 2.0]], 0.5), vec![1.0]);
        let k = kernel_matrix(&[&[0.0], &[0.5f64.sqrt()]], 0.5);
        assert_abs_diff_eq!(k[1], (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(k[1], 0.367879, epsilon = 1e-6);
        assert_eq!(k[1].to_bits(), k[2].to_bits());
    }

    #[test]
    fn markov_normalize_small() {
        let (rho, p) = markov_normalize(&[1.0], 1).unwrap();
        assert_eq!((rho, p), (vec![1.0], vec![1.0]));

        let kv = 0.3;
        let (rho, p) = markov_normalize(&[1.0, kv, kv, 1.0], 2).unwrap();
        assert_abs_diff_eq!(rho[0], (1.0 + kv) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[0], 1.0 / (1.0 + kv), epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], kv / (1.0 + kv), epsilon = 1e-15);
        assert_abs_diff_eq!(p[2], kv / (1.0 + kv), epsilon = 1e-15);
        assert_abs_diff_eq!(p[3], 1.0 / (1.0 + kv), epsilon = 1e-15);
    }

    #[test]
    fn single_sample_fit_is_constant() {
        let a = fit_coefficients(&[&[0.3, 0.1]], &[&[2.0, -1.0]], 0.1, 0.0).unwrap();
        assert_eq!(a, vec![2.0, -1.0]);
        let y = combine(&a, 2, &simplex_weights(&[&[0.3, 0.1]], 0.1, &[5.0, 5.0]).unwrap().v);
        assert_eq!(y, vec![2.0, -1.0]);
    }

    #[test]
    fn two_point_interpolation() {
        let inputs: [&[f64]; 2] = [&[0.0], &[0.3]];
        let outputs: [&[f64]; 2] = [&[1.0], &[-2.0]];
        let theta = 0.05;
        let a = fit_coefficients(&inputs, &outputs, theta, 0.0).unwrap();
        for (x, y) in inputs.iter().zip(outputs) {
            let v = simplex_weights(&inputs, theta, x).unwrap().v;
            assert_abs_diff_eq!(combine(&a, 1, &v)[0], y[0], epsilon = 1e-8);
        }
        // midpoint gets the mean of the coefficients
        let v = simplex_weights(&inputs, theta, &[0.15]).unwrap().v;
        assert_abs_diff_eq!(combine(&a, 1, &v)[0], 0.5 * (a[0] + a[1]), epsilon = 1e-12);
    }

    #[test]
    fn duplicate_inputs_without_ridge_are_rank_deficient() {
        let inputs: [&[f64]; 2] = [&[0.0], &[0.0]];
        let outputs: [&[f64]; 2] = [&[1.0], &[2.0]];
        assert!(matches!(
            fit_coefficients(&inputs, &outputs, 0.1, 0.0),
            Err(ZnlError::RankDeficient { .. })
        ));
        assert!(fit_coefficients(&inputs, &outputs, 0.1, 1e-3).is_ok());
    }

    #[test]
    fn far_query_is_out_of_domain() {
        let s = TimeSeries::from_scalars(&[0.0, 1.0, 0.0]).unwrap();
        let map = EdgeMap::fit(&s, 0, 1, &[0], 1e-3, 0.001).unwrap();
        assert!(matches!(map.evaluate_strict(&s, &[100.0]), Err(ZnlError::OutOfDomain { .. })));
        assert_eq!(map.evaluate(&s, &[100.0]).unwrap(), map.evaluate(&s, &[0.0]).unwrap());
        assert!(matches!(map.evaluate(&s, &[f64::NAN]), Err(ZnlError::OutOfDomain { .. })));
    }

    #[test]
    fn shifted_weights_match_raw_when_representable() {
        let inputs: [&[f64]; 3] = [&[0.0], &[0.1], &[0.25]];
        let theta = 0.02;
        let x = [0.07];
        let raw: Vec<f64> = inputs.iter().map(|p| (-dist2(&x, p) / theta).exp()).collect();
        let total: f64 = raw.iter().sum();
        let w = simplex_weights(&inputs, theta, &x).unwrap();
        assert!(!w.underflow);
        for (a, b) in w.v.iter().zip(&raw) {
            assert_abs_diff_eq!(*a, b / total, epsilon = 1e-15);
        }
    }
}
