//! Benchmark trajectories: Lorenz 63, Henon, Lorenz 96, and user-supplied maps.
//!
//! Flows are integrated with classical fixed-step RK4 and recorded every
//! `sample_stride` steps, so a sampled flow is treated as a discrete map.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZnlError};
use crate::series::TimeSeries;

/// States with `|x|_inf` above this are treated as divergence.
pub const BLOW_UP_NORM: f64 = 1e6;

/// Integration and sampling schedule for a flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub dt: f64,
    pub sample_stride: usize,
    pub transient_skip: usize,
    pub initial_state: Vec<f64>,
}

impl FlowSpec {
    /// dt = 0.01, one sample every 10 steps, 5000 transient steps.
    pub fn standard(initial_state: Vec<f64>) -> Self {
        FlowSpec { dt: 0.01, sample_stride: 10, transient_skip: 5000, initial_state }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(ZnlError::Argument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.sample_stride == 0 {
            return Err(ZnlError::Argument("sample_stride must be at least 1".into()));
        }
        if self.initial_state.is_empty() || self.initial_state.iter().any(|v| !v.is_finite()) {
            return Err(ZnlError::Argument("initial state must be nonempty and finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lorenz63Params {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
}

impl Default for Lorenz63Params {
    fn default() -> Self {
        Lorenz63Params { sigma: 10.0, rho: 28.0, beta: 8.0 / 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HenonParams {
    pub a: f64,
    pub b: f64,
}

impl Default for HenonParams {
    fn default() -> Self {
        HenonParams { a: 1.4, b: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lorenz96Params {
    pub forcing: f64,
    pub m: usize,
}

impl Default for Lorenz96Params {
    fn default() -> Self {
        Lorenz96Params { forcing: 8.0, m: 10 }
    }
}

/// A vector field writes `dx/dt` at `x` into `out`.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], out: &mut [f64]);
}

impl<F: Fn(&[f64], &mut [f64])> VectorField for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.1)(x, out)
    }
}

impl VectorField for Lorenz63Params {
    fn dim(&self) -> usize {
        3
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma * (x[1] - x[0]);
        out[1] = x[0] * (self.rho - x[2]) - x[1];
        out[2] = x[0] * x[1] - self.beta * x[2];
    }
}

impl VectorField for Lorenz96Params {
    fn dim(&self) -> usize {
        self.m
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let m = self.m;
        for n in 0..m {
            let next = x[(n + 1) % m];
            let prev = x[(n + m - 1) % m];
            let prev2 = x[(n + m - 2) % m];
            out[n] = (next - prev2) * prev - x[n] + self.forcing;
        }
    }
}

fn check_field(x: &[f64], dx: &[f64]) -> Result<()> {
    if dx.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ZnlError::Integration { state: x.to_vec() })
    }
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step<F: VectorField + ?Sized>(field: &F, x: &[f64], dt: f64) -> Result<Vec<f64>> {
    let d = x.len();
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut tmp = vec![0.0; d];

    field.eval(x, &mut k1);
    check_field(x, &k1)?;
    for i in 0..d {
        tmp[i] = x[i] + 0.5 * dt * k1[i];
    }
    field.eval(&tmp, &mut k2);
    check_field(&tmp, &k2)?;
    for i in 0..d {
        tmp[i] = x[i] + 0.5 * dt * k2[i];
    }
    field.eval(&tmp, &mut k3);
    check_field(&tmp, &k3)?;
    for i in 0..d {
        tmp[i] = x[i] + dt * k3[i];
    }
    field.eval(&tmp, &mut k4);
    check_field(&tmp, &k4)?;

    Ok((0..d)
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

fn guard(x: &[f64], step: usize) -> Result<()> {
    let norm = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if norm > BLOW_UP_NORM || !norm.is_finite() {
        return Err(ZnlError::BlowUp { step, norm });
    }
    Ok(())
}

/// Integrates `field` and records `n + 1` samples after the transient.
pub fn integrate_flow<F: VectorField + ?Sized>(
    field: &F,
    spec: &FlowSpec,
    n: usize,
) -> Result<TimeSeries> {
    spec.validate()?;
    if spec.initial_state.len() != field.dim() {
        return Err(ZnlError::Argument(format!(
            "initial state has dimension {}, vector field expects {}",
            spec.initial_state.len(),
            field.dim()
        )));
    }
    let mut x = spec.initial_state.clone();
    let mut step = 0;
    for _ in 0..spec.transient_skip {
        x = rk4_step(field, &x, spec.dt)?;
        step += 1;
        guard(&x, step)?;
    }
    let mut data = Vec::with_capacity((n + 1) * x.len());
    data.extend_from_slice(&x);
    for _ in 0..n {
        for _ in 0..spec.sample_stride {
            x = rk4_step(field, &x, spec.dt)?;
            step += 1;
            guard(&x, step)?;
        }
        data.extend_from_slice(&x);
    }
    TimeSeries::new(x.len(), data)
}

pub fn generate_lorenz63(params: Lorenz63Params, spec: &FlowSpec, n: usize) -> Result<TimeSeries> {
    if ![params.sigma, params.rho, params.beta].iter().all(|v| v.is_finite()) {
        return Err(ZnlError::Argument("Lorenz 63 parameters must be finite".into()));
    }
    integrate_flow(&params, spec, n)
}

pub fn generate_lorenz96(params: Lorenz96Params, spec: &FlowSpec, n: usize) -> Result<TimeSeries> {
    if params.m < 4 {
        return Err(ZnlError::Argument(format!(
            "Lorenz 96 needs m >= 4 oscillators, got {}",
            params.m
        )));
    }
    if !params.forcing.is_finite() {
        return Err(ZnlError::Argument("Lorenz 96 forcing must be finite".into()));
    }
    integrate_flow(&params, spec, n)
}

/// Iterates a discrete map: discards `transient` iterates, then records `n + 1` samples.
pub fn iterate_map<M>(map: M, x0: &[f64], n: usize, transient: usize) -> Result<TimeSeries>
where
    M: Fn(&[f64]) -> Vec<f64>,
{
    if n == 0 {
        return Err(ZnlError::Argument("need at least one iterate".into()));
    }
    let mut x = x0.to_vec();
    guard(&x, 0)?;
    for step in 1..=transient {
        x = map(&x);
        guard(&x, step)?;
    }
    let mut data = Vec::with_capacity((n + 1) * x.len());
    data.extend_from_slice(&x);
    for k in 1..=n {
        x = map(&x);
        guard(&x, transient + k)?;
        data.extend_from_slice(&x);
    }
    TimeSeries::new(x.len(), data)
}

pub fn henon_map(params: HenonParams) -> impl Fn(&[f64]) -> Vec<f64> {
    move |x: &[f64]| vec![1.0 + x[1] - params.a * x[0] * x[0], params.b * x[0]]
}

/// Henon orbit of `n + 1` samples starting `transient` iterates after `x0`.
pub fn generate_henon(params: HenonParams, x0: [f64; 2], n: usize, transient: usize) -> Result<TimeSeries> {
    iterate_map(henon_map(params), &x0, n, transient)
}
