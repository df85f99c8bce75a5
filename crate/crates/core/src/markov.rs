//! The assembled model and the step-skew-product Markov process on
//! `cells × ℝ^d`.
//!
//! One step from `(s, x)` draws the next cell `s'` from the probability
//! vector of `s` (inverse CDF in stored edge order) and moves the point with
//! the fitted map of edge `s → s'`. The cell draw depends only on `s` and
//! the generator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::{build_cover, CoverModel, CoverRecord};
use crate::error::{Result, ZnlError};
use crate::geometry::{dist, GridIndex};
use crate::kernel::{select_bandwidth, EdgeMap, KernelConfig, SimplexWeights};
use crate::rng::SplitMix64;
use crate::series::TimeSeries;
use crate::transitions::{build_transitions, TransitionModel, TransitionRecord};

pub const MODEL_FORMAT: &str = "znl-model/1";

#[derive(Debug, Clone)]
pub struct ZnlModel {
    series: TimeSeries,
    cover: CoverModel,
    transitions: TransitionModel,
    /// Cover restricted to the kept states: cell `k` here is state `k`.
    states: CoverModel,
    /// Edge maps per state, aligned with `transitions.edges(state)`.
    edge_maps: Vec<Vec<EdgeMap>>,
    kernel: KernelConfig,
    bandwidth: f64,
}

/// Model file layout: a single JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRecord {
    pub format: String,
    pub delta: f64,
    pub bandwidth: f64,
    pub kernel: KernelConfig,
    pub series: Vec<Vec<f64>>,
    pub cover: CoverRecord,
    pub transitions: TransitionRecord,
    pub edge_maps: Vec<EdgeMap>,
}

impl ZnlModel {
    pub fn series(&self) -> &TimeSeries {
        &self.series
    }

    pub fn cover(&self) -> &CoverModel {
        &self.cover
    }

    pub fn transitions(&self) -> &TransitionModel {
        &self.transitions
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn delta(&self) -> f64 {
        self.cover.delta()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Number of states m.
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn edge_maps(&self, state: usize) -> &[EdgeMap] {
        &self.edge_maps[state]
    }

    pub fn edge_map_count(&self) -> usize {
        self.edge_maps.iter().map(Vec::len).sum()
    }

    /// Nearest state and the distance to its center.
    pub fn locate(&self, x: &[f64]) -> (usize, f64) {
        let (s, d2) = self.states.nearest(x);
        (s, d2.sqrt())
    }

    pub fn state_center(&self, state: usize) -> &[f64] {
        self.states.center(state)
    }

    pub fn record(&self) -> ModelRecord {
        ModelRecord {
            format: MODEL_FORMAT.to_string(),
            delta: self.delta(),
            bandwidth: self.bandwidth,
            kernel: self.kernel.clone(),
            series: self.series.points().map(<[f64]>::to_vec).collect(),
            cover: self.cover.record(),
            transitions: self.transitions.record(),
            edge_maps: self.edge_maps.iter().flatten().cloned().collect(),
        }
    }

    pub fn from_record(rec: ModelRecord) -> Result<Self> {
        if rec.format != MODEL_FORMAT {
            return Err(ZnlError::Data(format!("unsupported model format {:?}", rec.format)));
        }
        let series = TimeSeries::from_points(&rec.series)?;
        let cover = CoverModel::from_record(&series, &rec.cover)?;
        let transitions = TransitionModel::from_record(&rec.transitions)?;
        let mut edge_maps: Vec<Vec<EdgeMap>> = vec![Vec::new(); transitions.len()];
        for map in rec.edge_maps {
            if map.from >= transitions.len() {
                return Err(ZnlError::Data(format!("edge map source {} out of range", map.from)));
            }
            edge_maps[map.from].push(map);
        }
        for (s, maps) in edge_maps.iter().enumerate() {
            let edges = transitions.edges(s);
            let aligned = maps.len() == edges.len()
                && maps.iter().zip(edges).all(|(m, e)| m.to == e.to && m.samples == e.samples);
            if !aligned {
                return Err(ZnlError::Data(format!("edge maps of state {s} do not match its edges")));
            }
        }
        let states = states_cover(&series, &cover, &transitions)?;
        Ok(ZnlModel {
            series,
            cover,
            transitions,
            states,
            edge_maps,
            kernel: rec.kernel,
            bandwidth: rec.bandwidth,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.record()).expect("model serializes")
    }

    /// SHA-256 of the serialized model, hex encoded.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: ModelRecord =
            serde_json::from_str(text).map_err(|e| ZnlError::json("parsing model", e))?;
        ZnlModel::from_record(rec)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

fn states_cover(series: &TimeSeries, cover: &CoverModel, transitions: &TransitionModel) -> Result<CoverModel> {
    let centers = transitions.cells().iter().map(|&c| cover.centers()[c]).collect();
    CoverModel::from_centers(series, cover.delta(), centers)
}

/// Cover, transitions and one fitted map per observed edge.
pub fn build_model(series: &TimeSeries, delta: f64, config: &KernelConfig) -> Result<ZnlModel> {
    config.validate()?;
    series.require_transitions()?;
    let cover = build_cover(series, delta)?;
    let transitions = build_transitions(series, &cover)?;
    let bandwidth = match config.bandwidth {
        Some(t) => t,
        None => select_bandwidth(series, config)?,
    };
    let jobs: Vec<(usize, usize, &[usize])> = (0..transitions.len())
        .flat_map(|s| transitions.edges(s).iter().map(move |e| (s, e.to, e.samples.as_slice())))
        .collect();
    let fitted: Result<Vec<EdgeMap>> = jobs
        .par_iter()
        .map(|&(from, to, samples)| EdgeMap::fit(series, from, to, samples, bandwidth, config.ridge))
        .collect();
    let mut edge_maps: Vec<Vec<EdgeMap>> = vec![Vec::new(); transitions.len()];
    for map in fitted? {
        edge_maps[map.from].push(map);
    }
    let states = states_cover(series, &cover, &transitions)?;
    let mut kernel = config.clone();
    kernel.bandwidth = Some(bandwidth);
    Ok(ZnlModel {
        series: series.clone(),
        cover,
        transitions,
        states,
        edge_maps,
        kernel,
        bandwidth,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovState {
    pub s: usize,
    pub x: Vec<f64>,
}

/// What one step did; handed to simulation observers.
#[derive(Debug, Clone)]
pub struct StepRecord<'a> {
    pub step: usize,
    pub from: &'a MarkovState,
    pub to: &'a MarkovState,
    /// Index of the taken edge within the source state's edge list.
    pub edge: usize,
    /// Normalized kernel weights used for the point update.
    pub weights: &'a [f64],
    /// Every raw kernel weight underflowed at this step.
    pub underflow: bool,
}

/// What to do when every raw kernel weight of an evaluation underflows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainPolicy {
    /// Use the normalized weights anyway and count the step.
    #[default]
    Count,
    /// Stop the run with an out-of-domain error.
    Abort,
}

fn step_inner(
    model: &ZnlModel,
    state: &MarkovState,
    rng: &mut SplitMix64,
    policy: DomainPolicy,
) -> Result<(MarkovState, usize, SimplexWeights)> {
    if state.s >= model.len() {
        return Err(ZnlError::Argument(format!("state {} out of range ({} states)", state.s, model.len())));
    }
    let k = rng.categorical(model.transitions.probs(state.s));
    let map = &model.edge_maps[state.s][k];
    let (w, y) = map.evaluate_with_weights(&model.series, &state.x)?;
    if w.underflow && policy == DomainPolicy::Abort {
        return Err(ZnlError::OutOfDomain { from: state.s, to: map.to, x: state.x.clone() });
    }
    Ok((MarkovState { s: map.to, x: y }, k, w))
}

/// One transition of the process.
pub fn step(model: &ZnlModel, state: &MarkovState, rng: &mut SplitMix64) -> Result<MarkovState> {
    step_inner(model, state, rng, DomainPolicy::Count).map(|(next, _, _)| next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub seed: u64,
    /// Cell sequence s_0, s_1, ... (a sample path of the symbol chain).
    pub symbols: Vec<usize>,
    /// Point sequence x_0, x_1, ...
    pub points: TimeSeries,
    /// Distance from x_0 to the nearest state center.
    pub initial_distance: f64,
    /// Steps at which every raw kernel weight underflowed.
    pub underflow_steps: usize,
    /// Set when the run stopped early; the recorded prefix is still valid.
    pub aborted: Option<Abort>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Abort {
    /// Index of the step that failed (1-based: the transition into sample `step`).
    pub step: usize,
    pub cell: usize,
    pub x: Vec<f64>,
    pub message: String,
}

impl SimulationRun {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.aborted.is_none()
    }

    pub fn state(&self, n: usize) -> MarkovState {
        MarkovState { s: self.symbols[n], x: self.points.point(n).to_vec() }
    }

    /// Far-start warning: x_0 lies more than 2δ from every state center.
    pub fn far_start(&self, delta: f64) -> bool {
        self.initial_distance > 2.0 * delta
    }

    /// `step,s,x0,...` rows; `s` is the 0-based state index.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,s");
        for c in 0..self.points.dim() {
            out.push_str(&format!(",x{c}"));
        }
        out.push('\n');
        for (n, s) in self.symbols.iter().enumerate() {
            out.push_str(&format!("{n},{s}"));
            for v in self.points.point(n) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// Reads the CSV written by [`SimulationRun::to_csv`]. Seed and run
    /// status live in the sidecar, so they are supplied by the caller.
    pub fn from_csv(text: &str, seed: u64, initial_distance: f64) -> Result<SimulationRun> {
        let table = TimeSeries::from_csv(text)?;
        if table.dim() < 3 {
            return Err(ZnlError::Data("run CSV needs step, s and at least one coordinate".into()));
        }
        let d = table.dim() - 2;
        let mut symbols = Vec::with_capacity(table.len());
        let mut data = Vec::with_capacity(table.len() * d);
        for (n, row) in table.points().enumerate() {
            if row[0] != n as f64 || row[1] < 0.0 || row[1].fract() != 0.0 {
                return Err(ZnlError::Data(format!("run CSV row {} has a bad step or state", n + 2)));
            }
            symbols.push(row[1] as usize);
            data.extend_from_slice(&row[2..]);
        }
        Ok(SimulationRun {
            seed,
            symbols,
            points: TimeSeries::new(d, data)?,
            initial_distance,
            underflow_steps: 0,
            aborted: None,
        })
    }

    /// Converts a truncated run into an error.
    pub fn into_result(self) -> Result<SimulationRun> {
        match &self.aborted {
            None => Ok(self),
            Some(a) => Err(ZnlError::Simulation {
                step: a.step,
                cell: a.cell,
                x: a.x.clone(),
                source: Box::new(ZnlError::Numeric(a.message.clone())),
            }),
        }
    }
}

/// Runs `n_steps` transitions from `x0`, starting in the nearest state.
pub fn simulate(model: &ZnlModel, x0: &[f64], n_steps: usize, seed: u64) -> Result<SimulationRun> {
    simulate_observed(model, x0, n_steps, seed, DomainPolicy::Count, |_| {})
}

/// [`simulate`] with an explicit domain policy and a callback after every
/// successful step.
pub fn simulate_observed<F>(
    model: &ZnlModel,
    x0: &[f64],
    n_steps: usize,
    seed: u64,
    policy: DomainPolicy,
    mut observer: F,
) -> Result<SimulationRun>
where
    F: FnMut(&StepRecord<'_>),
{
    if n_steps == 0 {
        return Err(ZnlError::Argument("n_steps must be at least 1".into()));
    }
    let d = model.series.dim();
    if x0.len() != d || x0.iter().any(|v| !v.is_finite()) {
        return Err(ZnlError::Argument(format!("initial point must be {d} finite coordinates")));
    }
    let (s0, initial_distance) = model.locate(x0);
    if initial_distance > 2.0 * model.delta() {
        log::warn!(
            "initial point is {initial_distance:.4} from the nearest cell center (more than 2δ = {})",
            2.0 * model.delta()
        );
    }
    let mut rng = SplitMix64::new(seed);
    let mut symbols = Vec::with_capacity(n_steps + 1);
    let mut data = Vec::with_capacity((n_steps + 1) * d);
    let mut state = MarkovState { s: s0, x: x0.to_vec() };
    symbols.push(state.s);
    data.extend_from_slice(&state.x);
    let mut aborted = None;
    let mut underflow_steps = 0;

    for n in 1..=n_steps {
        match step_inner(model, &state, &mut rng, policy) {
            Ok((next, edge, w)) => {
                underflow_steps += usize::from(w.underflow);
                observer(&StepRecord { step: n, from: &state, to: &next, edge, weights: &w.v, underflow: w.underflow });
                symbols.push(next.s);
                data.extend_from_slice(&next.x);
                state = next;
            }
            Err(e) => {
                log::warn!("simulation stopped at step {n}: {e}");
                aborted = Some(Abort { step: n, cell: state.s, x: state.x.clone(), message: e.to_string() });
                break;
            }
        }
    }
    Ok(SimulationRun {
        seed,
        symbols,
        points: TimeSeries::new(d, data)?,
        initial_distance,
        underflow_steps,
        aborted,
    })
}

/// Diameter of the support of the one-step distribution at `x`: the images
/// of `x` under every edge map leaving the nearest state.
pub fn empirical_spread(model: &ZnlModel, x: &[f64]) -> Result<f64> {
    let (s, _) = model.locate(x);
    let images: Vec<Vec<f64>> = model.edge_maps[s]
        .iter()
        .map(|m| m.evaluate(&model.series, x))
        .collect::<Result<_>>()?;
    let mut diam = 0.0f64;
    for (a, p) in images.iter().enumerate() {
        for q in &images[a + 1..] {
            diam = diam.max(dist(p, q));
        }
    }
    Ok(diam)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub value: f64,
    /// Number of sample pairs that entered the maximum.
    pub pairs: usize,
    /// All candidate pairs coincided; the estimate is 0 by convention.
    pub degenerate: bool,
}

/// Largest local secant slope `|x_{n+1} - x_{k+1}| / |x_n - x_k|` over pairs
/// with `0 < |x_n - x_k| <= 2δ`. A lower bound on the Lipschitz constant.
pub fn estimate_lipschitz(series: &TimeSeries, delta: f64) -> Result<LipschitzEstimate> {
    if series.len() < 3 {
        return Err(ZnlError::Argument("Lipschitz estimate needs at least 3 samples".into()));
    }
    if !(delta > 0.0) {
        return Err(ZnlError::Argument(format!("delta must be positive, got {delta}")));
    }
    let n = series.len() - 1;
    let heads = &series.as_flat()[..n * series.dim()];
    let grid = GridIndex::new(series.dim(), heads, 2.0 * delta);
    let (mut best, mut pairs, mut close) = (0.0f64, 0usize, 0usize);
    for i in 0..n {
        for j in grid.within(series.point(i), 2.0 * delta) {
            if j <= i {
                continue;
            }
            close += 1;
            let d_in = dist(series.point(i), series.point(j));
            if d_in == 0.0 {
                continue;
            }
            pairs += 1;
            best = best.max(dist(series.point(i + 1), series.point(j + 1)) / d_in);
        }
    }
    if close == 0 {
        return Err(ZnlError::Data(format!(
            "no sample pairs within 2δ = {}; increase delta",
            2.0 * delta
        )));
    }
    let degenerate = pairs == 0;
    if degenerate {
        log::warn!("all nearby sample pairs coincide; Lipschitz estimate set to 0");
    }
    Ok(LipschitzEstimate { value: best, pairs, degenerate })
}
