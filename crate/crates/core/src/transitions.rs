//! Cell-to-cell transition statistics and the column-stochastic matrix ℙ.
//!
//! For every observed pair `(x_n, x_{n+1})` with `x_n` in cell `j` and
//! `x_{n+1}` in cell `i`, sample `n` joins the edge set `X_{j→i}`. The
//! probability vector of cell `j` is `|X_{j→i}| / Σ_l |X_{j→l}|` over the
//! observed targets, and column `j` of ℙ is that vector.
//!
//! A finite trajectory leaves transient cells at its head and tail that no
//! cycle passes through. [`build_transitions`] keeps the largest strongly
//! connected class of cells and renormalizes over the surviving edges, so the
//! fitted chain is irreducible; the dropped cover cells are recorded.

use serde::{Deserialize, Serialize};

use crate::cover::CoverModel;
use crate::error::{Result, ZnlError};
use crate::series::TimeSeries;

/// Default L1 tolerance on `‖ℙπ − π‖₁`.
pub const DEFAULT_STATIONARY_TOL: f64 = 1e-10;
pub const DEFAULT_STATIONARY_MAX_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Target state.
    pub to: usize,
    /// Sample indices `n` with `x_n` in the source cell and `x_{n+1}` in the target.
    pub samples: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    /// State `k` corresponds to cover cell `cells[k]`.
    cells: Vec<usize>,
    /// Outgoing edges per state, sorted by target.
    edges: Vec<Vec<Edge>>,
    /// Probability vector per state, aligned with `edges`.
    probs: Vec<Vec<f64>>,
    /// Cover cells that were not kept as states.
    dropped: Vec<usize>,
}

/// Serialized form of a [`TransitionModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub cells: Vec<usize>,
    pub dropped: Vec<usize>,
    pub edges: Vec<EdgeRecord>,
    pub probs: Vec<Vec<f64>>,
    /// Sparse ℙ as `(col, row, value)` triples, column-major order.
    pub matrix: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: usize,
    pub to: usize,
    pub samples: Vec<usize>,
}

impl TransitionModel {
    /// Counts transitions along one or more symbol paths over states `0..m`.
    ///
    /// Sample indices are positions in the concatenation of the paths, so a
    /// single path's indices are plain time indices. States without any
    /// outgoing transition are kept with an empty row only if `m` says so;
    /// use [`TransitionModel::restrict_to_core`] to obtain a stochastic model.
    pub fn from_symbol_paths(m: usize, paths: &[Vec<usize>]) -> Result<Self> {
        let mut per_source: Vec<std::collections::BTreeMap<usize, Vec<usize>>> =
            vec![Default::default(); m];
        let mut offset = 0;
        for path in paths {
            if let Some(&s) = path.iter().find(|&&s| s >= m) {
                return Err(ZnlError::Data(format!("symbol {s} out of range for {m} states")));
            }
            for (n, w) in path.windows(2).enumerate() {
                per_source[w[0]].entry(w[1]).or_default().push(offset + n);
            }
            offset += path.len();
        }
        let edges: Vec<Vec<Edge>> = per_source
            .into_iter()
            .map(|map| map.into_iter().map(|(to, samples)| Edge { to, samples }).collect())
            .collect();
        let probs = edges.iter().map(|row| probabilities(row)).collect();
        Ok(TransitionModel { cells: (0..m).collect(), edges, probs, dropped: Vec::new() })
    }

    pub fn from_record(rec: &TransitionRecord) -> Result<Self> {
        let m = rec.cells.len();
        let mut edges: Vec<Vec<Edge>> = vec![Vec::new(); m];
        for e in &rec.edges {
            if e.from >= m || e.to >= m {
                return Err(ZnlError::Data(format!("edge {}->{} out of range", e.from, e.to)));
            }
            edges[e.from].push(Edge { to: e.to, samples: e.samples.clone() });
        }
        for row in &mut edges {
            row.sort_by_key(|e| e.to);
        }
        if rec.probs.len() != m || rec.probs.iter().zip(&edges).any(|(p, e)| p.len() != e.len()) {
            return Err(ZnlError::Data("probability vectors do not match edge lists".into()));
        }
        let model = TransitionModel {
            cells: rec.cells.clone(),
            edges,
            probs: rec.probs.clone(),
            dropped: rec.dropped.clone(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn record(&self) -> TransitionRecord {
        let mut edges = Vec::new();
        for (from, row) in self.edges.iter().enumerate() {
            for e in row {
                edges.push(EdgeRecord { from, to: e.to, samples: e.samples.clone() });
            }
        }
        TransitionRecord {
            cells: self.cells.clone(),
            dropped: self.dropped.clone(),
            edges,
            probs: self.probs.clone(),
            matrix: self.triples(),
        }
    }

    fn validate(&self) -> Result<()> {
        for (j, (row, p)) in self.edges.iter().zip(&self.probs).enumerate() {
            if row.is_empty() {
                return Err(ZnlError::Data(format!("state {j} has no outgoing transition")));
            }
            if row.iter().any(|e| e.samples.is_empty()) {
                return Err(ZnlError::Data(format!("state {j} has an edge without samples")));
            }
            let total: f64 = p.iter().sum();
            if p.iter().any(|&v| !(v >= 0.0)) || (total - 1.0).abs() > 1e-12 {
                return Err(ZnlError::Data(format!("state {j} probabilities sum to {total}")));
            }
        }
        Ok(())
    }

    /// Number of states m.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Cover cell of each state (the compaction map).
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn dropped_cells(&self) -> &[usize] {
        &self.dropped
    }

    /// State of a cover cell, if that cell was kept.
    pub fn state_of_cell(&self, cell: usize) -> Option<usize> {
        self.cells.binary_search(&cell).ok()
    }

    pub fn edges(&self, state: usize) -> &[Edge] {
        &self.edges[state]
    }

    pub fn probs(&self, state: usize) -> &[f64] {
        &self.probs[state]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Probability of `from → to` (ℙ[to, from]).
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        match self.edges[from].binary_search_by_key(&to, |e| e.to) {
            Ok(k) => self.probs[from][k],
            Err(_) => 0.0,
        }
    }

    /// Sparse ℙ as `(col, row, value)`.
    pub fn triples(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (j, (row, p)) in self.edges.iter().zip(&self.probs).enumerate() {
            for (e, &v) in row.iter().zip(p) {
                out.push((j, e.to, v));
            }
        }
        out
    }

    /// Dense column-stochastic ℙ, row-major `m × m`. For tests and small models.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let m = self.len();
        let mut p = vec![vec![0.0; m]; m];
        for (j, i, v) in self.triples() {
            p[i][j] = v;
        }
        p
    }

    /// `y = ℙ x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for (j, (row, p)) in self.edges.iter().zip(&self.probs).enumerate() {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for (e, &v) in row.iter().zip(p) {
                y[e.to] += v * xj;
            }
        }
    }

    /// Strongly connected components, each sorted, listed by lowest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj: Vec<Vec<usize>> =
            self.edges.iter().map(|row| row.iter().map(|e| e.to).collect()).collect();
        let mut comps = tarjan_scc(&adj);
        for c in &mut comps {
            c.sort_unstable();
        }
        comps.sort_by_key(|c| c[0]);
        comps
    }

    /// Keeps the largest strongly connected class that carries at least one
    /// edge (ties: the class with the lowest state), dropping every edge that
    /// leaves it and renormalizing.
    pub fn restrict_to_core(&self) -> Result<TransitionModel> {
        let comps = self.components();
        let has_edge = |c: &Vec<usize>| {
            c.len() > 1 || self.edges[c[0]].iter().any(|e| e.to == c[0])
        };
        let core = comps
            .iter()
            .filter(|c| has_edge(c))
            .fold(None::<&Vec<usize>>, |best, c| match best {
                Some(b) if b.len() >= c.len() => Some(b),
                _ => Some(c),
            })
            .ok_or_else(|| {
                ZnlError::Data(
                    "no cell is ever revisited: the transition graph has no cycle (increase delta or the series length)"
                        .into(),
                )
            })?;

        let mut remap = vec![usize::MAX; self.len()];
        for (k, &s) in core.iter().enumerate() {
            remap[s] = k;
        }
        let mut edges = Vec::with_capacity(core.len());
        for &s in core {
            let row: Vec<Edge> = self.edges[s]
                .iter()
                .filter(|e| remap[e.to] != usize::MAX)
                .map(|e| Edge { to: remap[e.to], samples: e.samples.clone() })
                .collect();
            edges.push(row);
        }
        let probs = edges.iter().map(|row| probabilities(row)).collect();
        let cells: Vec<usize> = core.iter().map(|&s| self.cells[s]).collect();
        let mut dropped = self.dropped.clone();
        dropped.extend((0..self.len()).filter(|&s| remap[s] == usize::MAX).map(|s| self.cells[s]));
        dropped.sort_unstable();
        let model = TransitionModel { cells, edges, probs, dropped };
        model.validate()?;
        Ok(model)
    }
}

fn probabilities(row: &[Edge]) -> Vec<f64> {
    let total: usize = row.iter().map(|e| e.samples.len()).sum();
    row.iter().map(|e| e.samples.len() as f64 / total as f64).collect()
}

/// Iterative Tarjan.
fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNSEEN: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut counter = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        while let Some(&(v, next)) = call.last() {
            if next == 0 && index[v] == UNSEEN {
                index[v] = counter;
                low[v] = counter;
                counter += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if next < adj[v].len() {
                let w = adj[v][next];
                if let Some(top) = call.last_mut() {
                    top.1 += 1;
                }
                if index[w] == UNSEEN {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comps.push(comp);
            }
        }
    }
    comps
}

/// Counts transitions of `series` through `cover` and keeps the recurrent core.
pub fn build_transitions(series: &TimeSeries, cover: &CoverModel) -> Result<TransitionModel> {
    series.require_transitions()?;
    let labels = cover.labels(series);
    TransitionModel::from_symbol_paths(cover.len(), &[labels])?.restrict_to_core()
}

/// True iff the transition graph is a single strongly connected component.
pub fn check_irreducible(model: &TransitionModel) -> bool {
    !model.is_empty() && model.components().len() == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryEstimate {
    /// Stationary probability vector over states.
    pub pi: Vec<f64>,
    /// `‖ℙπ − π‖₁` at the returned π.
    pub residual: f64,
    pub iterations: usize,
    /// `1 − r`, where `r` is the observed geometric contraction rate of the
    /// residual under the lazy iteration `π ← (π + ℙπ)/2`; `None` when the
    /// start vector was already stationary.
    pub gap: Option<f64>,
    pub irreducible: bool,
}

/// Stationary vector of ℙ by power iteration from the uniform vector.
pub fn stationary_measure(model: &TransitionModel, tol: f64, max_iters: usize) -> Result<StationaryEstimate> {
    let m = model.len();
    stationary_from(model, &vec![1.0 / m as f64; m], tol, max_iters)
}

/// Power iteration from an arbitrary probability vector.
///
/// Iterates the lazy operator `(I + ℙ)/2`, which has the same fixed vector
/// as ℙ but no eigenvalues on the unit circle other than 1, so periodic
/// chains converge too.
pub fn stationary_from(
    model: &TransitionModel,
    start: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<StationaryEstimate> {
    let m = model.len();
    if start.len() != m {
        return Err(ZnlError::Argument(format!("start vector has length {}, model has {m} states", start.len())));
    }
    let comps = model.components();
    if comps.len() != 1 {
        return Err(ZnlError::Reducible { components: comps });
    }
    let mut pi: Vec<f64> = start.to_vec();
    normalize_l1(&mut pi)?;
    let mut y = vec![0.0; m];
    let mut history: Vec<f64> = Vec::new();

    for iter in 0..=max_iters {
        model.apply(&pi, &mut y);
        let residual: f64 = y.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        if residual <= tol {
            return Ok(StationaryEstimate {
                pi,
                residual,
                iterations: iter,
                gap: contraction_gap(&history),
                irreducible: true,
            });
        }
        history.push(residual);
        if iter == max_iters {
            return Err(ZnlError::Convergence { iters: max_iters, residual });
        }
        for (p, v) in pi.iter_mut().zip(&y) {
            *p = 0.5 * (*p + v);
        }
        normalize_l1(&mut pi)?;
    }
    unreachable!()
}

fn normalize_l1(v: &mut [f64]) -> Result<()> {
    if v.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(ZnlError::Argument("start vector must be finite and nonnegative".into()));
    }
    let s: f64 = v.iter().sum();
    if !(s > 0.0) {
        return Err(ZnlError::Argument("start vector sums to zero".into()));
    }
    v.iter_mut().for_each(|x| *x /= s);
    Ok(())
}

/// Geometric-mean contraction over the last stretch of residuals.
fn contraction_gap(history: &[f64]) -> Option<f64> {
    let n = history.len();
    if n < 2 {
        return None;
    }
    let k = (n / 2).clamp(1, 50);
    let (a, b) = (history[n - 1 - k], history[n - 1]);
    if !(a > 0.0) || !(b > 0.0) {
        return None;
    }
    let rate = (b / a).powf(1.0 / k as f64);
    Some((1.0 - rate).clamp(0.0, 1.0))
}
