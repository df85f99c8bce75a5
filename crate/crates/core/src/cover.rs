//! Greedy δ-cover of the sampled attractor and the nearest-center cell index.
//!
//! The cover is built by repeatedly taking the uncovered sample whose closed
//! δ-ball holds the most uncovered samples, emitting it as a center and
//! removing everything inside that ball. Cells are then the Voronoi regions
//! of the centers, which makes them disjoint and space-filling.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ZnlError};
use crate::geometry::{dist, dist2, nearest_brute, GridIndex};
use crate::series::TimeSeries;

/// Above this many samples the grid accelerator is used for neighbor lists.
pub const GRID_THRESHOLD: usize = 20_000;

/// Above this many centers cell lookup goes through a grid.
const CENTER_GRID_THRESHOLD: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborSearch {
    /// Brute force up to [`GRID_THRESHOLD`] samples, grid beyond.
    Auto,
    Brute,
    Grid,
}

/// Serialized form: `{ "delta": f64, "centers": [indices] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverRecord {
    pub delta: f64,
    pub centers: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CoverModel {
    delta: f64,
    centers: Vec<usize>,
    dim: usize,
    center_points: Vec<f64>,
    grid: Option<GridIndex>,
}

impl PartialEq for CoverModel {
    fn eq(&self, other: &Self) -> bool {
        self.delta == other.delta && self.centers == other.centers && self.center_points == other.center_points
    }
}

impl CoverModel {
    /// Rebuilds a cover from center indices into `series`.
    pub fn from_centers(series: &TimeSeries, delta: f64, centers: Vec<usize>) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(ZnlError::Argument(format!("delta must be positive, got {delta}")));
        }
        if centers.is_empty() {
            return Err(ZnlError::Data("cover has no centers".into()));
        }
        if let Some(&c) = centers.iter().find(|&&c| c >= series.len()) {
            return Err(ZnlError::Data(format!(
                "center index {c} out of range for a series of {} samples",
                series.len()
            )));
        }
        let dim = series.dim();
        let mut center_points = Vec::with_capacity(centers.len() * dim);
        for &c in &centers {
            center_points.extend_from_slice(series.point(c));
        }
        let grid = (centers.len() > CENTER_GRID_THRESHOLD)
            .then(|| GridIndex::new(dim, &center_points, delta));
        Ok(CoverModel { delta, centers, dim, center_points, grid })
    }

    pub fn from_record(series: &TimeSeries, record: &CoverRecord) -> Result<Self> {
        CoverModel::from_centers(series, record.delta, record.centers.clone())
    }

    pub fn record(&self) -> CoverRecord {
        CoverRecord { delta: self.delta, centers: self.centers.clone() }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Sample indices of the centers, in selection order.
    pub fn centers(&self) -> &[usize] {
        &self.centers
    }

    /// Number of cells m.
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self, cell: usize) -> &[f64] {
        &self.center_points[cell * self.dim..(cell + 1) * self.dim]
    }

    pub fn center_points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.center_points.chunks_exact(self.dim)
    }

    /// Nearest cell and its squared distance; ties go to the lower cell index.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        let hit = match &self.grid {
            Some(g) => g.nearest(x),
            None => nearest_brute(self.center_points(), x),
        };
        hit.expect("cover has at least one center")
    }

    /// Cell index of `x` (0-based): the nearest center.
    pub fn assign_cell(&self, x: &[f64]) -> usize {
        self.nearest(x).0
    }

    /// Cell of every sample of `series`, in order (the itinerary).
    pub fn labels(&self, series: &TimeSeries) -> Vec<usize> {
        let pts: Vec<&[f64]> = series.points().collect();
        pts.par_iter().map(|p| self.assign_cell(p)).collect()
    }
}

/// Builds the greedy cover with automatic neighbor-search selection.
pub fn build_cover(series: &TimeSeries, delta: f64) -> Result<CoverModel> {
    build_cover_with(series, delta, NeighborSearch::Auto)
}

pub fn build_cover_with(series: &TimeSeries, delta: f64, search: NeighborSearch) -> Result<CoverModel> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(ZnlError::Argument(format!("delta must be positive, got {delta}")));
    }
    if series.is_empty() {
        return Err(ZnlError::Argument("cannot cover an empty series".into()));
    }
    let use_grid = match search {
        NeighborSearch::Auto => series.len() > GRID_THRESHOLD,
        NeighborSearch::Brute => false,
        NeighborSearch::Grid => true,
    };
    let neighbors = if use_grid {
        neighbor_lists_grid(series, delta)
    } else {
        neighbor_lists_brute(series, delta)
    };
    let centers = greedy_select(&neighbors);
    CoverModel::from_centers(series, delta, centers)
}

/// For each sample, the sorted indices of samples within distance `delta` (itself included).
fn neighbor_lists_brute(series: &TimeSeries, delta: f64) -> Vec<Vec<u32>> {
    let r2 = delta * delta;
    let pts: Vec<&[f64]> = series.points().collect();
    pts.par_iter()
        .map(|p| {
            pts.iter()
                .enumerate()
                .filter(|(_, q)| dist2(p, q) <= r2)
                .map(|(j, _)| j as u32)
                .collect()
        })
        .collect()
}

fn neighbor_lists_grid(series: &TimeSeries, delta: f64) -> Vec<Vec<u32>> {
    let grid = GridIndex::new(series.dim(), series.as_flat(), delta);
    let pts: Vec<&[f64]> = series.points().collect();
    pts.par_iter()
        .map(|p| grid.within(p, delta).into_iter().map(|j| j as u32).collect())
        .collect()
}

/// Highest uncovered-neighbor count first, lowest index on ties.
fn greedy_select(neighbors: &[Vec<u32>]) -> Vec<usize> {
    let n = neighbors.len();
    let mut alive = vec![true; n];
    let mut count: Vec<usize> = neighbors.iter().map(Vec::len).collect();
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> =
        (0..n).map(|i| (count[i], Reverse(i))).collect();
    let mut centers = Vec::new();

    // Counts only decrease, so heap keys are upper bounds; a stale entry is
    // re-keyed when it surfaces.
    while let Some((c, Reverse(i))) = heap.pop() {
        if !alive[i] {
            continue;
        }
        if c != count[i] {
            heap.push((count[i], Reverse(i)));
            continue;
        }
        centers.push(i);
        for &j in &neighbors[i] {
            let j = j as usize;
            if !alive[j] {
                continue;
            }
            alive[j] = false;
            for &k in &neighbors[j] {
                count[k as usize] -= 1;
            }
        }
    }
    centers
}

/// Largest diameter over cells of the training samples each cell holds.
pub fn mesh_size(cover: &CoverModel, series: &TimeSeries) -> f64 {
    let labels = cover.labels(series);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); cover.len()];
    for (n, &c) in labels.iter().enumerate() {
        members[c].push(n);
    }
    members
        .par_iter()
        .map(|idx| {
            let mut d = 0.0f64;
            for (a, &i) in idx.iter().enumerate() {
                for &j in &idx[a + 1..] {
                    d = d.max(dist(series.point(i), series.point(j)));
                }
            }
            d
        })
        .reduce(|| 0.0, f64::max)
}
