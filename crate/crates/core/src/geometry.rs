//! Euclidean point-set queries: brute force and an exact uniform-grid index.
//!
//! The grid hashes points by the integer cell of their first (at most three)
//! coordinates. Full-dimensional distances are never smaller than projected
//! ones, so ring-by-ring search with a projected lower bound stays exact.
//! Both paths compute distances with [`dist2`], so their minima agree bitwise.

use std::collections::HashMap;

/// Squared Euclidean distance, summed in coordinate order.
#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let t = x - y;
        s += t * t;
    }
    s
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// Nearest point (lowest index on ties) and its squared distance, by full scan.
pub fn nearest_brute<'a, I>(points: I, q: &[f64]) -> Option<(usize, f64)>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut best: Option<(usize, f64)> = None;
    for (k, p) in points.into_iter().enumerate() {
        let d = dist2(p, q);
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((k, d));
        }
    }
    best
}

const MAX_GRID_DIMS: usize = 3;

fn ring_size(proj: usize, r: i64) -> usize {
    if r == 0 {
        1
    } else {
        ((2 * r + 1).pow(proj as u32) - (2 * r - 1).pow(proj as u32)) as usize
    }
}

#[derive(Debug, Clone)]
pub struct GridIndex {
    dim: usize,
    proj: usize,
    side: f64,
    points: Vec<f64>,
    cells: HashMap<[i64; MAX_GRID_DIMS], Vec<usize>>,
    lo: [i64; MAX_GRID_DIMS],
    hi: [i64; MAX_GRID_DIMS],
}

impl GridIndex {
    /// Indexes a row-major `points` buffer of dimension `dim` with cell side `side`.
    pub fn new(dim: usize, points: &[f64], side: f64) -> Self {
        assert!(dim > 0 && side > 0.0 && side.is_finite());
        let proj = dim.min(MAX_GRID_DIMS);
        let mut g = GridIndex {
            dim,
            proj,
            side,
            points: points.to_vec(),
            cells: HashMap::new(),
            lo: [i64::MAX; MAX_GRID_DIMS],
            hi: [i64::MIN; MAX_GRID_DIMS],
        };
        for (k, p) in points.chunks_exact(dim).enumerate() {
            let key = g.key(p);
            for a in 0..proj {
                g.lo[a] = g.lo[a].min(key[a]);
                g.hi[a] = g.hi[a].max(key[a]);
            }
            g.cells.entry(key).or_default().push(k);
        }
        g
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    fn key(&self, p: &[f64]) -> [i64; MAX_GRID_DIMS] {
        let mut key = [0i64; MAX_GRID_DIMS];
        for a in 0..self.proj {
            key[a] = (p[a] / self.side).floor() as i64;
        }
        key
    }

    /// Visits every occupied cell at Chebyshev key-distance exactly `r` from `center`.
    fn for_ring(&self, center: &[i64; MAX_GRID_DIMS], r: i64, mut f: impl FnMut(&[usize])) {
        let proj = self.proj;
        let mut off = [0i64; MAX_GRID_DIMS];
        for a in 0..proj {
            off[a] = -r;
        }
        loop {
            let on_shell = (0..proj).any(|a| off[a].abs() == r);
            if on_shell {
                let mut key = [0i64; MAX_GRID_DIMS];
                for a in 0..proj {
                    key[a] = center[a] + off[a];
                }
                if let Some(list) = self.cells.get(&key) {
                    f(list);
                }
            }
            // odometer increment
            let mut a = 0;
            loop {
                if a == proj {
                    return;
                }
                off[a] += 1;
                if off[a] <= r {
                    break;
                }
                off[a] = -r;
                a += 1;
            }
        }
    }

    /// Largest ring that can still contain occupied cells.
    fn max_ring(&self, center: &[i64; MAX_GRID_DIMS]) -> i64 {
        (0..self.proj)
            .map(|a| (center[a] - self.lo[a]).abs().max((self.hi[a] - center[a]).abs()))
            .max()
            .unwrap_or(0)
    }

    /// Exact nearest neighbour (lowest index on ties) and squared distance.
    pub fn nearest(&self, q: &[f64]) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let center = self.key(q);
        let max_r = self.max_ring(&center);
        let mut best: Option<(usize, f64)> = None;
        let mut r = 0i64;
        let mut visited = 0usize;
        while r <= max_r {
            visited += ring_size(self.proj, r);
            if visited > 4 * self.len() + 64 {
                // sparse far field: a flat scan is cheaper than more empty rings
                return nearest_brute(self.points.chunks_exact(self.dim), q);
            }
            self.for_ring(&center, r, |list| {
                for &k in list {
                    let d = dist2(self.point(k), q);
                    let better = match best {
                        None => true,
                        Some((bk, bd)) => d < bd || (d == bd && k < bk),
                    };
                    if better {
                        best = Some((k, d));
                    }
                }
            });
            // unvisited points are at least r * side away in projection
            if let Some((_, bd)) = best {
                let bound = r as f64 * self.side * (1.0 - 1e-12);
                if bound * bound > bd {
                    break;
                }
            }
            r += 1;
        }
        best
    }

    /// All indices with squared distance `<= radius^2`, in increasing order.
    pub fn within(&self, q: &[f64], radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let center = self.key(q);
        let reach = (radius / self.side).ceil() as i64 + 1;
        let mut out = Vec::new();
        for r in 0..=reach.min(self.max_ring(&center)) {
            self.for_ring(&center, r, |list| {
                out.extend(list.iter().copied().filter(|&k| dist2(self.point(k), q) <= r2));
            });
        }
        out.sort_unstable();
        out
    }
}
