//! Observed trajectories and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, ZnlError};

/// Ordered samples `x_0, ..., x_N` of a `d`-dimensional trajectory, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    dim: usize,
    data: Vec<f64>,
}

impl TimeSeries {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(ZnlError::Argument("dimension must be positive".into()));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(ZnlError::Data(format!(
                "{} values do not form a nonempty series of dimension {dim}",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(ZnlError::Data(format!(
                "non-finite coordinate at sample {}, column {}",
                k / dim,
                k % dim
            )));
        }
        Ok(TimeSeries { dim, data })
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let dim = points.first().map(|p| p.as_ref().len()).unwrap_or(0);
        if points.is_empty() {
            return Err(ZnlError::Data("empty series".into()));
        }
        let mut data = Vec::with_capacity(points.len() * dim);
        for (n, p) in points.iter().enumerate() {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(ZnlError::Data(format!(
                    "sample {n} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            data.extend_from_slice(p);
        }
        TimeSeries::new(dim, data)
    }

    /// Scalar series (d = 1).
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        TimeSeries::new(1, values.to_vec())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of samples (N + 1).
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn point(&self, n: usize) -> &[f64] {
        &self.data[n * self.dim..(n + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Samples `range` as a new series.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        TimeSeries::new(self.dim, self.data[range.start * self.dim..range.end * self.dim].to_vec())
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.points() {
            for (a, b) in m.iter_mut().zip(p) {
                *a += b;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    pub(crate) fn require_transitions(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(ZnlError::Argument(format!(
                "series has {} sample(s); at least 2 are needed to observe a transition",
                self.len()
            )));
        }
        Ok(())
    }

    /// One row per sample, comma separated; `header` adds `x0,x1,...`.
    pub fn to_csv(&self, header: bool) -> String {
        let mut out = String::with_capacity(self.data.len() * 20);
        if header {
            let names: Vec<String> = (0..self.dim).map(|k| format!("x{k}")).collect();
            out.push_str(&names.join(","));
            out.push('\n');
        }
        for p in self.points() {
            for (k, v) in p.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses CSV text. A first row that does not parse as numbers is
    /// treated as a header; blank lines are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut dim = 0;
        let mut data = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> =
                fields.iter().map(|f| f.parse::<f64>()).collect();
            let row = match parsed {
                Ok(r) => r,
                Err(_) if dim == 0 && data.is_empty() && lineno == 0 => continue,
                Err(e) => {
                    return Err(ZnlError::Data(format!("line {}: {e}", lineno + 1)));
                }
            };
            if dim == 0 {
                dim = row.len();
            } else if row.len() != dim {
                return Err(ZnlError::Data(format!(
                    "line {}: {} columns, expected {dim}",
                    lineno + 1,
                    row.len()
                )));
            }
            data.extend(row);
        }
        if dim == 0 {
            return Err(ZnlError::Data("no numeric rows".into()));
        }
        TimeSeries::new(dim, data)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ZnlError::io(format!("reading {}", path.display()), e))?;
        TimeSeries::from_csv(&text).map_err(|e| match e {
            ZnlError::Data(msg) => ZnlError::Data(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn write_csv(&self, path: &Path, header: bool) -> Result<()> {
        std::fs::write(path, self.to_csv(header))
            .map_err(|e| ZnlError::io(format!("writing {}", path.display()), e))
    }
}
