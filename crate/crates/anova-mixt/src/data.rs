//! Sampling, reference targets, CSV ingestion, and normalization.
//!
//! Nodes are drawn from each dimension's orthogonality measure: uniform on
//! [0,1) for exp and cos dimensions, and the arcsine distribution for
//! Chebyshev dimensions (so the weighted least-squares problem keeps its
//! plain ℓ₂ form). Dataset utilities cover the comma-separated-with-header
//! dialect plus a whitespace-delimited fallback, per-column min-max scaling,
//! and seeded train/test splits.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::path::Path;

use crate::basis::{BasisKind, BasisVector, NodeSet};
use crate::error::{Error, Result};

/// Inverse CDF of the arcsine distribution on [0,1]: u ↦ (1 − cos(πu))/2.
pub fn arcsine_quantile(u: f64) -> f64 {
    0.5 * (1.0 - (PI * u).cos())
}

/// CDF of the arcsine distribution on [0,1]: x ↦ (2/π)·arcsin(√x).
pub fn arcsine_cdf(x: f64) -> f64 {
    (2.0 / PI) * x.clamp(0.0, 1.0).sqrt().asin()
}

/// Margin by which Chebyshev-dimension samples avoid the interval endpoints,
/// keeping the arcsine weight finite.
const ALG_CLAMP: f64 = 1e-15;

/// Draws `m` nodes from the product of per-dimension orthogonality measures.
pub fn sample_nodes(basis: &BasisVector, m: usize, rng: &mut impl Rng) -> NodeSet {
    let d = basis.dim();
    let mut coords = Vec::with_capacity(m * d);
    for _ in 0..m {
        for j in 0..d {
            let u: f64 = rng.gen();
            let x = match basis.kind(j) {
                BasisKind::Exp | BasisKind::Cos => u,
                BasisKind::Alg => arcsine_quantile(u).clamp(ALG_CLAMP, 1.0 - ALG_CLAMP),
            };
            coords.push(x);
        }
    }
    NodeSet::from_validated(d, coords)
}

/// Seeded convenience wrapper around [`sample_nodes`].
pub fn sample_nodes_seeded(basis: &BasisVector, m: usize, seed: u64) -> NodeSet {
    sample_nodes(basis, m, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// First reference target (four-dimensional, mixed smoothness):
/// exp(sin(2πx₁)·x₂) + cos(πx₃)·x₄² + sin²(2πx₁)/10 + 5·√(x₂·x₄ + 1).
pub fn eval_f1(x: &[f64]) -> f64 {
    let s = (2.0 * PI * x[0]).sin();
    (s * x[1]).exp() + (PI * x[2]).cos() * x[3] * x[3] + 0.1 * s * s
        + 5.0 * (x[1] * x[3] + 1.0).sqrt()
}

/// Algebraically rearranged twin of [`eval_f1`] used for cross-checking.
pub fn eval_f1_alt(x: &[f64]) -> f64 {
    let s = (2.0 * PI * x[0]).sin();
    let sq = 0.5 * (1.0 - (4.0 * PI * x[0]).cos()); // sin² via double angle
    (x[1] * s).exp() + x[3].powi(2) * (PI * x[2]).cos() + 0.1 * sq
        + 5.0 * (x[3].mul_add(x[1], 1.0)).sqrt()
}

/// Second reference target (value-periodic in x₁, independent of x₄):
/// (2x₁−1)²·x₃ + 10·sin(2πx₁)·(x₂−1/2)² + exp(x₃).
pub fn eval_f2(x: &[f64]) -> f64 {
    let a = 2.0 * x[0] - 1.0;
    a * a * x[2] + 10.0 * (2.0 * PI * x[0]).sin() * (x[1] - 0.5) * (x[1] - 0.5) + x[2].exp()
}

/// Rearranged twin of [`eval_f2`].
pub fn eval_f2_alt(x: &[f64]) -> f64 {
    let a = 4.0 * x[0] * x[0] - 4.0 * x[0] + 1.0;
    let b = x[1] * x[1] - x[1] + 0.25;
    a * x[2] + 10.0 * b * (2.0 * PI * x[0]).sin() + x[2].exp()
}

/// Evaluates a scalar function at every node.
pub fn eval_at_nodes(nodes: &NodeSet, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    nodes.iter().map(f).collect()
}

/// A numeric table with column headers.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    /// Row-major values; every row has `headers.len()` entries.
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.headers.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

/// Reads a comma-separated file with a header row.
pub fn load_csv(path: &Path) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse { line: 0, msg: e.to_string() })?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse { line: i + 2, msg: e.to_string() })?;
        let row = record
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 2,
                    msg: format!("bad number `{s}`: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != headers.len() {
            return Err(Error::Parse {
                line: i + 2,
                msg: format!("expected {} fields, got {}", headers.len(), row.len()),
            });
        }
        rows.push(row);
    }
    Ok(Table { headers, rows })
}

/// Reads a whitespace-delimited numeric file without a header (the common
/// distribution format of the airfoil measurement set); columns are named
/// c1, c2, … in order.
pub fn load_whitespace_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 1,
                    msg: format!("bad number `{s}`: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected {w} fields, got {}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    let width = width.ok_or(Error::Parse { line: 0, msg: "empty table".into() })?;
    let headers = (1..=width).map(|j| format!("c{j}")).collect();
    Ok(Table { headers, rows })
}

/// Per-column affine map onto [0,1] fitted from data extremes.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScale {
    mins: Vec<f64>,
    ranges: Vec<f64>,
    /// Columns whose extremes coincided; they map to 0.
    constant: Vec<bool>,
}

impl MinMaxScale {
    /// Fits scaling parameters from the given rows (all columns).
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map(|r| r.len()).unwrap_or(0);
        if width == 0 {
            return Err(Error::Shape("cannot fit scaling on an empty table".into()));
        }
        let mut mins = vec![f64::INFINITY; width];
        let mut maxs = vec![f64::NEG_INFINITY; width];
        for row in rows {
            for j in 0..width {
                mins[j] = mins[j].min(row[j]);
                maxs[j] = maxs[j].max(row[j]);
            }
        }
        let mut ranges = Vec::with_capacity(width);
        let mut constant = Vec::with_capacity(width);
        for j in 0..width {
            let r = maxs[j] - mins[j];
            if r <= 0.0 {
                eprintln!(
                    "warning: column {} is constant; normalized values are set to 0",
                    j + 1
                );
                ranges.push(1.0);
                constant.push(true);
            } else {
                ranges.push(r);
                constant.push(false);
            }
        }
        Ok(Self { mins, ranges, constant })
    }

    pub fn num_cols(&self) -> usize {
        self.mins.len()
    }

    /// Maps a row into [0,1] per column (values outside the fitted extremes
    /// are clamped, which matters when fitting on a training subset only).
    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.constant[j] {
                    0.0
                } else {
                    ((v - self.mins[j]) / self.ranges[j]).clamp(0.0, 1.0)
                }
            })
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }

    /// Undoes [`Self::transform_row`] for non-constant columns.
    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                if self.constant[j] {
                    self.mins[j]
                } else {
                    self.mins[j] + v * self.ranges[j]
                }
            })
            .collect()
    }

    /// Per-column (min, max) pairs; max equals min for constant columns.
    /// Together with [`Self::from_bounds`] this lets a scale be persisted.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        (0..self.mins.len())
            .map(|j| {
                let hi = if self.constant[j] {
                    self.mins[j]
                } else {
                    self.mins[j] + self.ranges[j]
                };
                (self.mins[j], hi)
            })
            .collect()
    }

    /// Rebuilds a scale from stored bounds; the inverse of [`Self::bounds`].
    /// Unlike [`Self::fit`], constant columns are accepted silently.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Shape("cannot build a scaling from empty bounds".into()));
        }
        let mut mins = Vec::with_capacity(bounds.len());
        let mut ranges = Vec::with_capacity(bounds.len());
        let mut constant = Vec::with_capacity(bounds.len());
        for &(lo, hi) in bounds {
            if !lo.is_finite() || !hi.is_finite() || hi < lo {
                return Err(Error::InvalidArgument(format!(
                    "invalid scaling bounds ({lo}, {hi})"
                )));
            }
            mins.push(lo);
            if hi - lo <= 0.0 {
                ranges.push(1.0);
                constant.push(true);
            } else {
                ranges.push(hi - lo);
                constant.push(false);
            }
        }
        Ok(Self { mins, ranges, constant })
    }

    /// Scale fitted on one column only (for targets).
    pub fn fit_column(values: &[f64]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        Self::fit(&rows)
    }

    pub fn transform_scalar(&self, v: f64) -> f64 {
        self.transform_row(&[v])[0]
    }

    pub fn inverse_scalar(&self, v: f64) -> f64 {
        self.inverse_row(&[v])[0]
    }
}

/// Seeded shuffle split: the training part takes ⌊fraction·m⌋ indices, the
/// rest is held out. Index order within each part follows the shuffle.
pub fn split_indices(m: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let cut = (train_fraction * m as f64).floor() as usize;
    let test = idx.split_off(cut);
    (idx, test)
}
