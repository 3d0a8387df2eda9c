//! Mixed one-dimensional and tensor-product basis functions.
//!
//! Each dimension independently uses one of three orthonormal families on its
//! natural domain:
//!
//! * `Exp` — Fourier exponentials exp(2πikx) on the torus [0,1), k ∈ ℤ;
//! * `Cos` — half-period cosines √2·cos(πkx) on [0,1], k ∈ ℕ₀;
//! * `Alg` — Chebyshev polynomials √2·cos(k·arccos(2x−1)) on [0,1], k ∈ ℕ₀,
//!   orthonormal under the arcsine weight 1/(π√(x−x²)).
//!
//! The module also provides the per-dimension node transform under which every
//! mixed basis function becomes a short combination of pure exponentials on the
//! torus; the fast transforms build on that identity.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// One-dimensional basis family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    /// Fourier exponentials on the torus; frequencies range over ℤ.
    Exp,
    /// Half-period cosines on [0,1]; frequencies range over ℕ₀.
    Cos,
    /// Chebyshev polynomials on [0,1] (arcsine weight); frequencies range over ℕ₀.
    Alg,
}

impl BasisKind {
    /// True when negative frequencies are admissible (Fourier case).
    pub fn is_exp(self) -> bool {
        matches!(self, BasisKind::Exp)
    }

    /// Validates a frequency against the kind's range.
    pub fn check_frequency(self, k: i64) -> Result<()> {
        if !self.is_exp() && k < 0 {
            return Err(Error::InvalidFrequency { k });
        }
        Ok(())
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BasisKind::Exp => "exp",
            BasisKind::Cos => "cos",
            BasisKind::Alg => "alg",
        };
        f.write_str(s)
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exp" => Ok(BasisKind::Exp),
            "cos" => Ok(BasisKind::Cos),
            "alg" => Ok(BasisKind::Alg),
            other => Err(Error::InvalidArgument(format!(
                "unknown basis kind `{other}` (expected exp, cos, or alg)"
            ))),
        }
    }
}

/// Ordered per-dimension basis assignment; immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisVector {
    kinds: Vec<BasisKind>,
}

impl BasisVector {
    pub fn new(kinds: Vec<BasisKind>) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::InvalidArgument("basis vector must have d >= 1".into()));
        }
        Ok(Self { kinds })
    }

    /// Spatial dimension d.
    pub fn dim(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, j: usize) -> BasisKind {
        self.kinds[j]
    }

    pub fn kinds(&self) -> &[BasisKind] {
        &self.kinds
    }

    /// Basis restricted to the given (0-based, strictly increasing) dimensions.
    pub fn project(&self, dims: &[usize]) -> Result<BasisVector> {
        let kinds = dims
            .iter()
            .map(|&j| {
                self.kinds
                    .get(j)
                    .copied()
                    .ok_or_else(|| Error::Shape(format!("dimension {j} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        BasisVector::new(kinds)
    }

    /// All-Fourier basis of the same dimension (the expansion target).
    pub fn all_exp(dim: usize) -> Self {
        Self { kinds: vec![BasisKind::Exp; dim] }
    }
}

impl fmt::Display for BasisVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, k) in self.kinds.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}")?;
        }
        Ok(())
    }
}

impl FromStr for BasisVector {
    type Err = Error;

    /// Parses a comma-separated list such as `exp,alg,cos,alg`.
    fn from_str(s: &str) -> Result<Self> {
        let kinds = s
            .split(',')
            .map(BasisKind::from_str)
            .collect::<Result<Vec<_>>>()?;
        BasisVector::new(kinds)
    }
}

/// Evaluates a single one-dimensional basis function.
///
/// Returns exp(2πikx) for `Exp`, √2·cos(πkx) for `Cos` with k ≠ 0,
/// √2·cos(k·arccos(2x−1)) for `Alg` with k ≠ 0, and 1 whenever k = 0.
pub fn eval_basis_1d(kind: BasisKind, k: i64, x: f64) -> Result<Complex64> {
    kind.check_frequency(k)?;
    let value = match kind {
        BasisKind::Exp => {
            let phase = 2.0 * PI * (k as f64) * x;
            Complex64::new(phase.cos(), phase.sin())
        }
        BasisKind::Cos => {
            if k == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(f64::sqrt(2.0) * (PI * (k as f64) * x).cos(), 0.0)
            }
        }
        BasisKind::Alg => {
            if k == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                let t = (2.0 * x - 1.0).clamp(-1.0, 1.0).acos();
                Complex64::new(f64::sqrt(2.0) * ((k as f64) * t).cos(), 0.0)
            }
        }
    };
    Ok(value)
}

/// Evaluates the tensor-product basis function ∏_j φ_{k_j}(x_j).
///
/// The result is the exact floating-point product of the one-dimensional
/// factors, in dimension order.
pub fn eval_basis(basis: &BasisVector, k: &[i64], x: &[f64]) -> Result<Complex64> {
    if k.len() != basis.dim() || x.len() != basis.dim() {
        return Err(Error::Shape(format!(
            "basis dim {}, index len {}, node len {}",
            basis.dim(),
            k.len(),
            x.len()
        )));
    }
    let mut acc = Complex64::new(1.0, 0.0);
    for j in 0..basis.dim() {
        acc *= eval_basis_1d(basis.kind(j), k[j], x[j])?;
    }
    Ok(acc)
}

/// Evaluates the tensor weight: ∏ over `Alg` dimensions of 1/(π√(x_j−x_j²)).
///
/// Dimensions with `Exp` or `Cos` bases contribute factor 1. Points on an
/// `Alg` boundary make the weight diverge and are rejected; callers that
/// sample nodes clamp into the open interval instead.
pub fn eval_weight(basis: &BasisVector, x: &[f64]) -> Result<f64> {
    if x.len() != basis.dim() {
        return Err(Error::Shape(format!(
            "basis dim {}, node len {}",
            basis.dim(),
            x.len()
        )));
    }
    let mut w = 1.0;
    for j in 0..basis.dim() {
        if basis.kind(j) == BasisKind::Alg {
            let v = x[j] - x[j] * x[j];
            if v <= 0.0 {
                return Err(Error::SingularWeight { dim: j, value: x[j] });
            }
            w /= PI * v.sqrt();
        }
    }
    Ok(w)
}

/// Per-dimension node transform onto the torus.
///
/// Identity for `Exp`; x ↦ x/2 for `Cos`; x ↦ arccos(2x−1)/(2π) for `Alg`
/// (argument clamped to [−1,1] to absorb rounding at the endpoints). Non-exp
/// results land in [0, 1/2].
pub fn node_transform_1d(kind: BasisKind, x: f64) -> f64 {
    match kind {
        BasisKind::Exp => x,
        BasisKind::Cos => 0.5 * x,
        BasisKind::Alg => (2.0 * x - 1.0).clamp(-1.0, 1.0).acos() / (2.0 * PI),
    }
}

/// Applies [`node_transform_1d`] in every dimension.
pub fn node_transform(basis: &BasisVector, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != basis.dim() {
        return Err(Error::Shape(format!(
            "basis dim {}, node len {}",
            basis.dim(),
            x.len()
        )));
    }
    Ok((0..basis.dim())
        .map(|j| node_transform_1d(basis.kind(j), x[j]))
        .collect())
}

/// A validated list of scattered nodes, stored row-major (node-major).
///
/// Coordinates in `Exp` dimensions are reduced into [0,1) at construction;
/// coordinates in `Cos`/`Alg` dimensions must lie in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    dim: usize,
    coords: Vec<f64>,
}

impl NodeSet {
    /// Validates flat row-major coordinates against the basis domains.
    pub fn new(basis: &BasisVector, mut coords: Vec<f64>) -> Result<Self> {
        let d = basis.dim();
        if d == 0 || coords.len() % d != 0 {
            return Err(Error::Shape(format!(
                "coordinate buffer of length {} is not a multiple of dim {}",
                coords.len(),
                d
            )));
        }
        for (i, c) in coords.iter_mut().enumerate() {
            let j = i % d;
            if !c.is_finite() {
                return Err(Error::OutOfDomain { dim: j, value: *c });
            }
            match basis.kind(j) {
                BasisKind::Exp => {
                    *c = c.rem_euclid(1.0);
                    if *c >= 1.0 {
                        // rem_euclid can round up to 1.0 for tiny negatives
                        *c = 0.0;
                    }
                }
                BasisKind::Cos | BasisKind::Alg => {
                    if !(0.0..=1.0).contains(c) {
                        return Err(Error::OutOfDomain { dim: j, value: *c });
                    }
                }
            }
        }
        Ok(Self { dim: d, coords })
    }

    /// Builds a node set already known to satisfy the domain constraints.
    pub(crate) fn from_validated(dim: usize, coords: Vec<f64>) -> Self {
        debug_assert!(dim > 0 && coords.len() % dim == 0);
        Self { dim, coords }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of nodes M.
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Coordinates of node `i`.
    pub fn node(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Flat row-major coordinate buffer.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Applies the node transform of every dimension, yielding torus nodes.
    pub fn transformed(&self, basis: &BasisVector) -> Result<NodeSet> {
        if basis.dim() != self.dim {
            return Err(Error::Shape(format!(
                "basis dim {} vs node dim {}",
                basis.dim(),
                self.dim
            )));
        }
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(i, &c)| node_transform_1d(basis.kind(i % self.dim), c))
            .collect();
        Ok(NodeSet::from_validated(self.dim, coords))
    }

    /// Rows picked by index, in the given order (for train/test splits).
    pub fn select(&self, idx: &[usize]) -> NodeSet {
        let mut coords = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            coords.extend_from_slice(self.node(i));
        }
        NodeSet::from_validated(self.dim, coords)
    }

    /// Nodes restricted to the given (0-based, strictly increasing) dimensions.
    pub fn project(&self, dims: &[usize]) -> Result<NodeSet> {
        for &j in dims {
            if j >= self.dim {
                return Err(Error::Shape(format!("dimension {j} out of range")));
            }
        }
        let m = self.len();
        let mut coords = Vec::with_capacity(m * dims.len());
        for i in 0..m {
            let row = self.node(i);
            coords.extend(dims.iter().map(|&j| row[j]));
        }
        Ok(NodeSet::from_validated(dims.len().max(1), coords))
    }
}
