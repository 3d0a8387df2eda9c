//! Frequency index sets: full tensor grids, reduced (full-support) grids,
//! and unions of reduced grids selected by a family of coordinate subsets.
//!
//! All enumerations are canonical and deterministic:
//!
//! * per dimension, frequencies ascend (`Exp`: −N/2 … N/2−1, others: 0 … N/2−1,
//!   in the reduced case with 0 removed);
//! * multi-indices are emitted row-major with the **last** dimension fastest;
//! * family blocks are ordered by subset size, then lexicographically.
//!
//! Under this order a reduced grid is exactly the subsequence of the full grid
//! whose multi-indices have no zero component, which the fast grouped
//! transforms rely on when scattering block coefficients into tensor grids.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::basis::{BasisKind, BasisVector};
use crate::error::{Error, Result};

/// Even per-dimension bandwidths; a zero entry means the dimension is inactive.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bandwidths(Vec<i64>);

impl Bandwidths {
    pub fn new(n: Vec<i64>) -> Result<Self> {
        for &nj in &n {
            if nj < 0 || nj % 2 != 0 {
                return Err(Error::InvalidBandwidth(format!(
                    "bandwidths must be even and nonnegative, got {nj}"
                )));
            }
        }
        Ok(Self(n))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, j: usize) -> i64 {
        self.0[j]
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    /// Dimensions with nonzero bandwidth, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&j| self.0[j] != 0).collect()
    }

    /// Bandwidths restricted to the given dimensions.
    pub fn project(&self, dims: &[usize]) -> Result<Bandwidths> {
        let n = dims
            .iter()
            .map(|&j| {
                self.0
                    .get(j)
                    .copied()
                    .ok_or_else(|| Error::Shape(format!("dimension {j} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Bandwidths(n))
    }
}

impl fmt::Display for Bandwidths {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// A finite list of multi-indices, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    dim: usize,
    freqs: Vec<i64>,
}

impl IndexSet {
    fn from_rows(dim: usize, freqs: Vec<i64>) -> Self {
        debug_assert!(dim > 0 && freqs.len() % dim == 0);
        Self { dim, freqs }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.freqs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn index(&self, i: usize) -> &[i64] {
        &self.freqs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[i64]> {
        self.freqs.chunks_exact(self.dim)
    }

    /// Cartesian product of per-dimension lists, last dimension fastest.
    fn product(lists: &[Vec<i64>]) -> Self {
        let dim = lists.len();
        let total: usize = lists.iter().map(Vec::len).product();
        let mut freqs = Vec::with_capacity(total * dim);
        if total > 0 {
            let mut odo = vec![0usize; dim];
            for _ in 0..total {
                for j in 0..dim {
                    freqs.push(lists[j][odo[j]]);
                }
                for j in (0..dim).rev() {
                    odo[j] += 1;
                    if odo[j] < lists[j].len() {
                        break;
                    }
                    odo[j] = 0;
                }
            }
        }
        IndexSet::from_rows(dim, freqs)
    }
}

/// Ascending frequency list of one dimension of the full grid.
pub(crate) fn dim_frequencies(kind: BasisKind, n: i64) -> Vec<i64> {
    if kind.is_exp() {
        (-n / 2..n / 2).collect()
    } else {
        (0..n / 2).collect()
    }
}

/// Ascending frequency list of one dimension of the reduced grid.
///
/// Bandwidth 0 pins the dimension to frequency 0; otherwise frequency 0 is
/// removed from the full list.
pub(crate) fn dim_frequencies_reduced(kind: BasisKind, n: i64) -> Vec<i64> {
    if n == 0 {
        vec![0]
    } else {
        dim_frequencies(kind, n).into_iter().filter(|&k| k != 0).collect()
    }
}

fn check_dims(basis: &BasisVector, n: &Bandwidths) -> Result<()> {
    if basis.dim() != n.dim() {
        return Err(Error::Shape(format!(
            "basis dim {} vs bandwidth dim {}",
            basis.dim(),
            n.dim()
        )));
    }
    Ok(())
}

/// Full tensor grid: `Exp` dimensions range over −N/2…N/2−1, others 0…N/2−1.
pub fn hypercube_set(basis: &BasisVector, n: &Bandwidths) -> Result<IndexSet> {
    check_dims(basis, n)?;
    let lists: Vec<Vec<i64>> = (0..basis.dim())
        .map(|j| dim_frequencies(basis.kind(j), n.get(j)))
        .collect();
    Ok(IndexSet::product(&lists))
}

/// |full grid| without materialising it.
pub fn hypercube_cardinality(basis: &BasisVector, n: &Bandwidths) -> Result<u128> {
    check_dims(basis, n)?;
    let mut card: u128 = 1;
    for j in 0..basis.dim() {
        let nj = n.get(j) as u128;
        card = card.saturating_mul(if basis.kind(j).is_exp() { nj } else { nj / 2 });
    }
    Ok(card)
}

/// Reduced grid: zero-bandwidth dimensions pinned to 0, all others with the
/// zero frequency removed, so every retained dimension has full support.
pub fn reduced_set(basis: &BasisVector, n: &Bandwidths) -> Result<IndexSet> {
    check_dims(basis, n)?;
    let lists: Vec<Vec<i64>> = (0..basis.dim())
        .map(|j| dim_frequencies_reduced(basis.kind(j), n.get(j)))
        .collect();
    Ok(IndexSet::product(&lists))
}

/// |reduced grid| without materialising it.
pub fn reduced_cardinality(basis: &BasisVector, n: &Bandwidths) -> Result<u128> {
    check_dims(basis, n)?;
    let mut card: u128 = 1;
    for j in 0..basis.dim() {
        let nj = n.get(j);
        let c = if nj == 0 {
            1
        } else if basis.kind(j).is_exp() {
            (nj - 1) as u128
        } else {
            (nj / 2 - 1) as u128
        };
        card = card.saturating_mul(c);
    }
    Ok(card)
}

/// Row-major position of a full-grid multi-index, last dimension fastest.
pub(crate) fn hypercube_position(basis: &BasisVector, n: &Bandwidths, k: &[i64]) -> usize {
    let mut pos = 0usize;
    for j in 0..basis.dim() {
        let nj = n.get(j);
        let len = if basis.kind(j).is_exp() { nj } else { nj / 2 } as usize;
        let off = if basis.kind(j).is_exp() { k[j] + nj / 2 } else { k[j] } as usize;
        debug_assert!(off < len.max(1));
        pos = pos * len + off;
    }
    pos
}

/// One coordinate subset together with its bandwidth vector.
///
/// The bandwidth vector has full length d with nonzero entries exactly on the
/// subset, so the subset itself is derived data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    bands: Bandwidths,
}

impl Block {
    pub fn new(bands: Bandwidths) -> Self {
        Self { bands }
    }

    pub fn bands(&self) -> &Bandwidths {
        &self.bands
    }

    /// The coordinate subset u (0-based, ascending).
    pub fn subset(&self) -> Vec<usize> {
        self.bands.support()
    }

    pub fn order(&self) -> usize {
        self.bands.as_slice().iter().filter(|&&n| n != 0).count()
    }

    fn sort_key(&self) -> (usize, Vec<usize>) {
        (self.order(), self.subset())
    }
}

/// An ordered family of coordinate subsets with bandwidths, defining the
/// grouped index set as the union (concatenation) of per-block reduced grids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetFamily {
    dim: usize,
    blocks: Vec<Block>,
}

impl SubsetFamily {
    /// Validates the blocks and orders them canonically (size, then lexicographic).
    pub fn new(dim: usize, mut blocks: Vec<Block>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidFamily("dimension must be >= 1".into()));
        }
        let mut seen = BTreeSet::new();
        for b in &blocks {
            if b.bands.dim() != dim {
                return Err(Error::InvalidFamily(format!(
                    "block bandwidth length {} does not match dim {dim}",
                    b.bands.dim()
                )));
            }
            if !seen.insert(b.subset()) {
                return Err(Error::InvalidFamily(format!(
                    "duplicate subset {:?}",
                    one_based(&b.subset())
                )));
            }
        }
        blocks.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        Ok(Self { dim, blocks })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn contains_empty(&self) -> bool {
        self.blocks.first().is_some_and(|b| b.order() == 0)
    }

    /// Retains only the blocks whose subsets appear in `keep` (the constant
    /// block is governed by `keep` like any other subset).
    pub fn restrict(&self, keep: &BTreeSet<Vec<usize>>) -> Result<SubsetFamily> {
        let blocks = self
            .blocks
            .iter()
            .filter(|b| keep.contains(&b.subset()))
            .cloned()
            .collect();
        SubsetFamily::new(self.dim, blocks)
    }
}

fn one_based(u: &[usize]) -> Vec<usize> {
    u.iter().map(|&j| j + 1).collect()
}

impl fmt::Display for SubsetFamily {
    /// One line per block: `u=1,3 N=10,0,8,0` (dimensions 1-based, bandwidth
    /// vector full-length). The constant block prints as `u= N=0,…,0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.blocks {
            f.write_str("u=")?;
            for (i, j) in b.subset().iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{}", j + 1)?;
            }
            f.write_str(" N=")?;
            for (i, n) in b.bands.as_slice().iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{n}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FromStr for SubsetFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut dim = None;
        for (lineno, raw) in s.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: lineno + 1, msg };
            let rest = line
                .strip_prefix("u=")
                .ok_or_else(|| parse_err("expected line starting with `u=`".into()))?;
            let (u_part, n_part) = rest
                .split_once(" N=")
                .ok_or_else(|| parse_err("expected ` N=` separator".into()))?;
            let subset: Vec<usize> = if u_part.trim().is_empty() {
                Vec::new()
            } else {
                u_part
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<usize>()
                            .map_err(|e| parse_err(format!("bad dimension `{t}`: {e}")))
                            .and_then(|v| {
                                if v == 0 {
                                    Err(parse_err("dimensions are 1-based".into()))
                                } else {
                                    Ok(v - 1)
                                }
                            })
                    })
                    .collect::<Result<_>>()?
            };
            let n: Vec<i64> = n_part
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<i64>()
                        .map_err(|e| parse_err(format!("bad bandwidth `{t}`: {e}")))
                })
                .collect::<Result<_>>()?;
            let bands = Bandwidths::new(n)?;
            if bands.support() != subset {
                return Err(parse_err(format!(
                    "bandwidth support {:?} does not match subset {:?}",
                    one_based(&bands.support()),
                    one_based(&subset)
                )));
            }
            match dim {
                None => dim = Some(bands.dim()),
                Some(d) if d != bands.dim() => {
                    return Err(parse_err("inconsistent bandwidth vector lengths".into()))
                }
                _ => {}
            }
            blocks.push(Block::new(bands));
        }
        let dim = dim.ok_or(Error::InvalidFamily("family has no blocks".into()))?;
        SubsetFamily::new(dim, blocks)
    }
}

/// All subsets of {0,…,d−1} of size ≤ `ds`, each block using the bandwidth
/// `n_by_order[|u|−1]` in every active dimension; the constant block is
/// always included.
pub fn superposition_family(
    dim: usize,
    ds: usize,
    n_by_order: &[i64],
) -> Result<SubsetFamily> {
    if ds > dim {
        return Err(Error::InvalidFamily(format!(
            "superposition order {ds} exceeds dimension {dim}"
        )));
    }
    if n_by_order.len() < ds {
        return Err(Error::InvalidFamily(format!(
            "need {ds} per-order bandwidths, got {}",
            n_by_order.len()
        )));
    }
    let mut blocks = vec![Block::new(Bandwidths::new(vec![0; dim])?)];
    for order in 1..=ds {
        let n = n_by_order[order - 1];
        for u in combinations(dim, order) {
            let mut bands = vec![0i64; dim];
            for &j in &u {
                bands[j] = n;
            }
            blocks.push(Block::new(Bandwidths::new(bands)?));
        }
    }
    SubsetFamily::new(dim, blocks)
}

/// Size-`r` subsets of {0,…,d−1} in lexicographic order.
fn combinations(d: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(r);
    fn rec(d: usize, r: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for j in start..d {
            cur.push(j);
            rec(d, r, j + 1, cur, out);
            cur.pop();
        }
    }
    rec(d, r, 0, &mut cur, &mut out);
    out
}

/// Union of the per-block reduced grids, concatenated in family order.
///
/// Blocks are pairwise disjoint because a multi-index determines its support.
pub fn grouped_set(basis: &BasisVector, family: &SubsetFamily) -> Result<IndexSet> {
    if basis.dim() != family.dim() {
        return Err(Error::Shape(format!(
            "basis dim {} vs family dim {}",
            basis.dim(),
            family.dim()
        )));
    }
    let dim = basis.dim();
    let mut freqs = Vec::new();
    for b in family.blocks() {
        let set = reduced_set(basis, b.bands())?;
        freqs.extend_from_slice(&set.freqs);
    }
    Ok(IndexSet::from_rows(dim, freqs))
}

/// |grouped set| without materialising it.
pub fn grouped_cardinality(basis: &BasisVector, family: &SubsetFamily) -> Result<u128> {
    if basis.dim() != family.dim() {
        return Err(Error::Shape(format!(
            "basis dim {} vs family dim {}",
            basis.dim(),
            family.dim()
        )));
    }
    let mut total: u128 = 0;
    for b in family.blocks() {
        total = total.saturating_add(reduced_cardinality(basis, b.bands())?);
    }
    Ok(total)
}

/// Closed-form bound ds·(d·n_max)^ds on the grouped-set size of a
/// superposition family with uniform bandwidth, valid for d ≥ 2·ds ≥ 2.
pub fn cardinality_bound(dim: usize, ds: usize, n_max: i64) -> u128 {
    let base = (dim as u128).saturating_mul(n_max as u128);
    let mut pow: u128 = 1;
    for _ in 0..ds {
        pow = pow.saturating_mul(base);
    }
    (ds as u128).saturating_mul(pow)
}
