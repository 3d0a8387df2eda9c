//! Fitted ANOVA models: least-squares coefficients on a grouped index set,
//! prediction, variances and global sensitivity indices, threshold
//! truncation, and bandwidth searches.
//!
//! A [`MixedModel`] couples a basis vector and subset family with the
//! coefficient blocks obtained from the iterative solver. Variance splits
//! exactly across blocks (the coefficients of distinct subsets are
//! orthogonal), so sensitivity indices are plain ratios of block energies.

use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use crate::basis::{BasisVector, NodeSet};
use crate::error::{Error, Result};
use crate::grouped::{GroupedCoefficients, GroupedTransform};
use crate::index::{
    grouped_cardinality, reduced_cardinality, superposition_family, Bandwidths, Block,
    SubsetFamily,
};
use crate::lsqr::{lsqr, LinearOperator, LsqrOptions, StopReason};
use crate::nfft::NfftParams;

/// Mean of squared absolute deviations between two real vectors.
pub fn mse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::Shape(format!(
            "mse needs equal nonempty lengths, got {} and {}",
            truth.len(),
            pred.len()
        )));
    }
    let s: f64 = truth.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(s / truth.len() as f64)
}

/// Complex counterpart of [`mse`].
pub fn mse_complex(truth: &[Complex64], pred: &[Complex64]) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::Shape(format!(
            "mse needs equal nonempty lengths, got {} and {}",
            truth.len(),
            pred.len()
        )));
    }
    let s: f64 = truth.iter().zip(pred).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(s / truth.len() as f64)
}

/// Coefficient counts per block determined by basis and family alone
/// (prefix offsets, one past the end per block). Matches the layout of
/// [`GroupedTransform::block_offsets`] for any node set.
pub fn family_offsets(basis: &BasisVector, family: &SubsetFamily) -> Result<Vec<usize>> {
    let mut offsets = Vec::with_capacity(family.blocks().len() + 1);
    offsets.push(0usize);
    let mut total = 0usize;
    for block in family.blocks() {
        let u = block.subset();
        let count = if u.is_empty() {
            1
        } else {
            let sub_basis = basis.project(&u)?;
            let sub_bands = block.bands().project(&u)?;
            reduced_cardinality(&sub_basis, &sub_bands)? as usize
        };
        total += count;
        offsets.push(total);
    }
    Ok(offsets)
}

/// Grouped transform exposed to the iterative solver.
struct GroupedOperator<'a> {
    transform: &'a GroupedTransform,
}

impl LinearOperator for GroupedOperator<'_> {
    fn rows(&self) -> usize {
        self.transform.num_nodes()
    }

    fn cols(&self) -> usize {
        self.transform.num_coefficients()
    }

    fn forward(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let coeffs =
            GroupedCoefficients::new(x.to_vec(), self.transform.block_offsets().to_vec())?;
        self.transform.forward(&coeffs)
    }

    fn adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        Ok(self.transform.adjoint_hermitian(y)?.into_values())
    }
}

/// A fitted mixed-basis ANOVA approximation.
#[derive(Debug, Clone)]
pub struct MixedModel {
    basis: BasisVector,
    family: SubsetFamily,
    coefficients: GroupedCoefficients,
    m_train: usize,
    iterations: usize,
    residual_norm: f64,
    stop: StopReason,
}

/// Least-squares fit of grouped coefficients to complex targets.
pub fn fit_complex(
    basis: &BasisVector,
    family: &SubsetFamily,
    nodes: &NodeSet,
    targets: &[Complex64],
    opts: LsqrOptions,
) -> Result<MixedModel> {
    if targets.len() != nodes.len() {
        return Err(Error::Shape(format!(
            "{} targets for {} nodes",
            targets.len(),
            nodes.len()
        )));
    }
    let transform = GroupedTransform::new(basis, family, nodes, NfftParams::default())?;
    if transform.num_coefficients() == 0 {
        return Err(Error::InvalidFamily(
            "the grouped index set is empty; nothing to fit".into(),
        ));
    }
    let op = GroupedOperator { transform: &transform };
    let report = lsqr(&op, targets, opts)?;
    let coefficients =
        GroupedCoefficients::new(report.solution, transform.block_offsets().to_vec())?;
    Ok(MixedModel {
        basis: basis.clone(),
        family: family.clone(),
        coefficients,
        m_train: nodes.len(),
        iterations: report.iterations,
        residual_norm: report.residual_norm,
        stop: report.stop,
    })
}

/// Least-squares fit to real targets (the common case).
pub fn fit(
    basis: &BasisVector,
    family: &SubsetFamily,
    nodes: &NodeSet,
    targets: &[f64],
    opts: LsqrOptions,
) -> Result<MixedModel> {
    let rhs: Vec<Complex64> = targets.iter().map(|&t| Complex64::new(t, 0.0)).collect();
    fit_complex(basis, family, nodes, &rhs, opts)
}

impl MixedModel {
    /// Assembles a model from explicit coefficients (e.g. analytic ones).
    pub fn from_parts(
        basis: BasisVector,
        family: SubsetFamily,
        coefficients: GroupedCoefficients,
        m_train: usize,
    ) -> Result<Self> {
        let offsets = family_offsets(&basis, &family)?;
        if coefficients.offsets() != offsets.as_slice() {
            return Err(Error::Shape(format!(
                "coefficient blocks {:?} do not match the family layout {:?}",
                coefficients.offsets(),
                offsets
            )));
        }
        Ok(Self {
            basis,
            family,
            coefficients,
            m_train,
            iterations: 0,
            residual_norm: 0.0,
            stop: StopReason::ResidualTolerance,
        })
    }

    pub fn basis(&self) -> &BasisVector {
        &self.basis
    }

    pub fn family(&self) -> &SubsetFamily {
        &self.family
    }

    pub fn coefficients(&self) -> &GroupedCoefficients {
        &self.coefficients
    }

    /// Number of training nodes the coefficients were fitted on.
    pub fn m_train(&self) -> usize {
        self.m_train
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// True training residual ‖f − Φĥ‖₂ recorded at solver exit.
    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }

    pub fn stop(&self) -> StopReason {
        self.stop
    }

    /// Evaluates the approximation at new nodes.
    pub fn predict_complex(&self, nodes: &NodeSet) -> Result<Vec<Complex64>> {
        let transform =
            GroupedTransform::new(&self.basis, &self.family, nodes, NfftParams::default())?;
        self.transform_check(&transform)?;
        transform.forward(&self.coefficients)
    }

    /// Real part of the approximation at new nodes.
    pub fn predict(&self, nodes: &NodeSet) -> Result<Vec<f64>> {
        Ok(self.predict_complex(nodes)?.into_iter().map(|z| z.re).collect())
    }

    fn transform_check(&self, transform: &GroupedTransform) -> Result<()> {
        if transform.block_offsets() != self.coefficients.offsets() {
            return Err(Error::Shape(
                "transform layout does not match the stored coefficients".into(),
            ));
        }
        Ok(())
    }

    /// Total variance σ²(f) = Σ_{k≠0} |ĥ_k|² (the constant block is excluded).
    pub fn variance(&self) -> f64 {
        self.family
            .blocks()
            .iter()
            .enumerate()
            .filter(|(_, b)| b.order() > 0)
            .map(|(i, _)| block_energy(self.coefficients.block(i)))
            .sum()
    }

    /// Variance attributed to one subset: the energy of its block.
    /// The constant subset has variance 0 by definition.
    pub fn term_variance(&self, u: &[usize]) -> Result<f64> {
        if u.is_empty() {
            return Ok(0.0);
        }
        let pos = self
            .family
            .blocks()
            .iter()
            .position(|b| b.subset() == u)
            .ok_or_else(|| {
                Error::InvalidFamily(format!("subset {u:?} is not part of the model"))
            })?;
        Ok(block_energy(self.coefficients.block(pos)))
    }

    /// Global sensitivity indices ρ(u) = σ²(f_u)/σ²(f) over non-constant
    /// subsets, in family order.
    pub fn gsi(&self) -> Result<GsiTable> {
        let var = self.variance();
        if !(var > 0.0) {
            return Err(Error::DegenerateModel);
        }
        let entries = self
            .family
            .blocks()
            .iter()
            .enumerate()
            .filter(|(_, b)| b.order() > 0)
            .map(|(i, b)| (b.subset(), block_energy(self.coefficients.block(i)) / var))
            .collect();
        Ok(GsiTable { entries })
    }

    /// Family of subsets whose sensitivity index exceeds `theta`, with the
    /// constant subset retained and bandwidths carried over.
    pub fn truncate(&self, theta: f64) -> Result<SubsetFamily> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold must lie in (0,1), got {theta}"
            )));
        }
        let table = self.gsi()?;
        let mut keep: BTreeSet<Vec<usize>> = table
            .entries()
            .iter()
            .filter(|(_, rho)| *rho > theta)
            .map(|(u, _)| u.clone())
            .collect();
        if self.family.contains_empty() {
            keep.insert(Vec::new());
        }
        self.family.restrict(&keep)
    }

    /// Structured text form; see `from_text` for the accepted grammar.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "[basis]").unwrap();
        writeln!(s, "{}", self.basis).unwrap();
        writeln!(s, "[family]").unwrap();
        writeln!(s, "{}", self.family).unwrap();
        writeln!(s, "[coefficients]").unwrap();
        for z in self.coefficients.values() {
            writeln!(s, "{} {}", z.re, z.im).unwrap();
        }
        writeln!(s, "[meta]").unwrap();
        writeln!(s, "m_train={}", self.m_train).unwrap();
        writeln!(s, "iterations={}", self.iterations).unwrap();
        writeln!(s, "residual={}", self.residual_norm).unwrap();
        writeln!(s, "stop={}", self.stop).unwrap();
        s
    }

    /// Parses the sectioned text format written by `to_text`:
    /// `[basis]` holds one comma-separated kind list, `[family]` one block
    /// per line (`u=1,3 N=10,0,8,0`), `[coefficients]` one `re im` pair per
    /// line in block order, `[meta]` `key=value` lines. `#` starts a comment;
    /// blank lines are ignored. Finite values round-trip bit-exactly.
    pub fn from_text(text: &str) -> Result<Self> {
        #[derive(PartialEq, Clone, Copy)]
        enum Section {
            None,
            Basis,
            Family,
            Coefficients,
            Meta,
        }
        let mut section = Section::None;
        let mut basis: Option<BasisVector> = None;
        let mut family_lines: Vec<&str> = Vec::new();
        let mut values: Vec<Complex64> = Vec::new();
        let mut m_train: Option<usize> = None;
        let mut iterations: Option<usize> = None;
        let mut residual: Option<f64> = None;
        let mut stop: Option<StopReason> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = i + 1;
            let bad = |msg: String| Error::Parse { line: lineno, msg };
            match line {
                "[basis]" => section = Section::Basis,
                "[family]" => section = Section::Family,
                "[coefficients]" => section = Section::Coefficients,
                "[meta]" => section = Section::Meta,
                _ => match section {
                    Section::None => {
                        return Err(bad(format!("content before any section: `{line}`")))
                    }
                    Section::Basis => {
                        if basis.is_some() {
                            return Err(bad("duplicate basis line".into()));
                        }
                        basis = Some(line.parse()?);
                    }
                    Section::Family => family_lines.push(line),
                    Section::Coefficients => {
                        let mut parts = line.split_whitespace();
                        let re: f64 = parts
                            .next()
                            .ok_or_else(|| bad("missing real part".into()))?
                            .parse()
                            .map_err(|e| bad(format!("bad real part: {e}")))?;
                        let im: f64 = parts
                            .next()
                            .ok_or_else(|| bad("missing imaginary part".into()))?
                            .parse()
                            .map_err(|e| bad(format!("bad imaginary part: {e}")))?;
                        if parts.next().is_some() {
                            return Err(bad("expected exactly two fields".into()));
                        }
                        values.push(Complex64::new(re, im));
                    }
                    Section::Meta => {
                        let (key, val) = line
                            .split_once('=')
                            .ok_or_else(|| bad(format!("expected key=value, got `{line}`")))?;
                        match key.trim() {
                            "m_train" => {
                                m_train = Some(val.trim().parse().map_err(|e| {
                                    bad(format!("bad m_train: {e}"))
                                })?)
                            }
                            "iterations" => {
                                iterations = Some(val.trim().parse().map_err(|e| {
                                    bad(format!("bad iterations: {e}"))
                                })?)
                            }
                            "residual" => {
                                residual = Some(val.trim().parse().map_err(|e| {
                                    bad(format!("bad residual: {e}"))
                                })?)
                            }
                            "stop" => stop = Some(val.trim().parse()?),
                            other => {
                                return Err(bad(format!("unknown meta key `{other}`")))
                            }
                        }
                    }
                },
            }
        }
        let missing = |what: &str| Error::Parse { line: 0, msg: format!("missing {what}") };
        let basis = basis.ok_or_else(|| missing("[basis] section"))?;
        if family_lines.is_empty() {
            return Err(missing("[family] section"));
        }
        let family: SubsetFamily = family_lines.join("\n").parse()?;
        let offsets = family_offsets(&basis, &family)?;
        let total = *offsets.last().unwrap();
        if values.len() != total {
            return Err(Error::Parse {
                line: 0,
                msg: format!("expected {total} coefficients, found {}", values.len()),
            });
        }
        let coefficients = GroupedCoefficients::new(values, offsets)?;
        Ok(Self {
            basis,
            family,
            coefficients,
            m_train: m_train.ok_or_else(|| missing("meta key m_train"))?,
            iterations: iterations.ok_or_else(|| missing("meta key iterations"))?,
            residual_norm: residual.ok_or_else(|| missing("meta key residual"))?,
            stop: stop.ok_or_else(|| missing("meta key stop"))?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn block_energy(block: &[Complex64]) -> f64 {
    block.iter().map(|z| z.norm_sqr()).sum()
}

/// Global sensitivity indices keyed by subset (0-based dimensions), constant
/// subset excluded. Ratios share one denominator, so they sum to 1.
#[derive(Debug, Clone)]
pub struct GsiTable {
    entries: Vec<(Vec<usize>, f64)>,
}

impl GsiTable {
    /// Builds a table from explicit (subset, index) pairs, e.g. analytic
    /// reference values.
    pub fn from_entries(entries: Vec<(Vec<usize>, f64)>) -> Self {
        Self { entries }
    }

    /// Entries in family order.
    pub fn entries(&self) -> &[(Vec<usize>, f64)] {
        &self.entries
    }

    /// Index of one subset (0-based dimensions), if present.
    pub fn get(&self, u: &[usize]) -> Option<f64> {
        self.entries.iter().find(|(s, _)| s == u).map(|(_, r)| *r)
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|(_, r)| r).sum()
    }

    /// Entries ordered by decreasing index (ties by subset).
    pub fn sorted_descending(&self) -> Vec<(Vec<usize>, f64)> {
        let mut out = self.entries.clone();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    /// ℓ₂ distance to a reference table over the union of subsets
    /// (missing entries count as 0).
    pub fn l2_deviation(&self, reference: &[(Vec<usize>, f64)]) -> f64 {
        let mut keys: BTreeSet<&Vec<usize>> = self.entries.iter().map(|(u, _)| u).collect();
        keys.extend(reference.iter().map(|(u, _)| u));
        keys.iter()
            .map(|u| {
                let a = self.get(u).unwrap_or(0.0);
                let b = reference
                    .iter()
                    .find(|(s, _)| s == *u)
                    .map(|(_, r)| *r)
                    .unwrap_or(0.0);
                (a - b) * (a - b)
            })
            .sum::<f64>()
            .sqrt()
    }
}

impl fmt::Display for GsiTable {
    /// One line per subset, largest first: `u=1,2 rho=0.277825` (1-based).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (u, rho) in self.sorted_descending() {
            f.write_str("u=")?;
            for (i, j) in u.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{}", j + 1)?;
            }
            writeln!(f, " rho={rho}")?;
        }
        Ok(())
    }
}

/// Where validation targets come from during bandwidth searches.
pub enum Validation<'a> {
    /// Shuffle the provided data with this seed and hold out 20%.
    SplitSeed(u64),
    /// Score against a caller-supplied held-out sample.
    Holdout { nodes: &'a NodeSet, targets: &'a [f64] },
}

struct SearchData {
    train_nodes: NodeSet,
    train_targets: Vec<f64>,
    valid_nodes: NodeSet,
    valid_targets: Vec<f64>,
}

fn resolve_validation(
    nodes: &NodeSet,
    targets: &[f64],
    validation: &Validation<'_>,
) -> Result<SearchData> {
    if targets.len() != nodes.len() {
        return Err(Error::Shape(format!(
            "{} targets for {} nodes",
            targets.len(),
            nodes.len()
        )));
    }
    match validation {
        Validation::SplitSeed(seed) => {
            let (train, valid) = crate::data::split_indices(nodes.len(), 0.8, *seed);
            if train.is_empty() || valid.is_empty() {
                return Err(Error::Shape("too few rows for an 80/20 split".into()));
            }
            Ok(SearchData {
                train_nodes: nodes.select(&train),
                train_targets: train.iter().map(|&i| targets[i]).collect(),
                valid_nodes: nodes.select(&valid),
                valid_targets: valid.iter().map(|&i| targets[i]).collect(),
            })
        }
        Validation::Holdout { nodes: vn, targets: vt } => {
            if vt.len() != vn.len() {
                return Err(Error::Shape(format!(
                    "{} validation targets for {} nodes",
                    vt.len(),
                    vn.len()
                )));
            }
            Ok(SearchData {
                train_nodes: nodes.clone(),
                train_targets: targets.to_vec(),
                valid_nodes: (*vn).clone(),
                valid_targets: vt.to_vec(),
            })
        }
    }
}

/// Validation error of one fitted family; failures count as +∞.
fn scored_mse(
    basis: &BasisVector,
    family: &SubsetFamily,
    data: &SearchData,
    opts: LsqrOptions,
) -> f64 {
    let guard = grouped_cardinality(basis, family)
        .map(|c| c >= data.train_nodes.len() as u128)
        .unwrap_or(true);
    if guard {
        return f64::INFINITY;
    }
    let Ok(model) = fit(basis, family, &data.train_nodes, &data.train_targets, opts) else {
        return f64::INFINITY;
    };
    let Ok(pred) = model.predict(&data.valid_nodes) else {
        return f64::INFINITY;
    };
    match mse(&data.valid_targets, &pred) {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    }
}

/// One evaluated grid cell.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub n1: i64,
    pub n2: i64,
    pub mse: f64,
}

/// Grid-search outcome: the winning pair plus the full surface for plotting.
#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best_n1: i64,
    pub best_n2: i64,
    pub best_mse: f64,
    /// Cells in input order (n1 outer, n2 inner).
    pub surface: Vec<GridCell>,
}

/// Scores every (N₁, N₂) pair of a superposition family of order `ds` and
/// returns the argmin (ties broken toward smaller N₂, then N₁). A cell whose
/// index set reaches the training size, or whose fit fails, scores +∞.
pub fn grid_search_bandwidths(
    basis: &BasisVector,
    ds: usize,
    n1_values: &[i64],
    n2_values: &[i64],
    nodes: &NodeSet,
    targets: &[f64],
    validation: Validation<'_>,
    opts: LsqrOptions,
) -> Result<GridSearchResult> {
    if n1_values.is_empty() || n2_values.is_empty() {
        return Err(Error::InvalidArgument("empty bandwidth grid".into()));
    }
    if ds != 1 && ds != 2 {
        return Err(Error::InvalidArgument(format!(
            "grid search covers superposition orders 1 and 2, got {ds}"
        )));
    }
    let data = resolve_validation(nodes, targets, &validation)?;
    let cells: Vec<(i64, i64)> = n1_values
        .iter()
        .flat_map(|&n1| n2_values.iter().map(move |&n2| (n1, n2)))
        .collect();
    let surface: Vec<GridCell> = cells
        .par_iter()
        .map(|&(n1, n2)| {
            let n_by_order = if ds == 1 { vec![n1] } else { vec![n1, n2] };
            let cell_mse = match superposition_family(basis.dim(), ds, &n_by_order) {
                Ok(family) => scored_mse(basis, &family, &data, opts),
                Err(_) => f64::INFINITY,
            };
            GridCell { n1, n2, mse: cell_mse }
        })
        .collect();
    let best = surface
        .iter()
        .min_by(|a, b| {
            a.mse
                .total_cmp(&b.mse)
                .then_with(|| a.n2.cmp(&b.n2))
                .then_with(|| a.n1.cmp(&b.n1))
        })
        .unwrap();
    Ok(GridSearchResult {
        best_n1: best.n1,
        best_n2: best.n2,
        best_mse: best.mse,
        surface,
    })
}

/// One trial during coordinate refinement.
#[derive(Debug, Clone)]
pub struct RefineStep {
    /// Subset whose bandwidth was stepped (0-based dimensions).
    pub subset: Vec<usize>,
    /// Stepped dimension, or `None` when the whole block moved uniformly.
    pub component: Option<usize>,
    /// Full-length trial bandwidth vector of the block.
    pub bands: Vec<i64>,
    pub mse: f64,
    pub accepted: bool,
}

/// Refinement outcome: best family found, its validation error, and the
/// complete trial trace.
#[derive(Debug, Clone)]
pub struct RefineResult {
    pub family: SubsetFamily,
    pub mse: f64,
    pub trace: Vec<RefineStep>,
}

/// Block bandwidths with `delta` added on the chosen dimensions; `None` once
/// any stepped entry would drop below 2.
fn stepped_family(
    family: &SubsetFamily,
    block_idx: usize,
    component: Option<usize>,
    delta: i64,
) -> Result<Option<SubsetFamily>> {
    let blocks = family.blocks();
    let block = &blocks[block_idx];
    let mut bands = block.bands().as_slice().to_vec();
    let dims: Vec<usize> = match component {
        Some(j) => vec![j],
        None => block.subset(),
    };
    for &j in &dims {
        let next = bands[j] + delta;
        if next < 2 {
            return Ok(None);
        }
        bands[j] = next;
    }
    let mut new_blocks: Vec<Block> = blocks.to_vec();
    new_blocks[block_idx] = Block::new(Bandwidths::new(bands)?);
    Ok(Some(SubsetFamily::new(family.dim(), new_blocks)?))
}

/// Steps one parameter ±2 while the objective improves: up first; if the
/// first up-step does not improve, down instead.
fn descend_parameter(
    family: &mut SubsetFamily,
    best: &mut f64,
    block_idx: usize,
    component: Option<usize>,
    objective: &mut dyn FnMut(&SubsetFamily) -> Result<f64>,
    trace: &mut Vec<RefineStep>,
) -> Result<()> {
    for delta in [2i64, -2] {
        let mut improved = false;
        loop {
            // the block index is order-stable: bandwidth values don't change
            // the family's canonical (order, subset) sort
            let Some(trial) = stepped_family(family, block_idx, component, delta)? else {
                break;
            };
            let value = objective(&trial)?;
            let accepted = value < *best;
            trace.push(RefineStep {
                subset: trial.blocks()[block_idx].subset(),
                component,
                bands: trial.blocks()[block_idx].bands().as_slice().to_vec(),
                mse: value,
                accepted,
            });
            if !accepted {
                break;
            }
            *family = trial;
            *best = value;
            improved = true;
        }
        if improved {
            break;
        }
    }
    Ok(())
}

/// Coordinate descent over block bandwidths against an arbitrary objective.
/// Blocks are visited largest subsets first (descending order, then
/// descending subset); the first pass moves each block uniformly, the
/// optional second pass steps every active dimension separately.
pub fn coordinate_refine_with(
    family: &SubsetFamily,
    second_pass: bool,
    mut objective: impl FnMut(&SubsetFamily) -> Result<f64>,
) -> Result<RefineResult> {
    let mut current = family.clone();
    let mut best = objective(&current)?;
    let mut trace = Vec::new();
    let order: Vec<usize> = (0..current.blocks().len())
        .rev()
        .filter(|&i| current.blocks()[i].order() > 0)
        .collect();
    for &i in &order {
        descend_parameter(&mut current, &mut best, i, None, &mut objective, &mut trace)?;
    }
    if second_pass {
        for &i in &order {
            for j in current.blocks()[i].subset() {
                descend_parameter(
                    &mut current,
                    &mut best,
                    i,
                    Some(j),
                    &mut objective,
                    &mut trace,
                )?;
            }
        }
    }
    Ok(RefineResult { family: current, mse: best, trace })
}

/// Coordinate refinement of a family's bandwidths against validation error.
pub fn coordinate_refine_bandwidths(
    basis: &BasisVector,
    family: &SubsetFamily,
    nodes: &NodeSet,
    targets: &[f64],
    validation: Validation<'_>,
    opts: LsqrOptions,
    second_pass: bool,
) -> Result<RefineResult> {
    let data = resolve_validation(nodes, targets, &validation)?;
    coordinate_refine_with(family, second_pass, |fam| Ok(scored_mse(basis, fam, &data, opts)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::eval_basis;
    use crate::data::{sample_nodes_seeded, split_indices};
    use crate::grouped::dense_grouped_matrix;
    use nalgebra::{DMatrix, DVector};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn family_of(dim: usize, rows: &[(&[usize], &[i64])]) -> SubsetFamily {
        let blocks = rows
            .iter()
            .map(|(u, ns)| {
                let mut bands = vec![0i64; dim];
                for (j, n) in u.iter().zip(ns.iter()) {
                    bands[*j] = *n;
                }
                Block::new(Bandwidths::new(bands).unwrap())
            })
            .collect();
        SubsetFamily::new(dim, blocks).unwrap()
    }

    #[test]
    fn constant_fit_recovers_the_mean() {
        let basis: BasisVector = "cos".parse().unwrap();
        let family = family_of(1, &[(&[], &[])]);
        let nodes = sample_nodes_seeded(&basis, 30, 5);
        let targets = vec![3.0; 30];
        let model = fit(&basis, &family, &nodes, &targets, LsqrOptions::default()).unwrap();
        let c0 = model.coefficients().values()[0];
        assert!((c0.re - 3.0).abs() < 1e-10 && c0.im.abs() < 1e-10);
        let fresh = sample_nodes_seeded(&basis, 7, 6);
        for v in model.predict(&fresh).unwrap() {
            assert!((v - 3.0).abs() < 1e-10);
        }
        assert_eq!(model.variance(), 0.0);
        assert!(matches!(model.gsi(), Err(Error::DegenerateModel)));
    }

    #[test]
    fn single_mode_recovery() {
        let basis: BasisVector = "exp,cos".parse().unwrap();
        let family = superposition_family(2, 2, &[6, 6]).unwrap();
        let nodes = sample_nodes_seeded(&basis, 400, 11);
        let k = [2i64, 0];
        let targets: Vec<Complex64> =
            nodes.iter().map(|x| eval_basis(&basis, &k, x).unwrap()).collect();
        let model =
            fit_complex(&basis, &family, &nodes, &targets, LsqrOptions::default()).unwrap();
        // the mode lives in block {1}; everything else stays near zero
        assert!((model.term_variance(&[0]).unwrap() - 1.0).abs() < 1e-6);
        assert!(model.term_variance(&[1]).unwrap() < 1e-12);
        let rho = model.gsi().unwrap();
        assert!((rho.get(&[0]).unwrap() - 1.0).abs() < 1e-6);
        assert!((rho.sum() - 1.0).abs() < 1e-12);
        let fresh = sample_nodes_seeded(&basis, 25, 12);
        let pred = model.predict_complex(&fresh).unwrap();
        for (x, p) in fresh.iter().zip(&pred) {
            assert!((p - eval_basis(&basis, &k, x).unwrap()).norm() < 1e-6);
        }
    }

    #[test]
    fn hand_built_variances_and_truncation() {
        let basis: BasisVector = "exp,cos".parse().unwrap();
        let family = family_of(2, &[(&[], &[]), (&[0], &[4]), (&[1], &[6])]);
        let offsets = family_offsets(&basis, &family).unwrap();
        // blocks: constant 1, exp reduced 3, cos reduced 2
        assert_eq!(offsets, vec![0, 1, 4, 6]);
        let mut coeffs = GroupedCoefficients::zeros(offsets);
        coeffs.values_mut()[0] = Complex64::new(7.0, 0.0);
        coeffs.block_mut(1)[0] = Complex64::new(0.5, 0.0); // energy 0.25
        coeffs.block_mut(2)[1] = Complex64::new(0.0, 0.75f64.sqrt()); // energy 0.75
        let model = MixedModel::from_parts(basis, family, coeffs, 10).unwrap();
        assert!((model.variance() - 1.0).abs() < 1e-15);
        assert!((model.term_variance(&[0]).unwrap() - 0.25).abs() < 1e-15);
        assert!((model.term_variance(&[1]).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(model.term_variance(&[]).unwrap(), 0.0);
        assert!(model.term_variance(&[0, 1]).is_err());
        let rho = model.gsi().unwrap();
        assert!((rho.sum() - 1.0).abs() < 1e-12);
        // θ between the two indices keeps only the larger block
        let kept = model.truncate(0.5).unwrap();
        let subsets: Vec<Vec<usize>> = kept.blocks().iter().map(|b| b.subset()).collect();
        assert_eq!(subsets, vec![vec![], vec![1]]);
        // θ above every index keeps only the constant
        let kept = model.truncate(0.9).unwrap();
        assert_eq!(kept.blocks().len(), 1);
        assert!(kept.contains_empty());
        // tiny θ keeps every energetic subset
        let kept = model.truncate(1e-300).unwrap();
        assert_eq!(kept.blocks().len(), 3);
        assert!(model.truncate(0.0).is_err());
        assert!(model.truncate(1.0).is_err());
    }

    #[test]
    fn truncation_is_monotone_in_theta() {
        let basis: BasisVector = "exp,cos,alg".parse().unwrap();
        let family = superposition_family(3, 2, &[6, 4]).unwrap();
        let offsets = family_offsets(&basis, &family).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<Complex64> = (0..*offsets.last().unwrap())
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let coeffs = GroupedCoefficients::new(values, offsets).unwrap();
        let model = MixedModel::from_parts(basis, family, coeffs, 10).unwrap();
        let thetas = [1e-3, 1e-2, 5e-2, 0.2, 0.8];
        let families: Vec<BTreeSet<Vec<usize>>> = thetas
            .iter()
            .map(|&t| {
                model
                    .truncate(t)
                    .unwrap()
                    .blocks()
                    .iter()
                    .map(|b| b.subset())
                    .collect()
            })
            .collect();
        for w in families.windows(2) {
            assert!(w[1].is_subset(&w[0]));
        }
    }

    #[test]
    fn mse_frozen_values() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0], &[2.0]).unwrap(), 4.0);
        assert_eq!(
            mse_complex(&[Complex64::new(0.0, 1.0)], &[Complex64::new(0.0, 0.0)]).unwrap(),
            1.0
        );
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mse(&[], &[]).is_err());
    }

    #[test]
    fn serialization_round_trips_bit_exactly() {
        let basis: BasisVector = "exp,alg".parse().unwrap();
        let family = superposition_family(2, 2, &[4, 4]).unwrap();
        let nodes = sample_nodes_seeded(&basis, 60, 21);
        let targets: Vec<f64> = nodes.iter().map(|x| x[0] + (x[1] - 0.3).powi(2)).collect();
        let model = fit(&basis, &family, &nodes, &targets, LsqrOptions::default()).unwrap();
        let text = model.to_text();
        let back = MixedModel::from_text(&text).unwrap();
        assert_eq!(back.basis().kinds(), model.basis().kinds());
        assert_eq!(back.family(), model.family());
        assert_eq!(back.coefficients().values(), model.coefficients().values());
        assert_eq!(back.m_train(), model.m_train());
        assert_eq!(back.iterations(), model.iterations());
        assert_eq!(
            back.residual_norm().to_bits(),
            model.residual_norm().to_bits()
        );
        assert_eq!(back.stop(), model.stop());
        // and once more through a file
        let path = std::env::temp_dir().join("anova_mixt_model_roundtrip.txt");
        model.save(&path).unwrap();
        let loaded = MixedModel::load(&path).unwrap();
        assert_eq!(loaded.coefficients().values(), model.coefficients().values());
        std::fs::remove_file(&path).ok();
        // corrupted input fails with a parse error
        assert!(MixedModel::from_text(&text.replace("[meta]", "[misc]")).is_err());
    }

    #[test]
    fn family_offsets_match_transform_layout() {
        let basis: BasisVector = "cos,exp,alg".parse().unwrap();
        // the {3} block has bandwidth 2 in an alg dimension: zero coefficients
        let family = family_of(
            3,
            &[(&[], &[]), (&[0], &[6]), (&[2], &[2]), (&[0, 1], &[4, 4])],
        );
        let nodes = sample_nodes_seeded(&basis, 20, 9);
        let transform =
            GroupedTransform::new(&basis, &family, &nodes, NfftParams::default()).unwrap();
        assert_eq!(
            family_offsets(&basis, &family).unwrap(),
            transform.block_offsets().to_vec()
        );
        assert_eq!(transform.skipped_subsets(), &[vec![2usize]]);
    }

    #[test]
    fn fit_matches_a_dense_svd_oracle() {
        let basis: BasisVector = "exp,alg,cos".parse().unwrap();
        let family = superposition_family(3, 2, &[4, 4]).unwrap();
        let nodes = sample_nodes_seeded(&basis, 40, 17);
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let targets: Vec<f64> = (0..40).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let opts = LsqrOptions { max_iter: 400, atol: 1e-13, btol: 1e-13, damping: 0.0 };
        let model = fit(&basis, &family, &nodes, &targets, opts).unwrap();
        let dense = dense_grouped_matrix(&basis, &family, &nodes).unwrap();
        let cols = model.coefficients().len();
        let a = DMatrix::from_fn(40, cols, |i, j| dense[i * cols + j]);
        let b = DVector::from_fn(40, |i, _| Complex64::new(targets[i], 0.0));
        let x = a.clone().svd(true, true).solve(&b, 1e-13).unwrap();
        let got = model.coefficients().values();
        let scale = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for j in 0..cols {
            assert!((got[j] - x[j]).norm() <= 1e-6 * scale.max(1.0));
        }
        // solver certificate: the normal-equation residual is small
        let r = &b - &a * DVector::from_column_slice(got);
        let g = a.adjoint() * &r;
        let gnorm = g.norm();
        assert!(gnorm <= 1e-6 * a.norm() * DVector::from_column_slice(got).norm().max(1.0));
    }

    #[test]
    fn grid_search_single_cell_argmin_and_guardrail() {
        let basis: BasisVector = "cos,cos".parse().unwrap();
        let nodes = sample_nodes_seeded(&basis, 50, 31);
        let targets: Vec<f64> =
            nodes.iter().map(|x| (PI_ * x[0]).cos() + 0.3 * (PI_ * x[1]).cos()).collect();
        // single cell comes straight back
        let one = grid_search_bandwidths(
            &basis,
            2,
            &[4],
            &[4],
            &nodes,
            &targets,
            Validation::SplitSeed(1),
            LsqrOptions::default(),
        )
        .unwrap();
        assert_eq!((one.best_n1, one.best_n2), (4, 4));
        assert_eq!(one.surface.len(), 1);
        // argmin property over a small grid
        let grid = grid_search_bandwidths(
            &basis,
            2,
            &[4, 6],
            &[4, 6],
            &nodes,
            &targets,
            Validation::SplitSeed(1),
            LsqrOptions::default(),
        )
        .unwrap();
        assert!(grid.surface.iter().all(|c| grid.best_mse <= c.mse));
        // zero targets give exactly equal cells; ties break toward small (N₂, N₁)
        let zeros = vec![0.0; 50];
        let tied = grid_search_bandwidths(
            &basis,
            2,
            &[6, 4],
            &[6, 4],
            &nodes,
            &zeros,
            Validation::SplitSeed(1),
            LsqrOptions::default(),
        )
        .unwrap();
        assert_eq!((tied.best_n1, tied.best_n2, tied.best_mse), (4, 4, 0.0));
        // an oversized cell scores +∞ via the cardinality guardrail
        let (train, valid) = split_indices(50, 0.2, 2); // 10 training rows
        let small = grid_search_bandwidths(
            &basis,
            2,
            &[8],
            &[8],
            &nodes.select(&train),
            &train.iter().map(|&i| targets[i]).collect::<Vec<_>>(),
            Validation::Holdout {
                nodes: &nodes.select(&valid),
                targets: &valid.iter().map(|&i| targets[i]).collect::<Vec<_>>(),
            },
            LsqrOptions::default(),
        )
        .unwrap();
        assert!(small.best_mse.is_infinite());
    }

    const PI_: f64 = std::f64::consts::PI;

    #[test]
    fn refinement_descends_a_synthetic_objective() {
        let basis_dim = 1usize;
        let family = family_of(basis_dim, &[(&[], &[]), (&[0], &[12])]);
        let objective = |fam: &SubsetFamily| -> Result<f64> {
            let n = fam.blocks()[1].bands().get(0) as f64;
            Ok((n - 8.0) * (n - 8.0))
        };
        let out = coordinate_refine_with(&family, false, objective).unwrap();
        assert_eq!(out.family.blocks()[1].bands().get(0), 8);
        assert_eq!(out.mse, 0.0);
        assert!(out.trace.iter().filter(|s| s.accepted).count() == 2); // 12→10→8
        // starting at the optimum changes nothing and accepts nothing
        let at_opt = family_of(basis_dim, &[(&[], &[]), (&[0], &[8])]);
        let out = coordinate_refine_with(&at_opt, true, objective).unwrap();
        assert_eq!(out.family, at_opt);
        assert!(out.trace.iter().all(|s| !s.accepted));
    }

    #[test]
    fn refinement_visits_blocks_largest_first_and_respects_the_floor() {
        let family = family_of(
            3,
            &[(&[], &[]), (&[0], &[4]), (&[2], &[4]), (&[1, 2], &[4, 4])],
        );
        let mut seen: Vec<Vec<usize>> = Vec::new();
        // objective worsens on every move: each parameter logs exactly two
        // rejected trials (up then down), at the floor only one (up)
        let out = coordinate_refine_with(&family, false, |fam: &SubsetFamily| {
            let total: i64 = fam
                .blocks()
                .iter()
                .map(|b| b.bands().as_slice().iter().map(|n| (n - 4).abs()).sum::<i64>())
                .sum();
            Ok(total as f64)
        })
        .unwrap();
        for s in &out.trace {
            if seen.last() != Some(&s.subset) {
                seen.push(s.subset.clone());
            }
        }
        assert_eq!(seen, vec![vec![1, 2], vec![2], vec![0]]);
        assert_eq!(out.family, family);
        // a floor-2 parameter cannot step down
        let floor = family_of(1, &[(&[], &[]), (&[0], &[2])]);
        let out = coordinate_refine_with(&floor, false, |fam: &SubsetFamily| {
            Ok(fam.blocks()[1].bands().get(0) as f64)
        })
        .unwrap();
        assert_eq!(out.family.blocks()[1].bands().get(0), 2);
    }

    #[test]
    fn second_pass_refines_dimensions_separately() {
        let family = family_of(2, &[(&[], &[]), (&[0, 1], &[8, 8])]);
        // optimum at (6, 10): the uniform pass cannot reach it, the
        // per-dimension pass can
        let objective = |fam: &SubsetFamily| -> Result<f64> {
            let b = fam.blocks()[1].bands();
            let (a, c) = (b.get(0) as f64, b.get(1) as f64);
            Ok((a - 6.0) * (a - 6.0) + (c - 10.0) * (c - 10.0))
        };
        let uniform_only = coordinate_refine_with(&family, false, objective).unwrap();
        assert_eq!(uniform_only.family, family); // (8,8) is the uniform optimum
        let refined = coordinate_refine_with(&family, true, objective).unwrap();
        assert_eq!(refined.family.blocks()[1].bands().as_slice(), &[6, 10]);
        assert_eq!(refined.mse, 0.0);
    }

    #[test]
    fn gsi_table_ordering_and_deviation() {
        let table = GsiTable::from_entries(vec![
            (vec![0], 0.2),
            (vec![1], 0.5),
            (vec![0, 1], 0.3),
        ]);
        let sorted = table.sorted_descending();
        assert_eq!(sorted[0].0, vec![1]);
        assert_eq!(sorted[2].0, vec![0]);
        assert!((table.sum() - 1.0).abs() < 1e-15);
        let reference = vec![(vec![1], 0.5), (vec![0], 0.2), (vec![0, 1], 0.3)];
        assert!(table.l2_deviation(&reference) < 1e-15);
        let off = vec![(vec![1], 0.4), (vec![2], 0.1)];
        let expect = (0.2f64.powi(2) + 0.1f64.powi(2) + 0.3f64.powi(2) + 0.1f64.powi(2)).sqrt();
        assert!((table.l2_deviation(&off) - expect).abs() < 1e-12);
        let shown = table.to_string();
        assert!(shown.starts_with("u=2 rho=0.5\n"));
    }
}
