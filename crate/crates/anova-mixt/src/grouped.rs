//! Block transforms over a union of reduced grids: the sum of one
//! lower-dimensional mixed transform per coordinate subset u, and its
//! transpose.
//!
//! Each block works on the |u|-variate sub-problem: nodes are projected onto
//! the subset's dimensions, block coefficients are scattered into the
//! |u|-variate tensor grid (zero wherever some component is zero, since those
//! indices belong to smaller subsets), and one mixed transform runs per
//! block. Blocks are computed independently — in parallel when a thread pool
//! is available — and reduced strictly in family order, so results are
//! identical at any thread count.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::{BasisVector, NodeSet};
use crate::error::{Error, Result};
use crate::index::{hypercube_position, reduced_set, SubsetFamily};
use crate::nfft::NfftParams;
use crate::nfmt::MixedTransform;

/// Warns on an empty (skipped) block, once per distinct block signature —
/// bandwidth searches rebuild the same degenerate families many times over.
fn warn_empty_block_once(dims: &[usize], bands: &[i64]) {
    use std::collections::HashSet;
    use std::sync::{Mutex, OnceLock};

    static SEEN: OnceLock<Mutex<HashSet<(Vec<usize>, Vec<i64>)>>> = OnceLock::new();
    let seen = SEEN.get_or_init(|| Mutex::new(HashSet::new()));
    if seen.lock().unwrap().insert((dims.to_vec(), bands.to_vec())) {
        eprintln!(
            "warning: block u={:?} with N={bands:?} has an empty index set \
             (bandwidth 2 in a non-exp dimension); skipping it",
            dims.iter().map(|&j| j + 1).collect::<Vec<_>>()
        );
    }
}

/// Coefficients aligned to a family's grouped index set: one contiguous
/// slice per block, in family order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedCoefficients {
    values: Vec<Complex64>,
    offsets: Vec<usize>,
}

impl GroupedCoefficients {
    pub fn new(values: Vec<Complex64>, offsets: Vec<usize>) -> Result<Self> {
        if offsets.first() != Some(&0) || offsets.last() != Some(&values.len()) {
            return Err(Error::Shape(
                "block offsets must start at 0 and end at the value count".into(),
            ));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Shape("block offsets must be nondecreasing".into()));
        }
        Ok(Self { values, offsets })
    }

    pub fn zeros(offsets: Vec<usize>) -> Self {
        let n = *offsets.last().unwrap_or(&0);
        Self { values: vec![Complex64::new(0.0, 0.0); n], offsets }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_blocks(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn block(&self, b: usize) -> &[Complex64] {
        &self.values[self.offsets[b]..self.offsets[b + 1]]
    }

    pub fn block_mut(&mut self, b: usize) -> &mut [Complex64] {
        &mut self.values[self.offsets[b]..self.offsets[b + 1]]
    }
}

enum BlockPlan {
    /// The ∅ block: a single constant coefficient.
    Constant,
    /// A subset with a nonempty reduced grid.
    Standard {
        transform: MixedTransform,
        /// Tensor-grid slot of each reduced-grid entry, in reduced order.
        scatter: Vec<u32>,
    },
    /// A subset whose reduced grid is empty (bandwidth 2 in a non-exp
    /// dimension); contributes nothing and is skipped.
    Empty,
}

/// Reusable grouped transform for fixed basis, family, and nodes.
pub struct GroupedTransform {
    basis: BasisVector,
    family: SubsetFamily,
    n_nodes: usize,
    blocks: Vec<BlockPlan>,
    offsets: Vec<usize>,
    skipped: Vec<Vec<usize>>,
}

impl GroupedTransform {
    pub fn new(
        basis: &BasisVector,
        family: &SubsetFamily,
        nodes: &NodeSet,
        params: NfftParams,
    ) -> Result<Self> {
        if basis.dim() != family.dim() {
            return Err(Error::Shape(format!(
                "basis dim {} vs family dim {}",
                basis.dim(),
                family.dim()
            )));
        }
        if nodes.dim() != basis.dim() {
            return Err(Error::Shape(format!(
                "basis dim {} vs node dim {}",
                basis.dim(),
                nodes.dim()
            )));
        }
        let mut blocks = Vec::with_capacity(family.blocks().len());
        let mut offsets = vec![0usize];
        let mut skipped = Vec::new();
        for b in family.blocks() {
            let dims = b.subset();
            if dims.is_empty() {
                blocks.push(BlockPlan::Constant);
                offsets.push(offsets.last().unwrap() + 1);
                continue;
            }
            let sub_basis = basis.project(&dims)?;
            let sub_bands = b.bands().project(&dims)?;
            let reduced = reduced_set(&sub_basis, &sub_bands)?;
            if reduced.is_empty() {
                warn_empty_block_once(&dims, b.bands().as_slice());
                skipped.push(dims);
                blocks.push(BlockPlan::Empty);
                offsets.push(*offsets.last().unwrap());
                continue;
            }
            let scatter = reduced
                .iter()
                .map(|k| hypercube_position(&sub_basis, &sub_bands, k) as u32)
                .collect();
            let sub_nodes = nodes.project(&dims)?;
            let transform = MixedTransform::new(&sub_basis, &sub_bands, &sub_nodes, params)?;
            blocks.push(BlockPlan::Standard { transform, scatter });
            offsets.push(offsets.last().unwrap() + reduced.len());
        }
        Ok(Self {
            basis: basis.clone(),
            family: family.clone(),
            n_nodes: nodes.len(),
            blocks,
            offsets,
            skipped,
        })
    }

    pub fn basis(&self) -> &BasisVector {
        &self.basis
    }

    pub fn family(&self) -> &SubsetFamily {
        &self.family
    }

    pub fn num_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Total coefficient count |I(U)| over non-skipped blocks.
    pub fn num_coefficients(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block_offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Subsets whose blocks were dropped for having empty index sets.
    pub fn skipped_subsets(&self) -> &[Vec<usize>] {
        &self.skipped
    }

    pub fn zero_coefficients(&self) -> GroupedCoefficients {
        GroupedCoefficients::zeros(self.offsets.clone())
    }

    fn check_coeffs(&self, c: &GroupedCoefficients) -> Result<()> {
        if c.offsets() != self.offsets.as_slice() {
            return Err(Error::Shape(
                "coefficient blocks do not match the transform's family".into(),
            ));
        }
        Ok(())
    }

    /// Evaluates Σ_u Σ_{k∈block u} c_k φ_k at every node.
    ///
    /// Blocks run independently; their value vectors are summed in family
    /// order, so the output is bit-stable across thread counts.
    pub fn forward(&self, coeffs: &GroupedCoefficients) -> Result<Vec<Complex64>> {
        self.check_coeffs(coeffs)?;
        let per_block: Vec<Result<Option<Vec<Complex64>>>> = self
            .blocks
            .par_iter()
            .enumerate()
            .map(|(b, plan)| self.forward_block(plan, coeffs.block(b)))
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_nodes];
        for maybe in per_block {
            if let Some(vals) = maybe? {
                for (o, v) in out.iter_mut().zip(vals) {
                    *o += v;
                }
            }
        }
        Ok(out)
    }

    fn forward_block(
        &self,
        plan: &BlockPlan,
        coeffs: &[Complex64],
    ) -> Result<Option<Vec<Complex64>>> {
        match plan {
            BlockPlan::Constant => Ok(Some(vec![coeffs[0]; self.n_nodes])),
            BlockPlan::Empty => Ok(None),
            BlockPlan::Standard { transform, scatter } => {
                let mut grid =
                    vec![Complex64::new(0.0, 0.0); transform.num_coefficients()];
                for (c, &pos) in coeffs.iter().zip(scatter) {
                    grid[pos as usize] = *c;
                }
                transform.execute(&grid).map(Some)
            }
        }
    }

    /// Transpose: per block, h_k = Σ_i v_i φ_k(x_i) restricted to the block's
    /// full-support indices.
    pub fn adjoint(&self, values: &[Complex64]) -> Result<GroupedCoefficients> {
        if values.len() != self.n_nodes {
            return Err(Error::Shape(format!(
                "expected {} node values, got {}",
                self.n_nodes,
                values.len()
            )));
        }
        let per_block: Vec<Result<Vec<Complex64>>> = self
            .blocks
            .par_iter()
            .map(|plan| self.adjoint_block(plan, values))
            .collect();
        let mut out = self.zero_coefficients();
        for (b, res) in per_block.into_iter().enumerate() {
            out.block_mut(b).copy_from_slice(&res?);
        }
        Ok(out)
    }

    fn adjoint_block(&self, plan: &BlockPlan, values: &[Complex64]) -> Result<Vec<Complex64>> {
        match plan {
            BlockPlan::Constant => Ok(vec![values.iter().sum()]),
            BlockPlan::Empty => Ok(Vec::new()),
            BlockPlan::Standard { transform, scatter } => {
                let grid = transform.adjoint_execute(values)?;
                Ok(scatter.iter().map(|&pos| grid[pos as usize]).collect())
            }
        }
    }

    /// Hermitian adjoint Φ* = conj ∘ Φᵀ ∘ conj.
    pub fn adjoint_hermitian(&self, values: &[Complex64]) -> Result<GroupedCoefficients> {
        let conj: Vec<Complex64> = values.iter().map(|z| z.conj()).collect();
        let mut out = self.adjoint(&conj)?;
        for z in out.values_mut() {
            *z = z.conj();
        }
        Ok(out)
    }
}

/// One-shot forward transform.
pub fn grouped_forward(
    basis: &BasisVector,
    family: &SubsetFamily,
    coeffs: &GroupedCoefficients,
    nodes: &NodeSet,
    params: NfftParams,
) -> Result<Vec<Complex64>> {
    GroupedTransform::new(basis, family, nodes, params)?.forward(coeffs)
}

/// One-shot transpose transform.
pub fn grouped_adjoint(
    basis: &BasisVector,
    family: &SubsetFamily,
    nodes: &NodeSet,
    values: &[Complex64],
) -> Result<GroupedCoefficients> {
    GroupedTransform::new(basis, family, nodes, NfftParams::default())?.adjoint(values)
}

/// Dense matrix Φ(X, I(U)) with columns in grouped enumeration order.
pub fn dense_grouped_matrix(
    basis: &BasisVector,
    family: &SubsetFamily,
    nodes: &NodeSet,
) -> Result<Vec<Complex64>> {
    let set = crate::index::grouped_set(basis, family)?;
    let mut m = Vec::with_capacity(nodes.len() * set.len());
    for x in nodes.iter() {
        for k in set.iter() {
            m.push(crate::basis::eval_basis(basis, k, x)?);
        }
    }
    Ok(m)
}

/// Direct-summation oracle over the enumerated grouped set.
pub fn grouped_forward_direct(
    basis: &BasisVector,
    family: &SubsetFamily,
    coeffs: &[Complex64],
    nodes: &NodeSet,
) -> Result<Vec<Complex64>> {
    let set = crate::index::grouped_set(basis, family)?;
    if coeffs.len() != set.len() {
        return Err(Error::Shape(format!(
            "expected {} coefficients, got {}",
            set.len(),
            coeffs.len()
        )));
    }
    let mut out = Vec::with_capacity(nodes.len());
    for x in nodes.iter() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (row, k) in set.iter().enumerate() {
            acc += coeffs[row] * crate::basis::eval_basis(basis, k, x)?;
        }
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{superposition_family, Bandwidths, Block};
    use crate::nfmt::nfmt;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_nodes(basis: &BasisVector, m: usize, rng: &mut impl Rng) -> NodeSet {
        let coords: Vec<f64> = (0..m * basis.dim()).map(|_| rng.gen::<f64>()).collect();
        NodeSet::new(basis, coords).unwrap()
    }

    fn random_coeffs(n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect()
    }

    fn figure_family() -> (BasisVector, SubsetFamily) {
        let basis: BasisVector = "exp,alg,cos".parse().unwrap();
        let text = "\
u= N=0,0,0
u=1 N=18,0,0
u=2 N=0,16,0
u=3 N=0,0,10
u=1,2 N=10,8,0
u=2,3 N=0,8,6
";
        (basis, text.parse().unwrap())
    }

    fn grouped_from_slice(t: &GroupedTransform, c: &[Complex64]) -> GroupedCoefficients {
        let mut g = t.zero_coefficients();
        g.values_mut().copy_from_slice(c);
        g
    }

    #[test]
    fn constant_family_gives_constant() {
        let basis: BasisVector = "exp,cos".parse().unwrap();
        let family: SubsetFamily = "u= N=0,0".parse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let nodes = random_nodes(&basis, 7, &mut rng);
        let t = GroupedTransform::new(&basis, &family, &nodes, NfftParams::default()).unwrap();
        let c0 = Complex64::new(2.5, -0.5);
        let g = grouped_from_slice(&t, &[c0]);
        let vals = t.forward(&g).unwrap();
        assert!(vals.iter().all(|v| (v - c0).norm() < 1e-15));
        // adjoint of ones on a single node recovers 1
        let single = random_nodes(&basis, 1, &mut rng);
        let t1 = GroupedTransform::new(&basis, &family, &single, NfftParams::default()).unwrap();
        let h = t1.adjoint(&[Complex64::new(1.0, 0.0)]).unwrap();
        assert_eq!(h.values()[0], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn forward_matches_direct_enumeration() {
        let (basis, family) = figure_family();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let nodes = random_nodes(&basis, 40, &mut rng);
        let t = GroupedTransform::new(&basis, &family, &nodes, NfftParams::default()).unwrap();
        assert_eq!(t.num_coefficients(), 62);
        let c = random_coeffs(62, &mut rng);
        let fast = t.forward(&grouped_from_slice(&t, &c)).unwrap();
        let direct = grouped_forward_direct(&basis, &family, &c, &nodes).unwrap();
        let scale = direct.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for i in 0..40 {
            assert!((fast[i] - direct[i]).norm() < 1e-9 * scale, "node {i}");
        }
    }

    #[test]
    fn two_singletons_equal_sum_of_univariate_transforms() {
        let basis: BasisVector = "exp,alg".parse().unwrap();
        let family: SubsetFamily = "u=1 N=8,0\nu=2 N=0,10".parse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let nodes = random_nodes(&basis, 30, &mut rng);
        let t = GroupedTransform::new(&basis, &family, &nodes, NfftParams::default()).unwrap();
        let c = random_coeffs(t.num_coefficients(), &mut rng);
        let combined = t.forward(&grouped_from_slice(&t, &c)).unwrap();

        // block 1: exp dim, reduced = {−4..−1, 1..3}; block 2: alg, {1..4}
        let b1: BasisVector = "exp".parse().unwrap();
        let b2: BasisVector = "alg".parse().unwrap();
        let n1 = Bandwidths::new(vec![8]).unwrap();
        let n2 = Bandwidths::new(vec![10]).unwrap();
        let x1 = nodes.project(&[0]).unwrap();
        let x2 = nodes.project(&[1]).unwrap();
        // scatter reduced coefficients into the univariate grids
        let mut c1 = vec![Complex64::new(0.0, 0.0); 8];
        let red1: Vec<i64> = vec![-4, -3, -2, -1, 1, 2, 3];
        for (i, &k) in red1.iter().enumerate() {
            c1[(k + 4) as usize] = c[i];
        }
        let mut c2 = vec![Complex64::new(0.0, 0.0); 5];
        for (i, k) in (1..=4).enumerate() {
            c2[k as usize] = c[7 + i];
        }
        let v1 = nfmt(&b1, &n1, &x1, &c1, NfftParams::default()).unwrap();
        let v2 = nfmt(&b2, &n2, &x2, &c2, NfftParams::default()).unwrap();
        for i in 0..30 {
            assert!((combined[i] - (v1[i] + v2[i])).norm() < 1e-10);
        }
    }

    #[test]
    fn adjoint_matches_dense_transpose() {
        let (basis, family) = figure_family();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let nodes = random_nodes(&basis, 25, &mut rng);
        let t = GroupedTransform::new(&basis, &family, &nodes, NfftParams::default()).unwrap();
        let v = random_coeffs(25, &mut rng);
        let fast = t.adjoint(&v).unwrap();
        let dense = dense_grouped_matrix(&basis, &family, &nodes).unwrap();
        let n = t.num_coefficients();
        let scale = fast.values().iter().map(|z| z.norm()).fold(1.0, f64::max);
        for k in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..25 {
                acc += dense[i * n + k] * v[i];
            }
            assert!((acc - fast.values()[k]).norm() < 1e-9 * scale, "column {k}");
        }
        // zero input → zero blocks
        let zeros = t.adjoint(&vec![Complex64::new(0.0, 0.0); 25]).unwrap();
        assert!(zeros.values().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn dense_assembly_equals_block_concatenation() {
        let (basis, family) = figure_family();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let nodes = random_nodes(&basis, 12, &mut rng);
        let dense = dense_grouped_matrix(&basis, &family, &nodes).unwrap();
        let n = crate::index::grouped_cardinality(&basis, &family).unwrap() as usize;
        let mut col = 0usize;
        for b in family.blocks() {
            let dims = b.subset();
            if dims.is_empty() {
                for i in 0..nodes.len() {
                    assert_eq!(dense[i * n + col], Complex64::new(1.0, 0.0));
                }
                col += 1;
                continue;
            }
            let sub_basis = basis.project(&dims).unwrap();
            let sub_bands = b.bands().project(&dims).unwrap();
            let reduced = reduced_set(&sub_basis, &sub_bands).unwrap();
            let sub_nodes = nodes.project(&dims).unwrap();
            for (r, k) in reduced.iter().enumerate() {
                for i in 0..nodes.len() {
                    let expected =
                        crate::basis::eval_basis(&sub_basis, k, sub_nodes.node(i)).unwrap();
                    let got = dense[i * n + col + r];
                    assert!(
                        (got - expected).norm() < 1e-12,
                        "block {dims:?} entry {r} node {i}"
                    );
                }
            }
            col += reduced.len();
        }
        assert_eq!(col, n);
    }

    #[test]
    fn bilinear_pairing_blockwise() {
        let basis: BasisVector = "cos,exp,alg".parse().unwrap();
        let family = superposition_family(3, 2, &[8, 6]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let nodes = random_nodes(&basis, 33, &mut rng);
        let t = GroupedTransform::new(&basis, &family, &nodes, NfftParams::always_fast()).unwrap();
        let c = random_coeffs(t.num_coefficients(), &mut rng);
        let v = random_coeffs(33, &mut rng);
        let lhs: Complex64 = t
            .forward(&grouped_from_slice(&t, &c))
            .unwrap()
            .iter()
            .zip(&v)
            .map(|(a, b)| a * b)
            .sum();
        let rhs: Complex64 = t
            .adjoint(&v)
            .unwrap()
            .values()
            .iter()
            .zip(&c)
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(1.0));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let (basis, family) = figure_family();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let nodes = random_nodes(&basis, 20, &mut rng);
        let t = GroupedTransform::new(&basis, &family, &nodes, NfftParams::always_fast()).unwrap();
        let c = random_coeffs(t.num_coefficients(), &mut rng);
        let g = grouped_from_slice(&t, &c);
        let parallel = t.forward(&g).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let sequential = pool.install(|| t.forward(&g)).unwrap();
        assert_eq!(parallel, sequential);
    }

    #[test]
    fn empty_blocks_are_skipped() {
        let basis: BasisVector = "cos,exp".parse().unwrap();
        // cos bandwidth 2 → empty reduced grid for block {1}
        let family = SubsetFamily::new(
            2,
            vec![
                Block::new(Bandwidths::new(vec![0, 0]).unwrap()),
                Block::new(Bandwidths::new(vec![2, 0]).unwrap()),
                Block::new(Bandwidths::new(vec![0, 6]).unwrap()),
            ],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let nodes = random_nodes(&basis, 10, &mut rng);
        let t = GroupedTransform::new(&basis, &family, &nodes, NfftParams::default()).unwrap();
        assert_eq!(t.skipped_subsets(), &[vec![0usize]]);
        assert_eq!(t.num_coefficients(), 1 + 0 + 5);
        let c = random_coeffs(t.num_coefficients(), &mut rng);
        let vals = t.forward(&grouped_from_slice(&t, &c)).unwrap();
        let direct = grouped_forward_direct(&basis, &family, &c, &nodes).unwrap();
        for i in 0..10 {
            assert!((vals[i] - direct[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn shape_mismatches_error() {
        let (basis, family) = figure_family();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let nodes = random_nodes(&basis, 5, &mut rng);
        let t = GroupedTransform::new(&basis, &family, &nodes, NfftParams::default()).unwrap();
        let wrong = GroupedCoefficients::zeros(vec![0, 3]);
        assert!(t.forward(&wrong).is_err());
        assert!(t.adjoint(&[Complex64::new(0.0, 0.0); 3]).is_err());
    }
}
