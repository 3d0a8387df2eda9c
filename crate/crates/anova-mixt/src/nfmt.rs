//! Nonequispaced fast mixed transform: evaluation of tensor-product
//! polynomials in mixed exp/cos/Chebyshev bases, and the transposed
//! coefficient accumulation, each through a single torus NFFT.
//!
//! The reduction to the torus rests on two facts:
//!
//! * every non-exp basis function is a two-term combination of exponentials
//!   at the transformed coordinate, φ_k(x) = (√2/2)(e(k·t(x)) + e(−k·t(x)))
//!   for k ≠ 0, so a mixed coefficient vector expands linearly onto the
//!   all-exp grid with factors {0, 1, √2/2};
//! * the node transform is independent of the coefficients, so one NFFT plan
//!   at the transformed nodes serves every application.
//!
//! The grid slot k_j = −N_j/2 of a non-exp dimension has no mixed
//! counterpart (its mirror +N_j/2 lies outside the grid) and carries an
//! exact zero; the transpose accordingly drops those slots.

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::basis::{eval_basis_1d, BasisVector, NodeSet};
use crate::error::{Error, Result};
use crate::index::{hypercube_set, Bandwidths};
use crate::nfft::{NfftParams, NfftPlan};

/// Per-dimension expansion tables between the mixed grid and the all-exp grid.
struct Expansion {
    basis: BasisVector,
    bands: Bandwidths,
    /// Mixed grid length per dimension (N_j for exp, N_j/2 otherwise).
    mixed_lens: Vec<usize>,
    /// Exp grid length per dimension (N_j).
    exp_lens: Vec<usize>,
    /// For each exp-grid slot: the mixed slot it reads from…
    src: Vec<Vec<u32>>,
    /// …and the factor applied (0 for the dead slot k_j = −N_j/2, 1, or √2/2).
    fac: Vec<Vec<f64>>,
}

impl Expansion {
    fn new(basis: &BasisVector, bands: &Bandwidths) -> Result<Self> {
        if basis.dim() != bands.dim() {
            return Err(Error::Shape(format!(
                "basis dim {} vs bandwidth dim {}",
                basis.dim(),
                bands.dim()
            )));
        }
        let mut mixed_lens = Vec::new();
        let mut exp_lens = Vec::new();
        let mut src = Vec::new();
        let mut fac = Vec::new();
        for j in 0..basis.dim() {
            let n = bands.get(j);
            if n < 2 {
                return Err(Error::InvalidBandwidth(format!(
                    "transform needs bandwidth >= 2 in every dimension, got {n}"
                )));
            }
            let is_exp = basis.kind(j).is_exp();
            mixed_lens.push(if is_exp { n } else { n / 2 } as usize);
            exp_lens.push(n as usize);
            let mut s = Vec::with_capacity(n as usize);
            let mut f = Vec::with_capacity(n as usize);
            for l in -n / 2..n / 2 {
                if is_exp {
                    s.push((l + n / 2) as u32);
                    f.push(1.0);
                } else if l == -n / 2 {
                    s.push(0);
                    f.push(0.0);
                } else {
                    s.push(l.unsigned_abs() as u32);
                    f.push(if l == 0 { 1.0 } else { FRAC_1_SQRT_2 });
                }
            }
            src.push(s);
            fac.push(f);
        }
        Ok(Self {
            basis: basis.clone(),
            bands: bands.clone(),
            mixed_lens,
            exp_lens,
            src,
            fac,
        })
    }

    fn n_mixed(&self) -> usize {
        self.mixed_lens.iter().product()
    }

    fn n_exp(&self) -> usize {
        self.exp_lens.iter().product()
    }

    /// Walks the exp grid row-major, giving each row its mixed source slot
    /// and factor (prefix products over dimensions).
    fn walk<F: FnMut(usize, usize, f64)>(&self, mut emit: F) {
        let d = self.exp_lens.len();
        let total = self.n_exp();
        let mut odo = vec![0usize; d];
        let mut pos = vec![0usize; d + 1];
        let mut f = vec![1.0f64; d + 1];
        for j in 0..d {
            pos[j + 1] = pos[j] * self.mixed_lens[j] + self.src[j][0] as usize;
            f[j + 1] = f[j] * self.fac[j][0];
        }
        for row in 0..total {
            emit(row, pos[d], f[d]);
            let mut j = d;
            while j > 0 {
                j -= 1;
                odo[j] += 1;
                if odo[j] < self.exp_lens[j] {
                    break;
                }
                odo[j] = 0;
            }
            if row + 1 < total {
                for jj in j..d {
                    pos[jj + 1] =
                        pos[jj] * self.mixed_lens[jj] + self.src[jj][odo[jj]] as usize;
                    f[jj + 1] = f[jj] * self.fac[jj][odo[jj]];
                }
            }
        }
    }

    /// Mixed coefficients to all-exp coefficients.
    fn expand(&self, c: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_exp()];
        self.walk(|row, srcpos, f| {
            if f != 0.0 {
                out[row] = c[srcpos] * f;
            }
        });
        out
    }

    /// Transpose of [`Self::expand`]: fold ±k preimages back with the same
    /// factors (dead slots contribute nothing).
    fn fold(&self, e: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_mixed()];
        self.walk(|row, srcpos, f| {
            if f != 0.0 {
                out[srcpos] += e[row] * f;
            }
        });
        out
    }
}

/// Expands mixed coefficients onto the all-exp grid with the same bandwidths.
///
/// Output order is the all-exp tensor grid, row-major; entries at
/// k_j = −N_j/2 of non-exp dimensions are exactly zero.
pub fn expand_coefficients(
    basis: &BasisVector,
    bands: &Bandwidths,
    coeffs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let ex = Expansion::new(basis, bands)?;
    if coeffs.len() != ex.n_mixed() {
        return Err(Error::Shape(format!(
            "expected {} mixed coefficients, got {}",
            ex.n_mixed(),
            coeffs.len()
        )));
    }
    Ok(ex.expand(coeffs))
}

/// Transpose of [`expand_coefficients`].
pub fn fold_coefficients(
    basis: &BasisVector,
    bands: &Bandwidths,
    expanded: &[Complex64],
) -> Result<Vec<Complex64>> {
    let ex = Expansion::new(basis, bands)?;
    if expanded.len() != ex.n_exp() {
        return Err(Error::Shape(format!(
            "expected {} expanded coefficients, got {}",
            ex.n_exp(),
            expanded.len()
        )));
    }
    Ok(ex.fold(expanded))
}

/// Reusable transform for fixed basis, bandwidths, and nodes.
///
/// Construction validates the nodes, applies the node transform once, and
/// builds one NFFT plan; forward and adjoint executions are then reentrant
/// and share no mutable state.
pub struct MixedTransform {
    expansion: Expansion,
    plan: NfftPlan,
    n_nodes: usize,
}

impl MixedTransform {
    pub fn new(
        basis: &BasisVector,
        bands: &Bandwidths,
        nodes: &NodeSet,
        params: NfftParams,
    ) -> Result<Self> {
        let expansion = Expansion::new(basis, bands)?;
        if nodes.dim() != basis.dim() {
            return Err(Error::Shape(format!(
                "basis dim {} vs node dim {}",
                basis.dim(),
                nodes.dim()
            )));
        }
        let torus = nodes.transformed(basis)?;
        let plan = NfftPlan::new(bands.clone(), torus, params)?;
        Ok(Self { expansion, plan, n_nodes: nodes.len() })
    }

    pub fn basis(&self) -> &BasisVector {
        &self.expansion.basis
    }

    pub fn bands(&self) -> &Bandwidths {
        &self.expansion.bands
    }

    /// Mixed-grid coefficient count |I|.
    pub fn num_coefficients(&self) -> usize {
        self.expansion.n_mixed()
    }

    pub fn num_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Evaluates Σ_k c_k φ_k at every node.
    pub fn execute(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        if coeffs.len() != self.expansion.n_mixed() {
            return Err(Error::Shape(format!(
                "expected {} coefficients, got {}",
                self.expansion.n_mixed(),
                coeffs.len()
            )));
        }
        self.plan.execute(&self.expansion.expand(coeffs))
    }

    /// Transpose: h_k = Σ_i v_i φ_k(x_i) (no conjugation; φ values as-is).
    pub fn adjoint_execute(&self, values: &[Complex64]) -> Result<Vec<Complex64>> {
        Ok(self.expansion.fold(&self.plan.adjoint_execute(values)?))
    }

    /// Hermitian adjoint Φ* = conj ∘ Φᵀ ∘ conj, as needed by least squares.
    pub fn adjoint_hermitian(&self, values: &[Complex64]) -> Result<Vec<Complex64>> {
        let conj: Vec<Complex64> = values.iter().map(|z| z.conj()).collect();
        Ok(self
            .adjoint_execute(&conj)?
            .into_iter()
            .map(|z| z.conj())
            .collect())
    }

    /// Real forward path for all-real bases (no exp dimension): evaluates with
    /// real coefficients and discards the (checked) imaginary residue.
    pub fn execute_real(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.require_real_basis()?;
        let c: Vec<Complex64> = coeffs.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        let out = self.execute(&c)?;
        Ok(strip_imag(out))
    }

    /// Real transpose path for all-real bases.
    pub fn adjoint_execute_real(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.require_real_basis()?;
        let v: Vec<Complex64> = values.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        let out = self.adjoint_execute(&v)?;
        Ok(strip_imag(out))
    }

    fn require_real_basis(&self) -> Result<()> {
        if self.expansion.basis.kinds().iter().any(|k| k.is_exp()) {
            return Err(Error::InvalidArgument(
                "real shortcut requires all basis kinds to be non-exp".into(),
            ));
        }
        Ok(())
    }
}

/// Drops imaginary parts after checking they are numerically negligible.
fn strip_imag(out: Vec<Complex64>) -> Vec<f64> {
    let norm: f64 = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let imag: f64 = out.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    debug_assert!(
        imag <= 1e-9 * norm.max(1e-300),
        "imaginary residue {imag:e} exceeds 1e-9 of output norm {norm:e}"
    );
    out.into_iter().map(|z| z.re).collect()
}

/// One-shot forward transform.
pub fn nfmt(
    basis: &BasisVector,
    bands: &Bandwidths,
    nodes: &NodeSet,
    coeffs: &[Complex64],
    params: NfftParams,
) -> Result<Vec<Complex64>> {
    MixedTransform::new(basis, bands, nodes, params)?.execute(coeffs)
}

/// One-shot transpose transform.
pub fn nfmt_adjoint(
    basis: &BasisVector,
    bands: &Bandwidths,
    nodes: &NodeSet,
    values: &[Complex64],
    params: NfftParams,
) -> Result<Vec<Complex64>> {
    MixedTransform::new(basis, bands, nodes, params)?.adjoint_execute(values)
}

/// Direct-summation oracle for the forward transform.
///
/// Evaluates the double loop Σ_k c_k φ_k(x_i) with one-dimensional factors
/// tabulated per (node, dimension, frequency); products are taken in
/// dimension order, so the result is bit-identical to the naive nesting.
pub fn nfmt_direct(
    basis: &BasisVector,
    bands: &Bandwidths,
    nodes: &NodeSet,
    coeffs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let tables = mixed_twiddles(basis, bands, nodes)?;
    let lens = mixed_lens(basis, bands);
    let total: usize = lens.iter().product();
    if coeffs.len() != total {
        return Err(Error::Shape(format!(
            "expected {total} coefficients, got {}",
            coeffs.len()
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); nodes.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        walk_products(&lens, |j, p| tables[j][i * lens[j] + p], |row, prod| {
            acc += coeffs[row] * prod
        });
        *o = acc;
    }
    Ok(out)
}

/// Direct-summation oracle for the transpose transform.
pub fn nfmt_adjoint_direct(
    basis: &BasisVector,
    bands: &Bandwidths,
    nodes: &NodeSet,
    values: &[Complex64],
) -> Result<Vec<Complex64>> {
    if values.len() != nodes.len() {
        return Err(Error::Shape(format!(
            "expected {} values, got {}",
            nodes.len(),
            values.len()
        )));
    }
    let tables = mixed_twiddles(basis, bands, nodes)?;
    let lens = mixed_lens(basis, bands);
    let total: usize = lens.iter().product();
    let mut out = vec![Complex64::new(0.0, 0.0); total];
    for (i, &v) in values.iter().enumerate() {
        walk_products(&lens, |j, p| tables[j][i * lens[j] + p], |row, prod| {
            out[row] += v * prod
        });
    }
    Ok(out)
}

/// Dense matrix Φ with Φ[i·|I| + row] = φ_k(x_i), rows over nodes.
pub fn dense_mixed_matrix(
    basis: &BasisVector,
    bands: &Bandwidths,
    nodes: &NodeSet,
) -> Result<Vec<Complex64>> {
    let set = hypercube_set(basis, bands)?;
    let mut m = Vec::with_capacity(nodes.len() * set.len());
    for x in nodes.iter() {
        for k in set.iter() {
            m.push(crate::basis::eval_basis(basis, k, x)?);
        }
    }
    Ok(m)
}

fn mixed_lens(basis: &BasisVector, bands: &Bandwidths) -> Vec<usize> {
    (0..basis.dim())
        .map(|j| {
            let n = bands.get(j);
            (if basis.kind(j).is_exp() { n } else { n / 2 }) as usize
        })
        .collect()
}

/// φ_{k}(x_ij) per dimension, ascending frequency order of the mixed grid.
fn mixed_twiddles(
    basis: &BasisVector,
    bands: &Bandwidths,
    nodes: &NodeSet,
) -> Result<Vec<Vec<Complex64>>> {
    if basis.dim() != bands.dim() || nodes.dim() != basis.dim() {
        return Err(Error::Shape("basis/bandwidth/node dimension mismatch".into()));
    }
    let mut tables = Vec::with_capacity(basis.dim());
    for j in 0..basis.dim() {
        let freqs = crate::index::dim_frequencies(basis.kind(j), bands.get(j));
        let mut t = Vec::with_capacity(nodes.len() * freqs.len());
        for i in 0..nodes.len() {
            let x = nodes.node(i)[j];
            for &k in &freqs {
                t.push(eval_basis_1d(basis.kind(j), k, x)?);
            }
        }
        tables.push(t);
    }
    Ok(tables)
}

/// Row-major product walk shared by the direct oracles.
fn walk_products<F: FnMut(usize, Complex64)>(
    lens: &[usize],
    value: impl Fn(usize, usize) -> Complex64,
    mut emit: F,
) {
    let d = lens.len();
    let total: usize = lens.iter().product();
    if total == 0 {
        return;
    }
    let mut odo = vec![0usize; d];
    let mut prefix = vec![Complex64::new(1.0, 0.0); d + 1];
    for j in 0..d {
        prefix[j + 1] = prefix[j] * value(j, 0);
    }
    for row in 0..total {
        emit(row, prefix[d]);
        let mut j = d;
        while j > 0 {
            j -= 1;
            odo[j] += 1;
            if odo[j] < lens[j] {
                break;
            }
            odo[j] = 0;
        }
        if row + 1 < total {
            for jj in j..d {
                prefix[jj + 1] = prefix[jj] * value(jj, odo[jj]);
            }
        }
    }
}

/// Hermitian-adjoint direct oracle (conjugated transpose accumulation).
pub fn nfmt_adjoint_hermitian_direct(
    basis: &BasisVector,
    bands: &Bandwidths,
    nodes: &NodeSet,
    values: &[Complex64],
) -> Result<Vec<Complex64>> {
    let conj: Vec<Complex64> = values.iter().map(|z| z.conj()).collect();
    Ok(nfmt_adjoint_direct(basis, bands, nodes, &conj)?
        .into_iter()
        .map(|z| z.conj())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
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

    fn rel_linf(a: &[Complex64], b: &[Complex64]) -> f64 {
        let scale = b.iter().map(|v| v.norm()).fold(1e-300, f64::max);
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn cosine_expansion_frozen_example() {
        let basis: BasisVector = "cos".parse().unwrap();
        let bands = Bandwidths::new(vec![4]).unwrap();
        let a = Complex64::new(0.3, -0.1);
        let b = Complex64::new(-1.2, 0.4);
        let e = expand_coefficients(&basis, &bands, &[a, b]).unwrap();
        let half = FRAC_1_SQRT_2;
        assert_eq!(e.len(), 4); // slots k = −2, −1, 0, 1
        assert_eq!(e[0], Complex64::new(0.0, 0.0));
        assert!((e[1] - b * half).norm() < 1e-15);
        assert!((e[2] - a).norm() < 1e-15);
        assert!((e[3] - b * half).norm() < 1e-15);
    }

    #[test]
    fn delta_at_zero_expands_to_delta() {
        let basis: BasisVector = "exp,alg".parse().unwrap();
        let bands = Bandwidths::new(vec![4, 6]).unwrap();
        let mut c = vec![Complex64::new(0.0, 0.0); 4 * 3];
        // mixed grid row-major: exp slot k1=0 is position 2, alg slot k2=0 is 0
        c[2 * 3] = Complex64::new(1.0, 0.0);
        let e = expand_coefficients(&basis, &bands, &c).unwrap();
        for (row, k) in hypercube_set(&BasisVector::all_exp(2), &bands)
            .unwrap()
            .iter()
            .enumerate()
        {
            let expected = if k == [0, 0] { 1.0 } else { 0.0 };
            assert!((e[row] - expected).norm() < 1e-15, "row {row} k {k:?}");
        }
    }

    #[test]
    fn expansion_has_conjugate_pairing_in_nonexp_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let basis: BasisVector = "exp,alg".parse().unwrap();
        let bands = Bandwidths::new(vec![6, 8]).unwrap();
        // real mixed coefficients give the pairing against plain mirroring
        let c: Vec<Complex64> = (0..6 * 4)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, 0.0))
            .collect();
        let e = expand_coefficients(&basis, &bands, &c).unwrap();
        let grid = hypercube_set(&BasisVector::all_exp(2), &bands).unwrap();
        let find = |k1: i64, k2: i64| {
            grid.iter()
                .position(|k| k == [k1, k2])
                .map(|p| e[p])
                .unwrap()
        };
        for k1 in -3..3 {
            for k2 in 1..4 {
                let plus = find(k1, k2);
                let minus = find(k1, -k2);
                assert!((plus - minus).norm() < 1e-15, "k=({k1},{k2})");
            }
        }
    }

    #[test]
    fn dead_slots_are_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let basis: BasisVector = "cos,exp".parse().unwrap();
        let bands = Bandwidths::new(vec![8, 4]).unwrap();
        let c = random_coeffs(4 * 4, &mut rng);
        let e = expand_coefficients(&basis, &bands, &c).unwrap();
        let grid = hypercube_set(&BasisVector::all_exp(2), &bands).unwrap();
        for (row, k) in grid.iter().enumerate() {
            if k[0] == -4 {
                assert_eq!(e[row], Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn chebyshev_delta_at_endpoint() {
        let basis: BasisVector = "alg".parse().unwrap();
        let bands = Bandwidths::new(vec![6]).unwrap();
        let nodes = NodeSet::new(&basis, vec![1.0]).unwrap();
        let mut c = vec![Complex64::new(0.0, 0.0); 3];
        c[2] = Complex64::new(1.0, 0.0); // k = 2
        let v = nfmt(&basis, &bands, &nodes, &c, NfftParams::default()).unwrap();
        assert!((v[0] - Complex64::new(f64::sqrt(2.0), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn constant_coefficient_gives_all_ones() {
        let basis: BasisVector = "exp,cos,alg".parse().unwrap();
        let bands = Bandwidths::new(vec![4, 4, 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let nodes = random_nodes(&basis, 9, &mut rng);
        let mut c = vec![Complex64::new(0.0, 0.0); 4 * 2 * 2];
        // k = (0,0,0) sits at exp position 2, cos 0, alg 0 → row (2*2+0)*2+0
        c[8] = Complex64::new(1.0, 0.0);
        let v = nfmt(&basis, &bands, &nodes, &c, NfftParams::default()).unwrap();
        for val in v {
            assert!((val - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_oracle_in_both_routings() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..8 {
            let kinds = ["exp", "cos", "alg"];
            let spec = format!(
                "{},{},{}",
                kinds[rng.gen_range(0..3)],
                kinds[rng.gen_range(0..3)],
                kinds[rng.gen_range(0..3)]
            );
            let basis: BasisVector = spec.parse().unwrap();
            let bands = Bandwidths::new(
                (0..3).map(|_| 2 * rng.gen_range(1..=4i64)).collect(),
            )
            .unwrap();
            let nodes = random_nodes(&basis, 50, &mut rng);
            let n = mixed_lens(&basis, &bands).iter().product::<usize>();
            let c = random_coeffs(n, &mut rng);
            let v = random_coeffs(50, &mut rng);
            let fwd_oracle = nfmt_direct(&basis, &bands, &nodes, &c).unwrap();
            let adj_oracle = nfmt_adjoint_direct(&basis, &bands, &nodes, &v).unwrap();
            for params in [NfftParams::default(), NfftParams::always_fast()] {
                let t = MixedTransform::new(&basis, &bands, &nodes, params).unwrap();
                let ef = rel_linf(&t.execute(&c).unwrap(), &fwd_oracle);
                let ea = rel_linf(&t.adjoint_execute(&v).unwrap(), &adj_oracle);
                assert!(ef < 1e-9, "trial {trial} ({spec}): forward err {ef}");
                assert!(ea < 1e-9, "trial {trial} ({spec}): adjoint err {ea}");
            }
        }
    }

    #[test]
    fn adjoint_trivial_cases() {
        let basis: BasisVector = "cos,alg".parse().unwrap();
        let bands = Bandwidths::new(vec![4, 4]).unwrap();
        let nodes = NodeSet::new(&basis, vec![0.31, 0.77]).unwrap();
        let h = nfmt_adjoint(
            &basis,
            &bands,
            &nodes,
            &[Complex64::new(1.0, 0.0)],
            NfftParams::default(),
        )
        .unwrap();
        // h(0) = φ_0(x) = 1
        assert!((h[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let zeros = nfmt_adjoint(
            &basis,
            &bands,
            &nodes,
            &[Complex64::new(0.0, 0.0)],
            NfftParams::default(),
        )
        .unwrap();
        assert!(zeros.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn bilinear_pairing_and_hermitian_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let basis: BasisVector = "exp,alg,cos".parse().unwrap();
        let bands = Bandwidths::new(vec![6, 8, 4]).unwrap();
        let nodes = random_nodes(&basis, 23, &mut rng);
        let t = MixedTransform::new(&basis, &bands, &nodes, NfftParams::always_fast()).unwrap();
        let c = random_coeffs(t.num_coefficients(), &mut rng);
        let v = random_coeffs(23, &mut rng);

        let bilinear_lhs: Complex64 = t
            .execute(&c)
            .unwrap()
            .iter()
            .zip(&v)
            .map(|(a, b)| a * b)
            .sum();
        let bilinear_rhs: Complex64 = t
            .adjoint_execute(&v)
            .unwrap()
            .iter()
            .zip(&c)
            .map(|(a, b)| a * b)
            .sum();
        assert!((bilinear_lhs - bilinear_rhs).norm() < 1e-9 * bilinear_lhs.norm().max(1.0));

        let herm_lhs: Complex64 = t
            .execute(&c)
            .unwrap()
            .iter()
            .zip(&v)
            .map(|(a, b)| a * b.conj())
            .sum();
        let herm_rhs: Complex64 = c
            .iter()
            .zip(&t.adjoint_hermitian(&v).unwrap())
            .map(|(a, b)| a * b.conj())
            .sum();
        assert!((herm_lhs - herm_rhs).norm() < 1e-9 * herm_lhs.norm().max(1.0));
    }

    #[test]
    fn linearity_of_fixed_plan() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let basis: BasisVector = "alg,exp".parse().unwrap();
        let bands = Bandwidths::new(vec![8, 6]).unwrap();
        let nodes = random_nodes(&basis, 15, &mut rng);
        let t = MixedTransform::new(&basis, &bands, &nodes, NfftParams::always_fast()).unwrap();
        let c1 = random_coeffs(t.num_coefficients(), &mut rng);
        let c2 = random_coeffs(t.num_coefficients(), &mut rng);
        let alpha = Complex64::new(0.7, -1.3);
        let combo: Vec<Complex64> = c1
            .iter()
            .zip(&c2)
            .map(|(a, b)| alpha * a + b)
            .collect();
        let lhs = t.execute(&combo).unwrap();
        let f1 = t.execute(&c1).unwrap();
        let f2 = t.execute(&c2).unwrap();
        let scale = lhs.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for i in 0..lhs.len() {
            assert!((lhs[i] - (alpha * f1[i] + f2[i])).norm() < 1e-12 * scale);
        }
    }

    #[test]
    fn real_shortcut_matches_complex_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let basis: BasisVector = "cos,alg".parse().unwrap();
        let bands = Bandwidths::new(vec![8, 6]).unwrap();
        let nodes = random_nodes(&basis, 12, &mut rng);
        let t = MixedTransform::new(&basis, &bands, &nodes, NfftParams::always_fast()).unwrap();
        let c: Vec<f64> = (0..t.num_coefficients()).map(|_| rng.gen::<f64>() - 0.5).collect();
        let cc: Vec<Complex64> = c.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        let real = t.execute_real(&c).unwrap();
        let complexed = t.execute(&cc).unwrap();
        for i in 0..real.len() {
            assert!((real[i] - complexed[i].re).abs() < 1e-12);
        }
        // shortcut refuses mixed bases with an exp dimension
        let basis2: BasisVector = "exp,alg".parse().unwrap();
        let nodes2 = random_nodes(&basis2, 4, &mut rng);
        let t2 = MixedTransform::new(&basis2, &bands, &nodes2, NfftParams::default()).unwrap();
        assert!(t2.execute_real(&vec![0.0; t2.num_coefficients()]).is_err());
    }

    #[test]
    fn fold_is_transpose_of_expand() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let basis: BasisVector = "exp,cos".parse().unwrap();
        let bands = Bandwidths::new(vec![4, 8]).unwrap();
        let ex = Expansion::new(&basis, &bands).unwrap();
        let c = random_coeffs(ex.n_mixed(), &mut rng);
        let e = random_coeffs(ex.n_exp(), &mut rng);
        let lhs: Complex64 = ex.expand(&c).iter().zip(&e).map(|(a, b)| a * b).sum();
        let rhs: Complex64 = c.iter().zip(&ex.fold(&e)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
    }
}
