//! Built-in oracle suites: the fast transform against direct summation, the
//! transpose pairing, and the dense factorization identity. Each suite
//! reports its worst error; the command exits nonzero if any cap is missed.

use anova_mixt::basis::{eval_basis, BasisKind, BasisVector, NodeSet};
use anova_mixt::index::{hypercube_set, Bandwidths};
use anova_mixt::nfft::{ndft, NfftParams};
use anova_mixt::nfmt::{
    dense_mixed_matrix, expand_coefficients, nfmt, nfmt_adjoint, nfmt_adjoint_direct,
    nfmt_direct,
};
use anova_mixt::Result;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct SuiteReport {
    pub name: &'static str,
    pub max_error: f64,
    pub cap: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.max_error.is_finite() && self.max_error <= self.cap
    }
}

const KINDS: [BasisKind; 3] = [BasisKind::Exp, BasisKind::Cos, BasisKind::Alg];

fn random_instance(
    rng: &mut ChaCha8Rng,
    max_dim: usize,
    max_m: usize,
) -> (BasisVector, Bandwidths, NodeSet, Vec<Complex64>) {
    let dim = rng.gen_range(1..=max_dim);
    let kinds: Vec<BasisKind> = (0..dim).map(|_| KINDS[rng.gen_range(0..3)]).collect();
    let basis = BasisVector::new(kinds).unwrap();
    let bands =
        Bandwidths::new((0..dim).map(|_| 2 * rng.gen_range(1..=4)).collect()).unwrap();
    let m = rng.gen_range(1..=max_m);
    let coords: Vec<f64> = (0..m * dim).map(|_| rng.gen_range(1e-6..1.0)).collect();
    let nodes = NodeSet::new(&basis, coords).unwrap();
    let n = hypercube_set(&basis, &bands).unwrap().len();
    let coeffs: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    (basis, bands, nodes, coeffs)
}

fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn rel_linf(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = max_abs(b).max(1e-300);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
        / scale
}

/// Windowed fast path against the direct double loop, both directions.
fn transform_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let (basis, bands, nodes, coeffs) = random_instance(&mut rng, 3, 40);
        let fast = nfmt(&basis, &bands, &nodes, &coeffs, NfftParams::always_fast())?;
        let direct = nfmt_direct(&basis, &bands, &nodes, &coeffs)?;
        worst = worst.max(rel_linf(&fast, &direct));

        let values: Vec<Complex64> = (0..nodes.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let fast_t =
            nfmt_adjoint(&basis, &bands, &nodes, &values, NfftParams::always_fast())?;
        let direct_t = nfmt_adjoint_direct(&basis, &bands, &nodes, &values)?;
        worst = worst.max(rel_linf(&fast_t, &direct_t));
    }
    Ok(SuiteReport { name: "transform vs direct", max_error: worst, cap: 1e-8 })
}

/// ⟨Φc, y⟩ must equal ⟨c, Φᵀy⟩ (bilinear pairing; the transpose pair).
fn pairing_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let (basis, bands, nodes, coeffs) = random_instance(&mut rng, 3, 40);
        let values: Vec<Complex64> = (0..nodes.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let forward = nfmt(&basis, &bands, &nodes, &coeffs, NfftParams::default())?;
        let adjoint = nfmt_adjoint(&basis, &bands, &nodes, &values, NfftParams::default())?;
        let lhs: Complex64 = forward.iter().zip(&values).map(|(a, b)| a * b).sum();
        let rhs: Complex64 = coeffs.iter().zip(&adjoint).map(|(a, b)| a * b).sum();
        let scale = (max_abs(&coeffs) * max_abs(&values)).max(1e-300) * nodes.len() as f64;
        worst = worst.max((lhs - rhs).norm() / scale);
    }
    Ok(SuiteReport { name: "transpose pairing", max_error: worst, cap: 1e-9 })
}

/// Dense mixed matrix against its factorized form: every column equals the
/// exponential NDFT of the expanded unit coefficient vector at the
/// transformed nodes.
fn factorization_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (basis, bands, nodes, _) = random_instance(&mut rng, 3, 20);
        let set = hypercube_set(&basis, &bands)?;
        let dense = dense_mixed_matrix(&basis, &bands, &nodes)?;
        let torus = nodes.transformed(&basis)?;
        for (k, row) in set.iter().enumerate() {
            // sanity: the enumeration order matches the dense layout
            debug_assert_eq!(eval_basis(&basis, row, nodes.node(0))?, dense[k]);
            let mut unit = vec![Complex64::new(0.0, 0.0); set.len()];
            unit[k] = Complex64::new(1.0, 0.0);
            let expanded = expand_coefficients(&basis, &bands, &unit)?;
            let column = ndft(&bands, &torus, &expanded)?;
            for (i, v) in column.iter().enumerate() {
                worst = worst.max((v - dense[i * set.len() + k]).norm());
            }
        }
    }
    Ok(SuiteReport { name: "factorization", max_error: worst, cap: 1e-12 })
}

/// Runs the three suites and prints one line each; true iff all pass.
pub fn run(seed: u64) -> Result<bool> {
    println!("selftest seed = {seed}");
    let reports = [
        transform_suite(seed)?,
        pairing_suite(seed.wrapping_add(1))?,
        factorization_suite(seed.wrapping_add(2))?,
    ];
    let mut all = true;
    for r in &reports {
        let status = if r.passed() { "pass" } else { "FAIL" };
        println!(
            "selftest {:<22} max error {:9.3e}  (cap {:.0e})  {status}",
            r.name, r.max_error, r.cap
        );
        all &= r.passed();
    }
    Ok(all)
}
