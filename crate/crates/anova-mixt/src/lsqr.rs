//! Matrix-free complex least squares by the LSQR bidiagonalization method.
//!
//! Solves min_x ‖b − A·x‖₂ (optionally with Tikhonov damping λ, i.e. the
//! augmented system [A; λI]·x ≈ [b; 0]) given only callbacks for A and its
//! Hermitian adjoint A*. The Golub–Kahan scalars α, β stay real and
//! nonnegative for complex operators, so the rotation bookkeeping is the
//! classical real recurrence applied to complex Krylov vectors.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A linear map and its Hermitian adjoint, with explicit dimensions.
///
/// The adjoint must satisfy ⟨A·x, y⟩ = ⟨x, A*(y)⟩ in the sesquilinear inner
/// product ⟨a, b⟩ = Σ a·conj(b); the solver verifies this on entry with one
/// randomized probe and refuses operators that fail.
pub trait LinearOperator {
    /// Number of rows (values).
    fn rows(&self) -> usize;
    /// Number of columns (coefficients).
    fn cols(&self) -> usize;
    fn forward(&self, x: &[Complex64]) -> Result<Vec<Complex64>>;
    fn adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>>;
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Residual-based test passed: ‖r‖ ≤ btol·‖b‖ + atol·‖A‖·‖x‖.
    ResidualTolerance,
    /// Normal-equation test passed: ‖A*r‖ ≤ atol·‖A‖·‖r‖.
    GradientTolerance,
    /// Hit the iteration cap.
    IterationCap,
    /// Residual estimate stopped improving beyond rounding noise.
    Stagnation,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopReason::ResidualTolerance => "residual-tolerance",
            StopReason::GradientTolerance => "gradient-tolerance",
            StopReason::IterationCap => "iteration-cap",
            StopReason::Stagnation => "stagnation",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for StopReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "residual-tolerance" => Ok(StopReason::ResidualTolerance),
            "gradient-tolerance" => Ok(StopReason::GradientTolerance),
            "iteration-cap" => Ok(StopReason::IterationCap),
            "stagnation" => Ok(StopReason::Stagnation),
            other => Err(Error::Parse { line: 0, msg: format!("unknown stop reason `{other}`") }),
        }
    }
}

/// Iteration controls. Defaults: 50 iterations, atol = btol = 1e−8, no damping.
#[derive(Debug, Clone, Copy)]
pub struct LsqrOptions {
    pub max_iter: usize,
    pub atol: f64,
    pub btol: f64,
    pub damping: f64,
}

impl Default for LsqrOptions {
    fn default() -> Self {
        Self { max_iter: 50, atol: 1e-8, btol: 1e-8, damping: 0.0 }
    }
}

/// Solve outcome. `residual_norm` is ‖b − A·x‖₂ recomputed from the returned
/// solution, not the recurrence estimate; `residual_estimates` records the
/// (damped-system) estimate after every iteration.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Vec<Complex64>,
    pub iterations: usize,
    pub residual_norm: f64,
    pub stop: StopReason,
    pub residual_estimates: Vec<f64>,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn check_finite(v: &[Complex64], what: &'static str) -> Result<()> {
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

/// Deterministic low-discrepancy probe vector for the adjoint self-test.
fn probe(len: usize, phase_step: f64) -> Vec<Complex64> {
    (0..len)
        .map(|i| {
            let t = (i as f64 + 0.5) * phase_step;
            Complex64::new((2.4 * t).sin() + 0.31, (1.7 * t).cos() - 0.17)
        })
        .collect()
}

/// Verifies ⟨A·x, y⟩ = ⟨x, A*(y)⟩ on one deterministic probe pair.
pub fn verify_adjoint_pairing(op: &dyn LinearOperator) -> Result<()> {
    if op.rows() == 0 || op.cols() == 0 {
        return Ok(());
    }
    let x = probe(op.cols(), 0.61803398875);
    let y = probe(op.rows(), 0.41421356237);
    let ax = op.forward(&x)?;
    let aty = op.adjoint(&y)?;
    let lhs: Complex64 = ax.iter().zip(&y).map(|(a, b)| a * b.conj()).sum();
    let rhs: Complex64 = x.iter().zip(&aty).map(|(a, b)| a * b.conj()).sum();
    let scale = norm(&ax) * norm(&y) + norm(&x) * norm(&aty);
    let gap = (lhs - rhs).norm();
    if gap > 1e-8 * scale.max(1e-300) {
        return Err(Error::AdjointMismatch(gap / scale.max(1e-300)));
    }
    Ok(())
}

/// Runs LSQR. See [`LsqrOptions`] for the stopping rules; the operator's
/// forward/adjoint pairing is probed once before iterating.
pub fn lsqr(op: &dyn LinearOperator, rhs: &[Complex64], opts: LsqrOptions) -> Result<SolveReport> {
    if rhs.len() != op.rows() {
        return Err(Error::Shape(format!(
            "operator has {} rows but rhs has {} entries",
            op.rows(),
            rhs.len()
        )));
    }
    check_finite(rhs, "right-hand side")?;
    verify_adjoint_pairing(op)?;

    let n = op.cols();
    let zero = Complex64::new(0.0, 0.0);
    let mut x = vec![zero; n];
    let mut estimates = Vec::new();

    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        return Ok(SolveReport {
            solution: x,
            iterations: 0,
            residual_norm: 0.0,
            stop: StopReason::ResidualTolerance,
            residual_estimates: estimates,
        });
    }

    // β₁·u₁ = b; α₁·v₁ = A*·u₁
    let mut beta = bnorm;
    let mut u: Vec<Complex64> = rhs.iter().map(|z| z / beta).collect();
    let mut v = op.adjoint(&u)?;
    let mut alpha = norm(&v);
    if alpha == 0.0 {
        // b is orthogonal to the range: x = 0 is the least-squares solution
        return Ok(SolveReport {
            solution: x,
            iterations: 0,
            residual_norm: bnorm,
            stop: StopReason::GradientTolerance,
            residual_estimates: estimates,
        });
    }
    for z in v.iter_mut() {
        *z /= alpha;
    }
    let mut w = v.clone();

    let damp = opts.damping;
    let mut phibar = beta;
    let mut rhobar = alpha;
    let mut anorm_sq = alpha * alpha + damp * damp;
    let mut xnorm_est = 0.0f64;
    let mut arnorm = alpha * beta;
    let mut rnorm = beta;
    let mut stop = StopReason::IterationCap;
    let mut iterations = 0;
    let mut stagnant = 0usize;

    for iter in 1..=opts.max_iter {
        iterations = iter;

        // continue the bidiagonalization
        let av = op.forward(&v)?;
        for (ui, avi) in u.iter_mut().zip(&av) {
            *ui = avi - alpha * *ui;
        }
        beta = norm(&u);
        if beta > 0.0 {
            for z in u.iter_mut() {
                *z /= beta;
            }
            anorm_sq += alpha * alpha + beta * beta + damp * damp;
        }
        let atu = op.adjoint(&u)?;
        for (vi, atui) in v.iter_mut().zip(&atu) {
            *vi = atui - beta * *vi;
        }
        alpha = norm(&v);
        if alpha > 0.0 {
            for z in v.iter_mut() {
                *z /= alpha;
            }
        }

        // eliminate the damping entry, then the subdiagonal; rhobar and
        // phibar may carry a sign flip, which cancels in phi (the proof is
        // the usual sign-tracking argument), so norms below take |phibar|
        let rhobar1 = rhobar.hypot(damp);
        let cs1 = rhobar / rhobar1;
        let mut phibar1 = cs1 * phibar;

        let rho = rhobar1.hypot(beta);
        let cs = rhobar1 / rho;
        let sn = beta / rho;
        let theta = sn * alpha;
        rhobar = -cs * alpha;
        let phi = cs * phibar1;
        phibar1 *= sn;
        phibar = phibar1;

        let t1 = phi / rho;
        let t2 = -theta / rho;
        for i in 0..n {
            x[i] += t1 * w[i];
            w[i] = v[i] + t2 * w[i];
        }
        check_finite(&x, "solution iterate")?;

        // running estimates
        rnorm = phibar.abs();
        arnorm = (phibar * alpha * cs).abs();
        xnorm_est = norm(&x);
        estimates.push(rnorm);

        let anorm = anorm_sq.sqrt();
        if rnorm <= opts.btol * bnorm + opts.atol * anorm * xnorm_est {
            stop = StopReason::ResidualTolerance;
            break;
        }
        if arnorm <= opts.atol * anorm * rnorm.max(1e-300) {
            stop = StopReason::GradientTolerance;
            break;
        }
        if alpha == 0.0 || beta == 0.0 {
            // exact breakdown: the Krylov space is exhausted
            stop = StopReason::GradientTolerance;
            break;
        }
        // relative progress below rounding noise for a few iterations
        if let Some(prev) = estimates.len().checked_sub(2).map(|i| estimates[i]) {
            if prev - rnorm <= 1e-14 * prev {
                stagnant += 1;
                if stagnant >= 3 {
                    stop = StopReason::Stagnation;
                    break;
                }
            } else {
                stagnant = 0;
            }
        }
    }

    let _ = (rnorm, arnorm, xnorm_est);
    let fitted = op.forward(&x)?;
    let residual_norm = rhs
        .iter()
        .zip(&fitted)
        .map(|(b, f)| (b - f).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(SolveReport { solution: x, iterations, residual_norm, stop, residual_estimates: estimates })
}

/// Dense row-major matrix as a [`LinearOperator`]; the workhorse for tests
/// and small problems.
pub struct DenseOperator {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl DenseOperator {
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }
}

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn forward(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(Error::Shape("forward input length".into()));
        }
        Ok((0..self.rows)
            .map(|i| {
                let row = &self.entries[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect())
    }

    fn adjoint(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        if y.len() != self.rows {
            return Err(Error::Shape("adjoint input length".into()));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for i in 0..self.rows {
            let row = &self.entries[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a.conj() * y[i];
            }
        }
        Ok(out)
    }
}
