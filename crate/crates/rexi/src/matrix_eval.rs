//! Matrix-argument evaluation of the pole sums against an abstract
//! shifted-solve capability.
//!
//! Replacing `ix` by a matrix `tau A` turns each pole term into one or two
//! shifted linear solves; everything an evaluator needs from the operator is
//! the map `(alpha, sign, rhs) -> (alpha I + sign tau A)^{-1} rhs`, captured
//! by the [`ShiftedSolve`] trait. The operator arrives pre-multiplied by the
//! time step: oracles are constructed from `tau A` once and the evaluators
//! never rescale.
//!
//! Three evaluators mirror the three scalar arrangements:
//!
//! * [`apply_rexii`] — conjugate pole pairs, two nested solves per term;
//!   on real operators and data the `half_sum` path keeps only `n >= 0`
//!   with weights 1, 2, 2, ... and takes the real part, halving the solve
//!   count.
//! * [`apply_rexi`] — one solve per term, real part of the `beta_re`
//!   combination only; cheap but limited accuracy.
//! * [`apply_rexie`] — one solve per term, both `beta_re` and `beta_im`
//!   combinations, reconstructing a complex result for operators of the
//!   form `A = iB` with `B` real.
//!
//! The module also provides the periodic test operators (advection and free
//! Schrodinger), the spectrum centering shift, a dual-route dense reference
//! for `e^A f0`, and the diagonalization error bound
//! `cond(V) * max_j |scalar defect at eigenvalue j|`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::rexi_terms::{RexiTermTable, Variant};
use crate::{Error, Result};

/// Whether a shifted solve uses `alpha I + tau A` or `alpha I - tau A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftSign {
    Plus,
    Minus,
}

impl ShiftSign {
    /// `+1.0` or `-1.0`.
    pub fn factor(self) -> f64 {
        match self {
            ShiftSign::Plus => 1.0,
            ShiftSign::Minus => -1.0,
        }
    }
}

/// Capability to solve `(alpha I + sign tau A) g = rhs` for a fixed `tau A`.
///
/// Implementations must satisfy the residual contract
/// `|(alpha I + sign tau A) solve(..) - rhs| <= 1e-12 |rhs|` for every shift
/// in a term table, and be linear in `rhs` to roundoff. `Sync` is required
/// so evaluators may issue independent term solves concurrently.
pub trait ShiftedSolve: Sync {
    /// Number of unknowns of the underlying operator.
    fn dimension(&self) -> usize;

    /// Solve `(alpha I + sign tau A) g = rhs`.
    fn solve(&self, alpha: Complex64, sign: ShiftSign, rhs: &[Complex64]) -> Result<Vec<Complex64>>;
}

/// Analytic spectrum bounds of a test operator: eigenvalues lie in
/// `i [zeta1, zeta2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumInfo {
    pub zeta1: f64,
    pub zeta2: f64,
    /// Spectral radius without centering, `max(|zeta1|, |zeta2|)`.
    pub rho: f64,
}

/// Centering shift for a spectrum in `i [zeta1, zeta2]`: returns
/// `(nu, rho_shifted)` with `nu = i (zeta1 + zeta2) / 2` and
/// `rho_shifted = (zeta2 - zeta1) / 2`.
///
/// The caller recovers `e^{tau A} = e^{tau nu} e^{tau (A - nu I)}`; shifting
/// halves the required truncation order for one-sided spectra.
pub fn center_shift(zeta1: f64, zeta2: f64) -> Result<(Complex64, f64)> {
    if !(zeta1 <= zeta2) {
        return Err(Error::InvalidParameter(format!(
            "center_shift requires zeta1 <= zeta2, got [{zeta1}, {zeta2}]"
        )));
    }
    Ok((
        Complex64::new(0.0, 0.5 * (zeta1 + zeta2)),
        0.5 * (zeta2 - zeta1),
    ))
}

fn check_dimension(oracle_dim: usize, got: usize) -> Result<()> {
    if oracle_dim != got {
        return Err(Error::DimensionMismatch {
            expected: oracle_dim,
            got,
        });
    }
    Ok(())
}

fn require_variant(table: &RexiTermTable, want: Variant, what: &str) -> Result<()> {
    if table.variant() != want {
        return Err(Error::InvalidParameter(format!(
            "{what} requires a {want:?}-variant term table"
        )));
    }
    Ok(())
}

/// One conjugate-pair term of the paired evaluator:
/// `C2_n ((C1_n / C2_n - alpha_{-n}) g2 + g1)` with
/// `g1 = (alpha_n I + tau A)^{-1} f0`, `g2 = (alpha_{-n} I - tau A)^{-1} g1`.
///
/// When `|c2_n|` underflows the quotient form is re-expanded to
/// `(C1_n - C2_n alpha_{-n}) g2 + C2_n g1`, which is the same expression
/// with `C2_n` distributed.
fn rexii_term<O: ShiftedSolve + ?Sized>(
    table: &RexiTermTable,
    oracle: &O,
    f0: &[Complex64],
    n: i64,
) -> Result<Vec<Complex64>> {
    let alpha_neg = table.alpha(-n);
    let g1 = oracle.solve(table.alpha(n), ShiftSign::Plus, f0)?;
    let g2 = oracle.solve(alpha_neg, ShiftSign::Minus, &g1)?;
    let big_c1 = table.big_c1(n);
    let big_c2 = table.big_c2(n);
    let term = if table.c2(n).norm() < 1e-300 {
        let w = big_c1 - big_c2 * alpha_neg;
        g2.iter()
            .zip(&g1)
            .map(|(x2, x1)| w * x2 + big_c2 * x1)
            .collect()
    } else {
        let q = big_c1 / big_c2 - alpha_neg;
        g2.iter()
            .zip(&g1)
            .map(|(x2, x1)| big_c2 * (q * x2 + x1))
            .collect()
    };
    Ok(term)
}

/// Paired-pole approximation of `e^{tau A} f0`.
///
/// The full form sums `n = -N..N` (two solves per term). With `half_sum`
/// only `n = 0..N` is evaluated with weights 1, 2, 2, ... and the real part
/// of the accumulation is returned; this is exact (to roundoff) when the
/// operator and `f0` are real, because the `-n` term is then the conjugate
/// of the `+n` term. `half_sum` rejects `f0` with nonzero imaginary parts;
/// the realness of the operator is the caller's contract.
pub fn apply_rexii<O: ShiftedSolve + ?Sized>(
    table: &RexiTermTable,
    oracle: &O,
    f0: &[Complex64],
    half_sum: bool,
) -> Result<Vec<Complex64>> {
    require_variant(table, Variant::Rexii, "apply_rexii")?;
    let d = oracle.dimension();
    check_dimension(d, f0.len())?;
    if half_sum && f0.iter().any(|z| z.im != 0.0) {
        return Err(Error::InvalidParameter(
            "half_sum requires a real initial vector".to_string(),
        ));
    }

    let mut acc = vec![Complex64::new(0.0, 0.0); d];
    if half_sum {
        for n in 0..=table.n_max() {
            let term = rexii_term(table, oracle, f0, n)?;
            let gamma = if n == 0 { 1.0 } else { 2.0 };
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t * gamma;
            }
        }
        Ok(acc
            .into_iter()
            .map(|z| Complex64::new(z.re, 0.0))
            .collect())
    } else {
        for n in -table.n_max()..=table.n_max() {
            let term = rexii_term(table, oracle, f0, n)?;
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
        }
        Ok(acc)
    }
}

/// Single-solve approximation of `e^{tau A} f0` for real operators and data,
/// keeping only the real reconstruction: `sum_n Re(beta_re_n g_n)` with
/// `g_n = (alpha_n I + tau A)^{-1} f0`.
///
/// Cheap (one solve per term) but the neglected imaginary-part defect makes
/// it orders of magnitude less accurate than [`apply_rexii`] at the same
/// truncation order.
pub fn apply_rexi<O: ShiftedSolve + ?Sized>(
    table: &RexiTermTable,
    oracle: &O,
    f0: &[f64],
) -> Result<Vec<f64>> {
    require_variant(table, Variant::Rexi, "apply_rexi")?;
    let d = oracle.dimension();
    check_dimension(d, f0.len())?;
    let fc: Vec<Complex64> = f0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut acc = vec![0.0; d];
    for n in -table.n_max()..=table.n_max() {
        let g = oracle.solve(table.alpha(n), ShiftSign::Plus, &fc)?;
        let b = table.beta_re(n);
        for (a, gj) in acc.iter_mut().zip(&g) {
            *a += (b * gj).re;
        }
    }
    Ok(acc)
}

/// Single-solve approximation of `e^{tau A} f0` for operators `A = iB` with
/// `B` real and real `f0`: rebuilds the complex result as
/// `sum_n Re(beta_re_n g_n) + i sum_n Re(beta_im_n g_n)` with one solve per
/// term.
pub fn apply_rexie<O: ShiftedSolve + ?Sized>(
    table: &RexiTermTable,
    oracle: &O,
    f0: &[f64],
) -> Result<Vec<Complex64>> {
    require_variant(table, Variant::Rexi, "apply_rexie")?;
    let d = oracle.dimension();
    check_dimension(d, f0.len())?;
    let fc: Vec<Complex64> = f0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut acc = vec![Complex64::new(0.0, 0.0); d];
    for n in -table.n_max()..=table.n_max() {
        let g = oracle.solve(table.alpha(n), ShiftSign::Plus, &fc)?;
        let bre = table.beta_re(n);
        let bim = table.beta_im(n);
        for (a, gj) in acc.iter_mut().zip(&g) {
            *a += Complex64::new((bre * gj).re, (bim * gj).re);
        }
    }
    Ok(acc)
}

/// Periodic test operators with known spectra.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestOperator {
    /// Centered first difference of `-c f_x` form on `[0, 1]`,
    /// `(f_{j+1} - f_{j-1}) / (2 dx)` with `dx = 1/n`; real skew-symmetric,
    /// eigenvalues `i n sin(2 pi j / n)` in `i [-n, n]`.
    Advection,
    /// Free-particle dispersion `i (f_{j+1} - 2 f_j + f_{j-1}) / dx^2` on
    /// `[-1, 1]` with `dx = 2/n`; eigenvalues `-i (2/dx^2)(1 - cos)` in
    /// `i [-4/dx^2, 0]`.
    Schrodinger,
}

/// Build a dense periodic test operator and its analytic spectrum bounds.
pub fn build_test_operator(
    kind: TestOperator,
    n: usize,
) -> Result<(DMatrix<Complex64>, SpectrumInfo)> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "periodic stencils need at least 3 points, got {n}"
        )));
    }
    let mut a = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let info = match kind {
        TestOperator::Advection => {
            let c = n as f64 / 2.0; // 1 / (2 dx), dx = 1/n
            for j in 0..n {
                a[(j, (j + 1) % n)] = Complex64::new(c, 0.0);
                a[(j, (j + n - 1) % n)] = Complex64::new(-c, 0.0);
            }
            SpectrumInfo {
                zeta1: -(n as f64),
                zeta2: n as f64,
                rho: n as f64,
            }
        }
        TestOperator::Schrodinger => {
            // 1 / dx^2 with dx = 2/n, computed as (n/2)^2 so the weight is
            // exact for even n.
            let half = n as f64 / 2.0;
            let w = half * half;
            for j in 0..n {
                a[(j, j)] = Complex64::new(0.0, -2.0 * w);
                a[(j, (j + 1) % n)] = Complex64::new(0.0, w);
                a[(j, (j + n - 1) % n)] = Complex64::new(0.0, w);
            }
            SpectrumInfo {
                zeta1: -4.0 * w,
                zeta2: 0.0,
                rho: 4.0 * w,
            }
        }
    };
    Ok((a, info))
}

fn inf_norm(a: &DMatrix<Complex64>) -> f64 {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn is_skew_hermitian(a: &DMatrix<Complex64>) -> bool {
    let scale = a.norm().max(1.0);
    (a + a.adjoint()).norm() <= 1e-12 * scale
}

/// `e^A f` through eigendecomposition of the Hermitian matrix `-iA`.
fn expm_eigen_vec(a: &DMatrix<Complex64>, f: &DVector<Complex64>) -> DVector<Complex64> {
    let h = a.map(|z| z * Complex64::new(0.0, -1.0));
    let se = h.symmetric_eigen();
    let mut y = se.eigenvectors.adjoint() * f;
    for (j, lambda) in se.eigenvalues.iter().enumerate() {
        y[j] *= Complex64::cis(*lambda);
    }
    &se.eigenvectors * y
}

/// `e^A f` through scaling-and-squaring with a Taylor core; `extra` adds
/// scaling steps so two calls follow genuinely different arithmetic paths.
fn expm_squaring_vec(
    a: &DMatrix<Complex64>,
    f: &DVector<Complex64>,
    extra: u32,
) -> DVector<Complex64> {
    let d = a.nrows();
    let norm = inf_norm(a);
    let s = if norm <= 0.5 {
        extra
    } else {
        (norm / 0.5).log2().ceil() as u32 + extra
    };
    let b = a * Complex64::new(0.5_f64.powi(s as i32), 0.0);
    let mut t = DMatrix::identity(d, d);
    let mut term: DMatrix<Complex64> = DMatrix::identity(d, d);
    for k in 1..=90u32 {
        term = &term * &b * Complex64::new(1.0 / k as f64, 0.0);
        t += &term;
        if inf_norm(&term) <= 1e-20 * inf_norm(&t) {
            break;
        }
    }
    for _ in 0..s {
        t = &t * &t;
    }
    &t * f
}

/// Reference `e^A f0` for desk-scale dense matrices, cross-validated by two
/// independent routes.
///
/// Skew-Hermitian input (every operator in this crate) goes through an exact
/// eigendecomposition of `-iA`; other matrices through scaling-and-squaring.
/// Either way a second scaling-and-squaring evaluation must agree to 1e-10
/// relative or the call fails with [`Error::ReferenceDisagreement`].
pub fn reference_expm_vec(a: &DMatrix<Complex64>, f0: &[Complex64]) -> Result<Vec<Complex64>> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::InvalidParameter(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if d > 1000 {
        return Err(Error::InvalidParameter(format!(
            "dense reference is desk-scale only (dimension {d} > 1000)"
        )));
    }
    check_dimension(d, f0.len())?;
    let f = DVector::from_column_slice(f0);
    let check = expm_squaring_vec(a, &f, 0);
    let primary = if is_skew_hermitian(a) {
        expm_eigen_vec(a, &f)
    } else {
        expm_squaring_vec(a, &f, 3)
    };
    let relative = (&primary - &check).norm() / check.norm().max(f64::MIN_POSITIVE);
    if relative > 1e-10 {
        return Err(Error::ReferenceDisagreement { relative });
    }
    Ok(primary.iter().copied().collect())
}

/// Diagonalization error bound: `cond_inf(V) * max(scalar_errors)`.
///
/// If `A = V D V^{-1}` and the scalar sum misses `e^{i tau lambda_j}` by at
/// most `scalar_errors[j]`, the matrix application misses `e^{tau A}` by at
/// most this value in the infinity norm.
pub fn diagonalization_bound(v: &DMatrix<Complex64>, scalar_errors: &[f64]) -> Result<f64> {
    if v.nrows() != v.ncols() {
        return Err(Error::InvalidParameter(format!(
            "expected a square matrix, got {}x{}",
            v.nrows(),
            v.ncols()
        )));
    }
    let inv = v
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("transformation matrix is not invertible".to_string()))?;
    let cond = inf_norm(v) * inf_norm(&inv);
    Ok(cond * scalar_errors.iter().copied().fold(0.0, f64::max))
}

/// Direct dense oracle: factors `alpha I + sign tau A` by LU at every call.
#[derive(Clone, Debug)]
pub struct DenseLuOracle {
    tau_a: DMatrix<Complex64>,
}

impl DenseLuOracle {
    /// `tau_a` is the operator already multiplied by the time step.
    pub fn new(tau_a: DMatrix<Complex64>) -> Result<Self> {
        if tau_a.nrows() != tau_a.ncols() {
            return Err(Error::InvalidParameter(format!(
                "expected a square matrix, got {}x{}",
                tau_a.nrows(),
                tau_a.ncols()
            )));
        }
        Ok(Self { tau_a })
    }
}

impl ShiftedSolve for DenseLuOracle {
    fn dimension(&self) -> usize {
        self.tau_a.nrows()
    }

    fn solve(&self, alpha: Complex64, sign: ShiftSign, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let d = self.dimension();
        check_dimension(d, rhs.len())?;
        let mut m = &self.tau_a * Complex64::new(sign.factor(), 0.0);
        for j in 0..d {
            m[(j, j)] += alpha;
        }
        let b = DVector::from_column_slice(rhs);
        m.lu()
            .solve(&b)
            .map(|x| x.iter().copied().collect())
            .ok_or_else(|| Error::Singular(format!("shifted system singular at alpha = {alpha}")))
    }
}

/// Spectral oracle for circulant `tau A`: diagonalizes by FFT, so each solve
/// is two transforms and a pointwise division by `alpha + sign * symbol`.
pub struct CirculantOracle {
    symbol: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl CirculantOracle {
    /// Build from the first column of `tau A` (the circulant generator).
    pub fn new(first_col: &[Complex64]) -> Result<Self> {
        if first_col.is_empty() {
            return Err(Error::InvalidParameter(
                "circulant generator must be nonempty".to_string(),
            ));
        }
        let n = first_col.len();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut symbol = first_col.to_vec();
        fwd.process(&mut symbol);
        Ok(Self { symbol, fwd, inv })
    }

    /// Build from a dense matrix, verifying `A[i][j] = col[(i - j) mod n]`.
    pub fn from_dense(tau_a: &DMatrix<Complex64>) -> Result<Self> {
        let n = tau_a.nrows();
        if tau_a.ncols() != n || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "expected a square nonempty matrix, got {}x{}",
                tau_a.nrows(),
                tau_a.ncols()
            )));
        }
        let col: Vec<Complex64> = (0..n).map(|i| tau_a[(i, 0)]).collect();
        for i in 0..n {
            for j in 0..n {
                if tau_a[(i, j)] != col[(i + n - j) % n] {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is not circulant at entry ({i}, {j})"
                    )));
                }
            }
        }
        Self::new(&col)
    }
}

impl ShiftedSolve for CirculantOracle {
    fn dimension(&self) -> usize {
        self.symbol.len()
    }

    fn solve(&self, alpha: Complex64, sign: ShiftSign, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.dimension();
        check_dimension(n, rhs.len())?;
        let mut buf = rhs.to_vec();
        self.fwd.process(&mut buf);
        let s = sign.factor();
        for (v, c) in buf.iter_mut().zip(&self.symbol) {
            let den = alpha + c * s;
            if den.norm() < 1e-300 {
                return Err(Error::Singular(format!(
                    "circulant mode hits the shift at alpha = {alpha}"
                )));
            }
            *v /= den;
        }
        self.inv.process(&mut buf);
        let scale = 1.0 / n as f64;
        for v in &mut buf {
            *v *= scale;
        }
        Ok(buf)
    }
}

/// Wrapper counting how many solves an evaluator issues.
pub struct CountingOracle<O> {
    inner: O,
    count: AtomicUsize,
}

impl<O: ShiftedSolve> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            count: AtomicUsize::new(0),
        }
    }

    /// Number of solves issued so far.
    pub fn solve_count(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }
}

impl<O: ShiftedSolve> ShiftedSolve for CountingOracle<O> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn solve(&self, alpha: Complex64, sign: ShiftSign, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.solve(alpha, sign, rhs)
    }
}
