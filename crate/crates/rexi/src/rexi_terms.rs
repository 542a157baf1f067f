//! Shifted-pole term tables for rational approximations of `e^{ix}`.
//!
//! Composing the Gaussian basis sum ([`gauss_kernel`]) with the rational
//! kernel approximation ([`rational_fit`]) collapses `e^{ix}` into a finite
//! sum over simple poles `alpha_n = h (mu + i n)`: every lattice-shifted
//! Gaussian contributes the same pole ladder, offset by its lattice index,
//! so the double sum telescopes into `2 (M + L) + 1` terms. Two arrangements
//! of that sum are provided:
//!
//! * [`Variant::Rexi`] keeps one complex weight pair per pole and rebuilds
//!   the real and imaginary parts of `e^{ix}` from the real parts of the
//!   resolvent values,
//!
//!   `e^{ix} ~ sum_n Re(beta_re_n / (ix + alpha_n))
//!             + i sum_n Re(beta_im_n / (ix + alpha_n))`.
//!
//! * [`Variant::Rexii`] pairs the poles `alpha_n`, `alpha_{-n}` into a
//!   second-order denominator,
//!
//!   `e^{ix} ~ sum_n (c1_n h mu + c2_n (x + h n))
//!             / ((alpha_{-n} - ix)(alpha_n + ix))`,
//!
//!   which for matrix arguments admits a half-range sum over `n >= 0` on
//!   real data (see the matrix evaluators).
//!
//! Weights obey exact conjugation symmetries across `n -> -n`; the builder
//! computes the non-negative half and mirrors it so those identities hold
//! bit-for-bit, and pairs the `n = 0` convolution so the mathematically
//! real (or imaginary) parts of the central weights come out exactly so.
//! The approximation is accurate for `|x| <= (M - 11) h` and degrades
//! smoothly outside that window.

use crate::gauss_kernel::{self, GaussianParams};
use crate::rational_fit::RationalGaussianCoeffs;
use crate::Result;
use num_complex::Complex64;

/// Which arrangement of the pole sum a table carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// One resolvent per pole, complex weights applied through real parts.
    Rexi,
    /// Conjugate pole pairs combined into real second-order denominators.
    Rexii,
}

#[derive(Clone, Debug)]
pub(crate) enum TermWeights {
    Rexi {
        beta_re: Vec<Complex64>,
        beta_im: Vec<Complex64>,
    },
    Rexii {
        c1: Vec<Complex64>,
        c2: Vec<Complex64>,
        big_c1: Vec<Complex64>,
        big_c2: Vec<Complex64>,
    },
}

/// Poles and weights of the rational approximation of `e^{ix}` for one
/// `(h, M)` pair, indexed by `n in [-n_max, n_max]` with `n_max = M + L`.
#[derive(Clone, Debug)]
pub struct RexiTermTable {
    h: f64,
    m: u32,
    mu: f64,
    n_max: i64,
    alpha: Vec<Complex64>,
    pub(crate) weights: TermWeights,
}

impl RexiTermTable {
    /// Gaussian lattice spacing `h`.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Gaussian lattice half-width `M`.
    pub fn m(&self) -> u32 {
        self.m
    }

    /// Pole abscissa `mu` of the underlying rational kernel.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Largest pole index; poles run over `n in [-n_max, n_max]`.
    pub fn n_max(&self) -> i64 {
        self.n_max
    }

    /// Total number of poles, `2 n_max + 1`.
    pub fn num_terms(&self) -> usize {
        self.alpha.len()
    }

    /// Which arrangement the weights encode.
    pub fn variant(&self) -> Variant {
        match self.weights {
            TermWeights::Rexi { .. } => Variant::Rexi,
            TermWeights::Rexii { .. } => Variant::Rexii,
        }
    }

    #[inline]
    pub(crate) fn idx(&self, n: i64) -> usize {
        assert!(
            n.abs() <= self.n_max,
            "pole index {n} outside [-{0}, {0}]",
            self.n_max
        );
        (n + self.n_max) as usize
    }

    /// Pole `alpha_n = h (mu + i n)`.
    ///
    /// # Panics
    /// If `|n| > n_max`.
    pub fn alpha(&self, n: i64) -> Complex64 {
        self.alpha[self.idx(n)]
    }

    /// Weight `beta_re_n` reconstructing `Re e^{ix}`.
    ///
    /// # Panics
    /// If `|n| > n_max` or the table is not the [`Variant::Rexi`] arrangement.
    pub fn beta_re(&self, n: i64) -> Complex64 {
        match &self.weights {
            TermWeights::Rexi { beta_re, .. } => beta_re[self.idx(n)],
            TermWeights::Rexii { .. } => panic!("beta_re requires a Rexi-variant table"),
        }
    }

    /// Weight `beta_im_n` reconstructing `Im e^{ix}`.
    ///
    /// # Panics
    /// If `|n| > n_max` or the table is not the [`Variant::Rexi`] arrangement.
    pub fn beta_im(&self, n: i64) -> Complex64 {
        match &self.weights {
            TermWeights::Rexi { beta_im, .. } => beta_im[self.idx(n)],
            TermWeights::Rexii { .. } => panic!("beta_im requires a Rexi-variant table"),
        }
    }

    /// Pair weight `c1_n` (convolution of `Re a` with the basis
    /// coefficients).
    ///
    /// # Panics
    /// If `|n| > n_max` or the table is not the [`Variant::Rexii`]
    /// arrangement.
    pub fn c1(&self, n: i64) -> Complex64 {
        match &self.weights {
            TermWeights::Rexii { c1, .. } => c1[self.idx(n)],
            TermWeights::Rexi { .. } => panic!("c1 requires a Rexii-variant table"),
        }
    }

    /// Pair weight `c2_n` (convolution of `Im a` with the basis
    /// coefficients).
    ///
    /// # Panics
    /// If `|n| > n_max` or the table is not the [`Variant::Rexii`]
    /// arrangement.
    pub fn c2(&self, n: i64) -> Complex64 {
        match &self.weights {
            TermWeights::Rexii { c2, .. } => c2[self.idx(n)],
            TermWeights::Rexi { .. } => panic!("c2 requires a Rexii-variant table"),
        }
    }

    /// Combined numerator weight `C1_n = c1_n h mu + c2_n h n`.
    ///
    /// # Panics
    /// If `|n| > n_max` or the table is not the [`Variant::Rexii`]
    /// arrangement.
    pub fn big_c1(&self, n: i64) -> Complex64 {
        match &self.weights {
            TermWeights::Rexii { big_c1, .. } => big_c1[self.idx(n)],
            TermWeights::Rexi { .. } => panic!("big_c1 requires a Rexii-variant table"),
        }
    }

    /// Combined numerator weight `C2_n = i c2_n`, so that
    /// `C1_n - i C2_n x = c1_n h mu + c2_n (x + h n)`.
    ///
    /// # Panics
    /// If `|n| > n_max` or the table is not the [`Variant::Rexii`]
    /// arrangement.
    pub fn big_c2(&self, n: i64) -> Complex64 {
        match &self.weights {
            TermWeights::Rexii { big_c2, .. } => big_c2[self.idx(n)],
            TermWeights::Rexi { .. } => panic!("big_c2 requires a Rexii-variant table"),
        }
    }

    /// Evaluate the pole sum at a real scalar argument, approximating
    /// `e^{ix}` whenever `|x| <= (M - 11) h`.
    ///
    /// Terms accumulate in ascending `n`. The `Rexii` denominator
    /// `(alpha_{-n} - ix)(alpha_n + ix)` is the squared modulus of
    /// `alpha_n + ix` because the factors are conjugates, so it is computed
    /// as a positive real.
    pub fn eval_scalar(&self, x: f64) -> Complex64 {
        let hmu = self.h * self.mu;
        match &self.weights {
            TermWeights::Rexi { beta_re, beta_im } => {
                let mut re = 0.0;
                let mut im = 0.0;
                for n in -self.n_max..=self.n_max {
                    let i = (n + self.n_max) as usize;
                    let d = Complex64::new(hmu, self.h * n as f64 + x).inv();
                    re += (beta_re[i] * d).re;
                    im += (beta_im[i] * d).re;
                }
                Complex64::new(re, im)
            }
            TermWeights::Rexii { c1, c2, .. } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in -self.n_max..=self.n_max {
                    let i = (n + self.n_max) as usize;
                    let hn = self.h * n as f64;
                    let den = Complex64::new(hmu, hn + x).norm_sqr();
                    acc += (c1[i] * hmu + c2[i] * (x + hn)) / den;
                }
                acc
            }
        }
    }
}

/// Build the pole/weight table for lattice `(h, M)` and rational kernel
/// coefficients `coeffs`, in the requested arrangement.
///
/// Weights are discrete convolutions of the kernel coefficients `a_k`
/// (`|k| <= L`, negative half by conjugation) with the basis coefficients
/// `b_m` (`|m| <= M`):
///
/// * `Rexi`: `beta_re_n = h sum_k a_k Re b_{n-k}`,
///   `beta_im_n = h sum_k a_k Im b_{n-k}`;
/// * `Rexii`: `c1_n = h sum_k (Re a_k) b_{n-k}`,
///   `c2_n = h sum_k (Im a_k) b_{n-k}`.
///
/// Only the `n >= 0` half is computed; the negative half is mirrored by the
/// exact symmetries `beta_re_{-n} = conj(beta_re_n)`,
/// `beta_im_{-n} = -conj(beta_im_n)`, `c1_{-n} = conj(c1_n)`,
/// `c2_{-n} = -conj(c2_n)`, `alpha_{-n} = conj(alpha_n)`.
pub fn build_terms(
    h: f64,
    m: u32,
    coeffs: &RationalGaussianCoeffs,
    variant: Variant,
) -> Result<RexiTermTable> {
    GaussianParams::new(h, m)?;
    let l = coeffs.l_max() as i64;
    let mm = m as i64;
    let n_max = mm + l;
    let len = (2 * n_max + 1) as usize;

    let mut btab = Vec::with_capacity((2 * mm + 1) as usize);
    for k in -mm..=mm {
        btab.push(gauss_kernel::b_coeff(h, k)?);
    }
    let b = |j: i64| btab[(j + mm) as usize];

    let hmu = h * coeffs.mu();
    let mut alpha = vec![Complex64::new(0.0, 0.0); len];
    for n in -n_max..=n_max {
        alpha[(n + n_max) as usize] = Complex64::new(hmu, h * n as f64);
    }

    let weights = match variant {
        Variant::Rexi => {
            let mut beta_re = vec![Complex64::new(0.0, 0.0); len];
            let mut beta_im = vec![Complex64::new(0.0, 0.0); len];

            // n = 0: sum conjugate pairs (k, -k) together so beta_re_0 comes
            // out exactly real and beta_im_0 exactly imaginary.
            let mut sre = coeffs.a_signed(0) * b(0).re;
            let mut sim = coeffs.a_signed(0) * b(0).im;
            for k in 1..=l.min(mm) {
                let ak = coeffs.a_signed(k);
                sre += (ak + ak.conj()) * b(k).re;
                sim += (ak.conj() - ak) * b(k).im;
            }
            beta_re[n_max as usize] = sre * h;
            beta_im[n_max as usize] = sim * h;

            for n in 1..=n_max {
                let lo = (-l).max(n - mm);
                let hi = l.min(n + mm);
                let mut sre = Complex64::new(0.0, 0.0);
                let mut sim = Complex64::new(0.0, 0.0);
                for k in lo..=hi {
                    let ak = coeffs.a_signed(k);
                    let bv = b(n - k);
                    sre += ak * bv.re;
                    sim += ak * bv.im;
                }
                let pos = (n + n_max) as usize;
                let neg = (-n + n_max) as usize;
                beta_re[pos] = sre * h;
                beta_im[pos] = sim * h;
                beta_re[neg] = beta_re[pos].conj();
                beta_im[neg] = -beta_im[pos].conj();
            }
            TermWeights::Rexi { beta_re, beta_im }
        }
        Variant::Rexii => {
            let mut c1 = vec![Complex64::new(0.0, 0.0); len];
            let mut c2 = vec![Complex64::new(0.0, 0.0); len];

            // n = 0 paired: b_{-k} + b_k is exactly real and b_{-k} - b_k
            // exactly imaginary, making c1_0 real and c2_0 imaginary.
            let mut s1 = b(0) * coeffs.a_signed(0).re;
            let mut s2 = b(0) * coeffs.a_signed(0).im;
            for k in 1..=l.min(mm) {
                let ak = coeffs.a_signed(k);
                s1 += (b(-k) + b(k)) * ak.re;
                s2 += (b(-k) - b(k)) * ak.im;
            }
            c1[n_max as usize] = s1 * h;
            c2[n_max as usize] = s2 * h;

            for n in 1..=n_max {
                let lo = (-l).max(n - mm);
                let hi = l.min(n + mm);
                let mut s1 = Complex64::new(0.0, 0.0);
                let mut s2 = Complex64::new(0.0, 0.0);
                for k in lo..=hi {
                    let ak = coeffs.a_signed(k);
                    let bv = b(n - k);
                    s1 += bv * ak.re;
                    s2 += bv * ak.im;
                }
                let pos = (n + n_max) as usize;
                let neg = (-n + n_max) as usize;
                c1[pos] = s1 * h;
                c2[pos] = s2 * h;
                c1[neg] = c1[pos].conj();
                c2[neg] = -c2[pos].conj();
            }

            let mut big_c1 = vec![Complex64::new(0.0, 0.0); len];
            let mut big_c2 = vec![Complex64::new(0.0, 0.0); len];
            for n in -n_max..=n_max {
                let i = (n + n_max) as usize;
                big_c1[i] = c1[i] * hmu + c2[i] * (h * n as f64);
                big_c2[i] = Complex64::new(0.0, 1.0) * c2[i];
            }
            TermWeights::Rexii {
                c1,
                c2,
                big_c1,
                big_c2,
            }
        }
    };

    Ok(RexiTermTable {
        h,
        m,
        mu: coeffs.mu(),
        n_max,
        alpha,
        weights,
    })
}

/// One `(h, M)` accuracy measurement of the scalar pole sum.
#[derive(Clone, Copy, Debug)]
pub struct StudyRow {
    pub h: f64,
    pub m: u32,
    /// `|eval(x) - e^{ix}|`.
    pub error: f64,
}

/// Sweep the scalar approximation error `|eval(x) - e^{ix}|` over the grid
/// `h_list x m_list` (outer loop over `h`, inner over `M`).
pub fn scalar_error_study(
    h_list: &[f64],
    m_list: &[u32],
    x: f64,
    coeffs: &RationalGaussianCoeffs,
    variant: Variant,
) -> Result<Vec<StudyRow>> {
    let mut rows = Vec::with_capacity(h_list.len() * m_list.len());
    for &h in h_list {
        for &m in m_list {
            let table = build_terms(h, m, coeffs, variant)?;
            let error = (table.eval_scalar(x) - Complex64::cis(x)).norm();
            rows.push(StudyRow { h, m, error });
        }
    }
    Ok(rows)
}
