//! Dense complex linear algebra used throughout the estimators.
//!
//! Everything is built on `nalgebra` dynamic matrices of `Complex64`. The helpers
//! here cover what the protocol needs: DFT blocks, SVD based pseudo-inverses with
//! a scale-invariant rank threshold, Hermitian square roots and a linear MMSE
//! gain in its "push-through" form.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// `rows x cols` block of the `size`-point DFT matrix, entry `(r, c) = exp(-j 2 pi r c / size)`.
pub fn dft_block(rows: usize, cols: usize, size: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |r, c| unit_phase(-2.0 * PI * ((r * c) % size) as f64 / size as f64))
}

pub fn unit_phase(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// Draws one CN(0, `var`) sample.
pub fn sample_cscg<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * (var / 2.0).sqrt()
}

pub fn sample_unit_phase<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    unit_phase(rng.random::<f64>() * 2.0 * PI)
}

/// Singular-value threshold: `max(rows, cols) * eps * sigma_max`.
pub fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

pub fn numerical_rank(a: &CMatrix) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    let tol = rank_tolerance(a.nrows(), a.ncols(), smax);
    sv.iter().filter(|&&s| s > tol).count()
}

/// Moore-Penrose pseudo-inverse via SVD with the standard rank threshold.
pub fn pinv(a: &CMatrix) -> CMatrix {
    if a.is_empty() {
        return CMatrix::zeros(a.ncols(), a.nrows());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = rank_tolerance(a.nrows(), a.ncols(), smax);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut out = CMatrix::zeros(a.ncols(), a.nrows());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > tol && s > 0.0 {
            let vi = vt.row(i).adjoint();
            let ui = u.column(i).adjoint();
            out += (vi * ui) * C64::from(1.0 / s);
        }
    }
    out
}

/// Principal square root of a Hermitian positive semidefinite matrix.
/// Tiny negative eigenvalues from rounding are clamped to zero.
pub fn hermitian_sqrt(c: &CMatrix) -> CMatrix {
    let eig = c.clone().symmetric_eigen();
    let d = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::from(l.max(0.0).sqrt())));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

pub fn hermitian_asymmetry(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Checks `m` is Hermitian to `herm_tol` (absolute, relative to the largest entry) and
/// PSD with minimum eigenvalue at least `-psd_rel_tol * max eigenvalue`.
pub fn is_hermitian_psd(m: &CMatrix, herm_tol: f64, psd_rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    if m.is_empty() {
        return true;
    }
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if hermitian_asymmetry(m) > herm_tol * scale.max(f64::MIN_POSITIVE) {
        return false;
    }
    let herm = (m + m.adjoint()) * C64::from(0.5);
    let ev = herm.symmetric_eigenvalues();
    let max = ev.max();
    let min = ev.min();
    min >= -psd_rel_tol * max.abs().max(0.0)
}

/// Linear MMSE gain for `y = A s + n`, `s ~ (0, prior)`, `n ~ (0, noise_var I)`.
///
/// Uses `W = (R A^H A + s2 I)^{-1} R A^H`, which equals `R A^H (A R A^H + s2 I)^{-1}` but
/// stays well conditioned when `A` has more rows than `s` has entries.
/// Returns `W` and the error covariance `R - W A R`.
pub fn lmmse_gain(a: &CMatrix, prior: &CMatrix, noise_var: f64) -> Result<(CMatrix, CMatrix)> {
    if noise_var <= 0.0 || !noise_var.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "LMMSE needs a positive finite noise variance, got {noise_var}"
        )));
    }
    let n = prior.nrows();
    let ra_h = prior * a.adjoint();
    let lhs = &ra_h * a + CMatrix::identity(n, n) * C64::from(noise_var);
    let w = lhs
        .lu()
        .solve(&ra_h)
        .ok_or_else(|| Error::Numerical("singular LMMSE system".into()))?;
    let err = prior - &w * a * prior;
    Ok((w, err))
}

/// LMMSE estimate `(R A^H A + s2 I)^{-1} R A^H y` for a single observation, without
/// forming the gain matrix.
pub fn lmmse_apply(a: &CMatrix, prior: &CMatrix, noise_var: f64, y: &CVector) -> Result<CVector> {
    if noise_var <= 0.0 || !noise_var.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "LMMSE needs a positive finite noise variance, got {noise_var}"
        )));
    }
    let n = prior.nrows();
    let a_h = a.adjoint();
    let lhs = prior * (&a_h * a) + CMatrix::identity(n, n) * C64::from(noise_var);
    lhs.lu()
        .solve(&(prior * (a_h * y)))
        .ok_or_else(|| Error::Numerical("singular LMMSE system".into()))
}

pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

pub fn sq_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
