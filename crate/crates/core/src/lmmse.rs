//! LMMSE estimation under BS noise.
//!
//! Phase I estimates `alpha_bar_m` per antenna with a shared prior covariance; the
//! ratios give `beta_hat`. Phase II treats `beta_hat` and `alpha_hat_0` as exact and
//! estimates the stacked typical-antenna channels from `delta = Theta_hat v + [z; 0]`.

use crate::channel_model::{CorrelationSpec, SystemDims};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::protocol::{ObservationSet, TrainingSchedule};
use crate::recovery::{self, AlphaMatrix, ThetaSystem};

/// Relative ridge applied to the Phase II inner matrix when none is given.
pub const DEFAULT_RIDGE_SCALE: f64 = 1e-10;

const HERMITIAN_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// Prior second moments implied by a [`CorrelationSpec`] and the Phase I pilot.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    /// Covariance of `alpha_bar_m`, `N x N`, the same for every antenna.
    pub r_alpha: CMatrix,
    /// Covariance of the stacked typical-antenna channels, `KN x KN`.
    pub r_v: CMatrix,
    /// Diagonals of the `K x K` user blocks, indexed `c * N + l`.
    pub r_t: Vec<CVector>,
    /// `E[r_{c,m} conj(r_{l,m})]`, `N x N`.
    pub r_irs_bs: CMatrix,
}

impl CovarianceModel {
    pub fn r_t_block(&self, c: usize, l: usize) -> CMatrix {
        let n = self.r_irs_bs.nrows();
        CMatrix::from_diagonal(&self.r_t[c * n + l])
    }
}

pub fn build_covariances(spec: &CorrelationSpec, x: &CVector, pilot_power: f64) -> Result<CovarianceModel> {
    let n = spec.irs_tx_corr_sqrt.nrows();
    let k = spec.user_irs_gains.len();
    let dims = SystemDims::new(1, n, k)?;
    spec.validate(dims)?;
    if x.len() != k {
        return Err(Error::InvalidParameter(format!("pilot has {} entries, expected {k}", x.len())));
    }
    let r_irs_bs = spec.irs_bs_covariance();
    let user_cov: Vec<CMatrix> = (0..k).map(|u| spec.user_irs_covariance(u)).collect();
    let r_t: Vec<CVector> = (0..n * n)
        .map(|idx| CVector::from_fn(k, |u, _| user_cov[u][(idx / n, idx % n)]))
        .collect();
    let r_alpha = CMatrix::from_fn(n, n, |c, l| {
        let quad: C64 = (0..k).map(|u| x[u] * r_t[c * n + l][u] * x[u].conj()).sum();
        r_irs_bs[(c, l)] * quad * pilot_power
    });
    let mut r_v = CMatrix::zeros(k * n, k * n);
    for c in 0..n {
        for l in 0..n {
            for u in 0..k {
                r_v[(c * k + u, l * k + u)] = r_irs_bs[(c, l)] * r_t[c * n + l][u];
            }
        }
    }
    for (name, m) in [("R_alpha", &r_alpha), ("R_v", &r_v)] {
        if !linalg::is_hermitian_psd(m, HERMITIAN_TOL, PSD_TOL) {
            return Err(Error::ModelInconsistency(format!("{name} is not Hermitian PSD")));
        }
    }
    Ok(CovarianceModel {
        r_alpha,
        r_v,
        r_t,
        r_irs_bs,
    })
}

/// Phase I LMMSE filter `R Phi^H (Phi R Phi^H + s2 I)^{-1}`, precomputed for one schedule.
#[derive(Debug, Clone)]
pub struct Phase1Lmmse {
    gain: CMatrix,
    error_cov: CMatrix,
}

impl Phase1Lmmse {
    pub fn new(sched: &TrainingSchedule, cov: &CovarianceModel, noise_var: f64) -> Result<Self> {
        let phi = sched.phase1_reflections();
        let (gain, error_cov) = linalg::lmmse_gain(&phi, &cov.r_alpha, noise_var)?;
        Ok(Self { gain, error_cov })
    }

    pub fn estimate(&self, y1: &CMatrix) -> Result<AlphaMatrix> {
        if y1.nrows() != self.gain.ncols() {
            return Err(Error::InvalidParameter(format!(
                "phase I observations have {} rows, filter expects {}",
                y1.nrows(),
                self.gain.ncols()
            )));
        }
        Ok(AlphaMatrix {
            alpha_bar: &self.gain * y1,
        })
    }

    /// Analytic per-antenna MSE `tr(R - W Phi R)`.
    pub fn error_cov_trace(&self) -> f64 {
        linalg::trace_re(&self.error_cov)
    }

    pub fn error_cov(&self) -> &CMatrix {
        &self.error_cov
    }
}

pub fn lmmse_alpha(
    y1: &CMatrix,
    sched: &TrainingSchedule,
    cov: &CovarianceModel,
    noise_var: f64,
) -> Result<(AlphaMatrix, f64)> {
    let f = Phase1Lmmse::new(sched, cov, noise_var)?;
    Ok((f.estimate(y1)?, f.error_cov_trace()))
}

/// `1e-10 * tr(Theta R_v Theta^H) / rows`.
pub fn default_ridge(theta: &CMatrix, r_v: &CMatrix) -> f64 {
    let tr: f64 = (theta * r_v)
        .iter()
        .zip(theta.iter())
        .map(|(a, b)| (a * b.conj()).re)
        .sum();
    DEFAULT_RIDGE_SCALE * tr / theta.nrows().max(1) as f64
}

fn check_phase2_inputs(delta: &CVector, theta: &CMatrix, r_v: &CMatrix, tau2: usize, dims: SystemDims) -> Result<()> {
    let rows = tau2 * dims.m + dims.n;
    if theta.shape() != (rows, dims.k * dims.n) || delta.len() != rows || r_v.nrows() != dims.k * dims.n {
        return Err(Error::InvalidParameter(format!(
            "phase II system has shape {:?} / {} rows, expected ({rows}, {})",
            theta.shape(),
            delta.len(),
            dims.k * dims.n
        )));
    }
    if !linalg::all_finite(theta) || delta.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite phase II inputs".into()));
    }
    Ok(())
}

/// Phase II LMMSE estimate of the typical-antenna channels,
/// `R_v Theta^H (Theta R_v Theta^H + R_z + eps I)^{-1} delta` with
/// `R_z = diag(s2 I, 0_N)`.
///
/// Evaluated by conditioning first on the (nearly) noiseless bottom `N` rows and then on
/// the Phase II rows, each step in a form whose inner matrix stays small and well
/// conditioned. `ridge_eps = None` selects [`default_ridge`].
pub fn lmmse_v(
    delta: &CVector,
    theta: &CMatrix,
    cov: &CovarianceModel,
    noise_var: f64,
    tau2: usize,
    dims: SystemDims,
    ridge_eps: Option<f64>,
) -> Result<Vec<CVector>> {
    check_phase2_inputs(delta, theta, &cov.r_v, tau2, dims)?;
    if noise_var < 0.0 {
        return Err(Error::InvalidParameter(format!("noise variance {noise_var}")));
    }
    let r = &cov.r_v;
    let eps = ridge_eps.unwrap_or_else(|| default_ridge(theta, r));
    let top = tau2 * dims.m;
    let n = dims.n;
    let kn = dims.k * n;

    let a = theta.rows(top, n);
    let b = delta.rows(top, n);
    let ra_h = r * a.adjoint();
    let s = a * &ra_h + CMatrix::identity(n, n) * C64::from(eps);
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::Numerical("typical-antenna side information is singular; use a positive ridge".into()))?;
    let gain = &ra_h * s_inv;
    let mean = &gain * b;
    if top == 0 {
        return Ok(recovery::split_stacked(&mean, dims.k));
    }
    let post = r - &gain * ra_h.adjoint();
    let post = (&post + post.adjoint()) * C64::from(0.5);

    let c = noise_var + eps;
    if c <= 0.0 {
        return Err(Error::Numerical("zero noise and zero ridge leave the phase II system singular".into()));
    }
    let eig = post.symmetric_eigen();
    let lmax = eig.eigenvalues.max().max(0.0);
    let keep: Vec<usize> = (0..kn).filter(|&i| eig.eigenvalues[i] > 1e-14 * lmax).collect();
    if keep.is_empty() {
        return Ok(recovery::split_stacked(&mean, dims.k));
    }
    let factor = CMatrix::from_fn(kn, keep.len(), |row, j| {
        eig.eigenvectors[(row, keep[j])] * eig.eigenvalues[keep[j]].sqrt()
    });
    let t = theta.rows(0, top);
    let bt = t * &factor;
    let resid = delta.rows(0, top) - t * &mean;
    let inner = bt.adjoint() * &bt + CMatrix::identity(keep.len(), keep.len()) * C64::from(c);
    let rhs = bt.adjoint() * resid;
    let w = match inner.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => inner
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("phase II inner system is singular".into()))?,
    };
    Ok(recovery::split_stacked(&(mean + factor * w), dims.k))
}

/// Literal evaluation of the Phase II LMMSE formula with one dense inverse of size
/// `tau2 M + N`. Slow; kept as a cross-check for [`lmmse_v`].
pub fn lmmse_v_direct(
    delta: &CVector,
    theta: &CMatrix,
    cov: &CovarianceModel,
    noise_var: f64,
    tau2: usize,
    dims: SystemDims,
    ridge_eps: Option<f64>,
) -> Result<Vec<CVector>> {
    check_phase2_inputs(delta, theta, &cov.r_v, tau2, dims)?;
    let r = &cov.r_v;
    let eps = ridge_eps.unwrap_or_else(|| default_ridge(theta, r));
    let rows = theta.nrows();
    let top = tau2 * dims.m;
    let rz = CMatrix::from_fn(rows, rows, |i, j| {
        if i == j {
            C64::from(if i < top { noise_var + eps } else { eps })
        } else {
            linalg::ZERO
        }
    });
    let inner = theta * r * theta.adjoint() + rz;
    let sol = inner
        .lu()
        .solve(delta)
        .ok_or_else(|| Error::Numerical("phase II inner matrix is singular".into()))?;
    Ok(recovery::split_stacked(&(r * theta.adjoint() * sol), dims.k))
}

/// `v_hat_{m,n} = beta_hat_{m,n} v_hat_{0,n}`, indexed `m * N + n`.
pub fn assemble_v_full(v_typical: &[CVector], beta: &CMatrix) -> Vec<CVector> {
    let (m, n) = beta.shape();
    (0..m * n).map(|idx| &v_typical[idx % n] * beta[(idx / n, idx % n)]).collect()
}

/// Flattens [`assemble_v_full`] in the same order as
/// [`CascadedChannels::v_full_stacked`](crate::channel_model::CascadedChannels::v_full_stacked).
pub fn stack_v_full(v_typical: &[CVector], beta: &CMatrix) -> CVector {
    crate::channel_model::stack(assemble_v_full(v_typical, beta).iter())
}

/// Output of the noisy two-phase estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct LmmseResult {
    pub alpha_hat: AlphaMatrix,
    /// `M x N`, row 0 all ones.
    pub beta_hat: CMatrix,
    pub v_hat: Vec<CVector>,
    pub phase1_error_cov_trace: f64,
}

/// Runs both LMMSE phases on one set of observations.
pub fn estimate_lmmse(
    obs: &ObservationSet,
    sched: &TrainingSchedule,
    cov: &CovarianceModel,
    phase1: &Phase1Lmmse,
    ridge_eps: Option<f64>,
) -> Result<LmmseResult> {
    let alpha_hat = phase1.estimate(&obs.y1)?;
    let beta_hat = recovery::recover_beta(&alpha_hat)?;
    let sys = ThetaSystem::new(&beta_hat, sched, &obs.y2, &alpha_hat.typical())?;
    let v_hat = lmmse_v(&sys.delta, &sys.theta, cov, obs.noise_var, sched.tau2, sys.dims, ridge_eps)?;
    Ok(LmmseResult {
        alpha_hat,
        beta_hat,
        v_hat,
        phase1_error_cov_trace: phase1.error_cov_trace(),
    })
}
