//! Exact recovery of the antenna correlation coefficients and the typical-antenna
//! cascaded channels from noiseless observations.
//!
//! Phase I yields `alpha_bar` (one `N`-vector per antenna) by inverting the DFT
//! reflection matrix; ratios against antenna 0 give `beta`. Phase II stacks its
//! observations with `alpha_bar_0` into `delta = Theta v` and solves for
//! `v = [v_{0,0}^T, ..., v_{0,N-1}^T]^T` either through the per-instant `eta`
//! decomposition (`M >= N`) or the pseudo-inverse of `Theta`.

use crate::channel_model::{CascadedChannels, SystemDims};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::protocol::{ObservationSet, TrainingSchedule};

/// Threshold below which `|alpha_bar_{0,n}|`, relative to `||alpha_bar_0||`, is treated as zero.
pub const ALPHA_RATIO_FLOOR: f64 = 1e-12;

/// Phase I aggregate coefficients, `N x M`; column `m` is `alpha_bar_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMatrix {
    pub alpha_bar: CMatrix,
}

impl AlphaMatrix {
    /// Ground truth `alpha_bar_{m,n} = sqrt(p) v_{m,n}^T x`.
    pub fn from_channels(casc: &CascadedChannels, x: &CVector, pilot_power: f64) -> Self {
        let dims = casc.dims();
        let amp = C64::from(pilot_power.sqrt());
        let alpha_bar = CMatrix::from_fn(dims.n, dims.m, |n, m| casc.v(m, n).dot(x) * amp);
        Self { alpha_bar }
    }

    /// `alpha_bar_0`, the typical antenna's column.
    pub fn typical(&self) -> CVector {
        self.alpha_bar.column(0).into_owned()
    }
}

pub fn recover_alpha_dft(y1: &CMatrix, sched: &TrainingSchedule) -> Result<AlphaMatrix> {
    let phi = sched.phase1_reflections();
    if y1.nrows() != sched.tau1 {
        return Err(Error::InvalidParameter(format!(
            "phase I observations have {} rows, schedule has {}",
            y1.nrows(),
            sched.tau1
        )));
    }
    let n = phi.ncols();
    let tau1 = sched.tau1 as f64;
    let gram = phi.adjoint() * &phi;
    let deviation = (gram - CMatrix::identity(n, n) * C64::from(tau1)).norm();
    if deviation <= 1e-10 * tau1 * n as f64 {
        return Ok(AlphaMatrix {
            alpha_bar: phi.adjoint() * y1 / C64::from(tau1),
        });
    }
    let rank = linalg::numerical_rank(&phi);
    if rank < n {
        return Err(Error::RankDeficient { rank, required: n });
    }
    Ok(AlphaMatrix {
        alpha_bar: linalg::pinv(&phi) * y1,
    })
}

/// `beta_{m,n} = alpha_bar_{m,n} / alpha_bar_{0,n}`, returned as `M x N`.
pub fn recover_beta(alpha: &AlphaMatrix) -> Result<CMatrix> {
    let a = &alpha.alpha_bar;
    let (n, m) = a.shape();
    let floor = ALPHA_RATIO_FLOOR * a.column(0).norm();
    for e in 0..n {
        let d = a[(e, 0)].norm();
        if d == 0.0 || d <= floor {
            return Err(Error::DivisionDegenerate { element: e + 1 });
        }
    }
    Ok(CMatrix::from_fn(m, n, |mm, nn| {
        if mm == 0 {
            linalg::ONE
        } else {
            a[(nn, mm)] / a[(nn, 0)]
        }
    }))
}

/// `Theta`, `(tau2 M + N) x KN`.
///
/// Row `i M + m` (Phase II instant `i`, antenna `m`), column `n K + k` holds
/// `sqrt(p) phi_{n,i} x_{i,k} beta_{m,n}`; bottom row `n` holds `sqrt(p) x^T` in
/// columns `n K .. n K + K`.
pub fn build_theta(beta: &CMatrix, sched: &TrainingSchedule) -> Result<CMatrix> {
    let (m, n) = beta.shape();
    let k = sched.pilots.ncols();
    if sched.reflections.ncols() != n {
        return Err(Error::InvalidParameter(format!(
            "beta has {n} columns, schedule has {} IRS elements",
            sched.reflections.ncols()
        )));
    }
    let amp = C64::from(sched.pilot_power.sqrt());
    let tau2 = sched.tau2;
    let mut theta = CMatrix::zeros(tau2 * m + n, k * n);
    for i in 0..tau2 {
        let row = sched.tau1 + i;
        for e in 0..n {
            let phi = sched.reflections[(row, e)] * amp;
            for u in 0..k {
                let px = phi * sched.pilots[(row, u)];
                if px == linalg::ZERO {
                    continue;
                }
                for a in 0..m {
                    theta[(i * m + a, e * k + u)] = px * beta[(a, e)];
                }
            }
        }
    }
    let x = sched.phase1_pilot();
    for e in 0..n {
        for u in 0..k {
            theta[(tau2 * m + e, e * k + u)] = amp * x[u];
        }
    }
    Ok(theta)
}

/// `delta = [y^II stacked instant-major, alpha_bar_0]`.
pub fn build_delta(y2: &CMatrix, alpha_typical: &CVector) -> CVector {
    let (tau2, m) = y2.shape();
    let n = alpha_typical.len();
    CVector::from_fn(tau2 * m + n, |r, _| {
        if r < tau2 * m {
            y2[(r / m, r % m)]
        } else {
            alpha_typical[r - tau2 * m]
        }
    })
}

/// The stacked Phase II linear system `delta = Theta v`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSystem {
    pub theta: CMatrix,
    pub delta: CVector,
    pub dims: SystemDims,
}

impl ThetaSystem {
    pub fn new(beta: &CMatrix, sched: &TrainingSchedule, y2: &CMatrix, alpha_typical: &CVector) -> Result<Self> {
        let dims = SystemDims::new(beta.nrows(), beta.ncols(), sched.pilots.ncols())?;
        if y2.shape() != (sched.tau2, dims.m) || alpha_typical.len() != dims.n {
            return Err(Error::InvalidParameter("phase II observations do not match the schedule".into()));
        }
        Ok(Self {
            theta: build_theta(beta, sched)?,
            delta: build_delta(y2, alpha_typical),
            dims,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankReport {
    pub rank: usize,
    /// `rank == number of columns` (KN for `Theta`).
    pub is_identifiable: bool,
}

pub fn rank_check(theta: &CMatrix) -> RankReport {
    let rank = linalg::numerical_rank(theta);
    RankReport {
        rank,
        is_identifiable: rank == theta.ncols(),
    }
}

/// Splits a stacked `[v_0^T, ..., v_{N-1}^T]^T` into `N` K-vectors.
pub fn split_stacked(v: &CVector, k: usize) -> Vec<CVector> {
    v.as_slice().chunks(k).map(CVector::from_column_slice).collect()
}

/// `M >= N` path: per-instant `eta` from the pseudo-inverse of `beta`, then each
/// `v_{0,n}` from `[alpha_bar_{0,n}, eta_{n,...}]` and the stacked pilot matrix.
pub fn recover_v_via_eta(
    y2: &CMatrix,
    beta: &CMatrix,
    alpha_typical: &CVector,
    sched: &TrainingSchedule,
) -> Result<Vec<CVector>> {
    let (m, n) = beta.shape();
    if m < n {
        return Err(Error::WrongRegime(format!("eta recovery needs M >= N, got M={m}, N={n}")));
    }
    let rank = linalg::numerical_rank(beta);
    if rank < n {
        return Err(Error::RankDeficient { rank, required: n });
    }
    let beta_pinv = linalg::pinv(beta);
    let tau2 = sched.tau2;
    let k = sched.pilots.ncols();
    // eta[(n, i)]
    let mut eta = CMatrix::zeros(n, tau2);
    for i in 0..tau2 {
        let z = &beta_pinv * y2.row(i).transpose();
        for e in 0..n {
            eta[(e, i)] = z[e] / sched.reflections[(sched.tau1 + i, e)];
        }
    }
    // rows of X^T: x, x_{tau1+1}, ..., x_{tau1+tau2}
    let x = sched.phase1_pilot();
    let xt = CMatrix::from_fn(tau2 + 1, k, |r, u| if r == 0 { x[u] } else { sched.pilots[(sched.tau1 + r - 1, u)] });
    let rank = linalg::numerical_rank(&xt);
    if rank < k {
        return Err(Error::RankDeficient { rank, required: k });
    }
    let xt_pinv = linalg::pinv(&xt) / C64::from(sched.pilot_power.sqrt());
    Ok((0..n)
        .map(|e| {
            let b = CVector::from_fn(tau2 + 1, |r, _| if r == 0 { alpha_typical[e] } else { eta[(e, r - 1)] });
            &xt_pinv * b
        })
        .collect())
}

/// General path: `v = Theta^+ delta`, after confirming `rank(Theta) = KN`.
pub fn recover_v_pinv(sys: &ThetaSystem) -> Result<Vec<CVector>> {
    let report = rank_check(&sys.theta);
    if !report.is_identifiable {
        return Err(Error::RankDeficient {
            rank: report.rank,
            required: sys.theta.ncols(),
        });
    }
    let v = linalg::pinv(&sys.theta) * &sys.delta;
    Ok(split_stacked(&v, sys.dims.k))
}

/// Output of the noiseless pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiselessEstimate {
    pub alpha: AlphaMatrix,
    /// `M x N`, row 0 all ones.
    pub beta: CMatrix,
    /// `N` K-vectors `v_{0,n}`.
    pub v_typical: Vec<CVector>,
}

/// Runs Phase I and Phase II recovery, taking the `eta` path when `M >= N`.
pub fn recover_noiseless(obs: &ObservationSet, sched: &TrainingSchedule) -> Result<NoiselessEstimate> {
    let alpha = recover_alpha_dft(&obs.y1, sched)?;
    let beta = recover_beta(&alpha)?;
    let typical = alpha.typical();
    let v_typical = if beta.nrows() >= beta.ncols() {
        recover_v_via_eta(&obs.y2, &beta, &typical, sched)?
    } else {
        recover_v_pinv(&ThetaSystem::new(&beta, sched, &obs.y2, &typical)?)?
    };
    Ok(NoiselessEstimate { alpha, beta, v_typical })
}
