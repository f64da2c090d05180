//! User-correlation benchmark: the typical user's cascaded channels are estimated
//! first with every other user silent, then the other users' channels are expressed
//! as `g_{k,n} = lambda_{k,n} g_{0,n}` and only the `lambda`s are estimated.
//!
//! Both phases use linear estimators that ignore Phase I errors in Phase II, the same
//! simplification the proposed scheme makes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel_model::{CascadedChannels, ChannelRealization, CorrelationSpec, SystemDims};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::metrics::EstimationResult;
use crate::protocol::{self, min_durations, MAX_CERTIFY_ATTEMPTS};

/// `N + max(K-1, ceil((K-1)N/M))`.
pub fn benchmark_min_duration(dims: SystemDims) -> usize {
    dims.n + (dims.k - 1).max(((dims.k - 1) * dims.n).div_ceil(dims.m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSchedule {
    pub tau1: usize,
    pub tau2: usize,
    /// `(tau1 + tau2) x K`; Phase I rows are `[1, 0, ..., 0]`, Phase II rows keep user 0 silent.
    pub pilots: CMatrix,
    /// `(tau1 + tau2) x N`.
    pub reflections: CMatrix,
    /// Multiplier on user 0's Phase I power (1 standard, K for the equal-total-power variant).
    pub power_boost: f64,
    pub pilot_power: f64,
}

impl BenchmarkSchedule {
    pub fn build(
        dims: SystemDims,
        tau1: usize,
        tau2: usize,
        power_boost: f64,
        pilot_power: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(power_boost > 0.0 && power_boost.is_finite()) {
            return Err(Error::InvalidParameter(format!("power boost {power_boost}")));
        }
        let phase1 = protocol::build_phase1_schedule(dims, tau1)?;
        let required = min_durations(dims).tau2;
        if tau2 < required {
            return Err(Error::InsufficientDuration {
                what: "benchmark phase II",
                required,
                got: tau2,
            });
        }
        let mut attempt = 0;
        loop {
            let s = seed.wrapping_add(attempt);
            let (p2, r2) = phase2_block(dims, tau2, s);
            let sched = Self::assemble(dims, &phase1.reflections, p2, r2, power_boost, pilot_power);
            if dims.many_antennas() || dims.k == 1 {
                return Ok(sched);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0xb5b5_0000_1111);
            let g1: Vec<CVector> = (0..dims.n)
                .map(|_| CVector::from_fn(dims.m, |_, _| linalg::sample_cscg(&mut rng, 1.0)))
                .collect();
            let psi = sched.lambda_matrix(&g1);
            let rank = linalg::numerical_rank(&psi);
            if rank == psi.ncols() {
                return Ok(sched);
            }
            log::warn!("benchmark phase II construction with seed {s} is rank {rank}, redrawing");
            attempt += 1;
            if attempt >= MAX_CERTIFY_ATTEMPTS {
                return Err(Error::RankDeficient {
                    rank,
                    required: psi.ncols(),
                });
            }
        }
    }

    fn assemble(
        dims: SystemDims,
        phi1: &CMatrix,
        p2: CMatrix,
        r2: CMatrix,
        power_boost: f64,
        pilot_power: f64,
    ) -> Self {
        let tau1 = phi1.nrows();
        let tau2 = p2.nrows();
        let pilots = CMatrix::from_fn(tau1 + tau2, dims.k, |i, k| {
            if i < tau1 {
                if k == 0 {
                    linalg::ONE
                } else {
                    linalg::ZERO
                }
            } else {
                p2[(i - tau1, k)]
            }
        });
        let reflections = CMatrix::from_fn(tau1 + tau2, dims.n, |i, n| {
            if i < tau1 {
                phi1[(i, n)]
            } else {
                r2[(i - tau1, n)]
            }
        });
        Self {
            tau1,
            tau2,
            pilots,
            reflections,
            power_boost,
            pilot_power,
        }
    }

    pub fn phase1_reflections(&self) -> CMatrix {
        self.reflections.rows(0, self.tau1).into_owned()
    }

    /// Pilots with their transmit amplitudes applied.
    fn scaled_pilots(&self) -> CMatrix {
        let p1 = C64::from((self.pilot_power * self.power_boost).sqrt());
        let p2 = C64::from(self.pilot_power.sqrt());
        CMatrix::from_fn(self.pilots.nrows(), self.pilots.ncols(), |i, k| {
            self.pilots[(i, k)] * if i < self.tau1 { p1 } else { p2 }
        })
    }

    /// Phase II system matrix for the `lambda`s given the typical user's channels.
    /// Row `i M + m`, column `(k - 1) N + n` holds `sqrt(p) phi_{n,i} x_{i,k} g_{0,n}[m]`.
    pub fn lambda_matrix(&self, g1: &[CVector]) -> CMatrix {
        let n = self.reflections.ncols();
        let k = self.pilots.ncols();
        let m = g1.first().map_or(0, |g| g.len());
        let amp = C64::from(self.pilot_power.sqrt());
        let mut psi = CMatrix::zeros(self.tau2 * m, (k - 1) * n);
        for i in 0..self.tau2 {
            let row = self.tau1 + i;
            for u in 1..k {
                for e in 0..n {
                    let c = amp * self.reflections[(row, e)] * self.pilots[(row, u)];
                    for a in 0..m {
                        psi[(i * m + a, (u - 1) * n + e)] = c * g1[e][a];
                    }
                }
            }
        }
        psi
    }
}

fn phase2_block(dims: SystemDims, tau2: usize, seed: u64) -> (CMatrix, CMatrix) {
    let k = dims.k;
    if k == 1 {
        return (CMatrix::zeros(tau2, 1), CMatrix::from_element(tau2, dims.n, linalg::ONE));
    }
    if dims.many_antennas() {
        let others = k - 1;
        let dft = linalg::dft_block(others, others, others);
        let pilots = CMatrix::from_fn(tau2, k, |i, u| if u == 0 { linalg::ZERO } else { dft[(u - 1, i % others)] });
        return (pilots, CMatrix::from_element(tau2, dims.n, linalg::ONE));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pilots = CMatrix::zeros(tau2, k);
    let mut refl = CMatrix::zeros(tau2, dims.n);
    for i in 0..tau2 {
        for u in 1..k {
            pilots[(i, u)] = linalg::sample_unit_phase(&mut rng);
        }
        for e in 0..dims.n {
            refl[(i, e)] = linalg::sample_unit_phase(&mut rng);
        }
    }
    (pilots, refl)
}

/// Prior second moments used by the benchmark estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkCovariances {
    /// Covariance of `[g_{0,0}[m], ..., g_{0,N-1}[m]]`, the same for every antenna `m`.
    pub r_g1: CMatrix,
    pub r_irs_bs: CMatrix,
    pub user_irs: Vec<CMatrix>,
}

impl BenchmarkCovariances {
    pub fn new(spec: &CorrelationSpec) -> Self {
        let r_irs_bs = spec.irs_bs_covariance();
        let user_irs: Vec<CMatrix> = (0..spec.user_irs_gains.len()).map(|k| spec.user_irs_covariance(k)).collect();
        let r_g1 = r_irs_bs.component_mul(&user_irs[0]);
        Self {
            r_g1,
            r_irs_bs,
            user_irs,
        }
    }

    /// Prior covariance of the `lambda`s of users `1..K`, taken as the projection
    /// coefficients of `g_{k,n}` onto the direction of `g1_hat[n]`.
    pub fn lambda_prior(&self, g1_hat: &[CVector]) -> CMatrix {
        let n = g1_hat.len();
        let k = self.user_irs.len();
        let mut r = CMatrix::zeros((k - 1) * n, (k - 1) * n);
        let norms: Vec<f64> = g1_hat.iter().map(|g| g.norm_squared()).collect();
        for u in 1..k {
            for c in 0..n {
                for l in 0..n {
                    let gram = g1_hat[c].dotc(&g1_hat[l]);
                    r[((u - 1) * n + c, (u - 1) * n + l)] =
                        self.user_irs[u][(c, l)] * self.r_irs_bs[(c, l)] * gram / (norms[c] * norms[l]);
                }
            }
        }
        r
    }
}

/// Precomputed Phase I filter for one schedule length and boost.
#[derive(Debug, Clone)]
pub struct BenchmarkPhase1 {
    /// `N x tau1`; applied to each antenna's observation column.
    gain: CMatrix,
}

impl BenchmarkPhase1 {
    pub fn new(sched: &BenchmarkSchedule, cov: &BenchmarkCovariances, noise_var: f64) -> Result<Self> {
        let a = sched.phase1_reflections() * C64::from((sched.pilot_power * sched.power_boost).sqrt());
        let gain = if noise_var > 0.0 {
            linalg::lmmse_gain(&a, &cov.r_g1, noise_var)?.0
        } else {
            let rank = linalg::numerical_rank(&a);
            if rank < a.ncols() {
                return Err(Error::RankDeficient {
                    rank,
                    required: a.ncols(),
                });
            }
            linalg::pinv(&a)
        };
        Ok(Self { gain })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkEstimate {
    /// `N` M-vectors `g_hat_{0,n}`.
    pub g1_hat: Vec<CVector>,
    /// `K x N`, row 0 all ones.
    pub lambda_hat: CMatrix,
}

impl BenchmarkEstimate {
    /// `[g_0^T, ..., g_{K-1}^T]^T`, matching
    /// [`CascadedChannels::g_full_stacked`].
    pub fn g_full_stacked(&self) -> CVector {
        let (k, n) = self.lambda_hat.shape();
        let parts: Vec<CVector> = (0..k * n)
            .map(|idx| &self.g1_hat[idx % n] * self.lambda_hat[(idx / n, idx % n)])
            .collect();
        crate::channel_model::stack(parts.iter())
    }
}

/// Estimates every cascaded channel from benchmark observations `y` (`T x M`).
pub fn estimate_benchmark(
    y: &CMatrix,
    sched: &BenchmarkSchedule,
    cov: &BenchmarkCovariances,
    phase1: &BenchmarkPhase1,
    noise_var: f64,
) -> Result<BenchmarkEstimate> {
    let k = sched.pilots.ncols();
    let n = sched.reflections.ncols();
    let m = y.ncols();
    let y1 = y.rows(0, sched.tau1);
    let g1_mat = &phase1.gain * y1; // N x M
    let g1_hat: Vec<CVector> = (0..n).map(|e| g1_mat.row(e).transpose()).collect();
    let mut lambda_hat = CMatrix::from_element(k, n, linalg::ONE);
    if k == 1 || sched.tau2 == 0 {
        return Ok(BenchmarkEstimate { g1_hat, lambda_hat });
    }
    if let Some(e) = g1_hat.iter().position(|g| g.norm() == 0.0) {
        return Err(Error::DegenerateChannel(format!("typical-user estimate vanishes at IRS element {}", e + 1)));
    }
    let psi = sched.lambda_matrix(&g1_hat);
    let y2 = y.rows(sched.tau1, sched.tau2);
    let obs = CVector::from_fn(sched.tau2 * m, |r, _| y2[(r / m, r % m)]);
    let lambda = if noise_var > 0.0 {
        let prior = cov.lambda_prior(&g1_hat);
        linalg::lmmse_apply(&psi, &prior, noise_var, &obs)?
    } else {
        let rank = linalg::numerical_rank(&psi);
        if rank < psi.ncols() {
            return Err(Error::RankDeficient {
                rank,
                required: psi.ncols(),
            });
        }
        linalg::pinv(&psi) * obs
    };
    for u in 1..k {
        for e in 0..n {
            lambda_hat[(u, e)] = lambda[(u - 1) * n + e];
        }
    }
    Ok(BenchmarkEstimate { g1_hat, lambda_hat })
}

/// Synthesizes benchmark observations for one trial and runs both estimation phases.
/// The metric vector is `a = [g_0^T, ..., g_{K-1}^T]^T`; the Phase I pair holds the
/// typical user's channels.
pub fn run_benchmark_trial(
    ch: &ChannelRealization,
    casc: &CascadedChannels,
    sched: &BenchmarkSchedule,
    noise_var: f64,
    cov: &BenchmarkCovariances,
    phase1: &BenchmarkPhase1,
    seed: u64,
) -> Result<EstimationResult> {
    let y = protocol::synthesize_scaled(ch, casc, &sched.scaled_pilots(), &sched.reflections, noise_var, true, seed)?;
    let est = estimate_benchmark(&y, sched, cov, phase1, noise_var)?;
    let n = casc.dims().n;
    let g1_truth = crate::channel_model::stack((0..n).map(|e| casc.g(0, e)));
    let g1_est = crate::channel_model::stack(est.g1_hat.iter());
    Ok(EstimationResult {
        estimate: est.g_full_stacked(),
        truth: casc.g_full_stacked(),
        phase1_estimate: g1_est,
        phase1_truth: g1_truth,
    })
}
