//! Pilot and reflection schedules for the two-phase protocol, minimum training
//! durations, and received-signal synthesis.
//!
//! Phase I sends the same all-ones pilot vector at every instant while the IRS cycles
//! through the columns of a DFT matrix. Phase II either keeps the IRS at unit reflection
//! and walks the users through DFT pilot columns (enough antennas, `M >= N`), or uses
//! random unit-modulus pilots and reflections with the last user silent (`M < N`),
//! certified by a rank check before use.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel_model::{CascadedChannels, ChannelRealization, SystemDims};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::matrix_io;
use crate::recovery;

/// Attempts made by [`TrainingSchedule::proposed`] to certify a random Phase II construction.
pub const MAX_CERTIFY_ATTEMPTS: u64 = 10;

const MODULUS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinDurations {
    pub tau1: usize,
    pub tau2: usize,
    pub tau_min: usize,
}

/// Minimum noiseless training lengths: `tau1* = N`, `tau2* = max(K-1, ceil((K-1)N/M))`.
pub fn min_durations(dims: SystemDims) -> MinDurations {
    let tau1 = dims.n;
    let tau2 = (dims.k - 1).max(((dims.k - 1) * dims.n).div_ceil(dims.m));
    MinDurations {
        tau1,
        tau2,
        tau_min: tau1 + tau2,
    }
}

/// Rows of a schedule belonging to one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseBlock {
    /// `rows x K`, row `i` is `x_i^T`.
    pub pilots: CMatrix,
    /// `rows x N`, row `i` holds the IRS reflection coefficients at instant `i`.
    pub reflections: CMatrix,
}

impl PhaseBlock {
    pub fn len(&self) -> usize {
        self.pilots.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn build_phase1_schedule(dims: SystemDims, tau1: usize) -> Result<PhaseBlock> {
    if tau1 < dims.n {
        return Err(Error::InsufficientDuration {
            what: "phase I",
            required: dims.n,
            got: tau1,
        });
    }
    Ok(PhaseBlock {
        pilots: CMatrix::from_element(tau1, dims.k, linalg::ONE),
        reflections: linalg::dft_block(tau1, dims.n, tau1),
    })
}

/// Phase II for `M >= N`: unit reflections, pilots taken from columns 2..K of the
/// `K x K` DFT matrix, cycling through them again for rows beyond `K - 1`.
pub fn build_phase2_schedule_m_ge_n(dims: SystemDims, tau2: usize) -> Result<PhaseBlock> {
    if !dims.many_antennas() {
        return Err(Error::WrongRegime(format!(
            "DFT phase II construction needs M >= N, got M={}, N={}",
            dims.m, dims.n
        )));
    }
    check_phase2_len(dims, tau2)?;
    let k = dims.k;
    let dft = linalg::dft_block(k, k, k);
    let pilots = CMatrix::from_fn(tau2, k, |i, user| {
        // k >= 2 whenever tau2 > 0 here, since tau2 >= K-1 and the K=1 case has no columns to cycle
        let col = 1 + i % (k - 1).max(1);
        dft[(user, col % k)]
    });
    Ok(PhaseBlock {
        pilots,
        reflections: CMatrix::from_element(tau2, dims.n, linalg::ONE),
    })
}

/// Phase II for `M < N`: the last user stays silent, every other pilot and every
/// reflection coefficient gets an independent uniform phase.
pub fn build_phase2_schedule_m_lt_n(dims: SystemDims, tau2: usize, seed: u64) -> Result<PhaseBlock> {
    if dims.many_antennas() {
        return Err(Error::WrongRegime(format!(
            "random phase II construction is for M < N, got M={}, N={}",
            dims.m, dims.n
        )));
    }
    check_phase2_len(dims, tau2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pilots = CMatrix::zeros(tau2, dims.k);
    let mut reflections = CMatrix::zeros(tau2, dims.n);
    for i in 0..tau2 {
        for k in 0..dims.k - 1 {
            pilots[(i, k)] = linalg::sample_unit_phase(&mut rng);
        }
        for n in 0..dims.n {
            reflections[(i, n)] = linalg::sample_unit_phase(&mut rng);
        }
    }
    Ok(PhaseBlock { pilots, reflections })
}

/// Dispatches on the antenna regime.
pub fn build_phase2_schedule(dims: SystemDims, tau2: usize, seed: u64) -> Result<PhaseBlock> {
    if dims.many_antennas() {
        build_phase2_schedule_m_ge_n(dims, tau2)
    } else {
        build_phase2_schedule_m_lt_n(dims, tau2, seed)
    }
}

fn check_phase2_len(dims: SystemDims, tau2: usize) -> Result<()> {
    let required = min_durations(dims).tau2;
    if tau2 < required {
        return Err(Error::InsufficientDuration {
            what: "phase II",
            required,
            got: tau2,
        });
    }
    Ok(())
}

/// Full training schedule: Phase I rows followed by Phase II rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSchedule {
    pub tau1: usize,
    pub tau2: usize,
    /// `(tau1 + tau2) x K`, unit-modulus or zero entries.
    pub pilots: CMatrix,
    /// `(tau1 + tau2) x N`, unit-modulus entries.
    pub reflections: CMatrix,
    /// Pilot power `p` in watts.
    pub pilot_power: f64,
}

impl TrainingSchedule {
    pub fn new(phase1: PhaseBlock, phase2: PhaseBlock, pilot_power: f64) -> Result<Self> {
        let tau1 = phase1.len();
        let tau2 = phase2.len();
        let k = phase1.pilots.ncols();
        let n = phase1.reflections.ncols();
        if phase2.pilots.ncols() != k || phase2.reflections.ncols() != n {
            return Err(Error::InvalidParameter("phase blocks disagree on K or N".into()));
        }
        let pilots = CMatrix::from_fn(tau1 + tau2, k, |i, c| {
            if i < tau1 {
                phase1.pilots[(i, c)]
            } else {
                phase2.pilots[(i - tau1, c)]
            }
        });
        let reflections = CMatrix::from_fn(tau1 + tau2, n, |i, c| {
            if i < tau1 {
                phase1.reflections[(i, c)]
            } else {
                phase2.reflections[(i - tau1, c)]
            }
        });
        Self::from_matrices(pilots, reflections, tau1, pilot_power)
    }

    /// Builds a schedule from full matrices, checking the modulus constraints.
    pub fn from_matrices(pilots: CMatrix, reflections: CMatrix, tau1: usize, pilot_power: f64) -> Result<Self> {
        if pilots.nrows() != reflections.nrows() || tau1 > pilots.nrows() {
            return Err(Error::InvalidParameter("schedule row counts disagree".into()));
        }
        if !(pilot_power >= 0.0 && pilot_power.is_finite()) {
            return Err(Error::InvalidParameter(format!("pilot power {pilot_power}")));
        }
        if let Some(z) = pilots
            .iter()
            .find(|z| z.norm() > MODULUS_TOL && (z.norm() - 1.0).abs() > MODULUS_TOL)
        {
            return Err(Error::InvalidParameter(format!("pilot entry {z} is neither zero nor unit modulus")));
        }
        if let Some(z) = reflections.iter().find(|z| (z.norm() - 1.0).abs() > MODULUS_TOL) {
            return Err(Error::InvalidParameter(format!("reflection {z} is not unit modulus")));
        }
        Ok(Self {
            tau1,
            tau2: pilots.nrows() - tau1,
            pilots,
            reflections,
            pilot_power,
        })
    }

    /// Standard construction for the proposed protocol. For `M < N` the random Phase II
    /// block is certified against a generic coefficient matrix and redrawn (seed, seed+1,
    /// ...) up to [`MAX_CERTIFY_ATTEMPTS`] times.
    pub fn proposed(dims: SystemDims, tau1: usize, tau2: usize, pilot_power: f64, seed: u64) -> Result<Self> {
        let phase1 = build_phase1_schedule(dims, tau1)?;
        if dims.many_antennas() {
            return Self::new(phase1, build_phase2_schedule_m_ge_n(dims, tau2)?, pilot_power);
        }
        let mut last = None;
        for attempt in 0..MAX_CERTIFY_ATTEMPTS {
            let s = seed.wrapping_add(attempt);
            let sched = Self::new(phase1.clone(), build_phase2_schedule_m_lt_n(dims, tau2, s)?, pilot_power)?;
            let report = certify_phase2(dims, &sched, s ^ 0x5eed_cafe_f00d)?;
            if report.is_identifiable {
                return Ok(sched);
            }
            log::warn!(
                "phase II construction with seed {s} failed certification (rank {} of {}), redrawing",
                report.rank,
                dims.k * dims.n
            );
            last = Some(report);
        }
        let report = last.expect("at least one attempt");
        Err(Error::RankDeficient {
            rank: report.rank,
            required: dims.k * dims.n,
        })
    }

    pub fn total_len(&self) -> usize {
        self.tau1 + self.tau2
    }

    /// Phase I reflection matrix, `tau1 x N`.
    pub fn phase1_reflections(&self) -> CMatrix {
        self.reflections.rows(0, self.tau1).into_owned()
    }

    /// The common Phase I pilot vector `x` (row 0).
    pub fn phase1_pilot(&self) -> CVector {
        self.pilots.row(0).transpose()
    }

    pub fn phase2_pilots(&self) -> CMatrix {
        self.pilots.rows(self.tau1, self.tau2).into_owned()
    }

    pub fn phase2_reflections(&self) -> CMatrix {
        self.reflections.rows(self.tau1, self.tau2).into_owned()
    }

    pub fn phase1_pilots_identical(&self) -> bool {
        (1..self.tau1).all(|i| self.pilots.row(i).iter().eq(self.pilots.row(0).iter()))
    }

    /// Writes pilots and reflections as two plain-text complex matrix files.
    pub fn write(&self, pilots_path: impl AsRef<Path>, reflections_path: impl AsRef<Path>) -> Result<()> {
        matrix_io::write_matrix(pilots_path, &self.pilots)?;
        matrix_io::write_matrix(reflections_path, &self.reflections)
    }
}

/// Checks the Phase II block of `sched` yields a full-rank system against a
/// randomly drawn coefficient matrix (row 0 fixed to ones).
pub fn certify_phase2(dims: SystemDims, sched: &TrainingSchedule, seed: u64) -> Result<recovery::RankReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = CMatrix::from_fn(dims.m, dims.n, |m, _| {
        if m == 0 {
            linalg::ONE
        } else {
            linalg::sample_cscg(&mut rng, 1.0)
        }
    });
    let theta = recovery::build_theta(&beta, sched)?;
    Ok(recovery::rank_check(&theta))
}

/// Received signals after direct-path cancellation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    /// `tau1 x M`, row `i` is `y_i^T`.
    pub y1: CMatrix,
    /// `tau2 x M`.
    pub y2: CMatrix,
    pub noise_var: f64,
}

/// Generates the received signal of every training instant.
///
/// With `include_direct` the direct-path term `sum_k h_k sqrt(p) x_{i,k}` is added to
/// each row and then removed again with the known `h`, as a receiver with perfect
/// direct-channel knowledge would. Noise is one CN(0, noise_var I_M) vector per
/// instant, Phase I first, drawn from a ChaCha8 stream seeded with `seed`.
pub fn synthesize_observations(
    ch: &ChannelRealization,
    casc: &CascadedChannels,
    sched: &TrainingSchedule,
    noise_var: f64,
    include_direct: bool,
    seed: u64,
) -> Result<ObservationSet> {
    let amplitude = sched.pilot_power.sqrt();
    let scaled = &sched.pilots * C64::from(amplitude);
    let y = synthesize_scaled(ch, casc, &scaled, &sched.reflections, noise_var, include_direct, seed)?;
    Ok(ObservationSet {
        y1: y.rows(0, sched.tau1).into_owned(),
        y2: y.rows(sched.tau1, sched.tau2).into_owned(),
        noise_var,
    })
}

/// Synthesis with pilots that already carry their amplitude (`sqrt(p) x_{i,k}`, possibly
/// user-dependent). Returns all rows, `T x M`.
pub(crate) fn synthesize_scaled(
    ch: &ChannelRealization,
    casc: &CascadedChannels,
    scaled_pilots: &CMatrix,
    reflections: &CMatrix,
    noise_var: f64,
    include_direct: bool,
    seed: u64,
) -> Result<CMatrix> {
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise variance {noise_var}")));
    }
    let dims = casc.dims();
    if scaled_pilots.ncols() != dims.k || reflections.ncols() != dims.n || scaled_pilots.nrows() != reflections.nrows() {
        return Err(Error::InvalidParameter("schedule does not match channel dimensions".into()));
    }
    let rows = scaled_pilots.nrows();
    // M x T, column i accumulates y_i
    let mut y_t = CMatrix::zeros(dims.m, rows);
    for n in 0..dims.n {
        let g_n = CMatrix::from_fn(dims.m, dims.k, |m, k| casc.g(k, n)[m]);
        let mut contrib = g_n * scaled_pilots.transpose();
        for i in 0..rows {
            let mut col = contrib.column_mut(i);
            col *= reflections[(i, n)];
        }
        y_t += contrib;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if noise_var > 0.0 {
        for i in 0..rows {
            for m in 0..dims.m {
                y_t[(m, i)] += linalg::sample_cscg(&mut rng, noise_var);
            }
        }
    }
    if include_direct {
        let direct = &ch.h * scaled_pilots.transpose();
        y_t += &direct;
        y_t -= &direct;
    }
    Ok(y_t.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_model::{derive_cascaded, sample_channels, CorrelationSpec};

    fn dims(m: usize, n: usize, k: usize) -> SystemDims {
        SystemDims::new(m, n, k).unwrap()
    }

    #[test]
    fn min_durations_examples() {
        assert_eq!(
            min_durations(dims(32, 32, 8)),
            MinDurations { tau1: 32, tau2: 7, tau_min: 39 }
        );
        assert_eq!(min_durations(dims(4, 8, 3)), MinDurations { tau1: 8, tau2: 4, tau_min: 12 });
        assert_eq!(min_durations(dims(5, 3, 2)), MinDurations { tau1: 3, tau2: 1, tau_min: 4 });
    }

    #[test]
    fn phase1_two_point_dft() {
        let b = build_phase1_schedule(dims(2, 2, 2), 2).unwrap();
        let expect = CMatrix::from_row_slice(2, 2, &[linalg::ONE, linalg::ONE, linalg::ONE, -linalg::ONE]);
        assert!((&b.reflections - &expect).norm() < 1e-15);
        let gram = b.reflections.adjoint() * &b.reflections;
        assert!((gram - CMatrix::identity(2, 2) * C64::from(2.0)).norm() < 1e-14);
    }

    #[test]
    fn phase1_single_element() {
        let b = build_phase1_schedule(dims(2, 1, 2), 1).unwrap();
        assert_eq!(b.reflections, CMatrix::from_element(1, 1, linalg::ONE));
        assert!(b.pilots.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn phase1_too_short() {
        assert!(matches!(
            build_phase1_schedule(dims(4, 8, 3), 7),
            Err(Error::InsufficientDuration { required: 8, got: 7, .. })
        ));
    }

    #[test]
    fn phase1_extended_stays_orthogonal() {
        let b = build_phase1_schedule(dims(4, 5, 3), 9).unwrap();
        let gram = b.reflections.adjoint() * &b.reflections;
        assert!((gram - CMatrix::identity(5, 5) * C64::from(9.0)).norm() < 1e-10);
    }

    #[test]
    fn phase2_dft_k2() {
        let b = build_phase2_schedule_m_ge_n(dims(4, 2, 2), 1).unwrap();
        assert!((b.pilots[(0, 0)] - linalg::ONE).norm() < 1e-15);
        assert!((b.pilots[(0, 1)] + linalg::ONE).norm() < 1e-15);
        assert!(b.reflections.iter().all(|z| *z == linalg::ONE));
    }

    #[test]
    fn phase2_dft_k3_nonsingular_with_ones() {
        let b = build_phase2_schedule_m_ge_n(dims(4, 2, 3), 2).unwrap();
        let stacked = CMatrix::from_fn(3, 3, |r, c| if c == 0 { linalg::ONE } else { b.pilots[(c - 1, r)] });
        assert_eq!(linalg::numerical_rank(&stacked), 3);
    }

    #[test]
    fn phase2_dft_extra_rows_cycle() {
        let b = build_phase2_schedule_m_ge_n(dims(4, 2, 3), 5).unwrap();
        assert!(b.pilots.row(0).iter().eq(b.pilots.row(2).iter()));
        assert!(b.pilots.row(1).iter().eq(b.pilots.row(3).iter()));
        assert!(!b.pilots.row(0).iter().eq(b.pilots.row(1).iter()));
    }

    #[test]
    fn phase2_regime_and_length_errors() {
        assert!(matches!(build_phase2_schedule_m_ge_n(dims(2, 4, 2), 2), Err(Error::WrongRegime(_))));
        assert!(matches!(build_phase2_schedule_m_lt_n(dims(4, 2, 2), 2, 0), Err(Error::WrongRegime(_))));
        assert!(matches!(
            build_phase2_schedule_m_ge_n(dims(8, 4, 3), 1),
            Err(Error::InsufficientDuration { .. })
        ));
        assert!(matches!(
            build_phase2_schedule_m_lt_n(dims(2, 4, 2), 1, 0),
            Err(Error::InsufficientDuration { .. })
        ));
    }

    #[test]
    fn phase2_random_silences_last_user() {
        let b = build_phase2_schedule_m_lt_n(dims(2, 4, 3), 4, 11).unwrap();
        for i in 0..4 {
            assert_eq!(b.pilots[(i, 2)], linalg::ZERO);
            for k in 0..2 {
                assert!((b.pilots[(i, k)].norm() - 1.0).abs() < 1e-12);
            }
        }
        assert!(b.reflections.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn random_construction_certifies_generically() {
        let d = dims(2, 4, 2);
        for seed in 0..100 {
            let sched = TrainingSchedule::new(
                build_phase1_schedule(d, 4).unwrap(),
                build_phase2_schedule_m_lt_n(d, 2, seed).unwrap(),
                1.0,
            )
            .unwrap();
            let report = certify_phase2(d, &sched, seed + 1000).unwrap();
            assert_eq!(report.rank, 8, "seed {seed}");
        }
    }

    #[test]
    fn schedule_validation() {
        let bad = CMatrix::from_element(2, 2, C64::new(0.5, 0.0));
        assert!(TrainingSchedule::from_matrices(bad.clone(), CMatrix::from_element(2, 2, linalg::ONE), 1, 1.0).is_err());
        assert!(TrainingSchedule::from_matrices(CMatrix::zeros(2, 2), bad, 1, 1.0).is_err());
        let s = TrainingSchedule::proposed(dims(4, 3, 2), 3, 1, 1.0, 0).unwrap();
        assert!(s.phase1_pilots_identical());
        assert_eq!((s.tau1, s.tau2), (3, 1));
    }

    fn setup(m: usize, n: usize, k: usize, seed: u64) -> (ChannelRealization, CascadedChannels) {
        let d = dims(m, n, k);
        let spec = CorrelationSpec::unit(d).unwrap();
        let ch = sample_channels(d, &spec, seed).unwrap();
        let casc = derive_cascaded(&ch).unwrap();
        (ch, casc)
    }

    #[test]
    fn zero_pilots_give_zero_observations() {
        let (ch, casc) = setup(3, 2, 2, 1);
        let sched = TrainingSchedule::from_matrices(
            CMatrix::zeros(3, 2),
            CMatrix::from_element(3, 2, linalg::ONE),
            2,
            1.0,
        )
        .unwrap();
        let obs = synthesize_observations(&ch, &casc, &sched, 0.0, true, 5).unwrap();
        assert!(obs.y1.iter().chain(obs.y2.iter()).all(|z| *z == linalg::ZERO));
    }

    #[test]
    fn direct_path_cancels() {
        let (ch, casc) = setup(4, 4, 3, 2);
        let sched = TrainingSchedule::proposed(casc.dims(), 4, 2, 2.0, 0).unwrap();
        let with = synthesize_observations(&ch, &casc, &sched, 0.0, true, 5).unwrap();
        let without = synthesize_observations(&ch, &casc, &sched, 0.0, false, 5).unwrap();
        let scale = without.y1.norm() + without.y2.norm();
        assert!((&with.y1 - &without.y1).norm() + (&with.y2 - &without.y2).norm() <= 1e-12 * scale);
    }

    #[test]
    fn scalar_hand_example() {
        let ch = ChannelRealization {
            h: CMatrix::from_element(1, 1, C64::new(7.0, 0.0)),
            r: CMatrix::from_element(1, 1, linalg::ONE),
            t: CMatrix::from_element(1, 1, C64::new(3.0, 0.0)),
        };
        let casc = derive_cascaded(&ch).unwrap();
        let sched = TrainingSchedule::from_matrices(
            CMatrix::from_element(1, 1, linalg::ONE),
            CMatrix::from_element(1, 1, linalg::ONE),
            1,
            4.0,
        )
        .unwrap();
        let obs = synthesize_observations(&ch, &casc, &sched, 0.0, true, 0).unwrap();
        assert!((obs.y1[(0, 0)] - C64::new(6.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn negative_noise_rejected() {
        let (ch, casc) = setup(3, 2, 2, 1);
        let sched = TrainingSchedule::proposed(casc.dims(), 2, 1, 1.0, 0).unwrap();
        assert!(matches!(
            synthesize_observations(&ch, &casc, &sched, -1.0, false, 0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn noiseless_synthesis_is_linear_in_cascade() {
        let (ch, casc) = setup(3, 4, 2, 3);
        let sched = TrainingSchedule::proposed(casc.dims(), 4, 2, 1.0, 7).unwrap();
        let a = synthesize_observations(&ch, &casc, &sched, 0.0, false, 0).unwrap();
        let b = synthesize_observations(&ch, &casc.scaled(C64::from(2.0)), &sched, 0.0, false, 0).unwrap();
        assert!((a.y1 * C64::from(2.0) - &b.y1).norm() < 1e-12 * b.y1.norm());
        assert!((a.y2 * C64::from(2.0) - &b.y2).norm() < 1e-12 * b.y2.norm());
    }

    #[test]
    fn noise_has_requested_variance() {
        let (ch, casc) = setup(4, 4, 2, 3);
        let zero = casc.scaled(linalg::ZERO);
        let sched = TrainingSchedule::proposed(casc.dims(), 400, 100, 1.0, 7).unwrap();
        let obs = synthesize_observations(&ch, &zero, &sched, 0.5, true, 3).unwrap();
        let power = (obs.y1.norm_squared() + obs.y2.norm_squared()) / (500.0 * 4.0);
        assert!((power - 0.5).abs() < 0.05, "empirical noise power {power}");
    }
}
