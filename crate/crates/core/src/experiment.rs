//! Monte Carlo sweeps over pilot lengths and schemes.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::benchmark::{BenchmarkCovariances, BenchmarkPhase1, BenchmarkSchedule};
use crate::channel_model::{derive_cascaded, sample_channels, CascadedChannels, ChannelRealization, CorrelationSpec, SystemDims};
use crate::config::{allocate_pilots, ExperimentConfig, Scheme};
use crate::error::{Error, Result};
use crate::linalg::{self, CVector};
use crate::lmmse::{self, CovarianceModel, Phase1Lmmse};
use crate::metrics::{BatchNmse, EstimationResult};
use crate::protocol::{min_durations, synthesize_observations, TrainingSchedule};
use crate::recovery::{self, AlphaMatrix};

/// Largest fraction of trials that may be resampled before a sweep is abandoned.
pub const MAX_RESAMPLE_FRACTION: f64 = 0.01;

const CHANNEL_STREAM: u64 = 0x6368_616e_6e65_6c73;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash of two words.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(a) ^ b)
}

/// Channel seed of a trial; shared by every scheme and pilot length.
pub fn channel_seed(master: u64, trial: usize) -> u64 {
    mix_seed(mix_seed(master, CHANNEL_STREAM), trial as u64)
}

/// Seed for the schedule and noise of one (scheme, pilot length) row.
pub fn row_seed(master: u64, scheme: Scheme, total_pilots: usize) -> u64 {
    mix_seed(mix_seed(master, scheme.id()), total_pilots as u64)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
    /// Zero noise and least-squares estimators.
    pub noiseless: bool,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub total_pilots: usize,
    pub tau1: usize,
    pub tau2: usize,
    pub trials: usize,
    pub nmse_mean: f64,
    pub nmse_stderr: f64,
    pub seed: u64,
    pub wall_time_s: f64,
}

/// Estimator for the proposed scheme: least squares at zero noise, LMMSE otherwise.
pub fn run_proposed_trial(
    ch: &ChannelRealization,
    casc: &CascadedChannels,
    sched: &TrainingSchedule,
    noise_var: f64,
    cov: &CovarianceModel,
    phase1: Option<&Phase1Lmmse>,
    seed: u64,
) -> Result<EstimationResult> {
    let obs = synthesize_observations(ch, casc, sched, noise_var, true, seed)?;
    let (alpha, v_full) = match phase1 {
        Some(p1) if noise_var > 0.0 => {
            let r = lmmse::estimate_lmmse(&obs, sched, cov, p1, None)?;
            let v = lmmse::stack_v_full(&r.v_hat, &r.beta_hat);
            (r.alpha_hat, v)
        }
        _ => {
            let r = recovery::recover_noiseless(&obs, sched)?;
            let v = lmmse::stack_v_full(&r.v_typical, &r.beta);
            (r.alpha, v)
        }
    };
    let x = sched.phase1_pilot();
    let truth_alpha = AlphaMatrix::from_channels(casc, &x, sched.pilot_power);
    Ok(EstimationResult {
        estimate: v_full,
        truth: casc.v_full_stacked(),
        phase1_estimate: flatten(&alpha),
        phase1_truth: flatten(&truth_alpha),
    })
}

fn flatten(a: &AlphaMatrix) -> CVector {
    CVector::from_column_slice(a.alpha_bar.as_slice())
}

enum Prepared {
    Proposed {
        sched: TrainingSchedule,
        cov: Box<CovarianceModel>,
        phase1: Option<Phase1Lmmse>,
    },
    Benchmark {
        sched: BenchmarkSchedule,
        cov: Box<BenchmarkCovariances>,
        phase1: BenchmarkPhase1,
    },
}

impl Prepared {
    fn new(
        scheme: Scheme,
        dims: SystemDims,
        spec: &CorrelationSpec,
        tau: (usize, usize),
        power: f64,
        noise_var: f64,
        seed: u64,
    ) -> Result<Self> {
        match scheme {
            Scheme::Proposed => {
                let sched = TrainingSchedule::proposed(dims, tau.0, tau.1, power, seed)?;
                let cov = lmmse::build_covariances(spec, &sched.phase1_pilot(), power)?;
                let phase1 = if noise_var > 0.0 {
                    Some(Phase1Lmmse::new(&sched, &cov, noise_var)?)
                } else {
                    None
                };
                Ok(Prepared::Proposed {
                    sched,
                    cov: Box::new(cov),
                    phase1,
                })
            }
            Scheme::Benchmark | Scheme::BenchmarkBoosted => {
                let boost = if scheme == Scheme::BenchmarkBoosted {
                    dims.k as f64
                } else {
                    1.0
                };
                let sched = BenchmarkSchedule::build(dims, tau.0, tau.1, boost, power, seed)?;
                let cov = BenchmarkCovariances::new(spec);
                let phase1 = BenchmarkPhase1::new(&sched, &cov, noise_var)?;
                Ok(Prepared::Benchmark {
                    sched,
                    cov: Box::new(cov),
                    phase1,
                })
            }
        }
    }

    fn run(&self, ch: &ChannelRealization, casc: &CascadedChannels, noise_var: f64, seed: u64) -> Result<EstimationResult> {
        match self {
            Prepared::Proposed { sched, cov, phase1 } => {
                run_proposed_trial(ch, casc, sched, noise_var, cov, phase1.as_ref(), seed)
            }
            Prepared::Benchmark { sched, cov, phase1 } => {
                crate::benchmark::run_benchmark_trial(ch, casc, sched, noise_var, cov, phase1, seed)
            }
        }
    }
}

fn is_resamplable(e: &Error) -> bool {
    matches!(e, Error::DegenerateChannel(_) | Error::DivisionDegenerate { .. })
}

struct TrialOutcome {
    squared_error: f64,
    energy: f64,
    replaced: usize,
}

fn run_trial(
    prepared: &Prepared,
    dims: SystemDims,
    spec: &CorrelationSpec,
    noise_var: f64,
    ch_seed: u64,
    noise_seed: u64,
    budget: usize,
) -> Result<TrialOutcome> {
    let mut replaced = 0;
    loop {
        let offset = replaced as u64;
        let attempt = sample_channels(dims, spec, ch_seed.wrapping_add(offset))
            .and_then(|ch| derive_cascaded(&ch).map(|casc| (ch, casc)))
            .and_then(|(ch, casc)| prepared.run(&ch, &casc, noise_var, noise_seed.wrapping_add(offset)));
        match attempt {
            Ok(r) => {
                let squared_error = r.squared_error();
                let energy = linalg::sq_norm(&r.truth);
                if !squared_error.is_finite() {
                    return Err(Error::Numerical("non-finite estimation error".into()));
                }
                return Ok(TrialOutcome {
                    squared_error,
                    energy,
                    replaced,
                });
            }
            Err(e) if is_resamplable(&e) && replaced < budget => {
                log::warn!("resampling trial with channel seed {ch_seed}: {e}");
                replaced += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Runs every (scheme, pilot length) combination of `cfg`. Rows are ordered by scheme as
/// listed in the config, then by pilot length. Results do not depend on the thread count.
pub fn run_sweep(cfg: &ExperimentConfig, opts: SweepOptions) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = opts.threads {
        if t == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| sweep_inner(cfg, opts))
}

fn sweep_inner(cfg: &ExperimentConfig, opts: SweepOptions) -> Result<Vec<ResultRow>> {
    let dims = cfg.dims()?;
    let spec = cfg.correlation_spec()?;
    let power = cfg.pilot_power();
    let noise_var = if opts.noiseless { 0.0 } else { cfg.noise_power() };
    let budget = ((cfg.trials * cfg.pilot_lengths.len() * cfg.schemes.len()) as f64 * MAX_RESAMPLE_FRACTION) as usize;
    let mut total_replaced = 0;
    log::info!(
        "sweep M={} N={} K={}: p={power:.4e} W, noise={noise_var:.4e} W, minimum length {}",
        dims.m,
        dims.n,
        dims.k,
        min_durations(dims).tau_min
    );
    let mut rows = Vec::new();
    for &scheme in &cfg.schemes {
        for &total in &cfg.pilot_lengths {
            let start = Instant::now();
            let tau = allocate_pilots(total, dims, cfg.allocation)?;
            let seed = row_seed(cfg.master_seed, scheme, total);
            let prepared = Prepared::new(scheme, dims, &spec, tau, power, noise_var, seed)?;
            let outcomes: Vec<Result<TrialOutcome>> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    run_trial(
                        &prepared,
                        dims,
                        &spec,
                        noise_var,
                        channel_seed(cfg.master_seed, t),
                        mix_seed(seed, t as u64),
                        budget.saturating_sub(total_replaced),
                    )
                })
                .collect();
            let mut batch = BatchNmse::default();
            for o in outcomes {
                let o = o?;
                total_replaced += o.replaced;
                batch.push(o.squared_error, o.energy);
            }
            if total_replaced > budget {
                return Err(Error::ResampleLimit {
                    replaced: total_replaced,
                    trials: cfg.trials,
                });
            }
            let row = ResultRow {
                scheme,
                total_pilots: total,
                tau1: tau.0,
                tau2: tau.1,
                trials: cfg.trials,
                nmse_mean: batch.mean()?,
                nmse_stderr: batch.stderr()?,
                seed,
                wall_time_s: if cfg.record_wall_time {
                    start.elapsed().as_secs_f64()
                } else {
                    0.0
                },
            };
            log::info!(
                "{scheme} T={total} ({}+{}): nmse {:.4e} +/- {:.1e}",
                row.tau1,
                row.tau2,
                row.nmse_mean,
                row.nmse_stderr
            );
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Writes rows as CSV with a header line; floats in `{:.12e}` form.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scheme",
        "total_pilots",
        "tau1",
        "tau2",
        "trials",
        "nmse_mean",
        "nmse_stderr",
        "seed",
        "wall_time_s",
    ])?;
    for r in rows {
        w.write_record([
            r.scheme.name().to_string(),
            r.total_pilots.to_string(),
            r.tau1.to_string(),
            r.tau2.to_string(),
            r.trials.to_string(),
            format!("{:.12e}", r.nmse_mean),
            format!("{:.12e}", r.nmse_stderr),
            r.seed.to_string(),
            format!("{:.12e}", r.wall_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    write_csv(rows, std::fs::File::create(path)?)
}

/// Outcome of a single noiseless check at the minimum durations.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiselessReport {
    pub dims: SystemDims,
    pub tau1: usize,
    pub tau2: usize,
    pub theta_rank: usize,
    pub required_rank: usize,
    /// Largest relative error over the `beta` entries.
    pub beta_error: f64,
    /// `||v_hat - v|| / ||v||` over all antennas.
    pub v_error: f64,
    /// Same measure for the benchmark's `g` estimate.
    pub benchmark_error: f64,
}

impl NoiselessReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.theta_rank == self.required_rank && self.beta_error < tol && self.v_error < tol && self.benchmark_error < tol
    }
}

/// Draws one unit-gain channel, runs both schemes without noise at their minimum
/// durations, and reports recovery errors.
pub fn verify_noiseless(dims: SystemDims, seed: u64) -> Result<NoiselessReport> {
    let spec = CorrelationSpec::unit(dims)?;
    let ch = sample_channels(dims, &spec, seed)?;
    let casc = derive_cascaded(&ch)?;
    let mins = min_durations(dims);
    let sched = TrainingSchedule::proposed(dims, mins.tau1, mins.tau2, 1.0, seed)?;
    let obs = synthesize_observations(&ch, &casc, &sched, 0.0, true, seed)?;
    let est = recovery::recover_noiseless(&obs, &sched)?;
    let theta = recovery::build_theta(&est.beta, &sched)?;
    let rank = recovery::rank_check(&theta);
    let beta_error = est
        .beta
        .iter()
        .zip(casc.beta.iter())
        .map(|(a, b)| (a - b).norm() / b.norm())
        .fold(0.0, f64::max);
    let v_hat = lmmse::stack_v_full(&est.v_typical, &est.beta);
    let v = casc.v_full_stacked();
    let v_error = (&v_hat - &v).norm() / v.norm();

    let b_sched = BenchmarkSchedule::build(dims, mins.tau1, mins.tau2, 1.0, 1.0, seed)?;
    let b_cov = BenchmarkCovariances::new(&spec);
    let b_p1 = BenchmarkPhase1::new(&b_sched, &b_cov, 0.0)?;
    let b = crate::benchmark::run_benchmark_trial(&ch, &casc, &b_sched, 0.0, &b_cov, &b_p1, seed)?;
    Ok(NoiselessReport {
        dims,
        tau1: mins.tau1,
        tau2: mins.tau2,
        theta_rank: rank.rank,
        required_rank: dims.k * dims.n,
        beta_error,
        v_error,
        benchmark_error: (&b.estimate - &b.truth).norm() / b.truth.norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig::from_toml_str(
            "m = 4\nn = 4\nk = 2\npilot_lengths = [5, 8]\ntrials = 12\nmaster_seed = 3\n\
             irs_bs_gain = 1e-7\nuser_irs_gain = 1e-6\n",
        )
        .unwrap()
    }

    #[test]
    fn seeds_are_distinct() {
        assert_ne!(mix_seed(1, 2), mix_seed(2, 1));
        assert_ne!(channel_seed(0, 0), channel_seed(0, 1));
        assert_ne!(row_seed(0, Scheme::Proposed, 5), row_seed(0, Scheme::Benchmark, 5));
        assert_ne!(row_seed(0, Scheme::Proposed, 5), row_seed(0, Scheme::Proposed, 6));
    }

    #[test]
    fn sweep_shape_and_order() {
        let cfg = small();
        let rows = run_sweep(&cfg, SweepOptions::default()).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0].scheme, Scheme::Proposed);
        assert_eq!((rows[1].tau1, rows[1].tau2), (7, 1));
        assert_eq!(rows[5].scheme, Scheme::BenchmarkBoosted);
        assert!(rows.iter().all(|r| r.nmse_mean > 0.0 && r.nmse_mean.is_finite() && r.wall_time_s == 0.0));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = small();
        let a = run_sweep(&cfg, SweepOptions { threads: Some(1), noiseless: false }).unwrap();
        let b = run_sweep(&cfg, SweepOptions { threads: Some(3), noiseless: false }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_sweep_is_exact() {
        let rows = run_sweep(&small(), SweepOptions { threads: None, noiseless: true }).unwrap();
        assert!(rows.iter().all(|r| r.nmse_mean < 1e-16), "{rows:?}");
    }

    #[test]
    fn csv_layout() {
        let row = ResultRow {
            scheme: Scheme::BenchmarkBoosted,
            total_pilots: 40,
            tau1: 33,
            tau2: 7,
            trials: 10,
            nmse_mean: 0.125,
            nmse_stderr: 0.0,
            seed: 9,
            wall_time_s: 0.0,
        };
        let mut buf = Vec::new();
        write_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "scheme,total_pilots,tau1,tau2,trials,nmse_mean,nmse_stderr,seed,wall_time_s\n\
             benchmark_boosted,40,33,7,10,1.250000000000e-1,0.000000000000e0,9,0.000000000000e0\n"
        );
    }

    #[test]
    fn verify_small_systems() {
        for (m, n, k) in [(4, 4, 2), (2, 4, 2), (8, 4, 3)] {
            let r = verify_noiseless(SystemDims::new(m, n, k).unwrap(), 1).unwrap();
            assert!(r.passes(1e-8), "{r:?}");
        }
    }
}
