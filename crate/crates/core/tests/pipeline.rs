//! End-to-end checks across modules.

use irs_chanest::benchmark::{run_benchmark_trial, BenchmarkCovariances, BenchmarkPhase1, BenchmarkSchedule};
use irs_chanest::experiment::{channel_seed, run_proposed_trial, run_sweep, SweepOptions};
use irs_chanest::lmmse::{build_covariances, Phase1Lmmse};
use irs_chanest::metrics::BatchNmse;
use irs_chanest::{derive_cascaded, sample_channels, Allocation, CorrelationSpec, ExperimentConfig, SystemDims, TrainingSchedule};

#[test]
fn halving_noise_lowers_nmse() {
    let d = SystemDims::new(6, 6, 3).unwrap();
    let spec = CorrelationSpec::unit(d).unwrap();
    let sched = TrainingSchedule::proposed(d, 6, 4, 1.0, 0).unwrap();
    let cov = build_covariances(&spec, &sched.phase1_pilot(), 1.0).unwrap();
    let mut results = Vec::new();
    for noise in [0.2, 0.1] {
        let phase1 = Phase1Lmmse::new(&sched, &cov, noise).unwrap();
        let mut b = BatchNmse::default();
        for t in 0..300 {
            let ch = sample_channels(d, &spec, channel_seed(1, t)).unwrap();
            let casc = derive_cascaded(&ch).unwrap();
            let r = run_proposed_trial(&ch, &casc, &sched, noise, &cov, Some(&phase1), t as u64).unwrap();
            b.push_pair(&r.estimate, &r.truth).unwrap();
        }
        results.push(b.mean().unwrap());
    }
    assert!(results[1] < results[0], "{results:?}");
}

#[test]
fn benchmark_noise_monotone() {
    let d = SystemDims::new(6, 6, 3).unwrap();
    let spec = CorrelationSpec::unit(d).unwrap();
    let cov = BenchmarkCovariances::new(&spec);
    let sched = BenchmarkSchedule::build(d, 8, 2, 1.0, 1.0, 0).unwrap();
    let mut results = Vec::new();
    for noise in [0.2, 0.1] {
        let phase1 = BenchmarkPhase1::new(&sched, &cov, noise).unwrap();
        let mut b = BatchNmse::default();
        for t in 0..300 {
            let ch = sample_channels(d, &spec, channel_seed(1, t)).unwrap();
            let casc = derive_cascaded(&ch).unwrap();
            let r = run_benchmark_trial(&ch, &casc, &sched, noise, &cov, &phase1, t as u64).unwrap();
            b.push_pair(&r.estimate, &r.truth).unwrap();
        }
        results.push(b.mean().unwrap());
    }
    assert!(results[1] < results[0], "{results:?}");
}

#[test]
fn extra_phase1_pilots_help_the_benchmark_in_phase1() {
    let mut cfg = ExperimentConfig::from_toml_str(
        "m = 6\nn = 6\nk = 3\nirs_bs_gain = 1e-7\nuser_irs_gain = 1e-5\npilot_lengths = [8, 20]\n\
         schemes = [\"benchmark\"]\ntrials = 200\n",
    )
    .unwrap();
    cfg.allocation = Allocation::ExtraToPhase1;
    let rows = run_sweep(&cfg, SweepOptions::default()).unwrap();
    assert!(rows[1].nmse_mean < rows[0].nmse_mean, "{rows:?}");
}

#[test]
fn sweep_is_reproducible() {
    let cfg = ExperimentConfig::from_toml_str(
        "m = 3\nn = 5\nk = 2\nirs_bs_gain = 1e-7\nuser_irs_gain = 1e-5\npilot_lengths = [7, 9]\ntrials = 10\nmaster_seed = 5\n",
    )
    .unwrap();
    let a = run_sweep(&cfg, SweepOptions::default()).unwrap();
    let b = run_sweep(&cfg, SweepOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn shipped_configs_parse() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs");
    let desk = ExperimentConfig::from_file(format!("{dir}/desk.toml")).unwrap();
    assert_eq!(
        desk,
        ExperimentConfig {
            allocation: Allocation::ExtraToPhase2,
            ..ExperimentConfig::desk_scale()
        }
    );
    let full = ExperimentConfig::from_file(format!("{dir}/full_scale.toml")).unwrap();
    assert_eq!(full, ExperimentConfig::full_scale());
    ExperimentConfig::from_file(format!("{dir}/quick.toml")).unwrap();
}
