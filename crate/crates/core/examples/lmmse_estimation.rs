//! LMMSE estimation under receiver noise: the analytic Phase I error against a Monte
//! Carlo estimate, and the end-to-end NMSE as the noise level falls.
//!
//! ```text
//! cargo run --release --example lmmse_estimation
//! ```

use irs_chanest::linalg::trace_re;
use irs_chanest::lmmse::{build_covariances, estimate_lmmse, stack_v_full, Phase1Lmmse};
use irs_chanest::metrics::BatchNmse;
use irs_chanest::protocol::synthesize_observations;
use irs_chanest::recovery::AlphaMatrix;
use irs_chanest::{derive_cascaded, sample_channels, CorrelationSpec, SystemDims, TrainingSchedule};

fn main() -> irs_chanest::Result<()> {
    let dims = SystemDims::new(8, 8, 4)?;
    let spec = CorrelationSpec::unit(dims)?;
    let sched = TrainingSchedule::proposed(dims, 8, 3, 1.0, 0)?;
    let cov = build_covariances(&spec, &sched.phase1_pilot(), sched.pilot_power)?;
    let signal = trace_re(&(sched.phase1_reflections() * &cov.r_alpha * sched.phase1_reflections().adjoint())) / 8.0;

    println!("{:>8} {:>14} {:>14} {:>12}", "SNR dB", "analytic MSE", "empirical MSE", "NMSE(v)");
    for snr_db in [0.0, 10.0, 20.0, 30.0, 40.0] {
        let noise = signal / 10f64.powf(snr_db / 10.0);
        let phase1 = Phase1Lmmse::new(&sched, &cov, noise)?;
        let trials = 2000;
        let mut mse = 0.0;
        let mut nmse = BatchNmse::default();
        for t in 0..trials {
            let ch = sample_channels(dims, &spec, t)?;
            let casc = derive_cascaded(&ch)?;
            let obs = synthesize_observations(&ch, &casc, &sched, noise, true, t + 1_000_000)?;
            let truth = AlphaMatrix::from_channels(&casc, &sched.phase1_pilot(), sched.pilot_power);
            let est = estimate_lmmse(&obs, &sched, &cov, &phase1, None)?;
            mse += (&est.alpha_hat.alpha_bar - &truth.alpha_bar).norm_squared() / dims.m as f64;
            nmse.push_pair(&stack_v_full(&est.v_hat, &est.beta_hat), &casc.v_full_stacked())?;
        }
        println!(
            "{snr_db:>8.1} {:>14.4e} {:>14.4e} {:>12.4e}",
            phase1.error_cov_trace(),
            mse / trials as f64,
            nmse.mean()?
        );
    }
    Ok(())
}
