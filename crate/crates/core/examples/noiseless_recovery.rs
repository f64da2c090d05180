//! Exact recovery without receiver noise at the minimum training length, in both the
//! many-antenna (M >= N) and few-antenna (M < N) regimes. Also writes the certified
//! schedule of the second case to text files.
//!
//! ```text
//! cargo run --example noiseless_recovery
//! ```

use irs_chanest::lmmse::stack_v_full;
use irs_chanest::matrix_io;
use irs_chanest::protocol::synthesize_observations;
use irs_chanest::recovery::{build_theta, rank_check, recover_noiseless};
use irs_chanest::{derive_cascaded, min_durations, sample_channels, CorrelationSpec, SystemDims, TrainingSchedule};

pub fn main() -> irs_chanest::Result<()> {
    for (m, n, k) in [(8, 4, 3), (16, 16, 8), (2, 4, 2), (4, 16, 3)] {
        let dims = SystemDims::new(m, n, k)?;
        let spec = CorrelationSpec::unit(dims)?;
        let ch = sample_channels(dims, &spec, 11)?;
        let casc = derive_cascaded(&ch)?;
        let d = min_durations(dims);
        let sched = TrainingSchedule::proposed(dims, d.tau1, d.tau2, 1.0, 11)?;
        let obs = synthesize_observations(&ch, &casc, &sched, 0.0, true, 11)?;
        let est = recover_noiseless(&obs, &sched)?;
        let rank = rank_check(&build_theta(&est.beta, &sched)?);
        let v = casc.v_full_stacked();
        let err = (stack_v_full(&est.v_typical, &est.beta) - &v).norm() / v.norm();
        println!(
            "M={m:>2} N={n:>2} K={k} tau=({}, {}) rank {}/{} relative error {err:.2e}",
            d.tau1,
            d.tau2,
            rank.rank,
            k * n
        );
        if m < n && k == 3 {
            let dir = std::env::temp_dir();
            let (p, r) = (dir.join("irs_pilots.txt"), dir.join("irs_reflections.txt"));
            sched.write(&p, &r)?;
            let back = matrix_io::read_matrix(&r)?;
            println!("  schedule written to {} ({}x{})", r.display(), back.nrows(), back.ncols());
        }
    }
    Ok(())
}
