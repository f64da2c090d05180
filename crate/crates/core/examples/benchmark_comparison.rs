//! Paired comparison of the proposed protocol and the user-correlation benchmark (with and
//! without the power boost for the typical user) on a small desk-scale system.
//!
//! ```text
//! cargo run --release --example benchmark_comparison
//! ```

use irs_chanest::experiment::{run_sweep, SweepOptions};
use irs_chanest::{Allocation, ExperimentConfig};

fn main() -> irs_chanest::Result<()> {
    let mut cfg = ExperimentConfig::desk_scale();
    cfg.trials = 100;
    cfg.pilot_lengths = vec![19, 29, 39, 49];
    for allocation in [Allocation::ExtraToPhase1, Allocation::ExtraToPhase2] {
        cfg.allocation = allocation;
        println!("{allocation:?}");
        for row in run_sweep(&cfg, SweepOptions::default())? {
            println!(
                "  {:<18} T={:>3} ({:>2}+{:>2})  NMSE {:.4e} +/- {:.1e}",
                row.scheme.name(),
                row.total_pilots,
                row.tau1,
                row.tau2,
                row.nmse_mean,
                row.nmse_stderr
            );
        }
    }
    Ok(())
}
