//! Minimum training lengths of the proposed protocol and the user-correlation benchmark.
//!
//! ```text
//! cargo run --example min_durations
//! ```

use irs_chanest::benchmark::benchmark_min_duration;
use irs_chanest::{min_durations, SystemDims};

pub fn main() -> irs_chanest::Result<()> {
    println!("{:>4} {:>4} {:>4} | {:>5} {:>5} {:>7} | {:>9}", "M", "N", "K", "tau1", "tau2", "tau_min", "benchmark");
    for (m, n, k) in [(32, 32, 8), (16, 16, 4), (8, 4, 3), (4, 16, 3), (2, 4, 2), (64, 128, 10)] {
        let dims = SystemDims::new(m, n, k)?;
        let d = min_durations(dims);
        println!(
            "{m:>4} {n:>4} {k:>4} | {:>5} {:>5} {:>7} | {:>9}",
            d.tau1,
            d.tau2,
            d.tau_min,
            benchmark_min_duration(dims)
        );
    }
    Ok(())
}
