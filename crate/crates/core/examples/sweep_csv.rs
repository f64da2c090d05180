//! Runs the sweep described by a TOML config file and writes the CSV table, the same
//! work as `irs-est sweep`.
//!
//! ```text
//! cargo run --release --example sweep_csv -- crates/core/examples/configs/quick.toml out.csv
//! ```

use irs_chanest::experiment::{run_sweep, write_csv, write_csv_file, SweepOptions};
use irs_chanest::ExperimentConfig;

fn main() -> irs_chanest::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/quick.toml").to_string());
    let cfg = ExperimentConfig::from_file(&config)?;
    let rows = run_sweep(&cfg, SweepOptions::default())?;
    match args.next() {
        Some(out) => write_csv_file(&rows, out)?,
        None => write_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(())
}
