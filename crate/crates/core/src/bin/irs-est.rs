use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use irs_chanest::benchmark::benchmark_min_duration;
use irs_chanest::channel_model::SystemDims;
use irs_chanest::config::ExperimentConfig;
use irs_chanest::experiment::{run_sweep, verify_noiseless, write_csv, write_csv_file, SweepOptions};
use irs_chanest::protocol::min_durations;

#[derive(Parser)]
#[command(version, about = "Cascaded channel estimation for IRS-assisted multi-user uplink")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the minimum pilot durations of both schemes.
    MinDuration {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
    },
    /// Check exact noiseless recovery at the minimum durations.
    VerifyNoiseless {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a Monte Carlo NMSE sweep and write CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        /// Zero noise with least-squares estimators.
        #[arg(long)]
        noiseless_debug: bool,
    },
}

const NOISELESS_TOL: f64 = 1e-8;

fn run(cli: Cli) -> irs_chanest::Result<bool> {
    match cli.command {
        Command::MinDuration { m, n, k } => {
            let dims = SystemDims::new(m, n, k)?;
            let d = min_durations(dims);
            println!("tau1 = {}", d.tau1);
            println!("tau2 = {}", d.tau2);
            println!("tau_min = {}", d.tau_min);
            println!("benchmark_tau_min = {}", benchmark_min_duration(dims));
            Ok(true)
        }
        Command::VerifyNoiseless { m, n, k, seed } => {
            let r = verify_noiseless(SystemDims::new(m, n, k)?, seed)?;
            println!("tau1 = {}, tau2 = {}", r.tau1, r.tau2);
            println!("rank(Theta) = {} (need {})", r.theta_rank, r.required_rank);
            println!("beta max relative error = {:.3e}", r.beta_error);
            println!("v relative error = {:.3e}", r.v_error);
            println!("benchmark relative error = {:.3e}", r.benchmark_error);
            let ok = r.passes(NOISELESS_TOL);
            println!("{}", if ok { "PASS" } else { "FAIL" });
            Ok(ok)
        }
        Command::Sweep {
            config,
            out,
            threads,
            noiseless_debug,
        } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let rows = run_sweep(
                &cfg,
                SweepOptions {
                    threads,
                    noiseless: noiseless_debug,
                },
            )?;
            match out {
                Some(path) => write_csv_file(&rows, path)?,
                None => write_csv(&rows, std::io::stdout().lock())?,
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
