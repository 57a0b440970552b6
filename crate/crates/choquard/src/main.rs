//! Thin CLI over the experiment runners.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use choquard::experiments;
use choquard::Error;

#[derive(Parser)]
#[command(name = "choquard", version, about = "Nonlocal variational solver experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the whole-space critical constants for (N, mu).
    Constants {
        #[arg(long)]
        dim: u32,
        #[arg(long)]
        mu: f64,
    },
    /// Multistart solve from a config file; writes a run manifest.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Decreasing-eps sweep from a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the oracle self-checks and print their CSV.
    Verify,
    /// Report ms per FFT convolution on square grids.
    Bench {
        /// Comma-separated grid extents, e.g. 16,32,64.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<u32>,
    },
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parameter(_) | Error::TooCoarse { .. } => 2,
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Constants { dim, mu } => {
            print!("{}", experiments::run_constants(dim, mu)?);
            Ok(0)
        }
        Command::Solve { config } => {
            let cfg = experiments::parse_config_file(&config)?;
            let out = experiments::run_solve(&cfg)?;
            println!("run dir: {}", out.run_dir.display());
            println!("m_eps = {}", out.m_eps);
            for (k, class) in out.classes.iter().enumerate() {
                println!(
                    "class {k}: energy={} members={} barycenter={:?} in_omega_r_plus={}",
                    class.representative.energy,
                    class.member_count,
                    class.barycenter,
                    class.in_omega_r_plus
                );
            }
            for v in &out.manifest.verdicts {
                println!("{v}");
            }
            Ok(0)
        }
        Command::Sweep { config } => {
            let cfg = experiments::parse_config_file(&config)?;
            let out = experiments::run_sweep(&cfg)?;
            println!("run dir: {}", out.run_dir.display());
            print!("{}", experiments::sweep_csv(&out.rows));
            Ok(0)
        }
        Command::Verify => {
            let out = experiments::run_verify()?;
            print!("{}", out.to_csv());
            Ok(if out.all_pass() { 0 } else { 1 })
        }
        Command::Bench { sizes } => {
            if sizes.is_empty() {
                return Err(Error::Config("bench needs --sizes".into()));
            }
            print!("{}", experiments::run_bench(&sizes)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
