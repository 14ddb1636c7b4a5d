use std::path::PathBuf;
use std::process::ExitCode;

use chtorus_cli::error::{EXIT_CONFIG, EXIT_OK};
use chtorus_cli::{parse_config, run_scenario, Mode, Overrides};
use clap::Parser;

/// Simulation and verification of the Euler equations of the
/// Camassa–Holm family on the n-torus.
#[derive(Debug, Parser)]
#[command(name = "chtorus", version)]
struct Cli {
    /// What to run.
    mode: Mode,
    /// JSON scenario file; flags below override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    alpha: Option<u8>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    beta: Option<u8>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    gamma: Option<u8>,
    /// Spatial dimension n.
    #[arg(long, value_parser = clap::value_parser!(usize))]
    dim: Option<usize>,
    /// Grid points per axis.
    #[arg(long, value_name = "N")]
    grid: Option<usize>,
    #[arg(long, value_name = "X")]
    dt: Option<f64>,
    #[arg(long, value_name = "T")]
    tmax: Option<f64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for randomized self-test data.
    #[arg(long)]
    seed: Option<u64>,
    /// Disable 2/3-rule dealiasing.
    #[arg(long)]
    no_dealias: bool,
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return exit(code);
        }
    };
    let overrides = Overrides {
        alpha: cli.alpha,
        beta: cli.beta,
        gamma: cli.gamma,
        dim: cli.dim,
        grid: cli.grid,
        dt: cli.dt,
        t_max: cli.tmax,
        out_dir: cli.out,
        seed: cli.seed,
        no_dealias: cli.no_dealias,
    };
    let result = parse_config(Some(cli.mode), cli.config.as_deref(), &overrides)
        .and_then(|cfg| run_scenario(&cfg));
    match result {
        Ok(outcome) => {
            let s = &outcome.summary;
            eprintln!(
                "{} {}: {} ({:.3} s)",
                s["mode"].as_str().unwrap_or(""),
                s["equation"].as_str().unwrap_or(""),
                s["status"].as_str().unwrap_or(""),
                s["wall_time_s"].as_f64().unwrap_or(0.0)
            );
            exit(outcome.exit_code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit(e.exit_code())
        }
    }
}
