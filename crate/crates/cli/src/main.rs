use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lqrk_cli::output::{to_json, write_text};
use lqrk_cli::{parse_config, run_scenario, run_verify_suite, CliError, RunOptions};

/// Kernel-based linear-quadratic control solver.
#[derive(Debug, Parser)]
#[command(name = "lqrk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        /// Scenario JSON file.
        config: PathBuf,
        /// Directory for the CSV and JSON artifacts.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Override the number of grid steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Override the random seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the built-in invariant suite.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report as verify.json here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("LQRK_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("LQRK_THREADS: expected a thread count, got {raw:?}")))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("LQRK_THREADS: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, CliError> {
    init_threads()?;
    match cli.command {
        Command::Run {
            config,
            out_dir,
            steps,
            seed,
        } => {
            let text = std::fs::read_to_string(&config).map_err(|source| CliError::Io {
                path: config.clone(),
                source,
            })?;
            let scenario = parse_config(&text)?;
            let name = config
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "scenario".into());
            let report = run_scenario(
                &scenario,
                &RunOptions {
                    name,
                    out_dir,
                    steps,
                    seed,
                },
            )?;
            println!(
                "{}: {} ({})",
                report.diagnostics["task"].as_str().unwrap_or_default(),
                report.diagnostics["status"].as_str().unwrap_or_default(),
                report.diagnostics_path.display()
            );
            Ok(report.exit_code)
        }
        Command::Verify { seed, out_dir } => {
            let report = run_verify_suite(seed)?;
            for case in &report.cases {
                for block in &case.invariants {
                    println!(
                        "{:<16} {:<28} {:>12.4e} <= {:<10.1e} {}",
                        case.name,
                        block.name,
                        block.value,
                        block.tolerance,
                        if block.pass { "pass" } else { "FAIL" }
                    );
                }
            }
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
                    path: dir.clone(),
                    source,
                })?;
                write_text(&dir.join("verify.json"), &to_json(&report.to_value()))?;
            }
            Ok(if report.passed() { 0 } else { 3 })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
