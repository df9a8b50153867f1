//! `seqcv` — sequential change-point monitoring with cross-validated
//! kernel prediction smoothers, simulators for the scaled-objective limit
//! processes, random time-horizon stopping, and a Monte Carlo verification
//! harness.
//!
//! Experiments are declared in a TOML config (see the repository README
//! for the schema); flags override the corresponding config keys. Output
//! is CSV with a header row; `--json` adds a JSON mirror.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use seqcv_core::config::{load_config_with, parse_config_with, ExperimentConfig, Overrides};
use seqcv_core::harness::{anscombe_table, run_mc, McOutput, McTask};
use seqcv_core::verify;

#[derive(Parser)]
#[command(
    name = "seqcv",
    version,
    about = "Sequential change-point monitoring with cross-validated kernel prediction smoothers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; sections [model], [errors], [kernel],
    /// [monitor], [cv], [limit], [anscombe], [run]
    #[arg(long)]
    config: Option<PathBuf>,

    /// Base RNG seed (replicate r uses stream r of this seed)
    #[arg(long)]
    seed: Option<u64>,

    /// Number of independent replicates
    #[arg(long)]
    reps: Option<u64>,

    /// Output CSV path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also emit a JSON mirror (next to --out, or to stdout)
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate monitored sample paths (replicate, n, y, eps)
    Generate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the one-sided first-exit detector per replicate
    Monitor {
        #[command(flatten)]
        run: RunArgs,
        /// "upper" or "lower"
        #[arg(long)]
        direction: Option<String>,
        /// Signal threshold c
        #[arg(long)]
        threshold: Option<f64>,
        /// Fixed bandwidth parameter (h = T/xi)
        #[arg(long)]
        xi: Option<f64>,
        /// Use the cross-validated step-function bandwidth instead of --xi
        #[arg(long)]
        cv_bandwidth: bool,
    },
    /// Sequential CV decomposition over the (s, xi) grids
    Cv {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated xi grid, e.g. 5,10,20
        #[arg(long, value_delimiter = ',')]
        xi_grid: Option<Vec<f64>>,
        /// Comma-separated bandwidth checkpoints in [s0, 1]
        #[arg(long, value_delimiter = ',')]
        checkpoints: Option<Vec<f64>>,
    },
    /// Simulate limit objects (B, L, Q, argmin)
    Limit {
        #[command(flatten)]
        run: RunArgs,
        /// Which object: B | L | Q | argmin
        #[arg(long, default_value = "L")]
        what: String,
        /// Number of uniform grid cells on [0, 1]
        #[arg(long)]
        grid_points: Option<usize>,
    },
    /// Stopping-time draws tau_a and ratio diagnostics
    Anscombe {
        #[command(flatten)]
        run: RunArgs,
        /// Stopping family: first_passage | dispersion | risk_limit | random_scale
        #[arg(long)]
        family: Option<String>,
        /// Comma-separated levels a
        #[arg(long, value_delimiter = ',')]
        a_values: Option<Vec<f64>>,
    },
    /// Run the acceptance suite; exits nonzero on any failed criterion
    Verify {
        /// Comma-separated criterion ids to run (default: all)
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<u32>>,
    },
}

fn load(run: &RunArgs, over: Overrides) -> Result<ExperimentConfig, seqcv_core::Error> {
    let over = Overrides {
        seed: run.seed,
        reps: run.reps,
        out: run.out.as_ref().map(|p| p.display().to_string()),
        json: if run.json { Some(true) } else { None },
        ..over
    };
    match &run.config {
        Some(path) => load_config_with(path, &over),
        None => parse_config_with("", &over),
    }
}

fn emit(cfg: &ExperimentConfig, out: &McOutput) -> Result<(), seqcv_core::Error> {
    for (key, value) in &out.metadata {
        if key == "warning" {
            eprintln!("warning: {value}");
        }
    }
    if !out.failures.is_empty() {
        eprintln!(
            "warning: {} of {} replicates failed; first: replicate {} ({})",
            out.failures.len(),
            out.reps,
            out.failures[0].0,
            out.failures[0].1
        );
    }
    match &cfg.run.out {
        Some(path) => {
            std::fs::write(path, out.to_csv())?;
            eprintln!("wrote {} rows to {path}", out.rows.len());
            if cfg.run.json {
                let jpath = format!("{path}.json");
                std::fs::write(&jpath, out.to_json().to_string())?;
                eprintln!("wrote JSON mirror to {jpath}");
            }
        }
        None => {
            if cfg.run.json {
                println!("{}", out.to_json());
            } else {
                print!("{}", out.to_csv());
            }
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool, seqcv_core::Error> {
    match cli.command {
        Command::Generate { run } => {
            let cfg = load(&run, Overrides::default())?;
            let out = run_mc(&cfg, McTask::Generate)?;
            emit(&cfg, &out)?;
        }
        Command::Monitor {
            run,
            direction,
            threshold,
            xi,
            cv_bandwidth,
        } => {
            let over = Overrides {
                monitor_direction: direction,
                monitor_threshold: threshold,
                monitor_xi: xi,
                monitor_cv_bandwidth: if cv_bandwidth { Some(true) } else { None },
                ..Overrides::default()
            };
            let cfg = load(&run, over)?;
            let out = run_mc(&cfg, McTask::Detector)?;
            emit(&cfg, &out)?;
        }
        Command::Cv {
            run,
            xi_grid,
            checkpoints,
        } => {
            let over = Overrides {
                cv_xi_grid: xi_grid,
                cv_checkpoints: checkpoints,
                ..Overrides::default()
            };
            let cfg = load(&run, over)?;
            let out = run_mc(&cfg, McTask::FiniteTCv)?;
            emit(&cfg, &out)?;
        }
        Command::Limit {
            run,
            what,
            grid_points,
        } => {
            let task = match what.as_str() {
                "B" | "b" => McTask::LimitB,
                "L" | "l" => McTask::LimitL,
                "Q" | "q" => McTask::LimitQ,
                "argmin" => McTask::LimitArgmin,
                other => {
                    return Err(seqcv_core::Error::Config(format!(
                        "unknown limit object {other:?} (B | L | Q | argmin)"
                    )))
                }
            };
            let over = Overrides {
                limit_grid_points: grid_points,
                ..Overrides::default()
            };
            let cfg = load(&run, over)?;
            let out = run_mc(&cfg, task)?;
            emit(&cfg, &out)?;
        }
        Command::Anscombe {
            run,
            family,
            a_values,
        } => {
            let over = Overrides {
                anscombe_family: family,
                anscombe_a_values: a_values,
                ..Overrides::default()
            };
            let cfg = load(&run, over)?;
            let out = anscombe_table(&cfg)?;
            emit(&cfg, &out)?;
        }
        Command::Verify { only } => {
            let reports = verify::run_all(only.as_deref());
            let mut all_passed = true;
            for r in &reports {
                println!("{}", r.line());
                all_passed &= r.passed;
            }
            let passed = reports.iter().filter(|r| r.passed).count();
            println!("{passed}/{} criteria passed", reports.len());
            return Ok(all_passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
