use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dampedwave::verifier::run_lemma_catalog;
use dampedwave_cli::config::{preset, RunConfig, SweepConfig, PRESETS};
use dampedwave_cli::run::{execute_run, write_json, RunOptions};
use dampedwave_cli::sweep::{execute_sweep, SweepOptions};
use dampedwave_cli::{report, CliError, Result};

/// Environment variable that takes precedence over `--out`.
const OUT_ENV: &str = "DAMPEDWAVE_OUT";
/// Tolerance of `linear-verify` on the closed-form error.
const LINEAR_TOLERANCE: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "dampedwave",
    version,
    about = "Damped focusing Klein–Gordon simulator and estimate checker"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory (overridden by DAMPEDWAVE_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random initial data and the hypothesis-constant family.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the configured time step.
    #[arg(long)]
    dt_override: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration.
    Run {
        #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// One of: linear-verify, negative-energy, small-data.
        #[arg(long)]
        preset: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a parameter sweep in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the ODE lemma checkers on the manufactured catalog.
    LemmaTest {
        /// Number of randomized trajectories added to the boundary cases.
        #[arg(long, default_value_t = 240)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a damped linear run against its closed form.
    LinearVerify {
        #[command(flatten)]
        common: Common,
    },
    /// Summarise an output directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn out_dir(flag: Option<PathBuf>, configured: Option<PathBuf>) -> Option<PathBuf> {
    std::env::var_os(OUT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or(flag)
        .or(configured)
}

fn apply_common(cfg: &mut RunConfig, common: &Common) {
    if let Some(dt) = common.dt_override {
        cfg.stepper.dt = dt;
    }
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
}

fn run_config(mut cfg: RunConfig, common: Common) -> Result<i32> {
    apply_common(&mut cfg, &common);
    let opts = RunOptions {
        out_dir: out_dir(common.out, cfg.outputs.dir.clone()),
        hyp3_seed: common.seed.unwrap_or(0),
    };
    let art = execute_run(&cfg, &opts)?;
    let s = &art.summary;
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{:?} ({:?}) at t = {:.6} after {} steps",
        s.outcome.kind, s.outcome.reason, s.outcome.t_final, s.outcome.steps
    );
    if let Some(err) = s.error_vs_closed_form {
        println!("error vs closed form: {err:.3e}");
    }
    Ok(s.exit_code())
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run {
            config,
            preset: name,
            common,
        } => {
            let cfg = match (config, name) {
                (Some(path), _) => RunConfig::load(&path)?,
                (None, Some(name)) => preset(&name)?,
                (None, None) => {
                    return Err(CliError::Config(format!(
                        "give --config or --preset ({})",
                        PRESETS.join(", ")
                    )))
                }
            };
            run_config(cfg, common)
        }
        Command::Sweep {
            config,
            threads,
            common,
        } => {
            let mut sweep = SweepConfig::load(&config)?;
            apply_common(&mut sweep.base, &common);
            let opts = SweepOptions {
                out_dir: out_dir(common.out, sweep.base.outputs.dir.clone()),
                threads,
                hyp3_seed: common.seed.unwrap_or(0),
            };
            let family = execute_sweep(&sweep, &opts)?;
            let failed = family.runs.iter().filter(|r| !r.completed).count();
            println!(
                "{} runs, {} failed; all verdicts hold: {}",
                family.runs.len(),
                failed,
                family.rollup.all_hold
            );
            for r in family.runs.iter().filter(|r| !r.completed) {
                eprintln!(
                    "{}: {}",
                    r.id,
                    r.error.as_deref().unwrap_or("unknown error")
                );
            }
            Ok(family.exit_code())
        }
        Command::LemmaTest { count, seed, out } => {
            let report = run_lemma_catalog(count, seed)?;
            if let Some(dir) = out_dir(out, None) {
                std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                write_json(&dir.join("lemma_report.json"), &report)?;
            }
            println!(
                "{} trajectories, {} satisfy their hypothesis, {} conclusion failures, {} misclassified boundary cases",
                report.total, report.hypothesis_satisfied, report.conclusion_failures, report.expectation_mismatches
            );
            for (lemma, counts) in &report.counts {
                println!("  {lemma}: {counts:?}");
            }
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::LinearVerify { common } => {
            let mut cfg = preset("linear-verify")?;
            apply_common(&mut cfg, &common);
            let opts = RunOptions {
                out_dir: out_dir(common.out, None),
                hyp3_seed: 0,
            };
            let art = execute_run(&cfg, &opts)?;
            let err = art.summary.error_vs_closed_form.unwrap_or(f64::INFINITY);
            let ok = err <= LINEAR_TOLERANCE && art.summary.exit_code() == 0;
            println!(
                "error vs closed form at dt = {}: {err:.3e} ({})",
                cfg.stepper.dt,
                if ok { "ok" } else { "FAILED" }
            );
            Ok(if ok { 0 } else { 1 })
        }
        Command::Report { dir } => {
            print!("{}", report::describe(&dir)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
