//! Batch experiment runner for the extended-target tracking library.
//!
//! Subcommands:
//! * `sweep-nu` — closed-form vs. root-found predicted dof over a grid of
//!   transition dof and turn-rate variance; emits CSV.
//! * `simulate` — Monte-Carlo runs of a scenario file; emits a per-step CSV
//!   and a JSON summary with aggregates and divergence counts.
//! * `validate` — the oracle suite; prints a pass/fail table plus identity
//!   coverage and writes a machine-readable JSON report.

mod config;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use etrack_core::extent::{CurvatureWeight, NuSolver};
use etrack_core::simharness::{run_monte_carlo, EstimatorConfig};
use etrack_core::sweep::{nu_sweep, SweepGrid};
use etrack_core::validation::{run_filtered, ValidationReport};
use etrack_core::SpdMatrix;

use config::ScenarioFile;
use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "etrack", version, about = "Extended-target tracking experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare the closed-form and root-found predicted degrees of freedom.
    SweepNu(SweepArgs),
    /// Run a Monte-Carlo scenario.
    Simulate(SimulateArgs),
    /// Run the oracle validation suite.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 6.5)]
    v_min: f64,
    #[arg(long, default_value_t = 60.0)]
    v_max: f64,
    #[arg(long, default_value_t = 40)]
    v_steps: usize,
    /// Largest turn-rate standard deviation on the grid, deg/s.
    #[arg(long, default_value_t = 20.0)]
    std_max_deg: f64,
    #[arg(long, default_value_t = 41)]
    std_steps: usize,
    /// Apply the one-half weight to the curvature term of the expectations.
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    taylor_half_factor: Switch,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario description file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Override the number of Monte-Carlo runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (falls back to the ETRACK_THREADS environment
    /// variable, then to the default pool).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the dof solver of state-dependent estimators.
    #[arg(long, value_enum)]
    nu_mode: Option<NuMode>,
    /// Override the curvature weight of state-dependent estimators.
    #[arg(long, value_enum)]
    taylor_half_factor: Option<Switch>,
    /// Zero the measurement noise and initialize from the truth (diagnostic).
    #[arg(long)]
    no_noise: bool,
    /// Run the oracle suite before simulating; abort if any oracle fails.
    #[arg(long)]
    validate: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 20260809)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run only the checks whose name contains this substring.
    #[arg(long)]
    only: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum NuMode {
    Closed,
    Optimal,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SweepNu(args) => cmd_sweep_nu(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn cmd_sweep_nu(args: SweepArgs) -> anyhow::Result<ExitCode> {
    let grid = SweepGrid {
        v_min: args.v_min,
        v_max: args.v_max,
        v_count: args.v_steps,
        turn_rate_std_max: args.std_max_deg.to_radians(),
        std_count: args.std_steps,
        v_bar: SpdMatrix::from_diagonal(&[100.0, 25.0])?,
        turn_rate_mean: 10f64.to_radians(),
        time_step: 1.0,
    };
    let weight = match args.taylor_half_factor {
        Switch::On => CurvatureWeight::Half,
        Switch::Off => CurvatureWeight::Full,
    };
    let rows = nu_sweep(&grid, weight)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let manifest = RunManifest::new(
        command_line(),
        0,
        serde_json::json!({
            "v_min": args.v_min, "v_max": args.v_max, "v_steps": args.v_steps,
            "std_max_deg": args.std_max_deg, "std_steps": args.std_steps,
            "taylor_half_factor": weight == CurvatureWeight::Half,
            "v_bar_diag": [100.0, 25.0], "turn_rate_mean_deg": 10.0, "time_step_s": 1.0,
        }),
    );
    let path = args.out.join("nu_sweep.csv");
    output::write_sweep_csv(&path, &manifest, &rows)?;

    let worst = rows.iter().map(|r| r.rel_err).fold(0.0f64, f64::max);
    println!("wrote {} ({} rows, max rel_err {:.4})", path.display(), rows.len(), worst);
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: SimulateArgs) -> anyhow::Result<ExitCode> {
    let text = std::fs::read_to_string(&args.scenario)
        .with_context(|| format!("reading {}", args.scenario.display()))?;
    let mut cfg = ScenarioFile::parse(&text)?.into_core()?;

    if let Some(runs) = args.runs {
        cfg.n_runs = runs;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if args.no_noise {
        cfg.meas_noise_std = [0.0, 0.0];
        cfg.init = etrack_core::simharness::InitMode::Truth;
    }
    for est in &mut cfg.estimators {
        if let EstimatorConfig::StateDependent { nu_solver, curvature, .. } = est {
            if let Some(mode) = args.nu_mode {
                *nu_solver = match mode {
                    NuMode::Closed => NuSolver::ClosedForm,
                    NuMode::Optimal => NuSolver::Optimal,
                };
            }
            if let Some(half) = args.taylor_half_factor {
                *curvature = match half {
                    Switch::On => CurvatureWeight::Half,
                    Switch::Off => CurvatureWeight::Full,
                };
            }
        }
    }
    cfg.validate()?;

    if args.validate {
        let report = run_filtered(cfg.master_seed, None);
        print_validation(&report);
        if !report.all_passed() {
            eprintln!("oracle suite failed; aborting simulation");
            return Ok(ExitCode::from(1));
        }
    }

    let threads = args.threads.or_else(|| {
        std::env::var("ETRACK_THREADS").ok().and_then(|v| v.parse().ok())
    });
    let report = run_monte_carlo(&cfg, threads)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let manifest = RunManifest::new(
        command_line(),
        cfg.master_seed,
        serde_json::to_value(&cfg).context("serializing resolved scenario")?,
    );
    let csv_path = args.out.join(format!("{}_steps.csv", report.scenario));
    let json_path = args.out.join(format!("{}_summary.json", report.scenario));
    output::write_steps_csv(&csv_path, &manifest, &report)?;
    output::write_summary_json(&json_path, &manifest, &report)?;

    for est in &report.estimators {
        let mean_gw = est.gw.iter().sum::<f64>() / est.gw.len().max(1) as f64;
        println!(
            "{}: mean gw {:.3} m, diverged {}/{} runs",
            est.name, mean_gw, est.diverged_runs, report.n_runs
        );
    }
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: ValidateArgs) -> anyhow::Result<ExitCode> {
    let report = run_filtered(args.seed, args.only.as_deref());
    if report.checks.is_empty() {
        anyhow::bail!("no checks match filter {:?}", args.only);
    }
    print_validation(&report);

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let path = args.out.join("validation_report.json");
    let checks: Vec<serde_json::Value> = report
        .checks
        .iter()
        .map(|c| {
            serde_json::json!({
                "name": c.name,
                "covers": c.covers,
                "passed": c.passed,
                "statistic": if c.statistic.is_finite() { Some(c.statistic) } else { None },
                "threshold": c.threshold,
                "detail": c.detail,
            })
        })
        .collect();
    let coverage: Vec<serde_json::Value> = report
        .coverage()
        .into_iter()
        .map(|(tag, desc, names)| {
            serde_json::json!({ "tag": tag, "claim": desc, "checked_by": names })
        })
        .collect();
    let doc = serde_json::json!({
        "manifest": RunManifest::new(command_line(), args.seed, serde_json::json!({"only": args.only})),
        "all_passed": report.all_passed(),
        "checks": checks,
        "coverage": coverage,
    });
    std::fs::write(&path, serde_json::to_string_pretty(&doc)?)
        .with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());

    Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn print_validation(report: &ValidationReport) {
    println!("{:<36} {:>8}  {:>12}  {:>12}", "check", "status", "statistic", "threshold");
    for c in &report.checks {
        println!(
            "{:<36} {:>8}  {:>12.3e}  {:>12.3e}",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.statistic,
            c.threshold
        );
        if !c.passed {
            println!("    {}", c.detail);
        }
    }
    println!();
    println!("identity coverage:");
    for (tag, desc, names) in report.coverage() {
        println!("  {tag:<3} {desc}");
        println!("      checked by: {}", if names.is_empty() { "-".into() } else { names.join(", ") });
    }
    println!();
    println!(
        "{} of {} checks passed",
        report.checks.iter().filter(|c| c.passed).count(),
        report.checks.len()
    );
}
