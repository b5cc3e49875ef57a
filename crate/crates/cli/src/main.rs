//! Command-line front end: solve one scenario, run a sweep, or lint a
//! configuration file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use pass_cr::config::ScenarioFile;
use pass_cr::harness::{run_sweep, scenario_from_file, write_results, ResultRecord, SweepAxis, SweepSpec};
use pass_cr::par::Execution;
use pass_cr::schemes::{solve_scheme, SchemeId};

#[derive(Parser)]
#[command(name = "pass-cr", version, about = "Joint digital/pinching beamforming for PASS underlay cognitive radio")]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a single scenario for one or more schemes.
    Run(RunArgs),
    /// Run a parameter sweep described by a TOML file.
    Sweep(SweepArgs),
    /// Check a scenario or sweep file without solving anything.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct Common {
    /// Override a configuration value, e.g. `--set power_budget_dbm=15`.
    /// Keys are dotted TOML paths; values use TOML syntax.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Schemes to solve (continuous_pass, discrete_pass:Z, uniform_pass, mimo_ula).
    #[arg(long = "scheme", value_name = "SCHEME")]
    schemes: Vec<SchemeId>,
    /// Output CSV path; a JSON sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run on the current thread only.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML file; defaults apply when omitted.
    scenario: Option<PathBuf>,
    /// Seed of the random user drop.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    spec: PathBuf,
    /// Base seed of the sweep.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ValidateArgs {
    file: PathBuf,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn sidecar(csv: &Path) -> PathBuf {
    pass_cr::harness::sidecar_path(csv)
}

fn run(args: RunArgs) -> Result<()> {
    let text = match &args.scenario {
        Some(p) => read(p)?,
        None => String::new(),
    };
    let mut overrides = args.common.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    let mut file = ScenarioFile::from_toml_with_overrides(&text, &overrides)?;
    file.solver.execution = execution(args.common.sequential);
    let (cfg, layout) = scenario_from_file(&file)?;
    let schemes = if args.common.schemes.is_empty() {
        vec![SchemeId::ContinuousPass]
    } else {
        args.common.schemes.clone()
    };

    let mut records = Vec::new();
    let mut reports = Vec::new();
    for scheme in schemes {
        info!("solving {scheme}");
        let rep = solve_scheme(scheme, &cfg, &layout, &file.solver)
            .with_context(|| format!("solving {scheme}"))?;
        println!(
            "{scheme:<18} sum rate {:.6} nats ({:.6} bits)  iterations {:>3}  feasible {}",
            rep.sum_rate(),
            rep.sum_rate() / std::f64::consts::LN_2,
            rep.iterations,
            rep.feasibility.is_feasible()
        );
        for w in &rep.warnings {
            log::warn!("{scheme}: {w}");
        }
        records.push(ResultRecord::from_report(
            file.seed,
            scheme,
            SweepAxis::PowerBudgetDbm,
            file.power_budget_dbm,
            &rep,
        ));
        reports.push(serde_json::json!({ "scheme": scheme, "report": rep }));
    }

    if let Some(out) = &args.common.out {
        if out.exists() {
            std::fs::remove_file(out).with_context(|| format!("replacing {}", out.display()))?;
        }
        write_results(out, &records)?;
        let side = serde_json::json!({ "scenario": file, "layout": layout, "results": reports });
        let path = sidecar(out);
        std::fs::write(&path, serde_json::to_string_pretty(&side)?)
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut overrides = args.common.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("base_seed={seed}"));
    }
    let mut spec = SweepSpec::from_toml_with_overrides(&read(&args.spec)?, &overrides)
        .with_context(|| format!("loading {}", args.spec.display()))?;
    if !args.common.schemes.is_empty() {
        spec.schemes = args.common.schemes.clone();
    }
    let exec = execution(args.common.sequential);
    // Jobs already run concurrently; keep each solve single-threaded.
    spec.scenario.solver.execution = Execution::Sequential;
    let outcome = run_sweep(&spec, exec, args.common.out.as_deref())?;
    let failed = outcome.records.iter().filter(|r| r.failed).count();
    for (scheme, points) in pass_cr::harness::mean_sum_rates(&outcome.records) {
        let line: Vec<String> = points.iter().map(|(x, r)| format!("{x}: {r:.4}")).collect();
        println!("{scheme:<18} {}", line.join("  "));
    }
    if let Some(out) = &args.common.out {
        println!("wrote {} ({} rows)", out.display(), outcome.records.len());
    }
    if failed > 0 {
        bail!("{failed} of {} jobs failed", outcome.records.len());
    }
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<()> {
    let text = read(&args.file)?;
    let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", args.file.display()))?;
    if table.contains_key("axis") {
        let spec = SweepSpec::from_toml_with_overrides(&text, &args.overrides)?;
        println!(
            "{}: sweep over {} with {} values, {} schemes, {} seeds ({} jobs)",
            args.file.display(),
            spec.axis,
            spec.values.len(),
            spec.schemes.len(),
            spec.num_seeds,
            spec.jobs().len()
        );
    } else {
        let file = ScenarioFile::from_toml_with_overrides(&text, &args.overrides)?;
        let (cfg, _) = scenario_from_file(&file)?;
        println!(
            "{}: scenario N={} M={} K={} P={} ok",
            args.file.display(),
            cfg.num_waveguides,
            cfg.pas_per_waveguide,
            cfg.num_secondary,
            cfg.num_primary
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).init();
    let result = match cli.cmd {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
