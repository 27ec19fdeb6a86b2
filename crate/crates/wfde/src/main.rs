//! Experiment driver for the weighted fast diffusion laboratory.
//!
//! Exit codes: 0 all checks pass, 1 at least one check failed,
//! 2 configuration or runtime error.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use wfde::config::{parse_config_file, parse_config_str, ExperimentConfig, OutputFormat};
use wfde::diagnostics::{self, Region};
use wfde::harnack::{self, SandwichMode};
use wfde::runner;
use wfde::solver;

#[derive(Parser)]
#[command(name = "wfde", version, about = "Weighted fast diffusion equation laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Experiment config file (flat key = value format).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fan out over comma-separated values: KEY=v1,v2,...
    #[arg(long)]
    sweep: Option<String>,
    /// Artifact format: csv | json | both.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Cauchy problem and run the configured checks.
    Simulate(RunArgs),
    /// Classify a field CSV into the tail space X or its complement.
    Classify {
        /// Input CSV with columns (r, value) and `#` header keys.
        input: PathBuf,
        /// Optional config supplying the regime when the CSV has none.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run and verify the global Harnack sandwich; print the margins.
    Ghp(RunArgs),
    /// Run and fit the convergence rate of the relative error.
    Rates(RunArgs),
    /// Run the entropy / Fisher diagnostics in self-similar variables.
    Entropy(RunArgs),
    /// Evaluate closed-form profiles to CSV (no solver).
    Profiles(RunArgs),
}

fn apply_format(cfg: &mut ExperimentConfig, fmt: &Option<String>) -> Result<(), String> {
    if let Some(f) = fmt {
        cfg.format = match f.as_str() {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            "both" => OutputFormat::Both,
            other => return Err(format!("unknown format `{other}`")),
        };
    }
    Ok(())
}

/// Expand `--sweep KEY=v1,v2` into (label, config) pairs.
fn expand_sweep(
    args: &RunArgs,
) -> Result<Vec<(String, ExperimentConfig)>, Box<dyn std::error::Error>> {
    let source = std::fs::read_to_string(&args.config)?;
    let base = parse_config_str(&source)?;
    let mut out = Vec::new();
    match &args.sweep {
        None => out.push((String::new(), base)),
        Some(spec) => {
            let (key, values) = spec
                .split_once('=')
                .ok_or_else(|| format!("bad --sweep `{spec}`: expected KEY=v1,v2,..."))?;
            for v in values.split(',') {
                let v = v.trim();
                let cfg = base.with_override(&source, key.trim(), v)?;
                out.push((format!("sweep_{}_{}", key.trim().replace('.', "_"), v), cfg));
            }
        }
    }
    for (_, cfg) in out.iter_mut() {
        apply_format(cfg, &args.format)?;
    }
    Ok(out)
}

fn out_dir_for(args: &RunArgs, label: &str, cfg: &ExperimentConfig) -> PathBuf {
    let base = args.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    if label.is_empty() {
        base
    } else {
        base.join(label)
    }
}

/// Run the fanned-out configs (workers for sweeps) and fold the verdicts.
fn run_all(
    args: &RunArgs,
    per_run: impl Fn(&ExperimentConfig, &PathBuf) -> Result<bool, Box<dyn std::error::Error>>
        + Send
        + Sync,
) -> Result<bool, Box<dyn std::error::Error>> {
    let jobs = expand_sweep(args)?;
    if jobs.len() == 1 {
        let (label, cfg) = &jobs[0];
        let dir = out_dir_for(args, label, cfg);
        return per_run(cfg, &dir);
    }
    let results: Vec<Result<bool, String>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (label, cfg) in &jobs {
            let dir = out_dir_for(args, label, cfg);
            let per_run = &per_run;
            handles.push(scope.spawn(move || per_run(cfg, &dir).map_err(|e| e.to_string())));
        }
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut all = true;
    for r in results {
        all &= r.map_err(|e| -> Box<dyn std::error::Error> { e.into() })?;
    }
    Ok(all)
}

fn cmd_simulate(args: &RunArgs) -> Result<bool, Box<dyn std::error::Error>> {
    run_all(args, |cfg, dir| {
        let summary = runner::run(cfg, Some(dir))?;
        for c in &summary.checks {
            println!("{:<22} {}", c.name, if c.verdict { "pass" } else { "FAIL" });
        }
        for w in &summary.warnings {
            eprintln!("warning: {w}");
        }
        println!(
            "summary: {} ({} checks) -> {}",
            if summary.all_pass { "pass" } else { "FAIL" },
            summary.checks.len(),
            dir.join("summary.json").display()
        );
        Ok(summary.all_pass)
    })
}

fn cmd_ghp(args: &RunArgs) -> Result<bool, Box<dyn std::error::Error>> {
    run_all(args, |cfg, dir| {
        let grid =
            solver::build_grid(&cfg.params, cfg.grid.r_min, cfg.grid.r_max, cfg.grid.cells_per_decade)?;
        let (u0, _) = runner::initial_field(cfg, &grid)?;
        let opts = solver::SolveOptions { dt_rel_cap: cfg.time.dt_rel_cap, ..Default::default() };
        let traj = solver::solve(&grid, &u0, &cfg.output_times(), &opts)?;
        let rep = harnack::verify_sandwich(&traj, SandwichMode::Empirical, None)?;
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("ghp_report.json"), serde_json::to_string_pretty(&rep)?)?;
        println!("{:>10}  {:>14}  {:>14}  verdict", "t", "lower-margin", "upper-margin");
        for (t, lo, hi) in runner::ghp_table(&traj, &rep) {
            let ok = lo >= -1e-9 && hi >= -1e-9;
            println!("{t:>10.4}  {lo:>14.6e}  {hi:>14.6e}  {}", if ok { "pass" } else { "FAIL" });
        }
        println!(
            "sandwich: {}  lower={:?}  upper={:?}  violations: {}",
            if rep.verdict { "pass" } else { "FAIL" },
            rep.lower,
            rep.upper,
            rep.violations.len()
        );
        Ok(rep.verdict)
    })
}

fn cmd_rates(args: &RunArgs) -> Result<bool, Box<dyn std::error::Error>> {
    run_all(args, |cfg, dir| {
        let grid =
            solver::build_grid(&cfg.params, cfg.grid.r_min, cfg.grid.r_max, cfg.grid.cells_per_decade)?;
        let (u0, _) = runner::initial_field(cfg, &grid)?;
        let opts = solver::SolveOptions { dt_rel_cap: cfg.time.dt_rel_cap, ..Default::default() };
        let traj = solver::solve(&grid, &u0, &cfg.output_times(), &opts)?;
        let series = diagnostics::relative_error(&traj, Region::Whole)?;
        let finite: Vec<(f64, f64)> =
            series.iter().filter_map(|(t, v)| v.finite().map(|x| (*t, x))).collect();
        let t_hi = finite.last().map(|x| x.0).unwrap_or(1.0);
        let window = cfg.options.rates_window.unwrap_or((t_hi / 10.0, t_hi));
        let fit = diagnostics::rate_fit(&finite, window)?;
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("rate_fit.json"), serde_json::to_string_pretty(&fit)?)?;
        let (lo, hi) = cfg.options.rates_slope_range;
        let ok = fit.slope >= lo && fit.slope <= hi;
        println!(
            "rate fit on [{:.3}, {:.3}]: slope = {:.4} (expected [{lo}, {hi}]), residual = {:.2e} -> {}",
            window.0,
            window.1,
            fit.slope,
            fit.residual,
            if ok { "pass" } else { "FAIL" }
        );
        Ok(ok)
    })
}

fn cmd_entropy(args: &RunArgs) -> Result<bool, Box<dyn std::error::Error>> {
    run_all(args, |cfg, dir| {
        let mut cfg = cfg.clone();
        if !cfg.checks.iter().any(|c| c == "entropy") {
            cfg.checks.push("entropy".into());
        }
        let summary = runner::run(&cfg, Some(dir))?;
        let entropy = summary.checks.iter().find(|c| c.name == "entropy").unwrap();
        println!(
            "entropy: {}\n{}",
            if entropy.verdict { "pass" } else { "FAIL" },
            serde_json::to_string_pretty(&entropy.details)?
        );
        Ok(summary.all_pass)
    })
}

fn cmd_profiles(args: &RunArgs) -> Result<bool, Box<dyn std::error::Error>> {
    run_all(args, |cfg, dir| {
        runner::export_profiles(cfg, Some(dir))?;
        println!("profiles written to {}", dir.display());
        Ok(true)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome: Result<bool, Box<dyn std::error::Error>> = match &cli.cmd {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Ghp(args) => cmd_ghp(args),
        Command::Rates(args) => cmd_rates(args),
        Command::Entropy(args) => cmd_entropy(args),
        Command::Profiles(args) => cmd_profiles(args),
        Command::Classify { input, config, out } => (|| {
            let params = match config {
                Some(path) => Some(parse_config_file(path)?.params),
                None => None,
            };
            let report = runner::classify_file(input, params, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        })(),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
