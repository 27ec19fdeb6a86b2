//! Reproducible experiment runner: build the grid and initial datum from
//! a config, evolve, dispatch verification checks, persist artifacts.
//!
//! Every JSON report embeds the resolved config and the crate version;
//! outputs are byte-reproducible for identical configs, modulo the
//! `generated_at_unix` field of the summary.

use crate::config::{ExperimentConfig, InitialConfig, OutputFormat};
use crate::diagnostics::{self, Region};
use crate::field::RadialField;
use crate::harnack::{self, KappaConstants, SandwichMode};
use crate::params::ParameterSet;
use crate::profiles::{self, BarenblattSpec};
use crate::solver::{self, RadialGrid, SolveOptions, Trajectory};
use crate::tailspace;
use serde::Serialize;
use serde_json::json;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("solver error: {0}")]
    Solver(#[from] crate::solver::SolverError),
    #[error("profile error: {0}")]
    Profile(#[from] crate::profiles::ProfileError),
    #[error("diagnostics error: {0}")]
    Diagnostics(#[from] crate::diagnostics::DiagnosticsError),
    #[error("harnack error: {0}")]
    Harnack(#[from] crate::harnack::HarnackError),
    #[error("tail error: {0}")]
    Tail(#[from] crate::tailspace::TailError),
    #[error("field error: {0}")]
    Field(#[from] crate::field::FieldError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub verdict: bool,
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub version: String,
    pub config: serde_json::Value,
    pub checks: Vec<CheckReport>,
    pub all_pass: bool,
    pub warnings: Vec<String>,
    pub trajectory_dir: Option<String>,
    pub generated_at_unix: u64,
}

/// Build the initial datum on the grid centers; returns the field and
/// the analytic mass when the profile defines one.
pub fn initial_field(
    cfg: &ExperimentConfig,
    grid: &RadialGrid,
) -> Result<(RadialField, Option<f64>), RunError> {
    let p = cfg.params;
    match &cfg.initial {
        InitialConfig::Barenblatt { mass, t_shift } => {
            let m = mass.unwrap_or_else(|| profiles::reference_mass(&p));
            let spec = BarenblattSpec::new(p, m, *t_shift)?;
            Ok((grid.field_from_fn(|r| spec.eval(0.0, r).unwrap())?, Some(m)))
        }
        InitialConfig::Indicator { radius } => {
            let r0 = *radius;
            let f = grid.field_from_fn(|r| if r <= r0 { 1.0 } else { 0.0 })?;
            Ok((f, None))
        }
        InitialConfig::W0 => {
            let f = grid.field_from_fn(|r| profiles::w0_profile(&p, r).unwrap())?;
            let mass = w0_mass(&p);
            Ok((f, Some(mass)))
        }
        InitialConfig::Subsolution { a, b, epsilon, t0 } => {
            let spec = profiles::SubsolutionSpec::new(p, *a, *b, *epsilon, *t0)?;
            Ok((grid.field_from_fn(|r| spec.eval(0.0, r))?, None))
        }
        InitialConfig::Supersolution { e, f, epsilon, t0, h } => {
            let h = h.unwrap_or_else(|| {
                profiles::minimal_supersolution_drift(&p, *e, *f, *epsilon).max(1.0)
            });
            let spec = profiles::SupersolutionSpec::new(p, *e, *f, *epsilon, *t0, h)?;
            Ok((grid.field_from_fn(|r| spec.eval(0.0, r))?, None))
        }
        InitialConfig::PerturbedBarenblatt { mass, t_shift, amplitude, bump_center, bump_width } => {
            let m = mass.unwrap_or_else(|| profiles::reference_mass(&p));
            let spec = BarenblattSpec::new(p, m, *t_shift)?;
            let (a, c, w) = (*amplitude, *bump_center, *bump_width);
            let f = grid.field_from_fn(|r| {
                let bump = a * (-((r / c).ln() / w).powi(2)).exp();
                spec.eval(0.0, r).unwrap() * (1.0 + bump)
            })?;
            Ok((f, None))
        }
        InitialConfig::SlowDecay { epsilon, delta } => {
            let (f, eps) = slow_decay_field(&p, grid, *epsilon, *delta)?;
            let _ = eps;
            Ok((f, Some(1.0)))
        }
    }
}

/// Weighted mass of w₀ via quadrature.
pub fn w0_mass(p: &ParameterSet) -> f64 {
    let f = |r: f64| profiles::w0_profile(p, r).unwrap();
    crate::quad::weighted_radial_integral(&f, 0.0, 1.0, p.dim_gamma(), p.sphere_area(), 1e-9)
        + p.sphere_area()
            * crate::quad::adaptive_simpson_to_inf(
                &|r: f64| f(r) * r.powf(p.dim_gamma() - 1.0),
                1.0,
                1e-14,
                1e-9,
            )
}

/// ε admissible for a target rate gap δ in the non-weighted regime:
/// the left-limit construction needs ε ∈ (0, 2/(1-m)-d) with
/// δ > (2ϑ/(ε(1-m))) (2/(1-m)-d-ε); we take the midpoint between the
/// smallest admissible ε and the upper endpoint.
pub fn no_rates_epsilon(p: &ParameterSet, delta: f64) -> Result<f64, RunError> {
    if p.gamma() != 0.0 || p.beta() != 0.0 {
        return Err(RunError::Diagnostics(diagnostics::DiagnosticsError::Regime(
            "the no-rates construction is set in the non-weighted regime".into(),
        )));
    }
    let one_m = 1.0 - p.m();
    let e_max = 2.0 / one_m - p.d() as f64;
    if e_max <= 0.0 {
        return Err(RunError::Diagnostics(diagnostics::DiagnosticsError::Regime(
            "need 2/(1-m) > d".into(),
        )));
    }
    let k = 2.0 * p.theta() / one_m;
    let e_min = k * e_max / (delta + k);
    Ok(0.5 * (e_min + e_max))
}

/// Slow-decay datum A/(1+B|x|²)^α with unit weighted mass (B = 1 and A
/// from the Beta integral), α = 1/(1-m) - ε/2.
pub fn slow_decay_field(
    p: &ParameterSet,
    grid: &RadialGrid,
    epsilon: Option<f64>,
    delta: Option<f64>,
) -> Result<(RadialField, f64), RunError> {
    let eps = match (epsilon, delta) {
        (Some(e), _) => e,
        (None, Some(d)) => no_rates_epsilon(p, d)?,
        (None, None) => no_rates_epsilon(p, 0.5)?,
    };
    let alpha = 1.0 / (1.0 - p.m()) - eps / 2.0;
    let d = p.d() as f64;
    use statrs::function::gamma::gamma;
    let integral = p.sphere_area() * gamma(d / 2.0) * gamma(alpha - d / 2.0) / (2.0 * gamma(alpha));
    let a = 1.0 / integral;
    let f = grid.field_from_fn(|r| a * (1.0 + r * r).powf(-alpha))?;
    Ok((f, eps))
}

fn series_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<(), RunError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{header}")?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

struct RunContext<'a> {
    cfg: &'a ExperimentConfig,
    grid: &'a RadialGrid,
    traj: &'a Trajectory,
    analytic_mass: Option<f64>,
    kappa: KappaConstants,
    out_dir: PathBuf,
}

impl<'a> RunContext<'a> {
    fn grid_mass(&self) -> f64 {
        self.traj.states[0].l1_gamma().unwrap_or(f64::NAN)
    }
    fn reference_mass_for_bounds(&self) -> f64 {
        self.analytic_mass.unwrap_or_else(|| self.grid_mass())
    }
}

fn check_mass(ctx: &RunContext) -> CheckReport {
    let m0 = ctx.traj.audits[0].weighted_mass;
    let mut drift = 0.0_f64;
    for a in &ctx.traj.audits {
        drift = drift.max((a.weighted_mass - m0).abs() / m0);
    }
    CheckReport {
        name: "mass".into(),
        verdict: drift <= ctx.cfg.options.mass_rtol,
        details: json!({ "initial_mass": m0, "max_relative_drift": drift, "rtol": ctx.cfg.options.mass_rtol }),
    }
}

fn check_positivity(ctx: &RunContext) -> CheckReport {
    let mut min_after_start = f64::INFINITY;
    for (t, a) in ctx.traj.times.iter().zip(&ctx.traj.audits) {
        if *t > 0.0 {
            min_after_start = min_after_start.min(a.min_value);
        }
    }
    CheckReport {
        name: "positivity".into(),
        verdict: min_after_start > 0.0,
        details: json!({ "min_value_after_first_output": min_after_start }),
    }
}

fn check_benilan_crandall(ctx: &RunContext) -> CheckReport {
    let p = &ctx.traj.params;
    let pw = 1.0 / (1.0 - p.m());
    let mut worst = f64::INFINITY;
    for w in 1..ctx.traj.times.len() - 1 {
        let (t1, t2) = (ctx.traj.times[w], ctx.traj.times[w + 1]);
        if t1 <= 0.0 {
            continue;
        }
        let s1 = &ctx.traj.states[w];
        let s2 = &ctx.traj.states[w + 1];
        let umax = s1.values().iter().cloned().fold(0.0, f64::max);
        for i in 0..s1.len() {
            let a = s1.values()[i] * t1.powf(-pw);
            let b = s2.values()[i] * t2.powf(-pw);
            if s1.values()[i] > 1e-13 * umax {
                worst = worst.min((a - b) / a.abs().max(1e-300));
            }
        }
    }
    CheckReport {
        name: "benilan-crandall".into(),
        verdict: worst >= -1e-8,
        details: json!({ "min_monotonicity_margin": worst }),
    }
}

fn check_smoothing(ctx: &RunContext) -> CheckReport {
    let p = &ctx.traj.params;
    let e = p.exponents();
    let mass = ctx.grid_mass();
    let mut max_ratio = 0.0_f64;
    let mut series = Vec::new();
    for (t, s) in ctx.traj.times.iter().zip(&ctx.traj.states) {
        if *t <= 0.0 {
            continue;
        }
        let sup = s.values().iter().cloned().fold(0.0, f64::max);
        let ratio = sup * t.powf(p.dim_gamma() * e.theta) / mass.powf(e.sigma * e.theta);
        max_ratio = max_ratio.max(ratio);
        series.push(vec![*t, ratio]);
    }
    CheckReport {
        name: "smoothing".into(),
        verdict: max_ratio <= ctx.kappa.bar1,
        details: json!({
            "max_ratio": max_ratio,
            "kappa_bar_1": ctx.kappa.bar1,
            "kappa_defaults_in_use": ctx.kappa.calibrated.is_empty(),
        }),
    }
}

fn sandwich_details(rep: &harnack::SandwichReport) -> serde_json::Value {
    let violations: Vec<_> = rep
        .violations
        .iter()
        .take(64)
        .map(|v| json!({ "t": v.t, "r": v.r, "side": v.side, "ratio": v.ratio }))
        .collect();
    json!({
        "mode": rep.mode,
        "t_window": rep.t_window,
        "lower": rep.lower,
        "upper": rep.upper,
        "violations": violations,
        "kappa_defaults_in_use": rep.kappa_defaults_in_use,
    })
}

fn check_sandwich(ctx: &RunContext, analytic: bool) -> Result<CheckReport, RunError> {
    let mode = if analytic {
        SandwichMode::Analytic((&ctx.kappa).into())
    } else {
        SandwichMode::Empirical
    };
    let t0 = ctx.traj.times.iter().copied().find(|t| *t > 0.0);
    let rep = match harnack::verify_sandwich(ctx.traj, mode, t0) {
        Ok(r) => r,
        Err(harnack::HarnackError::NotInX) => {
            return Ok(CheckReport {
                name: if analytic { "sandwich-analytic" } else { "sandwich-empirical" }.into(),
                verdict: false,
                details: json!({ "error": "initial datum not in X (infinite tail seminorm)" }),
            })
        }
        Err(e) => return Err(e.into()),
    };
    Ok(CheckReport {
        name: if analytic { "sandwich-analytic" } else { "sandwich-empirical" }.into(),
        verdict: rep.verdict,
        details: sandwich_details(&rep),
    })
}

fn check_urec(ctx: &RunContext) -> Result<CheckReport, RunError> {
    let series = diagnostics::relative_error(ctx.traj, Region::Whole)?;
    let rows: Vec<Vec<f64>> = series.iter().map(|(t, v)| vec![*t, v.as_f64()]).collect();
    let _ = series_csv(&ctx.out_dir.join("relative_error_whole.csv"), "t,sup_relative_error", &rows);
    let n = series.len();
    let finite = series.iter().all(|(_, v)| v.is_finite());
    let final_val = series.last().map(|(_, v)| v.as_f64()).unwrap_or(f64::INFINITY);
    // monotone decreasing after the transient (first quarter), 5% slack
    let mut monotone = true;
    let start = n / 4;
    for w in series[start..].windows(2) {
        let (a, b) = (w[0].1.as_f64(), w[1].1.as_f64());
        if b > a * 1.05 {
            monotone = false;
        }
    }
    let threshold = ctx.cfg.options.urec_threshold;
    Ok(CheckReport {
        name: "urec".into(),
        verdict: finite && monotone && final_val < threshold,
        details: json!({
            "final_error": final_val,
            "threshold": threshold,
            "monotone_after_transient": monotone,
            "all_finite": finite,
        }),
    })
}

fn check_cone_error(ctx: &RunContext) -> Result<CheckReport, RunError> {
    let ups = ctx.cfg.options.cone_upsilon;
    let series = diagnostics::relative_error(ctx.traj, Region::Cone(ups))?;
    let rows: Vec<Vec<f64>> = series.iter().map(|(t, v)| vec![*t, v.as_f64()]).collect();
    let _ = series_csv(&ctx.out_dir.join("relative_error_cone.csv"), "t,sup_relative_error", &rows);
    let final_val = series.last().map(|(_, v)| v.as_f64()).unwrap_or(f64::INFINITY);
    Ok(CheckReport {
        name: "cone-error".into(),
        verdict: final_val < ctx.cfg.options.cone_threshold,
        details: json!({ "upsilon": ups, "final_error": final_val, "threshold": ctx.cfg.options.cone_threshold }),
    })
}

fn check_classify_invariance(ctx: &RunContext) -> Result<CheckReport, RunError> {
    // Undecided snapshots (window too thin after trimming) do not
    // falsify the invariance but at least half must decide.
    let rep0 = tailspace::classify(&ctx.traj.states[0])?;
    let mut classes = vec![format!("{:?}", rep0.class)];
    let mut invariant = rep0.class != tailspace::TailClass::Undecided;
    let mut decided = 0usize;
    let mut total = 0usize;
    for s in ctx.traj.states.iter().skip(1) {
        let rep = tailspace::classify(&diagnostics::snapshot_for_classification(
            s,
            ctx.cfg.options.classify_floor_rel,
        ))?;
        classes.push(format!("{:?}", rep.class));
        total += 1;
        if rep.class != tailspace::TailClass::Undecided {
            decided += 1;
            if rep.class != rep0.class {
                invariant = false;
            }
        }
    }
    Ok(CheckReport {
        name: "classify-invariance".into(),
        verdict: invariant && decided * 2 >= total,
        details: json!({ "classes": classes, "decided": decided, "snapshots": total }),
    })
}

fn check_tail_exponent(ctx: &RunContext) -> CheckReport {
    let p = &ctx.traj.params;
    let target = ctx.cfg.options.tail_exponent_target.unwrap_or(-p.tail_power());
    let tol = ctx.cfg.options.tail_exponent_tol;
    let mut fits = Vec::new();
    let mut ok = true;
    for (t, s) in ctx.traj.times.iter().zip(&ctx.traj.states) {
        if *t <= 0.0 {
            continue;
        }
        match s.fit_tail_exponent(1.5, s.len() - s.wall_trim_index()) {
            Some((slope, _)) => {
                if (slope - target).abs() > tol {
                    ok = false;
                }
                fits.push(vec![*t, slope]);
            }
            None => ok = false,
        }
    }
    let _ = series_csv(&ctx.out_dir.join("tail_exponent.csv"), "t,fitted_exponent", &fits);
    CheckReport {
        name: "tail-exponent".into(),
        verdict: ok,
        details: json!({ "target": target, "tol": tol, "fits": fits }),
    }
}

fn check_rates(ctx: &RunContext) -> Result<CheckReport, RunError> {
    let series = diagnostics::relative_error(ctx.traj, Region::Whole)?;
    let finite: Vec<(f64, f64)> = series
        .iter()
        .filter_map(|(t, v)| v.finite().map(|x| (*t, x)))
        .collect();
    let t_hi = finite.last().map(|x| x.0).unwrap_or(1.0);
    let window = ctx.cfg.options.rates_window.unwrap_or((t_hi / 10.0, t_hi));
    let fit = diagnostics::rate_fit(&finite, window)?;
    let (lo, hi) = ctx.cfg.options.rates_slope_range;
    Ok(CheckReport {
        name: "rates".into(),
        verdict: fit.slope >= lo && fit.slope <= hi,
        details: json!({ "slope": fit.slope, "intercept": fit.intercept, "residual": fit.residual,
                          "window": fit.window, "expected_range": [lo, hi] }),
    })
}

fn check_entropy(ctx: &RunContext) -> Result<CheckReport, RunError> {
    let p = &ctx.traj.params;
    let ss = solver::to_selfsimilar(ctx.traj)?;
    let recs = diagnostics::entropy_series(&ss)?;
    let rows: Vec<Vec<f64>> = recs
        .iter()
        .map(|r| vec![r.tau, r.entropy, r.fisher, r.l1_distance, r.d_inf.as_f64()])
        .collect();
    let _ = series_csv(&ctx.out_dir.join("entropy.csv"), "tau,entropy,fisher,l1_distance,d_inf", &rows);
    // F nonincreasing (relative slack for quadrature noise)
    let mut monotone = true;
    for w in recs.windows(2) {
        if w[1].entropy > w[0].entropy * (1.0 + 1e-6) + 1e-14 {
            monotone = false;
        }
    }
    let mass = ss.states[0].l1_gamma()?;
    let ck = diagnostics::csiszar_kullback_check(p, mass, &recs)?;
    let window = ctx.cfg.options.entropy_window.unwrap_or_else(|| {
        let hi = recs.last().map(|r| r.tau).unwrap_or(1.0);
        (0.15 * hi, 0.9 * hi)
    });
    let production = diagnostics::entropy_production_check(p, &recs, window);
    let (prod_json, prod_ok) = match &production {
        Ok(r) => (
            json!({ "min_margin": r.min_margin, "decay_rate": r.decay_rate,
                     "balance_mismatch": r.balance_mismatch,
                     "base_constant": r.base_constant, "improved_constant": r.improved_constant }),
            r.min_margin >= -1e-8 && r.balance_mismatch <= 0.05,
        ),
        Err(e) => (json!({ "skipped": e.to_string() }), true),
    };
    let ck_ok = ck.min_margin >= -1e-9;
    Ok(CheckReport {
        name: "entropy".into(),
        verdict: monotone && ck_ok && prod_ok,
        details: json!({
            "entropy_nonincreasing": monotone,
            "csiszar_kullback_min_margin": ck.min_margin,
            "csiszar_kullback_prefactor": ck.prefactor,
            "production": prod_json,
            "records": recs.len(),
        }),
    })
}

fn check_xnorm_flow(ctx: &RunContext) -> Result<CheckReport, RunError> {
    match diagnostics::xnorm_flow(ctx.traj) {
        Ok(rep) => {
            let rows: Vec<Vec<f64>> =
                rep.series.iter().map(|(t, x, s)| vec![*t, *x, *s]).collect();
            let _ = series_csv(&ctx.out_dir.join("xnorm_flow.csv"), "t,xnorm,scaled_xnorm", &rows);
            let renorm_ok = match (rep.renormalized_distance.first(), rep.renormalized_distance.last())
            {
                (Some(a), Some(b)) => b.1 <= a.1,
                _ => false,
            };
            let verdict = rep.monotonicity_margin >= -1e-6
                && rep.min_scaled >= rep.lower_bound * (1.0 - 1e-6)
                && renorm_ok;
            Ok(CheckReport {
                name: "xnorm-flow".into(),
                verdict,
                details: json!({
                    "monotonicity_margin": rep.monotonicity_margin,
                    "lower_bound": rep.lower_bound,
                    "min_scaled": rep.min_scaled,
                    "renormalized_first_last": [rep.renormalized_distance.first(), rep.renormalized_distance.last()],
                }),
            })
        }
        Err(diagnostics::DiagnosticsError::NotInX(msg)) => Ok(CheckReport {
            name: "xnorm-flow".into(),
            verdict: false,
            details: json!({ "error": format!("not in X: {msg}") }),
        }),
        Err(e) => Err(e.into()),
    }
}

fn check_no_rates(ctx: &RunContext) -> Result<CheckReport, RunError> {
    let p = &ctx.traj.params;
    let e = p.exponents();
    let delta = ctx.cfg.options.no_rates_delta;
    let mass = ctx.reference_mass_for_bounds();
    let spec = BarenblattSpec::new(*p, mass, 0.0)?;
    let mut series = Vec::new();
    for (t, s) in ctx.traj.times.iter().zip(&ctx.traj.states) {
        if *t <= 0.0 {
            continue;
        }
        let hi = s.wall_trim_index();
        let mut sup = 0.0_f64;
        for i in 0..hi {
            let r = s.grid()[i];
            sup = sup.max((s.values()[i] - spec.eval_abs(*t, r)).abs());
        }
        series.push((*t, t.powf(p.dim_gamma() * e.theta + delta) * sup));
    }
    let rows: Vec<Vec<f64>> = series.iter().map(|(t, v)| vec![*t, *v]).collect();
    let _ = series_csv(&ctx.out_dir.join("no_rates_series.csv"), "t,scaled_linf_distance", &rows);
    // increasing over the final decade
    let t_hi = series.last().map(|x| x.0).unwrap_or(1.0);
    let window: Vec<&(f64, f64)> = series.iter().filter(|(t, _)| *t >= t_hi / 10.0).collect();
    let mut increasing = window.len() >= 3;
    for w in window.windows(2) {
        if w[1].1 < w[0].1 * (1.0 - 1e-6) {
            increasing = false;
        }
    }
    let fit = diagnostics::rate_fit(
        &series.to_vec(),
        (t_hi / 10.0, t_hi),
    );
    Ok(CheckReport {
        name: "no-rates".into(),
        verdict: increasing,
        details: json!({
            "delta": delta,
            "increasing_over_final_decade": increasing,
            "final_decade_slope": fit.map(|f| f.slope).unwrap_or(f64::NAN),
            "series_len": series.len(),
        }),
    })
}

fn check_harnack_cone(ctx: &RunContext) -> Result<CheckReport, RunError> {
    let mass = ctx.grid_mass();
    let mut rows = Vec::new();
    let mut ok = true;
    let mut quotients = Vec::new();
    for t in ctx.traj.times.iter().skip(1) {
        match harnack::cone_harnack(ctx.traj, *t, mass, &ctx.kappa) {
            Ok(rec) => {
                ok &= rec.quotient >= 1.0 - 1e-9 && rec.quotient <= rec.h_bound;
                quotients.push(rec.quotient);
                rows.push(vec![rec.t, rec.cone_radius, rec.quotient, rec.h_bound]);
            }
            Err(harnack::HarnackError::EarlyTime { .. }) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    let _ = series_csv(&ctx.out_dir.join("cone_harnack.csv"), "t,cone_radius,quotient,h_bound", &rows);
    Ok(CheckReport {
        name: "harnack-cone".into(),
        verdict: ok && !rows.is_empty(),
        details: json!({ "records": rows.len(), "max_quotient": quotients.iter().cloned().fold(0.0, f64::max),
                         "kappa_defaults_in_use": ctx.kappa.calibrated.is_empty() }),
    })
}

fn check_harnack_boundary(ctx: &RunContext) -> Result<CheckReport, RunError> {
    let mass = ctx.grid_mass();
    let t = *ctx.traj.times.last().unwrap();
    let rec = harnack::boundary_harnack(ctx.traj, t, mass, &ctx.kappa)?;
    Ok(CheckReport {
        name: "harnack-boundary".into(),
        verdict: rec.quotient.is_finite() && rec.quotient >= 1.0 - 1e-9,
        details: json!({ "t": rec.t, "quotient": rec.quotient, "t_bar": rec.t_bar, "early": rec.early }),
    })
}

fn check_outer_mass(ctx: &RunContext) -> Result<CheckReport, RunError> {
    let n = ctx.traj.times.len();
    if n < 6 {
        return Ok(CheckReport {
            name: "outer-mass".into(),
            verdict: false,
            details: json!({ "error": "need at least 6 snapshots" }),
        });
    }
    let r_mid = (ctx.grid.r_min() * ctx.grid.r_max()).sqrt();
    let radii = [r_mid / 10.0, r_mid, r_mid * 10.0];
    let half = n / 2;
    let mut train = Vec::new();
    for i in 1..half {
        train.push((i, i));
        if i + 1 < half {
            train.push((i + 1, i));
            train.push((i, i + 1));
        }
    }
    let (c1, c2) = harnack::fit_outer_mass_constants(ctx.traj, &radii, &train)?;
    let mut holds = true;
    let mut checked = 0;
    for i in half..n - 1 {
        for &radius in &radii {
            let rec = harnack::outer_mass_inequality(ctx.traj, radius, i + 1, i, c1, c2)?;
            holds &= rec.holds;
            checked += 1;
            let rec2 = harnack::outer_mass_inequality(ctx.traj, radius, i, i + 1, c1, c2)?;
            holds &= rec2.holds;
            checked += 1;
        }
    }
    Ok(CheckReport {
        name: "outer-mass".into(),
        verdict: holds,
        details: json!({ "c1": c1, "c2": c2, "test_checks": checked }),
    })
}

fn check_tail_limits(ctx: &RunContext) -> Result<CheckReport, RunError> {
    let p = &ctx.traj.params;
    let (b0, b1) = profiles::derive_barenblatt_constants(p);
    let _ = b0;
    let t = *ctx.traj.times.last().unwrap();
    let state = ctx.traj.states.last().unwrap();
    let rec = harnack::tail_limits(state, t)?;
    let minimal = b1.powf(-1.0 / (1.0 - p.m())) * t.powf(1.0 / (1.0 - p.m()));
    let verdict = rec.liminf_estimate >= 0.5 * minimal
        && rec.limsup_estimate / rec.liminf_estimate <= 4.0
        && (rec.fitted_exponent + p.tail_power()).abs() <= 0.3;
    Ok(CheckReport {
        name: "tail-limits".into(),
        verdict,
        details: json!({
            "t": t,
            "liminf_estimate": rec.liminf_estimate,
            "limsup_estimate": rec.limsup_estimate,
            "minimal_tail_coefficient": minimal,
            "fitted_exponent": rec.fitted_exponent,
        }),
    })
}

fn dispatch_check(ctx: &RunContext, name: &str) -> Result<CheckReport, RunError> {
    Ok(match name {
        "mass" => check_mass(ctx),
        "positivity" => check_positivity(ctx),
        "benilan-crandall" => check_benilan_crandall(ctx),
        "smoothing" => check_smoothing(ctx),
        "sandwich-empirical" => check_sandwich(ctx, false)?,
        "sandwich-analytic" => check_sandwich(ctx, true)?,
        "urec" => check_urec(ctx)?,
        "cone-error" => check_cone_error(ctx)?,
        "classify-invariance" => check_classify_invariance(ctx)?,
        "tail-exponent" => check_tail_exponent(ctx),
        "rates" => check_rates(ctx)?,
        "entropy" => check_entropy(ctx)?,
        "xnorm-flow" => check_xnorm_flow(ctx)?,
        "no-rates" => check_no_rates(ctx)?,
        "harnack-cone" => check_harnack_cone(ctx)?,
        "harnack-boundary" => check_harnack_boundary(ctx)?,
        "outer-mass" => check_outer_mass(ctx)?,
        "tail-limits" => check_tail_limits(ctx)?,
        other => {
            return Err(RunError::Config(crate::config::ConfigError::UnknownCheck(other.into())))
        }
    })
}

/// Execute a config end to end; returns the summary (also persisted).
pub fn run(cfg: &ExperimentConfig, out_override: Option<&Path>) -> Result<RunSummary, RunError> {
    let out_dir = out_override.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    std::fs::create_dir_all(&out_dir)?;
    let grid = solver::build_grid(&cfg.params, cfg.grid.r_min, cfg.grid.r_max, cfg.grid.cells_per_decade)?;
    let (u0, analytic_mass) = initial_field(cfg, &grid)?;
    let times = cfg.output_times();
    let solve_opts = SolveOptions { dt_rel_cap: cfg.time.dt_rel_cap, ..SolveOptions::default() };
    let traj = solver::solve(&grid, &u0, &times, &solve_opts)?;

    let mut warnings = Vec::new();
    let mass0 = traj.audits[0].weighted_mass;
    let blocked: f64 = traj.audits.iter().map(|a| a.boundary_flux).sum();
    if blocked > 1e-6 * mass0 {
        warnings.push(format!(
            "boundary-flux proxy integrated to {:.3e} ({:.2e} of the initial mass): outer wall may contaminate tails",
            blocked,
            blocked / mass0
        ));
    }

    let kappa = if cfg.kappa.calibrate {
        KappaConstants::calibrate(&cfg.params)
    } else {
        KappaConstants {
            star: cfg.kappa.star,
            bar1: cfg.kappa.bar1,
            bar2: cfg.kappa.bar2,
            under1: cfg.kappa.under1,
            under: cfg.kappa.under,
            calibrated: Vec::new(),
        }
    };

    let ctx = RunContext {
        cfg,
        grid: &grid,
        traj: &traj,
        analytic_mass,
        kappa,
        out_dir: out_dir.clone(),
    };

    let mut checks = Vec::new();
    for name in &cfg.checks {
        let report = dispatch_check(&ctx, name)?;
        if matches!(cfg.format, OutputFormat::Json | OutputFormat::Both) {
            let payload = json!({
                "version": env!("CARGO_PKG_VERSION"),
                "config": serde_json::to_value(cfg).unwrap_or_default(),
                "check": report.name,
                "verdict": report.verdict,
                "details": report.details,
            });
            std::fs::write(
                out_dir.join(format!("report_{}.json", report.name)),
                serde_json::to_string_pretty(&payload).unwrap(),
            )?;
        }
        checks.push(report);
    }

    let persist_trajectory = matches!(cfg.format, OutputFormat::Csv | OutputFormat::Both);
    if persist_trajectory {
        traj.persist(&out_dir.join("trajectory"), Some(&grid))?;
    }

    let all_pass = checks.iter().all(|c| c.verdict);
    let summary = RunSummary {
        version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::to_value(cfg).unwrap_or_default(),
        checks,
        all_pass,
        warnings,
        trajectory_dir: persist_trajectory.then(|| "trajectory".into()),
        generated_at_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    std::fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary).unwrap())?;
    Ok(summary)
}

/// Classify a field CSV; writes the report next to the input unless an
/// output directory is given.
pub fn classify_file(
    input: &Path,
    params: Option<ParameterSet>,
    out_dir: Option<&Path>,
) -> Result<tailspace::TailReport, RunError> {
    let field = RadialField::read_csv(input, params)?;
    let report = tailspace::classify(&field)?;
    let payload = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "input": input.to_string_lossy(),
        "report": serde_json::to_value(&report).unwrap_or_default(),
    });
    let target = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| input.parent().unwrap_or(Path::new(".")).to_path_buf());
    std::fs::create_dir_all(&target)?;
    std::fs::write(target.join("tail_report.json"), serde_json::to_string_pretty(&payload).unwrap())?;
    Ok(report)
}

/// Evaluate closed-form profiles to CSV (no solver): the configured
/// profile at the output times, plus the sub/supersolution bracket when
/// the profile is `w0`.
pub fn export_profiles(cfg: &ExperimentConfig, out_override: Option<&Path>) -> Result<(), RunError> {
    let out_dir = out_override.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    std::fs::create_dir_all(&out_dir)?;
    let grid = solver::build_grid(&cfg.params, cfg.grid.r_min, cfg.grid.r_max, cfg.grid.cells_per_decade)?;
    let (u0, _) = initial_field(cfg, &grid)?;
    u0.write_csv(&out_dir.join("profile_t0.csv"))?;
    if matches!(cfg.initial, InitialConfig::W0) {
        let (sub, sup) = profiles::w0_bracket(&cfg.params)?;
        for &t in &[0.0, cfg.time.t0, cfg.time.t_end] {
            let fs = grid.field_from_fn(|r| sub.eval(t, r))?;
            fs.write_csv(&out_dir.join(format!("subsolution_t{t:.3}.csv")))?;
            let fup = grid.field_from_fn(|r| sup.eval(t, r))?;
            fup.write_csv(&out_dir.join(format!("supersolution_t{t:.3}.csv")))?;
        }
    }
    Ok(())
}

/// Print a GHP table (t, lower margin, upper margin) for a trajectory
/// and a sandwich report; margins are min over the usable grid of
/// u/𝔅_lower - 1 and 𝔅_upper/u - 1.
pub fn ghp_table(traj: &Trajectory, rep: &harnack::SandwichReport) -> Vec<(f64, f64, f64)> {
    let mut rows = Vec::new();
    let (Some((tau_l, m_l)), Some((tau_u, m_u))) = (rep.lower, rep.upper) else {
        return rows;
    };
    let lo_spec = BarenblattSpec::new(traj.params, m_l, 0.0).unwrap();
    let up_spec = BarenblattSpec::new(traj.params, m_u, 0.0).unwrap();
    for (t, s) in traj.times.iter().zip(&traj.states) {
        if *t < rep.t_window.0 {
            continue;
        }
        let mut lo_margin = f64::INFINITY;
        let mut up_margin = f64::INFINITY;
        let n = s.len();
        for i in 0..n.saturating_sub(2) {
            let r = s.grid()[i];
            let u = s.values()[i];
            if *t - tau_l > 0.0 {
                let b = lo_spec.eval_abs(*t - tau_l, r);
                lo_margin = lo_margin.min(u / b - 1.0);
            }
            let b = up_spec.eval_abs(*t + tau_u, r);
            if u > 0.0 {
                up_margin = up_margin.min(b / u - 1.0);
            }
        }
        rows.push((*t, lo_margin, up_margin));
    }
    rows
}
