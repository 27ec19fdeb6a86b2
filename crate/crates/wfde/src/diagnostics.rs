//! Post-processing diagnostics: distances to the Barenblatt manifold,
//! relative-error series on cones and on the whole grid, the relative
//! entropy / Fisher information pair along the self-similar flow, rate
//! fits, and tail-norm monitoring.
//!
//! In self-similar variables, with w = v/B_M,
//!
//! ```text
//!     F[w] = m/(m-1) ∫ [ (w^m-1)/m - (w-1) ] B_M^m |y|^{-γ} dy ,
//!     I[w] = m/(1-m) ∫ w B_M |∇[(w^{m-1}-1) B_M^{m-1}]|² |y|^{-β} dy ,
//! ```
//!
//! and dF/dτ = -I along the flow. F controls the L¹_γ distance through
//! the Csiszár–Kullback inequality
//! ‖v - B_M‖_{L¹_γ} ≤ (8/m ‖B_M^{2-m}‖_{L¹_γ})^{1/2} √F.

use crate::field::RadialField;
use crate::params::ParameterSet;
use crate::profiles::BarenblattSpec;
use crate::quad;
use crate::solver::Trajectory;
use crate::tailspace::{tail_seminorm, ExtReal};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("regime error: {0}")]
    Regime(String),
    #[error("window error: {0}")]
    Window(String),
    #[error("initial datum outside the tail space X: {0}")]
    NotInX(String),
    #[error("empty or misaligned series")]
    NoData,
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
}

/// Exclusion window for sup-type norms: 3 innermost cells when γ > 0
/// (Hölder-only regularity at the origin) and the outer wall layer of
/// the no-flux boundary.
fn usable_range(p: &ParameterSet, f: &RadialField) -> (usize, usize) {
    let lo = if p.gamma() > 0.0 { 3 } else { 0 };
    (lo, f.wall_trim_index())
}

/// ∫ g(r) r^{weight_pow} dr on a log grid (trapezoid in log space).
fn log_trapezoid(grid: &[f64], g: &[f64], weight_pow: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..grid.len() - 1 {
        let (r0, r1) = (grid[i], grid[i + 1]);
        let h0 = g[i] * r0.powf(weight_pow + 1.0);
        let h1 = g[i + 1] * r1.powf(weight_pow + 1.0);
        total += 0.5 * (h0 + h1) * (r1 / r0).ln();
    }
    total
}

/// L¹_γ distance to the Barenblatt manifold: (inf_M ‖f - B_M‖, argmin).
///
/// Golden-section on log M inside mass(f) · [1/10, 10].
pub fn d1(f: &RadialField) -> Result<(f64, f64), DiagnosticsError> {
    let p = *f.params();
    let mass = f.l1_gamma()?;
    let omega = p.sphere_area();
    let dist = |log_m: f64| -> f64 {
        let m = log_m.exp();
        let diff: Vec<f64> = f
            .grid()
            .iter()
            .zip(f.values())
            .map(|(r, v)| {
                (v - crate::profiles::stationary_profile(&p, m, *r).unwrap()).abs()
            })
            .collect();
        omega * log_trapezoid(f.grid(), &diff, p.dim_gamma() - 1.0)
    };
    let (log_best, best) = quad::golden_min(&dist, (mass / 10.0).ln(), (mass * 10.0).ln(), 1e-7);
    Ok((best, log_best.exp()))
}

/// Log-log slope of `g` over the window `[r_hi/10^decades, r_hi]`.
fn window_slope<G: Fn(f64) -> f64>(g: G, r_hi: f64, decades: f64) -> f64 {
    let n = 12;
    let xs: Vec<f64> = (0..n)
        .map(|i| r_hi.log10() - decades + decades * i as f64 / (n - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs.iter().map(|lx| g(10f64.powf(*lx)).max(1e-300).log10()).collect();
    quad::linear_fit(&xs, &ys).0
}

/// Relative-error distance to the manifold:
/// d_∞(f) = inf_M sup |f/B_M - 1|, with an infinity flag when the tail
/// of f decays measurably slower than the Barenblatt reference fitted on
/// the same radii window.
pub fn d_inf(f: &RadialField) -> Result<(ExtReal, f64), DiagnosticsError> {
    let p = *f.params();
    let mass = f.l1_gamma()?;
    let bar_exp = -p.tail_power();
    match f.tail() {
        Some(t) => {
            if (t.exponent - bar_exp).abs() > 1e-6 {
                return Ok((ExtReal::Infinite, mass));
            }
        }
        None => {
            let trim = f.len() - f.wall_trim_index();
            if let Some((e_f, _)) = f.fit_tail_exponent(1.0, trim) {
                let r_hi = f.grid()[f.wall_trim_index() - 1];
                let e_ref = window_slope(
                    |r| crate::profiles::stationary_profile(&p, mass, r).unwrap_or(0.0),
                    r_hi,
                    1.0,
                );
                if e_f > e_ref + 0.25 {
                    return Ok((ExtReal::Infinite, mass));
                }
            }
        }
    }
    let (lo, hi) = usable_range(&p, f);
    let sup = |log_m: f64| -> f64 {
        let m = log_m.exp();
        let c = crate::profiles::mass_constant(&p, m).unwrap();
        let inv = 1.0 / (p.m() - 1.0);
        let mut worst = 0.0_f64;
        for i in lo..hi {
            let b = (c + f.grid()[i].powf(p.sigma())).powf(inv);
            worst = worst.max((f.values()[i] / b - 1.0).abs());
        }
        worst
    };
    // 32-point pre-scan guards the unimodality assumption
    let (mut best_lm, mut best) = (mass.ln(), f64::INFINITY);
    for k in 0..32 {
        let lm = (mass / 10.0).ln() + (k as f64 / 31.0) * (100f64).ln();
        let v = sup(lm);
        if v < best {
            best = v;
            best_lm = lm;
        }
    }
    let span = (100f64).ln() / 31.0;
    let (lm, v) = quad::golden_min(&sup, best_lm - span, best_lm + span, 1e-7);
    Ok((ExtReal::Finite(v.min(best)), lm.exp()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// Parabolic cone {r ≤ Υ t^ϑ}.
    Cone(f64),
    /// Whole usable grid plus the tail comparison.
    Whole,
}

/// Sup of |u/𝔅(t,·;M) - 1| per snapshot, M fixed to the trajectory mass.
///
/// In the whole-grid region the value is flagged infinite when the
/// snapshot's fitted tail exponent is incompatible with the Barenblatt
/// decay (fat tails stay fat).
pub fn relative_error(traj: &Trajectory, region: Region) -> Result<Vec<(f64, ExtReal)>, DiagnosticsError> {
    assert!(!traj.selfsimilar, "relative_error runs in original variables");
    let p = &traj.params;
    let mass = traj.states[0].l1_gamma()?;
    let spec = BarenblattSpec::new(*p, mass, 0.0).map_err(|e| DiagnosticsError::Regime(e.to_string()))?;
    let mut out = Vec::new();
    for (t, state) in traj.times.iter().zip(&traj.states) {
        if *t <= 0.0 {
            continue;
        }
        let (lo, hi) = usable_range(p, state);
        let r_cap = match region {
            Region::Cone(upsilon) => upsilon * t.powf(p.theta()),
            Region::Whole => f64::INFINITY,
        };
        if let Region::Whole = region {
            // fat-tail flag: the snapshot decays measurably slower than
            // 𝔅(t) fitted over the same radii window
            let trim = state.len() - state.wall_trim_index();
            if let Some((e_u, _)) = state.fit_tail_exponent(1.0, trim) {
                let r_hi = state.grid()[state.wall_trim_index() - 1];
                let e_ref = window_slope(|r| spec.eval_abs(*t, r), r_hi, 1.0);
                if e_u > e_ref + 0.25 {
                    out.push((*t, ExtReal::Infinite));
                    continue;
                }
            }
        }
        let mut worst = 0.0_f64;
        for i in lo..hi {
            let r = state.grid()[i];
            if r > r_cap {
                break;
            }
            let b = spec.eval_abs(*t, r);
            worst = worst.max((state.values()[i] / b - 1.0).abs());
        }
        out.push((*t, ExtReal::Finite(worst)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EntropyRecord {
    pub tau: f64,
    pub entropy: f64,
    pub fisher: f64,
    pub l1_distance: f64,
    pub d_inf: ExtReal,
}

/// Relative entropy and Fisher information along a self-similar
/// trajectory, with the L¹_γ distance and d_∞ per record.
pub fn entropy_series(traj_ss: &Trajectory) -> Result<Vec<EntropyRecord>, DiagnosticsError> {
    assert!(traj_ss.selfsimilar, "entropy series needs self-similar variables");
    let p = &traj_ss.params;
    let mass = traj_ss.states[0].l1_gamma()?;
    let c = crate::profiles::mass_constant(p, mass).map_err(|e| DiagnosticsError::Regime(e.to_string()))?;
    let inv = 1.0 / (p.m() - 1.0);
    let m = p.m();
    let omega = p.sphere_area();
    let mut out = Vec::new();
    for (tau, state) in traj_ss.times.iter().zip(&traj_ss.states) {
        // integrate only up to the wall-trim index: the no-flux layer of
        // the original grid maps into the y-window and would pollute the
        // functionals with boundary junk
        let n = state.wall_trim_index();
        let grid = &state.grid()[..n];
        let vals = &state.values()[..n];
        let b: Vec<f64> = grid.iter().map(|y| (c + y.powf(p.sigma())).powf(inv)).collect();
        let w: Vec<f64> = vals.iter().zip(&b).map(|(v, bb)| (v / bb).max(1e-14)).collect();
        // entropy density (pointwise nonnegative)
        let fd: Vec<f64> = w
            .iter()
            .zip(&b)
            .map(|(wi, bi)| {
                let val = (m / (m - 1.0)) * ((wi.powf(m) - 1.0) / m - (wi - 1.0)) * bi.powf(m);
                val.max(0.0)
            })
            .collect();
        let entropy = omega * log_trapezoid(grid, &fd, p.dim_gamma() - 1.0);
        // Fisher: ψ = (w^{m-1}-1) B^{m-1}, centered differences
        let psi: Vec<f64> =
            w.iter().zip(&b).map(|(wi, bi)| (wi.powf(m - 1.0) - 1.0) * bi.powf(m - 1.0)).collect();
        let mut fisher_density = vec![0.0; n];
        for i in 1..n - 1 {
            let dpsi = (psi[i + 1] - psi[i - 1]) / (grid[i + 1] - grid[i - 1]);
            fisher_density[i] = (m / (1.0 - m)) * w[i] * b[i] * dpsi * dpsi;
        }
        let fisher = omega
            * log_trapezoid(grid, &fisher_density, p.d() as f64 - 1.0 - p.beta());
        // L¹_γ distance to B_M
        let diff: Vec<f64> = vals.iter().zip(&b).map(|(v, bb)| (v - bb).abs()).collect();
        let l1_distance = omega * log_trapezoid(grid, &diff, p.dim_gamma() - 1.0);
        // d_inf with M fixed to the mass (sup over the trimmed window)
        let lo = if p.gamma() > 0.0 { 3 } else { 0 };
        let mut sup = 0.0_f64;
        for wi in w.iter().take(n).skip(lo) {
            sup = sup.max((wi - 1.0).abs());
        }
        out.push(EntropyRecord {
            tau: *tau,
            entropy,
            fisher,
            l1_distance,
            d_inf: ExtReal::Finite(sup),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyProductionReport {
    /// min over records of I - 4F.
    pub min_margin: f64,
    /// Fitted decay rate of -log F against τ on the window.
    pub decay_rate: f64,
    pub decay_residual: f64,
    /// The sharp constant and its improved window 4/ϑ - δ.
    pub base_constant: f64,
    pub improved_constant: f64,
    /// max over interior records of |dF/dτ + I| / I.
    pub balance_mismatch: f64,
    pub window: (f64, f64),
}

/// Entropy–entropy production check 4F ≤ I plus the decay-rate fit of
/// log F. Valid for the non-weighted regime with m ∈ ((d-1)/d, 1).
pub fn entropy_production_check(
    p: &ParameterSet,
    records: &[EntropyRecord],
    window: (f64, f64),
) -> Result<EntropyProductionReport, DiagnosticsError> {
    if p.gamma() != 0.0 || p.beta() != 0.0 {
        return Err(DiagnosticsError::Regime(
            "entropy-production constant requires the non-weighted regime".into(),
        ));
    }
    let m1 = (p.d() as f64 - 1.0) / p.d() as f64;
    if !(p.m() > m1) {
        return Err(DiagnosticsError::Regime(format!(
            "need m > (d-1)/d = {m1}, got m = {}",
            p.m()
        )));
    }
    if records.len() < 4 {
        return Err(DiagnosticsError::NoData);
    }
    let mut min_margin = f64::INFINITY;
    for r in records {
        min_margin = min_margin.min(r.fisher - 4.0 * r.entropy);
    }
    // balance dF/dτ ≈ -I on interior records inside the window
    let mut mismatch = 0.0_f64;
    for i in 1..records.len() - 1 {
        let (a, b, c) = (&records[i - 1], &records[i], &records[i + 1]);
        if b.tau < window.0 || b.tau > window.1 || b.fisher <= 0.0 {
            continue;
        }
        let dfdtau = (c.entropy - a.entropy) / (c.tau - a.tau);
        mismatch = mismatch.max((dfdtau + b.fisher).abs() / b.fisher);
    }
    // decay fit of log F
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in records {
        if r.tau >= window.0 && r.tau <= window.1 && r.entropy > 0.0 {
            xs.push(r.tau);
            ys.push(r.entropy.ln());
        }
    }
    if xs.len() < 3 {
        return Err(DiagnosticsError::Window("too few records in the fit window".into()));
    }
    let (slope, _, resid) = quad::linear_fit(&xs, &ys);
    Ok(EntropyProductionReport {
        min_margin,
        decay_rate: -slope,
        decay_residual: resid,
        base_constant: 4.0,
        improved_constant: 4.0 / p.theta(),
        balance_mismatch: mismatch,
        window,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CsiszarKullbackReport {
    /// Prefactor (8/m ‖B_M^{2-m}‖_{L¹_γ})^{1/2}.
    pub prefactor: f64,
    /// min over records of prefactor √F - ‖v - B_M‖.
    pub min_margin: f64,
    pub records: usize,
}

/// Csiszár–Kullback margins along a self-similar trajectory.
pub fn csiszar_kullback_check(
    p: &ParameterSet,
    mass: f64,
    records: &[EntropyRecord],
) -> Result<CsiszarKullbackReport, DiagnosticsError> {
    if records.is_empty() {
        return Err(DiagnosticsError::NoData);
    }
    let prefactor = csiszar_kullback_prefactor(p, mass)?;
    let mut min_margin = f64::INFINITY;
    for r in records {
        min_margin = min_margin.min(prefactor * r.entropy.max(0.0).sqrt() - r.l1_distance);
    }
    Ok(CsiszarKullbackReport { prefactor, min_margin, records: records.len() })
}

/// (8/m ‖B_M^{2-m}‖_{L¹_γ})^{1/2} by adaptive quadrature.
pub fn csiszar_kullback_prefactor(p: &ParameterSet, mass: f64) -> Result<f64, DiagnosticsError> {
    let c = crate::profiles::mass_constant(p, mass).map_err(|e| DiagnosticsError::Regime(e.to_string()))?;
    let expo = (2.0 - p.m()) / (p.m() - 1.0);
    let f = |r: f64| (c + r.powf(p.sigma())).powf(expo);
    let norm = quad::weighted_radial_integral(&f, 0.0, 1.0, p.dim_gamma(), p.sphere_area(), 1e-9)
        + p.sphere_area()
            * quad::adaptive_simpson_to_inf(
                &|r: f64| f(r) * r.powf(p.dim_gamma() - 1.0),
                1.0,
                1e-14,
                1e-9,
            );
    Ok((8.0 / p.m() * norm).sqrt())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateFit {
    pub window: (f64, f64),
    pub slope: f64,
    pub intercept: f64,
    /// max |log10 y - fit| over the window.
    pub residual: f64,
}

/// Least-squares line in log-log through the series restricted to the
/// window. Values must be positive; the window must span ≥ 1 decade.
pub fn rate_fit(series: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit, DiagnosticsError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, v) in series {
        if *t >= window.0 && *t <= window.1 {
            if !(*v > 0.0) {
                return Err(DiagnosticsError::Window(format!("nonpositive value {v} at t = {t}")));
            }
            xs.push(t.log10());
            ys.push(v.log10());
        }
    }
    if xs.len() < 3 {
        return Err(DiagnosticsError::Window("fewer than 3 points in window".into()));
    }
    if xs.last().unwrap() - xs.first().unwrap() < 1.0 {
        return Err(DiagnosticsError::Window("window spans less than one decade".into()));
    }
    let (slope, intercept, residual) = quad::linear_fit(&xs, &ys);
    Ok(RateFit { window, slope, intercept, residual })
}

#[derive(Debug, Clone, Serialize)]
pub struct XnormFlowReport {
    /// (t, |u(t)|_X, t^{-1/(1-m)} |u(t)|_X).
    pub series: Vec<(f64, f64, f64)>,
    /// min over consecutive pairs of (prev - next)/prev for the scaled
    /// series; nonnegative means nonincreasing.
    pub monotonicity_margin: f64,
    /// Barenblatt floor (σm)^{1/(1-m)} (ϑ(1-m))^{-m/(1-m)} ω_d.
    pub lower_bound: f64,
    pub min_scaled: f64,
    /// (t, t^{-1/(1-m)} ‖u(t) - 𝔅(t; M)‖_X).
    pub renormalized_distance: Vec<(f64, f64)>,
}

/// Asymptotic value of t^{-1/(1-m)} |u(t)|_X shared by every datum in X.
pub fn xnorm_flow_limit(p: &ParameterSet) -> f64 {
    let one_m = 1.0 - p.m();
    (p.sigma() * p.m()).powf(1.0 / one_m)
        * (p.theta() * one_m).powf(-p.m() / one_m)
        * p.sphere_area()
}

/// Tail-norm monitoring along a trajectory in original variables.
///
/// Snapshot seminorms are measured after attaching the fitted power tail
/// (the finite grid otherwise truncates the supremum); a fitted exponent
/// incompatible with the Barenblatt decay raises `NotInX`.
pub fn xnorm_flow(traj: &Trajectory) -> Result<XnormFlowReport, DiagnosticsError> {
    assert!(!traj.selfsimilar, "xnorm_flow runs in original variables");
    let p = &traj.params;
    let mass = traj.states[0].l1_gamma()?;
    let spec = BarenblattSpec::new(*p, mass, 0.0).map_err(|e| DiagnosticsError::Regime(e.to_string()))?;
    let bar_exp = -p.tail_power();
    let pw = 1.0 / (1.0 - p.m());
    let mut series = Vec::new();
    let mut renorm = Vec::new();
    for (t, state) in traj.times.iter().zip(&traj.states) {
        if *t <= 0.0 {
            continue;
        }
        let trim = state.len() - state.wall_trim_index();
        let (exp_fit, _) = state
            .fit_tail_exponent(1.0, trim)
            .ok_or_else(|| DiagnosticsError::Window("tail fit failed".into()))?;
        if (exp_fit - bar_exp).abs() > 0.25 {
            return Err(DiagnosticsError::NotInX(format!(
                "fitted tail exponent {exp_fit:.3} vs Barenblatt {bar_exp:.3} at t = {t}"
            )));
        }
        // attach the Barenblatt-exponent tail matched at the last clean cell
        let anchor = state.wall_trim_index() - 1;
        let coeff = state.values()[anchor] * state.grid()[anchor].powf(p.tail_power());
        let trimmed = RadialField::new(
            *p,
            state.grid()[..=anchor].to_vec(),
            state.values()[..=anchor].to_vec(),
            Some(crate::field::PowerTail { exponent: bar_exp, coefficient: coeff }),
        )?;
        let sn = match tail_seminorm(&trimmed).0 {
            ExtReal::Finite(v) => v,
            ExtReal::Infinite => {
                return Err(DiagnosticsError::NotInX(format!("infinite seminorm at t = {t}")))
            }
        };
        series.push((*t, sn, sn * t.powf(-pw)));
        // renormalized X-norm distance to the Barenblatt with equal mass
        let diff: Vec<f64> = trimmed
            .grid()
            .iter()
            .zip(trimmed.values())
            .map(|(r, v)| (v - spec.eval_abs(*t, *r)).abs())
            .collect();
        let dfield = RadialField::new(*p, trimmed.grid().to_vec(), diff, None)?;
        let dn = crate::tailspace::tail_norm(&dfield).finite().unwrap_or(f64::INFINITY);
        renorm.push((*t, dn * t.powf(-pw)));
    }
    if series.is_empty() {
        return Err(DiagnosticsError::NoData);
    }
    let mut margin = f64::INFINITY;
    for w in series.windows(2) {
        margin = margin.min((w[0].2 - w[1].2) / w[0].2.abs().max(1e-300));
    }
    let min_scaled = series.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
    Ok(XnormFlowReport {
        series,
        monotonicity_margin: margin,
        lower_bound: xnorm_flow_limit(p),
        min_scaled,
        renormalized_distance: renorm,
    })
}

/// Prepare a solver snapshot for tail classification: drop the outer
/// wall layer and zero values below `floor_rel` of the peak.
///
/// Data that start with empty regions develop a spreading artifact from
/// the vacuum coefficient floor; its dust values would dominate log-log
/// fits. A relative floor of ~1e-13 removes it. Data that are positive
/// everywhere (fat tails spanning many decades) carry genuine values far
/// below any relative floor, so there `floor_rel = 0` is the right call.
pub fn snapshot_for_classification(state: &RadialField, floor_rel: f64) -> RadialField {
    let keep = state.wall_trim_index();
    let vmax = state.values().iter().cloned().fold(0.0, f64::max);
    let floor = floor_rel * vmax;
    let values: Vec<f64> =
        state.values()[..keep].iter().map(|v| if *v < floor { 0.0 } else { *v }).collect();
    RadialField::new(*state.params(), state.grid()[..keep].to_vec(), values, None)
        .expect("trimmed snapshot")
}

/// Quadrature-only version of the scaled tail-norm series on the closed
/// Barenblatt family (no solver): returns (t, t^{-1/(1-m)} |𝔅(t)|_X).
pub fn barenblatt_xnorm_series(
    p: &ParameterSet,
    mass: f64,
    times: &[f64],
    r_span: (f64, f64),
) -> Result<Vec<(f64, f64)>, DiagnosticsError> {
    let spec = BarenblattSpec::new(*p, mass, 0.0).map_err(|e| DiagnosticsError::Regime(e.to_string()))?;
    let pw = 1.0 / (1.0 - p.m());
    let mut out = Vec::new();
    for &t in times {
        let tail = crate::field::PowerTail {
            exponent: -p.tail_power(),
            coefficient: spec.tail_coefficient(t),
        };
        let f = RadialField::sample(*p, r_span.0, r_span.1, 32, |r| spec.eval_abs(t, r), Some(tail))?;
        let sn = tail_seminorm(&f)
            .0
            .finite()
            .ok_or_else(|| DiagnosticsError::NotInX("Barenblatt seminorm infinite".into()))?;
        out.push((t, sn * t.powf(-pw)));
    }
    Ok(out)
}
