//! Radial finite-volume solver for the weighted fast diffusion Cauchy
//! problem, and the self-similar (Fokker–Planck) view of trajectories.
//!
//! Discretization: logarithmic face grid r_min = f₀ < … < f_N = r_max,
//! cell centers at geometric face means, exact weighted cell volumes
//! W_i = ω_d (f_{i+1}^{d-γ} - f_i^{d-γ})/(d-γ) (the singular weight is
//! integrated, never sampled), and fluxes ω_d f^{d-1-β} ∂_r(u^m) across
//! interior faces with no-flux outer and inner boundaries. Time stepping
//! is implicit Euler; the nonlinear system per step
//!
//! ```text
//!     u_new - dt · L_h(u_new^m) = u_old
//! ```
//!
//! is solved by freezing the coefficient a = m u_iter^{m-1} per inner
//! iteration and solving the resulting tridiagonal system to a fixed
//! point. Every inner iterate conserves the weighted mass exactly
//! (fluxes telescope), so mass drift is at round-off level.

use crate::field::{FieldError, RadialField};
use crate::params::ParameterSet;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("grid error: {0}")]
    Grid(String),
    #[error("no convergence at t = {t}: {iterations} inner iterations, residual {residual:.3e}")]
    NonConvergence { t: f64, iterations: usize, residual: f64 },
    #[error("negative state at t = {t}: min value {min:.3e}")]
    NegativeState { t: f64, min: f64 },
    #[error("time step underflow at t = {t} (dt = {dt:.3e})")]
    TimeStepUnderflow { t: f64, dt: f64 },
    #[error("state does not live on this grid")]
    GridMismatch,
    #[error("bad output times: {0}")]
    OutputTimes(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("persist error: {0}")]
    Persist(String),
}

/// Logarithmic finite-volume grid with exact weighted geometry.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    params: ParameterSet,
    faces: Vec<f64>,
    centers: Vec<f64>,
    /// Weighted cell volumes ∫_cell |x|^{-γ} dx (sphere factor included).
    volumes: Vec<f64>,
    /// φ_j = ω_d f_j^{d-1-β} / (c_j - c_{j-1}) on interior faces; zero on
    /// the two boundary faces.
    face_coeff: Vec<f64>,
    cells_per_decade: usize,
}

/// Build a log-spaced grid over `[r_min, r_max]`.
pub fn build_grid(
    p: &ParameterSet,
    r_min: f64,
    r_max: f64,
    cells_per_decade: usize,
) -> Result<RadialGrid, SolverError> {
    if !(r_min > 0.0 && r_max > r_min) {
        return Err(SolverError::Grid(format!("need 0 < r_min < r_max, got [{r_min}, {r_max}]")));
    }
    if cells_per_decade < 8 {
        return Err(SolverError::Grid(format!("cells_per_decade = {cells_per_decade} < 8")));
    }
    let n = ((cells_per_decade as f64) * (r_max / r_min).log10()).round().max(2.0) as usize;
    let ratio = r_max / r_min;
    let faces: Vec<f64> = (0..=n).map(|i| r_min * ratio.powf(i as f64 / n as f64)).collect();
    let centers: Vec<f64> = faces.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect();
    let dg = p.dim_gamma();
    let omega = p.sphere_area();
    let volumes: Vec<f64> =
        faces.windows(2).map(|w| omega * (w[1].powf(dg) - w[0].powf(dg)) / dg).collect();
    let mut face_coeff = vec![0.0; n + 1];
    for j in 1..n {
        face_coeff[j] =
            omega * faces[j].powf(p.d() as f64 - 1.0 - p.beta()) / (centers[j] - centers[j - 1]);
    }
    Ok(RadialGrid { params: *p, faces, centers, volumes, face_coeff, cells_per_decade })
}

impl RadialGrid {
    pub fn params(&self) -> &ParameterSet {
        &self.params
    }
    pub fn n_cells(&self) -> usize {
        self.centers.len()
    }
    pub fn faces(&self) -> &[f64] {
        &self.faces
    }
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }
    pub fn cells_per_decade(&self) -> usize {
        self.cells_per_decade
    }
    pub fn r_min(&self) -> f64 {
        self.faces[0]
    }
    pub fn r_max(&self) -> f64 {
        *self.faces.last().unwrap()
    }

    /// Sample a closed form at the cell centers.
    pub fn field_from_fn<F: Fn(f64) -> f64>(&self, f: F) -> Result<RadialField, SolverError> {
        let values: Vec<f64> = self.centers.iter().map(|r| f(*r)).collect();
        Ok(RadialField::new(self.params, self.centers.clone(), values, None)?)
    }

    pub fn field_from_values(&self, values: Vec<f64>) -> Result<RadialField, SolverError> {
        Ok(RadialField::new(self.params, self.centers.clone(), values, None)?)
    }

    /// Weighted mass Σ W_i u_i of a cell vector.
    pub fn mass_of(&self, values: &[f64]) -> f64 {
        self.volumes.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    fn check_state(&self, u: &RadialField) -> Result<(), SolverError> {
        if u.len() != self.centers.len() || u.grid()[0] != self.centers[0] {
            return Err(SolverError::GridMismatch);
        }
        Ok(())
    }

    /// Discrete operator applied to v (a cell vector): divergence of the
    /// face fluxes of v divided by the weighted cell volume.
    fn l_of(&self, v: &[f64], out: &mut [f64]) {
        let n = v.len();
        for i in 0..n {
            let flux_hi = if i + 1 < n { self.face_coeff[i + 1] * (v[i + 1] - v[i]) } else { 0.0 };
            let flux_lo = if i > 0 { self.face_coeff[i] * (v[i] - v[i - 1]) } else { 0.0 };
            out[i] = (flux_hi - flux_lo) / self.volumes[i];
        }
    }
}

/// Discrete L_{γ,β} u^m at the cell centers (no-flux boundaries).
///
/// The output carries signed values, so it is returned as raw cell data
/// rather than a nonnegative field.
pub fn apply_operator(grid: &RadialGrid, u: &RadialField) -> Result<Vec<f64>, SolverError> {
    grid.check_state(u)?;
    let m = grid.params.m();
    let um: Vec<f64> = u.values().iter().map(|v| v.max(0.0).powf(m)).collect();
    let mut out = vec![0.0; um.len()];
    grid.l_of(&um, &mut out);
    Ok(out)
}

/// Inner-iteration statistics of one implicit step.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepStats {
    pub inner_iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct StepOptions {
    /// Relative fixed-point tolerance on the state update.
    pub tol: f64,
    pub max_inner: usize,
    /// Floor applied only inside the coefficient a = m u^{m-1}.
    pub coefficient_floor: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        StepOptions { tol: 1e-10, max_inner: 60, coefficient_floor: 1e-30 }
    }
}

fn thomas_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    scratch[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let den = diag[i] - lower[i] * scratch[i - 1];
        scratch[i] = upper[i] / den;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / den;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

/// One implicit Euler step on a raw cell vector.
///
/// Newton-type lagged-coefficient iteration: with a = m u_k^{m-1} frozen,
/// solve (I - dt L_h diag(a)) u = u_old + dt L_h(u_k^m - a u_k) and
/// iterate; the fixed point solves u - dt L_h(u^m) = u_old exactly.
pub fn step_raw(
    grid: &RadialGrid,
    u_old: &[f64],
    dt: f64,
    t_next: f64,
    opts: &StepOptions,
) -> Result<(Vec<f64>, StepStats), SolverError> {
    let n = u_old.len();
    let m = grid.params.m();
    let mut u = u_old.to_vec();
    let mut um = vec![0.0; n];
    let mut corr = vec![0.0; n];
    let mut lcorr = vec![0.0; n];
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut a = vec![0.0; n];
    let mut last_rel = f64::INFINITY;

    for it in 0..opts.max_inner {
        for i in 0..n {
            let ui = u[i].max(0.0);
            um[i] = ui.powf(m);
            a[i] = m * ui.max(opts.coefficient_floor).powf(m - 1.0);
            corr[i] = um[i] - a[i] * u[i];
        }
        grid.l_of(&corr, &mut lcorr);
        for i in 0..n {
            rhs[i] = u_old[i] + dt * lcorr[i];
            let phi_lo = grid.face_coeff[i];
            let phi_hi = if i + 1 < n { grid.face_coeff[i + 1] } else { 0.0 };
            diag[i] = 1.0 + dt * (phi_lo + phi_hi) * a[i] / grid.volumes[i];
            lower[i] = if i > 0 { -dt * grid.face_coeff[i] * a[i - 1] / grid.volumes[i] } else { 0.0 };
            upper[i] = if i + 1 < n {
                -dt * grid.face_coeff[i + 1] * a[i + 1] / grid.volumes[i]
            } else {
                0.0
            };
        }
        thomas_solve(&lower, &diag, &upper, &mut rhs, &mut scratch);
        let mut du = 0.0_f64;
        let mut umax = 0.0_f64;
        for i in 0..n {
            du = du.max((rhs[i] - u[i]).abs());
            umax = umax.max(rhs[i].abs());
        }
        std::mem::swap(&mut u, &mut rhs);
        last_rel = du / umax.max(1e-300);
        if last_rel <= opts.tol {
            let umax = u.iter().cloned().fold(0.0_f64, f64::max);
            let umin = u.iter().cloned().fold(f64::INFINITY, f64::min);
            if umin < -1e-14 * umax {
                return Err(SolverError::NegativeState { t: t_next, min: umin });
            }
            for v in u.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            return Ok((u, StepStats { inner_iterations: it + 1, residual: last_rel }));
        }
    }
    Err(SolverError::NonConvergence { t: t_next, iterations: opts.max_inner, residual: last_rel })
}

/// One implicit Euler step on a field.
pub fn step(
    grid: &RadialGrid,
    u: &RadialField,
    dt: f64,
    opts: &StepOptions,
) -> Result<(RadialField, StepStats), SolverError> {
    if !(dt > 0.0) {
        return Err(SolverError::TimeStepUnderflow { t: 0.0, dt });
    }
    grid.check_state(u)?;
    let (values, stats) = step_raw(grid, u.values(), dt, dt, opts)?;
    Ok((grid.field_from_values(values)?, stats))
}

/// Per-snapshot audit record (step statistics aggregated since the
/// previous snapshot).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AuditRecord {
    pub time: f64,
    pub weighted_mass: f64,
    pub min_value: f64,
    pub dt_last: f64,
    pub steps: usize,
    pub max_inner_iterations: usize,
    /// Time-integrated proxy for the u^m flux blocked at the outer
    /// no-flux wall; nonzero values flag tail contamination.
    pub boundary_flux: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: ParameterSet,
    pub times: Vec<f64>,
    pub states: Vec<RadialField>,
    pub audits: Vec<AuditRecord>,
    /// True when (times, states) are in self-similar variables (τ, y, v).
    pub selfsimilar: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
    pub fn mass_series(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.l1_gamma().unwrap_or(f64::NAN)).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub step: StepOptions,
    /// Initial dt; default dt_rel_cap/4 times the first output time.
    pub dt_init: Option<f64>,
    /// Grow dt when inner iterations sit at the bottom of the band,
    /// shrink when they exceed it.
    pub dt_growth: f64,
    pub dt_shrink: f64,
    pub max_dt: Option<f64>,
    /// Accuracy cap dt ≤ dt_rel_cap · (t + t_first): implicit Euler is
    /// unconditionally stable, so the iteration count alone would let dt
    /// grow without bound; the self-similar dynamics set the time scale.
    pub dt_rel_cap: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            step: StepOptions::default(),
            dt_init: None,
            dt_growth: 1.25,
            dt_shrink: 0.6,
            max_dt: None,
            dt_rel_cap: 1e-3,
        }
    }
}

/// Evolve `u0` (the state at t = 0) through the requested output times.
///
/// dt adapts to keep the inner-iteration count in [3, 8]; output times
/// are reached exactly by capping dt, never by interpolation. Returns
/// the trajectory (with `u0` prepended at t = 0) and per-output audits.
pub fn solve(
    grid: &RadialGrid,
    u0: &RadialField,
    output_times: &[f64],
    opts: &SolveOptions,
) -> Result<Trajectory, SolverError> {
    grid.check_state(u0)?;
    if output_times.is_empty() {
        return Err(SolverError::OutputTimes("no output times requested".into()));
    }
    if output_times.windows(2).any(|w| w[0] >= w[1]) || output_times[0] <= 0.0 {
        return Err(SolverError::OutputTimes("output times must be positive and increasing".into()));
    }
    let p = grid.params;
    let n = grid.n_cells();
    let mut u = u0.values().to_vec();
    let mut t = 0.0_f64;
    let t_first = output_times[0];
    let mut dt = opts.dt_init.unwrap_or(0.25 * opts.dt_rel_cap * t_first);
    let dt_min = 1e-14 * output_times.last().unwrap();

    let mut times = vec![0.0];
    let mut states = vec![u0.clone()];
    let mut audits = vec![AuditRecord {
        time: 0.0,
        weighted_mass: grid.mass_of(&u),
        min_value: u.iter().cloned().fold(f64::INFINITY, f64::min),
        dt_last: 0.0,
        steps: 0,
        max_inner_iterations: 0,
        boundary_flux: 0.0,
    }];

    let wall_coeff = p.sphere_area() * grid.r_max().powf(p.d() as f64 - 1.0 - p.beta())
        / (grid.r_max() - grid.centers[n - 1]);

    for &t_out in output_times {
        let mut steps = 0usize;
        let mut max_inner = 0usize;
        let mut boundary_flux = 0.0;
        let mut dt_last = dt;
        while t < t_out {
            let accuracy_cap = opts.dt_rel_cap * (t + t_first);
            let dt_acc = dt.min(accuracy_cap);
            let capped = dt_acc >= t_out - t;
            let dt_try = if capped { t_out - t } else { dt_acc };
            match step_raw(grid, &u, dt_try, t + dt_try, &opts.step) {
                Ok((next, stats)) => {
                    boundary_flux += dt_try * wall_coeff * next[n - 1].max(0.0).powf(p.m());
                    u = next;
                    t = if capped { t_out } else { t + dt_try };
                    steps += 1;
                    max_inner = max_inner.max(stats.inner_iterations);
                    dt_last = dt_try;
                    // Newton typically lands on 3-4 iterations for any
                    // reasonable dt, so growth triggers inside the band
                    if stats.inner_iterations <= 4 {
                        dt *= opts.dt_growth;
                    } else if stats.inner_iterations > 8 {
                        dt *= opts.dt_shrink;
                    }
                    if let Some(cap) = opts.max_dt {
                        dt = dt.min(cap);
                    }
                }
                Err(SolverError::NonConvergence { .. }) | Err(SolverError::NegativeState { .. })
                    if dt_try > dt_min =>
                {
                    dt = dt_try * 0.5;
                    if dt <= dt_min {
                        return Err(SolverError::TimeStepUnderflow { t, dt });
                    }
                }
                Err(e) => return Err(e),
            }
        }
        times.push(t_out);
        states.push(grid.field_from_values(u.clone())?);
        audits.push(AuditRecord {
            time: t_out,
            weighted_mass: grid.mass_of(&u),
            min_value: u.iter().cloned().fold(f64::INFINITY, f64::min),
            dt_last,
            steps,
            max_inner_iterations: max_inner,
            boundary_flux,
        });
    }
    Ok(Trajectory { params: p, times, states, audits, selfsimilar: false })
}

/// Map a trajectory to self-similar variables
/// v(τ, y) = (R(t)/ζ)^{d-γ} u(t, x), y = ζ x / R(t), τ = σ^{-1} log(R(t)/R(0)),
/// with R(t) = R⋆(t+1). Weighted mass is invariant under the map.
pub fn to_selfsimilar(traj: &Trajectory) -> Result<Trajectory, SolverError> {
    assert!(!traj.selfsimilar, "trajectory already in self-similar variables");
    let p = traj.params;
    let e = p.exponents();
    let r0 = crate::params::r_star(1.0, &p).expect("R(0)");
    let mut times = Vec::with_capacity(traj.len());
    let mut states = Vec::with_capacity(traj.len());
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let r_t = crate::params::r_star(t + 1.0, &p).expect("R(t)");
        let tau = (r_t / r0).ln() / e.sigma;
        let scale = (r_t / e.zeta).powf(p.dim_gamma());
        let y_grid: Vec<f64> = state.grid().iter().map(|x| e.zeta * x / r_t).collect();
        let v: Vec<f64> = state.values().iter().map(|u| scale * u).collect();
        times.push(tau);
        states.push(RadialField::new(p, y_grid, v, None)?);
    }
    Ok(Trajectory {
        params: p,
        times,
        states,
        audits: traj.audits.clone(),
        selfsimilar: true,
    })
}

/// Inverse of [`to_selfsimilar`].
pub fn from_selfsimilar(traj: &Trajectory) -> Result<Trajectory, SolverError> {
    assert!(traj.selfsimilar, "trajectory is not in self-similar variables");
    let p = traj.params;
    let e = p.exponents();
    let mut times = Vec::with_capacity(traj.len());
    let mut states = Vec::with_capacity(traj.len());
    for (tau, state) in traj.times.iter().zip(&traj.states) {
        let t = (e.sigma * tau / e.theta).exp() - 1.0;
        let r_t = crate::params::r_star(t + 1.0, &p).expect("R(t)");
        let scale = (r_t / e.zeta).powf(p.dim_gamma());
        let x_grid: Vec<f64> = state.grid().iter().map(|y| y * r_t / e.zeta).collect();
        let u: Vec<f64> = state.values().iter().map(|v| v / scale).collect();
        times.push(t);
        states.push(RadialField::new(p, x_grid, u, None)?);
    }
    Ok(Trajectory {
        params: p,
        times,
        states,
        audits: traj.audits.clone(),
        selfsimilar: false,
    })
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    params: serde_json::Value,
    grid: ManifestGrid,
    times: Vec<f64>,
    selfsimilar: bool,
    audits: Vec<AuditRecord>,
}

#[derive(Serialize, Deserialize)]
struct ManifestGrid {
    r_min: f64,
    r_max: f64,
    cells_per_decade: usize,
    n_cells: usize,
}

impl Trajectory {
    /// Persist as a directory: `manifest.json` plus one CSV per snapshot.
    pub fn persist(&self, dir: &Path, grid: Option<&RadialGrid>) -> Result<(), SolverError> {
        std::fs::create_dir_all(dir)?;
        let gspec = match grid {
            Some(g) => ManifestGrid {
                r_min: g.r_min(),
                r_max: g.r_max(),
                cells_per_decade: g.cells_per_decade(),
                n_cells: g.n_cells(),
            },
            None => {
                let s = &self.states[0];
                ManifestGrid {
                    r_min: s.grid()[0],
                    r_max: s.r_max(),
                    cells_per_decade: 0,
                    n_cells: s.len(),
                }
            }
        };
        let manifest = Manifest {
            params: serde_json::to_value(self.params).map_err(|e| SolverError::Persist(e.to_string()))?,
            grid: gspec,
            times: self.times.clone(),
            selfsimilar: self.selfsimilar,
            audits: self.audits.clone(),
        };
        let mf = serde_json::to_string_pretty(&manifest).map_err(|e| SolverError::Persist(e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), mf)?;
        for (i, state) in self.states.iter().enumerate() {
            state
                .write_csv(&dir.join(format!("snapshot_{i:04}.csv")))
                .map_err(SolverError::Field)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Trajectory, SolverError> {
        let mf = std::fs::read_to_string(dir.join("manifest.json"))?;
        let manifest: Manifest =
            serde_json::from_str(&mf).map_err(|e| SolverError::Persist(e.to_string()))?;
        let params: ParameterSet = serde_json::from_value(manifest.params)
            .map_err(|e| SolverError::Persist(e.to_string()))?;
        let mut states = Vec::with_capacity(manifest.times.len());
        for i in 0..manifest.times.len() {
            let f = RadialField::read_csv(&dir.join(format!("snapshot_{i:04}.csv")), Some(params))
                .map_err(SolverError::Field)?;
            states.push(f);
        }
        Ok(Trajectory {
            params,
            times: manifest.times,
            states,
            audits: manifest.audits,
            selfsimilar: manifest.selfsimilar,
        })
    }
}
