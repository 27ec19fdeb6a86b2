//! Closed-form solution families.
//!
//! The fundamental (Barenblatt) solution of the weighted fast diffusion
//! equation is self-similar:
//!
//! ```text
//!     𝔅(t+T, x; M) = (t+T)^{1/(1-m)} / [ b₀ (t+T)^{σϑ} / M^{σϑ(1-m)} + b₁ |x|^σ ]^{1/(1-m)} ,
//! ```
//!
//! equivalently ζ^{d-γ} R⋆(t+T)^{-(d-γ)} B_M(ζx/R⋆(t+T)) with the
//! stationary profile B_M = (C(M) + |x|^σ)^{1/(m-1)}. Matching the two
//! forms pins the constants, which depend only on (d, m, γ, β):
//!
//! ```text
//!     b₁ = ϑ (1-m) / (σ m),        b₀ = M̄^{σϑ(1-m)} · b₁^{-(d-γ)ϑ(1-m)} ,
//! ```
//!
//! where M̄ is the weighted mass of the normalized stationary profile,
//! computed from the Euler Beta integral
//!
//! ```text
//!     M̄ = ω_d Γ((d-γ)/σ) Γ(1/(1-m) - (d-γ)/σ) / (σ Γ(1/(1-m))) .
//! ```
//!
//! Both constants are cross-checked by an independent finite-difference
//! residual oracle and by mass quadrature (see `verify` and the tests).
//!
//! The module also carries the explicit subsolution family
//! A/(D(t)+B|x|^σ)^α and supersolution family E G(t)^α/(G(t)+F|x|^σ)^α,
//! whose spatial tails |x|^{-σα} are strictly fatter than the Barenblatt
//! tail |x|^{-σ/(1-m)} — the anomalous-tail barriers.

use crate::params::ParameterSet;
use serde::Serialize;
use statrs::function::gamma::gamma;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("mass M = {0} must be positive")]
    NonpositiveMass(f64),
    #[error("degenerate time: t + T = {0} must be positive")]
    DegenerateTime(f64),
    #[error("parameter error: {0}")]
    Parameter(String),
}

/// Weighted mass of the normalized stationary profile,
/// M̄ = ∫ (1+|x|^σ)^{1/(m-1)} |x|^{-γ} dx, via the Gamma-function formula.
pub fn reference_mass(p: &ParameterSet) -> f64 {
    let e = p.exponents();
    let dg = p.dim_gamma();
    let pm = 1.0 / (1.0 - p.m());
    p.sphere_area() * gamma(dg / e.sigma) * gamma(pm - dg / e.sigma) / (e.sigma * gamma(pm))
}

/// Mass constant C(M) = (M̄/M)^{σ(1-m)/(σ-(d-γ)(1-m))} of the stationary
/// profile B_M = (C(M)+|x|^σ)^{1/(m-1)}.
pub fn mass_constant(p: &ParameterSet, mass: f64) -> Result<f64, ProfileError> {
    if !(mass > 0.0) {
        return Err(ProfileError::NonpositiveMass(mass));
    }
    let e = p.exponents();
    let one_m = 1.0 - p.m();
    // σ - (d-γ)(1-m) = 1/ϑ
    let expo = e.sigma * one_m * e.theta;
    Ok((reference_mass(p) / mass).powf(expo))
}

/// Stationary Barenblatt profile B_M(r) = (C(M) + r^σ)^{1/(m-1)}.
pub fn stationary_profile(p: &ParameterSet, mass: f64, r: f64) -> Result<f64, ProfileError> {
    let c = mass_constant(p, mass)?;
    let e = p.exponents();
    Ok((c + r.powf(e.sigma)).powf(1.0 / (p.m() - 1.0)))
}

/// The self-similar constants (b₀, b₁) of the fundamental solution,
/// independent of the mass.
pub fn derive_barenblatt_constants(p: &ParameterSet) -> (f64, f64) {
    let e = p.exponents();
    let one_m = 1.0 - p.m();
    let b1 = e.theta * one_m / (e.sigma * p.m());
    let b0 = reference_mass(p).powf(e.sigma * e.theta * one_m) * b1.powf(-p.dim_gamma() * e.theta * one_m);
    (b0, b1)
}

/// A Barenblatt solution pinned by (mass, time shift); caches b₀, b₁ and
/// C(M) so evaluation is a couple of `powf`s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarenblattSpec {
    pub params: ParameterSet,
    pub mass: f64,
    pub t_shift: f64,
    pub b0: f64,
    pub b1: f64,
    pub c_of_m: f64,
}

impl BarenblattSpec {
    pub fn new(params: ParameterSet, mass: f64, t_shift: f64) -> Result<Self, ProfileError> {
        if !(mass > 0.0) {
            return Err(ProfileError::NonpositiveMass(mass));
        }
        let (b0, b1) = derive_barenblatt_constants(&params);
        let c_of_m = mass_constant(&params, mass)?;
        Ok(BarenblattSpec { params, mass, t_shift, b0, b1, c_of_m })
    }

    /// 𝔅(t + t_shift, r; M). Errors when t + t_shift ≤ 0.
    pub fn eval(&self, t: f64, r: f64) -> Result<f64, ProfileError> {
        let s = t + self.t_shift;
        if !(s > 0.0) {
            return Err(ProfileError::DegenerateTime(s));
        }
        Ok(self.eval_abs(s, r))
    }

    /// 𝔅(s, r; M) at absolute solution time s > 0 (no shift applied).
    pub fn eval_abs(&self, s: f64, r: f64) -> f64 {
        let e = self.params.exponents();
        let one_m = 1.0 - self.params.m();
        let pexp = 1.0 / one_m;
        let q = self.b0 * s.powf(e.sigma * e.theta) / self.mass.powf(e.sigma * e.theta * one_m);
        s.powf(pexp) / (q + self.b1 * r.powf(e.sigma)).powf(pexp)
    }

    /// Coefficient of the minimal tail: 𝔅(s,r;M) r^{σ/(1-m)} → this as r→∞.
    pub fn tail_coefficient(&self, s: f64) -> f64 {
        (s / self.b1).powf(1.0 / (1.0 - self.params.m()))
    }
}

/// Subsolution family V(t,r) = A / (D(t) + B r^σ)^α with
/// D(t) = (σ A^{m-1} m B (d-γ) (1-α(1-m)) t + t₀)^{1/(1-α(1-m))}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubsolutionSpec {
    pub params: ParameterSet,
    pub a: f64,
    pub b: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub t0: f64,
}

/// Upper end of the subsolution ε-interval, 2/(1-m) - (2/σ)(d-γ).
pub fn epsilon_upper(p: &ParameterSet) -> f64 {
    2.0 / (1.0 - p.m()) - 2.0 * p.dim_gamma() / p.sigma()
}

impl SubsolutionSpec {
    pub fn new(params: ParameterSet, a: f64, b: f64, epsilon: f64, t0: f64) -> Result<Self, ProfileError> {
        let eps_hi = epsilon_upper(&params);
        if !(epsilon > 0.0 && epsilon < eps_hi) {
            return Err(ProfileError::Parameter(format!(
                "epsilon = {epsilon} outside (0, {eps_hi})"
            )));
        }
        if !(a > 0.0 && b > 0.0 && t0 > 0.0) {
            return Err(ProfileError::Parameter("A, B, t0 must be positive".into()));
        }
        let alpha = 1.0 / (1.0 - params.m()) - epsilon / 2.0;
        Ok(SubsolutionSpec { params, a, b, epsilon, alpha, t0 })
    }

    /// D(t); strictly increasing in t, D(0) = t₀^{1/(1-α(1-m))}.
    pub fn d_of_t(&self, t: f64) -> f64 {
        let p = &self.params;
        let one_m = 1.0 - p.m();
        let chi = 1.0 - self.alpha * one_m; // = ε(1-m)/2 > 0
        let rate = p.sigma() * self.a.powf(p.m() - 1.0) * p.m() * self.b * p.dim_gamma() * chi;
        (rate * t + self.t0).powf(1.0 / chi)
    }

    pub fn eval(&self, t: f64, r: f64) -> f64 {
        let d = self.d_of_t(t);
        self.a / (d + self.b * r.powf(self.params.sigma())).powf(self.alpha)
    }
}

/// Supersolution family V̄(t,r) = E G(t)^α / (G(t) + F r^σ)^α with
/// G(t) = t₀ + H t and H above the comparison threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupersolutionSpec {
    pub params: ParameterSet,
    pub e: f64,
    pub f: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub t0: f64,
    pub h: f64,
}

/// Minimal admissible drift H = m σ F² E^{m-1} (2+β-d+σαm); any positive
/// H works when the bracket is negative.
pub fn minimal_supersolution_drift(p: &ParameterSet, e: f64, f: f64, epsilon: f64) -> f64 {
    let alpha = 1.0 / (1.0 - p.m()) - epsilon / 2.0;
    let bracket = 2.0 + p.beta() - p.d() as f64 + p.sigma() * alpha * p.m();
    p.m() * p.sigma() * f * f * e.powf(p.m() - 1.0) * bracket
}

impl SupersolutionSpec {
    pub fn new(
        params: ParameterSet,
        e: f64,
        f: f64,
        epsilon: f64,
        t0: f64,
        h: f64,
    ) -> Result<Self, ProfileError> {
        let eps_hi = epsilon_upper(&params);
        if !(epsilon > 0.0 && epsilon < eps_hi) {
            return Err(ProfileError::Parameter(format!(
                "epsilon = {epsilon} outside (0, {eps_hi})"
            )));
        }
        if !(e > 0.0 && f > 0.0 && t0 > 0.0) {
            return Err(ProfileError::Parameter("E, F, t0 must be positive".into()));
        }
        let h_min = minimal_supersolution_drift(&params, e, f, epsilon);
        if !(h > 0.0 && h >= h_min) {
            return Err(ProfileError::Parameter(format!(
                "drift H = {h} below the admissible threshold {h_min}"
            )));
        }
        let alpha = 1.0 / (1.0 - params.m()) - epsilon / 2.0;
        Ok(SupersolutionSpec { params, e, f, epsilon, alpha, t0, h })
    }

    pub fn g_of_t(&self, t: f64) -> f64 {
        self.t0 + self.h * t
    }

    pub fn eval(&self, t: f64, r: f64) -> f64 {
        let g = self.g_of_t(t);
        self.e * g.powf(self.alpha) / (g + self.f * r.powf(self.params.sigma())).powf(self.alpha)
    }
}

/// Integrability classification of the subsolution family by ε.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsolutionClass {
    IntegrableSubsolution,
    NonIntegrableSubsolution,
    NotASubsolution,
}

/// Classify ε against the thresholds 2/(1-m) - (2/σ)(d-γ) and its 1/m
/// multiple: below the first the subsolution is integrable, between them
/// it is a subsolution outside L¹_γ, above the second it stops being a
/// subsolution.
pub fn nonintegrable_range(p: &ParameterSet, epsilon: f64) -> SubsolutionClass {
    let lo = epsilon_upper(p);
    let hi = lo / p.m();
    if epsilon < lo {
        SubsolutionClass::IntegrableSubsolution
    } else if epsilon <= hi {
        SubsolutionClass::NonIntegrableSubsolution
    } else {
        SubsolutionClass::NotASubsolution
    }
}

/// The slow-decay example w₀ = (1 + |x|^σ)^{-m/(1-m)}: integrable for
/// m > (d-γ)/(d-γ+σ) but with a tail strictly fatter than Barenblatt.
/// With σ = 2 and no weights this is the classical counterexample datum.
pub fn w0_profile(p: &ParameterSet, r: f64) -> Result<f64, ProfileError> {
    let dg = p.dim_gamma();
    let m_int = dg / (dg + p.sigma());
    if !(p.m() > m_int) {
        return Err(ProfileError::Parameter(format!(
            "w0 is not integrable: need m > {m_int}"
        )));
    }
    Ok((1.0 + r.powf(p.sigma())).powf(-p.m() / (1.0 - p.m())))
}

/// The sub/supersolution pair that brackets w₀ at t = 0 pointwise:
/// both reduce to w₀ exactly at t = 0 (ε = 2, A=B=E=F=1, t₀=1) and the
/// supersolution drift sits at its admissible threshold (or a positive
/// floor when the threshold is negative).
pub fn w0_bracket(p: &ParameterSet) -> Result<(SubsolutionSpec, SupersolutionSpec), ProfileError> {
    // w₀ = 1/(1+r^σ)^α with α = m/(1-m), i.e. ε = 2 exactly.
    let epsilon = 2.0;
    if epsilon_upper(p) <= epsilon {
        return Err(ProfileError::Parameter(
            "regime too close to critical: w0 is not inside the subsolution family".into(),
        ));
    }
    let sub = SubsolutionSpec::new(*p, 1.0, 1.0, epsilon, 1.0)?;
    let h_min = minimal_supersolution_drift(p, 1.0, 1.0, epsilon);
    let h = if h_min > 0.0 { h_min } else { 1.0 };
    let sup = SupersolutionSpec::new(*p, 1.0, 1.0, epsilon, 1.0, h)?;
    Ok((sub, sup))
}
