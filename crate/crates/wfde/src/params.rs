//! Parameter regime validation and derived exponents.
//!
//! Every other module is built on a validated `(d, γ, β, m)` tuple:
//!
//! * d ≥ 3, γ < d, γ-2 < β ≤ γ(d-2)/d (the boundary β = γ(d-2)/d is
//!   accepted);
//! * m_c < m < 1 with m_c = (d-2-β)/(d-γ).
//!
//! The derived exponents
//!
//! ```text
//!     σ = 2+β-γ,   1/ϑ = (d-γ)(m-m_c),   ζ^{1/ϑ} = (1-m)/(σm),
//!     R⋆(t) = (t/ϑ)^ϑ,
//! ```
//!
//! satisfy σϑ - (d-γ)ϑ(1-m) = 1; they are computed once at validation
//! time and stored so all modules read identical values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Regime violation diagnostics for [`validate_parameters`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegimeError {
    #[error("dimension d = {d} out of range: need d >= 3")]
    Dimension { d: i64 },
    #[error("weight exponent gamma = {gamma} out of range: need gamma < d = {d}")]
    GammaRange { gamma: f64, d: i64 },
    #[error("weight exponent beta = {beta} out of range: need {lo} < beta <= {hi}")]
    BetaRange { beta: f64, lo: f64, hi: f64 },
    #[error("diffusion exponent m = {m} out of range: need m_c = {m_c} < m < 1")]
    DiffusionRange { m: f64, m_c: f64 },
    #[error("parameter {name} is not finite")]
    NotFinite { name: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("time t = {0} must be positive")]
pub struct NonpositiveTime(pub f64);

/// Exponents derived from a validated regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    /// σ = 2 + β - γ.
    pub sigma: f64,
    /// ϑ with 1/ϑ = (d-γ)(m - m_c).
    pub theta: f64,
    /// ζ with ζ^{1/ϑ} = (1-m)/(σ m).
    pub zeta: f64,
    /// Critical exponent m_c = (d-2-β)/(d-γ).
    pub m_c: f64,
}

/// A validated CKN-weight fast diffusion regime.
///
/// Pure value type; construction goes through [`validate_parameters`]
/// (or `ParameterSet::new`), which also computes the derived exponents
/// eagerly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterSet {
    d: u32,
    gamma: f64,
    beta: f64,
    m: f64,
    #[serde(rename = "derived")]
    exponents: Exponents,
}

/// Validate `(d, γ, β, m)` and compute the derived exponents.
///
/// Range checks use strict inequalities with no tolerance; the boundary
/// case β = γ(d-2)/d is accepted.
pub fn validate_parameters(d: i64, gamma: f64, beta: f64, m: f64) -> Result<ParameterSet, RegimeError> {
    for (name, v) in [("gamma", gamma), ("beta", beta), ("m", m)] {
        if !v.is_finite() {
            return Err(RegimeError::NotFinite { name });
        }
    }
    if d < 3 {
        return Err(RegimeError::Dimension { d });
    }
    let df = d as f64;
    if !(gamma < df) {
        return Err(RegimeError::GammaRange { gamma, d });
    }
    let beta_lo = gamma - 2.0;
    let beta_hi = gamma * (df - 2.0) / df;
    if !(beta > beta_lo && beta <= beta_hi) {
        return Err(RegimeError::BetaRange { beta, lo: beta_lo, hi: beta_hi });
    }
    let m_c = (df - 2.0 - beta) / (df - gamma);
    if !(m > m_c && m < 1.0) {
        return Err(RegimeError::DiffusionRange { m, m_c });
    }

    let sigma = 2.0 + beta - gamma;
    let theta = 1.0 / ((df - gamma) * (m - m_c));
    let zeta = ((1.0 - m) / (sigma * m)).powf(theta);
    Ok(ParameterSet {
        d: d as u32,
        gamma,
        beta,
        m,
        exponents: Exponents { sigma, theta, zeta, m_c },
    })
}

impl ParameterSet {
    pub fn new(d: i64, gamma: f64, beta: f64, m: f64) -> Result<Self, RegimeError> {
        validate_parameters(d, gamma, beta, m)
    }

    pub fn d(&self) -> u32 {
        self.d
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn m(&self) -> f64 {
        self.m
    }
    pub fn exponents(&self) -> Exponents {
        self.exponents
    }
    pub fn sigma(&self) -> f64 {
        self.exponents.sigma
    }
    pub fn theta(&self) -> f64 {
        self.exponents.theta
    }
    pub fn zeta(&self) -> f64 {
        self.exponents.zeta
    }
    pub fn m_c(&self) -> f64 {
        self.exponents.m_c
    }

    /// d - γ, the effective weighted dimension.
    pub fn dim_gamma(&self) -> f64 {
        self.d as f64 - self.gamma
    }

    /// Area of the unit (d-1)-sphere, ω_d = 2 π^{d/2} / Γ(d/2).
    pub fn sphere_area(&self) -> f64 {
        let d = self.d as f64;
        2.0 * std::f64::consts::PI.powf(d / 2.0) / statrs::function::gamma::gamma(d / 2.0)
    }

    /// Decay exponent σ/(1-m) of the Barenblatt tail.
    pub fn tail_power(&self) -> f64 {
        self.exponents.sigma / (1.0 - self.m)
    }

    /// Exponent σ/(1-m) - (d-γ) > 0 weighting the outer-mass supremum.
    pub fn tail_norm_power(&self) -> f64 {
        self.tail_power() - self.dim_gamma()
    }
}

/// Self-similar radius R⋆(t) = (t/ϑ)^ϑ.
pub fn r_star(t: f64, p: &ParameterSet) -> Result<f64, NonpositiveTime> {
    if !(t > 0.0) {
        return Err(NonpositiveTime(t));
    }
    let theta = p.theta();
    Ok((t / theta).powf(theta))
}

/// Deserialization re-validates, so a hand-edited config cannot smuggle
/// in an invalid regime.
impl<'de> Deserialize<'de> for ParameterSet {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            d: i64,
            gamma: f64,
            beta: f64,
            m: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        validate_parameters(raw.d, raw.gamma, raw.beta, raw.m).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn valid_base_regime() {
        let p = validate_parameters(3, 0.0, 0.0, 2.0 / 3.0).unwrap();
        assert_relative_eq!(p.m_c(), 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(p.sigma(), 2.0, max_relative = 1e-15);
        assert_relative_eq!(p.theta(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(p.zeta(), 0.25, max_relative = 1e-14);
    }

    #[test]
    fn valid_weighted_regime() {
        let p = validate_parameters(3, 1.0, 0.0, 0.75).unwrap();
        assert_relative_eq!(p.m_c(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(p.sigma(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(p.theta(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn rejects_m_below_critical() {
        let err = validate_parameters(3, 0.0, 0.0, 0.25).unwrap_err();
        assert!(matches!(err, RegimeError::DiffusionRange { .. }));
        // boundary m = m_c is rejected too
        let err = validate_parameters(3, 0.0, 0.0, 1.0 / 3.0).unwrap_err();
        assert!(matches!(err, RegimeError::DiffusionRange { .. }));
    }

    #[test]
    fn rejects_bad_dimension_and_weights() {
        assert!(matches!(
            validate_parameters(2, 0.0, 0.0, 0.5).unwrap_err(),
            RegimeError::Dimension { .. }
        ));
        assert!(matches!(
            validate_parameters(3, 3.0, 0.5, 0.9).unwrap_err(),
            RegimeError::GammaRange { .. }
        ));
        assert!(matches!(
            validate_parameters(3, 0.0, 0.5, 0.9).unwrap_err(),
            RegimeError::BetaRange { .. }
        ));
        // beta on the upper boundary is accepted
        let p = validate_parameters(4, 1.0, 0.5, 0.9).unwrap();
        assert_eq!(p.beta(), 0.5);
    }

    #[test]
    fn exponent_identity_and_positivity() {
        for &(d, gamma, beta, m) in &[
            (3i64, 0.0, 0.0, 2.0 / 3.0),
            (3, 1.0, 0.0, 0.75),
            (4, -1.5, -2.0, 0.9),
            (5, 2.0, 1.2, 0.75),
            (3, -0.7, -1.1, 0.7),
        ] {
            let p = validate_parameters(d, gamma, beta, m).unwrap();
            let e = p.exponents();
            let identity = e.sigma * e.theta - p.dim_gamma() * e.theta * (1.0 - m);
            assert_relative_eq!(identity, 1.0, max_relative = 1e-12);
            assert!(e.sigma > 0.0 && e.theta > 0.0);
            assert!(p.tail_norm_power() > 0.0);
        }
    }

    #[test]
    fn sigma_independent_of_m() {
        let a = validate_parameters(3, 1.0, 0.0, 0.6).unwrap();
        let b = validate_parameters(3, 1.0, 0.0, 0.9).unwrap();
        assert_eq!(a.sigma(), b.sigma());
    }

    #[test]
    fn validation_is_idempotent() {
        let p = validate_parameters(3, 0.5, -0.5, 0.7).unwrap();
        let q = validate_parameters(p.d() as i64, p.gamma(), p.beta(), p.m()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn r_star_values() {
        let p = validate_parameters(3, 0.0, 0.0, 2.0 / 3.0).unwrap();
        assert_relative_eq!(r_star(1.0, &p).unwrap(), 1.0, max_relative = 1e-14);
        let p2 = validate_parameters(3, 1.0, 0.0, 0.75).unwrap();
        assert_relative_eq!(r_star(4.0, &p2).unwrap(), 4.0, max_relative = 1e-14);
        // R⋆(ϑ) = 1 in any regime
        let p3 = validate_parameters(4, -1.0, -1.5, 0.8).unwrap();
        assert_relative_eq!(r_star(p3.theta(), &p3).unwrap(), 1.0, max_relative = 1e-14);
        assert!(r_star(0.0, &p).is_err());
        assert!(r_star(-1.0, &p).is_err());
    }

    #[test]
    fn serde_roundtrip_revalidates() {
        let p = validate_parameters(3, 0.0, 0.0, 2.0 / 3.0).unwrap();
        let js = serde_json::to_string(&p).unwrap();
        let q: ParameterSet = serde_json::from_str(&js).unwrap();
        assert_eq!(p, q);
        let bad = r#"{"d":3,"gamma":0.0,"beta":0.0,"m":0.2}"#;
        assert!(serde_json::from_str::<ParameterSet>(bad).is_err());
    }
}
