//! Property tests for the algebraic invariants: regime identities, norm
//! axioms, the closed-form change of variables, and the discrete
//! comparison principle.

use proptest::prelude::*;
use wfde::field::{PowerTail, RadialField};
use wfde::params::validate_parameters;
use wfde::profiles::{self, BarenblattSpec};
use wfde::solver::{build_grid, step, StepOptions};
use wfde::tailspace;

/// Strategy for a valid CKN regime (interior m so the norms stay well
/// conditioned in f64).
fn regime() -> impl Strategy<Value = wfde::params::ParameterSet> {
    (3i64..=5, -2.0f64..2.5, 0.2f64..0.8, 0.15f64..0.8).prop_filter_map(
        "valid regime",
        |(d, gamma, beta_frac, m_frac)| {
            if gamma >= d as f64 - 0.3 {
                return None;
            }
            let lo = gamma - 2.0;
            let hi = gamma * (d as f64 - 2.0) / d as f64;
            let beta = lo + beta_frac * (hi - lo);
            let m_c = (d as f64 - 2.0 - beta) / (d as f64 - gamma);
            let m = m_c + m_frac * (1.0 - m_c);
            validate_parameters(d, gamma, beta, m).ok()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn exponent_identity_holds(p in regime()) {
        let e = p.exponents();
        let identity = e.sigma * e.theta - p.dim_gamma() * e.theta * (1.0 - p.m());
        prop_assert!((identity - 1.0).abs() < 1e-10);
        prop_assert!(p.tail_norm_power() > 0.0);
        // validation is idempotent
        let q = validate_parameters(p.d() as i64, p.gamma(), p.beta(), p.m()).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn barenblatt_constants_mass_free(p in regime(), mass in 0.1f64..10.0) {
        // b0, b1 depend only on the regime; C(M) carries the mass
        let (b0, b1) = profiles::derive_barenblatt_constants(&p);
        let spec = BarenblattSpec::new(p, mass, 0.0).unwrap();
        prop_assert!((spec.b0 - b0).abs() < 1e-14 * b0);
        prop_assert!((spec.b1 - b1).abs() < 1e-14 * b1);
        prop_assert!(b0 > 0.0 && b1 > 0.0);
    }

    #[test]
    fn selfsimilar_change_of_variables_is_exact(
        p in regime(),
        mass in 0.2f64..5.0,
        t in 0.05f64..50.0,
        y in 0.01f64..50.0,
    ) {
        // 𝔅(t+1, x; M) expressed through (τ, y, v) is the stationary
        // profile: v(τ, y) = (R(t)/ζ)^{d-γ} 𝔅(t+1, R(t) y / ζ) = B_M(y)
        let e = p.exponents();
        let spec = BarenblattSpec::new(p, mass, 1.0).unwrap();
        let r_t = wfde::params::r_star(t + 1.0, &p).unwrap();
        let x = r_t * y / e.zeta;
        let v = (r_t / e.zeta).powf(p.dim_gamma()) * spec.eval(t, x).unwrap();
        let b = profiles::stationary_profile(&p, mass, y).unwrap();
        prop_assert!((v / b - 1.0).abs() < 1e-10, "v={} B={}", v, b);
    }
}

fn barenblatt_field(
    p: wfde::params::ParameterSet,
    mass: f64,
    t: f64,
) -> RadialField {
    let spec = BarenblattSpec::new(p, mass, 0.0).unwrap();
    let tail = PowerTail { exponent: -p.tail_power(), coefficient: spec.tail_coefficient(t) };
    RadialField::sample(p, 1e-3, 1e6, 24, |r| spec.eval_abs(t, r), Some(tail)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn seminorm_homogeneity_and_triangle(
        mass_a in 0.3f64..3.0,
        mass_b in 0.3f64..3.0,
        t_a in 0.3f64..3.0,
        t_b in 0.3f64..3.0,
        c in 0.1f64..10.0,
    ) {
        let p = validate_parameters(3, 0.0, 0.0, 2.0 / 3.0).unwrap();
        let f = barenblatt_field(p, mass_a, t_a);
        let g = barenblatt_field(p, mass_b, t_b);
        let nf = tailspace::tail_seminorm(&f).0.finite().unwrap();
        let ng = tailspace::tail_seminorm(&g).0.finite().unwrap();
        // homogeneity
        let scaled = f.scale(c).unwrap();
        let ns = tailspace::tail_seminorm(&scaled).0.finite().unwrap();
        prop_assert!((ns - c * nf).abs() <= 1e-9 * (1.0 + c * nf));
        // triangle: both fields share the grid, so add values and tails
        let tail_sum = PowerTail {
            exponent: f.tail().unwrap().exponent,
            coefficient: f.tail().unwrap().coefficient + g.tail().unwrap().coefficient,
        };
        let sum = f
            .map_values(|r, v| v + g.value_at(r))
            .unwrap()
            .with_tail(Some(tail_sum))
            .unwrap();
        let nsum = tailspace::tail_seminorm(&sum).0.finite().unwrap();
        prop_assert!(nsum <= nf + ng + 1e-9 * (nf + ng));
        // norm identity max{L¹_γ, |·|_X} on the sum as well
        let via_max = tailspace::tail_norm(&sum).finite().unwrap();
        let direct = tailspace::tail_norm_direct(&sum).finite().unwrap();
        prop_assert!((via_max - direct).abs() <= 1e-8 * via_max);
    }

    #[test]
    fn discrete_comparison_principle(
        seed_lo in 0.2f64..1.0,
        bump in 0.0f64..2.0,
        dt in 0.001f64..0.3,
    ) {
        // ordered data stay ordered through an implicit step
        let p = validate_parameters(3, 0.0, 0.0, 2.0 / 3.0).unwrap();
        let g = build_grid(&p, 1e-2, 1e2, 12).unwrap();
        let mbar = profiles::reference_mass(&p);
        let spec = BarenblattSpec::new(p, mbar, 1.0).unwrap();
        let u0 = g.field_from_fn(|r| seed_lo * spec.eval(0.0, r).unwrap()).unwrap();
        let v0 = g
            .field_from_fn(|r| {
                seed_lo * spec.eval(0.0, r).unwrap() * (1.0 + bump * (-(r - 1.0).powi(2)).exp())
            })
            .unwrap();
        let opts = StepOptions::default();
        let (u1, _) = step(&g, &u0, dt, &opts).unwrap();
        let (v1, _) = step(&g, &v0, dt, &opts).unwrap();
        let scale = v1.values().iter().cloned().fold(0.0, f64::max);
        for (a, b) in u1.values().iter().zip(v1.values()) {
            prop_assert!(*a <= b + 1e-12 * scale);
        }
        // and the step conserves the discrete weighted mass
        let m0 = g.mass_of(u0.values());
        let m1 = g.mass_of(u1.values());
        prop_assert!((m1 - m0).abs() <= 1e-12 * m0);
    }
}
