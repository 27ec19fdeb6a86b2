//! Numerical laboratory for the weighted fast diffusion equation
//!
//! ```text
//!     ∂_t u = |x|^γ ∇·(|x|^{-β} ∇u^m)        on (0,∞) × R^d,  d ≥ 3,
//! ```
//!
//! with m in the good fast diffusive range (m_c, 1), m_c = (d-2-β)/(d-γ),
//! and weight exponents restricted to γ < d, γ-2 < β ≤ γ(d-2)/d.
//!
//! The crate provides:
//!
//! * [`params`] — validated parameter regimes and the derived exponents
//!   σ, ϑ, ζ used everywhere else;
//! * [`profiles`] — closed-form Barenblatt solutions (with the constants
//!   b₀, b₁ pinned by algebraic matching and a mass quadrature), the
//!   explicit sub/supersolution families with anomalous tails, and the
//!   reference mass integral;
//! * [`tailspace`] — the tail seminorm |·|_X, the norm ‖·‖_X, the
//!   alternative annulus condition, auxiliary cutoff norms, and a tail
//!   classifier splitting data into X and its complement;
//! * [`solver`] — an implicit radial finite-volume solver on logarithmic
//!   grids with exact weighted cell volumes, plus the self-similar
//!   (Fokker–Planck) change of variables;
//! * [`harnack`] — global Harnack sandwiches between time-shifted
//!   Barenblatt solutions, cone and boundary Harnack quotients, and tail
//!   limit estimates;
//! * [`diagnostics`] — distances to the Barenblatt manifold, relative
//!   entropy / Fisher information series, log-log rate fits, and
//!   tail-norm monitoring along the flow;
//! * [`verify`] — independent finite-difference residual oracles used to
//!   cross-check every closed form against the PDE.
//!
//! The `wfde` binary drives reproducible experiments from flat config
//! files; see the repository README.

// Guards like `!(x > 0.0)` intentionally reject NaN along with the
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod field;
pub mod harnack;
pub mod params;
pub mod profiles;
pub mod quad;
pub mod runner;
pub mod solver;
pub mod tailspace;
pub mod verify;

pub use field::{PowerTail, RadialField};
pub use params::{Exponents, ParameterSet};
pub use profiles::BarenblattSpec;
