//! Numerics for minimal-mass blow-up of the mass-critical nonlinear
//! Schrödinger equation perturbed by a subcritical power nonlinearity and an
//! inverse-power potential,
//!
//! ```text
//! i u_t + Δu + |u|^{4/N} u + C₁ |u|^{p-1} u + C₂ |x|^{-2σ} u = 0,   x ∈ ℝᴺ, N ≤ 3,
//! ```
//!
//! restricted to radial fields. The crate is `no_std` (it needs `alloc`);
//! file formats, the command line and parameter sweeps live in the companion
//! `minmass` crate.
//!
//! Module map:
//!
//! * [`params`], [`grid`], [`field`], [`nonlinearity`]: parameters, staggered
//!   radial grids, sampled fields with their norms, and the power
//!   nonlinearities with their real differentials.
//! * [`groundstate`]: the ground state `Q`, its norms, `ω` and the
//!   Gagliardo–Nirenberg ratio.
//! * [`linops`]: `L₊`, `L₋`, `ρ`, bordered solves and discrete coercivity.
//! * [`profile`]: the blow-up profile expansion `P(λ, b)`, its residual `Ψ`
//!   and energy.
//! * [`modulation`]: decomposition `u ↦ (λ, b, γ, ε)` and its diagnostics.
//! * [`reduced`]: the modulation ODEs for `(λ, b)` and their closed forms.
//! * [`sim`]: radial time stepping, blow-up runs and rate fits.

#![no_std]
// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod field;
pub mod functional;
pub mod grid;
pub mod groundstate;
pub mod interp;
pub mod linalg;
pub mod linops;
pub mod modulation;
pub mod nonlinearity;
pub mod params;
pub mod profile;
pub mod reduced;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use field::{ComplexField, RadialField, RealField};
pub use grid::{RadialGrid, Spacing};
pub use groundstate::GroundState;
pub use params::{Branch, ProblemParams};

pub use num_complex::Complex64;
