//! Radial time stepping, blow-up runs with dynamic rescaling, and rate fits.
//!
//! * [`stepper`]: Strang splitting and the conservative implicit scheme.
//! * [`blowup`]: runs from a profile datum with regridding and per-snapshot
//!   decomposition.
//! * [`fit`]: power-law fits of `λ̃(t)` and the lower-bound check.

pub mod blowup;
pub mod fit;
pub mod stepper;

pub use blowup::{
    evolve, simulate_blowup, simulate_from, BlowupRun, Floor, RegridEvent, Segment, SimConfig, Snapshot, StopReason,
};
pub use fit::{fit_blowup_rate, fit_power_law, fit_window, lower_bound_check, lower_bound_with, rate_exponent, RateFit};
pub use stepper::{conserved, step, Scheme, StepInfo, Stepper};

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::RadialGrid;
use crate::groundstate::GroundState;
use crate::interp::interpolate;
use crate::params::{Branch, ProblemParams};

/// `S(t,x) = |t|^{−N/2} Q(x/|t|) e^{−i/t} e^{i|x|²/(4t)}` sampled on `grid`,
/// an exact blow-up solution of the unperturbed critical equation for `t < 0`.
pub fn pseudo_conformal_reference(t: f64, grid: Arc<RadialGrid>, gs: &GroundState) -> Result<ComplexField> {
    if !(t < 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("pseudo-conformal time t = {t} must be negative")));
    }
    if grid.dim() != gs.params.dim {
        return Err(Error::InvalidInput("grid and ground-state dimensions differ".into()));
    }
    let tau = -t;
    let amp = tau.powf(-(grid.dim() as f64) / 2.0);
    let qg = gs.grid().clone();
    let q = gs.q.values();
    let vals: Vec<Complex64> = grid
        .nodes()
        .iter()
        .map(|&x| {
            let phase = -1.0 / t + x * x / (4.0 * t);
            Complex64::from_polar(amp * interpolate(&qg, q, x / tau), phase)
        })
        .collect();
    ComplexField::new(grid, vals)
}

/// `λ̂ = ‖∇Q‖₂ / ‖∇u‖₂`.
pub fn lambda_hat(u: &ComplexField, gs: &GroundState) -> Result<f64> {
    let g = u.grad_sq();
    if !(g > 0.0) {
        return Err(Error::InvalidInput("lambda_hat of a field with zero gradient".into()));
    }
    Ok((gs.norms.grad / g).sqrt())
}

/// Threshold coupling test `C₀ = ω` on a perturbed branch.
pub fn is_balanced(params: &ProblemParams) -> bool {
    match (params.branch, params.omega) {
        (Branch::Critical, _) | (_, None) => false,
        (_, Some(w)) => (params.c0 - w).abs() <= 1e-8 * w.abs(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    /// `|E| ≤` tolerance: neither sign is resolved.
    Boundary,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub energy: f64,
    pub mass: f64,
    /// Width of the boundary band around `E = 0`.
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Relative width of the boundary band, against `½‖∇u‖² + ∫F(u)`.
pub const POSITIVITY_BAND: f64 = 1e-6;

/// `E(u₀)` and whether it is positive.
pub fn energy_positivity_check(u0: &ComplexField, params: &ProblemParams) -> Result<PositivityReport> {
    u0.check_finite("initial datum")?;
    let stepper = Stepper::new(params, u0.grid().clone())?;
    let terms = stepper.energy_terms(u0);
    let (mass, energy) = stepper.conserved(u0);
    let tolerance = POSITIVITY_BAND * (terms.kinetic + terms.crit);
    let verdict = if energy > tolerance {
        Verdict::Pass
    } else if energy < -tolerance {
        Verdict::Fail
    } else {
        Verdict::Boundary
    };
    Ok(PositivityReport { energy, mass, tolerance, verdict })
}

#[cfg(test)]
mod tests;
