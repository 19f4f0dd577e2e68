//! Radial time steppers on a fixed grid.
//!
//! Both schemes use the Crank–Nicolson pencil `(W ± i dt/2 A)` where
//! `−Δ_h = W⁻¹A`. [`Scheme::Strang`] wraps it in exact half-step phase
//! rotations; [`Scheme::Conservative`] solves the implicit midpoint rule with
//! the difference-quotient nonlinearity, which conserves the discrete mass and
//! the discrete energy of [`crate::functional`] up to the fixed-point
//! tolerance.

use alloc::sync::Arc;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::functional::{energy_terms, EnergyTerms};
use crate::grid::RadialGrid;
use crate::linalg::{Tridiagonal, TridiagonalLu};
use crate::params::ProblemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Strang,
    Conservative,
}

/// Fixed-point control for [`Scheme::Conservative`].
const FIXED_POINT_TOL: f64 = 1e-16;
const FIXED_POINT_MAX: usize = 60;
const STALL_TOL: f64 = 1e-12;
/// Below this relative density change the difference quotient is replaced by
/// the midpoint derivative.
const QUOTIENT_CUTOFF: f64 = 1e-3;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepInfo {
    pub iterations: usize,
}

/// The equation on one grid: stiffness, cell-averaged potential and couplings.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Arc<RadialGrid>,
    params: ProblemParams,
    stiffness: Tridiagonal<f64>,
    /// `C₂ · avg |x|^{−2σ}` per cell.
    potential: Vec<f64>,
    /// Cell averages of `|x|^{−2σ}` (no coupling), for the energy.
    pot_avg: Vec<f64>,
    c1: f64,
    c2: f64,
    crit_half: f64,
    sub_half: f64,
    nonlinear: bool,
}

impl Stepper {
    pub fn new(params: &ProblemParams, grid: Arc<RadialGrid>) -> Result<Self> {
        if grid.dim() != params.dim {
            return Err(Error::InvalidInput("grid and parameter dimensions differ".into()));
        }
        let (c1, c2) = params.couplings();
        let pot_avg = grid.power_average(-2.0 * params.sigma)?;
        let potential = pot_avg.iter().map(|a| c2 * a).collect();
        Ok(Stepper {
            stiffness: grid.stiffness_matrix(),
            grid,
            params: *params,
            potential,
            pot_avg,
            c1,
            c2,
            crit_half: 2.0 / params.dim as f64,
            sub_half: 0.5 * (params.p - 1.0),
            nonlinear: true,
        })
    }

    /// Free Schrödinger flow `i u_t + Δu = 0` on `grid`.
    pub fn linear(params: &ProblemParams, grid: Arc<RadialGrid>) -> Result<Self> {
        let mut s = Self::new(params, grid)?;
        s.nonlinear = false;
        s.c1 = 0.0;
        s.c2 = 0.0;
        s.potential.iter_mut().for_each(|v| *v = 0.0);
        Ok(s)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    /// Pointwise multiplier `V = |u|^{4/N} + C₁|u|^{p−1} + C₂|x|^{−2σ}`.
    #[inline]
    fn multiplier(&self, rho: f64, i: usize) -> f64 {
        if !self.nonlinear {
            return 0.0;
        }
        let mut v = rho.powf(self.crit_half) + self.potential[i];
        if self.c1 != 0.0 && rho > 0.0 {
            v += self.c1 * rho.powf(self.sub_half);
        }
        v
    }

    /// `V″(ρ)`.
    fn multiplier_curvature(&self, rho: f64) -> f64 {
        if !self.nonlinear || rho <= 0.0 {
            return 0.0;
        }
        let a = self.crit_half;
        let mut v = a * (a - 1.0) * rho.powf(a - 2.0);
        if self.c1 != 0.0 {
            let b = self.sub_half;
            v += self.c1 * b * (b - 1.0) * rho.powf(b - 2.0);
        }
        v
    }

    /// `2(Φ(ρ₁) − Φ(ρ₀))/(ρ₁ − ρ₀)`, by its Taylor series about the midpoint
    /// when the quotient would cancel.
    #[inline]
    fn quotient(&self, r0: f64, r1: f64, i: usize) -> f64 {
        let d = r1 - r0;
        if d.abs() <= QUOTIENT_CUTOFF * r0.max(r1) {
            let m = 0.5 * (r0 + r1);
            self.multiplier(m, i) + self.multiplier_curvature(m) * d * d / 24.0
        } else {
            2.0 * (self.phi(r1, i) - self.phi(r0, i)) / d
        }
    }

    /// `Φ(ρ)` with `V = 2Φ′`.
    #[inline]
    fn phi(&self, rho: f64, i: usize) -> f64 {
        let mut f = rho.powf(self.crit_half + 1.0) / (2.0 * self.crit_half + 2.0) + 0.5 * self.potential[i] * rho;
        if self.c1 != 0.0 && rho > 0.0 {
            f += self.c1 * rho.powf(self.sub_half + 1.0) / (2.0 * self.sub_half + 2.0);
        }
        f
    }

    fn pencil(&self, dt: f64) -> Result<TridiagonalLu<Complex64>> {
        let k = Complex64::new(0.0, 0.5 * dt);
        let a = &self.stiffness;
        let lower = a.lower.iter().map(|&x| k * x).collect();
        let upper = a.upper.iter().map(|&x| k * x).collect();
        let diag = a.diag.iter().zip(self.grid.weights()).map(|(&x, &w)| k * x + w).collect();
        Tridiagonal::new(lower, diag, upper).factor()
    }

    /// `(W − i dt/2 A) u`.
    fn explicit_half(&self, u: &[Complex64], dt: f64) -> Vec<Complex64> {
        let au = self.grid.apply_stiffness(u);
        let k = Complex64::new(0.0, 0.5 * dt);
        u.iter().zip(au).zip(self.grid.weights()).map(|((&ui, ai), &w)| ui * w - k * ai).collect()
    }

    fn rotate(&self, u: &mut [Complex64], tau: f64) {
        for (i, z) in u.iter_mut().enumerate() {
            let v = self.multiplier(z.norm_sqr(), i);
            *z *= Complex64::from_polar(1.0, tau * v);
        }
    }

    fn check(u: &[Complex64], what: &'static str) -> Result<()> {
        match u.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            Some(index) => Err(Error::NonFinite { what, index }),
            None => Ok(()),
        }
    }

    /// One Strang step: half rotation, Crank–Nicolson, half rotation.
    pub fn step_strang(&self, u: &mut [Complex64], dt: f64) -> Result<StepInfo> {
        let lu = self.pencil(dt)?;
        self.rotate(u, 0.5 * dt);
        let mut rhs = self.explicit_half(u, dt);
        lu.solve_in_place(&mut rhs);
        u.copy_from_slice(&rhs);
        self.rotate(u, 0.5 * dt);
        Self::check(u, "Strang step")?;
        Ok(StepInfo { iterations: 1 })
    }

    /// One step of `(W + i dt/2 A)u¹ = (W − i dt/2 A)u⁰ + i dt W D(ρ⁰,ρ¹) u^{½}`
    /// with `D = 2(Φ(ρ¹) − Φ(ρ⁰))/(ρ¹ − ρ⁰)`.
    pub fn step_conservative(&self, u: &mut [Complex64], dt: f64) -> Result<StepInfo> {
        let lu = self.pencil(dt)?;
        let base = self.explicit_half(u, dt);
        if !self.nonlinear {
            let mut x = base;
            lu.solve_in_place(&mut x);
            u.copy_from_slice(&x);
            Self::check(u, "conservative step")?;
            return Ok(StepInfo { iterations: 1 });
        }
        let u0 = u.to_vec();
        let rho0: Vec<f64> = u0.iter().map(|z| z.norm_sqr()).collect();
        let mut u1 = u0.clone();
        self.step_strang(&mut u1, dt)?;
        let w = self.grid.weights();
        let idt = Complex64::new(0.0, dt);
        let mut x = Vec::with_capacity(u.len());
        let mut last = f64::INFINITY;
        for it in 1..=FIXED_POINT_MAX {
            x.clear();
            for i in 0..u0.len() {
                let d = self.quotient(rho0[i], u1[i].norm_sqr(), i);
                x.push(base[i] + idt * (w[i] * d) * (0.5 * (u0[i] + u1[i])));
            }
            lu.solve_in_place(&mut x);
            let mut change = 0.0f64;
            let mut size = 0.0f64;
            for (a, b) in x.iter().zip(&u1) {
                change = change.max((a - b).norm());
                size = size.max(a.norm());
            }
            u1.copy_from_slice(&x);
            let rel = change / size;
            // rounding floor: accept once the contraction stalls
            let stalled = rel <= STALL_TOL && rel >= 0.5 * last;
            last = rel;
            if rel <= FIXED_POINT_TOL || stalled {
                Self::check(&u1, "conservative step")?;
                u.copy_from_slice(&u1);
                return Ok(StepInfo { iterations: it });
            }
        }
        Err(Error::NoConvergence { what: "conservative step fixed point", iterations: FIXED_POINT_MAX, residual: last })
    }

    pub fn advance(&self, u: &mut [Complex64], dt: f64, scheme: Scheme) -> Result<StepInfo> {
        match scheme {
            Scheme::Strang => self.step_strang(u, dt),
            Scheme::Conservative => self.step_conservative(u, dt),
        }
    }

    /// Energy terms with this stepper's cached potential averages.
    pub fn energy_terms(&self, u: &ComplexField) -> EnergyTerms {
        energy_terms(u, &self.params, &self.pot_avg)
    }

    /// `(M(u), E(u))` with the couplings this stepper integrates.
    pub fn conserved(&self, u: &ComplexField) -> (f64, f64) {
        (u.norm_l2_sq(), self.energy_terms(u).combine(self.c1, self.c2, 1.0))
    }

    /// Same as [`Stepper::conserved`] but without the nonlinear terms when
    /// the stepper is linear.
    pub fn invariant(&self, u: &ComplexField) -> (f64, f64) {
        if self.nonlinear {
            self.conserved(u)
        } else {
            (u.norm_l2_sq(), 0.5 * u.grad_sq())
        }
    }
}

/// One Strang step of the equation with `params` on the grid of `u`.
pub fn step(u: &ComplexField, dt: f64, params: &ProblemParams) -> Result<ComplexField> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(alloc::format!("time step {dt} must be positive")));
    }
    let stepper = Stepper::new(params, u.grid().clone())?;
    let mut v = u.values().to_vec();
    stepper.step_strang(&mut v, dt)?;
    ComplexField::new(u.grid().clone(), v)
}

/// `(‖u‖₂², E(u))`.
pub fn conserved(u: &ComplexField, params: &ProblemParams) -> Result<(f64, f64)> {
    u.check_finite("conserved field")?;
    Ok(Stepper::new(params, u.grid().clone())?.conserved(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{make_params, Branch, ParamRequest};

    #[test]
    fn quotient_matches_on_both_sides_of_the_cutoff() {
        let params = make_params(ParamRequest::new(1, 0.2, 1.5, Branch::PlusMinus)).unwrap();
        let grid = Arc::new(RadialGrid::uniform(1, 8, 1.0).unwrap());
        let st = Stepper::new(&params, grid).unwrap();
        let r0 = 0.7;
        for frac in [0.999, 0.5, 0.1] {
            let r1 = r0 * (1.0 + frac * QUOTIENT_CUTOFF);
            let series = st.quotient(r0, r1, 3);
            let direct = 2.0 * (st.phi(r1, 3) - st.phi(r0, 3)) / (r1 - r0);
            assert!((series - direct).abs() < 8.0 * f64::EPSILON / (frac * QUOTIENT_CUTOFF), "{frac}: {series} {direct}");
        }
        assert_eq!(st.quotient(r0, r0, 3), st.multiplier(r0, 3));
    }
}
