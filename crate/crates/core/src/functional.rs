//! Mass and energy
//! `E(u) = ½‖∇u‖² − ∫F(u) − C₁∫G(u) − (C₂/2)‖|x|^{−σ}u‖²`
//! on the discrete grid.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::ComplexField;
use crate::params::ProblemParams;

/// The four integrals entering `E`, without couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    /// `½‖∇u‖₂²`
    pub kinetic: f64,
    /// `∫F(u) = ‖u‖_{2+4/N}^{2+4/N}/(2+4/N)`
    pub crit: f64,
    /// `∫G(u) = ‖u‖_{p+1}^{p+1}/(p+1)`
    pub sub: f64,
    /// `‖|x|^{−σ}u‖₂²`
    pub potential: f64,
}

impl EnergyTerms {
    /// `E` with couplings `(C₁, C₂)` and the subcritical and potential terms
    /// multiplied by `scale` (`λ^α` on a rescaled grid).
    pub fn combine(&self, c1: f64, c2: f64, scale: f64) -> f64 {
        self.kinetic - self.crit - scale * (c1 * self.sub + 0.5 * c2 * self.potential)
    }
}

pub fn energy_terms(u: &ComplexField, params: &ProblemParams, pot_avg: &[f64]) -> EnergyTerms {
    let grid = u.grid();
    let s = grid.surface();
    let n = params.dim as f64;
    let ecrit = 1.0 + 2.0 / n;
    let esub = (params.p + 1.0) / 2.0;
    let mut crit = 0.0;
    let mut sub = 0.0;
    let mut pot = 0.0;
    for ((v, w), a) in u.values().iter().zip(grid.weights()).zip(pot_avg) {
        let rho = v.norm_sqr();
        crit += w * rho.powf(ecrit);
        sub += w * rho.powf(esub);
        pot += w * a * rho;
    }
    EnergyTerms {
        kinetic: 0.5 * u.grad_sq(),
        crit: s * crit / (2.0 + 4.0 / n),
        sub: s * sub / (params.p + 1.0),
        potential: s * pot,
    }
}

pub fn energy(u: &ComplexField, params: &ProblemParams) -> Result<f64> {
    let pot = u.grid().power_average(-2.0 * params.sigma)?;
    let (c1, c2) = params.couplings();
    Ok(energy_terms(u, params, &pot).combine(c1, c2, 1.0))
}

pub fn mass(u: &ComplexField) -> f64 {
    u.norm_l2_sq()
}

/// Energy of several fields sharing a grid.
pub fn energies(us: &[ComplexField], params: &ProblemParams) -> Result<Vec<f64>> {
    us.iter().map(|u| energy(u, params)).collect()
}
