//! Linearized operators around `Q`:
//! `L₊ = −Δ + 1 − (1+4/N)Q^{4/N}` and `L₋ = −Δ + 1 − Q^{4/N}`.
//!
//! `L₊` is invertible on radial functions and is factored once. `L₋` has the
//! kernel `Q`; equations `L₋x = f` are solved on `Q^⊥` by conjugate gradients
//! on `L₋ + Π_Q` preconditioned with `(−Δ + 1)⁻¹`.

use alloc::sync::Arc;
use alloc::vec::Vec;
use alloc::{format, vec};
use nalgebra::DMatrix;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RealField;
use crate::grid::RadialGrid;
use crate::groundstate::{solve_ground_state, GroundState};
use crate::linalg::{bordered_solve, constrained_min_eigenvalue, pcg, TridiagonalLu};
use crate::nonlinearity::Power;

/// Solution of the bordered `L₊` system.
#[derive(Debug, Clone)]
pub struct BorderedSolution {
    pub p: RealField,
    pub beta: f64,
}

/// Assembled operators for one ground state.
#[derive(Debug, Clone)]
pub struct LinOps {
    grid: Arc<RadialGrid>,
    q: Vec<f64>,
    /// `Q^{4/N}`
    qpow: Vec<f64>,
    crit: f64,
    lplus_diag: Vec<f64>,
    lplus_lu: TridiagonalLu<f64>,
    helmholtz_lu: TridiagonalLu<f64>,
    q_norm2_w: f64,
}

impl LinOps {
    pub fn new(gs: &GroundState) -> Result<Self> {
        let grid = gs.grid().clone();
        let q = gs.q.values().to_vec();
        let crit = 4.0 / gs.params.dim as f64;
        let qpow: Vec<f64> = q.iter().map(|x| x.powf(crit)).collect();
        let mut neg_lap = grid.stiffness_matrix();
        let inv: Vec<f64> = grid.weights().iter().map(|w| 1.0 / w).collect();
        neg_lap.scale_rows(&inv);
        let lplus_diag: Vec<f64> = qpow.iter().map(|a| 1.0 - (1.0 + crit) * a).collect();
        let mut lplus = neg_lap.clone();
        lplus.add_diag(&lplus_diag);
        let lplus_lu = lplus.factor()?;
        let mut helm = neg_lap.clone();
        helm.add_diag(&vec![1.0; grid.len()]);
        let helmholtz_lu = helm.factor()?;
        let q_norm2_w = wdot(grid.weights(), &q, &q);
        Ok(LinOps { grid, q, qpow, crit, lplus_diag, lplus_lu, helmholtz_lu, q_norm2_w })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// `−Δ_h v`, differences first; a row-wise product with the assembled
    /// matrix would round at `eps·|v|/h²` instead of `eps·|v′|/h`.
    fn neg_lap(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.grid.apply_stiffness(v);
        for (o, w) in out.iter_mut().zip(self.grid.weights()) {
            *o /= w;
        }
        out
    }

    pub fn apply_lplus(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.neg_lap(v);
        for ((o, x), d) in out.iter_mut().zip(v).zip(&self.lplus_diag) {
            *o += d * x;
        }
        out
    }

    pub fn apply_lminus(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.neg_lap(v);
        for ((o, x), a) in out.iter_mut().zip(v).zip(&self.qpow) {
            *o += (1.0 - a) * x;
        }
        out
    }

    /// `L₊⁻¹ f`.
    pub fn solve_lplus(&self, f: &[f64]) -> Vec<f64> {
        self.lplus_lu.solve(f)
    }

    /// Smallest pivot of the `L₊` factorization relative to its diagonal.
    pub fn lplus_pivot_ratio(&self) -> f64 {
        self.lplus_lu.min_pivot_ratio()
    }

    /// `(x, μ)` with `L₋x = f − μQ`, `x ⊥ Q`; `μ` is the solvability defect
    /// `(f, Q)/(Q, Q)`.
    pub fn solve_lminus_perp(&self, f: &[f64]) -> Result<(Vec<f64>, f64)> {
        let w = self.grid.weights();
        let mu = wdot(w, f, &self.q) / self.q_norm2_w;
        let rhs: Vec<f64> = f.iter().zip(&self.q).map(|(a, b)| a - mu * b).collect();
        let apply = |v: &[f64]| {
            let mut out = self.apply_lminus(v);
            let c = wdot(w, v, &self.q) / self.q_norm2_w;
            for (o, qi) in out.iter_mut().zip(&self.q) {
                *o += c * qi;
            }
            out
        };
        let precond = |v: &[f64]| self.helmholtz_lu.solve(v);
        let mut x = pcg(apply, precond, w, &rhs, 1e-14, 2000)?;
        let c = wdot(w, &x, &self.q) / self.q_norm2_w;
        for (xi, qi) in x.iter_mut().zip(&self.q) {
            *xi -= c * qi;
        }
        Ok((x, mu))
    }

    /// Solve `L₊P − β(|y|²/4)Q = F`, `(P, Q)₂ = 0`.
    pub fn solve_bordered(&self, f: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.solve_bordered_with(f, 0.0)
    }

    /// Solve `L₊P − β(|y|²/4)Q = F`, `(P, Q)₂ = τ`.
    pub fn solve_bordered_with(&self, f: &[f64], tau: f64) -> Result<(Vec<f64>, f64)> {
        let border: Vec<f64> =
            self.grid.nodes().iter().zip(&self.q).map(|(r, q)| -0.25 * r * r * q).collect();
        let constraint: Vec<f64> = self.grid.weights().iter().zip(&self.q).map(|(w, q)| w * q).collect();
        let target = tau / self.grid.surface();
        let (x, y) = bordered_solve(&self.lplus_lu, &[border], &[constraint], f, &[target])?;
        Ok((x, y[0]))
    }

    /// `Q^{4/N}` samples.
    pub fn qpow(&self) -> &[f64] {
        &self.qpow
    }

    pub fn crit_exponent(&self) -> f64 {
        self.crit
    }
}

fn wdot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), w)| x * y * w).sum()
}

pub fn apply_lplus(gs: &GroundState, v: &RealField) -> Result<RealField> {
    let ops = LinOps::new(gs)?;
    RealField::new(gs.grid().clone(), ops.apply_lplus(v.values()))
}

pub fn apply_lminus(gs: &GroundState, v: &RealField) -> Result<RealField> {
    let ops = LinOps::new(gs)?;
    RealField::new(gs.grid().clone(), ops.apply_lminus(v.values()))
}

/// `ρ` with `L₊ρ = |y|²Q`.
pub fn solve_rho(gs: &GroundState) -> Result<RealField> {
    let ops = LinOps::new(gs)?;
    solve_rho_with(&ops)
}

pub fn solve_rho_with(ops: &LinOps) -> Result<RealField> {
    let rhs: Vec<f64> = ops.grid.nodes().iter().zip(&ops.q).map(|(r, q)| r * r * q).collect();
    let rho = ops.solve_lplus(&rhs);
    RealField::new(ops.grid.clone(), rho).map_err(|_| Error::Singular {
        what: "L+ solve for rho",
        detail: ops.lplus_pivot_ratio(),
    })
}

/// Fill `gs.rho` if absent.
pub fn attach_rho(gs: &mut GroundState) -> Result<()> {
    if gs.rho.is_none() {
        gs.rho = Some(solve_rho(gs)?);
    }
    Ok(())
}

pub fn solve_bordered(gs: &GroundState, f: &RealField) -> Result<BorderedSolution> {
    let ops = LinOps::new(gs)?;
    let (p, beta) = ops.solve_bordered(f.values())?;
    Ok(BorderedSolution { p: RealField::new(gs.grid().clone(), p)?, beta })
}

/// `C₁ g(Q) + C₂ |y|^{−2σ} Q`: the source of the leading real correction.
pub fn leading_source(gs: &GroundState, c1: f64, c2: f64) -> Result<RealField> {
    let g = Power::subcritical(gs.params.p);
    let pot = gs.grid().power_average(-2.0 * gs.params.sigma)?;
    let vals = gs.q.values().iter().zip(&pot).map(|(&q, v)| c1 * q.powf(g.q + 1.0) + c2 * v * q).collect();
    RealField::new(gs.grid().clone(), vals)
}

/// `β₀,₀ = (4/‖yQ‖²)(C₁·N(p−1)/(2(p+1))·‖Q‖_{p+1}^{p+1} + C₂·σ·‖|y|^{−σ}Q‖²)`.
pub fn beta_closed_form(gs: &GroundState, c1: f64, c2: f64) -> f64 {
    let pr = &gs.params;
    let n = pr.dim as f64;
    let nrm = &gs.norms;
    4.0 / nrm.virial * (c1 * n * (pr.p - 1.0) / (2.0 * (pr.p + 1.0)) * nrm.lp1 + c2 * pr.sigma * nrm.potential)
}

/// Residual norms of the four operator identities, each relative to the
/// natural scale (`‖Q‖₂`, `‖Q‖₂`, `‖ΛQ‖₂`, `‖|y|²Q‖₂`).
///
/// `Q` enters as `Q + δ` with `δ = −L₊⁻¹(L₋Q)`, the Newton correction that
/// the stored values cannot hold. Without it the rounding of `Q` reaches
/// `L₊ΛQ` amplified by `|y|/h³` and swamps the truncation error on fine
/// grids. Residuals are measured over the interior cells: `ΛQ` does not
/// vanish at `rmax`, so the cell next to the Dirichlet face sees the domain
/// cut rather than the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub lminus_q: f64,
    pub lplus_lambda_q: f64,
    pub lminus_y2q: f64,
    pub lplus_rho: f64,
}

fn sum(a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    a.into_iter().zip(b).map(|(x, y)| x + y).collect()
}

fn interior_l2(w: &[f64], v: &[f64]) -> f64 {
    let n = v.len().saturating_sub(1);
    v[..n].iter().zip(w).map(|(x, w)| x * x * w).sum::<f64>().sqrt()
}

pub fn identity_report(gs: &GroundState) -> Result<IdentityReport> {
    let ops = LinOps::new(gs)?;
    let grid = gs.grid().clone();
    let w = grid.weights();
    let q = gs.q.values();
    let qn = gs.q.norm_l2();
    let lq_hi = ops.apply_lminus(q);
    let delta: Vec<f64> = ops.solve_lplus(&lq_hi).into_iter().map(|x| -x).collect();
    // the operators are linear: apply them to both parts before adding
    let lq = sum(lq_hi, ops.apply_lminus(&delta));
    let lam_q = sum(grid.lambda_op(q), grid.lambda_op(&delta));
    let e2: Vec<f64> =
        ops.apply_lplus(&lam_q).iter().zip(q.iter().zip(&delta)).map(|(l, (a, d))| l + 2.0 * (a + d)).collect();
    let y2 = |v: &[f64]| -> Vec<f64> { v.iter().zip(grid.nodes()).map(|(x, r)| r * r * x).collect() };
    let y2q = y2(q);
    let lm = sum(ops.apply_lminus(&y2q), ops.apply_lminus(&y2(&delta)));
    let e3: Vec<f64> = lm.iter().zip(&lam_q).map(|(l, a)| l + 4.0 * a).collect();
    let rho = match &gs.rho {
        Some(r) => r.clone(),
        None => solve_rho_with(&ops)?,
    };
    let e4: Vec<f64> = ops.apply_lplus(rho.values()).iter().zip(&y2q).map(|(l, a)| l - a).collect();
    let full = |v: &[f64]| v.iter().zip(w).map(|(x, w)| x * x * w).sum::<f64>().sqrt();
    Ok(IdentityReport {
        lminus_q: interior_l2(w, &lq) / qn,
        lplus_lambda_q: interior_l2(w, &e2) / qn,
        lminus_y2q: interior_l2(w, &e3) / full(&lam_q),
        lplus_rho: interior_l2(w, &e4) / full(&y2q),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    /// Minimum of the constrained form; the discrete stand-in for `μ`.
    pub constrained_min: f64,
    pub lplus_constrained_min: f64,
    pub lminus_constrained_min: f64,
    pub lplus_unconstrained_min: f64,
    pub lminus_unconstrained_min: f64,
    /// `⟨L₋Q, Q⟩ / ‖Q‖²`
    pub lminus_rayleigh_q: f64,
    pub nodes: usize,
}

/// Largest grid the dense eigensolver is run on.
pub const COERCIVITY_MAX_NODES: usize = 640;

/// Smallest eigenvalue of `⟨L₊a,a⟩ + ⟨L₋c,c⟩` on
/// `{a ⊥ Q, a ⊥ |y|²Q, c ⊥ ρ}`.
pub fn coercivity_spectrum(gs: &GroundState, rho: &RealField) -> Result<f64> {
    Ok(coercivity_report(gs, rho)?.constrained_min)
}

/// Dense spectra of the symmetrized operators. Grids finer than
/// [`COERCIVITY_MAX_NODES`] are replaced by a coarse uniform grid on which
/// `Q` and `ρ` are recomputed, so that the operators stay self-consistent.
pub fn coercivity_report(gs: &GroundState, rho: &RealField) -> Result<CoercivityReport> {
    if gs.grid().len() <= COERCIVITY_MAX_NODES {
        return coercivity_dense(gs, rho);
    }
    let rmax = gs.grid().rmax().min(24.0);
    let coarse = Arc::new(RadialGrid::uniform(gs.params.dim, COERCIVITY_MAX_NODES, rmax)?);
    let cgs = solve_ground_state(&gs.params, coarse, 1e-10)?;
    let crho = solve_rho(&cgs)?;
    coercivity_dense(&cgs, &crho)
}

fn coercivity_dense(gs: &GroundState, rho: &RealField) -> Result<CoercivityReport> {
    let grid = gs.grid();
    let n = grid.len();
    let ops = LinOps::new(gs)?;
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    // W^{−1/2} A W^{−1/2}
    let a = grid.stiffness_matrix();
    let mut base = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        base[(i, i)] = a.diag[i] / (sw[i] * sw[i]);
        if i + 1 < n {
            let v = a.upper[i] / (sw[i] * sw[i + 1]);
            base[(i, i + 1)] = v;
            base[(i + 1, i)] = v;
        }
    }
    let mut splus = base.clone();
    let mut sminus = base;
    for i in 0..n {
        splus[(i, i)] += 1.0 - (1.0 + ops.crit) * ops.qpow[i];
        sminus[(i, i)] += 1.0 - ops.qpow[i];
    }
    let tq: Vec<f64> = gs.q.values().iter().zip(&sw).map(|(q, s)| q * s).collect();
    let ty2q: Vec<f64> = gs.q.values().iter().zip(&sw).zip(grid.nodes()).map(|((q, s), r)| q * s * r * r).collect();
    let trho: Vec<f64> = rho.values().iter().zip(&sw).map(|(q, s)| q * s).collect();
    let lplus_c = constrained_min_eigenvalue(&splus, &[tq.clone(), ty2q])?;
    let lminus_c = constrained_min_eigenvalue(&sminus, &[trho])?;
    let lplus_u = constrained_min_eigenvalue(&splus, &[])?;
    let lminus_u = constrained_min_eigenvalue(&sminus, &[])?;
    let lq = ops.apply_lminus(gs.q.values());
    let rayleigh = wdot(grid.weights(), &lq, gs.q.values()) / wdot(grid.weights(), gs.q.values(), gs.q.values());
    if !(lplus_c.is_finite() && lminus_c.is_finite()) {
        return Err(Error::NoConvergence { what: "coercivity eigensolve", iterations: 0, residual: f64::NAN });
    }
    Ok(CoercivityReport {
        constrained_min: lplus_c.min(lminus_c),
        lplus_constrained_min: lplus_c,
        lminus_constrained_min: lminus_c,
        lplus_unconstrained_min: lplus_u,
        lminus_unconstrained_min: lminus_u,
        lminus_rayleigh_q: rayleigh,
        nodes: n,
    })
}

/// Fitted `(C, κ)` of the template `|v| ≤ C(1+r)^κ Q` over `r ≥ 1`: `κ` is
/// the smallest exponent for which the ratio is bounded by its value at the
/// largest trusted radius, `C` the resulting supremum.
pub fn decay_template(v: &RealField, q: &RealField) -> (f64, f64) {
    let qmax = q.max_abs();
    let pts: Vec<(f64, f64)> = v
        .grid()
        .nodes()
        .iter()
        .zip(v.values().iter().zip(q.values()))
        .filter(|(&r, (_, &qq))| r >= 1.0 && qq > 1e-10 * qmax)
        .map(|(&r, (&vv, &qq))| ((1.0 + r).ln(), (vv.abs() / qq).max(1e-300).ln()))
        .collect();
    if pts.is_empty() {
        return (0.0, 0.0);
    }
    // κ: steepest secant from the innermost point, so the bound anchored
    // at r = 1 holds everywhere beyond it
    let (x0, y0) = pts[0];
    let kappa = pts[1..]
        .iter()
        .filter(|p| p.0 > x0)
        .map(|&(x, y)| (y - y0) / (x - x0))
        .fold(0.0, f64::max);
    let c = pts.iter().map(|&(x, y)| (y - kappa * x).exp()).fold(0.0, f64::max);
    let c_at_origin = v
        .values()
        .iter()
        .zip(q.values())
        .zip(v.grid().nodes())
        .filter(|(_, &r)| r < 1.0)
        .map(|((a, b), _)| a.abs() / b)
        .fold(0.0, f64::max);
    (c.max(c_at_origin), kappa)
}

/// Human-readable one-liner for reports.
pub fn describe(report: &IdentityReport) -> alloc::string::String {
    format!(
        "L-Q {:.3e}, L+LQ+2Q {:.3e}, L-(y2Q)+4LQ {:.3e}, L+rho-y2Q {:.3e}",
        report.lminus_q, report.lplus_lambda_q, report.lminus_y2q, report.lplus_rho
    )
}
