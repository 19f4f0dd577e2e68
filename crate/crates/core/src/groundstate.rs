//! The radial ground state `−ΔQ + Q − Q^{1+4/N} = 0`, `Q > 0`.
//!
//! The discrete problem is the finite-volume equation on a staggered grid.
//! Shooting on its three-term recurrence brackets `Q(0)`; Newton on the
//! tridiagonal system then polishes the whole profile.

use alloc::sync::Arc;
use alloc::vec::Vec;
use alloc::{format, vec};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RealField;
use crate::grid::RadialGrid;
use crate::linalg::Tridiagonal;
use crate::params::ProblemParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    /// `‖Q‖₂²`
    pub mass: f64,
    /// `‖∇Q‖₂²`
    pub grad: f64,
    /// `‖Q‖_{p+1}^{p+1}`
    pub lp1: f64,
    /// `‖Q‖_{2+4/N}^{2+4/N}`
    pub crit: f64,
    /// `‖|y|Q‖₂²`
    pub virial: f64,
    /// `‖|y|^{−σ}Q‖₂²`
    pub potential: f64,
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub params: ProblemParams,
    pub q: RealField,
    pub norms: Norms,
    /// `‖−Δ_h Q + Q − Q^{1+4/N}‖∞ / ‖Q‖∞`.
    pub residual: f64,
    /// `L₊ρ = |y|²Q`; filled by [`crate::linops::solve_rho`].
    pub rho: Option<RealField>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundStateOptions {
    /// Relative residual target in the max norm.
    pub tol: f64,
    pub newton_max: usize,
    /// Bracket width on `Q(0)` for shooting.
    pub bracket_tol: f64,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions { tol: 1e-10, newton_max: 30, bracket_tol: 1e-14 }
    }
}

/// Radius at which `Q` has decayed below `10⁻¹²·Q(0)` with margin for the
/// Dirichlet truncation.
pub fn default_rmax(dim: usize) -> f64 {
    match dim {
        1 => 32.0,
        2 => 32.0,
        _ => 32.0,
    }
}

/// Rounding floor `16·eps/h²` of the relative residual, `h` the smallest
/// cell; a converged Newton iterate sits below it, not below any tighter
/// target.
pub fn residual_floor(grid: &RadialGrid) -> f64 {
    let h = grid.faces()[1];
    16.0 * f64::EPSILON / (h * h)
}

/// Discrete residual `(A Q)/w + Q − Q^{1+q}`.
fn residual(grid: &RadialGrid, q_exp: f64, u: &[f64]) -> Vec<f64> {
    let au = grid.apply_stiffness(u);
    au.iter()
        .zip(u)
        .zip(grid.weights())
        .map(|((a, &x), w)| a / w + x - x.abs().powf(q_exp) * x)
        .collect()
}

enum Shot {
    Over,
    Under,
}

/// March the recurrence from the origin; returns the classification and the
/// index reached.
fn shoot(grid: &RadialGrid, q_exp: f64, a: f64, out: &mut Vec<f64>) -> (Option<Shot>, usize) {
    let c = grid.couplings();
    let w = grid.weights();
    let n = grid.len();
    out.clear();
    out.push(a);
    // outward flux F_i = c_i (u_i − u_{i+1}) obeys F_i = F_{i−1} − w_i (u_i − u_i^{1+q})
    let mut flux = 0.0;
    for i in 0..n - 1 {
        let ui = out[i];
        flux -= w[i] * (ui - ui.abs().powf(q_exp) * ui);
        let next = ui - flux / c[i];
        if next <= 0.0 {
            return (Some(Shot::Over), i + 1);
        }
        if next >= ui {
            return (Some(Shot::Under), i + 1);
        }
        out.push(next);
    }
    (None, n)
}

fn newton(grid: &RadialGrid, q_exp: f64, u: &mut [f64], opts: &GroundStateOptions) -> Result<f64> {
    let scale = u.iter().cloned().fold(0.0, f64::max);
    let stiff = {
        let mut t = grid.stiffness_matrix();
        let inv: Vec<f64> = grid.weights().iter().map(|w| 1.0 / w).collect();
        t.scale_rows(&inv);
        t
    };
    let mut res_norm = f64::INFINITY;
    for it in 0..opts.newton_max {
        let r = residual(grid, q_exp, u);
        res_norm = r.iter().map(|x| x.abs()).fold(0.0, f64::max) / scale;
        let mut jac: Tridiagonal<f64> = stiff.clone();
        let d: Vec<f64> = u.iter().map(|&x| 1.0 - (1.0 + q_exp) * x.abs().powf(q_exp)).collect();
        jac.add_diag(&d);
        let delta = jac.solve(&r)?;
        let step = delta.iter().map(|x| x.abs()).fold(0.0, f64::max) / scale;
        for (x, dx) in u.iter_mut().zip(&delta) {
            *x -= dx;
        }
        if !u.iter().all(|x| x.is_finite()) {
            return Err(Error::NoConvergence { what: "ground-state Newton", iterations: it + 1, residual: res_norm });
        }
        // stop once the update reaches rounding level; the residual of a
        // converged iterate is then the discretization's rounding floor
        if step <= 1e-15 {
            break;
        }
    }
    let r = residual(grid, q_exp, u);
    let final_res = r.iter().map(|x| x.abs()).fold(0.0, f64::max) / scale;
    if final_res <= opts.tol {
        Ok(final_res)
    } else {
        Err(Error::NoConvergence { what: "ground-state Newton", iterations: opts.newton_max, residual: res_norm.min(final_res) })
    }
}

/// Shooting bracket on `Q(0)` followed by Newton polish.
pub fn solve_ground_state(params: &ProblemParams, grid: Arc<RadialGrid>, tol: f64) -> Result<GroundState> {
    let opts = GroundStateOptions { tol, ..Default::default() };
    solve_ground_state_with(params, grid, &opts)
}

pub fn solve_ground_state_with(
    params: &ProblemParams,
    grid: Arc<RadialGrid>,
    opts: &GroundStateOptions,
) -> Result<GroundState> {
    if grid.dim() != params.dim {
        return Err(Error::InvalidGrid(format!(
            "grid dimension {} differs from N = {}",
            grid.dim(),
            params.dim
        )));
    }
    let q_exp = params.crit_exponent();
    let mut lo = 0.5f64;
    let mut hi = 5.0f64;
    let mut buf = Vec::with_capacity(grid.len());
    let lo_shot = shoot(&grid, q_exp, lo, &mut buf).0;
    let hi_shot = shoot(&grid, q_exp, hi, &mut buf).0;
    if !matches!(lo_shot, Some(Shot::Under)) || !matches!(hi_shot, Some(Shot::Over)) {
        return Err(Error::Bracket(format!("initial bracket [{lo}, {hi}] does not straddle Q(0)")));
    }
    while hi - lo > opts.bracket_tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shoot(&grid, q_exp, mid, &mut buf).0 {
            Some(Shot::Over) => hi = mid,
            Some(Shot::Under) => lo = mid,
            None => {
                lo = mid;
                hi = mid;
            }
        }
    }
    let a = 0.5 * (lo + hi);
    let (_, reached) = shoot(&grid, q_exp, a, &mut buf);
    // trust the march only where it still decays smoothly; continue with the
    // free decay rate beyond
    let nodes = grid.nodes();
    let mut u = buf.clone();
    let keep = reached.min(u.len()).saturating_sub(8).max(2);
    u.truncate(keep);
    let last = u[keep - 1];
    let r_last = nodes[keep - 1];
    for &r in &nodes[keep..] {
        u.push(last * (-(r - r_last)).exp() * (r_last / r).powf((params.dim as f64 - 1.0) / 2.0));
    }
    let res = newton(&grid, q_exp, &mut u, opts)?;
    if let Some(i) = u.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::Bracket(format!("ground state changes sign at node {i}")));
    }
    let q = RealField::new(grid, u)?;
    let norms = compute_norms(&q, params)?;
    Ok(GroundState { params: *params, q, norms, residual: res, rho: None })
}

/// Normalized (Petviashvili) iteration for the same discrete equation.
pub fn petviashvili(params: &ProblemParams, grid: Arc<RadialGrid>, tol: f64, max_iter: usize) -> Result<RealField> {
    let q_exp = params.crit_exponent();
    let gamma = (1.0 + q_exp) / q_exp;
    let mut op = grid.stiffness_matrix();
    let inv: Vec<f64> = grid.weights().iter().map(|w| 1.0 / w).collect();
    op.scale_rows(&inv);
    op.add_diag(&vec![1.0; grid.len()]);
    let lu = op.factor()?;
    let w = grid.weights();
    let mut u: Vec<f64> = grid.nodes().iter().map(|r| 1.5 * (-r * r / 2.0).exp()).collect();
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        let nl: Vec<f64> = u.iter().map(|&x| x.abs().powf(q_exp) * x).collect();
        let lu_u = op.apply(&u);
        let num: f64 = u.iter().zip(&lu_u).zip(w).map(|((a, b), w)| a * b * w).sum();
        let den: f64 = u.iter().zip(&nl).zip(w).map(|((a, b), w)| a * b * w).sum();
        let m = (num / den).powf(gamma);
        let next = lu.solve(&nl);
        let mut diff: f64 = 0.0;
        let mut mx: f64 = 0.0;
        for (x, y) in u.iter_mut().zip(next) {
            let y = m * y;
            diff = diff.max((y - *x).abs());
            mx = mx.max(y.abs());
            *x = y;
        }
        last = diff / mx;
        if last < tol {
            return RealField::new(grid, u);
        }
    }
    Err(Error::NoConvergence { what: "Petviashvili iteration", iterations: max_iter, residual: last })
}

pub fn compute_norms(q: &RealField, params: &ProblemParams) -> Result<Norms> {
    Ok(Norms {
        mass: q.norm_l2_sq(),
        grad: q.grad_sq(),
        lp1: q.lq_pow(params.p + 1.0),
        crit: q.lq_pow(2.0 + 4.0 / params.dim as f64),
        virial: q.virial(),
        potential: q.power_weighted_sq(-2.0 * params.sigma)?,
    })
}

impl GroundState {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.q.grid()
    }

    /// `Q(0)` by even cubic extrapolation to the origin.
    pub fn q0(&self) -> f64 {
        crate::interp::interpolate(self.q.grid(), self.q.values(), 0.0)
    }

    /// `ω = (p+1)/2 · ‖|y|^{−σ}Q‖₂² / ‖Q‖_{p+1}^{p+1}`.
    pub fn omega(&self) -> f64 {
        (self.params.p + 1.0) / 2.0 * self.norms.potential / self.norms.lp1
    }

    pub fn rho(&self) -> Result<&RealField> {
        self.rho.as_ref().ok_or(Error::Missing("rho"))
    }

    /// Ground state for different `(p, σ, C₀, branch)` on the same `Q`.
    pub fn with_params(&self, params: &ProblemParams) -> Result<GroundState> {
        if params.dim != self.params.dim {
            return Err(Error::InvalidParams("dimension differs from the ground state's".into()));
        }
        let norms = compute_norms(&self.q, params)?;
        Ok(GroundState { params: *params, norms, ..self.clone() })
    }
}

/// `ω` for the ground state's parameters; also stored into `params`.
pub fn compute_omega(gs: &GroundState, params: &mut ProblemParams) -> Result<f64> {
    if gs.norms.lp1 <= 0.0 {
        return Err(Error::Missing("ground-state norms"));
    }
    let omega = gs.omega();
    params.omega = Some(omega);
    Ok(omega)
}

/// `‖v‖_{2+4/N}^{2+4/N} / [(1+2/N)(‖v‖₂/‖Q‖₂)^{4/N} ‖∇v‖₂²]`.
pub fn gn_ratio(gs: &GroundState, v: &RealField) -> Result<f64> {
    let n = gs.params.dim as f64;
    let mass = v.norm_l2_sq();
    let grad = v.grad_sq();
    if !(mass > 0.0 && grad > 0.0) {
        return Err(Error::InvalidInput("zero field in Gagliardo–Nirenberg ratio".into()));
    }
    let crit = v.lq_pow(2.0 + 4.0 / n);
    Ok(crit / ((1.0 + 2.0 / n) * (mass / gs.norms.mass).powf(2.0 / n) * grad))
}

/// `(‖∇Q‖² + ‖Q‖² − ‖Q‖_{2+4/N}^{2+4/N}, ‖∇Q‖² − N/(N+2)·‖Q‖_{2+4/N}^{2+4/N})`.
pub fn pohozaev_residuals(gs: &GroundState) -> (f64, f64) {
    pohozaev_of(&gs.q, gs.params.dim)
}

pub fn pohozaev_of(q: &RealField, dim: usize) -> (f64, f64) {
    let n = dim as f64;
    let mass = q.norm_l2_sq();
    let grad = q.grad_sq();
    let crit = q.lq_pow(2.0 + 4.0 / n);
    (grad + mass - crit, grad - n / (n + 2.0) * crit)
}

/// `E_crit(v) = ½‖∇v‖² − ‖v‖_{2+4/N}^{2+4/N}/(2+4/N)`.
pub fn critical_energy(v: &RealField, dim: usize) -> f64 {
    let n = dim as f64;
    0.5 * v.grad_sq() - v.lq_pow(2.0 + 4.0 / n) / (2.0 + 4.0 / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{make_params, Branch, ParamRequest};
    use core::f64::consts::PI;

    fn params(dim: usize) -> ProblemParams {
        make_params(ParamRequest::new(dim, 0.2, 1.0, Branch::PlusMinus)).unwrap()
    }

    fn solve(dim: usize, n: usize) -> GroundState {
        let g = Arc::new(RadialGrid::uniform(dim, n, default_rmax(dim)).unwrap());
        solve_ground_state(&params(dim), g, 1e-9).unwrap()
    }

    #[test]
    fn one_dimensional_soliton() {
        let gs = solve(1, 16_000);
        let exact = |r: f64| 3f64.powf(0.25) / (2.0 * r).cosh().sqrt();
        let err = gs.q.values().iter().zip(gs.grid().nodes()).map(|(q, &r)| (q - exact(r)).abs()).fold(0.0, f64::max);
        assert!(err < 1e-5, "max error {err}");
        assert!((gs.norms.mass - 3f64.sqrt() * PI / 2.0).abs() < 1e-5);
        assert!(gs.residual < 1e-9);
    }

    #[test]
    fn positive_and_decreasing() {
        for dim in 1..=3 {
            let gs = solve(dim, 4000);
            let v = gs.q.values();
            assert!(v.iter().all(|&x| x > 0.0));
            assert!(v.windows(2).all(|w| w[1] < w[0]), "dim {dim}");
            assert!(v[v.len() - 1] < 1e-12 * v[0]);
        }
    }

    #[test]
    fn petviashvili_agrees_with_shooting() {
        for dim in 1..=3 {
            let g = Arc::new(RadialGrid::uniform(dim, 2000, 24.0).unwrap());
            let gs = solve_ground_state(&params(dim), g.clone(), 1e-10).unwrap();
            let pv = petviashvili(&params(dim), g, 1e-13, 2000).unwrap();
            let diff = gs.q.sub(&pv).max_abs();
            assert!(diff < 1e-9, "dim {dim}: {diff}");
        }
    }

    #[test]
    fn pohozaev_second_order() {
        let r1 = pohozaev_residuals(&solve(2, 2000));
        let r2 = pohozaev_residuals(&solve(2, 4000));
        assert!(r1.0.abs() < 1e-10 && r2.0.abs() < 1e-10);
        let order = (r1.1 / r2.1).abs().log2();
        assert!((order - 2.0).abs() < 0.2, "order {order}");
    }

    #[test]
    fn gn_ratio_properties() {
        let gs = solve(1, 32_000);
        assert!((gn_ratio(&gs, &gs.q).unwrap() - 1.0).abs() < 1e-6);
        let gauss = RealField::from_fn(gs.grid().clone(), |r| (-r * r).exp()).unwrap();
        let rg = gn_ratio(&gs, &gauss).unwrap();
        assert!(rg < 1.0);
        let fine = Arc::new(RadialGrid::uniform(1, 200_000, 16.0).unwrap());
        let base = RealField::from_fn(fine.clone(), |r| (-r * r).exp()).unwrap();
        let scaled = RealField::from_fn(fine, |r| 3.0 * (-(0.7 * r) * (0.7 * r)).exp()).unwrap();
        let (r0, r1) = (gn_ratio(&gs, &base).unwrap(), gn_ratio(&gs, &scaled).unwrap());
        assert!((r0 - r1).abs() < 1e-8, "{r0} vs {r1}");
        let zero = RealField::zeros(gs.grid().clone());
        assert!(gn_ratio(&gs, &zero).is_err());
    }

    #[test]
    fn perturbed_profile_breaks_pohozaev() {
        let gs = solve(1, 4000);
        let bump = RealField::from_fn(gs.grid().clone(), |r| 1e-3 * (-r * r).exp()).unwrap();
        let (a, _) = pohozaev_of(&gs.q.add(&bump), 1);
        assert!(a.abs() >= 1e-4);
    }

    #[test]
    fn omega_positive_and_balanced() {
        let mut p = params(1);
        let gs = solve(1, 8000);
        let omega = compute_omega(&gs, &mut p).unwrap();
        assert!(omega > 0.0 && p.omega == Some(omega));
        let n = 1.0;
        let lhs = omega * n * (p.p - 1.0) / (2.0 * (p.p + 1.0)) * gs.norms.lp1;
        let rhs = p.sigma * gs.norms.potential;
        assert!((lhs - rhs).abs() < 1e-12 * rhs);
    }
}
