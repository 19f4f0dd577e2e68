//! Modulation decomposition near the soliton tube
//!
//! ```text
//! u(x) = λ^{−N/2} (P + ε)(x/λ) e^{−i(b/4)|x|²/λ² + iγ},
//! (ε, iΛP)₂ = (ε, |y|²P)₂ = (ε, iρ)₂ = 0.
//! ```
//!
//! `ε` lives on the profile grid. The field `u` is pulled back with
//! `v(y) = λ^{N/2} u(λy)` by cubic interpolation.

use alloc::vec::Vec;
use alloc::{format, vec};
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, RadialField};
use crate::interp::interpolate;
use crate::linalg::solve_dense;
use crate::nonlinearity::Power;
use crate::profile::{rescale_to_physical, ProfileExpansion};
use crate::RadialGrid;
use alloc::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Guess {
    pub lambda: f64,
    pub b: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposeOptions {
    /// Tube radius `δ` for `‖λ^{N/2}u(λ·)e^{−iγ} − Q‖_{H¹}` at the guess.
    pub tube_radius: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions { tube_radius: 0.3, tol: 1e-12, max_iter: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct ModulationState {
    pub lambda: f64,
    pub b: f64,
    /// In `[0, 2π)`.
    pub gamma: f64,
    pub eps: ComplexField,
    pub t: f64,
    pub s: f64,
    /// `((ε, iΛP)₂, (ε, |y|²P)₂, (ε, iρ)₂)` at convergence.
    pub orthogonality: [f64; 3],
    /// `(ε, P)₂`
    pub eps_p: f64,
    pub iterations: usize,
}

fn wrap_phase(g: f64) -> f64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    let w = num_traits::Euclid::rem_euclid(&g, &two_pi);
    if w >= two_pi {
        0.0
    } else {
        w
    }
}

/// `|a − b|` on `ℝ/2πℤ`.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = wrap_phase(a - b);
    d.min(2.0 * core::f64::consts::PI - d)
}

/// `v(y) = λ^{N/2} u(λy)` on `target`.
pub fn pull_back(u: &ComplexField, lambda: f64, target: &Arc<RadialGrid>) -> ComplexField {
    let amp = lambda.powf(target.dim() as f64 / 2.0);
    let src = u.grid();
    let vals = target.nodes().iter().map(|&y| interpolate(src, u.values(), lambda * y) * amp).collect();
    RadialField::new(target.clone(), vals).unwrap_or_else(|_| ComplexField::zeros(target.clone()))
}

struct Frame {
    eps: ComplexField,
    w: ComplexField,
    lam_v: ComplexField,
    p: ComplexField,
    dp_dl: ComplexField,
    dp_db: ComplexField,
    phis: [ComplexField; 3],
}

fn twist(v: &ComplexField, b: f64, gamma: f64) -> ComplexField {
    v.map_r(|r, z| z * Complex64::from_polar(1.0, 0.25 * b * r * r - gamma))
}

fn frame(u: &ComplexField, exp: &ProfileExpansion, lambda: f64, b: f64, gamma: f64, rho_i: &ComplexField) -> Frame {
    let grid = exp.grid();
    let v = pull_back(u, lambda, grid);
    let w = twist(&v, b, gamma);
    let lam_v = twist(&v.lambda_op(), b, gamma);
    let ev = exp.eval_with_derivatives(lambda, b);
    let eps = w.sub(&ev.p);
    let phis = [
        ev.p.lambda_op().times_i(),
        ev.p.map_r(|r, z| z * (r * r)),
        rho_i.clone(),
    ];
    Frame { eps, w, lam_v, p: ev.p, dp_dl: ev.dp_dlambda, dp_db: ev.dp_db, phis }
}

fn conditions(f: &Frame) -> [f64; 3] {
    [f.eps.inner(&f.phis[0]), f.eps.inner(&f.phis[1]), f.eps.inner(&f.phis[2])]
}

fn jacobian(f: &Frame, lambda: f64) -> Vec<Vec<f64>> {
    let d_eps = [
        f.lam_v.scaled(1.0 / lambda).sub(&f.dp_dl),
        f.w.map_r(|r, z| z * Complex64::new(0.0, 0.25 * r * r)).sub(&f.dp_db),
        f.w.map(|z| z * Complex64::new(0.0, -1.0)),
    ];
    let d_phi = |k: usize, m: usize| -> Option<ComplexField> {
        let dp = match m {
            0 => &f.dp_dl,
            1 => &f.dp_db,
            _ => return None,
        };
        match k {
            0 => Some(dp.lambda_op().times_i()),
            1 => Some(dp.map_r(|r, z| z * (r * r))),
            _ => None,
        }
    };
    (0..3)
        .map(|k| {
            (0..3)
                .map(|m| {
                    let mut j = d_eps[m].inner(&f.phis[k]);
                    if let Some(dphi) = d_phi(k, m) {
                        j += f.eps.inner(&dphi);
                    }
                    j
                })
                .collect()
        })
        .collect()
}

/// Distance of `u` from the soliton tube at the guess.
pub fn tube_distance(u: &ComplexField, exp: &ProfileExpansion, guess: &Guess) -> f64 {
    let v = pull_back(u, guess.lambda, exp.grid());
    let g = guess.gamma;
    let q = exp.q();
    v.map(|z| z * Complex64::from_polar(1.0, -g)).sub(&q.to_complex()).norm_h1()
}

/// Newton solve of the three orthogonality conditions for `(λ, b, γ)`.
pub fn decompose(
    u: &ComplexField,
    expansion: &ProfileExpansion,
    guess: &Guess,
    opts: &DecomposeOptions,
) -> Result<ModulationState> {
    if !(guess.lambda > 0.0) {
        return Err(Error::InvalidInput(format!("guess lambda = {} must be positive", guess.lambda)));
    }
    if u.grid().dim() != expansion.grid().dim() {
        return Err(Error::InvalidInput("field and profile dimensions differ".into()));
    }
    u.check_finite("decomposed field")?;
    let dist = tube_distance(u, expansion, guess);
    if !(dist < opts.tube_radius) {
        return Err(Error::TubeExit { distance: dist, radius: opts.tube_radius });
    }
    let rho_i = expansion.rho().to_complex().times_i();
    let (mut lambda, mut b, mut gamma) = (guess.lambda, guess.b, guess.gamma);
    let mut fr = frame(u, expansion, lambda, b, gamma, &rho_i);
    let mut c = conditions(&fr);
    let mut iterations = 0;
    let norm = |c: &[f64; 3]| c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    while norm(&c) > opts.tol {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence { what: "modulation decomposition", iterations, residual: norm(&c) });
        }
        iterations += 1;
        let jac = jacobian(&fr, lambda);
        let step = solve_dense(jac, c.iter().map(|x| -x).collect())?;
        let mut damp = 1.0;
        loop {
            let (l2, b2, g2) = (lambda + damp * step[0], b + damp * step[1], gamma + damp * step[2]);
            if l2 > 0.0 {
                let f2 = frame(u, expansion, l2, b2, g2, &rho_i);
                let c2 = conditions(&f2);
                if norm(&c2) < norm(&c) || damp < 1e-3 {
                    lambda = l2;
                    b = b2;
                    gamma = g2;
                    fr = f2;
                    c = c2;
                    break;
                }
            }
            damp *= 0.5;
            if damp < 1e-3 {
                return Err(Error::NoConvergence {
                    what: "modulation decomposition line search",
                    iterations,
                    residual: norm(&c),
                });
            }
        }
        // stagnation at the rounding level of the pairings
        if step.iter().zip([lambda, 1.0, 1.0]).all(|(s, sc)| s.abs() <= 1e-15 * sc) {
            break;
        }
    }
    let eps_p = fr.eps.inner(&fr.p);
    Ok(ModulationState {
        lambda,
        b,
        gamma: wrap_phase(gamma),
        eps: fr.eps,
        t: f64::NAN,
        s: f64::NAN,
        orthogonality: c,
        eps_p,
        iterations,
    })
}

/// `u = λ^{−N/2}(P+ε)(x/λ) e^{−i(b/4)|x|²/λ² + iγ}` on `grid`.
pub fn reconstruct(state: &ModulationState, expansion: &ProfileExpansion, grid: Arc<RadialGrid>) -> Result<ComplexField> {
    let (p, _) = expansion.eval_profile(state.lambda, state.b);
    rescale_to_physical(&p.add(&state.eps), state.lambda, state.b, state.gamma, grid)
}

/// `ε̂ = ε e^{−ib|y|²/4}`.
pub fn hat_epsilon(state: &ModulationState) -> ComplexField {
    let b = state.b;
    state.eps.map_r(|r, z| z * Complex64::from_polar(1.0, -0.25 * b * r * r))
}

/// `Mod = (λ_s/λ + b, b_s + b² − θ, 1 − γ_s)` and its Euclidean norm.
pub fn mod_vector(
    state: &ModulationState,
    expansion: &ProfileExpansion,
    dlambda_ds: f64,
    db_ds: f64,
    dgamma_ds: f64,
) -> ([f64; 3], f64) {
    let theta = expansion.theta(state.lambda, state.b);
    let m = [dlambda_ds / state.lambda + state.b, db_ds + state.b * state.b - theta, 1.0 - dgamma_ds];
    let n = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
    (m, n)
}

/// `|(ε,P)₂| + λ^α‖ε̂‖_{H¹} + ‖ε̂‖²_{H¹} + (b²+λ^α)^{J+2}`.
pub fn mod_bound(state: &ModulationState, expansion: &ProfileExpansion) -> f64 {
    let la = state.lambda.powf(expansion.alpha);
    let eh = hat_epsilon(state).norm_h1();
    state.eps_p.abs() + la * eh + eh * eh + (state.b * state.b + la).powi(expansion.order as i32 + 2)
}

/// Second-order remainder `∫ (F(P+ε) − F(P) − dF(P)(ε))` for the power
/// potential `pw`, on the profile grid.
fn potential_remainder(pw: Power, p: &ComplexField, eps: &ComplexField) -> f64 {
    let grid = p.grid();
    let s: f64 = p
        .values()
        .iter()
        .zip(eps.values())
        .zip(grid.weights())
        .map(|((&a, &e), w)| (pw.potential(a + e) - pw.potential(a) - (pw.force(a) * e.conj()).re) * w)
        .sum();
    grid.surface() * s
}

/// `S = λ^{−m}(½‖ε‖²_{H¹} + b²‖yε‖² − ∫(F(P+ε)−F(P)−dF(P)ε)
///       − C₁λ^α∫(G(P+ε)−G(P)−dG(P)ε) − (C₂/2)λ^α‖|y|^{−σ}ε‖²)`.
pub fn lyapunov_s(state: &ModulationState, expansion: &ProfileExpansion, m: f64) -> f64 {
    lambda_m_s(state, expansion) / state.lambda.powf(m)
}

/// `λ^m S`, the bracket of the Lyapunov functional.
pub fn lambda_m_s(state: &ModulationState, expansion: &ProfileExpansion) -> f64 {
    let params = &expansion.params;
    let (c1, c2) = params.couplings();
    let la = state.lambda.powf(expansion.alpha);
    let (p, _) = expansion.eval_profile(state.lambda, state.b);
    let eps = &state.eps;
    let crit = potential_remainder(Power::critical(params.dim), &p, eps);
    let sub = if c1 != 0.0 { potential_remainder(Power::subcritical(params.p), &p, eps) } else { 0.0 };
    let pot: f64 = eps
        .values()
        .iter()
        .zip(eps.grid().weights())
        .zip(expansion.potential())
        .map(|((e, w), a)| e.norm_sqr() * w * a)
        .sum::<f64>()
        * eps.grid().surface();
    0.5 * eps.norm_h1_sq() + state.b * state.b * eps.virial() - crit - c1 * la * sub - 0.5 * c2 * la * pot
}

/// `(b² + ‖ε̂‖²_{H¹}) / (λ²E₀)` at the threshold coupling, `/ λ^α` otherwise.
pub fn energy_inequality_check(state: &ModulationState, expansion: &ProfileExpansion, e0: f64, balanced: bool) -> Result<f64> {
    let eh = hat_epsilon(state).norm_h1();
    let num = state.b * state.b + eh * eh;
    if balanced {
        if !(e0 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "energy E(u0) = {e0} is not positive for critical-mass data at the threshold coupling"
            )));
        }
        Ok(num / (state.lambda * state.lambda * e0))
    } else {
        Ok(num / state.lambda.powf(expansion.alpha))
    }
}

/// Remove from `eps` its components along `iΛP`, `|y|²P`, `iρ` and `P`
/// in the real pairing `(·,·)₂` (Gram–Schmidt on the four directions).
pub fn project_orthogonal(eps: &ComplexField, expansion: &ProfileExpansion, lambda: f64, b: f64) -> ComplexField {
    let (p, _) = expansion.eval_profile(lambda, b);
    let dirs = [
        p.lambda_op().times_i(),
        p.map_r(|r, z| z * (r * r)),
        expansion.rho().to_complex().times_i(),
        p.clone(),
    ];
    let n = dirs.len();
    let gram: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| dirs[i].inner(&dirs[j])).collect()).collect();
    let rhs: Vec<f64> = dirs.iter().map(|d| eps.inner(d)).collect();
    let coef = solve_dense(gram, rhs).unwrap_or_else(|_| vec![0.0; n]);
    let mut out = eps.clone();
    for (c, d) in coef.iter().zip(&dirs) {
        out.axpy(Complex64::new(-c, 0.0), d);
    }
    out
}
