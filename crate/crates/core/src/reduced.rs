//! Reduced modulation dynamics
//!
//! ```text
//! b_s = −b² + θ(b, λ),   λ_s = −bλ,   t_s = λ²
//! ```
//!
//! with the approximate solutions it admits and the conversion between the
//! rescaled time `s` and physical time `t`.

use alloc::vec::Vec;
use alloc::format;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groundstate::GroundState;
use crate::profile::ProfileExpansion;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-14, h0: 1e-3, max_steps: 2_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest accepted local error estimate, in units of the mixed tolerance
    /// scale times `rtol`.
    pub max_error: f64,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step: `(y_new, error_estimate, f(s+h, y_new))`.
fn dp_step<const D: usize, F>(f: &mut F, s: f64, y: &[f64; D], k1: [f64; D], h: f64) -> ([f64; D], [f64; D], [f64; D])
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
{
    let mut k = [[0.0; D]; 7];
    k[0] = k1;
    for stage in 1..7 {
        let mut ys = *y;
        for (prev, a) in A[stage].iter().enumerate().take(stage) {
            if *a != 0.0 {
                for d in 0..D {
                    ys[d] += h * a * k[prev][d];
                }
            }
        }
        k[stage] = f(s + C[stage] * h, &ys);
    }
    let mut y5 = *y;
    let mut err = [0.0; D];
    for d in 0..D {
        for st in 0..7 {
            y5[d] += h * B5[st] * k[st][d];
            err[d] += h * (B5[st] - B4[st]) * k[st][d];
        }
    }
    (y5, err, k[6])
}

/// Fixed-step Dormand–Prince 5th-order integration from `s0` to `s1`.
pub fn dopri5_fixed<const D: usize, F>(mut f: F, s0: f64, y0: [f64; D], s1: f64, steps: usize) -> [f64; D]
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
{
    let h = (s1 - s0) / steps as f64;
    let mut y = y0;
    let mut s = s0;
    let mut k1 = f(s, &y);
    for _ in 0..steps {
        let (yn, _, kn) = dp_step(&mut f, s, &y, k1, h);
        y = yn;
        k1 = kn;
        s += h;
    }
    y
}

/// Outcome of an adaptive integration with output at prescribed points.
#[derive(Debug, Clone)]
pub struct OdeSolution<const D: usize> {
    pub s: Vec<f64>,
    pub y: Vec<[f64; D]>,
    pub stats: OdeStats,
    /// Set when `stop` fired before the last output point.
    pub stopped: bool,
}

/// Adaptive Dormand–Prince 5(4) with outputs at every point of `s_out`
/// (increasing, first entry is the initial point). Integration halts early
/// when `stop(y)` is true for a new state; the last state before it is
/// appended.
pub fn dopri45<const D: usize, F, S>(
    mut f: F,
    s_out: &[f64],
    y0: [f64; D],
    opts: &OdeOptions,
    mut stop: S,
) -> Result<OdeSolution<D>>
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
    S: FnMut(&[f64; D]) -> bool,
{
    if s_out.is_empty() {
        return Err(Error::InvalidInput("empty output grid".into()));
    }
    if s_out.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("output points must be strictly increasing".into()));
    }
    let mut stats = OdeStats::default();
    let mut out_s = Vec::with_capacity(s_out.len());
    let mut out_y = Vec::with_capacity(s_out.len());
    let mut s = s_out[0];
    let mut y = y0;
    out_s.push(s);
    out_y.push(y);
    let mut k1 = f(s, &y);
    let mut h = opts.h0.min(s_out.last().copied().unwrap_or(s) - s).max(f64::MIN_POSITIVE);
    for &target in &s_out[1..] {
        while s < target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::NoConvergence {
                    what: "adaptive Runge-Kutta",
                    iterations: opts.max_steps,
                    residual: stats.max_error,
                });
            }
            let last = s + h >= target;
            let step = if last { target - s } else { h };
            let (yn, err, kn) = dp_step(&mut f, s, &y, k1, step);
            let mut e2 = 0.0;
            for d in 0..D {
                let sc = opts.atol + opts.rtol * y[d].abs().max(yn[d].abs());
                e2 += (err[d] / sc).powi(2);
            }
            let en = (e2 / D as f64).sqrt();
            if !en.is_finite() {
                h = 0.25 * step;
                stats.rejected += 1;
                if h < 1e-14 * s.abs().max(1.0) {
                    return Err(Error::NonFinite { what: "reduced ODE state", index: out_s.len() });
                }
                continue;
            }
            if en <= 1.0 {
                if stop(&yn) {
                    out_s.push(s);
                    out_y.push(y);
                    return Ok(OdeSolution { s: out_s, y: out_y, stats, stopped: true });
                }
                s = if last { target } else { s + step };
                y = yn;
                k1 = kn;
                stats.accepted += 1;
                stats.max_error = stats.max_error.max(en * opts.rtol);
            } else {
                stats.rejected += 1;
            }
            let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
            // keep the controller step when the last step was clipped to the output point
            if !(last && en <= 1.0) || fac < 1.0 {
                h = step * fac;
            }
            if h < 1e-14 * s.abs().max(1.0) {
                return Err(Error::NoConvergence { what: "adaptive Runge-Kutta step size", iterations: stats.accepted, residual: en });
            }
        }
        out_s.push(s);
        out_y.push(y);
    }
    Ok(OdeSolution { s: out_s, y: out_y, stats, stopped: false })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedTrajectory {
    pub s: Vec<f64>,
    pub lambda: Vec<f64>,
    pub b: Vec<f64>,
    /// Physical time with the blow-up time of the continued trajectory at 0.
    pub t: Vec<f64>,
    pub e0: f64,
    /// `λ` collapsed inside the requested range.
    pub truncated: bool,
    /// Largest accepted local error estimate of the integrator.
    pub max_error: f64,
}

impl ReducedTrajectory {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// Output points `s0·ratio^k` spanning `[s0, s1]`.
pub fn geometric_points(s0: f64, s1: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return alloc::vec![s0];
    }
    let r = (s1 / s0).ln() / (count - 1) as f64;
    let mut v: Vec<f64> = (0..count).map(|i| s0 * (r * i as f64).exp()).collect();
    v[count - 1] = s1;
    v
}

/// Integrate the reduced system with θ taken from the profile expansion.
pub fn integrate_reduced(
    expansion: &ProfileExpansion,
    s_grid: &[f64],
    lambda_init: f64,
    b_init: f64,
) -> Result<ReducedTrajectory> {
    integrate_reduced_with(|l, b| expansion.theta(l, b), s_grid, lambda_init, b_init, &OdeOptions::default())
}

pub fn integrate_reduced_with<T: Fn(f64, f64) -> f64>(
    theta: T,
    s_grid: &[f64],
    lambda_init: f64,
    b_init: f64,
    opts: &OdeOptions,
) -> Result<ReducedTrajectory> {
    if !(lambda_init > 0.0) || !lambda_init.is_finite() || !b_init.is_finite() {
        return Err(Error::InvalidInput(format!(
            "initial data must have finite positive lambda (lambda = {lambda_init}, b = {b_init})"
        )));
    }
    // λ is integrated as log λ so that positivity is structural
    let rhs = |_s: f64, y: &[f64; 3]| {
        let lam = y[0].exp();
        let b = y[1];
        [-b, -b * b + theta(lam, b), lam * lam]
    };
    let floor = (f64::MIN_POSITIVE.sqrt()).ln();
    let sol = dopri45(rhs, s_grid, [lambda_init.ln(), b_init, 0.0], opts, |y| y[0] < floor)?;
    let lambda: Vec<f64> = sol.y.iter().map(|y| y[0].exp()).collect();
    let b: Vec<f64> = sol.y.iter().map(|y| y[1]).collect();
    let elapsed: Vec<f64> = sol.y.iter().map(|y| y[2]).collect();
    let t = physical_time(&sol.s, &lambda, &b, &elapsed);
    Ok(ReducedTrajectory {
        s: sol.s,
        lambda,
        b,
        t,
        e0: f64::NAN,
        truncated: sol.stopped,
        max_error: sol.stats.max_error,
    })
}

/// `t(s) = −∫_s^∞ λ²`, with the tail past the last point continued by the
/// local power law `λ ∝ s^{−q}`, `q = b s`.
fn physical_time(s: &[f64], lambda: &[f64], b: &[f64], elapsed: &[f64]) -> Vec<f64> {
    let n = s.len();
    let (se, le, be) = (s[n - 1], lambda[n - 1], b[n - 1]);
    let q = be * se;
    let tail = if 2.0 * q > 1.0 { le * le * se / (2.0 * q - 1.0) } else { f64::INFINITY };
    let total = elapsed[n - 1] + tail;
    elapsed.iter().map(|e| e - total).collect()
}

/// `(λ_app(s), b_app(s)) = (sqrt(‖yQ‖²/(8E₀))/s, 1/s)`.
pub fn app_solutions(gs: &GroundState, e0: f64, s: f64) -> Result<(f64, f64)> {
    app_solutions_from_virial(gs.norms.virial, e0, s)
}

pub fn app_solutions_from_virial(virial: f64, e0: f64, s: f64) -> Result<(f64, f64)> {
    if !(e0 > 0.0) {
        return Err(Error::InvalidParams(format!("energy level E0 = {e0} must be positive")));
    }
    if !(s > 0.0) {
        return Err(Error::InvalidInput(format!("rescaled time s = {s} must be positive")));
    }
    Ok(((virial / (8.0 * e0)).sqrt() / s, 1.0 / s))
}

/// `λ_app = (α sqrt(β/(1−α)))^{−1/α} s^{−1/α}`, `b_app = 1/(αs)`, exact
/// solutions of `b_s + b² − βλ^{2α} = 0`, `λ_s/λ + b = 0`.
///
/// The exponent of `s` is forced by `λ_s/λ = −b = −1/(αs)`.
pub fn alpha_lt1_solutions(beta01: f64, alpha: f64, s: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParams(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if !(beta01 > 0.0) {
        return Err(Error::InvalidParams(format!("beta01 = {beta01} must be positive")));
    }
    let c = (alpha * (beta01 / (1.0 - alpha)).sqrt()).powf(-1.0 / alpha);
    Ok((c * s.powf(-1.0 / alpha), 1.0 / (alpha * s)))
}

/// `λ = c s^{−2/α}`, `b = (2/α)/s` with `c^α = (2/α)(2/α − 1)/β₀,₀`, the
/// power-law solution of `b_s + b² − β₀,₀λ^α = 0`, `λ_s/λ + b = 0`.
pub fn unbalanced_solutions(beta00: f64, alpha: f64, s: f64) -> Result<(f64, f64)> {
    let c = unbalanced_coefficient(beta00, alpha)?;
    if !(s > 0.0) {
        return Err(Error::InvalidInput(format!("rescaled time s = {s} must be positive")));
    }
    Ok((c * s.powf(-2.0 / alpha), 2.0 / (alpha * s)))
}

fn unbalanced_coefficient(beta00: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::InvalidParams(format!("alpha = {alpha} must lie in (1, 2)")));
    }
    if !(beta00 > 0.0) {
        return Err(Error::InvalidParams(format!("beta00 = {beta00} must be positive")));
    }
    let k = 2.0 / alpha;
    Ok((k * (k - 1.0) / beta00).powf(1.0 / alpha))
}

/// `(s₁, b₁)` on [`unbalanced_solutions`] with `λ(s₁) = λ₁`.
pub fn unbalanced_start(beta00: f64, alpha: f64, lambda1: f64) -> Result<(f64, f64)> {
    let c = unbalanced_coefficient(beta00, alpha)?;
    if !(lambda1 > 0.0) {
        return Err(Error::InvalidInput(format!("scale lambda1 = {lambda1} must be positive")));
    }
    let s1 = (c / lambda1).powf(alpha / 2.0);
    Ok((s1, 2.0 / (alpha * s1)))
}

/// `λ₁ = sqrt(‖yQ‖²/(8E₀))/s₁` and `b₁ > 0` with `E(P_{λ₁,b₁,0}) = E₀`.
pub fn init_params(expansion: &ProfileExpansion, gs: &GroundState, e0: f64, s1: f64) -> Result<(f64, f64)> {
    let (lambda1, b_app) = app_solutions(gs, e0, s1)?;
    let g = |b: f64| expansion.energy(lambda1, b) - e0;
    let (mut lo, mut hi) = (0.25 * b_app, 4.0 * b_app);
    let (mut glo, ghi) = (g(lo), g(hi));
    if glo.signum() == ghi.signum() {
        return Err(Error::Bracket(format!(
            "no energy root for b in [{lo}, {hi}] at s1 = {s1} (E - E0 = {glo}, {ghi}); s1 too small"
        )));
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    // secant polish inside the bracket
    let (mut x0, mut x1) = (lo, hi);
    let (mut g0, mut g1) = (g(x0), g(x1));
    for _ in 0..20 {
        if g1 == g0 || g1.abs() <= 1e-14 * e0.abs() {
            break;
        }
        let x2 = x1 - g1 * (x1 - x0) / (g1 - g0);
        if !(x2 > lo && x2 < hi) {
            break;
        }
        x0 = x1;
        g0 = g1;
        x1 = x2;
        g1 = g(x1);
    }
    let b1 = if g1.abs() <= g0.abs() { x1 } else { x0 };
    Ok((lambda1, b1))
}

/// Default bootstrap exponent `M = 0.9·min(1, 2(α−1))`.
pub fn default_m_exponent(alpha: f64) -> f64 {
    0.9 * (2.0 * (alpha - 1.0)).min(1.0)
}

/// `max |𝒞/s − |t|| / |t|^{M+1}` with `𝒞 = ‖yQ‖²/(8E₀)`.
pub fn s_t_conversion(traj: &ReducedTrajectory, virial: f64, e0: f64, m: f64) -> f64 {
    s_t_deviation(&traj.s, &traj.t, virial, e0, m)
}

pub fn s_t_deviation(s: &[f64], t: &[f64], virial: f64, e0: f64, m: f64) -> f64 {
    if s.len() < 2 {
        return 0.0;
    }
    let c = virial / (8.0 * e0);
    s.iter()
        .zip(t)
        .filter(|(_, t)| t.is_finite() && **t != 0.0)
        .map(|(&s, &t)| (c / s - t.abs()).abs() / t.abs().powf(m + 1.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unbalanced_power_law_solves_system() {
        let (beta, alpha) = (0.37, 1.6);
        for s in [3.0, 10.0, 40.0] {
            // central differences: relative truncation h²(k+1)(k+2)/(6s²) for s^{-k}
            let h = 1e-5 * s;
            let (l, b) = unbalanced_solutions(beta, alpha, s).unwrap();
            let (lp, bp) = unbalanced_solutions(beta, alpha, s + h).unwrap();
            let (lm, bm) = unbalanced_solutions(beta, alpha, s - h).unwrap();
            let db = (bp - bm) / (2.0 * h);
            let dl = (lp - lm) / (2.0 * h);
            assert!((db + b * b - beta * l.powf(alpha)).abs() < 1e-8 * b * b);
            assert!((dl / l + b).abs() < 1e-8 * b);
        }
        let (s1, b1) = unbalanced_start(beta, alpha, 0.1).unwrap();
        let (l, b) = unbalanced_solutions(beta, alpha, s1).unwrap();
        assert!((l - 0.1).abs() < 1e-14 && (b - b1).abs() < 1e-14);
        assert!(unbalanced_start(-1.0, alpha, 0.1).is_err());
    }

    fn riccati(s0: f64, c: f64, lam0: f64) -> impl Fn(f64) -> (f64, f64) {
        move |s| (1.0 / (s + c), lam0 * (s0 + c) / (s + c))
    }

    #[test]
    fn balanced_closed_form() {
        let (s0, c, lam0) = (10.0, 0.5, 0.1);
        let exact = riccati(s0, c, lam0);
        let grid = geometric_points(s0, 1000.0, 41);
        let tr = integrate_reduced_with(|_, _| 0.0, &grid, lam0, 1.0 / (s0 + c), &OdeOptions::default()).unwrap();
        for (i, &s) in tr.s.iter().enumerate() {
            let (b, l) = exact(s);
            assert!((tr.b[i] - b).abs() < 1e-8 * b);
            assert!((tr.lambda[i] - l).abs() < 1e-8 * l);
        }
        assert!(!tr.truncated && tr.max_error < 1e-8);
        // b(s)(s − s*) → 1 with s* = −c
        let last = tr.len() - 1;
        assert!((tr.b[last] * (tr.s[last] + c) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn equilibrium() {
        let grid = [1.0, 5.0, 50.0];
        let tr = integrate_reduced_with(|_, _| 0.0, &grid, 0.3, 0.0, &OdeOptions::default()).unwrap();
        assert!(tr.b.iter().all(|&b| b == 0.0));
        assert!(tr.lambda.iter().all(|&l| l == 0.3));
    }

    #[test]
    fn design_order_five() {
        // y' = y cos s, z' = −s z: y = e^{sin s}, z = e^{−s²/2}
        let rhs = |s: f64, y: &[f64; 2]| [y[0] * s.cos(), -s * y[1]];
        let errs: Vec<f64> = [40usize, 80, 160]
            .iter()
            .map(|&n| {
                let y = dopri5_fixed(rhs, 0.0, [1.0, 1.0], 3.0, n);
                (y[0] - 3.0f64.sin().exp()).abs().max((y[1] - (-4.5f64).exp()).abs())
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 4.7 && order < 5.5, "order {order}");
        }
    }

    #[test]
    fn unbalanced_faster_than_inverse_s() {
        let beta = 0.3;
        let alpha = 1.6;
        let grid = geometric_points(10.0, 1000.0, 21);
        let tr = integrate_reduced_with(|l, _| beta * l.powf(alpha), &grid, 0.05, 0.1, &OdeOptions::default()).unwrap();
        let n = tr.len() - 1;
        let q = -(tr.lambda[n] / tr.lambda[n - 4]).ln() / (tr.s[n] / tr.s[n - 4]).ln();
        assert!(q > 1.0, "local exponent {q}");
    }

    #[test]
    fn alpha_lt1_formula_solves_system() {
        let (beta, alpha) = (0.7, 0.6);
        for s in [1.0, 7.0, 40.0] {
            let (l, b) = alpha_lt1_solutions(beta, alpha, s).unwrap();
            let h = 1e-4 * s;
            let (lp, bp) = alpha_lt1_solutions(beta, alpha, s + h).unwrap();
            let (lm, bm) = alpha_lt1_solutions(beta, alpha, s - h).unwrap();
            // exact derivatives: b' = −1/(αs²), λ'/λ = −1/(αs)
            let db = -1.0 / (alpha * s * s);
            let dl = -1.0 / (alpha * s) * l;
            assert!(((bp - bm) / (2.0 * h) - db).abs() < 1e-6 * db.abs());
            assert!(((lp - lm) / (2.0 * h) - dl).abs() < 1e-6 * dl.abs());
            assert!((db + b * b - beta * l.powf(2.0 * alpha)).abs() < 1e-10 * b * b);
            assert!((dl / l + b).abs() < 1e-12 * b);
            assert!((b * alpha * s - 1.0).abs() < 1e-15);
        }
        assert!(alpha_lt1_solutions(beta, 1.2, 1.0).is_err());
    }

    #[test]
    fn alpha_lt1_tracked_by_integrator() {
        let (beta, alpha) = (0.7, 0.6);
        let s0 = 10.0;
        let (l0, b0) = alpha_lt1_solutions(beta, alpha, s0).unwrap();
        let grid = geometric_points(s0, 100.0, 11);
        let tr = integrate_reduced_with(|l, _| beta * l.powf(2.0 * alpha), &grid, l0, b0, &OdeOptions::default())
            .unwrap();
        for (i, &s) in tr.s.iter().enumerate() {
            let (l, b) = alpha_lt1_solutions(beta, alpha, s).unwrap();
            assert!((tr.lambda[i] / l - 1.0).abs() < 0.01 && (tr.b[i] / b - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn app_solution_identities() {
        let (virial, e0) = (2.5, 1.0);
        let k = (virial / (8.0 * e0)).sqrt();
        for s in [10.0, 100.0] {
            let (l, b) = app_solutions_from_virial(virial, e0, s).unwrap();
            assert!((l * s - k).abs() < 1e-15);
            assert!((b / l - 1.0 / k).abs() < 1e-12);
        }
        assert!(app_solutions_from_virial(virial, 0.0, 10.0).is_err());
        // θ = 0 from the approximate solution stays on it
        let s1 = 20.0;
        let (l1, b1) = app_solutions_from_virial(virial, e0, s1).unwrap();
        let grid = geometric_points(s1, 400.0, 9);
        let tr = integrate_reduced_with(|_, _| 0.0, &grid, l1, b1, &OdeOptions::default()).unwrap();
        for (i, &s) in tr.s.iter().enumerate() {
            let (l, _) = app_solutions_from_virial(virial, e0, s).unwrap();
            assert!((tr.lambda[i] / l - 1.0).abs() < 1e-8);
        }
        // s↔t on the exact balanced trajectory
        let dev = s_t_conversion(&tr, virial, e0, default_m_exponent(1.6));
        assert!(dev < 1e-6, "{dev}");
    }

    #[test]
    fn degenerate_conversion() {
        assert_eq!(s_t_deviation(&[3.0], &[-1.0], 1.0, 1.0, 0.5), 0.0);
    }

    #[test]
    fn collapse_is_flagged() {
        // θ = 1 drives b → 1 and λ → 0 like e^{−s}
        let grid = [0.0, 1e6];
        let tr = integrate_reduced_with(|_, _| 1.0, &grid, 1.0, 1.0, &OdeOptions::default()).unwrap();
        assert!(tr.truncated);
        assert!(tr.lambda.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn init_params_roots() {
        use crate::groundstate::solve_ground_state;
        use crate::params::{make_params, Branch, ParamRequest};
        use crate::profile::build_profile;
        use crate::RadialGrid;
        use alloc::sync::Arc;
        let p0 = make_params(ParamRequest::new(1, 0.2, 1.0, Branch::PlusMinus)).unwrap();
        // E_crit(Q) carries an O(h²) discretization bias that E(P_λ) sees
        // amplified by λ^{−2}; λ₁ reaches 2.5e-3 here
        let grid = Arc::new(RadialGrid::uniform(1, 96_000, 24.0).unwrap());
        let gs = solve_ground_state(&p0, grid, 1e-8).unwrap();
        let params = p0.with_c0(gs.omega());
        let gs = gs.with_params(&params).unwrap();
        let exp = build_profile(&gs, &params, 1).unwrap();
        let e0 = 1.0;
        let k = (gs.norms.virial / (8.0 * e0)).sqrt();
        let mut gaps = Vec::new();
        for s1 in [50.0, 100.0, 200.0] {
            let (l1, b1) = init_params(&exp, &gs, e0, s1).unwrap();
            assert!((l1 * s1 - k).abs() < 1e-12 * k);
            assert!((exp.energy(l1, b1) - e0).abs() < 1e-8 * e0);
            gaps.push((b1 * s1 - 1.0).abs());
        }
        assert!(gaps.iter().all(|g| *g < 2e-3), "{gaps:?}");
    }
}
