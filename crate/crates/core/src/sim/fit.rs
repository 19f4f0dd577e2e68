//! Power-law fits `λ(t) = c·(T − t)^q` and the gradient lower bound.
//!
//! The fit is separable: for fixed `T` the model is linear in `(ln c, q)`
//! on `ln λ`, so the residual is minimized over `T` alone (scan, then
//! golden section) and the three parameters are polished by Gauss–Newton.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::blowup::{BlowupRun, Snapshot};
use super::is_balanced;
use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::params::{Branch, ProblemParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub coefficient: f64,
    /// `[t_a, t_b]`
    pub window: [f64; 2],
    pub t_est: f64,
    pub r2: f64,
    pub points: usize,
    /// Residual sum of squares in `ln λ`.
    pub rss: f64,
    /// Covariance of `(ln c, q, T)`.
    pub covariance: [[f64; 3]; 3],
    pub exponent_se: f64,
    pub coefficient_se: f64,
    pub t_est_se: f64,
}

const SCAN_POINTS: usize = 400;

/// Residual of the linear fit of `y` against `ln(T − t)`; `(rss, ln c, q)`.
fn profile_rss(t: &[f64], y: &[f64], big_t: f64) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let x = (big_t - ti).ln();
        sx += x;
        sy += yi;
        sxx += x * x;
        sxy += x * yi;
    }
    let mx = sx / n;
    let my = sy / n;
    let vxx = sxx / n - mx * mx;
    let vxy = sxy / n - mx * my;
    let q = if vxx > 0.0 { vxy / vxx } else { 0.0 };
    let a = my - q * mx;
    let rss = t.iter().zip(y).map(|(&ti, &yi)| (yi - a - q * (big_t - ti).ln()).powi(2)).sum();
    (rss, a, q)
}

/// Joint fit of `(T, q, c)` to samples `(t_i, λ_i)` with increasing `t`.
pub fn fit_power_law(t: &[f64], lambda: &[f64]) -> Result<RateFit> {
    let n = t.len();
    if n != lambda.len() {
        return Err(Error::InvalidInput("time and scale series differ in length".into()));
    }
    if n < 4 {
        return Err(Error::InvalidInput(format!("rate fit needs at least 4 samples, got {n}")));
    }
    if lambda.iter().any(|l| !(*l > 0.0)) || t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("rate fit needs positive scales at increasing times".into()));
    }
    let y: Vec<f64> = lambda.iter().map(|l| l.ln()).collect();
    let t_last = t[n - 1];
    let span = t_last - t[0];
    // T = t_last + span·e^z
    let rss_z = |z: f64| profile_rss(t, &y, t_last + span * z.exp()).0;
    let (z_lo, z_hi) = ((1e-9f64).ln(), (1e3f64).ln());
    let dz = (z_hi - z_lo) / (SCAN_POINTS - 1) as f64;
    let mut best = 0;
    let mut best_rss = f64::INFINITY;
    for k in 0..SCAN_POINTS {
        let r = rss_z(z_lo + k as f64 * dz);
        if r < best_rss {
            best_rss = r;
            best = k;
        }
    }
    let (mut a, mut b) = (z_lo + best.saturating_sub(1) as f64 * dz, z_lo + (best + 1).min(SCAN_POINTS - 1) as f64 * dz);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (rss_z(c), rss_z(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = rss_z(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = rss_z(d);
        }
    }
    let z = 0.5 * (a + b);
    let mut big_t = t_last + span * z.exp();
    let (_, mut lc, mut q) = profile_rss(t, &y, big_t);

    // Gauss–Newton on (ln c, q, T)
    let jac = |lc: f64, q: f64, big_t: f64| -> (Vec<[f64; 3]>, Vec<f64>) {
        let rows = t.iter().map(|&ti| [1.0, (big_t - ti).ln(), q / (big_t - ti)]).collect();
        let res = t.iter().zip(&y).map(|(&ti, &yi)| yi - lc - q * (big_t - ti).ln()).collect();
        (rows, res)
    };
    let rss_of = |res: &[f64]| res.iter().map(|r| r * r).sum::<f64>();
    for _ in 0..20 {
        let (rows, res) = jac(lc, q, big_t);
        let cur = rss_of(&res);
        let (jtj, jtr) = normal_equations(&rows, &res);
        let Ok(step) = solve_dense(jtj, jtr) else { break };
        let mut damp = 1.0;
        let mut accepted = false;
        while damp > 1e-4 {
            let nt = big_t + damp * step[2];
            if nt > t_last {
                let (nl, nq) = (lc + damp * step[0], q + damp * step[1]);
                let (_, r2) = jac(nl, nq, nt);
                if rss_of(&r2) <= cur {
                    lc = nl;
                    q = nq;
                    big_t = nt;
                    accepted = true;
                    break;
                }
            }
            damp *= 0.5;
        }
        if !accepted || step.iter().zip([lc, q, big_t]).all(|(s, v)| s.abs() <= 1e-14 * (1.0 + v.abs())) {
            break;
        }
    }

    let (rows, res) = jac(lc, q, big_t);
    let rss = rss_of(&res);
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = if tss > 0.0 { (1.0 - rss / tss).clamp(0.0, 1.0) } else { 1.0 };
    let (jtj, _) = normal_equations(&rows, &res);
    let sigma2 = if n > 3 { rss / (n - 3) as f64 } else { 0.0 };
    let mut covariance = [[f64::NAN; 3]; 3];
    for (j, col) in covariance.iter_mut().enumerate() {
        let mut e = vec![0.0; 3];
        e[j] = 1.0;
        if let Ok(x) = solve_dense(jtj.clone(), e) {
            for (k, v) in x.into_iter().enumerate() {
                col[k] = sigma2 * v;
            }
        }
    }
    let coefficient = lc.exp();
    Ok(RateFit {
        exponent: q,
        coefficient,
        window: [t[0], t_last],
        t_est: big_t,
        r2,
        points: n,
        rss,
        covariance,
        exponent_se: covariance[1][1].max(0.0).sqrt(),
        coefficient_se: coefficient * covariance[0][0].max(0.0).sqrt(),
        t_est_se: covariance[2][2].max(0.0).sqrt(),
    })
}

fn normal_equations(rows: &[[f64; 3]], res: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut jtj = vec![vec![0.0; 3]; 3];
    let mut jtr = vec![0.0; 3];
    for (r, e) in rows.iter().zip(res) {
        for i in 0..3 {
            jtr[i] += r[i] * e;
            for j in 0..3 {
                jtj[i][j] += r[i] * r[j];
            }
        }
    }
    (jtj, jtr)
}

/// Fraction of a decade cut before the end of the run.
pub const WINDOW_TAIL_DECADES: f64 = 0.1;

/// Indices `[a, b)` of the last decade of `λ̃` ending a tenth of a decade
/// above the final value. Errors when the run covers less than that.
pub fn fit_window(snaps: &[Snapshot]) -> Result<(usize, usize)> {
    let n = snaps.len();
    if n < 4 {
        return Err(Error::InvalidInput(format!("{n} snapshots are too few for a rate fit")));
    }
    let last = snaps[n - 1].lambda;
    let lo = last * 10f64.powf(WINDOW_TAIL_DECADES);
    let hi = lo * 10.0;
    let first = snaps[0].lambda;
    if first < hi {
        return Err(Error::InvalidInput(format!(
            "the run covers {:.3} decades of lambda; the fit window needs {:.1}",
            (first / last).log10(),
            1.0 + WINDOW_TAIL_DECADES
        )));
    }
    let a = snaps.iter().rposition(|s| s.lambda >= hi).unwrap_or(0);
    let b = snaps.iter().rposition(|s| s.lambda >= lo).map_or(n, |i| i + 1);
    if b < a + 4 {
        return Err(Error::InvalidInput("fit window holds fewer than 4 snapshots".into()));
    }
    Ok((a, b))
}

/// Fit of the modulation scale `λ̃(t)` over [`fit_window`].
pub fn fit_blowup_rate(run: &BlowupRun) -> Result<RateFit> {
    let (a, b) = fit_window(&run.snapshots)?;
    let w = &run.snapshots[a..b];
    let t: Vec<f64> = w.iter().map(|s| s.t).collect();
    let l: Vec<f64> = w.iter().map(|s| s.lambda).collect();
    fit_power_law(&t, &l)
}

/// `1` at the threshold coupling and without perturbations, `2/(4 − α)`
/// otherwise.
pub fn rate_exponent(params: &ProblemParams) -> Result<f64> {
    if is_balanced(params) || params.branch == Branch::Critical {
        return Ok(1.0);
    }
    let alpha = params.require_alpha()?;
    Ok(2.0 / (4.0 - alpha))
}

/// `min ‖∇u‖₂·(T_est − t)^q` over the fit window, `q` from [`rate_exponent`].
pub fn lower_bound_check(run: &BlowupRun, fit: &RateFit, params: &ProblemParams) -> Result<f64> {
    lower_bound_with(&run.snapshots, fit, rate_exponent(params)?)
}

pub fn lower_bound_with(snaps: &[Snapshot], fit: &RateFit, q: f64) -> Result<f64> {
    let vals: Vec<f64> = snaps
        .iter()
        .filter(|s| s.t >= fit.window[0] && s.t <= fit.window[1])
        .map(|s| s.grad_norm * (fit.t_est - s.t).powf(q))
        .collect();
    if vals.is_empty() {
        return Err(Error::InvalidInput("no snapshots inside the fit window".into()));
    }
    Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
}
