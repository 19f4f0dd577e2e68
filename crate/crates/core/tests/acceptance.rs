//! Acceptance criteria AC1–AC10: one pass/fail line each, with the measured
//! value, its tolerance and the wall time against the budget.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use minmass_core::groundstate::{default_rmax, residual_floor, solve_ground_state};
use minmass_core::interp::resample;
use minmass_core::linops::{
    attach_rho, beta_closed_form, coercivity_report, identity_report, leading_source, solve_bordered,
};
use minmass_core::modulation::{decompose, phase_distance, project_orthogonal, reconstruct, DecomposeOptions, Guess};
use minmass_core::params::{make_params, ParamRequest};
use minmass_core::profile::{build_profile, rescale_to_physical, ProfileExpansion};
use minmass_core::reduced::{init_params, unbalanced_start};
use minmass_core::sim::{
    evolve, fit_blowup_rate, lower_bound_check, pseudo_conformal_reference, rate_exponent, simulate_blowup,
    simulate_from, BlowupRun, RateFit, Scheme, SimConfig, Stepper, StopReason,
};
use minmass_core::sim::{energy_positivity_check, Verdict};
use minmass_core::{Branch, ComplexField, Complex64, GroundState, ProblemParams, RadialGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIGMA: f64 = 0.2;
/// Cells of the default grid on `rmax = 32`: `h = 10⁻³`.
const DEFAULT_NODES: usize = 32_000;
/// `h = 2.5·10⁻⁴`; the operator identities and `β₀,₀` agree to `O(h²)`.
const OPERATOR_NODES: usize = 128_000;

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, &'static str, u64, fn() -> Outcome);

struct Line {
    id: &'static str,
    title: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

impl Line {
    fn print(&self) {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        println!(
            "{} {verdict} {}: {} [{:.1} s, budget {} s]",
            self.id,
            self.title,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        );
    }
}

fn criterion(id: &'static str, title: &'static str, budget_s: u64, f: impl FnOnce() -> Outcome) -> Line {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(budget_s);
    let (ok, detail) = match out {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    let line = Line { id, title, pass: ok && elapsed <= budget, detail, elapsed, budget };
    line.print();
    line
}

/// `value < tol`, rendered for the detail column.
fn below(name: &str, value: f64, tol: f64) -> (bool, String) {
    (value < tol, format!("{name} = {value:.3e} (< {tol:.0e})"))
}

fn all(parts: Vec<(bool, String)>) -> (bool, String) {
    let ok = parts.iter().all(|p| p.0);
    (ok, parts.into_iter().map(|p| p.1).collect::<Vec<_>>().join("; "))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Ground state for `(N, σ = 0.2, p = 1 + 4σ/N)` with `C₀ = k·ω`, branch (+,−).
fn ground(dim: usize, nodes: usize, rmax: f64, k: f64) -> Result<(GroundState, ProblemParams), String> {
    let p0 = make_params(ParamRequest::new(dim, SIGMA, 0.0, Branch::PlusMinus)).map_err(err)?;
    let grid = Arc::new(RadialGrid::uniform(dim, nodes, rmax).map_err(err)?);
    let tol = residual_floor(&grid).max(1e-9);
    let gs = solve_ground_state(&p0, grid, tol).map_err(err)?;
    let omega = gs.omega();
    let mut params = p0.with_c0(k * omega);
    params.omega = Some(omega);
    let gs = gs.with_params(&params).map_err(err)?;
    Ok((gs, params))
}

fn ac1() -> Outcome {
    let (gs, _) = ground(1, DEFAULT_NODES, default_rmax(1), 1.0)?;
    let q0 = 3f64.powf(0.25);
    let mass = 3f64.sqrt() * PI / 2.0;
    Ok(all(vec![
        below("|Q(0) - 3^(1/4)|/3^(1/4)", (gs.q0() - q0).abs() / q0, 1e-6),
        below("|‖Q‖² - √3π/2|/(√3π/2)", (gs.norms.mass - mass).abs() / mass, 1e-6),
        below("elliptic residual", gs.residual, 1e-9),
    ]))
}

fn ac2() -> Outcome {
    let mut parts = Vec::new();
    for dim in [1, 2] {
        let (mut gs, _) = ground(dim, OPERATOR_NODES, default_rmax(dim), 1.0)?;
        attach_rho(&mut gs).map_err(err)?;
        let r = identity_report(&gs).map_err(err)?;
        parts.push(below(&format!("N={dim} ‖L₋Q‖/‖Q‖"), r.lminus_q, 1e-6));
        parts.push(below(&format!("N={dim} ‖L₊ΛQ+2Q‖/‖Q‖"), r.lplus_lambda_q, 1e-6));
        parts.push(below(&format!("N={dim} ‖L₋(|y|²Q)+4ΛQ‖/‖ΛQ‖"), r.lminus_y2q, 1e-6));
        parts.push(below(&format!("N={dim} ‖L₊ρ-|y|²Q‖/‖|y|²Q‖"), r.lplus_rho, 1e-6));
    }
    Ok(all(parts))
}

fn ac3() -> Outcome {
    let (gs, params) = ground(1, OPERATOR_NODES, default_rmax(1), 1.0)?;
    let omega = params.omega.ok_or("omega unset")?;
    let mut parts = Vec::new();
    for k in [0.5, 1.0, 2.0] {
        let (c1, c2) = Branch::PlusMinus.couplings(k * omega);
        let bordered = solve_bordered(&gs, &leading_source(&gs, c1, c2).map_err(err)?).map_err(err)?.beta;
        let closed = beta_closed_form(&gs, c1, c2);
        parts.push(below(&format!("C₀={k}ω |β_bordered - β_closed|"), (bordered - closed).abs(), 1e-6));
        if k == 1.0 {
            parts.push(below("|β₀,₀(ω)|", bordered.abs(), 1e-6));
        }
        if k == 2.0 {
            parts.push((bordered > 0.0, format!("β₀,₀(2ω) = {bordered:.6} (> 0)")));
        }
    }
    Ok(all(parts))
}

fn ac4() -> Outcome {
    let (mut gs, _) = ground(1, DEFAULT_NODES, default_rmax(1), 1.0)?;
    attach_rho(&mut gs).map_err(err)?;
    let r = coercivity_report(&gs, gs.rho().map_err(err)?).map_err(err)?;
    Ok(all(vec![
        (r.constrained_min > 0.0, format!("constrained minimum = {:.4e} (> 0)", r.constrained_min)),
        (r.lplus_unconstrained_min < 0.0, format!("unconstrained L₊ minimum = {:.4} (< 0)", r.lplus_unconstrained_min)),
    ]))
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn ac5() -> Outcome {
    let mut parts = Vec::new();
    for k in [1.0, 2.0] {
        let (gs, params) = ground(1, DEFAULT_NODES, default_rmax(1), k)?;
        for order in [0, 1] {
            let exp = build_profile(&gs, &params, order).map_err(err)?;
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for m in 1..=6 {
                let lam = 0.2 * 0.5f64.powi(m);
                let b = 0.5 * lam.powf(exp.alpha / 2.0);
                xs.push(b * b + lam.powf(exp.alpha));
                ys.push(exp.residual_psi_modulated(lam, b).1);
            }
            let slope = loglog_slope(&xs, &ys);
            let target = order as f64 + 2.0 - 0.1;
            parts.push((slope >= target, format!("C₀={k}ω J={order} slope {slope:.3} (≥ {target:.1})")));
        }
    }
    Ok(all(parts))
}

fn ac6() -> Outcome {
    let params = make_params(ParamRequest::new(1, SIGMA, 0.0, Branch::Critical)).map_err(err)?;
    let (source, _) = ground(1, DEFAULT_NODES, default_rmax(1), 0.0)?;
    let (h, rmax, dt): (f64, f64, f64) = (0.01, 25.0, 1e-3);
    let mut runs = Vec::new();
    for m in [1usize, 2, 4] {
        let grid = Arc::new(RadialGrid::with_spacing(1, h / m as f64, rmax).map_err(err)?);
        let stepper = Stepper::new(&params, grid.clone()).map_err(err)?;
        let s0 = pseudo_conformal_reference(-1.0, grid.clone(), &source).map_err(err)?;
        let steps = (0.5 / dt).round() as usize * m;
        let (u, _, _) = evolve(&stepper, &s0, 0.5, steps, Scheme::Conservative).map_err(err)?;
        runs.push(u);
    }
    let coarse = runs[0].grid().clone();
    let on_coarse = |u: &ComplexField| -> Result<ComplexField, String> {
        ComplexField::new(coarse.clone(), resample(u.grid(), u.values(), &coarse)).map_err(err)
    };
    let (u1, u2, u4) = (runs[0].clone(), on_coarse(&runs[1])?, on_coarse(&runs[2])?);
    let d12 = u1.sub(&u2).norm_l2();
    let d24 = u2.sub(&u4).norm_l2();
    let order = (d12 / d24).log2();
    let exact = pseudo_conformal_reference(-0.5, coarse, &source).map_err(err)?;
    let error = u1.sub(&exact).norm_l2();
    Ok(all(vec![
        ((order - 2.0).abs() < 0.2, format!("self-convergence order {order:.3} (2 ± 0.2)")),
        below("‖u - S(-0.5)‖₂ at h = 0.01, dt = 1e-3", error, 1e-3),
    ]))
}

fn ac10() -> Outcome {
    let (gs, params) = ground(1, DEFAULT_NODES, default_rmax(1), 2.0)?;
    let exp = build_profile(&gs, &params, 1).map_err(err)?;
    let opts = DecomposeOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(20_260_101);
    let (mut round_trip, mut guess_gap, mut gauge_gap, mut orth) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let l0 = rng.random_range(0.05..0.2);
        let b0 = rng.random_range(-0.05..0.05);
        let g0 = rng.random_range(0.0..2.0 * PI);
        let phi = rng.random_range(0.0..2.0 * PI);
        let e = project_orthogonal(&smooth_random(exp.grid(), &mut rng), &exp, l0, b0);
        let e = e.scaled(rng.random_range(0.005..0.05) / e.norm_h1());
        let target = Arc::new(exp.grid().scaled(l0).map_err(err)?);
        let (p, _) = exp.eval_profile(l0, b0);
        let u = rescale_to_physical(&p.add(&e), l0, b0, g0, target.clone()).map_err(err)?;
        // admissible guesses: the tube test at the guess has δ = 0.3
        let g1 = Guess { lambda: l0 * rng.random_range(0.98..1.02), b: 0.0, gamma: g0 + rng.random_range(-0.05..0.05) };
        let g2 = Guess { lambda: l0 * rng.random_range(0.98..1.02), b: b0, gamma: g0 + rng.random_range(-0.05..0.05) };
        let st = decompose(&u, &exp, &g1, &opts).map_err(err)?;
        let st2 = decompose(&u, &exp, &g2, &opts).map_err(err)?;
        // both directions of the round trip
        let back = reconstruct(&st, &exp, target).map_err(err)?;
        round_trip = round_trip
            .max((st.lambda - l0).abs() / l0)
            .max((st.b - b0).abs())
            .max(phase_distance(st.gamma, g0))
            .max(st.eps.sub(&e).norm_h1())
            .max(back.sub(&u).norm_h1() / u.norm_h1());
        guess_gap = guess_gap
            .max((st.lambda - st2.lambda).abs() / l0)
            .max((st.b - st2.b).abs())
            .max(phase_distance(st.gamma, st2.gamma))
            .max(st.eps.sub(&st2.eps).norm_h1());
        let rotated = u.map(|z| z * Complex64::from_polar(1.0, phi));
        let st3 = decompose(&rotated, &exp, &Guess { gamma: g1.gamma + phi, ..g1 }, &opts).map_err(err)?;
        gauge_gap = gauge_gap
            .max((st3.lambda - st.lambda).abs() / l0)
            .max((st3.b - st.b).abs())
            .max(phase_distance(st3.gamma, st.gamma + phi))
            .max(st3.eps.sub(&st.eps).norm_h1());
        orth = orth.max(st.orthogonality.iter().fold(0.0f64, |m, c| m.max(c.abs())));
    }
    Ok(all(vec![
        below("round trip", round_trip, 1e-8),
        below("guess dependence", guess_gap, 1e-8),
        below("gauge incoherence", gauge_gap, 1e-8),
        below("orthogonality residual", orth, 1e-8),
    ]))
}

fn smooth_random(grid: &Arc<RadialGrid>, rng: &mut ChaCha8Rng) -> ComplexField {
    let a: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.3..1.5), rng.random_range(0.0..3.0)))
        .collect();
    ComplexField::from_fn(grid.clone(), |r| {
        a.iter().map(|&(x, y, k, c)| Complex64::new(x, y) * (-(k * (r - c)).powi(2)).exp() / (1.0 + r * r)).sum()
    })
    .expect("finite field")
}

struct Balanced {
    gs: GroundState,
    exp: ProfileExpansion,
    config: SimConfig,
    run: BlowupRun,
    fit: Result<RateFit, String>,
}

/// `λ₁` of the balanced run: `s₁ = sqrt(‖yQ‖²/(8E₀))/λ₁`.
const BALANCED_LAMBDA1: f64 = 0.1;
/// `λ₁` of the unbalanced run; the power-law regime needs `b₁` small.
const UNBALANCED_LAMBDA1: f64 = 0.03;
const E0: f64 = 1.0;

fn balanced_run() -> Result<Balanced, String> {
    let (gs, params) = ground(1, DEFAULT_NODES, default_rmax(1), 1.0)?;
    let exp = build_profile(&gs, &params, 1).map_err(err)?;
    let config = SimConfig::new(params);
    let k = (gs.norms.virial / (8.0 * E0)).sqrt();
    let run = simulate_blowup(&config, &exp, &gs, E0, k / BALANCED_LAMBDA1, &mut |_| true).map_err(err)?;
    let fit = fit_blowup_rate(&run).map_err(err);
    Ok(Balanced { gs, exp, config, run, fit })
}

fn ac7(b: &Balanced) -> Outcome {
    let fit = b.fit.as_ref()?;
    let expected = (8.0 * E0 / b.gs.norms.virial).sqrt();
    let max_eps = b.run.snapshots.iter().map(|s| s.eps_hat_h1).fold(0.0, f64::max);
    let coeff_err = (fit.coefficient / expected - 1.0).abs();
    Ok(all(vec![
        (b.run.stop == StopReason::Floor, format!("stop {:?} after {} steps", b.run.stop, b.run.steps)),
        ((fit.exponent - 1.0).abs() <= 0.05, format!("exponent {:.4} (1 ± 0.05)", fit.exponent)),
        (
            coeff_err <= 0.1,
            format!("coefficient {:.4} vs sqrt(8E₀/‖yQ‖²) = {expected:.4}: {:.2}% (≤ 10%)", fit.coefficient, 100.0 * coeff_err),
        ),
        (max_eps <= 0.1, format!("max ‖ε̂‖_H¹ = {max_eps:.3e} (≤ 0.1)")),
        below("mass drift", b.run.solver_mass_drift().max(b.run.total_mass_change().abs()), 1e-6),
        below("energy drift", b.run.solver_energy_drift(), 1e-6),
    ]))
}

fn ac8() -> Outcome {
    let (gs, params) = ground(1, DEFAULT_NODES, default_rmax(1), 2.0)?;
    let exp = build_profile(&gs, &params, 1).map_err(err)?;
    let beta = exp.beta(0, 0).ok_or("no beta_00")?;
    let alpha = params.require_alpha().map_err(err)?;
    let (s1, b1) = unbalanced_start(beta, alpha, UNBALANCED_LAMBDA1).map_err(err)?;
    let run = simulate_from(&SimConfig::new(params), &exp, &gs, UNBALANCED_LAMBDA1, b1, s1, &mut |_| true).map_err(err)?;
    let fit = fit_blowup_rate(&run).map_err(err)?;
    let q = 2.0 / (4.0 - alpha);
    Ok(all(vec![
        (run.stop == StopReason::Floor, format!("stop {:?} after {} steps", run.stop, run.steps)),
        ((fit.exponent - q).abs() <= 0.05, format!("exponent {:.4} (2/(4-α) = {q:.4} ± 0.05)", fit.exponent)),
    ]))
}

fn ac9(b: &Balanced) -> Outcome {
    let fit = b.fit.as_ref()?;
    let q = rate_exponent(&b.run.config.params).map_err(err)?;
    let inf = lower_bound_check(&b.run, fit, &b.run.config.params).map_err(err)?;
    let mut parts = vec![(inf > 0.0, format!("inf ‖∇u‖₂·|T_est-t|^{q} = {inf:.4} (> 0)"))];
    let k = (b.gs.norms.virial / (8.0 * E0)).sqrt();
    let base = b.config.base_grid().map_err(err)?;
    let mut worst = f64::INFINITY;
    let mut verdicts = vec![b.run.positivity.verdict];
    for lambda1 in [0.2, 0.1, 0.05, 0.025] {
        let (l1, b1) = init_params(&b.exp, &b.gs, E0, k / lambda1).map_err(err)?;
        let (p, _) = b.exp.eval_profile(l1, b1);
        let grid = Arc::new(base.scaled(l1).map_err(err)?);
        let u0 = rescale_to_physical(&p, l1, b1, 0.0, grid).map_err(err)?;
        let rep = energy_positivity_check(&u0, &b.run.config.params).map_err(err)?;
        worst = worst.min(rep.energy);
        verdicts.push(rep.verdict);
    }
    let positive = verdicts.iter().all(|v| *v == Verdict::Pass);
    parts.push((positive, format!("E(u₀) > 0 for {} balanced data (min E = {worst:.4})", verdicts.len())));
    Ok(all(parts))
}

/// Criteria named on the command line (`AC5 AC10`), or all of them.
fn selected() -> impl Fn(&str) -> bool {
    let ids: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC")).collect();
    move |id| ids.is_empty() || ids.iter().any(|a| a == id)
}

fn main() -> ExitCode {
    let want = selected();
    println!("acceptance: N=1 σ={SIGMA} unless stated; default grid h = 1e-3 on rmax = 32");
    let quick: [Criterion; 7] = [
        ("AC1", "ground-state exactness", 5, ac1),
        ("AC2", "operator identities", 10, ac2),
        ("AC3", "threshold coefficient", 10, ac3),
        ("AC4", "discrete coercivity", 30, ac4),
        ("AC5", "profile residual scaling", 60, ac5),
        ("AC6", "solver validation", 120, ac6),
        ("AC10", "modulation round trip", 120, ac10),
    ];
    let mut lines: Vec<Line> =
        quick.into_iter().filter(|c| want(c.0)).map(|(id, title, budget, f)| criterion(id, title, budget, f)).collect();
    let mut balanced = None;
    if want("AC7") || want("AC9") {
        lines.push(criterion("AC7", "balanced blow-up rate", 600, || {
            let b = balanced_run()?;
            let out = ac7(&b);
            balanced = Some(b);
            out
        }));
    }
    if want("AC8") {
        lines.push(criterion("AC8", "unbalanced blow-up rate", 600, ac8));
    }
    if want("AC9") {
        // amortized in the AC7 run
        lines.push(criterion("AC9", "lower bound and positivity", 60, || match &balanced {
            Some(b) => ac9(b),
            None => Err("the AC7 run did not complete".into()),
        }));
    }
    lines.sort_by_key(|l| l.id[2..].parse::<u32>().unwrap_or(0));
    println!("summary:");
    for l in &lines {
        println!("  {} {}", l.id, if l.pass { "PASS" } else { "FAIL" });
    }
    let failed = lines.iter().filter(|l| !l.pass).count();
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
