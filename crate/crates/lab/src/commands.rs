//! One function per subcommand; each writes its artifacts into a run
//! directory and returns a short JSON summary for stdout.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use minmass_core::groundstate::pohozaev_residuals;
use minmass_core::linops::{
    attach_rho, beta_closed_form, coercivity_report, identity_report, leading_source, solve_bordered,
};
use minmass_core::modulation::{decompose, phase_distance, DecomposeOptions, Guess};
use minmass_core::profile::{build_profile, rescale_to_physical};
use minmass_core::reduced::{app_solutions, geometric_points, integrate_reduced, unbalanced_solutions};
use minmass_core::Branch;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Resolved, Settings};
use crate::output::{fmt_f64, latest, RunDir, Table};
use crate::pipeline::{self, initial_data, regime, setup, Regime};

/// Points of the `β(C₀)` sweep over `[ω/2, 2ω]`.
const BETA_SWEEP: [f64; 5] = [0.5, 0.875, 1.25, 1.625, 2.0];
/// Dyadic levels of the `Ψ` scaling sweep.
const PSI_LEVELS: usize = 6;
/// Rescaled-time span of the reduced trajectory, as a multiple of `s₁`.
const REDUCED_SPAN: f64 = 1e3;
const REDUCED_POINTS: usize = 401;
const ROUND_TRIPS: usize = 8;

/// Least-squares slope of `ln y` against `ln x`.
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

pub fn ground(cfg: &Resolved, dir: &mut RunDir) -> Result<Value> {
    let su = setup(cfg)?;
    let gs = &su.gs;
    let (poh1, poh2) = pohozaev_residuals(gs);
    let mut report = json!({
        "Q0": gs.q0(),
        "norms": gs.norms,
        "omega": su.omega,
        "residuals": { "elliptic": gs.residual, "pohozaev_energy": poh1, "pohozaev_virial": poh2 },
        "grid": { "N": cfg.n, "nodes": cfg.grid_n, "rmax": cfg.rmax },
        "params": su.params,
    });
    if cfg.n == 1 {
        // Q(r) = 3^{1/4} sech^{1/2}(2r)
        let (q0, mass) = (3f64.powf(0.25), 3f64.sqrt() * PI / 2.0);
        report["analytic"] = json!({
            "Q0": q0,
            "mass": mass,
            "Q0_rel_error": (gs.q0() - q0).abs() / q0,
            "mass_rel_error": (gs.norms.mass - mass).abs() / mass,
        });
    }
    dir.write_json("ground.json", &report)?;
    let mut t = Table::new(&["r", "Q"]);
    for (r, q) in gs.grid().nodes().iter().zip(gs.q.values()) {
        t.push_f64(&[*r, *q]);
    }
    dir.write_table("q.csv", &t)?;
    Ok(json!({ "Q0": gs.q0(), "omega": su.omega, "residual": gs.residual }))
}

pub fn linops(cfg: &Resolved, dir: &mut RunDir) -> Result<Value> {
    let mut su = setup(cfg)?;
    attach_rho(&mut su.gs)?;
    let ids = identity_report(&su.gs)?;
    let coer = coercivity_report(&su.gs, su.gs.rho()?)?;
    let mut t = Table::new(&["C0_over_omega", "C0", "beta_bordered", "beta_closed_form", "abs_diff"]);
    let branch = if su.params.branch == Branch::Critical { Branch::PlusMinus } else { su.params.branch };
    let mut worst = 0.0f64;
    for k in BETA_SWEEP {
        let (c1, c2) = branch.couplings(k * su.omega);
        let sol = solve_bordered(&su.gs, &leading_source(&su.gs, c1, c2)?)?;
        let closed = beta_closed_form(&su.gs, c1, c2);
        worst = worst.max((sol.beta - closed).abs());
        t.push_f64(&[k, k * su.omega, sol.beta, closed, (sol.beta - closed).abs()]);
    }
    dir.write_json("identities.json", &json!({ "identities": ids, "coercivity": coer, "omega": su.omega }))?;
    dir.write_table("beta_sweep.csv", &t)?;
    Ok(json!({ "identities": ids, "constrained_min": coer.constrained_min, "beta_max_abs_diff": worst }))
}

pub fn profile(cfg: &Resolved, dir: &mut RunDir) -> Result<Value> {
    let su = setup(cfg)?;
    let exp = build_profile(&su.gs, &su.params, cfg.order)?;
    let mut header = vec!["r".to_string(), "Q".into(), "rho".into()];
    for e in &exp.entries {
        header.push(format!("P{}{}_plus", e.j, e.k));
        header.push(format!("P{}{}_minus", e.j, e.k));
    }
    let mut fields = Table::new(&header);
    for (i, r) in exp.grid().nodes().iter().enumerate() {
        let mut row = vec![*r, exp.q().values()[i], exp.rho().values()[i]];
        for e in &exp.entries {
            row.push(e.plus.values()[i]);
            row.push(e.minus.values()[i]);
        }
        fields.push_f64(&row);
    }
    let mut sweep = Table::new(&["lambda", "b", "b2_plus_lambda_alpha", "psi_weighted_h1"]);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for m in 1..=PSI_LEVELS {
        let lam = 0.2 * 0.5f64.powi(m as i32);
        let b = 0.5 * lam.powf(exp.alpha / 2.0);
        let x = b * b + lam.powf(exp.alpha);
        let y = exp.residual_psi_modulated(lam, b).1;
        xs.push(x);
        ys.push(y);
        sweep.push_f64(&[lam, b, x, y]);
    }
    let slope = loglog_slope(&xs, &ys);
    let report = json!({
        "order": exp.order,
        "alpha": exp.alpha,
        "beta": exp.beta_table(),
        "collection_residual": exp.collection_residual,
        "eps_prime": exp.eps_prime(),
        "psi_slope": slope,
        "psi_slope_target": exp.order as f64 + 2.0,
    });
    dir.write_json("beta.json", &report)?;
    dir.write_table("profile_fields.csv", &fields)?;
    dir.write_table("psi_scaling.csv", &sweep)?;
    Ok(json!({ "beta00": exp.beta(0, 0), "psi_slope": slope }))
}

pub fn reduced(cfg: &Resolved, dir: &mut RunDir) -> Result<Value> {
    let su = setup(cfg)?;
    let exp = build_profile(&su.gs, &su.params, cfg.order)?;
    let reg = regime(&su.params, &exp);
    let (s1, l1, b1) = initial_data(cfg, &su, &exp, reg)?;
    let traj = integrate_reduced(&exp, &geometric_points(s1, REDUCED_SPAN * s1, REDUCED_POINTS), l1, b1)?;
    let app = |s: f64| -> Result<(f64, f64)> {
        match (reg, exp.beta(0, 0), su.params.alpha) {
            (Regime::Unbalanced, Some(beta), Some(alpha)) => Ok(unbalanced_solutions(beta, alpha, s)?),
            _ => Ok(app_solutions(&su.gs, cfg.e0, s)?),
        }
    };
    let mut t = Table::new(&["s", "t", "lambda", "b", "lambda_app", "b_app", "lambda_ratio", "b_ratio"]);
    for i in 0..traj.len() {
        let (la, ba) = app(traj.s[i])?;
        t.push_f64(&[traj.s[i], traj.t[i], traj.lambda[i], traj.b[i], la, ba, traj.lambda[i] / la, traj.b[i] / ba]);
    }
    let summary = json!({
        "regime": reg,
        "s1": s1,
        "lambda1": l1,
        "b1": b1,
        "points": traj.len(),
        "truncated": traj.truncated,
        "max_error": traj.max_error,
        "approximation": if reg == Regime::Unbalanced { "power law" } else { "threshold law" },
    });
    dir.write_json("reduced.json", &summary)?;
    dir.write_table("trajectory.csv", &t)?;
    Ok(summary)
}

const SNAPSHOT_HEADER: [&str; 26] = [
    "step",
    "t",
    "s",
    "lambda_hat",
    "lambda",
    "b",
    "gamma",
    "eps_h1",
    "eps_hat_h1",
    "eps_virial",
    "eps_p",
    "mod_lambda",
    "mod_b",
    "mod_gamma",
    "mod_norm",
    "mod_bound",
    "lyapunov_bracket",
    "lyapunov",
    "energy_ratio",
    "grad_norm",
    "mass",
    "energy",
    "scale",
    "decompose_iterations",
    "regime",
    "branch",
];

pub fn simulate(cfg: &Resolved, dir: &mut RunDir) -> Result<Value> {
    let out = pipeline::simulate(cfg)?;
    let run = &out.run;
    let regime = serde_json::to_value(out.regime)?.as_str().unwrap_or_default().to_string();
    let branch = serde_json::to_value(cfg.branch)?.as_str().unwrap_or_default().to_string();
    let mut snaps = Table::new(&SNAPSHOT_HEADER);
    for s in &run.snapshots {
        let mut row = vec![s.step.to_string()];
        row.extend(
            [
                s.t,
                s.s,
                s.lambda_hat,
                s.lambda,
                s.b,
                s.gamma,
                s.eps_h1,
                s.eps_hat_h1,
                s.eps_virial,
                s.eps_p,
                s.modulation[0],
                s.modulation[1],
                s.modulation[2],
                s.mod_norm,
                s.mod_bound,
                s.lyapunov_bracket,
                s.lyapunov,
                s.energy_ratio,
                s.grad_norm,
                s.mass,
                s.energy,
                s.scale,
            ]
            .map(fmt_f64),
        );
        row.push(s.decompose_iterations.to_string());
        row.push(regime.clone());
        row.push(branch.clone());
        snaps.push(row);
    }
    dir.write_table("snapshots.csv", &snaps)?;

    let (fit, fit_error) = match &out.fit {
        Ok(f) => (Some(*f), None),
        Err(e) => (None, Some(e.clone())),
    };
    let ratefit = json!({
        "fit": fit,
        "error": fit_error,
        "expected_exponent": out.expected.map(|e| e.0),
        "expected_coefficient": out.expected.map(|e| e.1),
        "exponent_deviation": fit.zip(out.expected).map(|(f, e)| f.exponent - e.0),
        "coefficient_ratio": fit.zip(out.expected).map(|(f, e)| f.coefficient / e.1),
    });
    dir.write_json("ratefit.json", &ratefit)?;

    let mut cons = Table::new(&[
        "kind",
        "t_start",
        "t_end",
        "scale_from",
        "scale_to",
        "steps",
        "mass_start",
        "mass_end",
        "energy_start",
        "energy_end",
        "max_mass_drift",
        "max_energy_drift",
    ]);
    let mut events: Vec<(f64, Vec<String>)> = Vec::new();
    for g in &run.segments {
        let mut row = vec!["segment".to_string()];
        row.extend([g.t_start, g.t_end, g.scale, g.scale].map(fmt_f64));
        row.push(g.steps.to_string());
        row.extend(
            [g.mass_start, g.mass_end, g.energy_start, g.energy_end, g.max_mass_drift, g.max_energy_drift].map(fmt_f64),
        );
        events.push((g.t_start, row));
    }
    for r in &run.regrids {
        let mut row = vec!["regrid".to_string()];
        row.extend([r.t, r.t, r.from_scale, r.to_scale].map(fmt_f64));
        row.push("0".into());
        row.extend(
            [
                r.mass_before,
                r.mass_after,
                r.energy_before,
                r.energy_after,
                r.mass_change().abs(),
                r.energy_change().abs(),
            ]
            .map(fmt_f64),
        );
        events.push((r.t, row));
    }
    // a regrid closes the segment that ends at the same instant
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1[0].cmp(&a.1[0])));
    for (_, row) in events {
        cons.push(row);
    }
    dir.write_table("conservation.csv", &cons)?;

    let verdicts = json!({
        "regime": out.regime,
        "omega": out.omega,
        "alpha": out.alpha,
        "beta00": out.beta00,
        "s1": out.s1,
        "lambda1": run.lambda1,
        "b1": run.b1,
        "stop": run.stop,
        "stop_detail": run.stop_detail,
        "steps": run.steps,
        "t_final": run.t_final,
        "energy_positivity": run.positivity,
        "lower_bound": out.lower_bound,
        "max_eps_hat_h1": out.max_eps_hat_h1,
        "solver_mass_drift": run.solver_mass_drift(),
        "solver_energy_drift": run.solver_energy_drift(),
        "max_regrid_mass_change": run.max_regrid_mass_change(),
        "total_mass_change": run.total_mass_change(),
        "boundedness_diagnostic": out.boundedness,
    });
    dir.write_json("verdicts.json", &verdicts)?;
    Ok(json!({
        "regime": out.regime,
        "stop": run.stop,
        "exponent": fit.map(|f| f.exponent),
        "coefficient": fit.map(|f| f.coefficient),
        "expected_exponent": out.expected.map(|e| e.0),
        "fit_error": fit_error,
    }))
}

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    value: f64,
    tolerance: f64,
    /// `below`: pass when `value < tolerance`; `above`: pass when `value > tolerance`.
    sense: &'static str,
    pass: bool,
}

fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
    Check { name: name.into(), value, tolerance, sense: "below", pass: value < tolerance }
}

fn above(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
    Check { name: name.into(), value, tolerance, sense: "above", pass: value > tolerance }
}

#[derive(Deserialize)]
struct StoredManifest {
    config: Settings,
}

/// Settings of the latest `ground` run under `out`.
pub fn ground_settings(out: &Path) -> Result<(std::path::PathBuf, Settings)> {
    let dir = latest(out, "ground")
        .ok_or_else(|| anyhow!("missing ground state: no `ground` run under {}", out.display()))?;
    let text = std::fs::read_to_string(dir.join("manifest.json"))
        .with_context(|| format!("missing ground state: unreadable manifest in {}", dir.display()))?;
    let m: StoredManifest = serde_json::from_str(&text).context("malformed ground manifest")?;
    Ok((dir, m.config))
}

/// Grid size of the operator identity and `β₀,₀` checks.
pub const OPERATOR_GRID_N: usize = 128_000;

pub fn validate(cfg: &Resolved, ground_dir: &Path, dir: &mut RunDir) -> Result<Value> {
    let mut checks = Vec::new();
    let mut su = setup(cfg)?;
    let gs = &su.gs;

    let mut rdr = csv::Reader::from_path(ground_dir.join("q.csv")).context("missing ground state: no q.csv")?;
    let mut stored = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        stored.push(rec.get(1).context("q.csv has no Q column")?.parse::<f64>()?);
    }
    let repro = if stored.len() == gs.q.len() {
        stored.iter().zip(gs.q.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    checks.push(Check { name: "stored_Q_reproduced".into(), value: repro, tolerance: 0.0, sense: "equal", pass: repro == 0.0 });
    checks.push(below("elliptic_residual", gs.residual, 1e-9));
    if cfg.n == 1 {
        let (q0, mass) = (3f64.powf(0.25), 3f64.sqrt() * PI / 2.0);
        checks.push(below("Q0_vs_analytic", (gs.q0() - q0).abs() / q0, 1e-6));
        checks.push(below("mass_vs_analytic", (gs.norms.mass - mass).abs() / mass, 1e-6));
    }

    attach_rho(&mut su.gs)?;
    let gs = &su.gs;
    let coer = coercivity_report(gs, gs.rho()?)?;
    checks.push(above("constrained_form_min", coer.constrained_min, 0.0));
    checks.push(below("unconstrained_L+_min", coer.lplus_unconstrained_min, 0.0));

    // identities and β agree to O(h²); 10⁻⁶ needs the finer grid
    let fine_cfg = Resolved { grid_n: cfg.grid_n.max(OPERATOR_GRID_N), ..cfg.clone() };
    let mut fine = setup(&fine_cfg)?;
    attach_rho(&mut fine.gs)?;
    let gs = &fine.gs;
    let ids = identity_report(gs)?;
    checks.push(below("L-Q", ids.lminus_q, 1e-6));
    checks.push(below("L+LambdaQ+2Q", ids.lplus_lambda_q, 1e-6));
    checks.push(below("L-(y2Q)+4LambdaQ", ids.lminus_y2q, 1e-6));
    checks.push(below("L+rho-y2Q", ids.lplus_rho, 1e-6));
    if fine.params.branch != Branch::Critical {
        for k in [0.5, 1.0, 2.0] {
            let (c1, c2) = fine.params.branch.couplings(k * fine.omega);
            let beta = solve_bordered(gs, &leading_source(gs, c1, c2)?)?.beta;
            checks.push(below(format!("beta00_bordered_vs_closed@{k}omega"), (beta - beta_closed_form(gs, c1, c2)).abs(), 1e-6));
            if k == 1.0 {
                checks.push(below("beta00_at_threshold", beta.abs(), 1e-6));
            }
        }
    }

    let exp = build_profile(&su.gs, &su.params, cfg.order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = 0.0f64;
    for _ in 0..ROUND_TRIPS {
        let (l0, b0, g0) = (rng.random_range(0.05..0.2), rng.random_range(0.0..0.05), rng.random_range(0.0..2.0 * PI));
        let target = std::sync::Arc::new(exp.grid().scaled(l0)?);
        let (p, _) = exp.eval_profile(l0, b0);
        let u = rescale_to_physical(&p, l0, b0, g0, target)?;
        let guess = Guess { lambda: l0 * 1.02, b: 0.0, gamma: g0 + 0.05 };
        let st = decompose(&u, &exp, &guess, &DecomposeOptions::default())?;
        worst = worst
            .max((st.lambda - l0).abs() / l0)
            .max((st.b - b0).abs())
            .max(phase_distance(st.gamma, g0))
            .max(st.eps.norm_h1());
    }
    checks.push(below("modulation_round_trip", worst, 1e-8));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    let report = json!({
        "ground_run": ground_dir.display().to_string(),
        "operator_grid_n": fine_cfg.grid_n,
        "checks": checks,
        "failed": failed,
    });
    dir.write_json("validate.json", &report)?;
    if !failed.is_empty() {
        return Err(anyhow!("validation failed: {}", failed.join(", ")));
    }
    Ok(json!({ "checks": checks.len(), "failed": 0 }))
}
