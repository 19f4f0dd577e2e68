//! Setup shared by the subcommands: parameters, ground state, profile and
//! the choice of initial data.

use std::sync::Arc;

use anyhow::{anyhow, Result};
use minmass_core::groundstate::{residual_floor, solve_ground_state};
use minmass_core::params::{make_params, ParamRequest};
use minmass_core::profile::{build_profile, ProfileExpansion};
use minmass_core::reduced::{app_solutions, init_params, unbalanced_solutions, unbalanced_start};
use minmass_core::sim::{
    fit_blowup_rate, is_balanced, lower_bound_check, rate_exponent, simulate_blowup, simulate_from, BlowupRun,
    Floor, RateFit, SimConfig,
};
use minmass_core::{Branch, GroundState, ProblemParams, RadialGrid};
use serde::Serialize;

use crate::config::Resolved;

/// Relative residual target of the ground-state solve.
pub const GROUND_TOL: f64 = 1e-9;

/// [`GROUND_TOL`], raised to the rounding floor on fine grids.
pub fn ground_tol(grid: &RadialGrid) -> f64 {
    GROUND_TOL.max(residual_floor(grid))
}

/// Longest run of the boundedness diagnostic, in steps.
pub const DIAGNOSTIC_STEPS: usize = 20_000;

pub struct Setup {
    pub params: ProblemParams,
    pub gs: GroundState,
    pub omega: f64,
}

pub fn setup(cfg: &Resolved) -> Result<Setup> {
    let mut req = ParamRequest::new(cfg.n, cfg.sigma, 0.0, cfg.branch.core());
    req.p = Some(cfg.p);
    req.e0 = cfg.e0;
    let p0 = make_params(req)?;
    let grid = Arc::new(RadialGrid::uniform(cfg.n, cfg.grid_n, cfg.rmax)?);
    let tol = ground_tol(&grid);
    let gs = solve_ground_state(&p0, grid, tol)?;
    let omega = gs.omega();
    req.c0 = cfg.c0.resolve(omega);
    let mut params = make_params(req)?;
    params.omega = Some(omega);
    let gs = gs.with_params(&params)?;
    Ok(Setup { params, gs, omega })
}

/// How the blow-up datum is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `C₀ = ω` or no perturbation: the `|t|` law with prescribed energy.
    Threshold,
    /// `β₀,₀ > 0`: the `(T − t)^{2/(4−α)}` law.
    Unbalanced,
    /// `β₀,₀ ≤ 0`: no blow-up datum; only the boundedness diagnostic runs.
    Bounded,
}

pub fn regime(params: &ProblemParams, expansion: &ProfileExpansion) -> Regime {
    if params.branch == Branch::Critical || is_balanced(params) {
        Regime::Threshold
    } else if expansion.beta(0, 0).is_some_and(|b| b > 0.0) {
        Regime::Unbalanced
    } else {
        Regime::Bounded
    }
}

/// `sqrt(‖yQ‖²/(8E₀))`: the threshold law is `λ = k/s`.
pub fn threshold_k(gs: &GroundState, e0: f64) -> f64 {
    (gs.norms.virial / (8.0 * e0)).sqrt()
}

/// Initial `(s₁, λ₁, b₁)` for `regime`.
pub fn initial_data(
    cfg: &Resolved,
    setup: &Setup,
    expansion: &ProfileExpansion,
    regime: Regime,
) -> Result<(f64, f64, f64)> {
    let gs = &setup.gs;
    match regime {
        Regime::Unbalanced => {
            let beta = expansion.beta(0, 0).ok_or_else(|| anyhow!("profile has no beta_00"))?;
            let alpha = setup.params.require_alpha()?;
            match (cfg.s1, cfg.lambda1) {
                (Some(s1), _) => {
                    let (l, b) = unbalanced_solutions(beta, alpha, s1)?;
                    Ok((s1, l, b))
                }
                (None, Some(l1)) => {
                    let (s1, b1) = unbalanced_start(beta, alpha, l1)?;
                    Ok((s1, l1, b1))
                }
                (None, None) => Err(anyhow!("neither s1 nor lambda1 is set")),
            }
        }
        Regime::Threshold | Regime::Bounded => {
            let s1 = match (cfg.s1, cfg.lambda1) {
                (Some(s1), _) => s1,
                (None, Some(l1)) => threshold_k(gs, cfg.e0) / l1,
                (None, None) => return Err(anyhow!("neither s1 nor lambda1 is set")),
            };
            if regime == Regime::Bounded {
                let (l1, _) = app_solutions(gs, cfg.e0, s1)?;
                return Ok((s1, l1, 0.0));
            }
            let (l1, b1) = init_params(expansion, gs, cfg.e0, s1)?;
            Ok((s1, l1, b1))
        }
    }
}

/// `λ(t) ≈ c'(T − t)^q` of the regime, as `(q, c')`.
pub fn expected_law(setup: &Setup, expansion: &ProfileExpansion, regime: Regime, e0: f64) -> Option<(f64, f64)> {
    match regime {
        Regime::Threshold => Some((1.0, 1.0 / threshold_k(&setup.gs, e0))),
        Regime::Unbalanced => {
            let alpha = setup.params.alpha?;
            let c = unbalanced_solutions(expansion.beta(0, 0)?, alpha, 1.0).ok()?.0;
            // T − t = c² s^{1−4/α}/(4/α − 1) along λ = c s^{−2/α}
            let q = 2.0 / (4.0 - alpha);
            Some((q, c * ((4.0 / alpha - 1.0) / (c * c)).powf(q)))
        }
        Regime::Bounded => None,
    }
}

pub fn sim_config(cfg: &Resolved, params: ProblemParams, regime: Regime) -> SimConfig {
    let mut sc = SimConfig::new(params);
    sc.h_per_scale = cfg.rmax / cfg.grid_n as f64;
    sc.c_dt = cfg.dt_c;
    sc.max_steps = if regime == Regime::Bounded { cfg.max_steps.min(DIAGNOSTIC_STEPS) } else { cfg.max_steps };
    sc.floor = Floor::Relative(cfg.floor);
    sc.snapshot_ds = cfg.snapshot_ds;
    sc.scheme = cfg.scheme.core();
    sc.decompose.tube_radius = cfg.tube_radius;
    sc
}

/// Labeled heuristic: bounded `‖∇u‖₂` over a finite window says nothing
/// about global existence.
#[derive(Debug, Clone, Serialize)]
pub struct Boundedness {
    pub label: &'static str,
    pub horizon_t: f64,
    pub steps: usize,
    pub max_grad_ratio: f64,
    pub min_lambda_hat_ratio: f64,
}

pub const BOUNDEDNESS_LABEL: &str = "heuristic, non-probative: finite-window H1 boundedness, not a global-existence proof";

#[derive(Debug, Clone, Serialize)]
pub struct LowerBound {
    pub exponent: f64,
    pub infimum: f64,
    pub positive: bool,
}

pub struct Outcome {
    pub regime: Regime,
    pub omega: f64,
    pub beta00: Option<f64>,
    pub alpha: Option<f64>,
    pub s1: f64,
    pub run: BlowupRun,
    pub fit: std::result::Result<RateFit, String>,
    pub expected: Option<(f64, f64)>,
    pub lower_bound: Option<LowerBound>,
    pub boundedness: Option<Boundedness>,
    pub max_eps_hat_h1: f64,
}

pub fn simulate(cfg: &Resolved) -> Result<Outcome> {
    let su = setup(cfg)?;
    let expansion = build_profile(&su.gs, &su.params, cfg.order)?;
    let regime = regime(&su.params, &expansion);
    let (s1, l1, b1) = initial_data(cfg, &su, &expansion, regime)?;
    let sc = sim_config(cfg, su.params, regime);
    let mut quiet = |_: &_| true;
    let run = match regime {
        Regime::Threshold => simulate_blowup(&sc, &expansion, &su.gs, cfg.e0, s1, &mut quiet)?,
        Regime::Unbalanced | Regime::Bounded => simulate_from(&sc, &expansion, &su.gs, l1, b1, s1, &mut quiet)?,
    };
    let max_eps_hat_h1 = run.snapshots.iter().map(|s| s.eps_hat_h1).fold(0.0, f64::max);
    let (fit, lower_bound, boundedness) = if regime == Regime::Bounded {
        let g0 = run.snapshots.first().map_or(f64::NAN, |s| s.grad_norm);
        let l0 = run.snapshots.first().map_or(f64::NAN, |s| s.lambda_hat);
        let b = Boundedness {
            label: BOUNDEDNESS_LABEL,
            horizon_t: run.t_final,
            steps: run.steps,
            max_grad_ratio: run.snapshots.iter().map(|s| s.grad_norm / g0).fold(0.0, f64::max),
            min_lambda_hat_ratio: run.snapshots.iter().map(|s| s.lambda_hat / l0).fold(f64::INFINITY, f64::min),
        };
        (Err("no blow-up datum when beta_00 <= 0".to_string()), None, Some(b))
    } else {
        let fit = fit_blowup_rate(&run).map_err(|e| e.to_string());
        let lb = match &fit {
            Ok(f) => {
                let q = rate_exponent(&run.config.params)?;
                let inf = lower_bound_check(&run, f, &run.config.params)?;
                Some(LowerBound { exponent: q, infimum: inf, positive: inf > 0.0 })
            }
            Err(_) => None,
        };
        (fit, lb, None)
    };
    Ok(Outcome {
        regime,
        omega: su.omega,
        beta00: expansion.beta(0, 0),
        alpha: su.params.alpha,
        s1,
        expected: expected_law(&su, &expansion, regime, cfg.e0),
        run,
        fit,
        lower_bound,
        boundedness,
        max_eps_hat_h1,
    })
}
