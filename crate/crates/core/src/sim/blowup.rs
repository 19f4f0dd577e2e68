//! Blow-up runs with dynamic rescaling.
//!
//! The field lives on `base.scaled(L)` where `base` resolves the unit-scale
//! soliton. When `λ̂ < L/f` the field is resampled onto `base.scaled(L/f)`
//! (cubic interpolation) and the run continues, so every segment sees the
//! same effective resolution. The time step is `c_dt·λ̂²`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::stepper::{Scheme, Stepper};
use super::{energy_positivity_check, is_balanced, PositivityReport};
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::RadialGrid;
use crate::groundstate::GroundState;
use crate::interp::resample;
use crate::modulation::{
    decompose, energy_inequality_check, hat_epsilon, lambda_m_s, mod_bound, DecomposeOptions, Guess,
    ModulationState,
};
use crate::params::ProblemParams;
use crate::profile::{rescale_to_physical, ProfileExpansion};
use crate::reduced::init_params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Floor {
    /// Stop once `λ̂` falls below this value.
    Absolute(f64),
    /// Stop once `λ̂` falls below this fraction of its initial value.
    Relative(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ProblemParams,
    /// Grid spacing in units of the current scale `L`.
    pub h_per_scale: f64,
    /// Outer radius in units of `L`.
    pub rmax_per_scale: f64,
    /// `dt = c_dt·λ̂²`.
    pub c_dt: f64,
    pub rescale_factor: f64,
    pub floor: Floor,
    pub max_steps: usize,
    /// Snapshot spacing in the rescaled time `s`.
    pub snapshot_ds: f64,
    pub scheme: Scheme,
    /// Mass drift relative to `M`, and energy drift relative to
    /// `max(|E|, ½‖∇u‖²)`, allowed within one grid segment.
    pub drift_budget: f64,
    pub decompose: DecomposeOptions,
    /// Weight exponent `m` of the Lyapunov functional.
    pub lyapunov_m: f64,
}

impl SimConfig {
    pub fn new(params: ProblemParams) -> Self {
        SimConfig {
            params,
            h_per_scale: 1e-3,
            rmax_per_scale: 20.0,
            c_dt: 0.01,
            rescale_factor: 2.0,
            floor: Floor::Relative(1.0 / 16.0),
            max_steps: 1_000_000,
            snapshot_ds: 0.1,
            scheme: Scheme::Conservative,
            drift_budget: 1e-6,
            decompose: DecomposeOptions::default(),
            lyapunov_m: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.c_dt > 0.0 && self.c_dt <= 0.1) {
            return bad(format!("c_dt = {} must lie in (0, 0.1]", self.c_dt));
        }
        if !(self.rescale_factor > 1.0 && self.rescale_factor.is_finite()) {
            return bad(format!("rescale factor {} must exceed 1", self.rescale_factor));
        }
        if !(self.h_per_scale > 0.0 && self.rmax_per_scale > 8.0 * self.h_per_scale) {
            return bad(format!(
                "grid policy h = {}, rmax = {} does not give a usable grid",
                self.h_per_scale, self.rmax_per_scale
            ));
        }
        match self.floor {
            Floor::Absolute(v) if !(v > 0.0) => return bad(format!("floor {v} must be positive")),
            Floor::Relative(v) if !(v > 0.0 && v < 1.0) => return bad(format!("relative floor {v} must lie in (0, 1)")),
            _ => {}
        }
        if !(self.snapshot_ds > 0.0) {
            return bad(format!("snapshot spacing {} must be positive", self.snapshot_ds));
        }
        if !(self.drift_budget > 0.0) {
            return bad(format!("drift budget {} must be positive", self.drift_budget));
        }
        Ok(())
    }

    /// Grid at unit scale.
    pub fn base_grid(&self) -> Result<RadialGrid> {
        let n = (self.rmax_per_scale / self.h_per_scale).round() as usize;
        RadialGrid::uniform(self.params.dim, n, self.rmax_per_scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Floor,
    MaxSteps,
    /// The observer asked to stop (wall budget, cancellation).
    Observer,
    TubeExit,
    /// Decomposition failed for a reason other than leaving the tube.
    Decomposition,
    Conservation,
    SolverFailure,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub s: f64,
    pub lambda_hat: f64,
    pub lambda: f64,
    pub b: f64,
    /// Continuous in time (not wrapped).
    pub gamma: f64,
    pub eps_h1: f64,
    pub eps_hat_h1: f64,
    /// `‖yε‖₂`
    pub eps_virial: f64,
    pub eps_p: f64,
    /// `(λ_s/λ + b, b_s + b² − θ, 1 − γ_s)` by differences in `s`.
    pub modulation: [f64; 3],
    pub mod_norm: f64,
    pub mod_bound: f64,
    /// `λ^m S`
    pub lyapunov_bracket: f64,
    pub lyapunov: f64,
    pub energy_ratio: f64,
    /// `‖∇u‖₂`
    pub grad_norm: f64,
    pub mass: f64,
    pub energy: f64,
    /// Current grid scale `L`.
    pub scale: f64,
    pub decompose_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegridEvent {
    pub t: f64,
    pub lambda_hat: f64,
    pub from_scale: f64,
    pub to_scale: f64,
    pub mass_before: f64,
    pub mass_after: f64,
    pub energy_before: f64,
    pub energy_after: f64,
}

impl RegridEvent {
    pub fn mass_change(&self) -> f64 {
        (self.mass_after - self.mass_before).abs() / self.mass_before
    }
    pub fn energy_change(&self) -> f64 {
        (self.energy_after - self.energy_before).abs() / self.energy_before.abs()
    }
}

/// Conservation on one grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub scale: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub steps: usize,
    pub mass_start: f64,
    pub mass_end: f64,
    pub energy_start: f64,
    pub energy_end: f64,
    pub max_mass_drift: f64,
    pub max_energy_drift: f64,
}

impl Segment {
    fn open(scale: f64, t: f64, mass: f64, energy: f64) -> Self {
        Segment {
            scale,
            t_start: t,
            t_end: t,
            steps: 0,
            mass_start: mass,
            mass_end: mass,
            energy_start: energy,
            energy_end: energy,
            max_mass_drift: 0.0,
            max_energy_drift: 0.0,
        }
    }

    /// Record `(M, E)` at time `t`; returns the current relative drifts.
    fn record(&mut self, t: f64, mass: f64, energy: f64) -> (f64, f64) {
        self.t_end = t;
        self.mass_end = mass;
        self.energy_end = energy;
        let dm = (mass - self.mass_start).abs() / self.mass_start;
        let de = (energy - self.energy_start).abs() / self.energy_start.abs().max(f64::MIN_POSITIVE);
        self.max_mass_drift = self.max_mass_drift.max(dm);
        self.max_energy_drift = self.max_energy_drift.max(de);
        (dm, de)
    }
}

#[derive(Debug, Clone)]
pub struct BlowupRun {
    pub config: SimConfig,
    pub lambda1: f64,
    pub b1: f64,
    pub positivity: PositivityReport,
    pub initial_mass: f64,
    pub initial_energy: f64,
    pub snapshots: Vec<Snapshot>,
    pub regrids: Vec<RegridEvent>,
    pub segments: Vec<Segment>,
    pub stop: StopReason,
    pub stop_detail: Option<String>,
    pub steps: usize,
    pub t_final: f64,
    pub final_field: ComplexField,
}

impl BlowupRun {
    /// Sum over grid segments of the net relative mass change.
    pub fn solver_mass_drift(&self) -> f64 {
        self.segments.iter().map(|s| (s.mass_end - s.mass_start).abs() / s.mass_start).sum()
    }

    /// Sum over grid segments of the net relative energy change.
    pub fn solver_energy_drift(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| (s.energy_end - s.energy_start).abs() / s.energy_start.abs().max(f64::MIN_POSITIVE))
            .sum()
    }

    /// Largest relative mass change across one regridding.
    pub fn max_regrid_mass_change(&self) -> f64 {
        self.regrids.iter().map(RegridEvent::mass_change).fold(0.0, f64::max)
    }

    /// `(M_final − M_0)/M_0` including regridding.
    pub fn total_mass_change(&self) -> f64 {
        (self.final_field.norm_l2_sq() - self.initial_mass) / self.initial_mass
    }
}

/// Evolve `u` over `duration` in `steps` equal steps on a fixed grid.
/// Returns the final field and the relative `(mass, energy)` change.
pub fn evolve(
    stepper: &Stepper,
    u: &ComplexField,
    duration: f64,
    steps: usize,
    scheme: Scheme,
) -> Result<(ComplexField, f64, f64)> {
    if steps == 0 || !(duration > 0.0) {
        return Err(Error::InvalidInput(format!("need positive duration and steps, got {duration}, {steps}")));
    }
    let dt = duration / steps as f64;
    let (m0, e0) = stepper.invariant(u);
    let mut v = u.values().to_vec();
    for _ in 0..steps {
        stepper.advance(&mut v, dt, scheme)?;
    }
    let out = ComplexField::new(u.grid().clone(), v)?;
    let (m1, e1) = stepper.invariant(&out);
    let dm = (m1 - m0).abs() / m0;
    let de = (e1 - e0).abs() / e0.abs().max(f64::MIN_POSITIVE);
    Ok((out, dm, de))
}

/// Balanced run from `init_params(expansion, gs, E₀, s₁)`.
pub fn simulate_blowup(
    config: &SimConfig,
    expansion: &ProfileExpansion,
    gs: &GroundState,
    e0: f64,
    s1: f64,
    observer: &mut dyn FnMut(&Snapshot) -> bool,
) -> Result<BlowupRun> {
    let (lambda1, b1) = init_params(expansion, gs, e0, s1)?;
    simulate_from(config, expansion, gs, lambda1, b1, s1, observer)
}

struct Tracker {
    prev: Option<ModulationState>,
    gamma_unwrapped: f64,
    s: f64,
}

/// Run from `u(0) = λ₁^{−N/2} P_{λ₁,b₁}(x/λ₁) e^{−i(b₁/4)|x|²/λ₁²}`, with the
/// rescaled time starting at `s_start`.
pub fn simulate_from(
    config: &SimConfig,
    expansion: &ProfileExpansion,
    gs: &GroundState,
    lambda1: f64,
    b1: f64,
    s_start: f64,
    observer: &mut dyn FnMut(&Snapshot) -> bool,
) -> Result<BlowupRun> {
    config.validate()?;
    let mut config = config.clone();
    if config.params.omega.is_none() && gs.params.p == config.params.p && gs.params.sigma == config.params.sigma {
        config.params.omega = Some(gs.omega());
    }
    let params = config.params;
    let ep = &expansion.params;
    if ep.dim != params.dim || ep.p != params.p || ep.sigma != params.sigma || ep.couplings() != params.couplings() {
        return Err(Error::InvalidInput("simulation and profile parameters differ".into()));
    }
    let base = config.base_grid()?;
    let mut scale = lambda1;
    let mut grid = Arc::new(base.scaled(scale)?);
    let (p, _) = expansion.eval_profile(lambda1, b1);
    let u0 = rescale_to_physical(&p, lambda1, b1, 0.0, grid.clone())?;
    let positivity = energy_positivity_check(&u0, &params)?;
    let mut stepper = Stepper::new(&params, grid.clone())?;
    let (initial_mass, initial_energy) = stepper.conserved(&u0);
    let balanced = is_balanced(&params);

    let lh0 = super::lambda_hat(&u0, gs)?;
    let floor = match config.floor {
        Floor::Absolute(v) => v,
        Floor::Relative(r) => r * lh0,
    };

    let mut u = u0.into_values();
    let mut run = BlowupRun {
        config: config.clone(),
        lambda1,
        b1,
        positivity,
        initial_mass,
        initial_energy,
        snapshots: Vec::new(),
        regrids: Vec::new(),
        segments: Vec::new(),
        stop: StopReason::MaxSteps,
        stop_detail: None,
        steps: 0,
        t_final: 0.0,
        final_field: ComplexField::zeros(grid.clone()),
    };
    let mut segment = Segment::open(scale, 0.0, initial_mass, initial_energy);
    let mut tracker = Tracker { prev: None, gamma_unwrapped: 0.0, s: s_start };
    let ctx = SnapCtx { config: &config, expansion, e0: initial_energy, balanced };

    let mut t = 0.0;
    let mut s_hat = 0.0;
    let mut next_snap = 0.0;
    let mut lh = lh0;
    let stop = loop {
        if s_hat >= next_snap - 1e-12 || lh <= floor {
            let field = ComplexField::new(grid.clone(), u.clone())?;
            let (mass, energy) = stepper.conserved(&field);
            let (dm, _) = segment.record(t, mass, energy);
            // energy is a difference of terms of size ½‖∇u‖²; drift below
            // that scale's rounding is not a solver failure
            let kinetic = 0.5 * field.grad_sq();
            let de = (energy - segment.energy_start).abs() / segment.energy_start.abs().max(kinetic);
            let guess = match &tracker.prev {
                None => Guess { lambda: lambda1, b: b1, gamma: 0.0 },
                Some(prev) => {
                    let ds = (t - prev.t) / (prev.lambda * prev.lambda);
                    Guess { lambda: prev.lambda * (-prev.b * ds).exp(), b: prev.b, gamma: prev.gamma + ds }
                }
            };
            match snapshot(&ctx, &field, &guess, &mut tracker, t, run.steps, lh, scale, mass, energy) {
                Ok(snap) => {
                    run.snapshots.push(snap);
                    if !observer(&snap) {
                        break StopReason::Observer;
                    }
                }
                Err(Error::TubeExit { distance, radius }) => {
                    run.stop_detail = Some(format!("tube exit at t = {t}: distance {distance} > {radius}"));
                    break StopReason::TubeExit;
                }
                Err(e) => {
                    run.stop_detail = Some(format!("decomposition failed at t = {t}: {e}"));
                    break StopReason::Decomposition;
                }
            }
            if dm > config.drift_budget || de > config.drift_budget {
                run.stop_detail =
                    Some(format!("drift at t = {t}: mass {dm:e}, energy {de:e}, budget {:e}", config.drift_budget));
                break StopReason::Conservation;
            }
            if lh <= floor {
                break StopReason::Floor;
            }
            while next_snap <= s_hat + 1e-12 {
                next_snap += config.snapshot_ds;
            }
        }
        if run.steps >= config.max_steps {
            break StopReason::MaxSteps;
        }
        if lh < scale / config.rescale_factor {
            let old = ComplexField::new(grid.clone(), core::mem::take(&mut u))?;
            let (mb, eb) = stepper.conserved(&old);
            segment.record(t, mb, eb);
            run.segments.push(segment);
            let new_scale = scale / config.rescale_factor;
            let new_grid = Arc::new(base.scaled(new_scale)?);
            u = resample(&grid, old.values(), &new_grid);
            stepper = Stepper::new(&params, new_grid.clone())?;
            let field = ComplexField::new(new_grid.clone(), u.clone())?;
            let (ma, ea) = stepper.conserved(&field);
            run.regrids.push(RegridEvent {
                t,
                lambda_hat: lh,
                from_scale: scale,
                to_scale: new_scale,
                mass_before: mb,
                mass_after: ma,
                energy_before: eb,
                energy_after: ea,
            });
            segment = Segment::open(new_scale, t, ma, ea);
            scale = new_scale;
            grid = new_grid;
            continue;
        }
        let dt = config.c_dt * lh * lh;
        if let Err(e) = stepper.advance(&mut u, dt, config.scheme) {
            run.stop_detail = Some(format!("step {} at t = {t}: {e}", run.steps));
            break StopReason::SolverFailure;
        }
        run.steps += 1;
        segment.steps += 1;
        t += dt;
        s_hat += config.c_dt;
        let g = grid.grad_form(&u) * grid.surface();
        lh = (gs.norms.grad / g).sqrt();
    };
    let field = ComplexField::new(grid.clone(), u)?;
    let (mass, energy) = stepper.conserved(&field);
    segment.record(t, mass, energy);
    run.segments.push(segment);
    run.stop = stop;
    run.t_final = t;
    run.final_field = field;
    fill_modulation(&mut run.snapshots, expansion);
    Ok(run)
}

struct SnapCtx<'a> {
    config: &'a SimConfig,
    expansion: &'a ProfileExpansion,
    e0: f64,
    balanced: bool,
}

#[allow(clippy::too_many_arguments)]
fn snapshot(
    ctx: &SnapCtx,
    u: &ComplexField,
    guess: &Guess,
    tracker: &mut Tracker,
    t: f64,
    step: usize,
    lambda_hat: f64,
    scale: f64,
    mass: f64,
    energy: f64,
) -> Result<Snapshot> {
    let mut st = decompose(u, ctx.expansion, guess, &ctx.config.decompose)?;
    st.t = t;
    if let Some(prev) = &tracker.prev {
        let (a, b) = (prev.lambda, st.lambda);
        tracker.s += 0.5 * (t - prev.t) * (1.0 / (a * a) + 1.0 / (b * b));
        let mut d = num_traits::Euclid::rem_euclid(&(st.gamma - prev.gamma), &(2.0 * PI));
        if d > PI {
            d -= 2.0 * PI;
        }
        tracker.gamma_unwrapped += d;
    } else {
        tracker.gamma_unwrapped = st.gamma;
        if st.gamma > PI {
            tracker.gamma_unwrapped -= 2.0 * PI;
        }
    }
    st.s = tracker.s;
    let eh = hat_epsilon(&st).norm_h1();
    let bracket = lambda_m_s(&st, ctx.expansion);
    let ratio = energy_inequality_check(&st, ctx.expansion, ctx.e0, ctx.balanced).unwrap_or(f64::NAN);
    let snap = Snapshot {
        step,
        t,
        s: st.s,
        lambda_hat,
        lambda: st.lambda,
        b: st.b,
        gamma: tracker.gamma_unwrapped,
        eps_h1: st.eps.norm_h1(),
        eps_hat_h1: eh,
        eps_virial: st.eps.virial().sqrt(),
        eps_p: st.eps_p,
        modulation: [f64::NAN; 3],
        mod_norm: f64::NAN,
        mod_bound: mod_bound(&st, ctx.expansion),
        lyapunov_bracket: bracket,
        lyapunov: bracket / st.lambda.powf(ctx.config.lyapunov_m),
        energy_ratio: ratio,
        grad_norm: u.grad_sq().sqrt(),
        mass,
        energy,
        scale,
        decompose_iterations: st.iterations,
    };
    tracker.prev = Some(st);
    Ok(snap)
}

/// `Mod` from differences of `(λ, b, γ)` in `s`.
fn fill_modulation(snaps: &mut [Snapshot], expansion: &ProfileExpansion) {
    let n = snaps.len();
    if n < 2 {
        return;
    }
    for i in 0..n {
        let (a, c) = if i == 0 {
            (0, 1)
        } else if i + 1 == n {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        let ds = snaps[c].s - snaps[a].s;
        if !(ds > 0.0) {
            continue;
        }
        let dl = (snaps[c].lambda - snaps[a].lambda) / ds;
        let db = (snaps[c].b - snaps[a].b) / ds;
        let dg = (snaps[c].gamma - snaps[a].gamma) / ds;
        let (l, b) = (snaps[i].lambda, snaps[i].b);
        let theta = expansion.theta(l, b);
        let m = [dl / l + b, db + b * b - theta, 1.0 - dg];
        snaps[i].modulation = m;
        snaps[i].mod_norm = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
    }
}
