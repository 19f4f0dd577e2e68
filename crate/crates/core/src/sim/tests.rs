use super::*;
use crate::groundstate::{default_rmax, solve_ground_state};
use crate::params::{make_params, ParamRequest};
use std::sync::OnceLock;

fn critical(dim: usize) -> ProblemParams {
    make_params(ParamRequest::new(dim, 0.2, 0.0, Branch::Critical)).unwrap()
}

fn ground(n: usize, rmax: f64) -> GroundState {
    let g = Arc::new(RadialGrid::uniform(1, n, rmax).unwrap());
    solve_ground_state(&critical(1), g, 1e-9).unwrap()
}

/// Ground state on a fine grid, used as an interpolation source.
fn fine_ground() -> &'static GroundState {
    static GS: OnceLock<GroundState> = OnceLock::new();
    GS.get_or_init(|| ground(32000, default_rmax(1)))
}

/// `(1 + 2it)^{−N/2} exp(−r²/(2(1 + 2it)))` solves `i u_t + Δu = 0`.
fn gaussian(t: f64, grid: &Arc<RadialGrid>) -> ComplexField {
    let beta = Complex64::new(1.0, 2.0 * t);
    let amp = beta.powf(-(grid.dim() as f64) / 2.0);
    ComplexField::from_fn(grid.clone(), |r| amp * (-(r * r) / (2.0 * beta)).exp()).unwrap()
}

fn rel_l2(a: &ComplexField, b: &ComplexField) -> f64 {
    a.sub(b).norm_l2() / b.norm_l2()
}

#[test]
fn free_gaussian_converges_at_second_order() {
    for dim in [1, 2] {
        let params = critical(dim);
        let mut errs = Vec::new();
        for k in 0..3 {
            let m = 1usize << k;
            let grid = Arc::new(RadialGrid::uniform(dim, 1000 * m, 20.0).unwrap());
            let stepper = Stepper::linear(&params, grid.clone()).unwrap();
            for scheme in [Scheme::Strang, Scheme::Conservative] {
                let (u, dm, _) = evolve(&stepper, &gaussian(0.0, &grid), 1.0, 50 * m, scheme).unwrap();
                assert!(dm < 1e-12, "linear substep mass drift {dm}");
                if scheme == Scheme::Strang {
                    errs.push(rel_l2(&u, &gaussian(1.0, &grid)));
                }
            }
        }
        let r1 = errs[0] / errs[1];
        let r2 = errs[1] / errs[2];
        assert!(errs[0] < 1e-2, "N={dim}: error {errs:?}");
        assert!(r1 > 3.5 && r1 < 4.5 && r2 > 3.5 && r2 < 4.5, "N={dim}: ratios {r1} {r2} ({errs:?})");
    }
}

#[test]
fn mass_drift_over_a_thousand_steps() {
    let p0 = make_params(ParamRequest::new(1, 0.2, 1.0, Branch::PlusMinus)).unwrap();
    let gs = ground(4000, 20.0);
    let params = p0.with_c0(2.0 * gs.omega());
    let u0 = gs.q.to_complex().map_r(|r, z| z * Complex64::from_polar(1.0, -0.1 * r * r));
    let stepper = Stepper::new(&params, gs.grid().clone()).unwrap();
    for scheme in [Scheme::Strang, Scheme::Conservative] {
        let (_, dm, de) = evolve(&stepper, &u0, 1.0, 1000, scheme).unwrap();
        assert!(dm < 1e-8, "{scheme:?}: mass drift {dm}");
        if scheme == Scheme::Conservative {
            assert!(de < 1e-9, "conservative energy drift {de}");
        }
    }
}

#[test]
fn soliton_modulus_over_one_period() {
    let gs = ground(2000, 20.0);
    let params = critical(1);
    let stepper = Stepper::new(&params, gs.grid().clone()).unwrap();
    let q = gs.q.to_complex();
    let period = 2.0 * core::f64::consts::PI;
    for scheme in [Scheme::Strang, Scheme::Conservative] {
        let mut errs = Vec::new();
        for steps in [800, 1600] {
            let (u, _, _) = evolve(&stepper, &q, period, steps, scheme).unwrap();
            let modulus = u.map(|z| Complex64::new(z.norm(), 0.0));
            errs.push(rel_l2(&modulus, &q));
        }
        if scheme == Scheme::Strang {
            assert!(errs[1] < 1e-3, "modulus error {errs:?}");
            let ratio = errs[0] / errs[1];
            assert!(ratio > 3.5 && ratio < 4.5, "modulus error not second order: {errs:?}");
        } else {
            // the discrete ground state is a fixed point of the midpoint rule up to its phase
            assert!(errs[1] < 1e-9, "modulus error {errs:?}");
        }
    }
}

#[test]
fn pseudo_conformal_invariants() {
    let gs = fine_ground();
    let grid = Arc::new(RadialGrid::uniform(1, 8000, 20.0).unwrap());
    let mass_q = gs.norms.mass;
    for t in [-1.0f64, -0.8, -0.6, -0.3] {
        let s = pseudo_conformal_reference(t, grid.clone(), gs).unwrap();
        assert!((s.norm_l2_sq() / mass_q - 1.0).abs() < 1e-8, "mass at t = {t}");
        // ‖∇S(t)‖² = ‖∇Q‖²/t² + ‖yQ‖²/4
        let exact = gs.norms.grad / (t * t) + 0.25 * gs.norms.virial;
        let h = grid.h_max() / t.abs();
        assert!((s.grad_sq() / exact - 1.0).abs() < h * h, "t = {t}: {} vs {exact}", s.grad_sq());
    }
    assert!(pseudo_conformal_reference(0.5, grid, gs).is_err());
}

#[test]
fn pseudo_conformal_run_converges() {
    let gs = fine_ground();
    let params = critical(1);
    let mut errs = Vec::new();
    for k in 0..3 {
        let m = 1usize << k;
        let grid = Arc::new(RadialGrid::uniform(1, 1000 * m, 25.0).unwrap());
        let stepper = Stepper::new(&params, grid.clone()).unwrap();
        let s0 = pseudo_conformal_reference(-1.0, grid.clone(), gs).unwrap();
        let s1 = pseudo_conformal_reference(-0.5, grid.clone(), gs).unwrap();
        let (u, dm, de) = evolve(&stepper, &s0, 0.5, 250 * m, Scheme::Conservative).unwrap();
        assert!(dm < 1e-10 && de < 1e-9, "drift {dm} {de}");
        errs.push(rel_l2(&u, &s1));
    }
    let (r1, r2) = (errs[0] / errs[1], errs[1] / errs[2]);
    assert!(r1 > 3.5 && r2 > 3.5, "{errs:?}");
}

#[test]
fn lambda_hat_identities() {
    let gs = fine_ground();
    let q = gs.q.to_complex();
    assert!((lambda_hat(&q, gs).unwrap() - 1.0).abs() < 1e-14);
    for lambda in [0.5, 0.1] {
        let grid = Arc::new(gs.grid().scaled(lambda).unwrap());
        let u = ComplexField::new(grid, q.values().iter().map(|z| z * lambda.powf(-0.5)).collect()).unwrap();
        assert!((lambda_hat(&u, gs).unwrap() / lambda - 1.0).abs() < 1e-12);
    }
}

#[test]
fn positivity_verdicts() {
    let gs = fine_ground();
    let q = gs.q.to_complex();
    let r = energy_positivity_check(&q, &critical(1)).unwrap();
    assert_eq!(r.verdict, Verdict::Boundary, "{r:?}");
    // a twist adds b²‖xQ‖²/4 of kinetic energy
    let twisted = q.map_r(|x, z| z * Complex64::from_polar(1.0, -0.05 * x * x));
    let r = energy_positivity_check(&twisted, &critical(1)).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    let scaled = q.scaled(1.01);
    assert_eq!(energy_positivity_check(&scaled, &critical(1)).unwrap().verdict, Verdict::Fail);
}

#[test]
fn strang_step_is_unitary_in_linear_substep() {
    let gs = ground(1000, 20.0);
    let u = gs.q.to_complex().map_r(|r, z| z * Complex64::from_polar(1.0, 0.3 * r));
    let v = step(&u, 0.01, &critical(1)).unwrap();
    assert!((v.norm_l2_sq() / u.norm_l2_sq() - 1.0).abs() < 1e-13);
    assert!(step(&u, -0.01, &critical(1)).is_err());
}

#[test]
fn synthetic_fit_is_exact() {
    let t: Vec<f64> = (0..60).map(|k| 0.6 * k as f64 / 59.0).collect();
    let l: Vec<f64> = t.iter().map(|t| 3.0 * (0.7 - t)).collect();
    let f = fit_power_law(&t, &l).unwrap();
    assert!((f.exponent - 1.0).abs() < 1e-8, "{f:?}");
    assert!((f.coefficient - 3.0).abs() < 1e-7);
    assert!((f.t_est - 0.7).abs() < 1e-9);
    assert!(f.r2 > 1.0 - 1e-12);
}

#[test]
fn exact_rate_lower_bound_is_constant() {
    let q = 2.0 / (4.0 - 1.6);
    let snaps: Vec<Snapshot> = (0..50)
        .map(|k| {
            let t = 0.9 * k as f64 / 49.0;
            let lambda = 0.4 * (1.0 - t).powf(q);
            Snapshot { t, lambda, grad_norm: 1.3 / lambda, ..Default::default() }
        })
        .collect();
    let t: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    let l: Vec<f64> = snaps.iter().map(|s| s.lambda).collect();
    let fit = fit_power_law(&t, &l).unwrap();
    let lb = lower_bound_with(&snaps, &fit, q).unwrap();
    let ub = snaps.iter().map(|s| s.grad_norm * (fit.t_est - s.t).powf(q)).fold(0.0, f64::max);
    assert!((lb / ub - 1.0).abs() < 1e-8 && (lb - 1.3 / 0.4).abs() < 1e-6, "{lb} {ub}");
}

#[test]
fn window_needs_a_decade() {
    let mk = |l0: f64, l1: f64| -> Vec<Snapshot> {
        (0..100)
            .map(|k| {
                let x = k as f64 / 99.0;
                Snapshot { t: x, lambda: l0 * (l1 / l0).powf(x), ..Default::default() }
            })
            .collect()
    };
    assert!(fit_window(&mk(0.1, 0.02)).is_err());
    let snaps = mk(0.1, 0.005);
    let (a, b) = fit_window(&snaps).unwrap();
    let last = snaps[99].lambda;
    assert!(snaps[b - 1].lambda >= last * 10f64.powf(0.1));
    assert!(snaps[a].lambda >= 10.0 * last * 10f64.powf(0.1) && snaps[a + 1].lambda < 10.0 * last * 10f64.powf(0.1));
}

#[test]
fn config_validation() {
    let mut c = SimConfig::new(critical(1));
    assert!(c.validate().is_ok());
    c.c_dt = 0.2;
    assert!(c.validate().is_err());
    c.c_dt = 0.01;
    c.rescale_factor = 1.0;
    assert!(c.validate().is_err());
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

    #[test]
    fn fit_recovers_its_model(c in 0.1f64..10.0, q in 0.5f64..1.5, tb in 0.05f64..2.0) {
        let t: Vec<f64> = (0..40).map(|k| k as f64 / 39.0).collect();
        let big_t = 1.0 + tb;
        let l: Vec<f64> = t.iter().map(|t| c * (big_t - t).powf(q)).collect();
        let f = fit_power_law(&t, &l).unwrap();
        proptest::prop_assert!((f.exponent - q).abs() < 1e-6 * (1.0 + q), "{:?}", f);
        proptest::prop_assert!((f.t_est - big_t).abs() < 1e-6 * big_t);
        proptest::prop_assert!((f.coefficient / c - 1.0).abs() < 1e-5);
    }

    #[test]
    fn unitary_steps_conserve_mass(a in 0.2f64..2.0, k in -2.0f64..2.0, steps in 10usize..60) {
        let grid = Arc::new(RadialGrid::uniform(1, 800, 20.0).unwrap());
        let u = ComplexField::from_fn(grid.clone(), |r| Complex64::from_polar(a * (-(r * r)).exp(), k * r * r)).unwrap();
        let stepper = Stepper::new(&critical(1), grid).unwrap();
        let (_, dm, _) = evolve(&stepper, &u, 0.01 * steps as f64, steps, Scheme::Strang).unwrap();
        proptest::prop_assert!(dm < 1e-11 * steps as f64);
    }
}
