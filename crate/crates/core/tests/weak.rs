use std::sync::OnceLock;

use rand::{rngs::StdRng, Rng, SeedableRng};
use simflow::case::Case;
use simflow::sim_ode::Controls;
use simflow::solution::{solve_and_build, Solution};
use simflow::weak::{
    boundary_term, check_p_conditions, conserved, conserved_at_collapse, conserved_direct, continuity_scan,
    default_deltas, default_t_grid, flux_residual_sweep, integrability, integrability_exponents, verify, Equation,
    Quantity, TestFunction,
};
use simflow::{GasConfig, SimError};

fn shock33() -> &'static Solution {
    static S: OnceLock<Solution> = OnceLock::new();
    S.get_or_init(|| solve_and_build(&GasConfig::shock(3.0, 3).unwrap(), &Controls::default()).unwrap())
}

#[test]
fn collapse_values_match_closed_forms() {
    let s = shock33();
    let l = s.lam.lambda;
    let (ell, big_l, r0) = (s.origin.ell, s.origin.big_l, s.r0());
    let rb: f64 = 0.7;
    let n = 3.0;
    let m = conserved_at_collapse(s, Quantity::Mass, rb);
    assert!((m - rb.powf(n) * r0 / n).abs() < 1e-14 * m);
    let a_i = n + 1.0 - l;
    let i = conserved_at_collapse(s, Quantity::Momentum, rb);
    assert!((i - r0 * ell.abs() / l * rb.powf(a_i) / a_i).abs() < 1e-14 * i);
    let a_e = n + 2.0 - 2.0 * l;
    let ek = conserved_at_collapse(s, Quantity::Kinetic, rb);
    assert!((ek - r0 * ell * ell / (2.0 * l * l) * rb.powf(a_e) / a_e).abs() < 1e-14 * ek);
    let g = s.cfg.gamma;
    let ep = conserved_at_collapse(s, Quantity::Potential, rb);
    assert!((ep - r0 * big_l * big_l / (l * l * g * (g - 1.0)) * rb.powf(a_e) / a_e).abs() < 1e-14 * ep);
}

#[test]
fn two_routes_agree_at_random_points() {
    let s = shock33();
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..20 {
        let t = rng.gen_range(0.02..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let rb = rng.gen_range(0.1..2.0);
        for q in Quantity::ALL {
            let a = conserved(s, q, t, rb).unwrap();
            let b = conserved_direct(s, q, t, rb).unwrap();
            assert!((a - b).abs() <= 1e-7 * a.abs().max(b.abs()), "{} t={t} r={rb}: {a} {b}", q.label());
        }
    }
}

#[test]
fn conserved_quantities_are_continuous_at_collapse() {
    let rows = continuity_scan(shock33(), 1.0, &default_t_grid()).unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert!(r.jump < 1e-5, "{}: {:e}", r.quantity.label(), r.jump);
    }
    assert!(continuity_scan(shock33(), 1.0, &[0.1, 0.01]).is_err());
}

#[test]
fn side_conditions_hold() {
    let p = check_p_conditions(shock33());
    assert!(p.p1 && p.p2 && p.p3, "{p:?}");
}

#[test]
fn space_time_integrals_are_finite() {
    let v = integrability(shock33(), 1.0).unwrap();
    for x in [v.i2, v.i3, v.p0, v.p1] {
        assert!(x.is_finite() && x > 0.0);
    }
}

#[test]
fn lambda_beyond_energy_bound_is_a_constraint_error() {
    let cfg = GasConfig::shock(3.0, 3).unwrap();
    let bad = 1.0 + 1.5 + 0.1;
    match integrability_exponents(&cfg, bad) {
        Err(SimError::Constraint { lambda, detail }) => {
            assert_eq!(lambda, bad);
            assert!(detail.contains("lambda"));
        }
        other => panic!("{other:?}"),
    }
    assert!(integrability_exponents(&cfg, shock33().lam.lambda).is_ok());
}

#[test]
fn zero_test_function_gives_zero() {
    for eq in Equation::ALL {
        assert_eq!(boundary_term(shock33(), eq, &TestFunction::zero(), 1e-2).unwrap(), 0.0);
    }
}

#[test]
fn boundary_terms_decay() {
    let s = shock33();
    for eq in Equation::ALL {
        for psi in TestFunction::family(eq) {
            let sw = flux_residual_sweep(s, eq, &psi, &default_deltas()).unwrap();
            assert!(sw.decays, "{eq:?} {psi:?}: {:?}", sw.residuals);
            assert!(sw.fitted_exponent.unwrap() > 0.0);
        }
    }
}

#[test]
fn report_survives_case_round_trip() {
    let s = shock33();
    let back = Case::from_json(&Case::new(s.clone()).to_json().unwrap()).unwrap().solution;
    assert_eq!(&back, s);
    let deltas = [1e-1, 1e-2];
    let a = verify(s, 1.0, &default_t_grid(), &deltas).unwrap();
    let b = verify(&back, 1.0, &default_t_grid(), &deltas).unwrap();
    assert_eq!(a, b);
    assert!(a.weak_form_ok() && !a.informational);
}

#[test]
fn case_files_reject_foreign_schema() {
    let j = Case::new(shock33().clone()).to_json().unwrap().replace("simflow.case/1", "other/9");
    assert!(matches!(Case::from_json(&j), Err(SimError::Case(_))));
}
