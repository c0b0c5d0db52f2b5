use std::sync::OnceLock;

use simflow::eigenvalue::{cavity_exit_slope, default_bracket, solve_lambda};
use simflow::sim_ode::{rhs, Controls, PieceKind};
use simflow::solution::{solve_and_build, Solution};
use simflow::{GasConfig, SimError};

fn shock33() -> &'static Solution {
    static S: OnceLock<Solution> = OnceLock::new();
    S.get_or_init(|| solve_and_build(&GasConfig::shock(3.0, 3).unwrap(), &Controls::default()).unwrap())
}

#[test]
fn gamma3_sphere_eigenvalue() {
    let s = shock33();
    assert!((s.lam.lambda - 1.5713126233).abs() < 1e-7, "{}", s.lam.lambda);
    assert!(s.shoot.converged);
}

#[test]
fn reflected_shock_position() {
    let s = shock33();
    assert!((s.b() - 0.693970).abs() < 1e-3, "{}", s.b());
    assert!(s.x_c() < 0.0 && s.x_c() > -1.0);
}

#[test]
fn exact_integral_holds_on_every_piece() {
    let s = shock33();
    for p in &s.trajectory.pieces {
        let d = p.integral_drift(&s.cfg, &s.lam);
        assert!(d < 1e-8, "{:?}: {d:e}", p.kind);
    }
}

#[test]
fn far_field_exponents() {
    let a = &shock33().asymptotics;
    assert!((a.sigma_fit / 0.77523 - 1.0).abs() < 0.02, "{}", a.sigma_fit);
    assert!((a.r_exp_fit / -0.27766 - 1.0).abs() < 0.02, "{}", a.r_exp_fit);
    assert!((a.sigma_fit - a.sigma_pred).abs() < 1e-6);
}

#[test]
fn eigenvalues_lie_in_admissible_range() {
    for g in [1.4, 5.0 / 3.0, 3.0] {
        for n in [2, 3] {
            let cfg = GasConfig::shock(g, n).unwrap();
            let r = solve_lambda(&cfg, default_bracket(&cfg), &Controls::default(), 41).unwrap();
            assert!(r.lambda_std > 1.0 && r.lambda_std < 1.0 + n as f64 / 2.0, "gamma {g} n {n}: {}", r.lambda_std);
        }
    }
}

#[test]
fn insensitive_to_crossing_offsets() {
    let cfg = GasConfig::shock(3.0, 3).unwrap();
    let base = shock33().lam.lambda;
    let d = Controls::default();
    for f in [0.1, 10.0] {
        for ctl in [Controls { eps_c: d.eps_c * f, ..d }, Controls { eps_0: d.eps_0 * f.min(2.0), ..d }] {
            let r = solve_lambda(&cfg, default_bracket(&cfg), &ctl, 41).unwrap();
            assert!((r.lambda_std - base).abs() < 1e-8, "{ctl:?}: {}", r.lambda_std - base);
        }
    }
}

#[test]
fn cavity_existence_boundary() {
    let ok = solve_and_build(&GasConfig::cavity(3.0, 3).unwrap(), &Controls::default()).unwrap();
    assert!(ok.lam.lambda > 1.0 && ok.lam.lambda < ok.cfg.lambda_limit());
    match solve_and_build(&GasConfig::cavity(2.0, 3).unwrap(), &Controls::default()) {
        Err(SimError::NoRoot { .. }) => {}
        other => panic!("expected NoRoot, got {other:?}"),
    }
}

#[test]
fn cavity_launch_follows_saddle_direction() {
    let s = solve_and_build(&GasConfig::cavity(3.0, 3).unwrap(), &Controls::default()).unwrap();
    let want = cavity_exit_slope(&s.cfg, s.lam.lambda).unwrap();
    let nodes = &s.trajectory.piece(PieceKind::PreCrossing).unwrap().nodes;
    // dZ/dV = 2C (dC/dx)/(dV/dx) of the integrated field at the first stored node
    let p = &nodes[0];
    let (dv, dc) = rhs(&s.cfg, &s.lam, p.x, p.v, p.c).unwrap();
    let measured = 2.0 * p.c * dc / dv;
    assert!((measured / want - 1.0).abs() < 1e-6, "{measured} vs {want}");
}

#[test]
fn slab_is_refused() {
    let e = GasConfig::shock(3.0, 1).unwrap_err();
    assert_eq!(e, SimError::SlabGeometry);
    assert!(e.to_string().contains("critical point"));
}
