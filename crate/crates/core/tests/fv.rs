use std::sync::OnceLock;

use proptest::prelude::*;
use simflow::fields::ShockPaths;
use simflow::fv::riemann;
use simflow::fv::{
    advance, crossval_run, entropy_profile, error_norms_against, flux_of, hllc, init_from_similarity, GridSpec,
    DEFAULT_CFL, RHO_FLOOR,
};
use simflow::sim_ode::Controls;
use simflow::solution::{solve_and_build, Solution};
use simflow::{GasConfig, SimError};

fn shock33() -> &'static Solution {
    static S: OnceLock<Solution> = OnceLock::new();
    S.get_or_init(|| solve_and_build(&GasConfig::shock(3.0, 3).unwrap(), &Controls::default()).unwrap())
}

fn spec(r_min: f64, r_max: f64, n_cells: usize) -> GridSpec {
    GridSpec { r_min, r_max, n_cells }
}

#[test]
fn quiescent_core_stays_at_rest() {
    let sol = shock33();
    let mut g = init_from_similarity(sol, -1.0, spec(0.05, 0.5, 64)).unwrap();
    advance(&mut g, sol, -0.9, DEFAULT_CFL).unwrap();
    for q in &g.cons {
        assert_eq!(*q, [1.0, 0.0, 0.0]);
    }
}

#[test]
fn mass_is_conserved_up_to_boundary_flux() {
    let (run, g) = crossval_run(shock33(), spec(0.05, 2.0, 256), -1.0, -0.8, DEFAULT_CFL).unwrap();
    assert_eq!(g.stats.floor_events, 0);
    assert!(run.mass_defect < 1e-12, "{:e}", run.mass_defect);
}

#[test]
fn errors_shrink_under_refinement() {
    let sol = shock33();
    let errs: Vec<f64> = [128, 256, 512]
        .iter()
        .map(|&n| crossval_run(sol, spec(0.05, 2.0, n), -1.0, -0.8, DEFAULT_CFL).unwrap().0.norms.rho_relative())
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[2] < 1e-2);
}

#[test]
fn self_comparison_is_zero() {
    let g = init_from_similarity(shock33(), -1.0, spec(0.05, 2.0, 64)).unwrap();
    let e = error_norms_against(&g, &g);
    assert_eq!(e.l1, [0.0; 3]);
    assert_eq!(e.linf, [0.0; 3]);
}

#[test]
fn grid_must_avoid_the_center() {
    let e = init_from_similarity(shock33(), -1.0, spec(0.0, 2.0, 64)).unwrap_err();
    assert!(matches!(e, SimError::Domain(_)));
    assert!(matches!(init_from_similarity(shock33(), 0.0, spec(0.05, 2.0, 64)), Err(SimError::Domain(_))));
}

#[test]
fn cavity_vacuum_cells_are_floored() {
    let sol = solve_and_build(&GasConfig::cavity(3.0, 3).unwrap(), &Controls::default()).unwrap();
    let front = ShockPaths::of(&sol).incoming(-1.0).unwrap();
    let g = init_from_similarity(&sol, -1.0, spec(0.05, 2.0, 64)).unwrap();
    for (i, &r) in g.centers.iter().enumerate() {
        if g.edges[i + 1] < front {
            assert!(g.floored[i] && g.cons[i][0] == RHO_FLOOR);
        } else if g.edges[i] > front {
            assert!(!g.floored[i] && g.cons[i][0] > RHO_FLOOR, "r = {r}");
        }
    }
}

#[test]
fn entropy_jumps_up_across_the_shock() {
    let sol = shock33();
    let mut g = init_from_similarity(sol, -1.0, spec(0.05, 2.0, 256)).unwrap();
    advance(&mut g, sol, -0.8, DEFAULT_CFL).unwrap();
    let front = ShockPaths::of(sol).incoming(-0.8).unwrap();
    let s = entropy_profile(&g);
    let dr = g.spec.dr();
    let ahead = s.iter().zip(&g.centers).filter(|(_, &r)| r < front - 4.0 * dr).map(|(v, _)| *v).fold(0.0, f64::max);
    let behind = s.iter().zip(&g.centers).filter(|(_, &r)| r > front + 4.0 * dr).map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
    assert!(behind > ahead, "{behind} {ahead}");
}

#[test]
fn hllc_resolves_a_stationary_contact_exactly() {
    let (l, r) = ([1.0, 0.0, 0.4], [0.125, 0.0, 0.4]);
    let f = hllc(1.4, &l, &r);
    let exact = flux_of(&GasConfig::shock(1.4, 3).unwrap(), &riemann::sample(1.4, &l, &r, 0.0).unwrap());
    for k in 0..3 {
        assert!((f[k] - exact[k]).abs() < 1e-14);
    }
}

#[test]
fn hllc_matches_godunov_without_a_sonic_fan() {
    let cfg = GasConfig::shock(1.4, 3).unwrap();
    // moving contact, then a fully supersonic pair
    for (l, r) in [([1.0, 0.3, 0.4], [0.125, 0.3, 0.4]), ([1.0, 3.0, 1.0], [0.125, 2.5, 0.1])] {
        let f = hllc(1.4, &l, &r);
        let exact = flux_of(&cfg, &riemann::sample(1.4, &l, &r, 0.0).unwrap());
        for k in 0..3 {
            assert!((f[k] - exact[k]).abs() < 1e-12 * exact[k].abs().max(1.0), "{k}: {} {}", f[k], exact[k]);
        }
    }
}

fn state() -> impl Strategy<Value = [f64; 3]> {
    (0.05f64..5.0, -2.0f64..2.0, 0.05f64..5.0).prop_map(|(a, b, c)| [a, b, c])
}

proptest! {
    #[test]
    fn hllc_is_consistent(w in state(), g in 1.1f64..3.0) {
        let f = hllc(g, &w, &w);
        let e = flux_of(&GasConfig::shock(g, 3).unwrap(), &w);
        for k in 0..3 {
            prop_assert!((f[k] - e[k]).abs() <= 1e-12 * e[k].abs().max(1.0));
        }
    }

    #[test]
    fn hllc_respects_mirror_symmetry(l in state(), r in state(), g in 1.1f64..3.0) {
        let f = hllc(g, &l, &r);
        let m = hllc(g, &[r[0], -r[1], r[2]], &[l[0], -l[1], l[2]]);
        prop_assert!((f[0] + m[0]).abs() <= 1e-12 * f[0].abs().max(1.0));
        prop_assert!((f[1] - m[1]).abs() <= 1e-12 * f[1].abs().max(1.0));
        prop_assert!((f[2] + m[2]).abs() <= 1e-12 * f[2].abs().max(1.0));
    }
}
