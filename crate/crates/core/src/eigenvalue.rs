//! Shooting for the similarity exponent λ_std.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::gas::{eval_d, shock_launch, FlowKind, GasConfig, LambdaBinding, SimilarityState};
use crate::sim_ode::{critical_points, cross_critical, linearize, run_s, s_nodes, Controls, Crossing, Node, NodeLinearization, Stops, Terminus};

/// Magnitude of the sentinel residuals.
pub const SENTINEL: f64 = 1e3;

/// Launch point of the pre-collapse trajectory just inside x = −1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Launch {
    pub state: SimilarityState,
    pub xi: f64,
    pub lnr: f64,
}

/// Slope dZ/dV, Z = C², of the cavity exit direction from the saddle (−1, 0).
pub fn cavity_exit_slope(cfg: &GasConfig, lambda: f64) -> Result<f64> {
    let g = cfg.gamma;
    let n = cfg.nf();
    let den = n * (g - 1.0) - 2.0 * (lambda - 1.0);
    if den <= 0.0 {
        return Err(SimError::ExitDirection { lambda, limit: cfg.lambda_limit() });
    }
    Ok(g * (g - 1.0) * (lambda - 1.0) / den)
}

pub fn launch_state(cfg: &GasConfig, lam: &LambdaBinding, ctl: &Controls) -> Result<Launch> {
    match cfg.kind {
        FlowKind::Shock => {
            let (v, c, r) = shock_launch(cfg);
            Ok(Launch { state: SimilarityState { x: -1.0, v, c, r }, xi: 0.0, lnr: r.ln() })
        }
        FlowKind::Cavity => {
            let l = lam.lambda;
            let k = cavity_exit_slope(cfg, l)?;
            let delta = ctl.eps_s / (1.0 + k * k).sqrt();
            let v = -1.0 + delta;
            let c = (k * delta).sqrt();
            // ξ from dξ/dV = λ k / ((λ−1) + k (b − n)) along the exit direction
            let xi = delta * l * k / ((l - 1.0) + k * (lam.b - cfg.nf()));
            let x = -xi.exp();
            let lnr = 2.0 / (cfg.gamma - 1.0) * (c / x).abs().ln();
            Ok(Launch { state: SimilarityState { x, v, c, r: lnr.exp() }, xi, lnr })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualKind {
    /// Hit the critical line away from every critical point.
    Hit,
    /// Entered the ball around a real node; the value is the oriented slow component.
    Ball,
    /// Entered the ball around a focus (complex eigenvalues).
    Spiral,
    /// Hit the critical line while no real critical point exists.
    ComplexHit,
    /// Passed a saddle at closest approach without entering its ball.
    Near,
    /// Never reached the critical line.
    NoHit,
}

impl ResidualKind {
    pub fn is_continuous(self) -> bool {
        matches!(self, ResidualKind::Ball)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub lambda: f64,
    pub value: f64,
    pub kind: ResidualKind,
    pub root: Option<usize>,
}

/// Radius of the neighbourhood where residuals use the eigenbasis of a real critical point.
const NEAR: f64 = 0.05;
const CORNER: f64 = 1e-3;
const CLASS_DEPTH: usize = 24;
const CLASS_WIDTH: f64 = 1e-7;

fn pre_stops(pts: &[(f64, f64)], radius: f64, saddles: &[(f64, f64)]) -> Stops {
    Stops {
        balls: pts.iter().map(|&(v, c)| (v, c, radius)).collect(),
        stop_on_d_zero: true,
        xi_end: Some(-60.0),
        s_max: 2e4,
        c_guard: 1e6,
        near: saddles.iter().map(|&(v, c)| (v, c, NEAR)).collect(),
        corner: Some(CORNER),
    }
}

/// Oriented eigenbasis for the residual at a real critical point.
///
/// Node: the measured direction is the slow eigenvector, pointing toward D < 0.
/// Saddle: the measured direction is the one the pre-crossing flow leaves along,
/// pointing toward D > 0. Returns (e_measured, e_other, is_saddle).
fn residual_basis(lin: &NodeLinearization, o: f64) -> Option<((f64, f64), (f64, f64), bool)> {
    let (ms, mf) = lin.mu?;
    let (pv, pc) = lin.point;
    let grad = |e: (f64, f64)| 2.0 * (1.0 + pv) * e.0 - 2.0 * pc * e.1;
    let flip = |e: (f64, f64)| (-e.0, -e.1);
    if ms * mf < 0.0 {
        // o·μ > 0 grows along the s-flow
        let (mut eu, es) = if o * ms > 0.0 { (lin.e_slow, lin.e_fast) } else { (lin.e_fast, lin.e_slow) };
        if grad(eu) < 0.0 {
            eu = flip(eu);
        }
        Some((eu, es, true))
    } else {
        let mut e = lin.e_slow;
        if grad(e) > 0.0 {
            e = flip(e);
        }
        Some((e, lin.e_fast, false))
    }
}

fn component(off: (f64, f64), e: (f64, f64), other: (f64, f64)) -> f64 {
    (off.0 * other.1 - off.1 * other.0) / (e.0 * other.1 - e.1 * other.0)
}

/// Signed shooting residual at λ.
///
/// Inside the ball of radius `shoot_ball` around a real critical point the value
/// is the measured eigen-component of the entry offset over the radius, so a zero
/// is entry along the fast direction of a node or along the incoming separatrix of
/// a saddle. Near misses of a saddle and hits of the critical line close to a
/// real critical point use the same component over the offset length. Remote
/// hits return C_hit − C*; spirals, complex-root hits and no-hit runs return
/// ±1e3 sentinels.
pub fn shoot_residual(cfg: &GasConfig, lambda: f64, ctl: &Controls) -> Result<Residual> {
    let lam = LambdaBinding::new(cfg, lambda)?;
    let launch = launch_state(cfg, &lam, ctl)?;
    let pts = critical_points(cfg, &lam);
    let o = -1.0;
    let lins: Vec<NodeLinearization> = pts.iter().map(|&(v, c)| linearize(cfg, &lam, v, c)).collect();
    let bases: Vec<_> = lins.iter().map(|l| residual_basis(l, o)).collect();
    let saddle_idx: Vec<usize> = (0..pts.len()).filter(|&i| matches!(bases[i], Some((_, _, true)))).collect();
    let saddles: Vec<(f64, f64)> = saddle_idx.iter().map(|&i| pts[i]).collect();
    let rho = ctl.shoot_ball;
    let tight = Controls { rtol: ctl.rtol.min(1e-11), atol: ctl.atol.min(1e-14), ..*ctl };
    let y0 = [launch.state.v, launch.state.c, launch.xi, launch.lnr];
    let run = run_s(cfg, &lam, &tight, y0, o, &pre_stops(&pts, rho, &saddles)).map_err(|e| match e {
        SimError::Integration { t, detail } => SimError::Integration { t, detail: format!("lambda = {lambda}: {detail}") },
        other => other,
    })?;
    let y = run.sol.y;
    let res = |value, kind, root| Residual { lambda, value, kind, root };
    let measured = |i: usize| -> Option<f64> {
        let (e, other, _) = bases[i]?;
        let off = (y[0] - pts[i].0, y[1] - pts[i].1);
        Some(component(off, e, other) / off.0.hypot(off.1))
    };
    Ok(match run.terminus {
        Terminus::Ball(i) => match bases[i] {
            None => res(-SENTINEL, ResidualKind::Spiral, Some(i)),
            Some((e, other, _)) => {
                let off = (y[0] - pts[i].0, y[1] - pts[i].1);
                res(component(off, e, other) / rho, ResidualKind::Ball, Some(i))
            }
        },
        Terminus::Near(k) => {
            let i = saddle_idx[k];
            res(measured(i).unwrap_or(SENTINEL), ResidualKind::Near, Some(i))
        }
        Terminus::CriticalLine => {
            if y[1] < 0.0 {
                res(SENTINEL, ResidualKind::NoHit, None)
            } else if pts.is_empty() {
                res(-SENTINEL, ResidualKind::ComplexHit, None)
            } else {
                let (i, p) = pts
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (a.1 .0 - y[0]).abs().partial_cmp(&(b.1 .0 - y[0]).abs()).unwrap())
                    .unwrap();
                let dist = (y[0] - p.0).hypot(y[1] - p.1);
                match measured(i) {
                    Some(m) if dist < NEAR => res(m, ResidualKind::Hit, Some(i)),
                    _ => res(y[1] - p.1, ResidualKind::Hit, Some(i)),
                }
            }
        }
        Terminus::XEnd | Terminus::SLimit | Terminus::Guard | Terminus::Corner => res(SENTINEL, ResidualKind::NoHit, None),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootResult {
    pub lambda_std: f64,
    pub crossing_point: (f64, f64),
    /// Which common zero was crossed: 0 for the smaller V, 1 for the larger.
    pub crossing_root: usize,
    pub x_c: f64,
    /// (slow, fast) eigenvalues of the crossed point; None for a focus
    pub eigenvalues: Option<(f64, f64)>,
    pub crossing_slope: f64,
    pub bracket_history: Vec<(f64, i8)>,
    pub converged: bool,
}

/// Default bracket (1.01, λ_max − 1e−6).
pub fn default_bracket(cfg: &GasConfig) -> (f64, f64) {
    (1.01, cfg.lambda_limit() - 1e-6)
}

fn sign(r: f64) -> i8 {
    if r > 0.0 {
        1
    } else if r < 0.0 {
        -1
    } else {
        0
    }
}

fn refine(cfg: &GasConfig, ctl: &Controls, mut a: Residual, mut b: Residual, hist: &mut Vec<(f64, i8)>) -> Result<(Residual, Residual)> {
    let tol = ctl.shoot_tol;
    let mut stuck = 0i32;
    for _ in 0..400 {
        if (b.lambda - a.lambda).abs() <= tol {
            break;
        }
        let mid = 0.5 * (a.lambda + b.lambda);
        let mut m = mid;
        if a.kind.is_continuous() && b.kind.is_continuous() && stuck.abs() < 2 {
            let s = (a.lambda * b.value - b.lambda * a.value) / (b.value - a.value);
            let w = b.lambda - a.lambda;
            if s.is_finite() && s > a.lambda + 1e-3 * w.abs().min(tol) && s < b.lambda - 1e-3 * w.abs().min(tol) {
                m = s;
            }
        }
        let r = shoot_residual(cfg, m, ctl)?;
        hist.push((m, sign(r.value)));
        if r.value == 0.0 {
            return Ok((r, r));
        }
        if sign(r.value) == sign(a.value) {
            a = r;
            stuck = if stuck < 0 { stuck - 1 } else { -1 };
        } else {
            b = r;
            stuck = if stuck > 0 { stuck + 1 } else { 1 };
        }
    }
    Ok((a, b))
}

/// Bracket scan plus bisection/regula-falsi refinement.
pub fn solve_lambda(cfg: &GasConfig, bracket: (f64, f64), ctl: &Controls, n_scan: usize) -> Result<ShootResult> {
    ctl.validate()?;
    let (lo, hi) = bracket;
    if !(lo > 1.0 && hi > lo) {
        return Err(crate::error::invalid("bracket", format!("need 1 < lo < hi, got ({lo}, {hi})")));
    }
    if hi >= cfg.lambda_limit() {
        return Err(crate::error::invalid("bracket", format!("upper end must stay below {}", cfg.lambda_limit())));
    }
    let n_scan = n_scan.max(2);
    let grid: Vec<f64> = (0..n_scan).map(|i| lo + (hi - lo) * i as f64 / (n_scan - 1) as f64).collect();
    let mut scan: Vec<Residual> = grid.par_iter().map(|&l| shoot_residual(cfg, l, ctl)).collect::<Result<Vec<_>>>()?;
    // Subdivide where the residual changes class without changing sign: a narrow
    // continuous window (e.g. just past a focus-to-node transition) hides there.
    for _ in 0..CLASS_DEPTH {
        let mids: Vec<f64> = scan
            .windows(2)
            .filter(|p| (p[0].kind != p[1].kind || p[0].root != p[1].root) && sign(p[0].value) == sign(p[1].value))
            .filter(|p| p[1].lambda - p[0].lambda > CLASS_WIDTH)
            .map(|p| 0.5 * (p[0].lambda + p[1].lambda))
            .collect();
        if mids.is_empty() {
            break;
        }
        let extra: Vec<Residual> = mids.par_iter().map(|&l| shoot_residual(cfg, l, ctl)).collect::<Result<Vec<_>>>()?;
        scan.extend(extra);
        scan.sort_by(|a, b| a.lambda.partial_cmp(&b.lambda).unwrap());
    }
    let mut hist: Vec<(f64, i8)> = scan.iter().map(|r| (r.lambda, sign(r.value))).collect();
    let mut rejected = Vec::new();
    for pair in scan.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if sign(a.value) * sign(b.value) >= 0 {
            continue;
        }
        let (ra, rb) = refine(cfg, ctl, a, b, &mut hist)?;
        if ra.kind.is_continuous() && rb.kind.is_continuous() && ra.root == rb.root {
            let lambda = if ra.value == rb.value {
                ra.lambda
            } else {
                let w = (ra.lambda * rb.value - rb.lambda * ra.value) / (rb.value - ra.value);
                if w.is_finite() { w.clamp(ra.lambda.min(rb.lambda), ra.lambda.max(rb.lambda)) } else { 0.5 * (ra.lambda + rb.lambda) }
            };
            let lamb = LambdaBinding::new(cfg, lambda)?;
            let appr = approach_critical(cfg, &lamb, ctl)?;
            let lin = linearize(cfg, &lamb, appr.point.0, appr.point.1);
            return Ok(ShootResult {
                lambda_std: lambda,
                crossing_point: appr.point,
                crossing_root: appr.root,
                x_c: appr.crossing.node.x,
                eigenvalues: lin.mu,
                crossing_slope: appr.crossing.slope,
                bracket_history: hist,
                converged: (ra.lambda - rb.lambda).abs() <= ctl.shoot_tol * 1.0001,
            });
        }
        rejected.push(format!("discontinuity near {:.9} ({:?} | {:?})", 0.5 * (ra.lambda + rb.lambda), ra.kind, rb.kind));
    }
    let detail = if rejected.is_empty() {
        "residual keeps one sign over the scan".to_string()
    } else {
        format!("only residual discontinuities found: {}", rejected.join("; "))
    };
    Err(SimError::NoRoot { lo, hi, detail })
}

/// Pre-crossing trajectory up to the critical point and the step across it.
#[derive(Debug, Clone)]
pub struct Approach {
    pub nodes: Vec<Node>,
    pub crossing: Crossing,
    pub point: (f64, f64),
    pub root: usize,
}

pub fn approach_critical(cfg: &GasConfig, lam: &LambdaBinding, ctl: &Controls) -> Result<Approach> {
    let launch = launch_state(cfg, lam, ctl)?;
    let pts = critical_points(cfg, lam);
    let y0 = [launch.state.v, launch.state.c, launch.xi, launch.lnr];
    let run = run_s(cfg, lam, ctl, y0, -1.0, &pre_stops(&pts, ctl.eps_c, &[]))?;
    let i = match run.terminus {
        Terminus::Ball(i) => i,
        t => {
            return Err(SimError::Integration {
                t: run.sol.t,
                detail: format!("pre-crossing trajectory did not reach a critical point ({t:?}) at lambda = {}", lam.lambda),
            })
        }
    };
    let mut nodes = s_nodes(cfg, lam, &run, -1.0, ctl.max_dxi);
    let crossing = cross_critical(cfg, lam, ctl, &run.sol.y, pts[i], -1.0)?;
    if !(crossing.node.x > nodes.last().unwrap().x) {
        return Err(SimError::NotCritical("extrapolated crossing does not advance x".into()));
    }
    nodes.push(crossing.node);
    debug_assert!(eval_d(crossing.relaunch[0], crossing.relaunch[1]) > 0.0);
    Ok(Approach { nodes, crossing, point: pts[i], root: i })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cavity_launch_geometry() {
        let cfg = GasConfig::cavity(3.0, 3).unwrap();
        assert!((cavity_exit_slope(&cfg, 2.0).unwrap() - 1.5).abs() < 1e-15);
        assert!(matches!(cavity_exit_slope(&cfg, 4.0), Err(SimError::ExitDirection { .. })));
        let lam = LambdaBinding::new(&cfg, 1.4).unwrap();
        let l = launch_state(&cfg, &lam, &Controls::default()).unwrap();
        assert!(l.state.v > -1.0 && l.state.v < -1.0 + 1e-6);
        assert!(l.state.c > 0.0 && l.state.c < 1e-3);
        assert!(l.state.x < -1.0 + 1e-5 && l.state.x > -1.0);
    }

    #[test]
    fn shock_bracket_signs() {
        let cfg = GasConfig::shock(3.0, 3).unwrap();
        let ctl = Controls::default();
        let a = shoot_residual(&cfg, 1.40, &ctl).unwrap();
        let b = shoot_residual(&cfg, 1.70, &ctl).unwrap();
        assert!(a.value < 0.0 && b.value > 0.0, "{a:?} {b:?}");
        let c = shoot_residual(&cfg, 1.5713126233, &ctl).unwrap();
        assert_eq!(c.kind, ResidualKind::Ball);
    }
}
