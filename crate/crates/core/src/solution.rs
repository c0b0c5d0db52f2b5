//! Assembly of the complete similarity trajectory on (−∞, ∞).

use serde::{Deserialize, Serialize};

use crate::continuation::{arc_b_nodes, asymptotics_check, fit_reflected_shock, ln_k_at, trace_arc_a, ArcA, AsymptoticsReport, ShockFit};
use crate::eigenvalue::{approach_critical, default_bracket, solve_lambda, ShootResult};
use crate::error::{Result, SimError};
use crate::gas::{density_from_integral, FlowKind, GasConfig, LambdaBinding, SimilarityState};
use crate::sim_ode::{cross_origin, run_s, s_nodes, Controls, EventKind, OriginLimits, Piece, PieceKind, Stops, Terminus, TrajEvent, Trajectory, Node};

/// A complete solution: λ, the four smooth pieces and the reflected shock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub cfg: GasConfig,
    pub lam: LambdaBinding,
    pub controls: Controls,
    pub shoot: ShootResult,
    pub trajectory: Trajectory,
    pub origin: OriginLimits,
    pub fit: ShockFit,
    pub asymptotics: AsymptoticsReport,
    /// Arc (a) beyond B up to C = −(1+V), kept for the jump-locus diagnostics.
    pub arc_a_full: ArcA,
}

pub fn solve_and_build(cfg: &GasConfig, ctl: &Controls) -> Result<Solution> {
    let shoot = solve_lambda(cfg, default_bracket(cfg), ctl, 41)?;
    build_solution(cfg, ctl, shoot)
}

pub fn build_solution(cfg: &GasConfig, ctl: &Controls, shoot: ShootResult) -> Result<Solution> {
    ctl.validate()?;
    let lam = LambdaBinding::new(cfg, shoot.lambda_std)?;
    let appr = approach_critical(cfg, &lam, ctl)?;
    let first = appr.nodes[0];
    let ln_k_a = ln_k_at(cfg, &lam, first.x, first.v, first.c, first.lnr);
    let pre = Piece { kind: PieceKind::PreCrossing, nodes: appr.nodes.clone(), ln_k: ln_k_a };

    // crossing to x = −eps_0 on the D > 0 side, then (U, W) to the origin
    let stops = Stops { xi_end: Some(ctl.eps_0.ln()), ..Stops::default() };
    let run = run_s(cfg, &lam, ctl, appr.crossing.relaunch, 1.0, &stops)?;
    if run.terminus != Terminus::XEnd {
        return Err(SimError::Integration {
            t: run.sol.t,
            detail: format!("post-crossing trajectory stopped early ({:?})", run.terminus),
        });
    }
    let mut post_nodes = vec![appr.crossing.node];
    post_nodes.extend(s_nodes(cfg, &lam, &run, -1.0, ctl.max_dxi));
    let y = run.sol.y;
    let near0 = SimilarityState { x: -ctl.eps_0, v: y[0], c: y[1], r: y[3].exp() };
    if let Some(last) = post_nodes.last_mut() {
        last.x = near0.x;
    }
    let (left, _, origin) = cross_origin(cfg, &lam, ctl, &near0)?;
    post_nodes.extend(left.into_iter().skip(1));
    let post = Piece { kind: PieceKind::PostCrossing, nodes: post_nodes, ln_k: ln_k_a };

    // arc (a), reflected shock, arc (b)
    let arc_a_full = trace_arc_a(cfg, &lam, ctl, &origin)?;
    let r_at = |x: f64, v: f64, c: f64| density_from_integral(cfg, &lam, ln_k_a, c / x, v);
    let (fit, arc_b) = fit_reflected_shock(cfg, &lam, ctl, &arc_a_full, r_at)?;
    let b = fit.b;
    let mut a_nodes: Vec<Node> = arc_a_full.nodes.iter().copied().filter(|p| p.x < b).collect();
    let (vb, cb) = fit.pre_state;
    let lnr_b = {
        // carry the integrated density to B from the last kept node
        let last = a_nodes.last().unwrap();
        last.lnr + (r_at(b, vb, cb).ln() - r_at(last.x, last.v, last.c).ln())
    };
    a_nodes.push(Node::from_vc(cfg, &lam, b, vb, cb, lnr_b));
    let arc_a = Piece { kind: PieceKind::ArcA, nodes: a_nodes, ln_k: ln_k_a };

    let ln_r1 = r_at(b, vb, cb).ln() + fit.density_ratio.ln();
    let (v1, c1) = fit.post_state;
    let ln_k_b = ln_k_at(cfg, &lam, b, v1, c1, ln_r1);
    let b_nodes = arc_b_nodes(cfg, &lam, ctl, &fit, &arc_b, ln_r1);
    let asymptotics = asymptotics_check(cfg, &lam, &b_nodes, ln_k_b)?;
    let x_far = b_nodes.last().map(|p| p.x).unwrap_or(b);
    let arc_bp = Piece { kind: PieceKind::ArcB, nodes: b_nodes, ln_k: ln_k_b };

    let start_kind = match cfg.kind {
        FlowKind::Shock => EventKind::IncomingShock,
        FlowKind::Cavity => EventKind::CavityInterface,
    };
    let events = vec![
        TrajEvent { kind: start_kind, x: -1.0 },
        TrajEvent { kind: EventKind::CriticalCrossing, x: appr.crossing.node.x },
        TrajEvent { kind: EventKind::Origin, x: 0.0 },
        TrajEvent { kind: EventKind::ReflectedShock, x: b },
        TrajEvent { kind: EventKind::Asymptote, x: x_far },
    ];
    let trajectory = Trajectory { pieces: vec![pre, post, arc_a, arc_bp], events };
    Ok(Solution { cfg: *cfg, lam, controls: *ctl, shoot, trajectory, origin, fit, asymptotics, arc_a_full })
}

impl Solution {
    pub fn x_c(&self) -> f64 {
        self.trajectory.event_x(EventKind::CriticalCrossing).unwrap()
    }

    pub fn b(&self) -> f64 {
        self.fit.b
    }

    /// Largest x covered by stored arc-(b) nodes; beyond it the series is used.
    pub fn x_far(&self) -> f64 {
        self.trajectory.event_x(EventKind::Asymptote).unwrap()
    }

    fn piece_for(&self, x: f64) -> &Piece {
        let kind = if x <= self.x_c() {
            PieceKind::PreCrossing
        } else if x <= 0.0 {
            PieceKind::PostCrossing
        } else if x < self.b() {
            PieceKind::ArcA
        } else {
            PieceKind::ArcB
        };
        self.trajectory.piece(kind).unwrap()
    }

    /// (V, C, R) at any x. At the reflected shock the post-shock (arc-b) value is returned;
    /// `state_left` gives the arc-(a) side.
    pub fn state(&self, x: f64) -> Result<SimilarityState> {
        if !x.is_finite() {
            return Err(SimError::OutOfRange { x, detail: "non-finite x".into() });
        }
        if x < -1.0 {
            return Ok(self.upstream(x));
        }
        if x > self.x_far() {
            let w = self.fit.k * x.powf(-self.lam.sigma);
            let (v, p) = self.fit.series_coeffs.eval(w);
            let c = -p / w;
            let ln_k = self.trajectory.piece(PieceKind::ArcB).unwrap().ln_k;
            let r = density_from_integral(&self.cfg, &self.lam, ln_k, c / x, v);
            return Ok(SimilarityState { x, v, c, r });
        }
        Ok(self.state_on(self.piece_for(x), x))
    }

    pub fn state_left(&self, x: f64) -> Result<SimilarityState> {
        if x == self.b() {
            return Ok(self.state_on(self.trajectory.piece(PieceKind::ArcA).unwrap(), x));
        }
        if x == -1.0 {
            return Ok(self.upstream(x));
        }
        self.state(x)
    }

    /// Quiescent gas (shock) or vacuum (cavity) ahead of the incoming front.
    fn upstream(&self, x: f64) -> SimilarityState {
        let r = match self.cfg.kind {
            FlowKind::Shock => 1.0,
            FlowKind::Cavity => 0.0,
        };
        SimilarityState { x, v: 0.0, c: 0.0, r }
    }

    fn state_on(&self, piece: &Piece, x: f64) -> SimilarityState {
        let (u, w) = piece.uw_at(x);
        let (v, c) = (x * u, x * w);
        let r = if self.cfg.kind == FlowKind::Cavity && x == -1.0 {
            0.0
        } else {
            density_from_integral(&self.cfg, &self.lam, piece.ln_k, w, v)
        };
        SimilarityState { x, v, c, r }
    }

    /// U = V/x and W = C/x, finite through x = 0.
    pub fn uw(&self, x: f64) -> Result<(f64, f64)> {
        if x < -1.0 {
            return Ok((0.0, 0.0));
        }
        if x > self.x_far() {
            let s = self.state(x)?;
            return Ok((s.v / x, s.c / x));
        }
        Ok(self.piece_for(x).uw_at(x))
    }

    /// (U, W, R) at x in one lookup; the upstream state for x < −1.
    pub fn uwr(&self, x: f64) -> Result<(f64, f64, f64)> {
        if x < -1.0 {
            return Ok((0.0, 0.0, self.upstream(x).r));
        }
        if x > self.x_far() {
            let s = self.state(x)?;
            return Ok((s.v / x, s.c / x, s.r));
        }
        let piece = self.piece_for(x);
        let (u, w) = piece.uw_at(x);
        let r = if self.cfg.kind == FlowKind::Cavity && x == -1.0 {
            0.0
        } else {
            density_from_integral(&self.cfg, &self.lam, piece.ln_k, w, x * u)
        };
        Ok((u, w, r))
    }

    pub fn r0(&self) -> f64 {
        self.origin.lnr0.exp()
    }

    /// Largest relative drift of the integrated density from the exact integral over all pieces.
    pub fn integral_drift(&self) -> f64 {
        self.trajectory.pieces.iter().map(|p| p.integral_drift(&self.cfg, &self.lam)).fold(0.0, f64::max)
    }
}
