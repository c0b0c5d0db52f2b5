//! Similarity ODEs, their regularized forms, and traversal of the singular sets.
//!
//! Away from the critical lines the system is carried in an arc parameter s:
//!
//! ```text
//! dV/ds = o G,   dC/ds = o F,   dξ/ds = -o λ D,   d lnR/ds = -o [(κ+n) V D + G] / (1+V)
//! ```
//!
//! with ξ = ln|x| and o = ±1 chosen so ξ moves the desired way. Near x = 0 the
//! variables U = V/x, W = C/x satisfy a system in x that is regular at the
//! origin, so the star point is integrated straight through.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::gas::{eval_d, gf_unchecked, jacobian_gf, GasConfig, LambdaBinding, SimilarityState};
use crate::rk::{integrate, Dopri, Event, RkSolution, Stop};

/// Numerical controls shared by the construction stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Controls {
    pub rtol: f64,
    pub atol: f64,
    /// Phase-space offset used to step across the critical point.
    pub eps_c: f64,
    /// Offset of the cavity launch from the saddle (−1, 0) in (V, C²).
    pub eps_s: f64,
    /// Half-width of the window around x = 0 integrated in (U, W).
    pub eps_0: f64,
    /// Radius of the ball around a critical point used by the shooting residual.
    pub shoot_ball: f64,
    pub shoot_tol: f64,
    /// Maximum node spacing in ln|x| for stored pieces.
    pub max_dxi: f64,
    pub series_order: usize,
    pub w_start: f64,
}

impl Default for Controls {
    fn default() -> Self {
        Controls {
            rtol: 1e-10,
            atol: 1e-12,
            eps_c: 1e-6,
            eps_s: 1e-7,
            eps_0: 0.05,
            shoot_ball: 1e-5,
            shoot_tol: 1e-10,
            max_dxi: 0.02,
            series_order: 12,
            w_start: 1e-4,
        }
    }
}

impl Controls {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &'static str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(crate::error::invalid(name, format!("must be positive, got {v}")))
            }
        };
        pos(self.rtol, "rtol")?;
        pos(self.atol, "atol")?;
        pos(self.eps_c, "eps_c")?;
        pos(self.eps_s, "eps_s")?;
        pos(self.eps_0, "eps_0")?;
        pos(self.shoot_ball, "shoot_ball")?;
        pos(self.shoot_tol, "shoot_tol")?;
        pos(self.max_dxi, "max_dxi")?;
        pos(self.w_start, "w_start")?;
        if self.eps_0 >= 0.5 {
            return Err(crate::error::invalid("eps_0", "origin window must be below 0.5"));
        }
        if self.series_order < 1 || self.series_order > 40 {
            return Err(crate::error::invalid("series_order", "must lie in 1..=40"));
        }
        Ok(())
    }
}

/// (dV/dx, dC/dx) of the similarity system.
pub fn rhs(cfg: &GasConfig, lam: &LambdaBinding, x: f64, v: f64, c: f64) -> Result<(f64, f64)> {
    if x == 0.0 {
        return Err(SimError::Singular("x = 0 is the star point; use the origin crossing".into()));
    }
    let d = eval_d(v, c);
    if d == 0.0 {
        return Err(SimError::Singular(format!("D = 0 on the critical line at ({v}, {c})")));
    }
    let (g, f) = gf_unchecked(cfg, lam, v, c);
    let k = -1.0 / (lam.lambda * x * d);
    Ok((k * g, k * f))
}

/// d/dx of (U, W, lnR) with U = V/x and W = C/x; regular at x = 0.
pub fn uw_rhs(cfg: &GasConfig, lam: &LambdaBinding, x: f64, u: f64, w: f64) -> [f64; 3] {
    let n = cfg.nf();
    let l = lam.lambda;
    let y = x * u;
    let opv = 1.0 + y;
    let d = opv * opv - x * x * w * w;
    let w2 = w * w;
    let du = (-w2 * (n * y + lam.b) + (1.0 - l) * u * u * opv + l * x * u * w2) / (l * d);
    let sp = cfg.s() * (l - 1.0) / (cfg.gamma * opv);
    let dw = -w * (x * w2 * (1.0 - l + sp) + u * (2.0 * l - 2.0 * lam.a1 + lam.a2) + x * u * u * (l - lam.a1)) / (l * d);
    let g_over_x = x * w2 * (n * y + lam.b) - u * opv * (l + y);
    let dlnr = ((lam.kappa + n) * u + g_over_x / d) / (l * opv);
    [du, dw, dlnr]
}

/// Right-hand side of the regularized system in s for state [V, C, ξ, lnR].
#[inline]
pub(crate) fn s_rhs(cfg: &GasConfig, lam: &LambdaBinding, o: f64, y: &[f64; 4]) -> [f64; 4] {
    let (v, c) = (y[0], y[1]);
    let (g, f) = gf_unchecked(cfg, lam, v, c);
    let d = eval_d(v, c);
    let dl = -o * ((lam.kappa + cfg.nf()) * v * d + g) / (1.0 + v);
    [o * g, o * f, -o * lam.lambda * d, dl]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PieceKind {
    PreCrossing,
    PostCrossing,
    ArcA,
    ArcB,
}

impl PieceKind {
    pub fn id(self) -> u32 {
        match self {
            PieceKind::PreCrossing => 0,
            PieceKind::PostCrossing => 1,
            PieceKind::ArcA => 2,
            PieceKind::ArcB => 3,
        }
    }
}

/// A stored trajectory node. `lnr` is the integrated log-density, kept
/// alongside the exact-integral reconstruction so the two can be compared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub x: f64,
    pub v: f64,
    pub c: f64,
    pub lnr: f64,
    pub u: f64,
    pub w: f64,
    pub du: f64,
    pub dw: f64,
}

impl Node {
    pub fn from_vc(cfg: &GasConfig, lam: &LambdaBinding, x: f64, v: f64, c: f64, lnr: f64) -> Node {
        let (u, w) = (v / x, c / x);
        let [du, dw, _] = uw_rhs(cfg, lam, x, u, w);
        Node { x, v, c, lnr, u, w, du, dw }
    }

    pub fn from_uw(cfg: &GasConfig, lam: &LambdaBinding, x: f64, u: f64, w: f64, lnr: f64) -> Node {
        let [du, dw, _] = uw_rhs(cfg, lam, x, u, w);
        Node { x, v: x * u, c: x * w, lnr, u, w, du, dw }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub kind: PieceKind,
    pub nodes: Vec<Node>,
    /// ln of the exact-integral constant on this piece.
    pub ln_k: f64,
}

impl Piece {
    pub fn x_range(&self) -> (f64, f64) {
        (self.nodes[0].x, self.nodes[self.nodes.len() - 1].x)
    }

    /// Hermite-cubic (U, W) at x, which must lie in the node range.
    pub fn uw_at(&self, x: f64) -> (f64, f64) {
        let nd = &self.nodes;
        let i = nd.partition_point(|p| p.x <= x).clamp(1, nd.len() - 1);
        let (a, b) = (&nd[i - 1], &nd[i]);
        let h = b.x - a.x;
        if h == 0.0 {
            return (a.u, a.w);
        }
        let t = ((x - a.x) / h).clamp(0.0, 1.0);
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        (
            h00 * a.u + h10 * h * a.du + h01 * b.u + h11 * h * b.du,
            h00 * a.w + h10 * h * a.dw + h01 * b.w + h11 * h * b.dw,
        )
    }

    /// Largest relative deviation of the integrated density from the exact integral.
    pub fn integral_drift(&self, cfg: &GasConfig, lam: &LambdaBinding) -> f64 {
        let vals: Vec<f64> = self
            .nodes
            .iter()
            .filter(|p| p.w != 0.0)
            .map(|p| crate::gas::log_entropy_integral(cfg, lam, p.lnr, p.w, p.v))
            .collect();
        let base = vals[0];
        vals.iter().map(|v| (v - base).exp_m1().abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    IncomingShock,
    CavityInterface,
    CriticalCrossing,
    Origin,
    ReflectedShock,
    Asymptote,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajEvent {
    pub kind: EventKind,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub pieces: Vec<Piece>,
    pub events: Vec<TrajEvent>,
}

impl Trajectory {
    pub fn piece(&self, kind: PieceKind) -> Option<&Piece> {
        self.pieces.iter().find(|p| p.kind == kind)
    }

    pub fn event_x(&self, kind: EventKind) -> Option<f64> {
        self.events.iter().find(|e| e.kind == kind).map(|e| e.x)
    }

    /// Rows (x, V, C, lnR, piece id, event flag) in x order.
    pub fn csv_rows(&self) -> Vec<(f64, f64, f64, f64, u32, Option<EventKind>)> {
        let mut out = Vec::new();
        for p in &self.pieces {
            for nd in &p.nodes {
                let ev = self.events.iter().find(|e| e.x == nd.x).map(|e| e.kind);
                out.push((nd.x, nd.v, nd.c, nd.lnr, p.kind.id(), ev));
            }
        }
        out
    }
}

/// Why an s-integration stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terminus {
    /// D reached zero away from any watched critical point.
    CriticalLine,
    /// Entered the ball around watched point `i`.
    Ball(usize),
    /// |x| reached the requested end.
    XEnd,
    /// Parameter budget exhausted (the flow settled somewhere else).
    SLimit,
    /// |C| exceeded the guard.
    Guard,
    /// Closest approach to watched saddle `i` without entering its ball.
    Near(usize),
    /// Entered the neighbourhood of (V, C) = (−1, 0).
    Corner,
}

/// Stopping rules for a regularized run.
#[derive(Debug, Clone)]
pub struct Stops {
    pub balls: Vec<(f64, f64, f64)>,
    pub stop_on_d_zero: bool,
    pub xi_end: Option<f64>,
    pub s_max: f64,
    pub c_guard: f64,
    /// Closest-approach watches (V, C, radius).
    pub near: Vec<(f64, f64, f64)>,
    /// Radius of the stop around (−1, 0), armed only on approach.
    pub corner: Option<f64>,
}

impl Default for Stops {
    fn default() -> Self {
        Stops { balls: Vec::new(), stop_on_d_zero: true, xi_end: None, s_max: 1e4, c_guard: 1e6, near: Vec::new(), corner: None }
    }
}

/// Outcome of a regularized run: the RK record plus the reason for stopping.
pub struct SRun {
    pub sol: RkSolution<4>,
    pub terminus: Terminus,
    pub orientation: f64,
}

/// Integrate the regularized system from y0 = [V, C, ξ, lnR] with orientation o.
pub fn run_s(cfg: &GasConfig, lam: &LambdaBinding, ctl: &Controls, y0: [f64; 4], o: f64, stops: &Stops) -> Result<SRun> {
    let dp = Dopri::<4>::new(ctl.rtol, ctl.atol).with_h_max(0.5);
    let mut events: Vec<Event<'_, 4>> = Vec::new();
    let d0 = eval_d(y0[0], y0[1]);
    let mut idx_d = usize::MAX;
    if stops.stop_on_d_zero {
        idx_d = events.len();
        let dir = if d0 < 0.0 { 1 } else { -1 };
        events.push(Event::new(dir, |_, y: &[f64; 4]| eval_d(y[0], y[1])));
    }
    let mut idx_x = usize::MAX;
    if let Some(xe) = stops.xi_end {
        idx_x = events.len();
        let dir = if xe > y0[2] { 1 } else { -1 };
        events.push(Event::new(dir, move |_, y: &[f64; 4]| y[2] - xe));
    }
    let idx_g = events.len();
    let guard = stops.c_guard;
    events.push(Event::new(1, move |_, y: &[f64; 4]| y[1].abs() - guard));
    let idx_b = events.len();
    for &(bv, bc, rad) in &stops.balls {
        events.push(Event::new(-1, move |_, y: &[f64; 4]| (y[0] - bv).hypot(y[1] - bc) - rad));
    }
    let idx_n = events.len();
    for &(bv, bc, rad) in &stops.near {
        events.push(Event::new(1, move |_, y: &[f64; 4]| {
            let (dv, dc) = (y[0] - bv, y[1] - bc);
            let r = dv.hypot(dc);
            if r >= rad {
                return -1.0;
            }
            let f = s_rhs(cfg, lam, o, y);
            (dv * f[0] + dc * f[1]) / (r * f[0].hypot(f[1])).max(1e-300)
        }));
    }
    let idx_c = events.len();
    if let Some(rc) = stops.corner {
        events.push(Event::new(-1, move |_, y: &[f64; 4]| (1.0 + y[0]).hypot(y[1]) - rc));
    }
    let sol = integrate(&dp, |_, y| s_rhs(cfg, lam, o, y), 0.0, y0, stops.s_max, &events)?;
    let terminus = match sol.stop {
        Stop::End => Terminus::SLimit,
        Stop::Event(i) if i == idx_d => Terminus::CriticalLine,
        Stop::Event(i) if i == idx_x => Terminus::XEnd,
        Stop::Event(i) if i == idx_g => Terminus::Guard,
        Stop::Event(i) if i >= idx_c => Terminus::Corner,
        Stop::Event(i) if i >= idx_n => Terminus::Near(i - idx_n),
        Stop::Event(i) => Terminus::Ball(i - idx_b),
    };
    Ok(SRun { sol, terminus, orientation: o })
}

/// Convert a regularized run into nodes with spacing at most `max_dxi` in ξ.
pub fn s_nodes(cfg: &GasConfig, lam: &LambdaBinding, run: &SRun, sign_x: f64, max_dxi: f64) -> Vec<Node> {
    let mut out = Vec::new();
    let mut push = |y: &[f64; 4]| {
        let x = sign_x * y[2].exp();
        out.push(Node::from_vc(cfg, lam, x, y[0], y[1], y[3]));
    };
    if let Some(first) = run.sol.steps.first() {
        push(&first.y0);
    } else {
        push(&run.sol.y);
        return out;
    }
    for st in &run.sol.steps {
        let dxi = (st.y1[2] - st.y0[2]).abs();
        let k = (dxi / max_dxi).ceil().max(1.0) as usize;
        for j in 1..k {
            push(&st.eval(j as f64 / k as f64));
        }
        push(&st.y1);
    }
    out
}

/// Integrate the (U, W, lnR) system in x from x0 to x1, returning nodes.
pub fn run_uw(
    cfg: &GasConfig,
    lam: &LambdaBinding,
    ctl: &Controls,
    x0: f64,
    y0: [f64; 3],
    x1: f64,
) -> Result<(Vec<Node>, [f64; 3])> {
    let span = (x1 - x0).abs();
    let dp = Dopri::<3>::new(ctl.rtol, ctl.atol).with_h_max(span / 16.0);
    let guard = Event::new(-1, |x: f64, y: &[f64; 3]| {
        let v = x * y[0];
        let c = x * y[1];
        eval_d(v, c).abs() - 1e-8
    });
    let sol = integrate(&dp, |x, y| uw_rhs(cfg, lam, x, y[0], y[1]), x0, y0, x1, &[guard])?;
    if sol.stop != Stop::End {
        return Err(SimError::Integration { t: sol.t, detail: "critical line reached inside the origin window".into() });
    }
    let max_dx = ctl.max_dxi * ctl.eps_0;
    let mut nodes = vec![Node::from_uw(cfg, lam, x0, y0[0], y0[1], y0[2])];
    for st in &sol.steps {
        let k = (st.h.abs() / max_dx).ceil().max(1.0) as usize;
        for j in 1..=k {
            let y = if j == k { st.y1 } else { st.eval(j as f64 / k as f64) };
            let x = if j == k { st.t1() } else { st.t0 + st.h * j as f64 / k as f64 };
            nodes.push(Node::from_uw(cfg, lam, x, y[0], y[1], y[2]));
        }
    }
    let last = nodes.len() - 1;
    nodes[last].x = x1;
    Ok((nodes, sol.y))
}

/// Real critical points on C = 1 + V with V > −1, sorted by V.
pub fn critical_points(cfg: &GasConfig, lam: &LambdaBinding) -> Vec<(f64, f64)> {
    let n = cfg.nf();
    let (a, b, c) = (n - 1.0, n + lam.b - lam.lambda, lam.b);
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    // stable quadratic roots
    let qq = -0.5 * (b + b.signum() * sq);
    let mut r = vec![qq / a, if qq != 0.0 { c / qq } else { -b / a - qq / a }];
    r.sort_by(|x, y| x.partial_cmp(y).unwrap());
    r.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    r.into_iter().filter(|&v| v > -1.0).map(|v| (v, 1.0 + v)).collect()
}

/// Linearization at a common zero of F and G.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeLinearization {
    pub point: (f64, f64),
    /// Eigenvalues of ∂(G, F)/∂(V, C); `None` in the complex case.
    pub mu: Option<(f64, f64)>,
    /// Unit eigenvectors for the smaller and larger |μ|.
    pub e_slow: (f64, f64),
    pub e_fast: (f64, f64),
}

pub fn linearize(cfg: &GasConfig, lam: &LambdaBinding, v: f64, c: f64) -> NodeLinearization {
    let j = jacobian_gf(cfg, lam, v, c);
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr / 4.0 - det;
    if disc < 0.0 {
        return NodeLinearization { point: (v, c), mu: None, e_slow: (0.0, 0.0), e_fast: (0.0, 0.0) };
    }
    let sq = disc.sqrt();
    let (m1, m2) = (tr / 2.0 - sq, tr / 2.0 + sq);
    let (ms, mf) = if m1.abs() <= m2.abs() { (m1, m2) } else { (m2, m1) };
    let vec_for = |mu: f64| {
        // (J - μ I) e = 0; choose the better-conditioned row
        let (a, b) = (j[0][0] - mu, j[0][1]);
        let (c2, d2) = (j[1][0], j[1][1] - mu);
        let e = if a.hypot(b) >= c2.hypot(d2) { (-b, a) } else { (-d2, c2) };
        let nrm = e.0.hypot(e.1);
        if nrm == 0.0 {
            (1.0, 0.0)
        } else {
            (e.0 / nrm, e.1 / nrm)
        }
    };
    NodeLinearization { point: (v, c), mu: Some((ms, mf)), e_slow: vec_for(ms), e_fast: vec_for(mf) }
}

/// Candidate slopes dC/dV at a common zero from the L'Hôpital quadratic
/// G_C μ² + (G_V − F_C) μ − F_V = 0.
pub fn lhopital_slopes(cfg: &GasConfig, lam: &LambdaBinding, v: f64, c: f64) -> Option<(f64, f64)> {
    let j = jacobian_gf(cfg, lam, v, c);
    let (a, b, cc) = (j[0][1], j[0][0] - j[1][1], -j[1][0]);
    let disc = b * b - 4.0 * a * cc;
    if disc < 0.0 || a == 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    Some(((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)))
}

/// Result of stepping across a critical point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub node: Node,
    /// Relaunch state [V, C, ξ, lnR] on the D > 0 side.
    pub relaunch: [f64; 4],
    pub slope: f64,
    pub mu: f64,
}

/// Analytic continuation through a critical point approached at `approach`.
///
/// The eigendirection best aligned with the incoming chord is followed; ξ and
/// lnR are carried linearly along it, which is exact to first order because
/// dξ/dσ = −λ (∇D·e)/μ is constant on the eigenline.
pub fn cross_critical(cfg: &GasConfig, lam: &LambdaBinding, ctl: &Controls, approach: &[f64; 4], point: (f64, f64), sign_x: f64) -> Result<Crossing> {
    let (vs, cs) = point;
    let (g, f) = gf_unchecked(cfg, lam, vs, cs);
    let scale = 1e-9;
    if g.abs() > scale || f.abs() > scale || eval_d(vs, cs).abs() > scale {
        return Err(SimError::NotCritical(format!("G = {g:e}, F = {f:e} at ({vs}, {cs})")));
    }
    let lin = linearize(cfg, lam, vs, cs);
    let (ms, mf) = lin.mu.ok_or_else(|| SimError::NotCritical("complex eigenvalues: spiral point".into()))?;
    let chord = (approach[0] - vs, approach[1] - cs);
    let cn = chord.0.hypot(chord.1);
    if cn == 0.0 || cn > 100.0 * ctl.eps_c.max(ctl.shoot_ball) {
        return Err(SimError::NotCritical(format!("approach point is {cn:e} from the critical point")));
    }
    let dot = |e: (f64, f64)| (e.0 * chord.0 + e.1 * chord.1) / cn;
    let (e, mu) = if dot(lin.e_fast).abs() >= dot(lin.e_slow).abs() { (lin.e_fast, mf) } else { (lin.e_slow, ms) };
    let gd = 2.0 * (1.0 + vs) * e.0 - 2.0 * cs * e.1;
    if gd.abs() < 1e-12 {
        return Err(SimError::NotCritical("eigendirection tangent to the critical line".into()));
    }
    let dxi_ds = -lam.lambda * gd / mu;
    let sig_end = chord.0 * e.0 + chord.1 * e.1;
    let xi_c = approach[2] - sig_end * dxi_ds;
    // d lnR/dξ at the node, with G/D → μ e_V / (∇D·e)
    let dlnr_dxi = ((lam.kappa + cfg.nf()) * vs + mu * e.0 / gd) / (lam.lambda * (1.0 + vs));
    let lnr_c = approach[3] - sig_end * dxi_ds * dlnr_dxi;
    let xc = sign_x * xi_c.exp();
    let dv_dxi = -mu * e.0 / (lam.lambda * gd);
    let dc_dxi = -mu * e.1 / (lam.lambda * gd);
    let (u, w) = (vs / xc, cs / xc);
    let node = Node {
        x: xc,
        v: vs,
        c: cs,
        lnr: lnr_c,
        u,
        w,
        du: (dv_dxi / xc - u) / xc,
        dw: (dc_dxi / xc - w) / xc,
    };
    let sj = ctl.eps_c * gd.signum();
    let relaunch = [vs + sj * e.0, cs + sj * e.1, xi_c + sj * dxi_ds, lnr_c + sj * dxi_ds * dlnr_dxi];
    Ok(Crossing { node, relaunch, slope: e.1 / e.0, mu })
}

/// Limits at the origin recorded by the crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginLimits {
    pub ell: f64,
    pub big_l: f64,
    pub lnr0: f64,
}

/// Cross x = 0 from x = −eps_0 to x = +eps_0 in (U, W, lnR).
pub fn cross_origin(cfg: &GasConfig, lam: &LambdaBinding, ctl: &Controls, approach: &SimilarityState) -> Result<(Vec<Node>, Vec<Node>, OriginLimits)> {
    let x0 = approach.x;
    if !(x0 < 0.0) {
        return Err(SimError::Origin(format!("approach must have x < 0, got {x0}")));
    }
    let y0 = [approach.v / x0, approach.c / x0, approach.r.ln()];
    let (left, at0) = run_uw(cfg, lam, ctl, x0, y0, 0.0)?;
    let (right, _) = run_uw(cfg, lam, ctl, 0.0, at0, -x0)?;
    let lim = OriginLimits { ell: at0[0], big_l: at0[1], lnr0: at0[2] };
    if !(lim.ell.is_finite() && lim.big_l.is_finite()) {
        return Err(SimError::Origin("non-finite limits".into()));
    }
    Ok((left, right, lim))
}

/// Richardson estimate of lim V/x from samples (x_i, V_i/x_i) approaching 0,
/// assuming an expansion U(x) = ℓ + a x + b x² + ….
pub fn richardson_limit(samples: &[(f64, f64)]) -> f64 {
    // Neville extrapolation to x = 0
    let n = samples.len();
    let mut p: Vec<f64> = samples.iter().map(|s| s.1).collect();
    for k in 1..n {
        for i in 0..n - k {
            let (xi, xk) = (samples[i].0, samples[i + k].0);
            p[i] = (xk * p[i] - xi * p[i + 1]) / (xk - xi);
        }
    }
    p[0]
}

/// Generic piece integration from `start` toward `x_end` in the regularized
/// variables, stopping at the critical line if it is reached first.
pub fn integrate_piece(cfg: &GasConfig, lam: &LambdaBinding, ctl: &Controls, start: &SimilarityState, x_end: f64) -> Result<(Vec<Node>, Terminus)> {
    if start.x == 0.0 || x_end == 0.0 || start.x.signum() != x_end.signum() {
        return Err(SimError::Singular("piece endpoints must share a sign and avoid x = 0".into()));
    }
    let d = eval_d(start.v, start.c);
    if d == 0.0 {
        return Err(SimError::Singular("start lies on the critical line".into()));
    }
    let xi0 = start.x.abs().ln();
    let xi1 = x_end.abs().ln();
    let o = -(xi1 - xi0).signum() * d.signum();
    let stops = Stops { xi_end: Some(xi1), ..Stops::default() };
    let run = run_s(cfg, lam, ctl, [start.v, start.c, xi0, start.r.ln()], o, &stops)?;
    let nodes = s_nodes(cfg, lam, &run, start.x.signum(), ctl.max_dxi);
    Ok((nodes, run.terminus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas::shock_launch;

    fn setup() -> (GasConfig, LambdaBinding) {
        let cfg = GasConfig::shock(3.0, 3).unwrap();
        (cfg, LambdaBinding::new(&cfg, 1.5713126233).unwrap())
    }

    #[test]
    fn rhs_signals() {
        let (cfg, lam) = setup();
        assert!(rhs(&cfg, &lam, 0.0, -0.5, 0.8).is_err());
        assert!(rhs(&cfg, &lam, -0.5, -0.4, 0.6).is_err());
        let (a, b) = rhs(&cfg, &lam, -1.0, -0.5, 0.75f64.sqrt()).unwrap();
        assert!(a.is_finite() && b.is_finite());
        let (a2, _) = rhs(&cfg, &lam, -1e6, -0.5, 0.75f64.sqrt()).unwrap();
        assert!(a2.abs() < 1e-5);
    }

    #[test]
    fn uw_form_matches_direct_form() {
        let (cfg, lam) = setup();
        for &(x, v, c) in &[(-0.6, -0.4, 0.9), (0.3, 0.02, -0.5), (2.0, -0.1, -1.4)] {
            let (dv, dc) = rhs(&cfg, &lam, x, v, c).unwrap();
            let [du, dw, _] = uw_rhs(&cfg, &lam, x, v / x, c / x);
            assert!((du - (dv - v / x) / x).abs() < 1e-11 * (1.0 + du.abs()));
            assert!((dw - (dc - c / x) / x).abs() < 1e-11 * (1.0 + dw.abs()));
        }
    }

    #[test]
    fn lnr_rate_preserves_exact_integral() {
        let (cfg, lam) = setup();
        let (x, v, c) = (-0.6, -0.4, 0.9);
        let [du, dw, dl] = uw_rhs(&cfg, &lam, x, v / x, c / x);
        let (dv, _) = rhs(&cfg, &lam, x, v, c).unwrap();
        let w = c / x;
        // d/dx of (q+1-γ) lnR + 2 ln|W| + q ln|1+V| must vanish
        let total = (lam.q + 1.0 - cfg.gamma) * dl + 2.0 * dw / w + lam.q * dv / (1.0 + v);
        assert!(total.abs() < 1e-12, "{total}");
        let _ = du;
    }

    #[test]
    fn critical_points_and_slopes() {
        let (cfg, lam) = setup();
        let pts = critical_points(&cfg, &lam);
        assert_eq!(pts.len(), 2);
        for &(v, c) in &pts {
            let (g, f) = gf_unchecked(&cfg, &lam, v, c);
            assert!(g.abs() < 1e-14 && f.abs() < 1e-14);
            let lin = linearize(&cfg, &lam, v, c);
            let slopes = lhopital_slopes(&cfg, &lam, v, c).unwrap();
            for e in [lin.e_slow, lin.e_fast] {
                let s = e.1 / e.0;
                let best = (s - slopes.0).abs().min((s - slopes.1).abs());
                assert!(best < 1e-9 * (1.0 + s.abs()), "{s} vs {slopes:?}");
            }
        }
    }

    #[test]
    fn launch_integrates_to_the_critical_line() {
        let (cfg, lam) = setup();
        let (v, c, r) = shock_launch(&cfg);
        let start = SimilarityState { x: -1.0, v, c, r };
        let ctl = Controls::default();
        let (nodes, term) = integrate_piece(&cfg, &lam, &ctl, &start, -1e-12).unwrap();
        assert!(matches!(term, Terminus::CriticalLine | Terminus::SLimit));
        let last = nodes.last().unwrap();
        assert!(last.x > -1.0 && last.x < 0.0);
    }

    #[test]
    fn neville_recovers_polynomial_limit() {
        let s: Vec<(f64, f64)> = [0.1, 0.05, 0.025, 0.0125].iter().map(|&x| (x, 0.3 + 2.0 * x - x * x)).collect();
        assert!((richardson_limit(&s) - 0.3).abs() < 1e-13);
    }
}
