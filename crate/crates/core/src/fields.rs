//! Physical fields ρ, u, c, p, e at (t, r) from a constructed solution.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::gas::{eos_fields, FlowKind};
use crate::solution::Solution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    Quiescent,
    Vacuum,
    PreCollapseFluid,
    PostCollapsePreShock,
    PostCollapsePostShock,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::Quiescent => "quiescent",
            Region::Vacuum => "vacuum",
            Region::PreCollapseFluid => "pre-collapse-fluid",
            Region::PostCollapsePreShock => "post-collapse-pre-shock",
            Region::PostCollapsePostShock => "post-collapse-post-shock",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub t: f64,
    pub r: f64,
    pub rho: f64,
    pub u: f64,
    pub c: f64,
    pub p: f64,
    pub e: f64,
    pub region: Region,
}

/// Which side of a front to sample when (t, r) lies exactly on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// The larger-x side (behind the incoming shock, behind the reflected shock).
    Default,
    /// The smaller-x side (ahead of either front).
    Ahead,
}

pub fn sample(sol: &Solution, t: f64, r: f64) -> Result<FlowSample> {
    sample_side(sol, t, r, Side::Default)
}

pub fn sample_side(sol: &Solution, t: f64, r: f64, side: Side) -> Result<FlowSample> {
    if !(r > 0.0) || !t.is_finite() {
        return Err(invalid("r", format!("need r > 0 and finite t, got (t, r) = ({t}, {r})")));
    }
    let lam = sol.lam.lambda;
    let x = t / r.powf(lam);
    let ahead = side == Side::Ahead;
    let on_shock_a = ahead && x == -1.0;
    if x < -1.0 || on_shock_a {
        let region = match sol.cfg.kind {
            FlowKind::Shock => Region::Quiescent,
            FlowKind::Cavity => Region::Vacuum,
        };
        let rho = if region == Region::Quiescent { 1.0 } else { 0.0 };
        return Ok(FlowSample { t, r, rho, u: 0.0, c: 0.0, p: 0.0, e: 0.0, region });
    }
    let st = if ahead { sol.state_left(x)? } else { sol.state(x)? };
    let (uu, ww) = if x > sol.x_far() { (st.v / x, st.c / x) } else if ahead && x == sol.b() { (st.v / x, st.c / x) } else { sol.uw(x)? };
    let k = -r.powf(1.0 - lam) / lam;
    let u = k * uu;
    let c = k * ww;
    let rho = r.powf(sol.lam.kappa) * st.r;
    let (p, e, _) = eos_fields(&sol.cfg, rho, c)?;
    let region = if x < 0.0 {
        Region::PreCollapseFluid
    } else if x < sol.b() || (ahead && x == sol.b()) {
        Region::PostCollapsePreShock
    } else {
        Region::PostCollapsePostShock
    };
    Ok(FlowSample { t, r, rho, u, c: c.abs(), p, e, region })
}

/// One row of the collapse-time profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseRow {
    pub r: f64,
    pub rho: f64,
    pub u: f64,
    pub c: f64,
    pub p: f64,
}

/// Profiles at t = 0 and their fitted log-log slopes (u, c, p).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseProfile {
    pub rows: Vec<CollapseRow>,
    pub slope_u: f64,
    pub slope_c: f64,
    pub slope_p: f64,
}

pub fn collapse_profile(sol: &Solution, rs: &[f64]) -> Result<CollapseProfile> {
    if rs.len() < 2 {
        return Err(invalid("r-grid", "need at least two radii"));
    }
    let mut rows = Vec::with_capacity(rs.len());
    for &r in rs {
        let s = sample(sol, 0.0, r)?;
        rows.push(CollapseRow { r, rho: s.rho, u: s.u, c: s.c, p: s.p });
    }
    let fit = |g: &dyn Fn(&CollapseRow) -> f64| {
        let pts: Vec<(f64, f64)> = rows.iter().map(|w| (w.r.ln(), g(w).abs().ln())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
    };
    Ok(CollapseProfile { slope_u: fit(&|w| w.u), slope_c: fit(&|w| w.c), slope_p: fit(&|w| w.p), rows })
}

/// Incoming path r_i(t) = (−t)^{1/λ} and reflected path r_o(t) = (t/B)^{1/λ}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockPaths {
    pub lambda: f64,
    pub b: f64,
}

impl ShockPaths {
    pub fn of(sol: &Solution) -> ShockPaths {
        ShockPaths { lambda: sol.lam.lambda, b: sol.b() }
    }

    pub fn incoming(&self, t: f64) -> Result<f64> {
        if !(t < 0.0) {
            return Err(SimError::Domain(format!("incoming front exists for t < 0 only, got t = {t}")));
        }
        Ok((-t).powf(1.0 / self.lambda))
    }

    pub fn outgoing(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(SimError::Domain(format!("reflected front exists for t > 0 only, got t = {t}")));
        }
        Ok((t / self.b).powf(1.0 / self.lambda))
    }

    /// dr/dt along the incoming (t < 0) or reflected (t > 0) front.
    pub fn speed(&self, t: f64) -> Result<f64> {
        let r = if t < 0.0 { self.incoming(t)? } else { self.outgoing(t)? };
        Ok(r / (self.lambda * t))
    }
}

/// Largest relative mismatch of the physical mass, momentum and energy fluxes
/// across the front at time t, in the frame moving with the front.
pub fn physical_jump_residual(sol: &Solution, t: f64) -> Result<f64> {
    let paths = ShockPaths::of(sol);
    let (r, s) = if t < 0.0 { (paths.incoming(t)?, paths.speed(t)?) } else { (paths.outgoing(t)?, paths.speed(t)?) };
    let a = sample_side(sol, t, r, Side::Ahead)?;
    let b = sample_side(sol, t, r, Side::Default)?;
    let flux = |q: &FlowSample| {
        let w = q.u - s;
        let en = q.rho * (q.e + 0.5 * q.u * q.u);
        [q.rho * w, q.rho * q.u * w + q.p, en * w + q.p * q.u]
    };
    let (fa, fb) = (flux(&a), flux(&b));
    let scale = [
        fa[0].abs().max(fb[0].abs()),
        (a.rho * s * s).max(b.p).max(a.p) + fa[1].abs(),
        fa[2].abs().max(fb[2].abs()).max(b.p * b.u.abs()),
    ];
    Ok((0..3).map(|i| (fa[i] - fb[i]).abs() / scale[i]).fold(0.0, f64::max))
}

/// Relative drift of p ρ^{−γ} along a particle path dr/dt = u traced by RK4.
pub fn particle_entropy_drift(sol: &Solution, t0: f64, r0: f64, t1: f64, steps: usize) -> Result<f64> {
    let g = sol.cfg.gamma;
    let s0 = sample(sol, t0, r0)?;
    let ent = |q: &FlowSample| q.p * q.rho.powf(-g);
    let e0 = ent(&s0);
    let region = s0.region;
    let h = (t1 - t0) / steps as f64;
    let u = |t: f64, r: f64| -> Result<f64> { Ok(sample(sol, t, r)?.u) };
    let (mut t, mut r) = (t0, r0);
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let k1 = u(t, r)?;
        let k2 = u(t + 0.5 * h, r + 0.5 * h * k1)?;
        let k3 = u(t + 0.5 * h, r + 0.5 * h * k2)?;
        let k4 = u(t + h, r + h * k3)?;
        r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
        let q = sample(sol, t, r)?;
        if q.region != region {
            return Err(SimError::Domain(format!("particle left the {} region at t = {t}", region.name())));
        }
        worst = worst.max((ent(&q) / e0 - 1.0).abs());
    }
    Ok(worst)
}

/// Characteristic check along x = x_c at time t < 0: returns
/// (|1 + V − C| at x_c, |dr/dt − (u − c)| / |dr/dt|).
pub fn characteristic_residual(sol: &Solution, t: f64) -> Result<(f64, f64)> {
    if !(t < 0.0) {
        return Err(SimError::Domain("the critical curve x = x_c lies in t < 0".into()));
    }
    let xc = sol.x_c();
    let st = sol.state(xc)?;
    let lam = sol.lam.lambda;
    let r = (t / xc).powf(1.0 / lam);
    let drdt = r / (lam * t);
    let q = sample(sol, t, r)?;
    Ok(((1.0 + st.v - st.c).abs(), (drdt - (q.u - q.c)).abs() / drdt.abs()))
}
