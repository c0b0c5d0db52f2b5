//! Radial finite-volume Euler solver used to cross-check the similarity flows.
//!
//! MUSCL-Hancock in primitive variables with minmod slopes, HLLC interface
//! fluxes and the pressure source m p r^{m−1} balanced against the face areas.
//! Two ghost cells per side carry exact cell averages at the current time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::fields::{sample, FlowSample};
use crate::gas::GasConfig;
use crate::solution::Solution;

pub mod riemann;

/// Density floor applied to vacuum cells.
pub const RHO_FLOOR: f64 = 1e-12;
pub const DEFAULT_CFL: f64 = 0.45;
const GHOST: usize = 2;
const MAX_HALVINGS: usize = 30;

/// Gauss–Legendre 5-point nodes and weights on [−1, 1].
const GL5: [(f64, f64); 5] = [
    (-0.906179845938664, 0.236926885056189),
    (-0.538469310105683, 0.478628670499366),
    (0.0, 0.568888888888889),
    (0.538469310105683, 0.478628670499366),
    (0.906179845938664, 0.236926885056189),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub n_cells: usize,
}

/// Cell averages of (ρ, ρu, E) over r^m dr on a uniform radial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub spec: GridSpec,
    pub gamma: f64,
    pub m: u32,
    pub t: f64,
    pub edges: Vec<f64>,
    pub centers: Vec<f64>,
    pub cons: Vec<[f64; 3]>,
    /// cells clamped to the density floor in the last step
    pub floored: Vec<bool>,
    pub stats: FvStats,
}

/// Bookkeeping accumulated by [`advance`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FvStats {
    pub steps: usize,
    pub rejected: usize,
    /// ∫ (mass flux in at r_min − out at r_max) dt, area-weighted
    pub boundary_mass: f64,
    /// total floor clamps (each one breaks exact conservation)
    pub floor_events: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0) {
            return Err(SimError::Domain(format!("grid must stay away from r = 0, got r_min = {}", self.r_min)));
        }
        if !(self.r_max > self.r_min) {
            return Err(invalid("r_max", "must exceed r_min"));
        }
        if self.n_cells < 8 {
            return Err(invalid("n_cells", "need at least 8 cells"));
        }
        Ok(())
    }

    pub fn dr(&self) -> f64 {
        (self.r_max - self.r_min) / self.n_cells as f64
    }
}

fn to_prim(g: f64, u: &[f64; 3]) -> [f64; 3] {
    let rho = u[0];
    if !(rho > 0.0) {
        return [rho.max(0.0), 0.0, 0.0];
    }
    let v = u[1] / rho;
    let p = ((g - 1.0) * (u[2] - 0.5 * rho * v * v)).max(0.0);
    [rho, v, p]
}

fn to_cons(g: f64, w: &[f64; 3]) -> [f64; 3] {
    [w[0], w[0] * w[1], w[2] / (g - 1.0) + 0.5 * w[0] * w[1] * w[1]]
}

fn phys_flux(g: f64, w: &[f64; 3]) -> [f64; 3] {
    let e = w[2] / (g - 1.0) + 0.5 * w[0] * w[1] * w[1];
    [w[0] * w[1], w[0] * w[1] * w[1] + w[2], (e + w[2]) * w[1]]
}

fn sound(g: f64, w: &[f64; 3]) -> f64 {
    if w[0] > 0.0 {
        (g * w[2] / w[0]).sqrt()
    } else {
        0.0
    }
}

/// HLLC flux with Davis wave-speed estimates.
pub fn hllc(g: f64, wl: &[f64; 3], wr: &[f64; 3]) -> [f64; 3] {
    let (cl, cr) = (sound(g, wl), sound(g, wr));
    let sl = (wl[1] - cl).min(wr[1] - cr);
    let sr = (wl[1] + cl).max(wr[1] + cr);
    let fl = phys_flux(g, wl);
    let fr = phys_flux(g, wr);
    if sl >= 0.0 {
        return fl;
    }
    if sr <= 0.0 {
        return fr;
    }
    let (ml, mr) = (wl[0] * (sl - wl[1]), wr[0] * (sr - wr[1]));
    let den = ml - mr;
    if den == 0.0 {
        return [0.5 * (fl[0] + fr[0]), 0.5 * (fl[1] + fr[1]), 0.5 * (fl[2] + fr[2])];
    }
    let ss = (wr[2] - wl[2] + wl[1] * ml - wr[1] * mr) / den;
    let star = |w: &[f64; 3], s: f64, f: [f64; 3]| -> [f64; 3] {
        let u = to_cons(g, w);
        let k = w[0] * (s - w[1]) / (s - ss);
        let e = u[2] / w[0];
        let us = [k, k * ss, k * (e + (ss - w[1]) * (ss + w[2] / (w[0] * (s - w[1]))))];
        [f[0] + s * (us[0] - u[0]), f[1] + s * (us[1] - u[1]), f[2] + s * (us[2] - u[2])]
    };
    if ss >= 0.0 {
        star(wl, sl, fl)
    } else {
        star(wr, sr, fr)
    }
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// r^m-weighted cell average of (ρ, ρu, E) from exact samples, split at `cuts`.
fn exact_average(sol: &Solution, t: f64, a: f64, b: f64, cuts: &[f64]) -> Result<[f64; 3]> {
    let g = sol.cfg.gamma;
    let m = sol.cfg.m() as i32;
    let mut pts = vec![a, b];
    pts.extend(cuts.iter().copied().filter(|&c| c > a && c < b));
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut acc = [0.0; 3];
    let mut vol = 0.0;
    for w in pts.windows(2) {
        let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for (x, wt) in GL5 {
            let r = c + h * x;
            let s = sample(sol, t, r)?;
            let q = to_cons(g, &[s.rho, s.u, s.p]);
            let jw = wt * h * r.powi(m);
            for k in 0..3 {
                acc[k] += jw * q[k];
            }
            vol += jw;
        }
    }
    Ok([acc[0] / vol, acc[1] / vol, acc[2] / vol])
}

/// Radii of the fronts present at time t.
fn front_radii(sol: &Solution, t: f64) -> Vec<f64> {
    let lam = sol.lam.lambda;
    if t < 0.0 {
        vec![(-t).powf(1.0 / lam)]
    } else if t > 0.0 {
        vec![(t / sol.b()).powf(1.0 / lam)]
    } else {
        vec![]
    }
}

fn cell_volume(m: u32, a: f64, b: f64) -> f64 {
    let n = (m + 1) as i32;
    (b.powi(n) - a.powi(n)) / n as f64
}

pub fn init_from_similarity(sol: &Solution, t_start: f64, spec: GridSpec) -> Result<RadialGrid> {
    if t_start == 0.0 {
        return Err(SimError::Domain("cannot start at the collapse time t = 0".into()));
    }
    spec.validate()?;
    let dr = spec.dr();
    let edges: Vec<f64> = (0..=spec.n_cells).map(|i| spec.r_min + dr * i as f64).collect();
    let centers: Vec<f64> = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let cuts = front_radii(sol, t_start);
    let cons = edges
        .par_windows(2)
        .map(|w| exact_average(sol, t_start, w[0], w[1], &cuts))
        .collect::<Result<Vec<_>>>()?;
    let mut grid = RadialGrid {
        spec,
        gamma: sol.cfg.gamma,
        m: sol.cfg.m(),
        t: t_start,
        floored: vec![false; spec.n_cells],
        edges,
        centers,
        cons,
        stats: FvStats::default(),
    };
    for i in 0..grid.cons.len() {
        if grid.cons[i][0] < RHO_FLOOR {
            grid.cons[i] = [RHO_FLOOR, 0.0, 0.0];
            grid.floored[i] = true;
        }
    }
    Ok(grid)
}

impl RadialGrid {
    pub fn primitive(&self, i: usize) -> [f64; 3] {
        to_prim(self.gamma, &self.cons[i])
    }

    /// Σ ρ̄_i V_i.
    pub fn total_mass(&self) -> f64 {
        self.edges.windows(2).zip(&self.cons).map(|(w, q)| q[0] * cell_volume(self.m, w[0], w[1])).sum()
    }

    fn ghosts(&self, sol: &Solution, t: f64) -> Result<([[f64; 3]; GHOST], [[f64; 3]; GHOST])> {
        let dr = self.spec.dr();
        let cuts = front_radii(sol, t);
        let mut lo = [[0.0; 3]; GHOST];
        let mut hi = [[0.0; 3]; GHOST];
        for k in 0..GHOST {
            let a = self.spec.r_min - dr * (k + 1) as f64;
            lo[k] = exact_average(sol, t, a.max(1e-3 * dr), a + dr, &cuts)?;
            let b = self.spec.r_max + dr * k as f64;
            hi[k] = exact_average(sol, t, b, b + dr, &cuts)?;
        }
        for q in lo.iter_mut().chain(hi.iter_mut()) {
            if q[0] < RHO_FLOOR {
                *q = [RHO_FLOOR, 0.0, 0.0];
            }
        }
        Ok((lo, hi))
    }

    fn max_speed(&self) -> f64 {
        (0..self.cons.len()).map(|i| { let w = self.primitive(i); w[1].abs() + sound(self.gamma, &w) }).fold(0.0, f64::max)
    }

    /// One MUSCL-Hancock step; returns None when positivity would be lost.
    fn try_step(&self, lo: &[[f64; 3]; GHOST], hi: &[[f64; 3]; GHOST], dt: f64) -> Option<(Vec<[f64; 3]>, f64)> {
        let g = self.gamma;
        let n = self.cons.len();
        let dr = self.spec.dr();
        let mf = self.m as f64;
        // primitive states with ghosts: index j ↔ cell j − GHOST
        let mut w: Vec<[f64; 3]> = Vec::with_capacity(n + 2 * GHOST);
        for k in (0..GHOST).rev() {
            w.push(to_prim(g, &lo[k]));
        }
        w.extend((0..n).map(|i| self.primitive(i)));
        for q in hi.iter() {
            w.push(to_prim(g, q));
        }
        let rc = |j: usize| self.spec.r_min + dr * (j as f64 - GHOST as f64 + 0.5);
        // evolved face states (left face, right face) per extended cell
        let faces: Vec<([f64; 3], [f64; 3])> = (0..w.len())
            .into_par_iter()
            .with_min_len(256)
            .map(|j| {
                let c = w[j];
                let mut d = [0.0; 3];
                if j > 0 && j + 1 < w.len() {
                    for k in 0..3 {
                        d[k] = minmod(c[k] - w[j - 1][k], w[j + 1][k] - c[k]);
                    }
                }
                let r = rc(j).max(0.5 * dr);
                let (rho, u, p) = (c[0], c[1], c[2]);
                let dd = if rho > 0.0 {
                    [
                        u * d[0] + rho * d[1] + mf * rho * u * dr / r,
                        u * d[1] + d[2] / rho,
                        g * p * d[1] + u * d[2] + mf * g * p * u * dr / r,
                    ]
                } else {
                    [0.0; 3]
                };
                let s = 0.5 * dt / dr;
                let mut l = [0.0; 3];
                let mut rr = [0.0; 3];
                for k in 0..3 {
                    l[k] = c[k] - 0.5 * d[k] - s * dd[k];
                    rr[k] = c[k] + 0.5 * d[k] - s * dd[k];
                }
                if l[0] <= 0.0 || rr[0] <= 0.0 || l[2] < 0.0 || rr[2] < 0.0 {
                    // fall back to first order in this cell
                    return (c, c);
                }
                (l, rr)
            })
            .collect();
        // flux at interface between extended cells j and j+1, for j = GHOST−1 ..= GHOST+n−1
        let fluxes: Vec<[f64; 3]> = (GHOST - 1..GHOST + n)
            .into_par_iter()
            .with_min_len(256)
            .map(|j| hllc(g, &faces[j].1, &faces[j + 1].0))
            .collect();
        let area = |r: f64| r.powi(self.m as i32);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = (self.edges[i], self.edges[i + 1]);
            let vol = cell_volume(self.m, a, b);
            let (fa, fb) = (fluxes[i], fluxes[i + 1]);
            let (aa, ab) = (area(a), area(b));
            let (fl, fr) = faces[i + GHOST];
            let ph = 0.5 * (fl[2] + fr[2]);
            let mut q = self.cons[i];
            for k in 0..3 {
                q[k] -= dt / vol * (ab * fb[k] - aa * fa[k]);
            }
            q[1] += dt / vol * ph * (ab - aa);
            if !(q[0].is_finite() && q[1].is_finite() && q[2].is_finite()) || q[0] < 0.0 {
                return None;
            }
            let kin = if q[0] > 0.0 { 0.5 * q[1] * q[1] / q[0] } else { 0.0 };
            if q[2] - kin < -1e-10 * q[2].abs().max(kin) - 1e-300 && q[0] > RHO_FLOOR {
                return None;
            }
            out.push(q);
        }
        let boundary = dt * (area(self.edges[0]) * fluxes[0][0] - area(self.edges[n]) * fluxes[n][0]);
        Some((out, boundary))
    }
}

/// Advance from grid.t to t_end with Dirichlet data from the exact solution.
pub fn advance(grid: &mut RadialGrid, sol: &Solution, t_end: f64, cfl: f64) -> Result<()> {
    if !(t_end > grid.t) {
        return Err(invalid("t_end", format!("must exceed the current time {}", grid.t)));
    }
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(invalid("cfl", format!("must lie in (0, 1], got {cfl}")));
    }
    let dr = grid.spec.dr();
    while grid.t < t_end {
        let (lo, hi) = grid.ghosts(sol, grid.t)?;
        let smax = grid
            .max_speed()
            .max(lo.iter().chain(hi.iter()).map(|q| { let w = to_prim(grid.gamma, q); w[1].abs() + sound(grid.gamma, &w) }).fold(0.0, f64::max));
        let mut dt = if smax > 0.0 { cfl * dr / smax } else { t_end - grid.t };
        if grid.t + dt > t_end {
            dt = t_end - grid.t;
        }
        if grid.t < 0.0 && grid.t + dt > 0.0 {
            dt = -grid.t;
        }
        let mut tries = 0;
        let (new, boundary) = loop {
            if let Some(r) = grid.try_step(&lo, &hi, dt) {
                break r;
            }
            tries += 1;
            grid.stats.rejected += 1;
            if tries > MAX_HALVINGS {
                return Err(SimError::Fv { t: grid.t, detail: format!("positivity lost after {MAX_HALVINGS} halvings of dt") });
            }
            dt *= 0.5;
        };
        grid.cons = new;
        grid.stats.boundary_mass += boundary;
        for i in 0..grid.cons.len() {
            let q = &mut grid.cons[i];
            grid.floored[i] = false;
            if q[0] < RHO_FLOOR {
                *q = [RHO_FLOOR, 0.0, 0.0];
                grid.floored[i] = true;
                grid.stats.floor_events += 1;
            } else {
                let kin = 0.5 * q[1] * q[1] / q[0];
                if q[2] < kin {
                    q[2] = kin;
                }
            }
        }
        grid.t += dt;
        if (t_end - grid.t).abs() <= 1e-14 * t_end.abs().max(1.0) {
            grid.t = t_end;
        }
        grid.stats.steps += 1;
    }
    Ok(())
}

/// Per-variable differences against exact cell averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub t: f64,
    /// r^m-weighted L¹ norms of (ρ, u, p) errors
    pub l1: [f64; 3],
    pub linf: [f64; 3],
    /// r^m-weighted L¹ norm of the exact density, for relative errors
    pub rho_l1: f64,
    pub cells_used: usize,
}

impl ErrorNorms {
    pub fn rho_relative(&self) -> f64 {
        self.l1[0] / self.rho_l1
    }
}

/// Exact r^m-weighted cell averages of (ρ, ρu, E) on the grid at time t.
pub fn exact_cells(sol: &Solution, grid: &RadialGrid, t: f64) -> Result<Vec<[f64; 3]>> {
    let cuts = front_radii(sol, t);
    grid.edges.par_windows(2).map(|w| exact_average(sol, t, w[0], w[1], &cuts)).collect()
}

fn norms(grid: &RadialGrid, exact: &[[f64; 3]]) -> ErrorNorms {
    let g = grid.gamma;
    let mut l1 = [0.0; 3];
    let mut linf = [0.0f64; 3];
    let mut rho_l1 = 0.0;
    let mut used = 0;
    for i in 0..grid.cons.len() {
        if grid.floored[i] || exact[i][0] < RHO_FLOOR {
            continue;
        }
        used += 1;
        let vol = cell_volume(grid.m, grid.edges[i], grid.edges[i + 1]);
        let a = grid.primitive(i);
        let b = to_prim(g, &exact[i]);
        for k in 0..3 {
            let d = (a[k] - b[k]).abs();
            l1[k] += d * vol;
            linf[k] = linf[k].max(d);
        }
        rho_l1 += b[0].abs() * vol;
    }
    ErrorNorms { t: grid.t, l1, linf, rho_l1, cells_used: used }
}

pub fn error_norms(grid: &RadialGrid, sol: &Solution) -> Result<ErrorNorms> {
    let exact = exact_cells(sol, grid, grid.t)?;
    Ok(norms(grid, &exact))
}

/// Error norms of one grid against another's cell averages (self-comparison gives 0).
pub fn error_norms_against(grid: &RadialGrid, reference: &RadialGrid) -> ErrorNorms {
    norms(grid, &reference.cons)
}

/// Radius where the density first rises through the midpoint between the
/// undisturbed value and the largest value behind it, scanning outward.
pub fn shock_location(grid: &RadialGrid) -> Option<f64> {
    let rho: Vec<f64> = grid.cons.iter().map(|q| q[0]).collect();
    let base = rho[0];
    let top = rho.iter().copied().fold(base, f64::max);
    let mid = 0.5 * (base + top);
    for i in 1..rho.len() {
        if rho[i - 1] < mid && rho[i] >= mid {
            let f = (mid - rho[i - 1]) / (rho[i] - rho[i - 1]);
            return Some(grid.centers[i - 1] + f * (grid.centers[i] - grid.centers[i - 1]));
        }
    }
    None
}

/// p ρ^{−γ} per cell.
pub fn entropy_profile(grid: &RadialGrid) -> Vec<f64> {
    (0..grid.cons.len())
        .map(|i| { let w = grid.primitive(i); if w[0] > 0.0 { w[2] * w[0].powf(-grid.gamma) } else { 0.0 } })
        .collect()
}

/// One CSV row of a snapshot: numerical and exact primitives at a cell center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub r: f64,
    pub rho: f64,
    pub u: f64,
    pub p: f64,
    pub rho_exact: f64,
    pub u_exact: f64,
    pub p_exact: f64,
}

pub fn snapshot(grid: &RadialGrid, sol: &Solution) -> Result<Vec<SnapshotRow>> {
    let exact = exact_cells(sol, grid, grid.t)?;
    Ok((0..grid.cons.len())
        .map(|i| {
            let a = grid.primitive(i);
            let b = to_prim(grid.gamma, &exact[i]);
            SnapshotRow { r: grid.centers[i], rho: a[0], u: a[1], p: a[2], rho_exact: b[0], u_exact: b[1], p_exact: b[2] }
        })
        .collect())
}

/// Result of one cross-validation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossvalRun {
    pub n_cells: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub norms: ErrorNorms,
    pub shock_numeric: Option<f64>,
    pub shock_exact: f64,
    /// |numeric − exact| / Δr
    pub shock_offset_cells: f64,
    /// |Δ total mass − boundary flux| / total mass
    pub mass_defect: f64,
    pub steps: usize,
}

/// Runs one grid; also returns the final grid for snapshots.
pub fn crossval_run(sol: &Solution, spec: GridSpec, t_start: f64, t_end: f64, cfl: f64) -> Result<(CrossvalRun, RadialGrid)> {
    let mut grid = init_from_similarity(sol, t_start, spec)?;
    let m0 = grid.total_mass();
    advance(&mut grid, sol, t_end, cfl)?;
    let defect = ((grid.total_mass() - m0) - grid.stats.boundary_mass).abs() / grid.total_mass();
    let norms = error_norms(&grid, sol)?;
    let shock_exact = front_radii(sol, t_end).first().copied().unwrap_or(f64::NAN);
    let shock_numeric = shock_location(&grid);
    let off = shock_numeric.map_or(f64::INFINITY, |s| (s - shock_exact).abs() / spec.dr());
    let run = CrossvalRun {
        n_cells: spec.n_cells,
        t_start,
        t_end,
        norms,
        shock_numeric,
        shock_exact,
        shock_offset_cells: off,
        mass_defect: defect,
        steps: grid.stats.steps,
    };
    Ok((run, grid))
}

/// Exact primitive (ρ, u, p) of a field sample.
pub fn primitive_of(s: &FlowSample) -> [f64; 3] {
    [s.rho, s.u, s.p]
}

/// Conserved (ρ, ρu, E) from primitives, exposed for tests.
pub fn conserved_of(cfg: &GasConfig, w: &[f64; 3]) -> [f64; 3] {
    to_cons(cfg.gamma, w)
}

/// Physical flux of a primitive state, exposed for tests.
pub fn flux_of(cfg: &GasConfig, w: &[f64; 3]) -> [f64; 3] {
    phys_flux(cfg.gamma, w)
}
