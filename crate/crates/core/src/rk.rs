//! Dormand-Prince 5(4) with continuous output and located events.

use crate::error::{Result, SimError};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone)]
pub struct Dopri<const N: usize> {
    pub rtol: f64,
    pub atol: [f64; N],
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl<const N: usize> Dopri<N> {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Dopri { rtol, atol: [atol; N], h_init: 0.0, h_max: f64::INFINITY, h_min: 1e-300, max_steps: 2_000_000 }
    }

    pub fn with_atol(mut self, atol: [f64; N]) -> Self {
        self.atol = atol;
        self
    }

    pub fn with_h_max(mut self, h: f64) -> Self {
        self.h_max = h;
        self
    }

    pub fn with_h_init(mut self, h: f64) -> Self {
        self.h_init = h;
        self
    }
}

/// Scalar event function g(t, y); a zero of g stops or marks the integration.
pub struct Event<'a, const N: usize> {
    pub g: Box<dyn Fn(f64, &[f64; N]) -> f64 + 'a>,
    /// +1 rising only, -1 falling only, 0 either.
    pub direction: i8,
}

impl<'a, const N: usize> Event<'a, N> {
    pub fn new(direction: i8, g: impl Fn(f64, &[f64; N]) -> f64 + 'a) -> Self {
        Event { g: Box::new(g), direction }
    }
}

/// One accepted step with its continuous extension.
#[derive(Debug, Clone)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    pub f0: [f64; N],
    pub f1: [f64; N],
    rc: [[f64; N]; 3],
}

impl<const N: usize> Step<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Fourth-order continuous output at t0 + theta h.
    pub fn eval(&self, theta: f64) -> [f64; N] {
        let th1 = 1.0 - theta;
        let mut y = [0.0; N];
        for i in 0..N {
            let ydiff = self.rc[0][i];
            let bspl = self.rc[1][i];
            y[i] = self.y0[i]
                + theta * (ydiff + th1 * (bspl + theta * ((ydiff - self.h * self.f1[i] - bspl) + th1 * self.rc[2][i])));
        }
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    End,
    Event(usize),
}

#[derive(Debug, Clone)]
pub struct RkSolution<const N: usize> {
    pub steps: Vec<Step<N>>,
    pub t: f64,
    pub y: [f64; N],
    pub stop: Stop,
}

impl<const N: usize> RkSolution<N> {
    /// Continuous output at t inside the integrated span.
    pub fn at(&self, t: f64) -> [f64; N] {
        if self.steps.is_empty() {
            return self.y;
        }
        let forward = self.steps[0].h > 0.0;
        let idx = self.steps.partition_point(|s| if forward { s.t1() < t } else { s.t1() > t });
        let s = &self.steps[idx.min(self.steps.len() - 1)];
        s.eval((t - s.t0) / s.h)
    }
}

fn finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

struct Trial<const N: usize> {
    y1: [f64; N],
    f1: [f64; N],
    err: f64,
    rc: [[f64; N]; 3],
}

fn attempt<const N: usize, F>(cfg: &Dopri<N>, f: &mut F, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> Option<Trial<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut tmp = [0.0; N];
    for i in 0..N {
        tmp[i] = y[i] + h * A21 * k1[i];
    }
    let k2 = f(t + C2 * h, &tmp);
    for i in 0..N {
        tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    let k3 = f(t + C3 * h, &tmp);
    for i in 0..N {
        tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    let k4 = f(t + C4 * h, &tmp);
    for i in 0..N {
        tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    let k5 = f(t + C5 * h, &tmp);
    for i in 0..N {
        tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    let k6 = f(t + h, &tmp);
    let mut y1 = [0.0; N];
    for i in 0..N {
        y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
    if !finite(&y1) {
        return None;
    }
    let k7 = f(t + h, &y1);
    if !finite(&k7) {
        return None;
    }
    let mut acc = 0.0;
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = cfg.atol[i] + cfg.rtol * y[i].abs().max(y1[i].abs());
        acc += (e / sc) * (e / sc);
    }
    let err = (acc / N as f64).sqrt();
    let mut rc = [[0.0; N]; 3];
    for i in 0..N {
        let ydiff = y1[i] - y[i];
        rc[0][i] = ydiff;
        rc[1][i] = h * k1[i] - ydiff;
        rc[2][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }
    if !err.is_finite() {
        return None;
    }
    Some(Trial { y1, f1: k7, err, rc })
}

fn initial_step<const N: usize>(cfg: &Dopri<N>, y: &[f64; N], f0: &[f64; N], span: f64) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let sc = cfg.atol[i] + cfg.rtol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (f0[i] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(span.abs()).min(cfg.h_max)
}

/// Integrate y' = f(t, y) from t0 toward t_end, stopping at the first event zero.
pub fn integrate<const N: usize, F>(
    cfg: &Dopri<N>,
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    events: &[Event<'_, N>],
) -> Result<RkSolution<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    if !finite(&k1) || !finite(&y) {
        return Err(SimError::Integration { t, detail: format!("non-finite start {y:?}") });
    }
    let mut h = if cfg.h_init > 0.0 { cfg.h_init.min(cfg.h_max) } else { initial_step(cfg, &y, &k1, t_end - t0) };
    let mut gprev: Vec<f64> = events.iter().map(|e| (e.g)(t, &y)).collect();
    let mut steps: Vec<Step<N>> = Vec::new();
    let mut rejected_last = false;
    for _ in 0..cfg.max_steps {
        if (t_end - t) * dir <= 0.0 {
            return Ok(RkSolution { steps, t, y, stop: Stop::End });
        }
        let mut last = false;
        if (t + dir * h - t_end) * dir >= 0.0 {
            h = (t_end - t).abs();
            last = true;
        }
        let trial = attempt(cfg, &mut f, t, &y, &k1, dir * h);
        let tr = match trial {
            Some(tr) if tr.err <= 1.0 => tr,
            other => {
                let fac = match other {
                    Some(tr) => (0.9 * tr.err.powf(-0.2)).clamp(0.1, 0.9),
                    None => 0.25,
                };
                h *= fac;
                rejected_last = true;
                if h < cfg.h_min.max(1e-15 * t.abs()) {
                    return Err(SimError::Integration { t, detail: format!("step size collapsed at y = {y:?}") });
                }
                continue;
            }
        };
        let step = Step { t0: t, h: dir * h, y0: y, y1: tr.y1, f0: k1, f1: tr.f1, rc: tr.rc };
        let t1 = if last { t_end } else { t + dir * h };
        // events
        let mut hit: Option<(usize, f64)> = None;
        let mut gnew = Vec::with_capacity(events.len());
        for (i, ev) in events.iter().enumerate() {
            let g1 = (ev.g)(t1, &tr.y1);
            gnew.push(g1);
            let g0 = gprev[i];
            let crosses = (g0 < 0.0 && g1 >= 0.0 && ev.direction >= 0) || (g0 > 0.0 && g1 <= 0.0 && ev.direction <= 0);
            if crosses {
                let th = locate(|th| (ev.g)(t + th * step.h, &step.eval(th)), g0, g1);
                if hit.map_or(true, |(_, best)| th < best) {
                    hit = Some((i, th));
                }
            }
        }
        if let Some((i, th)) = hit {
            let te = t + th * step.h;
            let mut ye = y;
            if th > 0.0 {
                // a fresh short step is fifth-order accurate at the event
                let hp = th * step.h;
                match attempt(cfg, &mut f, t, &y, &k1, hp) {
                    Some(tr) => {
                        ye = tr.y1;
                        steps.push(Step { t0: t, h: hp, y0: y, y1: tr.y1, f0: k1, f1: tr.f1, rc: tr.rc });
                    }
                    None => {
                        ye = step.eval(th);
                        steps.push(step);
                    }
                }
            }
            return Ok(RkSolution { steps, t: te, y: ye, stop: Stop::Event(i) });
        }
        gprev = gnew;
        steps.push(step);
        t = t1;
        y = tr.y1;
        k1 = tr.f1;
        let mut fac = if tr.err == 0.0 { 5.0 } else { (0.9 * tr.err.powf(-0.2)).clamp(0.2, 5.0) };
        if rejected_last {
            fac = fac.min(1.0);
        }
        rejected_last = false;
        h = (h * fac).min(cfg.h_max);
    }
    Err(SimError::Integration { t, detail: format!("step budget {} exhausted", cfg.max_steps) })
}

/// Root of a bracketed scalar function on [0, 1] by the Illinois method.
fn locate(g: impl Fn(f64) -> f64, g0: f64, g1: f64) -> f64 {
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let (mut fa, mut fb) = (g0, g1);
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a) < 1e-15 {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let fc = g(c);
        if fc == 0.0 {
            return c;
        }
        if (fc < 0.0) == (fa < 0.0) {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if fa.abs() < 1e-300 && fb.abs() < 1e-300 {
            break;
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let cfg = Dopri::<1>::new(1e-11, 1e-13);
        let sol = integrate(&cfg, |_, y| [y[0]], 0.0, [1.0], 2.0, &[]).unwrap();
        assert_eq!(sol.stop, Stop::End);
        assert!((sol.y[0] - 2f64.exp()).abs() < 1e-9);
        // continuous output
        let mid = sol.at(1.234);
        assert!((mid[0] - 1.234f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn oscillator_backward_and_event() {
        let cfg = Dopri::<2>::new(1e-11, 1e-13);
        let ev = [Event::new(-1, |_, y: &[f64; 2]| y[0])];
        let sol = integrate(&cfg, |_, y| [y[1], -y[0]], 0.0, [1.0, 0.0], 10.0, &ev).unwrap();
        assert_eq!(sol.stop, Stop::Event(0));
        assert!((sol.t - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
        assert!((sol.y[1] + 1.0).abs() < 1e-10);
        let back = integrate(&cfg, |_, y| [y[1], -y[0]], 0.0, [1.0, 0.0], -1.0, &[]).unwrap();
        assert!((back.y[0] - 1f64.cos()).abs() < 1e-10);
        assert!((back.y[1] - 1f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn dense_output_is_fourth_order() {
        let cfg = Dopri::<1>::new(1e-6, 1e-8).with_h_max(0.2);
        let sol = integrate(&cfg, |t, _| [t.cos()], 0.0, [0.0], 3.0, &[]).unwrap();
        let mut worst = 0.0f64;
        for k in 0..300 {
            let t = 0.01 * k as f64;
            worst = worst.max((sol.at(t)[0] - t.sin()).abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn nan_rhs_is_an_error() {
        let cfg = Dopri::<1>::new(1e-10, 1e-12);
        let r = integrate(&cfg, |_, y| [1.0 / (1.0 - y[0])], 0.0, [0.0], 2.0, &[]);
        assert!(r.is_err());
    }
}
