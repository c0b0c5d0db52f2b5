//! Exact solution of the planar Riemann problem for an ideal gas.

use crate::error::{Result, SimError};

/// Star-region pressure and velocity for primitive states (ρ, u, p).
pub fn star(g: f64, l: &[f64; 3], r: &[f64; 3]) -> Result<(f64, f64)> {
    let (cl, cr) = ((g * l[2] / l[0]).sqrt(), (g * r[2] / r[0]).sqrt());
    if 2.0 / (g - 1.0) * (cl + cr) <= r[1] - l[1] {
        return Err(SimError::Domain("initial data generate a vacuum".into()));
    }
    let f = |p: f64, w: &[f64; 3], c: f64| -> (f64, f64) {
        if p > w[2] {
            let a = 2.0 / ((g + 1.0) * w[0]);
            let b = (g - 1.0) / (g + 1.0) * w[2];
            let q = (a / (p + b)).sqrt();
            ((p - w[2]) * q, q * (1.0 - 0.5 * (p - w[2]) / (p + b)))
        } else {
            let e = (g - 1.0) / (2.0 * g);
            let pr = p / w[2];
            (2.0 * c / (g - 1.0) * (pr.powf(e) - 1.0), pr.powf(-(g + 1.0) / (2.0 * g)) / (w[0] * c))
        }
    };
    // two-rarefaction guess
    let e = (g - 1.0) / (2.0 * g);
    let mut p = ((cl + cr - 0.5 * (g - 1.0) * (r[1] - l[1])) / (cl / l[2].powf(e) + cr / r[2].powf(e))).powf(1.0 / e);
    p = p.max(1e-14 * (l[2] + r[2]));
    for _ in 0..100 {
        let (fl, dl) = f(p, l, cl);
        let (fr, dr) = f(p, r, cr);
        let h = fl + fr + r[1] - l[1];
        let mut next = p - h / (dl + dr);
        if next <= 0.0 {
            next = 0.5 * p;
        }
        let done = (next - p).abs() <= 1e-15 * (next + p);
        p = next;
        if done {
            let (fl, _) = f(p, l, cl);
            let (fr, _) = f(p, r, cr);
            return Ok((p, 0.5 * (l[1] + r[1]) + 0.5 * (fr - fl)));
        }
    }
    Err(SimError::Domain("star pressure iteration did not converge".into()))
}

/// Primitive state at similarity coordinate ξ = x/t.
pub fn sample(g: f64, l: &[f64; 3], r: &[f64; 3], xi: f64) -> Result<[f64; 3]> {
    let (ps, us) = star(g, l, r)?;
    let gm = (g - 1.0) / (g + 1.0);
    let side = |w: &[f64; 3], sgn: f64| -> [f64; 3] {
        // sgn = −1 for the left wave, +1 for the right wave; evaluated with xi mirrored
        let c = (g * w[2] / w[0]).sqrt();
        let (rho, u, p) = (w[0], sgn * w[1], w[2]);
        let x = sgn * xi;
        let uss = sgn * us;
        if ps > p {
            let s = u - c * ((g + 1.0) / (2.0 * g) * ps / p + (g - 1.0) / (2.0 * g)).sqrt();
            if x <= s {
                [rho, sgn * u, p]
            } else {
                let rs = rho * (ps / p + gm) / (gm * ps / p + 1.0);
                [rs, sgn * uss, ps]
            }
        } else {
            let cs = c * (ps / p).powf((g - 1.0) / (2.0 * g));
            let (head, tail) = (u - c, uss - cs);
            if x <= head {
                [rho, sgn * u, p]
            } else if x >= tail {
                [rho * (ps / p).powf(1.0 / g), sgn * uss, ps]
            } else {
                let k = 2.0 / (g + 1.0) + gm / c * (u - x);
                [rho * k.powf(2.0 / (g - 1.0)), sgn * (2.0 / (g + 1.0) * (c + (g - 1.0) / 2.0 * u + x)), p * k.powf(2.0 * g / (g - 1.0))]
            }
        }
    };
    if xi <= us {
        Ok(side(l, 1.0))
    } else {
        Ok(side(r, -1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sod_star_state() {
        let (p, u) = star(1.4, &[1.0, 0.0, 1.0], &[0.125, 0.0, 0.1]).unwrap();
        assert!((p - 0.30313).abs() < 1e-5, "{p}");
        assert!((u - 0.92745).abs() < 1e-5, "{u}");
    }

    #[test]
    fn sod_samples() {
        let (l, r) = ([1.0, 0.0, 1.0], [0.125, 0.0, 0.1]);
        let s = sample(1.4, &l, &r, 0.0).unwrap();
        assert!(s[0] > 0.125 && s[0] < 1.0);
        assert_eq!(sample(1.4, &l, &r, -5.0).unwrap(), l);
        assert_eq!(sample(1.4, &l, &r, 5.0).unwrap(), r);
        // contact: density jumps, pressure continuous
        let a = sample(1.4, &l, &r, 0.9).unwrap();
        let b = sample(1.4, &l, &r, 0.96).unwrap();
        assert!((a[2] - b[2]).abs() < 1e-12 && a[0] > b[0]);
    }
}
