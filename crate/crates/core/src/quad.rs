//! Globally adaptive Gauss–Kronrod (7, 15) quadrature.

use crate::error::{Result, SimError};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One G7K15 panel: (Kronrod estimate, |K − G|).
pub fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadTol {
    pub rel: f64,
    pub abs: f64,
    pub max_panels: usize,
}

impl Default for QuadTol {
    fn default() -> Self {
        QuadTol { rel: 1e-11, abs: 1e-300, max_panels: 4000 }
    }
}

/// Adaptive integral of f over [a, b]; splits the worst panel until the
/// summed error estimate meets max(abs, rel·|I|).
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: QuadTol) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&mut f, a, b);
    panels.push((a, b, v, e));
    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(SimError::Quadrature { value: total, error: err });
        }
        if err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(total);
        }
        if panels.len() >= tol.max_panels {
            return Err(SimError::Quadrature { value: total, error: err });
        }
        let (iw, _) = panels.iter().enumerate().fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (pa, pb, _, _) = panels.swap_remove(iw);
        let m = 0.5 * (pa + pb);
        if m <= pa.min(pb) || m >= pa.max(pb) {
            return Err(SimError::Quadrature { value: total, error: err });
        }
        let (v1, e1) = gk15(&mut f, pa, m);
        let (v2, e2) = gk15(&mut f, m, pb);
        panels.push((pa, m, v1, e1));
        panels.push((m, pb, v2, e2));
    }
}

/// Sum of [`integrate`] over consecutive breakpoints.
pub fn integrate_split(mut f: impl FnMut(f64) -> f64, pts: &[f64], tol: QuadTol) -> Result<f64> {
    let mut s = 0.0;
    for w in pts.windows(2) {
        s += integrate(&mut f, w[0], w[1], tol)?;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact_in_one_panel() {
        let mut f = |x: f64| x.powi(20) - 3.0 * x.powi(7);
        let (v, _) = gk15(&mut f, -1.0, 2.0);
        let exact = (2f64.powi(21) + 1.0) / 21.0 - 3.0 * (256.0 - 1.0) / 8.0;
        assert!((v - exact).abs() < 1e-10 * exact.abs());
    }

    #[test]
    fn endpoint_singularity() {
        let v = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, QuadTol { rel: 1e-10, ..Default::default() }).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
        let v = integrate(|x: f64| x.ln(), 0.0, 1.0, QuadTol::default()).unwrap();
        assert!((v + 1.0).abs() < 1e-10);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let a = integrate(|x: f64| x.sin(), 0.0, 2.0, QuadTol::default()).unwrap();
        let b = integrate(|x: f64| x.sin(), 2.0, 0.0, QuadTol::default()).unwrap();
        assert!((a + b).abs() < 1e-14);
        assert!((a - (1.0 - 2f64.cos())).abs() < 1e-13);
    }
}
