//! Gas parameters, the similarity polynomials D, G, F and the jump map.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Shock,
    Cavity,
}

impl FlowKind {
    /// The logical variable s (1 for the shock problem, 0 for the cavity).
    pub fn s(self) -> f64 {
        match self {
            FlowKind::Shock => 1.0,
            FlowKind::Cavity => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FlowKind::Shock => "shock",
            FlowKind::Cavity => "cavity",
        }
    }
}

impl std::str::FromStr for FlowKind {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "shock" | "1" => Ok(FlowKind::Shock),
            "cavity" | "0" => Ok(FlowKind::Cavity),
            other => Err(invalid("kind", format!("expected shock or cavity, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasConfig {
    pub gamma: f64,
    pub n: u32,
    pub kind: FlowKind,
    /// Specific heat scale used only for the temperature field.
    pub cv: f64,
}

impl GasConfig {
    pub fn new(gamma: f64, n: u32, kind: FlowKind) -> Result<Self> {
        if n == 1 {
            return Err(SimError::SlabGeometry);
        }
        if !(n == 2 || n == 3) {
            return Err(invalid("n", format!("spatial dimension must be 2 or 3, got {n}")));
        }
        if !(gamma.is_finite() && gamma > 1.0) {
            return Err(invalid("gamma", format!("need gamma > 1, got {gamma}")));
        }
        Ok(GasConfig { gamma, n, kind, cv: 1.0 })
    }

    /// Re-check the invariants of a deserialized value.
    pub fn validate(&self) -> Result<()> {
        GasConfig::new(self.gamma, self.n, self.kind)?;
        if !(self.cv > 0.0) {
            return Err(invalid("cv", "must be positive"));
        }
        Ok(())
    }

    pub fn shock(gamma: f64, n: u32) -> Result<Self> {
        Self::new(gamma, n, FlowKind::Shock)
    }

    pub fn cavity(gamma: f64, n: u32) -> Result<Self> {
        Self::new(gamma, n, FlowKind::Cavity)
    }

    pub fn s(&self) -> f64 {
        self.kind.s()
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// Geometric index m = n - 1.
    pub fn m(&self) -> u32 {
        self.n - 1
    }

    /// Upper end of the admissible lambda range.
    pub fn lambda_limit(&self) -> f64 {
        match self.kind {
            FlowKind::Shock => 1.0 + self.nf() / 2.0,
            FlowKind::Cavity => 1.0 + self.nf() * (self.gamma - 1.0) / 2.0,
        }
    }
}

/// Constants that depend on the similarity exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaBinding {
    pub lambda: f64,
    pub kappa: f64,
    /// Vertical asymptote of arc (b).
    pub v0: f64,
    pub q: f64,
    pub sigma: f64,
    /// 2(λ-1)/(γ+s-1), the constant inside G.
    pub b: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl LambdaBinding {
    pub fn new(cfg: &GasConfig, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 1.0) {
            return Err(invalid("lambda", format!("need lambda > 1, got {lambda}")));
        }
        let g = cfg.gamma;
        let n = cfg.nf();
        let s = cfg.s();
        let lm1 = lambda - 1.0;
        let kappa = match cfg.kind {
            FlowKind::Shock => 0.0,
            FlowKind::Cavity => -2.0 * lm1 / (g - 1.0),
        };
        let b = 2.0 * lm1 / (g + s - 1.0);
        let v0 = -2.0 * lm1 / (n * (g + s - 1.0));
        let q = (kappa * (g - 1.0) + 2.0 * lm1) / (kappa + n);
        let z = lm1 / ((n - 1.0) * (g + s - 1.0));
        let sigma = (1.0 + s * (n - 1.0) * z / (1.0 + v0)) / lambda;
        Ok(LambdaBinding {
            lambda,
            kappa,
            v0,
            q,
            sigma,
            b,
            a1: 1.0 + (n - 1.0) * (g - 1.0) / 2.0,
            a2: ((n - 1.0) * (g - 1.0) + (g - 3.0) * lm1) / 2.0,
            a3: (g - 1.0) * lm1 / 2.0,
        })
    }

    /// Shock-case form of the series exponent, σ = (1 + (λ-1)/(γ-q))/λ.
    pub fn sigma_shock_form(&self, cfg: &GasConfig) -> f64 {
        (1.0 + (self.lambda - 1.0) / (cfg.gamma - self.q)) / self.lambda
    }

    /// Exponent of the density decay R(x) ~ x^p on arc (b) of the shock case.
    pub fn density_tail_exponent(&self, cfg: &GasConfig) -> f64 {
        -(2.0 / (cfg.gamma - self.q)) * (1.0 - 1.0 / self.lambda)
    }
}

/// A point of the similarity phase space together with its x coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityState {
    pub x: f64,
    pub v: f64,
    pub c: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dgf {
    pub d: f64,
    pub g: f64,
    pub f: f64,
}

pub fn eval_d(v: f64, c: f64) -> f64 {
    (1.0 + v) * (1.0 + v) - c * c
}

/// D, G and F at (V, C). The (1+V)^-1 pole of F is rejected for the shock case.
pub fn eval_dgf(cfg: &GasConfig, lam: &LambdaBinding, v: f64, c: f64) -> Result<Dgf> {
    if !(v.is_finite() && c.is_finite()) {
        return Err(SimError::Singular(format!("non-finite state ({v}, {c})")));
    }
    if cfg.kind == FlowKind::Shock && v == -1.0 {
        return Err(SimError::Singular("F has a pole at V = -1".into()));
    }
    let (g, f) = gf_unchecked(cfg, lam, v, c);
    Ok(Dgf { d: eval_d(v, c), g, f })
}

#[inline]
pub(crate) fn gf_unchecked(cfg: &GasConfig, lam: &LambdaBinding, v: f64, c: f64) -> (f64, f64) {
    let n = cfg.nf();
    let l = lam.lambda;
    let opv = 1.0 + v;
    let c2 = c * c;
    let g = c2 * (n * v + lam.b) - v * opv * (l + v);
    let pole = cfg.s() * (l - 1.0) / (cfg.gamma * opv);
    let f = c * (c2 * (1.0 + pole) - lam.a1 * opv * opv + lam.a2 * opv - lam.a3);
    (g, f)
}

/// Jacobian [[G_V, G_C], [F_V, F_C]].
pub fn jacobian_gf(cfg: &GasConfig, lam: &LambdaBinding, v: f64, c: f64) -> [[f64; 2]; 2] {
    let n = cfg.nf();
    let l = lam.lambda;
    let opv = 1.0 + v;
    let c2 = c * c;
    let g_v = n * c2 - (opv * (l + v) + v * (l + v) + v * opv);
    let g_c = 2.0 * c * (n * v + lam.b);
    let sp = cfg.s() * (l - 1.0) / cfg.gamma;
    let h = c2 * (1.0 + sp / opv) - lam.a1 * opv * opv + lam.a2 * opv - lam.a3;
    let h_v = -c2 * sp / (opv * opv) - 2.0 * lam.a1 * opv + lam.a2;
    let h_c = 2.0 * c * (1.0 + sp / opv);
    [[g_v, g_c], [c * h_v, h + c * h_c]]
}

/// Entropy condition for an upstream state: C0^2 < (1+V0)^2.
pub fn is_admissible(v0: f64, c0: f64) -> bool {
    c0 * c0 < (1.0 + v0) * (1.0 + v0)
}

/// Rankine-Hugoniot map in similarity variables.
///
/// The downstream sound speed keeps the sign of `c0`, except that a zero
/// upstream sound speed maps to the positive branch; callers flip it for the
/// post-collapse locus.
pub fn rh_jump(cfg: &GasConfig, v0: f64, c0: f64, r0: f64) -> Result<(f64, f64, f64)> {
    if !is_admissible(v0, c0) {
        return Err(SimError::EntropyViolation { v: v0, c: c0 });
    }
    let g = cfg.gamma;
    let w0 = 1.0 + v0;
    let w1 = (g - 1.0) / (g + 1.0) * w0 + 2.0 * c0 * c0 / ((g + 1.0) * w0);
    let c1sq = c0 * c0 + 0.5 * (g - 1.0) * (w0 * w0 - w1 * w1);
    let sign = if c0 < 0.0 { -1.0 } else { 1.0 };
    let r1 = r0 * w0 / w1;
    Ok((w1 - 1.0, sign * c1sq.sqrt(), r1))
}

/// The same map applied from the downstream side; recovers the upstream state.
pub fn rh_reverse(cfg: &GasConfig, v1: f64, c1: f64, r1: f64) -> Result<(f64, f64, f64)> {
    if is_admissible(v1, c1) {
        return Err(SimError::Singular(format!("({v1}, {c1}) is not a downstream state")));
    }
    let g = cfg.gamma;
    let w1 = 1.0 + v1;
    let w0 = (g - 1.0) / (g + 1.0) * w1 + 2.0 * c1 * c1 / ((g + 1.0) * w1);
    let c0sq = (c1 * c1 + 0.5 * (g - 1.0) * (w1 * w1 - w0 * w0)).max(0.0);
    let sign = if c1 < 0.0 { -1.0 } else { 1.0 };
    Ok((w0 - 1.0, sign * c0sq.sqrt(), r1 * w1 / w0))
}

/// Pressure, specific internal energy and temperature from density and sound speed.
pub fn eos_fields(cfg: &GasConfig, rho: f64, c: f64) -> Result<(f64, f64, f64)> {
    if rho < 0.0 || rho.is_nan() {
        return Err(SimError::NegativeDensity(rho));
    }
    let g = cfg.gamma;
    let p = rho * c * c / g;
    let e = c * c / (g * (g - 1.0));
    Ok((p, e, e / cfg.cv))
}

/// Shock-case launch state just behind the incoming shock at x = -1.
pub fn shock_launch(cfg: &GasConfig) -> (f64, f64, f64) {
    let g = cfg.gamma;
    (-2.0 / (g + 1.0), (2.0 * g * (g - 1.0)).sqrt() / (g + 1.0), (g + 1.0) / (g - 1.0))
}

/// Left-hand side of the exact integral, R^(q+1-γ) (C/x)^2 |1+V|^q, in log form.
pub fn log_entropy_integral(cfg: &GasConfig, lam: &LambdaBinding, ln_r: f64, w: f64, v: f64) -> f64 {
    (lam.q + 1.0 - cfg.gamma) * ln_r + (w * w).ln() + lam.q * (1.0 + v).abs().ln()
}

/// Density from the exact integral constant ln K, with W = C/x.
pub fn density_from_integral(cfg: &GasConfig, lam: &LambdaBinding, ln_k: f64, w: f64, v: f64) -> f64 {
    let e = lam.q + 1.0 - cfg.gamma;
    ((ln_k - (w * w).ln() - lam.q * (1.0 + v).abs().ln()) / e).exp()
}
