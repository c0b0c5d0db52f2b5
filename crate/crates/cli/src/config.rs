//! Key-value run configuration: a file of `key = value` lines, overridden by flags.

use std::collections::BTreeMap;
use std::path::Path;

use simflow::sim_ode::Controls;
use simflow::{FlowKind, GasConfig, SimError};

/// Every key accepted in a config file or as a `--kebab-case` flag.
pub const KEYS: &[&str] = &[
    "gamma", "n", "kind", "rtol", "atol", "shoot_tol", "series_order", "eps_c", "eps_s", "eps_0", "shoot_ball",
    "max_dxi", "w_start", "n_scan", "case", "out", "r_bar", "t_grid", "r_grid", "deltas", "n_cells", "t_start",
    "t_end", "r_min", "r_max", "cfl", "snapshot",
];

/// Malformed input; reported with the offending field and exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(UsageError),
    Sim(SimError),
    /// the verification ran but a weak-solution check failed
    WeakForm(String),
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Sim(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::WeakForm(_) => 5,
            CliError::Sim(e) => match e {
                SimError::InvalidParameter { .. } | SimError::Case(_) | SimError::Domain(_) | SimError::EntropyViolation { .. } => 2,
                SimError::NoRoot { .. } | SimError::ExitDirection { .. } => 3,
                SimError::Constraint { .. } => 5,
                SimError::SlabGeometry => 6,
                _ => 4,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(e) => write!(f, "usage error: {e}"),
            CliError::Sim(e) => write!(f, "{e}"),
            CliError::WeakForm(s) => write!(f, "weak-form check failed: {s}"),
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse_text(text: &str) -> Result<RunConfig, UsageError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| UsageError(format!("config line {}: expected key = value, got {raw:?}", i + 1)))?;
            let key = k.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(UsageError(format!("config line {}: unknown key {key:?}", i + 1)));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(RunConfig { values })
    }

    pub fn load(path: &Path) -> Result<RunConfig, UsageError> {
        let text = std::fs::read_to_string(path).map_err(|e| UsageError(format!("config file {}: {e}", path.display())))?;
        Self::parse_text(&text)
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, UsageError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>, UsageError> {
        self.raw(key)
            .map(|s| s.parse::<f64>().map_err(|_| UsageError(format!("{key}: expected a number, got {s:?}"))))
            .transpose()
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, UsageError> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s.parse::<usize>().map_err(|_| UsageError(format!("{key}: expected a non-negative integer, got {s:?}"))),
        }
    }

    pub fn list_or(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>, UsageError> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => parse_list(s).map_err(|e| UsageError(format!("{key}: {e}"))),
        }
    }

    pub fn gas(&self) -> Result<GasConfig, CliError> {
        let gamma = self.f64_opt("gamma")?.ok_or_else(|| UsageError("gamma: required".into()))?;
        let n = self.usize_or("n", 3)? as u32;
        let kind: FlowKind = self.raw("kind").unwrap_or("shock").parse()?;
        Ok(GasConfig::new(gamma, n, kind)?)
    }

    pub fn controls(&self) -> Result<Controls, CliError> {
        let d = Controls::default();
        let c = Controls {
            rtol: self.f64_or("rtol", d.rtol)?,
            atol: self.f64_or("atol", d.atol)?,
            eps_c: self.f64_or("eps_c", d.eps_c)?,
            eps_s: self.f64_or("eps_s", d.eps_s)?,
            eps_0: self.f64_or("eps_0", d.eps_0)?,
            shoot_ball: self.f64_or("shoot_ball", d.shoot_ball)?,
            shoot_tol: self.f64_or("shoot_tol", d.shoot_tol)?,
            max_dxi: self.f64_or("max_dxi", d.max_dxi)?,
            series_order: self.usize_or("series_order", d.series_order)?,
            w_start: self.f64_or("w_start", d.w_start)?,
        };
        c.validate()?;
        Ok(c)
    }
}

/// `a,b,c`, `lo:hi:count` (linear) or `log:lo:hi:count` (geometric).
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    let count = |t: &str| -> Result<usize, String> {
        let k = t.trim().parse::<usize>().map_err(|_| format!("bad count {t:?}"))?;
        if k < 1 {
            return Err("count must be at least 1".into());
        }
        Ok(k)
    };
    let span = |lo: f64, hi: f64, k: usize, f: &dyn Fn(f64, f64, f64) -> f64| -> Vec<f64> {
        if k == 1 {
            return vec![lo];
        }
        (0..k).map(|i| f(lo, hi, i as f64 / (k - 1) as f64)).collect()
    };
    match parts.as_slice() {
        [one] => one.split(',').filter(|t| !t.trim().is_empty()).map(num).collect(),
        [lo, hi, k] => Ok(span(num(lo)?, num(hi)?, count(k)?, &|a, b, f| a + (b - a) * f)),
        ["log", lo, hi, k] => {
            let (a, b) = (num(lo)?, num(hi)?);
            if !(a > 0.0 && b > 0.0) {
                return Err("log spacing needs positive bounds".into());
            }
            Ok(span(a, b, count(k)?, &|a, b, f| a * (b / a).powf(f)))
        }
        _ => Err(format!("cannot parse list {s:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists() {
        assert_eq!(parse_list("1,2, 3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_list("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        let g = parse_list("log:1:100:3").unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12);
        assert!(parse_list("log:0:1:3").is_err());
        assert!(parse_list("a,b").is_err());
    }

    #[test]
    fn file_and_errors() {
        let c = RunConfig::parse_text("# comment\ngamma = 3\nkind=shock # trailing\neps-0 = 0.04\n").unwrap();
        assert_eq!(c.raw("gamma"), Some("3"));
        assert_eq!(c.controls().unwrap().eps_0, 0.04);
        assert!(RunConfig::parse_text("bogus = 1").unwrap_err().0.contains("bogus"));
        let bad = RunConfig::parse_text("rtol = x").unwrap();
        let e = bad.controls().unwrap_err();
        assert!(e.to_string().contains("rtol") && e.exit_code() == 2);
        let slab = RunConfig::parse_text("gamma = 3\nn = 1").unwrap();
        assert_eq!(slab.gas().unwrap_err().exit_code(), 6);
    }
}
