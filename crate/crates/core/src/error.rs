use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("invalid parameter {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error(
        "slab geometry (n = 1) is not supported: the pre-collapse trajectory ends at a critical \
         point of the phase plane lying above the sonic line C = 1 + V and never reaches it, so no \
         analytic crossing exists"
    )]
    SlabGeometry,

    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("entropy violation: upstream state (V, C) = ({v}, {c}) has C^2 >= (1+V)^2")]
    EntropyViolation { v: f64, c: f64 },

    #[error("negative density {0}")]
    NegativeDensity(f64),

    #[error("exit direction invalid: lambda = {lambda} >= {limit} makes the saddle slope non-positive")]
    ExitDirection { lambda: f64, limit: f64 },

    #[error("no root in bracket ({lo}, {hi}): {detail}")]
    NoRoot { lo: f64, hi: f64, detail: String },

    #[error("integration failure at t = {t}: {detail}")]
    Integration { t: f64, detail: String },

    #[error("not a critical point: {0}")]
    NotCritical(String),

    #[error("origin crossing failed: {0}")]
    Origin(String),

    #[error("continuation failure: {0}")]
    Continuation(String),

    #[error("x = {x} outside computed range: {detail}")]
    OutOfRange { x: f64, detail: String },

    #[error("quadrature did not converge: estimate {value}, error {error}")]
    Quadrature { value: f64, error: f64 },

    #[error("constraint violated for lambda = {lambda}: {detail}")]
    Constraint { lambda: f64, detail: String },

    #[error("unsupported domain: {0}")]
    Domain(String),

    #[error("finite-volume step failed at t = {t}: {detail}")]
    Fv { t: f64, detail: String },

    #[error("case file: {0}")]
    Case(String),
}

pub type Result<T> = std::result::Result<T, SimError>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> SimError {
    SimError::InvalidParameter { field, reason: reason.into() }
}
