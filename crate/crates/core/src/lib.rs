//! Radial similarity solutions for converging shocks and collapsing cavities.

pub mod case;
pub mod continuation;
pub mod eigenvalue;
pub mod error;
pub mod fields;
pub mod fv;
pub mod gas;
pub mod quad;
pub mod rk;
pub mod sim_ode;
pub mod solution;
pub mod weak;

pub use error::{Result, SimError};
pub use gas::{FlowKind, GasConfig, LambdaBinding};
