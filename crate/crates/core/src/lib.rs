//! Almost flows, non-linear sewing and D-solutions of rough and Young differential equations.

pub mod control;
pub mod convergence;
pub mod brownian;
pub mod diagnostics;
pub mod drivers;
pub mod error;
pub mod field;
pub mod flow;
pub mod partition;
pub mod perturb;
pub mod registry;
pub mod rng;
pub mod rough_path;
pub mod sewing;
pub mod stability;
pub mod stats;

pub use error::{Result, SewingError};
