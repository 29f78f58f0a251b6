pub mod basis;
pub mod boot;
pub mod data;
pub mod diagnose;
pub mod error;
pub mod exposure;
pub mod mecorrect;
pub mod parallel;
pub mod regress;
pub mod rng;
pub mod simgen;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
