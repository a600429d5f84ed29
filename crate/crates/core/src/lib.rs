//! Disordered pinning and directed polymer models: exact partition
//! functions, polynomial chaos expansions, weak-disorder and marginal
//! scaling limits, and the statistics used to check them.

pub mod chaos;
pub mod conv;
pub mod disorder;
pub mod error;
pub mod experiment;
pub mod marginal;
pub mod partition;
pub mod quad;
pub mod renewal;
pub mod rng;
pub mod scaling;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};
