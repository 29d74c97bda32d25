pub mod config;
pub mod error;
pub mod metrics;
pub mod plant;
pub mod runner;
pub mod safety;
pub mod smith;
pub mod trace;
pub mod vfo;

pub use error::{ConfigError, Error, RunError};
