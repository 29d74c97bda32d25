use thiserror::Error;

/// Rejected configuration. Raised while building a scenario, before any
/// simulation step runs.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The input delay must be an integer number of simulation steps.
    #[error("delay {tau_s} s is not an integer multiple of dt = {dt_s} s (residual {residual:e} steps)")]
    NonRepresentableDelay { tau_s: f64, dt_s: f64, residual: f64 },

    #[error("failed to read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse `{path}`: {source}")]
    Parse {
        path: String,
        #[source]
        source: Box<toml::de::Error>,
    },

    #[error("unsupported schema_version {found} (this build reads version {expected})")]
    SchemaVersion { found: u32, expected: u32 },
}

impl ConfigError {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::InvalidParameter { name, reason: reason.into() }
    }
}

/// Failure during a simulation run.
#[derive(Debug, Error)]
pub enum RunError {
    /// A dynamic signal left the finite range; the run is aborted rather than
    /// logging garbage.
    #[error("signal `{signal}` became non-finite at step {step} (t = {t_s} s)")]
    NonFinite { signal: &'static str, step: usize, t_s: f64 },

    #[error("failed to write `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Any failure the library can produce.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
}
