use thiserror::Error;

/// Problems with the configuration itself; exit status 2.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },

    #[error("malformed config: {0}")]
    Parse(String),

    #[error("missing field `{section}` required by scenario {scenario}")]
    MissingSection { section: String, scenario: String },

    #[error("missing field `seed`: scenario {scenario} draws random numbers")]
    MissingSeed { scenario: String },

    #[error("invalid `{location}`: {message}")]
    Invalid { location: String, message: String },

    #[error("invalid --param {spec}: {message}")]
    Param { spec: String, message: String },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    /// A module operation failed while the scenario ran.
    #[error("{module}::{operation} failed: {source}")]
    Scenario {
        module: &'static str,
        operation: &'static str,
        source: wvsim_core::Error,
    },

    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Scenario { .. } | CliError::Output { .. } => 1,
        }
    }
}

/// Tags a core error with the module operation that produced it.
pub trait Context<T> {
    fn during(self, module: &'static str, operation: &'static str) -> Result<T, CliError>;
}

impl<T> Context<T> for wvsim_core::Result<T> {
    fn during(self, module: &'static str, operation: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Scenario { module, operation, source })
    }
}
