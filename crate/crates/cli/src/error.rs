use thiserror::Error;

/// Process exit statuses.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] stablelike::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Parameter, contract and schema problems are the caller's; quadrature,
    /// sampler and validation failures are numerical.
    pub fn exit_code(&self) -> i32 {
        use stablelike::Error as E;
        match self {
            CliError::Config(_) | CliError::Usage(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Core(e) => match e {
                E::Parameter { .. } | E::Contract(_) | E::Schema(_) | E::Io(_) | E::Json(_) => EXIT_CONFIG,
                E::Numerical { .. } | E::Domain(_) | E::Sampler(_) | E::Validation(_) => EXIT_NUMERICAL,
            },
        }
    }
}
