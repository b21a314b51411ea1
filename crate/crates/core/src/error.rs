use std::path::PathBuf;

/// Errors raised anywhere in the fault-location pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid configuration or parameter.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed serialized input (PGM, CSV, model dump, config).
    #[error("format error: {0}")]
    Format(String),

    /// A zero impedance where a nonzero one is required.
    #[error("singular impedance: {0}")]
    SingularImpedance(String),

    /// The fault network has no finite solution.
    #[error("singular network: {0}")]
    SingularNetwork(String),

    /// Covariance factorization failed even after jitter escalation.
    #[error("conditioning error: {0}")]
    Conditioning(String),

    /// Every trajectory window had a vanishing denominator.
    #[error("empty trajectory: every window was below the current threshold")]
    EmptyTrajectory,

    #[error("report error: {0}")]
    Report(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Failure inside one pipeline stage, tagged with the scenario it hit.
    #[error("[{stage}] scenario {scenario}: {source}")]
    Stage {
        stage: &'static str,
        scenario: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn stage(stage: &'static str, scenario: impl Into<String>, source: Error) -> Self {
        Error::Stage {
            stage,
            scenario: scenario.into(),
            source: Box::new(source),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
