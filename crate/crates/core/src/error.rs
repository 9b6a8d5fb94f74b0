use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown correlation model `{0}`")]
    UnknownCorrelationModel(String),

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eig:e}, trace {trace:e})")]
    NotPsd { min_eig: f64, trace: f64 },

    #[error("singular system while computing {0}")]
    Singular(&'static str),

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("nothing to report")]
    EmptyReport,

    #[error("drop {drop} (seed {seed}) failed: {source}")]
    Drop {
        drop: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
