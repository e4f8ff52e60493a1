use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("data validation failed: {0}")]
    DataValidation(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("precision matrix for block `{block}` is not positive definite after jitter")]
    NumericalSingularity { block: &'static str },

    #[error("Poisson sampling produced an empty sample after {retries} retries")]
    ResampleExhausted { retries: usize },

    #[error("sampler failed at iteration {iteration}: {source}")]
    Sampler {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("stick-breaking slice {slice}: {source}")]
    Slice {
        slice: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("simulation study: {failed} of {total} replicates failed (last error: {last})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        last: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::DataValidation(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::ParameterDomain(msg.into())
    }

    pub fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for failures that originate in the numerics rather than in the
    /// inputs. The CLI maps these to exit code 2.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NumericalSingularity { .. }
            | Error::TooManyFailures { .. }
            | Error::Sampler { .. } => true,
            Error::Slice { source, .. }
            | Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
