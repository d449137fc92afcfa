use thiserror::Error;

use crate::artifact::ArtifactError;
use crate::corpus::CorpusError;
use crate::eval::EvalError;
use crate::features::FeatureError;
use crate::model::ModelError;
use crate::resample::ResampleError;
use crate::ynote::YnoteError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ynote(#[from] YnoteError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("invalid config: {0}")]
    Config(String),
}

/// Parses a TOML config section, reporting failures as [`Error::Config`].
pub fn from_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    InvalidConfig,
    MalformedData,
    DegenerateData,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use ErrorKind::*;
        match self {
            Error::Ynote(_) => MalformedData,
            Error::Features(FeatureError::InvalidConfig(_)) => InvalidConfig,
            Error::Features(_) => DegenerateData,
            Error::Resample(ResampleError::InvalidConfig) => InvalidConfig,
            Error::Resample(ResampleError::LengthMismatch { .. }) => MalformedData,
            Error::Resample(ResampleError::ClassTooSmall { .. }) => DegenerateData,
            Error::Model(ModelError::InvalidConfig(_)) => InvalidConfig,
            Error::Model(ModelError::SingleClassInput) => DegenerateData,
            Error::Model(_) => MalformedData,
            Error::Eval(EvalError::InvalidSplit(_) | EvalError::InvalidFolds) => InvalidConfig,
            Error::Eval(EvalError::LengthMismatch(..) | EvalError::LabelOutOfRange { .. }) => MalformedData,
            Error::Eval(_) => DegenerateData,
            Error::Corpus(CorpusError::Io(_)) => Io,
            Error::Corpus(CorpusError::InvalidConfig(_)) => InvalidConfig,
            Error::Corpus(CorpusError::CorpusTooShort { .. } | CorpusError::EmptyModel) => DegenerateData,
            Error::Corpus(_) => MalformedData,
            Error::Artifact(ArtifactError::Io(_)) => Io,
            Error::Artifact(_) => MalformedData,
            Error::Config(_) => InvalidConfig,
        }
    }
}
