//! Classify YNote-encoded songs by provenance: human-composed (Native),
//! rule-algorithm generated, or LLM generated.
//!
//! The pipeline is: [`ynote`] tokenization, n-gram TF-IDF [`features`],
//! SMOTE rebalancing ([`resample`]), and one-vs-rest logistic regression
//! ([`model`]), with metrics in [`eval`] and synthetic corpora in [`corpus`].
//! [`pipeline`] wires the stages together in the fixed order
//! split → fit vocabulary on train → transform → SMOTE → train.

pub mod artifact;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod matrix;
pub mod model;
pub mod pipeline;
pub mod resample;
pub mod ynote;

pub use artifact::ModelArtifact;
pub use corpus::{LabeledSong, SourceClass};
pub use error::{from_toml, Error, ErrorKind, Result};
pub use eval::{EvalReport, SplitSpec};
pub use features::{VectorizerConfig, Vocabulary};
pub use matrix::{FeatureMatrix, SparseRow};
pub use model::{ClassScores, ClassWeight, OvrModel, Sign, TrainConfig};
pub use pipeline::{Classifier, PipelineConfig};
pub use resample::SmoteConfig;
pub use ynote::{tokenize, Note, TailPolicy, TokenSequence};
