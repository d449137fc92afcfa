//! Model artifact: one pretty-printed JSON document with a fixed key order.
//!
//! Everything needed to rebuild the vectorizer and the classifier is stored,
//! together with the training configuration, SMOTE settings, RNG identity and
//! content hashes. No timings are recorded, so equal inputs give equal bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::{VectorizerConfig, VocabEntry, Vocabulary};
use crate::model::{FitSummary, OvrModel, TrainConfig};
use crate::resample::SmoteConfig;

pub const SCHEMA_VERSION: u32 = 1;
pub const ARTIFACT_KIND: &str = "ynote-provenance/model";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model artifact: {0}")]
    Format(#[from] serde_json::Error),
    #[error("unsupported artifact (kind {kind:?}, schema {version})")]
    Unsupported { kind: String, version: u32 },
    #[error("artifact is inconsistent: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub label: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabularySection {
    pub n_docs_fitted: usize,
    pub size: usize,
    pub entries: Vec<VocabEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub classes: Vec<usize>,
    pub intercept: Vec<f64>,
    pub coef: Vec<Vec<f64>>,
    pub fits: Vec<FitSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoteSection {
    pub enabled: bool,
    pub config: SmoteConfig,
    pub rng: String,
    pub class_counts_before: BTreeMap<usize, usize>,
    pub class_counts_after: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hashes {
    pub training_data_sha256: String,
    pub vocabulary_sha256: String,
    pub coefficients_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub kind: String,
    pub schema_version: u32,
    pub classes: Vec<ClassInfo>,
    pub vectorizer: VectorizerConfig,
    pub train_config: TrainConfig,
    pub smote: SmoteSection,
    pub hashes: Hashes,
    pub vocabulary: VocabularySection,
    pub model: ModelSection,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the coefficient block using exact bit patterns.
pub fn coefficients_hash(model: &OvrModel) -> String {
    let mut h = Sha256::new();
    for (row, b) in model.coef.iter().zip(&model.intercept) {
        for w in row {
            h.update(w.to_bits().to_le_bytes());
        }
        h.update(b.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

impl ModelArtifact {
    pub fn build(
        class_names: &[String],
        vocab: &Vocabulary,
        model: &OvrModel,
        smote: SmoteSection,
        training_data_sha256: String,
    ) -> Self {
        Self {
            kind: ARTIFACT_KIND.to_string(),
            schema_version: SCHEMA_VERSION,
            classes: model
                .classes
                .iter()
                .map(|&label| ClassInfo {
                    label,
                    name: class_names.get(label).cloned().unwrap_or_else(|| format!("class{label}")),
                })
                .collect(),
            vectorizer: *vocab.config(),
            train_config: model.train_config,
            smote,
            hashes: Hashes {
                training_data_sha256,
                vocabulary_sha256: vocab.fingerprint(),
                coefficients_sha256: coefficients_hash(model),
            },
            vocabulary: VocabularySection {
                n_docs_fitted: vocab.n_docs_fitted(),
                size: vocab.len(),
                entries: vocab.entries().to_vec(),
            },
            model: ModelSection {
                classes: model.classes.clone(),
                intercept: model.intercept.clone(),
                coef: model.coef.clone(),
                fits: model.summaries.clone(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("artifact serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ArtifactError> {
        let a: Self = serde_json::from_str(text)?;
        if a.kind != ARTIFACT_KIND || a.schema_version != SCHEMA_VERSION {
            return Err(ArtifactError::Unsupported {
                kind: a.kind,
                version: a.schema_version,
            });
        }
        Ok(a)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ArtifactError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ArtifactError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Rebuilds the vocabulary and model, checking sizes and hashes.
    pub fn restore(&self) -> Result<(Vocabulary, OvrModel), ArtifactError> {
        let vocab = Vocabulary::from_parts(self.vocabulary.entries.clone(), self.vocabulary.n_docs_fitted, self.vectorizer);
        if vocab.fingerprint() != self.hashes.vocabulary_sha256 {
            return Err(ArtifactError::Inconsistent("vocabulary hash mismatch".into()));
        }
        let m = &self.model;
        if m.coef.len() != m.classes.len() || m.intercept.len() != m.classes.len() {
            return Err(ArtifactError::Inconsistent("per-class arrays disagree in length".into()));
        }
        if m.coef.iter().any(|r| r.len() != vocab.len()) {
            return Err(ArtifactError::Inconsistent("coefficient width differs from vocabulary size".into()));
        }
        if m.coef.iter().flatten().chain(&m.intercept).any(|v| !v.is_finite()) {
            return Err(ArtifactError::Inconsistent("non-finite coefficient".into()));
        }
        let model = OvrModel {
            classes: m.classes.clone(),
            coef: m.coef.clone(),
            intercept: m.intercept.clone(),
            vocab_fingerprint: Some(vocab.fingerprint()),
            train_config: self.train_config,
            summaries: m.fits.clone(),
        };
        if coefficients_hash(&model) != self.hashes.coefficients_sha256 {
            return Err(ArtifactError::Inconsistent("coefficient hash mismatch".into()));
        }
        Ok((vocab, model))
    }
}
