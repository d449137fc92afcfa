//! End-to-end training, evaluation, explanation and cross-validation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifact::{sha256_hex, ModelArtifact, SmoteSection};
use crate::corpus::{self, LabeledSong, SourceClass};
use crate::error::Result;
use crate::eval::{self, mean_std, stratified_kfold, stratified_split, EvalReport, SplitIndices, SplitSpec};
use crate::features::{VectorizerConfig, Vocabulary};
use crate::model::{train_ovr, ClassScores, FitSummary, OvrModel, Sign, TrainConfig};
use crate::resample::{class_counts, smote_resample, SmoteConfig, RNG_NAME};
use crate::ynote::{tokenize, TailPolicy, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub vectorizer: VectorizerConfig,
    pub smote_enabled: bool,
    pub smote: SmoteConfig,
    pub train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            vectorizer: VectorizerConfig::default(),
            smote_enabled: true,
            smote: SmoteConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Uses `seed` for every seeded stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.smote.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.vectorizer.validate()?;
        self.train.validate()?;
        if self.smote.k_neighbors_cap < 1 {
            return Err(crate::resample::ResampleError::InvalidConfig.into());
        }
        Ok(())
    }
}

/// SHA-256 over the canonical corpus records.
pub fn corpus_hash(songs: &[LabeledSong]) -> String {
    let mut buf = String::new();
    for s in songs {
        buf.push_str(&s.to_record());
        buf.push('\n');
    }
    sha256_hex(buf.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub n_train: usize,
    pub vocabulary_size: usize,
    /// Training rows with no in-vocabulary n-gram.
    pub zero_rows: usize,
    pub class_counts_before: BTreeMap<usize, usize>,
    pub class_counts_after: BTreeMap<usize, usize>,
    pub synthetic_rows: usize,
    pub fits: Vec<FitSummary>,
}

impl TrainingSummary {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "training songs: {}  vocabulary: {}  all-OOV rows: {}", self.n_train, self.vocabulary_size, self.zero_rows);
        let name = |l: &usize| SourceClass::from_label(*l).map_or_else(|| l.to_string(), |c| c.name().to_string());
        let counts = |m: &BTreeMap<usize, usize>| m.iter().map(|(l, c)| format!("{}={c}", name(l))).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "class counts before SMOTE: {}", counts(&self.class_counts_before));
        let _ = writeln!(s, "class counts after SMOTE:  {}  (+{} synthetic)", counts(&self.class_counts_after), self.synthetic_rows);
        for f in &self.fits {
            let _ = writeln!(
                s,
                "  {:<10} iterations={:<4} converged={} |grad|={:.3e} objective={:.6}",
                name(&f.class),
                f.iterations,
                f.converged,
                f.gradient_norm,
                f.objective
            );
        }
        s
    }
}

/// A fitted vocabulary plus model, ready for inference.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub vocabulary: Vocabulary,
    pub model: OvrModel,
    pub class_names: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub classifier: Classifier,
    pub artifact: ModelArtifact,
    pub summary: TrainingSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: usize,
    pub name: String,
    pub probabilities: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassExplanation {
    pub label: usize,
    pub name: String,
    pub positive: Vec<(String, f64)>,
    pub negative: Vec<(String, f64)>,
}

/// Fits vocabulary, SMOTE and the OvR model on `train` only.
pub fn train(train: &[LabeledSong], config: &PipelineConfig) -> Result<Trained> {
    config.validate()?;
    let seqs = corpus::sequences(train);
    let y = corpus::labels(train);
    let vocabulary = Vocabulary::fit(&seqs, &config.vectorizer)?;
    let transformed = vocabulary.transform_batch(&seqs);

    let before = class_counts(&y);
    let (x, y_fit, synthetic) = if config.smote_enabled {
        let r = smote_resample(&transformed.matrix, &y, &config.smote)?;
        let n = r.origins.len();
        (r.x, r.y, n)
    } else {
        (transformed.matrix, y, 0)
    };
    let after = class_counts(&y_fit);
    let model = train_ovr(&x, &y_fit, &config.train)?.with_vocabulary(&vocabulary);

    let class_names = SourceClass::names();
    let summary = TrainingSummary {
        n_train: train.len(),
        vocabulary_size: vocabulary.len(),
        zero_rows: transformed.zero_rows.len(),
        class_counts_before: before.clone(),
        class_counts_after: after.clone(),
        synthetic_rows: synthetic,
        fits: model.summaries.clone(),
    };
    let artifact = ModelArtifact::build(
        &class_names,
        &vocabulary,
        &model,
        SmoteSection {
            enabled: config.smote_enabled,
            config: config.smote,
            rng: RNG_NAME.to_string(),
            class_counts_before: before,
            class_counts_after: after,
        },
        corpus_hash(train),
    );
    Ok(Trained {
        classifier: Classifier {
            vocabulary,
            model,
            class_names,
        },
        artifact,
        summary,
    })
}

impl Classifier {
    pub fn from_artifact(artifact: &ModelArtifact) -> Result<Self> {
        let (vocabulary, model) = artifact.restore()?;
        let mut class_names = vec![String::new(); model.classes.iter().max().map_or(0, |m| m + 1)];
        for c in &artifact.classes {
            if c.label < class_names.len() {
                class_names[c.label] = c.name.clone();
            }
        }
        Ok(Self {
            vocabulary,
            model,
            class_names,
        })
    }

    pub fn scores(&self, seq: &TokenSequence) -> Result<ClassScores> {
        Ok(self.model.predict_proba(&self.vocabulary.transform(seq))?)
    }

    pub fn classify(&self, seq: &TokenSequence) -> Result<Prediction> {
        let scores = self.scores(seq)?;
        let pos = scores.argmax();
        let label = self.model.classes[pos];
        Ok(Prediction {
            label,
            name: self.class_names[label].clone(),
            probabilities: self
                .model
                .classes
                .iter()
                .zip(&scores.0)
                .map(|(&c, &p)| (self.class_names[c].clone(), p))
                .collect(),
        })
    }

    /// Strict-tokenizes `ynote` and classifies it.
    pub fn classify_str(&self, ynote: &str) -> Result<Prediction> {
        self.classify(&tokenize(ynote, TailPolicy::Strict)?)
    }

    /// Scores aligned with the full label range `0..n_classes`.
    fn full_scores(&self, seq: &TokenSequence, n_classes: usize) -> Result<ClassScores> {
        let s = self.scores(seq)?;
        let mut out = vec![0.0; n_classes];
        for (&c, &p) in self.model.classes.iter().zip(&s.0) {
            out[c] = p;
        }
        Ok(ClassScores(out))
    }

    pub fn evaluate(&self, songs: &[LabeledSong]) -> Result<EvalReport> {
        let names = SourceClass::names();
        let y = corpus::labels(songs);
        let scores = songs
            .iter()
            .map(|s| self.full_scores(&s.tokens, names.len()))
            .collect::<Result<Vec<_>>>()?;
        Ok(eval::evaluate(&y, &scores, &names)?)
    }

    pub fn explain(&self, k: usize) -> Result<Vec<ClassExplanation>> {
        self.model
            .classes
            .iter()
            .map(|&c| {
                Ok(ClassExplanation {
                    label: c,
                    name: self.class_names[c].clone(),
                    positive: self.model.top_features(&self.vocabulary, c, k, Sign::Positive)?,
                    negative: self.model.top_features(&self.vocabulary, c, k, Sign::Negative)?,
                })
            })
            .collect()
    }
}

/// Rank table in the layout: rank, then `n-gram  coefficient` per class.
pub fn render_explanation(explanations: &[ClassExplanation], sign: Sign) -> String {
    let rows = explanations
        .iter()
        .map(|e| match sign {
            Sign::Positive => e.positive.len(),
            Sign::Negative => e.negative.len(),
        })
        .max()
        .unwrap_or(0);
    let mut s = String::new();
    let _ = write!(s, "{:<5}", "rank");
    for e in explanations {
        let _ = write!(s, "  {:<16} {:>11}", e.name, "");
    }
    s.push('\n');
    let _ = write!(s, "{:<5}", "");
    for _ in explanations {
        let _ = write!(s, "  {:<16} {:>11}", "n-gram", "Coefficient");
    }
    s.push('\n');
    for r in 0..rows {
        let _ = write!(s, "{:<5}", r + 1);
        for e in explanations {
            let list = match sign {
                Sign::Positive => &e.positive,
                Sign::Negative => &e.negative,
            };
            match list.get(r) {
                Some((g, w)) => {
                    let _ = write!(s, "  {g:<16} {w:>11.4}");
                }
                None => {
                    let _ = write!(s, "  {:<16} {:>11}", "", "");
                }
            }
        }
        s.push('\n');
    }
    s
}

/// Result of one split → train → evaluate run.
#[derive(Debug, Clone)]
pub struct HoldoutRun {
    pub split: SplitIndices,
    pub trained: Trained,
    /// Scored on the test part.
    pub report: EvalReport,
    /// Scored on the validation part.
    pub validation: EvalReport,
}

/// Splits `songs`, trains on the train part and scores val and test.
pub fn holdout(songs: &[LabeledSong], split: &SplitSpec, config: &PipelineConfig) -> Result<HoldoutRun> {
    let idx = stratified_split(&corpus::labels(songs), split)?;
    let pick = |ix: &[usize]| ix.iter().map(|&i| songs[i].clone()).collect::<Vec<_>>();
    let trained = train(&pick(&idx.train), config)?;
    let validation = trained.classifier.evaluate(&pick(&idx.val))?;
    let report = trained.classifier.evaluate(&pick(&idx.test))?;
    Ok(HoldoutRun {
        split: idx,
        trained,
        report,
        validation,
    })
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub vocabulary: Vocabulary,
    pub test_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: usize,
    pub seed: u64,
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Population standard deviation over folds.
    pub std_accuracy: f64,
}

/// Stratified k-fold CV. Every fold refits vocabulary, SMOTE and model on its
/// training part only.
pub fn cross_validate(songs: &[LabeledSong], config: &PipelineConfig, k: usize, seed: u64) -> Result<(CvReport, Vec<FoldOutcome>)> {
    config.validate()?;
    let y = corpus::labels(songs);
    let folds = stratified_kfold(&y, k, seed)?;
    let outcomes = folds
        .par_iter()
        .enumerate()
        .map(|(f, test_idx)| {
            let mut is_test = vec![false; songs.len()];
            for &i in test_idx {
                is_test[i] = true;
            }
            let train_songs: Vec<LabeledSong> = songs.iter().zip(&is_test).filter(|(_, t)| !**t).map(|(s, _)| s.clone()).collect();
            let test_songs: Vec<LabeledSong> = test_idx.iter().map(|&i| songs[i].clone()).collect();
            let trained = train(&train_songs, config)?;
            let report = trained.classifier.evaluate(&test_songs)?;
            Ok(FoldOutcome {
                fold: f,
                n_train: train_songs.len(),
                n_test: test_songs.len(),
                accuracy: report.report.accuracy,
                vocabulary: trained.classifier.vocabulary,
                test_indices: test_idx.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let acc: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
    let (mean, std) = mean_std(&acc);
    Ok((
        CvReport {
            folds: k,
            seed,
            fold_accuracy: acc,
            mean_accuracy: mean,
            std_accuracy: std,
        },
        outcomes,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, GeneratorConfig};

    #[test]
    fn small_end_to_end() {
        let songs = generate_corpus(&GeneratorConfig::balanced(30, 30, 30, 1)).unwrap();
        let split = eval::stratified_split(&corpus::labels(&songs), &eval::SplitSpec::default()).unwrap();
        let pick = |idx: &[usize]| idx.iter().map(|&i| songs[i].clone()).collect::<Vec<_>>();
        let trained = train(&pick(&split.train), &PipelineConfig::default()).unwrap();
        let report = trained.classifier.evaluate(&pick(&split.test)).unwrap();
        assert!(report.report.accuracy > 0.8, "{}", report.render_table());

        let restored = Classifier::from_artifact(&ModelArtifact::from_json(&trained.artifact.to_json()).unwrap()).unwrap();
        let again = restored.evaluate(&pick(&split.test)).unwrap();
        assert_eq!(report, again);
        let ex = restored.explain(5).unwrap();
        assert_eq!(ex.len(), 3);
        assert!(render_explanation(&ex, Sign::Positive).lines().count() >= 3);
    }

    #[test]
    fn smote_counts_recorded() {
        let songs = generate_corpus(&GeneratorConfig::balanced(10, 40, 20, 2)).unwrap();
        let t = train(&songs, &PipelineConfig::default()).unwrap();
        assert_eq!(t.summary.class_counts_after.values().copied().collect::<Vec<_>>(), vec![40, 40, 40]);
        assert_eq!(t.summary.synthetic_rows, 50);
        let no = train(&songs, &PipelineConfig { smote_enabled: false, ..Default::default() }).unwrap();
        assert_eq!(no.summary.synthetic_rows, 0);
        assert!(t.summary.render().contains("after SMOTE"));
    }
}
