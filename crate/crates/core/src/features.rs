//! N-gram TF-IDF vectorizer over note tokens.
//!
//! Weighting is raw term count times smoothed idf, `ln((1 + N) / (1 + df)) + 1`,
//! followed by L2 normalization of each row. Case is always preserved since
//! lowercase letters carry pitch information.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::matrix::{FeatureMatrix, SparseRow};
use crate::ynote::TokenSequence;

/// Separator between the tokens of an n-gram, e.g. `"G508 G516"`.
pub const NGRAM_JOINER: char = ' ';

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("invalid vectorizer config: {0}")]
    InvalidConfig(String),
    #[error("cannot fit a vocabulary on an empty corpus")]
    EmptyCorpus,
    #[error("no n-gram survived document-frequency filtering")]
    EmptyVocabulary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VectorizerConfig {
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub max_features: usize,
    /// Absolute document count.
    pub min_df: usize,
    /// Proportion of documents.
    pub max_df: f64,
    pub case_sensitive: bool,
}

impl Default for VectorizerConfig {
    fn default() -> Self {
        Self {
            ngram_min: 1,
            ngram_max: 3,
            max_features: 8000,
            min_df: 3,
            max_df: 0.95,
            case_sensitive: true,
        }
    }
}

impl VectorizerConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |m: &str| Err(FeatureError::InvalidConfig(m.to_string()));
        if self.ngram_min < 1 || self.ngram_min > self.ngram_max {
            return bad("need 1 <= ngram_min <= ngram_max");
        }
        if !(self.max_df > 0.0 && self.max_df <= 1.0) {
            return bad("max_df must be in (0, 1]");
        }
        if self.min_df < 1 {
            return bad("min_df must be >= 1");
        }
        if self.max_features < 1 {
            return bad("max_features must be >= 1");
        }
        if !self.case_sensitive {
            return bad("case folding would merge distinct pitches; case_sensitive must be true");
        }
        Ok(())
    }

    /// Largest document frequency still kept.
    pub fn max_df_count(&self, n_docs: usize) -> usize {
        // guard against 0.95 * 20 = 19.000000000000004
        (self.max_df * n_docs as f64 - 1e-9).ceil().max(0.0) as usize
    }
}

/// All contiguous windows of `ngram_min..=ngram_max` tokens, arity-major, in
/// order of appearance. Multiplicity is kept.
pub fn extract_ngrams(seq: &TokenSequence, ngram_min: usize, ngram_max: usize) -> Vec<String> {
    let notes = seq.notes();
    let mut out = Vec::new();
    for n in ngram_min..=ngram_max {
        if n == 0 || notes.len() < n {
            continue;
        }
        for window in notes.windows(n) {
            let mut s = String::with_capacity(n * 5);
            for (i, note) in window.iter().enumerate() {
                if i > 0 {
                    s.push(NGRAM_JOINER);
                }
                s.push_str(note.as_str());
            }
            out.push(s);
        }
    }
    out
}

fn term_counts(seq: &TokenSequence, cfg: &VectorizerConfig) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for g in extract_ngrams(seq, cfg.ngram_min, cfg.ngram_max) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub ngram: String,
    pub doc_freq: usize,
    pub idf: f64,
}

/// Fitted n-gram to column mapping. Columns are assigned in lexicographic
/// order of n-gram text.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    index: HashMap<String, u32>,
    n_docs_fitted: usize,
    config: VectorizerConfig,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
            && self.n_docs_fitted == other.n_docs_fitted
            && self.config == other.config
    }
}

pub fn smoothed_idf(n_docs: usize, doc_freq: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + doc_freq as f64)).ln() + 1.0
}

impl Vocabulary {
    pub fn fit(corpus: &[TokenSequence], config: &VectorizerConfig) -> Result<Self, FeatureError> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(FeatureError::EmptyCorpus);
        }
        let n_docs = corpus.len();
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut total: HashMap<String, usize> = HashMap::new();
        for seq in corpus {
            for (g, c) in term_counts(seq, config) {
                *total.entry(g.clone()).or_insert(0) += c;
                *df.entry(g).or_insert(0) += 1;
            }
        }

        let max_df = config.max_df_count(n_docs);
        let mut survivors: Vec<(String, usize)> = df
            .into_iter()
            .filter(|(_, d)| *d >= config.min_df && *d <= max_df)
            .collect();
        if survivors.is_empty() {
            return Err(FeatureError::EmptyVocabulary);
        }
        if survivors.len() > config.max_features {
            survivors.sort_by(|a, b| total[&b.0].cmp(&total[&a.0]).then_with(|| a.0.cmp(&b.0)));
            survivors.truncate(config.max_features);
        }
        survivors.sort_by(|a, b| a.0.cmp(&b.0));

        let entries = survivors
            .into_iter()
            .map(|(ngram, doc_freq)| VocabEntry {
                idf: smoothed_idf(n_docs, doc_freq),
                ngram,
                doc_freq,
            })
            .collect();
        Ok(Self::from_parts(entries, n_docs, *config))
    }

    /// Reassembles a vocabulary from stored entries (model artifact).
    pub fn from_parts(entries: Vec<VocabEntry>, n_docs_fitted: usize, config: VectorizerConfig) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.ngram.clone(), i as u32))
            .collect();
        Self {
            entries,
            index,
            n_docs_fitted,
            config,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn ngram(&self, col: usize) -> &str {
        &self.entries[col].ngram
    }

    pub fn column(&self, ngram: &str) -> Option<usize> {
        self.index.get(ngram).map(|i| *i as usize)
    }

    pub fn contains(&self, ngram: &str) -> bool {
        self.index.contains_key(ngram)
    }

    pub fn n_docs_fitted(&self) -> usize {
        self.n_docs_fitted
    }

    pub fn config(&self) -> &VectorizerConfig {
        &self.config
    }

    /// TF-IDF row for one document; all-OOV documents give the zero row.
    pub fn transform(&self, seq: &TokenSequence) -> SparseRow {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for g in extract_ngrams(seq, self.config.ngram_min, self.config.ngram_max) {
            if let Some(&col) = self.index.get(&g) {
                *counts.entry(col).or_insert(0) += 1;
            }
        }
        let pairs: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(col, c)| (col, c as f64 * self.entries[col as usize].idf))
            .collect();
        let mut row = SparseRow::from_pairs(pairs);
        let norm = row.norm();
        if norm > 0.0 {
            row.scale(1.0 / norm);
        }
        row
    }

    pub fn transform_batch(&self, corpus: &[TokenSequence]) -> TransformOutput {
        let rows: Vec<SparseRow> = corpus.iter().map(|s| self.transform(s)).collect();
        let zero_rows = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.nnz() == 0)
            .map(|(i, _)| i)
            .collect();
        TransformOutput {
            matrix: FeatureMatrix::from_rows(self.len(), rows),
            zero_rows,
        }
    }

    /// Canonical text dump; identical corpora and configs give identical bytes.
    pub fn dump(&self) -> String {
        let c = &self.config;
        let mut s = format!(
            "ngram_range={}..={} max_features={} min_df={} max_df={:?} case_sensitive={} n_docs={}\n",
            c.ngram_min, c.ngram_max, c.max_features, c.min_df, c.max_df, c.case_sensitive, self.n_docs_fitted
        );
        for (i, e) in self.entries.iter().enumerate() {
            let _ = writeln!(s, "{i}\t{}\t{}\t{:?}", e.ngram, e.doc_freq, e.idf);
        }
        s
    }

    /// SHA-256 of [`Vocabulary::dump`], hex encoded.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.dump().as_bytes()))
    }

    /// Distinct n-grams of a corpus that this vocabulary would consider.
    pub fn candidate_ngrams(corpus: &[TokenSequence], config: &VectorizerConfig) -> HashSet<String> {
        corpus
            .iter()
            .flat_map(|s| extract_ngrams(s, config.ngram_min, config.ngram_max))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TransformOutput {
    pub matrix: FeatureMatrix,
    /// Rows with no in-vocabulary n-gram.
    pub zero_rows: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ynote::{tokenize, TailPolicy};

    fn seq(s: &str) -> TokenSequence {
        tokenize(s, TailPolicy::Strict).unwrap()
    }

    fn cfg(min_df: usize, max_df: f64) -> VectorizerConfig {
        VectorizerConfig {
            ngram_min: 1,
            ngram_max: 1,
            min_df,
            max_df,
            ..Default::default()
        }
    }

    #[test]
    fn ngram_windows() {
        let g = extract_ngrams(&seq("G402E508C516"), 1, 3);
        assert_eq!(
            g,
            [
                "G402",
                "E508",
                "C516",
                "G402 E508",
                "E508 C516",
                "G402 E508 C516"
            ]
        );
        assert_eq!(extract_ngrams(&seq("A101"), 1, 3), ["A101"]);
        assert_eq!(extract_ngrams(&seq("A101A101"), 2, 2), ["A101 A101"]);
    }

    // A=A404 B=B404 C=C404 D=D404
    fn abcd_corpus() -> Vec<TokenSequence> {
        vec![seq("A404B404"), seq("A404C404"), seq("A404D404")]
    }

    #[test]
    fn min_df_filter() {
        let v = Vocabulary::fit(&abcd_corpus(), &cfg(2, 1.0)).unwrap();
        let grams: Vec<_> = v.entries().iter().map(|e| e.ngram.as_str()).collect();
        assert_eq!(grams, ["A404"]);
        assert_eq!(v.entries()[0].idf, 1.0);
    }

    #[test]
    fn max_df_filter() {
        let v = Vocabulary::fit(&abcd_corpus(), &cfg(1, 0.5)).unwrap();
        let grams: Vec<_> = v.entries().iter().map(|e| e.ngram.as_str()).collect();
        assert_eq!(grams, ["B404", "C404", "D404"]);
    }

    #[test]
    fn ubiquitous_term_idf_is_one() {
        let corpus: Vec<_> = (0..7).map(|_| seq("E508")).collect();
        let v = Vocabulary::fit(&corpus, &cfg(1, 1.0)).unwrap();
        assert_eq!(v.entries()[0].idf, 1.0);
    }

    #[test]
    fn empty_vocabulary_error() {
        assert_eq!(
            Vocabulary::fit(&abcd_corpus(), &cfg(4, 1.0)),
            Err(FeatureError::EmptyVocabulary)
        );
        assert_eq!(
            Vocabulary::fit(&[], &cfg(1, 1.0)),
            Err(FeatureError::EmptyCorpus)
        );
    }

    #[test]
    fn max_features_keeps_most_frequent_then_lexicographic() {
        // totals: A404=4, B404=2, C404=2, D404=1
        let corpus = vec![seq("A404A404B404C404"), seq("A404A404B404C404D404")];
        let c = VectorizerConfig {
            max_features: 2,
            ..cfg(1, 1.0)
        };
        let v = Vocabulary::fit(&corpus, &c).unwrap();
        let grams: Vec<_> = v.entries().iter().map(|e| e.ngram.as_str()).collect();
        assert_eq!(grams, ["A404", "B404"]);
    }

    #[test]
    fn transform_hand_computed() {
        let entries = vec![
            VocabEntry { ngram: "A404".into(), doc_freq: 1, idf: 1.0 },
            VocabEntry { ngram: "B404".into(), doc_freq: 1, idf: 2.0 },
        ];
        let v = Vocabulary::from_parts(entries, 1, cfg(1, 1.0));
        let row = v.transform(&seq("A404B404A404"));
        assert!((row.get(0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4);
        assert!((row.get(1) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4);

        assert_eq!(v.transform(&seq("C404D404")).nnz(), 0);
        let one = v.transform(&seq("B404B404B404"));
        assert_eq!(one.indices(), &[1]);
        assert!((one.values()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn batch_flags_zero_rows() {
        let v = Vocabulary::fit(&abcd_corpus(), &cfg(2, 1.0)).unwrap();
        let out = v.transform_batch(&[seq("A404"), seq("G404")]);
        assert_eq!(out.zero_rows, vec![1]);
        assert_eq!(out.matrix.n_cols(), 1);
    }

    #[test]
    fn invalid_configs_rejected() {
        for c in [
            VectorizerConfig { ngram_min: 0, ..Default::default() },
            VectorizerConfig { ngram_min: 3, ngram_max: 2, ..Default::default() },
            VectorizerConfig { max_df: 0.0, ..Default::default() },
            VectorizerConfig { max_df: 1.5, ..Default::default() },
            VectorizerConfig { min_df: 0, ..Default::default() },
            VectorizerConfig { max_features: 0, ..Default::default() },
            VectorizerConfig { case_sensitive: false, ..Default::default() },
        ] {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn dump_is_deterministic() {
        let a = Vocabulary::fit(&abcd_corpus(), &cfg(1, 1.0)).unwrap();
        let b = Vocabulary::fit(&abcd_corpus(), &cfg(1, 1.0)).unwrap();
        assert_eq!(a.dump(), b.dump());
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    #[test]
    fn max_df_threshold_uses_ceil() {
        let c = VectorizerConfig::default();
        assert_eq!(c.max_df_count(20), 19);
        assert_eq!(c.max_df_count(21), 20);
        assert_eq!(cfg(1, 0.5).max_df_count(3), 2);
    }
}
