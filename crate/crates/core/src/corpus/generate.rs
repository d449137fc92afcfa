//! Synthetic stand-ins for the three song sources.
//!
//! None of these reproduce real human or LLM output. They are three
//! statistically distinct generators, designed so that the pipeline has
//! something separable to learn at desk scale:
//!
//! * native-like: independent pentatonic-weighted notes, mixed durations,
//!   rests at `rest_prob` (default 0.12).
//! * algorithmic: an order-1 chain over a rest-free reference style, then
//!   annealed against a [`RuleSet`] (scale, max leap, no rests).
//! * llm-like: an order-2 chain fitted on a motif-based style corpus, which
//!   carries its own recurring 2-gram signatures and the odd rest.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::anneal::{generate_algorithmic, AnnealSchedule, RuleSet};
use super::markov::MarkovModel;
use super::{CorpusError, LabeledSong, SourceClass};
use crate::ynote::{Note, TokenSequence};

const ALGO_REFERENCE_SALT: u64 = 0xA160_5EED_0000_0001;
const LLM_STYLE_SALT: u64 = 0x11A5_7E1E_0000_0002;
const REFERENCE_SONGS: usize = 40;

const NATIVE_LETTERS: [(char, f64); 9] = [
    ('C', 3.0),
    ('D', 3.0),
    ('E', 3.0),
    ('G', 3.0),
    ('A', 3.0),
    ('F', 1.0),
    ('B', 1.0),
    ('c', 0.5),
    ('f', 0.5),
];
const NATIVE_OCTAVES: [(u8, f64); 3] = [(4, 0.55), (5, 0.35), (3, 0.10)];
const NATIVE_DURATIONS: [(&str, f64); 6] = [
    ("04", 0.30),
    ("08", 0.30),
    ("02", 0.15),
    ("16", 0.15),
    ("4.", 0.05),
    ("8.", 0.05),
];
/// Rest tokens emitted by the native-like generator.
pub const REST_TOKENS: [&str; 3] = ["0002", "0004", "0008"];

const LLM_MOTIFS: [&[&str]; 10] = [
    &["A502", "D68."],
    &["G402", "E508"],
    &["C616", "D616", "E616"],
    &["G502", "G516"],
    &["C504", "D504"],
    &["D502", "G508"],
    &["E508", "C616"],
    &["A508", "A516", "G516"],
    &["E616", "D616"],
    &["G516", "E616"],
];
const LLM_REST_PROB: f64 = 0.04;

fn weighted<'a, T, R: Rng + ?Sized>(items: &'a [(T, f64)], rng: &mut R) -> &'a T {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut u = rng.random::<f64>() * total;
    for (item, w) in items {
        if u < *w {
            return item;
        }
        u -= w;
    }
    &items[items.len() - 1].0
}

fn note(s: &str) -> Note {
    Note::parse(s).expect("built-in token")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NativeStyle {
    pub rest_prob: f64,
}

impl Default for NativeStyle {
    fn default() -> Self {
        Self { rest_prob: 0.12 }
    }
}

pub fn generate_native_like(style: &NativeStyle, length: usize, seed: u64) -> Result<TokenSequence, CorpusError> {
    if !(0.0..=1.0).contains(&style.rest_prob) {
        return Err(CorpusError::InvalidConfig("rest_prob must be in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let notes = (0..length)
        .map(|_| {
            if rng.random::<f64>() < style.rest_prob {
                note(REST_TOKENS[rng.random_range(0..REST_TOKENS.len())])
            } else {
                let letter = *weighted(&NATIVE_LETTERS, &mut rng);
                let octave = *weighted(&NATIVE_OCTAVES, &mut rng);
                let dur = *weighted(&NATIVE_DURATIONS, &mut rng);
                Note::tone(letter, octave, dur).expect("built-in alphabet")
            }
        })
        .collect();
    Ok(TokenSequence::from_notes(notes))
}

/// Rest-free songs in the native pitch style; the algorithmic chain is
/// fitted on these.
pub fn algorithm_reference_corpus(seed: u64) -> Vec<TokenSequence> {
    let style = NativeStyle { rest_prob: 0.0 };
    (0..REFERENCE_SONGS as u64)
        .map(|i| generate_native_like(&style, 64, seed ^ ALGO_REFERENCE_SALT ^ i).expect("valid style"))
        .collect()
}

/// Songs stitched from a fixed motif bank; the llm-like chain is fitted on
/// these.
pub fn llm_style_corpus(seed: u64) -> Vec<TokenSequence> {
    (0..REFERENCE_SONGS as u64)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ LLM_STYLE_SALT ^ i);
            let mut notes = Vec::with_capacity(70);
            while notes.len() < 64 {
                if rng.random::<f64>() < LLM_REST_PROB {
                    notes.push(note("0008"));
                }
                let motif = LLM_MOTIFS[rng.random_range(0..LLM_MOTIFS.len())];
                notes.extend(motif.iter().map(|t| note(t)));
            }
            TokenSequence::from_notes(notes)
        })
        .collect()
}

pub fn generate_llm_like(model: &MarkovModel, length: usize, seed: u64) -> Result<TokenSequence, CorpusError> {
    if model.states().is_empty() {
        return Err(CorpusError::EmptyModel);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(TokenSequence::from_notes(model.generate(length, &mut rng)))
}

/// One class block of a generator config. Unset fields take class defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub class: SourceClass,
    pub count: usize,
    /// Inclusive note-count range.
    #[serde(default = "default_length")]
    pub length: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rest_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Vec<char>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_leap: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub markov_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anneal: Option<AnnealSchedule>,
}

fn default_length() -> [usize; 2] {
    [32, 64]
}

impl ClassSpec {
    pub fn new(class: SourceClass, count: usize) -> Self {
        Self {
            class,
            count,
            length: default_length(),
            rest_prob: None,
            scale: None,
            max_leap: None,
            markov_order: None,
            anneal: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(rename = "class")]
    pub classes: Vec<ClassSpec>,
}

fn default_seed() -> u64 {
    42
}

impl GeneratorConfig {
    /// `native`/`algorithm`/`llm` song counts with default settings.
    pub fn balanced(native: usize, algorithm: usize, llm: usize, seed: u64) -> Self {
        Self {
            seed,
            classes: vec![
                ClassSpec::new(SourceClass::Native, native),
                ClassSpec::new(SourceClass::Algorithm, algorithm),
                ClassSpec::new(SourceClass::Llm, llm),
            ],
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CorpusError> {
        toml::from_str(text).map_err(|e| CorpusError::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        for spec in &self.classes {
            let [lo, hi] = spec.length;
            if lo < 2 || lo > hi {
                return Err(CorpusError::InvalidConfig(format!(
                    "{}: length range must satisfy 2 <= min <= max",
                    spec.class.slug()
                )));
            }
            let misplaced = |field: &str| {
                Err(CorpusError::InvalidConfig(format!("{}: `{field}` does not apply to this class", spec.class.slug())))
            };
            match spec.class {
                SourceClass::Native => {
                    if spec.scale.is_some() || spec.max_leap.is_some() || spec.anneal.is_some() || spec.markov_order.is_some() {
                        return misplaced("scale/max_leap/anneal/markov_order");
                    }
                }
                SourceClass::Algorithm => {
                    if spec.rest_prob.is_some() {
                        return misplaced("rest_prob");
                    }
                    if spec.markov_order.is_some_and(|o| o != 1) {
                        return Err(CorpusError::InvalidConfig("algorithm: markov_order must be 1".into()));
                    }
                }
                SourceClass::Llm => {
                    if spec.rest_prob.is_some() || spec.scale.is_some() || spec.max_leap.is_some() || spec.anneal.is_some() {
                        return misplaced("rest_prob/scale/max_leap/anneal");
                    }
                }
            }
        }
        Ok(())
    }
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self::balanced(300, 300, 300, 42)
    }
}

/// Generates every class block in order. Song `i` (counted across the whole
/// corpus) draws from its own stream seeded with `seed ^ i`, so the output
/// does not depend on scheduling.
pub fn generate_corpus(config: &GeneratorConfig) -> Result<Vec<LabeledSong>, CorpusError> {
    config.validate()?;
    let mut songs = Vec::with_capacity(config.classes.iter().map(|c| c.count).sum());
    let mut global = 0u64;
    for spec in &config.classes {
        let [lo, hi] = spec.length;
        let length_for = |song_seed: u64| ChaCha8Rng::seed_from_u64(song_seed.rotate_left(17)).random_range(lo..=hi);
        let push = |songs: &mut Vec<LabeledSong>, i: usize, tokens: TokenSequence| {
            songs.push(LabeledSong {
                id: format!("{}-{i:05}", spec.class.slug()),
                label: spec.class,
                tokens,
            });
        };
        match spec.class {
            SourceClass::Native => {
                let style = NativeStyle {
                    rest_prob: spec.rest_prob.unwrap_or(NativeStyle::default().rest_prob),
                };
                for i in 0..spec.count {
                    let s = config.seed ^ global;
                    global += 1;
                    push(&mut songs, i, generate_native_like(&style, length_for(s), s)?);
                }
            }
            SourceClass::Algorithm => {
                let model = MarkovModel::fit(&algorithm_reference_corpus(config.seed), 1)?;
                let defaults = RuleSet::default();
                let rules = RuleSet {
                    scale: spec.scale.clone().unwrap_or(defaults.scale),
                    max_leap: spec.max_leap.unwrap_or(defaults.max_leap),
                    forbid_rests: true,
                };
                let schedule = spec.anneal.unwrap_or_default();
                for i in 0..spec.count {
                    let s = config.seed ^ global;
                    global += 1;
                    let out = generate_algorithmic(&model, length_for(s), &rules, &schedule, s)?;
                    push(&mut songs, i, TokenSequence::from_notes(out.melody));
                }
            }
            SourceClass::Llm => {
                let order = spec.markov_order.unwrap_or(2);
                let model = MarkovModel::fit(&llm_style_corpus(config.seed), order)?;
                for i in 0..spec.count {
                    let s = config.seed ^ global;
                    global += 1;
                    push(&mut songs, i, generate_llm_like(&model, length_for(s), s)?);
                }
            }
        }
    }
    Ok(songs)
}
