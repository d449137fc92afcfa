//! Labeled corpus files and synthetic three-source generators.
//!
//! Corpus files are UTF-8, one record per line: `id<TAB>label<TAB>ynote`,
//! where `label` is `0` (Native), `1` (Algorithm) or `2` (LLM).

pub mod anneal;
pub mod generate;
pub mod markov;

use std::fmt;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ynote::{tokenize, TailPolicy, TokenSequence, YnoteError};

pub use anneal::{anneal, generate_algorithmic, AnnealOutcome, AnnealSchedule, RuleSet};
pub use generate::{generate_corpus, generate_llm_like, generate_native_like, ClassSpec, GeneratorConfig, NativeStyle};
pub use markov::{Categorical, MarkovModel};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("{} malformed record(s); first: {}", .0.len(), .0.first().map(ToString::to_string).unwrap_or_default())]
    Aggregated(Vec<RecordError>),
    #[error("every training sequence must be longer than the markov order ({order})")]
    CorpusTooShort { order: usize },
    #[error("markov model has no states")]
    EmptyModel,
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Provenance class of a song.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceClass {
    Native,
    Algorithm,
    Llm,
}

impl SourceClass {
    pub const ALL: [SourceClass; 3] = [SourceClass::Native, SourceClass::Algorithm, SourceClass::Llm];

    pub fn label(self) -> usize {
        self as usize
    }

    pub fn from_label(label: usize) -> Option<Self> {
        Self::ALL.get(label).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SourceClass::Native => "Native",
            SourceClass::Algorithm => "Algorithm",
            SourceClass::Llm => "LLM",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            SourceClass::Native => "native",
            SourceClass::Algorithm => "algorithm",
            SourceClass::Llm => "llm",
        }
    }

    pub fn names() -> Vec<String> {
        Self::ALL.iter().map(|c| c.name().to_string()).collect()
    }
}

impl fmt::Display for SourceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SourceClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "native" | "0" => Ok(SourceClass::Native),
            "algorithm" | "algo" | "1" => Ok(SourceClass::Algorithm),
            "llm" | "2" => Ok(SourceClass::Llm),
            _ => Err(format!("unknown class {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSong {
    pub id: String,
    pub label: SourceClass,
    pub tokens: TokenSequence,
}

impl LabeledSong {
    pub fn ynote(&self) -> String {
        self.tokens.to_ynote()
    }

    pub fn to_record(&self) -> String {
        format!("{}\t{}\t{}", self.id, self.label.label(), self.ynote())
    }
}

fn ynote_message(e: &YnoteError) -> String {
    e.to_string()
}

pub fn parse_record(line: &str, line_no: usize) -> Result<LabeledSong, RecordError> {
    let err = |message: String| RecordError { line: line_no, message };
    let mut parts = line.split('\t');
    let (Some(id), Some(label), Some(ynote), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err(err("expected 3 tab-separated fields: id, label, ynote".into()));
    };
    if id.is_empty() {
        return Err(err("empty id".into()));
    }
    let label = label
        .parse::<usize>()
        .ok()
        .and_then(SourceClass::from_label)
        .ok_or_else(|| err(format!("label {label:?} is not 0, 1 or 2")))?;
    let tokens = tokenize(ynote, TailPolicy::Strict).map_err(|e| err(ynote_message(&e)))?;
    Ok(LabeledSong {
        id: id.to_string(),
        label,
        tokens,
    })
}

/// Every valid record plus one error per bad line.
#[derive(Debug, Default)]
pub struct LoadReport {
    pub songs: Vec<LabeledSong>,
    pub errors: Vec<RecordError>,
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<LoadReport, CorpusError> {
    let mut report = LoadReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        match parse_record(line, i + 1) {
            Ok(song) => report.songs.push(song),
            Err(e) => report.errors.push(e),
        }
    }
    Ok(report)
}

/// Loads a corpus file, failing with all per-line errors if any line is bad.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<LabeledSong>, CorpusError> {
    let file = fs::File::open(path)?;
    let report = read_corpus(io::BufReader::new(file))?;
    if report.errors.is_empty() {
        Ok(report.songs)
    } else {
        Err(CorpusError::Aggregated(report.errors))
    }
}

pub fn write_corpus<W: Write>(songs: &[LabeledSong], mut writer: W) -> Result<(), CorpusError> {
    for (i, song) in songs.iter().enumerate() {
        if song.id.is_empty() || song.id.contains(['\t', '\n', '\r']) {
            return Err(CorpusError::MalformedRecord {
                line: i + 1,
                message: format!("id {:?} is empty or contains tab/newline", song.id),
            });
        }
        writeln!(writer, "{}", song.to_record())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_corpus(songs: &[LabeledSong], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let mut buf = Vec::new();
    write_corpus(songs, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Labels as class indices.
pub fn labels(songs: &[LabeledSong]) -> Vec<usize> {
    songs.iter().map(|s| s.label.label()).collect()
}

pub fn sequences(songs: &[LabeledSong]) -> Vec<TokenSequence> {
    songs.iter().map(|s| s.tokens.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_example_record() {
        let s = parse_record("s1\t0\tG402E508C516", 1).unwrap();
        assert_eq!(s.id, "s1");
        assert_eq!(s.label, SourceClass::Native);
        assert_eq!(s.tokens.len(), 3);
    }

    #[test]
    fn rejects_bad_records() {
        assert_eq!(parse_record("s2\t5\tG402", 4).unwrap_err().line, 4);
        assert!(parse_record("s2\t1", 1).is_err());
        assert!(parse_record("s2\t1\tG402\textra", 1).is_err());
        assert!(parse_record("s2\t1\tG40", 1).is_err());
        assert!(parse_record("\t1\tG402", 1).is_err());
        assert!(parse_record("", 1).is_err());
    }

    #[test]
    fn read_collects_every_bad_line() {
        let text = "a\t0\tG402\nb\t9\tG402\nc\t1\tXX\nd\t2\tC404\n";
        let r = read_corpus(text.as_bytes()).unwrap();
        assert_eq!(r.songs.len(), 2);
        assert_eq!(r.errors.iter().map(|e| e.line).collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn save_load_roundtrip() {
        let text = "a\t0\tG402E508\nb\t1\tC404\nc\t2\t0008D68.\n";
        let songs = read_corpus(text.as_bytes()).unwrap().songs;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.tsv");
        save_corpus(&songs, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), text);
        assert_eq!(load_corpus(&path).unwrap(), songs);
    }

    #[test]
    fn load_fails_with_aggregate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.tsv");
        fs::write(&path, "a\t0\tG402\nb\t7\tG402\n").unwrap();
        match load_corpus(&path) {
            Err(CorpusError::Aggregated(errs)) => assert_eq!(errs[0].line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(load_corpus(dir.path().join("missing")), Err(CorpusError::Io(_))));
    }

    #[test]
    fn class_names() {
        assert_eq!(SourceClass::from_label(2), Some(SourceClass::Llm));
        assert_eq!(SourceClass::from_label(3), None);
        assert_eq!("algorithm".parse::<SourceClass>(), Ok(SourceClass::Algorithm));
        assert_eq!(SourceClass::names(), ["Native", "Algorithm", "LLM"]);
    }
}
