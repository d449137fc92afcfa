//! YNote tokens.
//!
//! A YNote string is an unbroken run of fixed-width 4-character notes: two
//! characters of pitch (letter + octave digit, or `00` for a rest) followed by
//! a two-character duration code. Lowercase letters mark the half-step pitch
//! next to the uppercase letter and are kept verbatim.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Width of one note token in bytes.
pub const TOKEN_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum YnoteError {
    #[error("malformed token {token:?} at note {position}: {reason}")]
    MalformedToken {
        token: String,
        position: usize,
        reason: &'static str,
    },
    #[error("input length {len} is not a multiple of 4")]
    LengthNotMultipleOf4 { len: usize },
    #[error("input contains no complete note token")]
    EmptyInput,
}

/// Pitch part of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pitch {
    Rest,
    /// `letter` is one of `A-G` or `a-g`; `octave` is 0-9.
    Tone { letter: char, octave: u8 },
}

/// A validated 4-character YNote token.
///
/// The raw bytes are the source of truth; every accessor is derived from them,
/// so serializing a parsed note reproduces its input byte for byte.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Note {
    raw: [u8; TOKEN_LEN],
}

fn is_pitch_letter(b: u8) -> bool {
    matches!(b, b'A'..=b'G' | b'a'..=b'g')
}

fn is_duration_char(b: u8) -> bool {
    b.is_ascii_digit() || b == b'.'
}

fn validate(raw: &[u8]) -> Result<(), &'static str> {
    if raw.len() != TOKEN_LEN {
        return Err("token must be exactly 4 characters");
    }
    let (p0, p1) = (raw[0], raw[1]);
    if p0 == b'0' {
        if p1 != b'0' {
            return Err("pitch starting with '0' must be the rest marker \"00\"");
        }
    } else {
        if !is_pitch_letter(p0) {
            return Err("pitch letter must be A-G, a-g, or the rest marker");
        }
        if !p1.is_ascii_digit() {
            return Err("octave must be a digit 0-9");
        }
    }
    if !raw[2..].iter().all(|&b| is_duration_char(b)) {
        return Err("duration code must use 0-9 and '.'");
    }
    Ok(())
}

impl Note {
    /// Parses a single 4-character token.
    pub fn parse(token: &str) -> Result<Self, YnoteError> {
        Self::parse_at(token, 0)
    }

    fn parse_at(token: &str, position: usize) -> Result<Self, YnoteError> {
        validate(token.as_bytes()).map_err(|reason| YnoteError::MalformedToken {
            token: token.to_string(),
            position,
            reason,
        })?;
        let mut raw = [0u8; TOKEN_LEN];
        raw.copy_from_slice(token.as_bytes());
        Ok(Self { raw })
    }

    /// Builds a note from its parts. `duration` must be a valid 2-character code.
    pub fn new(pitch: Pitch, duration: &str) -> Result<Self, YnoteError> {
        let mut s = String::with_capacity(TOKEN_LEN);
        match pitch {
            Pitch::Rest => s.push_str("00"),
            Pitch::Tone { letter, octave } => {
                s.push(letter);
                s.push(char::from(b'0'.wrapping_add(octave)));
            }
        }
        s.push_str(duration);
        Self::parse(&s)
    }

    pub fn rest(duration: &str) -> Result<Self, YnoteError> {
        Self::new(Pitch::Rest, duration)
    }

    pub fn tone(letter: char, octave: u8, duration: &str) -> Result<Self, YnoteError> {
        Self::new(Pitch::Tone { letter, octave }, duration)
    }

    pub fn as_str(&self) -> &str {
        // validated ASCII
        std::str::from_utf8(&self.raw).expect("note bytes are ASCII")
    }

    /// The token text; inverse of [`Note::parse`].
    pub fn serialize(&self) -> String {
        self.as_str().to_string()
    }

    pub fn is_rest(&self) -> bool {
        self.raw[0] == b'0' && self.raw[1] == b'0'
    }

    pub fn pitch(&self) -> Pitch {
        if self.is_rest() {
            Pitch::Rest
        } else {
            Pitch::Tone {
                letter: char::from(self.raw[0]),
                octave: self.raw[1] - b'0',
            }
        }
    }

    /// Pitch letter verbatim, `None` for rests.
    pub fn pitch_letter(&self) -> Option<char> {
        match self.pitch() {
            Pitch::Rest => None,
            Pitch::Tone { letter, .. } => Some(letter),
        }
    }

    pub fn octave(&self) -> Option<u8> {
        match self.pitch() {
            Pitch::Rest => None,
            Pitch::Tone { octave, .. } => Some(octave),
        }
    }

    /// Two-character duration code, kept opaque.
    pub fn duration_code(&self) -> &str {
        &self.as_str()[2..]
    }
}

impl fmt::Debug for Note {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Note({})", self.as_str())
    }
}

impl fmt::Display for Note {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Note {
    type Err = YnoteError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for Note {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Note {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Note::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// What to do with a trailing partial token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailPolicy {
    #[default]
    Strict,
    TruncateTail,
}

/// A song cut into notes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    tokens: Vec<Note>,
    source_len: usize,
    remainder: String,
}

impl TokenSequence {
    /// Wraps already-validated notes (e.g. generator output).
    pub fn from_notes(tokens: Vec<Note>) -> Self {
        let source_len = tokens.len() * TOKEN_LEN;
        Self {
            tokens,
            source_len,
            remainder: String::new(),
        }
    }

    pub fn notes(&self) -> &[Note] {
        &self.tokens
    }

    pub fn into_notes(self) -> Vec<Note> {
        self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Length of the string this sequence was cut from.
    pub fn source_len(&self) -> usize {
        self.source_len
    }

    /// Characters dropped under [`TailPolicy::TruncateTail`].
    pub fn remainder(&self) -> &str {
        &self.remainder
    }

    /// Concatenation of all tokens, i.e. the accepted prefix of the input.
    pub fn to_ynote(&self) -> String {
        let mut s = String::with_capacity(self.tokens.len() * TOKEN_LEN);
        for n in &self.tokens {
            s.push_str(n.as_str());
        }
        s
    }
}

/// Cuts a YNote string every four characters, validating each token.
pub fn tokenize(input: &str, policy: TailPolicy) -> Result<TokenSequence, YnoteError> {
    let bytes = input.as_bytes();
    let rem = bytes.len() % TOKEN_LEN;
    if rem != 0 && policy == TailPolicy::Strict {
        return Err(YnoteError::LengthNotMultipleOf4 { len: bytes.len() });
    }
    let full = bytes.len() - rem;
    let mut tokens = Vec::with_capacity(full / TOKEN_LEN);
    for (position, chunk) in bytes[..full].chunks_exact(TOKEN_LEN).enumerate() {
        let Ok(text) = std::str::from_utf8(chunk) else {
            return Err(YnoteError::MalformedToken {
                token: String::from_utf8_lossy(chunk).into_owned(),
                position,
                reason: "token must be ASCII",
            });
        };
        tokens.push(Note::parse_at(text, position)?);
    }
    if tokens.is_empty() {
        return Err(YnoteError::EmptyInput);
    }
    Ok(TokenSequence {
        tokens,
        source_len: bytes.len(),
        remainder: String::from_utf8_lossy(&bytes[full..]).into_owned(),
    })
}
