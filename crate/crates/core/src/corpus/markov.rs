//! Maximum-likelihood Markov melody models of order 1 or 2.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::ynote::{Note, TokenSequence};

/// Categorical distribution with outcomes in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Categorical<T> {
    outcomes: Vec<(T, f64)>,
}

impl<T: Ord + Clone> Categorical<T> {
    pub fn from_counts(counts: BTreeMap<T, usize>) -> Self {
        let total: usize = counts.values().sum();
        let outcomes = counts
            .into_iter()
            .map(|(k, c)| (k, c as f64 / total as f64))
            .collect();
        Self { outcomes }
    }

    pub fn outcomes(&self) -> &[(T, f64)] {
        &self.outcomes
    }

    pub fn probability(&self, outcome: &T) -> f64 {
        self.outcomes
            .iter()
            .find(|(k, _)| k == outcome)
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &T {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, p) in &self.outcomes {
            acc += p;
            if u < acc {
                return k;
            }
        }
        &self.outcomes.last().expect("non-empty categorical").0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovModel {
    order: usize,
    states: Vec<Note>,
    transition: BTreeMap<Vec<Note>, Categorical<Note>>,
    initial: Categorical<Vec<Note>>,
}

impl MarkovModel {
    /// Fits transition counts `context -> next` over every sequence.
    pub fn fit(corpus: &[TokenSequence], order: usize) -> Result<Self, CorpusError> {
        if !(1..=2).contains(&order) {
            return Err(CorpusError::InvalidConfig(format!("markov order must be 1 or 2, got {order}")));
        }
        if corpus.is_empty() || corpus.iter().any(|s| s.len() <= order) {
            return Err(CorpusError::CorpusTooShort { order });
        }
        let mut trans: BTreeMap<Vec<Note>, BTreeMap<Note, usize>> = BTreeMap::new();
        let mut init: BTreeMap<Vec<Note>, usize> = BTreeMap::new();
        let mut states = std::collections::BTreeSet::new();
        for seq in corpus {
            let notes = seq.notes();
            states.extend(notes.iter().copied());
            *init.entry(notes[..order].to_vec()).or_insert(0) += 1;
            for w in notes.windows(order + 1) {
                *trans
                    .entry(w[..order].to_vec())
                    .or_default()
                    .entry(w[order])
                    .or_insert(0) += 1;
            }
        }
        Ok(Self {
            order,
            states: states.into_iter().collect(),
            transition: trans
                .into_iter()
                .map(|(k, v)| (k, Categorical::from_counts(v)))
                .collect(),
            initial: Categorical::from_counts(init),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn states(&self) -> &[Note] {
        &self.states
    }

    pub fn initial(&self) -> &Categorical<Vec<Note>> {
        &self.initial
    }

    pub fn transitions(&self) -> impl Iterator<Item = (&[Note], &Categorical<Note>)> {
        self.transition.iter().map(|(k, v)| (k.as_slice(), v))
    }

    pub fn next_distribution(&self, context: &[Note]) -> Option<&Categorical<Note>> {
        self.transition.get(context)
    }

    /// Draws a single note to follow `history`. Unseen contexts (and an empty
    /// history) back off to the first note of a fresh initial context.
    pub fn sample_next<R: Rng + ?Sized>(&self, history: &[Note], rng: &mut R) -> Note {
        if history.len() >= self.order {
            if let Some(d) = self.transition.get(&history[history.len() - self.order..]) {
                return *d.sample(rng);
            }
        }
        self.initial.sample(rng)[0]
    }

    /// Samples `length` notes. Dead-end contexts restart from a fresh initial
    /// context.
    pub fn generate<R: Rng + ?Sized>(&self, length: usize, rng: &mut R) -> Vec<Note> {
        let mut out: Vec<Note> = Vec::with_capacity(length);
        while out.len() < length {
            let ctx = out.len().checked_sub(self.order).map(|s| &out[s..]);
            match ctx.and_then(|c| self.transition.get(c)) {
                Some(d) => {
                    let n = *d.sample(rng);
                    out.push(n);
                }
                None => {
                    let start = self.initial.sample(rng).clone();
                    for n in start {
                        if out.len() < length {
                            out.push(n);
                        }
                    }
                }
            }
        }
        out
    }
}
