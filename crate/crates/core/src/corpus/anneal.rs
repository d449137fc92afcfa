//! Rule-constrained melody refinement by simulated annealing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::markov::MarkovModel;
use super::CorpusError;
use crate::ynote::Note;

const LETTER_ORDER: [char; 7] = ['C', 'D', 'E', 'F', 'G', 'A', 'B'];

/// Style rules. A melody's energy is its number of violations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleSet {
    /// Allowed uppercase pitch letters. Lowercase (half-step) letters are
    /// always out of scale.
    pub scale: Vec<char>,
    /// Largest allowed step between adjacent in-scale notes, counted in
    /// positions of the scale ladder.
    pub max_leap: u32,
    pub forbid_rests: bool,
}

impl Default for RuleSet {
    fn default() -> Self {
        Self {
            scale: vec!['C', 'D', 'E', 'G', 'A'],
            max_leap: 4,
            forbid_rests: true,
        }
    }
}

impl RuleSet {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.scale.is_empty() || self.scale.iter().any(|c| !LETTER_ORDER.contains(c)) {
            return Err(CorpusError::InvalidConfig("scale must be a non-empty set of letters A-G".into()));
        }
        Ok(())
    }

    fn ladder(&self) -> Vec<char> {
        LETTER_ORDER.iter().copied().filter(|c| self.scale.contains(c)).collect()
    }

    /// Ladder position of an in-scale note.
    fn position(&self, ladder: &[char], note: &Note) -> Option<i64> {
        let letter = note.pitch_letter()?;
        let idx = ladder.iter().position(|&c| c == letter)?;
        Some(i64::from(note.octave()?) * ladder.len() as i64 + idx as i64)
    }

    fn note_violation(&self, ladder: &[char], note: &Note) -> u32 {
        if note.is_rest() {
            u32::from(self.forbid_rests)
        } else {
            u32::from(self.position(ladder, note).is_none())
        }
    }

    fn leap_violation(&self, ladder: &[char], a: &Note, b: &Note) -> u32 {
        match (self.position(ladder, a), self.position(ladder, b)) {
            (Some(x), Some(y)) => u32::from((x - y).unsigned_abs() > u64::from(self.max_leap)),
            _ => 0,
        }
    }

    pub fn energy(&self, melody: &[Note]) -> u32 {
        let ladder = self.ladder();
        let notes: u32 = melody.iter().map(|n| self.note_violation(&ladder, n)).sum();
        let leaps: u32 = melody.windows(2).map(|w| self.leap_violation(&ladder, &w[0], &w[1])).sum();
        notes + leaps
    }

    /// Violations involving position `p`.
    fn local_energy(&self, ladder: &[char], melody: &[Note], p: usize) -> u32 {
        let mut e = self.note_violation(ladder, &melody[p]);
        if p > 0 {
            e += self.leap_violation(ladder, &melody[p - 1], &melody[p]);
        }
        if p + 1 < melody.len() {
            e += self.leap_violation(ladder, &melody[p], &melody[p + 1]);
        }
        e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealSchedule {
    pub initial_temp: f64,
    /// Geometric factor in (0, 1).
    pub cooling: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            initial_temp: 2.0,
            cooling: 0.995,
            steps: 2000,
            seed: 42,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if !(self.initial_temp > 0.0 && self.initial_temp.is_finite()) {
            return Err(CorpusError::InvalidConfig("initial_temp must be positive".into()));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(CorpusError::InvalidConfig("cooling must be in (0, 1)".into()));
        }
        if self.steps < 1 {
            return Err(CorpusError::InvalidConfig("steps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn temperature(&self, step: usize) -> f64 {
        self.initial_temp * self.cooling.powi(step as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealOutcome {
    /// Best melody seen.
    pub melody: Vec<Note>,
    pub initial_energy: u32,
    pub final_energy: u32,
    pub accepted_moves: usize,
}

/// Anneals `initial` against `rules`. A move resamples one random position
/// from the chain's conditional on its predecessor; moves with ΔE ≤ 0 are
/// always taken, others with probability `exp(-ΔE / T)`. Stops early once the
/// energy reaches zero.
pub fn anneal(
    initial: Vec<Note>,
    model: &MarkovModel,
    rules: &RuleSet,
    schedule: &AnnealSchedule,
) -> Result<AnnealOutcome, CorpusError> {
    rules.validate()?;
    schedule.validate()?;
    if model.states().is_empty() {
        return Err(CorpusError::EmptyModel);
    }
    let ladder = rules.ladder();
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut current = initial;
    let mut energy = rules.energy(&current);
    let initial_energy = energy;
    let mut best = current.clone();
    let mut best_energy = energy;
    let mut accepted_moves = 0;

    if current.is_empty() {
        return Ok(AnnealOutcome {
            melody: current,
            initial_energy,
            final_energy: energy,
            accepted_moves,
        });
    }
    for step in 0..schedule.steps {
        if best_energy == 0 {
            break;
        }
        let p = rng.random_range(0..current.len());
        let proposal = model.sample_next(&current[..p], &mut rng);
        if proposal == current[p] {
            continue;
        }
        let before = rules.local_energy(&ladder, &current, p);
        let old = std::mem::replace(&mut current[p], proposal);
        let after = rules.local_energy(&ladder, &current, p);
        let delta = i64::from(after) - i64::from(before);
        let t = schedule.temperature(step);
        let accept = delta <= 0 || rng.random::<f64>() < (-(delta as f64) / t).exp();
        if accept {
            energy = (i64::from(energy) + delta) as u32;
            accepted_moves += 1;
            if energy < best_energy {
                best_energy = energy;
                best.clone_from(&current);
            }
        } else {
            current[p] = old;
        }
    }
    Ok(AnnealOutcome {
        melody: best,
        initial_energy,
        final_energy: best_energy,
        accepted_moves,
    })
}

/// Samples a melody from an order-1 chain, then anneals it. `seed` drives the
/// chain sample; annealing uses `schedule.seed ^ seed`.
pub fn generate_algorithmic(
    model: &MarkovModel,
    length: usize,
    rules: &RuleSet,
    schedule: &AnnealSchedule,
    seed: u64,
) -> Result<AnnealOutcome, CorpusError> {
    if model.states().is_empty() {
        return Err(CorpusError::EmptyModel);
    }
    if length < 2 {
        return Err(CorpusError::InvalidConfig("algorithmic melodies need length >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial = model.generate(length, &mut rng);
    let schedule = AnnealSchedule {
        seed: schedule.seed ^ seed,
        ..*schedule
    };
    anneal(initial, model, rules, &schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ynote::{tokenize, TailPolicy, TokenSequence};

    fn seq(s: &str) -> TokenSequence {
        tokenize(s, TailPolicy::Strict).unwrap()
    }

    fn notes(s: &str) -> Vec<Note> {
        seq(s).into_notes()
    }

    fn pentatonic_model() -> MarkovModel {
        MarkovModel::fit(
            &[seq("C404D404E404G404A404G404E404D404C404F404E404D404C404A404G404C404E404")],
            1,
        )
        .unwrap()
    }

    #[test]
    fn energy_counts_each_rule() {
        let r = RuleSet::default();
        assert_eq!(r.energy(&notes("C404D404E404")), 0);
        assert_eq!(r.energy(&notes("C404F404E404")), 1);
        assert_eq!(r.energy(&notes("C404c404E404")), 1);
        assert_eq!(r.energy(&notes("C4040004E404")), 1);
        // C4 (pos 20) -> C5 (pos 25): leap of 5 ladder steps
        assert_eq!(r.energy(&notes("C404C504")), 1);
        assert_eq!(r.energy(&notes("C404A404")), 0);
    }

    #[test]
    fn valid_melody_is_unchanged() {
        let m = pentatonic_model();
        let melody = notes("C404D404E404G404A404G404");
        let out = anneal(melody.clone(), &m, &RuleSet::default(), &AnnealSchedule::default()).unwrap();
        assert_eq!(out.melody, melody);
        assert_eq!(out.final_energy, 0);
    }

    #[test]
    fn single_out_of_scale_note_is_repaired() {
        let m = pentatonic_model();
        let melody = notes("C404D404E404F404G404A404G404E404");
        let rules = RuleSet::default();
        assert_eq!(rules.energy(&melody), 1);
        let schedule = AnnealSchedule { steps: 10_000, ..Default::default() };
        let out = anneal(melody, &m, &rules, &schedule).unwrap();
        assert_eq!(out.final_energy, 0);
        assert_eq!(rules.energy(&out.melody), 0);
    }

    #[test]
    fn energy_never_increases_and_is_seeded() {
        let m = pentatonic_model();
        let rules = RuleSet::default();
        for seed in 0..20 {
            let a = generate_algorithmic(&m, 32, &rules, &AnnealSchedule { steps: 50, ..Default::default() }, seed).unwrap();
            assert!(a.final_energy <= a.initial_energy);
            assert_eq!(rules.energy(&a.melody), a.final_energy);
            let b = generate_algorithmic(&m, 32, &rules, &AnnealSchedule { steps: 50, ..Default::default() }, seed).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn schedule_cools_strictly() {
        let s = AnnealSchedule::default();
        assert!((1..100).all(|k| s.temperature(k) < s.temperature(k - 1)));
        assert!(AnnealSchedule { cooling: 1.0, ..s }.validate().is_err());
        assert!(AnnealSchedule { steps: 0, ..s }.validate().is_err());
        assert!(AnnealSchedule { initial_temp: 0.0, ..s }.validate().is_err());
    }

    #[test]
    fn short_length_rejected() {
        let m = pentatonic_model();
        assert!(generate_algorithmic(&m, 1, &RuleSet::default(), &AnnealSchedule::default(), 0).is_err());
    }
}
