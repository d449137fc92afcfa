//! SMOTE oversampling in feature space.
//!
//! Each minority class is topped up to the majority count. Synthetic rows are
//! produced anchor by anchor in ascending index order: anchor `i` of a class
//! needing `s` extra rows with `m` members yields `s / m` rows, plus one more
//! when `i < s % m`. For every row a neighbor is drawn uniformly from the
//! anchor's `k` nearest same-class rows (Euclidean), then `λ ~ U[0, 1)`.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{FeatureMatrix, SparseRow};

/// Name of the generator recorded in model artifacts.
pub const RNG_NAME: &str = "ChaCha8Rng(rand_chacha 0.9, seed_from_u64)";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResampleError {
    #[error("class {label} has {count} sample(s); SMOTE needs at least 2")]
    ClassTooSmall { label: usize, count: usize },
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("k_neighbors_cap must be >= 1")]
    InvalidConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TargetPolicy {
    #[default]
    MatchMajority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteConfig {
    pub target_policy: TargetPolicy,
    pub k_neighbors_cap: usize,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            target_policy: TargetPolicy::MatchMajority,
            k_neighbors_cap: 5,
            seed: 42,
        }
    }
}

impl SmoteConfig {
    /// Neighbor count used for a class of `class_count` samples.
    pub fn k_for(&self, class_count: usize) -> usize {
        self.k_neighbors_cap.min(class_count.saturating_sub(1))
    }
}

/// Provenance of one synthetic row, for auditing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticOrigin {
    pub anchor: usize,
    pub neighbor: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct Resampled {
    pub x: FeatureMatrix,
    pub y: Vec<usize>,
    /// One entry per synthetic row, aligned with rows `n_original..`.
    pub origins: Vec<SyntheticOrigin>,
    pub n_original: usize,
}

impl Resampled {
    pub fn class_counts(&self) -> BTreeMap<usize, usize> {
        class_counts(&self.y)
    }
}

pub fn class_counts(y: &[usize]) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for &label in y {
        *counts.entry(label).or_insert(0) += 1;
    }
    counts
}

/// Indices of the `k` nearest rows to `anchor` among `members`, excluding the
/// anchor. Ties go to the lower row index.
fn nearest_neighbors(x: &FeatureMatrix, members: &[usize], anchor: usize, k: usize) -> Vec<usize> {
    let a = x.row(anchor);
    let mut dists: Vec<(f64, usize)> = members
        .iter()
        .filter(|&&j| j != anchor)
        .map(|&j| (a.squared_distance(x.row(j)), j))
        .collect();
    dists.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
    dists.truncate(k);
    dists.into_iter().map(|(_, j)| j).collect()
}

/// `a + λ (b - a)`, clamped per coordinate to the segment between the parents.
pub fn interpolate(a: &SparseRow, b: &SparseRow, lambda: f64) -> SparseRow {
    let pairs = a
        .merge_with(b)
        .map(|(i, x, y)| {
            let v = x + lambda * (y - x);
            (i as u32, v.clamp(x.min(y), x.max(y)))
        })
        .collect();
    SparseRow::from_pairs(pairs)
}

pub fn smote_resample(
    x: &FeatureMatrix,
    y: &[usize],
    config: &SmoteConfig,
) -> Result<Resampled, ResampleError> {
    if x.n_rows() != y.len() {
        return Err(ResampleError::LengthMismatch {
            rows: x.n_rows(),
            labels: y.len(),
        });
    }
    if config.k_neighbors_cap < 1 {
        return Err(ResampleError::InvalidConfig);
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &label) in y.iter().enumerate() {
        members.entry(label).or_default().push(i);
    }
    let target = members.values().map(Vec::len).max().unwrap_or(0);

    for (&label, idx) in &members {
        if idx.len() < target && idx.len() < 2 {
            return Err(ResampleError::ClassTooSmall {
                label,
                count: idx.len(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = x.clone();
    let mut out_y = y.to_vec();
    let mut origins = Vec::new();

    for (&label, idx) in &members {
        let m = idx.len();
        if m >= target {
            continue;
        }
        let needed = target - m;
        let k = config.k_for(m);
        let (per_anchor, extra) = (needed / m, needed % m);
        for (pos, &anchor) in idx.iter().enumerate() {
            let draws = per_anchor + usize::from(pos < extra);
            if draws == 0 {
                continue;
            }
            let neighbors = nearest_neighbors(x, idx, anchor, k);
            for _ in 0..draws {
                let neighbor = neighbors[rng.random_range(0..neighbors.len())];
                let lambda: f64 = rng.random();
                out.push(interpolate(x.row(anchor), x.row(neighbor), lambda));
                out_y.push(label);
                origins.push(SyntheticOrigin {
                    anchor,
                    neighbor,
                    lambda,
                });
            }
        }
    }

    Ok(Resampled {
        x: out,
        y: out_y,
        origins,
        n_original: y.len(),
    })
}
