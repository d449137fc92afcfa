//! Splitting, cross-validation folds, and classification metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ClassScores;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("split ratios must be positive and sum to 1 (got {0:?})")]
    InvalidSplit([f64; 3]),
    #[error("class {label} has {count} sample(s); a stratified split needs at least 3")]
    ClassTooSmallForSplit { label: usize, count: usize },
    #[error("fold count must be >= 2")]
    InvalidFolds,
    #[error("class {label} has {count} sample(s), fewer than {k} folds")]
    ClassSmallerThanK { label: usize, count: usize, k: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("label {label} outside 0..{n_classes}")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("class {0} has no positive or no negative samples")]
    DegenerateClass(usize),
    #[error("empty input")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.65,
            val: 0.15,
            test: 0.20,
            seed: 42,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn ratios(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let r = self.ratios();
        if r.iter().any(|v| v.is_nan() || *v <= 0.0) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(EvalError::InvalidSplit(r));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

const TIE_EPS: f64 = 1e-9;

/// Hamilton apportionment: floors of `quotas`, then the leftover units go to
/// the largest fractional parts. Near-equal fractions (within 1e-9) tie and are
/// resolved by `priority` (lower first).
pub fn largest_remainder(quotas: &[f64], total: usize, priority: &[usize]) -> Vec<usize> {
    let mut counts: Vec<usize> = quotas.iter().map(|q| (q + TIE_EPS).floor().max(0.0) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    let frac = |i: usize| {
        let f = quotas[i] - counts[i] as f64;
        if f.abs() < TIE_EPS { 0.0 } else { f }
    };
    order.sort_by(|&a, &b| {
        let (fa, fb) = (frac(a), frac(b));
        if (fa - fb).abs() < TIE_EPS {
            priority[a].cmp(&priority[b])
        } else {
            fb.total_cmp(&fa)
        }
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Whether rows needing `row_need` extra units can be matched to splits
/// needing `col_need`, using only `allowed` cells (one unit per cell).
/// Max-flow/min-cut over the three split nodes.
fn completion_feasible(allowed: &[[bool; 3]], row_need: &[usize], col_need: [usize; 3]) -> bool {
    if row_need.iter().sum::<usize>() != col_need.iter().sum::<usize>() {
        return false;
    }
    (1u8..8).all(|mask| {
        let in_t = |j: usize| mask & (1 << j) != 0;
        let demand: usize = (0..3).filter(|&j| in_t(j)).map(|j| col_need[j]).sum();
        let supply: usize = allowed
            .iter()
            .zip(row_need)
            .map(|(cells, &need)| need.min((0..3).filter(|&j| in_t(j) && cells[j]).count()))
            .sum();
        demand <= supply
    })
}

/// Rounds a class × split quota matrix so every cell is the floor or ceiling
/// of its quota, rows sum to the class sizes and columns to `col_totals`.
///
/// Fractional cells are ranked by descending remainder (ties: class
/// `priority`, then split order) and raised greedily, skipping any cell whose
/// raise would leave the remaining totals unreachable. The result is the
/// lexicographically first feasible set of raised cells in that ranking.
fn controlled_round(quotas: &[[f64; 3]], row_totals: &[usize], col_totals: [usize; 3], priority: &[usize]) -> Vec<[usize; 3]> {
    let n_rows = quotas.len();
    let mut out: Vec<[usize; 3]> = quotas
        .iter()
        .map(|q| q.map(|v| (v + TIE_EPS).floor().max(0.0) as usize))
        .collect();
    let remainder = |r: usize, j: usize| quotas[r][j] - out[r][j] as f64;
    let mut allowed: Vec<[bool; 3]> = (0..n_rows)
        .map(|r| [0, 1, 2].map(|j| remainder(r, j) > TIE_EPS))
        .collect();
    let mut cells: Vec<(usize, usize, f64)> = (0..n_rows)
        .flat_map(|r| (0..3).map(move |j| (r, j)))
        .filter(|&(r, j)| allowed[r][j])
        .map(|(r, j)| (r, j, remainder(r, j)))
        .collect();
    cells.sort_by(|a, b| {
        if (a.2 - b.2).abs() < TIE_EPS {
            priority[a.0].cmp(&priority[b.0]).then(a.1.cmp(&b.1))
        } else {
            b.2.total_cmp(&a.2)
        }
    });

    let mut row_need: Vec<usize> = (0..n_rows).map(|r| row_totals[r].saturating_sub(out[r].iter().sum())).collect();
    let mut col_need = [0usize; 3];
    for j in 0..3 {
        col_need[j] = col_totals[j].saturating_sub(out.iter().map(|row| row[j]).sum());
    }
    for &(r, j, _) in &cells {
        allowed[r][j] = false;
        if row_need[r] > 0 && col_need[j] > 0 {
            row_need[r] -= 1;
            col_need[j] -= 1;
            if completion_feasible(&allowed, &row_need, col_need) {
                out[r][j] += 1;
                continue;
            }
            row_need[r] += 1;
            col_need[j] += 1;
        }
    }
    debug_assert!(row_need.iter().all(|&n| n == 0), "controlled rounding left units unassigned");
    out
}

/// Per-class `[train, val, test]` counts.
///
/// Split totals are the largest-remainder apportionment of `ratio × N`. Each
/// class then gets the floor or ceiling of `ratio × class_count` in every
/// split, with the rounding chosen so class and split
/// totals both hold (ties favor the larger class, then the lower label). A
/// class too small to reach one sample in some split borrows it from its
/// largest split.
pub fn stratified_allocation(counts: &BTreeMap<usize, usize>, spec: &SplitSpec) -> Result<BTreeMap<usize, [usize; 3]>, EvalError> {
    spec.validate()?;
    for (&label, &count) in counts {
        if count < 3 {
            return Err(EvalError::ClassTooSmallForSplit { label, count });
        }
    }
    let n: usize = counts.values().sum();
    let ratios = spec.ratios();
    let t = largest_remainder(&ratios.map(|r| r * n as f64), n, &[0, 1, 2]);
    let totals = [t[0], t[1], t[2]];

    let labels: Vec<usize> = counts.keys().copied().collect();
    let sizes: Vec<usize> = labels.iter().map(|l| counts[l]).collect();
    let mut by_size: Vec<usize> = (0..labels.len()).collect();
    by_size.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    let mut priority = vec![0; labels.len()];
    for (rank, &i) in by_size.iter().enumerate() {
        priority[i] = rank;
    }
    let quotas: Vec<[f64; 3]> = sizes.iter().map(|&s| ratios.map(|r| r * s as f64)).collect();
    let rounded = controlled_round(&quotas, &sizes, totals, &priority);

    let mut out = BTreeMap::new();
    for (i, &label) in labels.iter().enumerate() {
        let mut alloc = rounded[i];
        while let Some(empty) = alloc.iter().position(|&c| c == 0) {
            let largest = (0..3).max_by_key(|&s| (alloc[s], std::cmp::Reverse(s))).unwrap();
            alloc[largest] -= 1;
            alloc[empty] += 1;
        }
        out.insert(label, alloc);
    }
    Ok(out)
}

/// Stratified three-way split with a seeded within-class shuffle. Each index
/// list is returned in ascending order.
pub fn stratified_split(y: &[usize], spec: &SplitSpec) -> Result<SplitIndices, EvalError> {
    spec.validate()?;
    if y.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    if spec.stratified {
        for (i, &l) in y.iter().enumerate() {
            groups.entry(l).or_default().push(i);
        }
    } else {
        groups.insert(0, (0..y.len()).collect());
    }
    let counts: BTreeMap<usize, usize> = groups.iter().map(|(l, v)| (*l, v.len())).collect();
    let alloc = stratified_allocation(&counts, spec)?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut split = SplitIndices {
        train: vec![],
        val: vec![],
        test: vec![],
    };
    for (label, mut members) in groups {
        members.shuffle(&mut rng);
        let [tr, va, _] = alloc[&label];
        split.train.extend_from_slice(&members[..tr]);
        split.val.extend_from_slice(&members[tr..tr + va]);
        split.test.extend_from_slice(&members[tr + va..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Stratified k folds. Each class is shuffled and dealt round-robin, with the
/// dealing position carried over between classes so fold sizes stay level.
pub fn stratified_kfold(y: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidFolds);
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in y.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    for (&label, members) in &groups {
        if members.len() < k {
            return Err(EvalError::ClassSmallerThanK {
                label,
                count: members.len(),
                k,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for (_, mut members) in groups {
        members.shuffle(&mut rng);
        for i in members {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalize {
    None,
    TrueRows,
}

fn check_labels(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<(), EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if let Some(&label) = y_true.iter().chain(y_pred).find(|&&l| l >= n_classes) {
        return Err(EvalError::LabelOutOfRange { label, n_classes });
    }
    Ok(())
}

pub fn confusion_counts(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<Vec<Vec<usize>>, EvalError> {
    check_labels(y_true, y_pred, n_classes)?;
    let mut m = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        m[t][p] += 1;
    }
    Ok(m)
}

/// Rows are true labels, columns predictions.
pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize], n_classes: usize, normalize: Normalize) -> Result<Vec<Vec<f64>>, EvalError> {
    let counts = confusion_counts(y_true, y_pred, n_classes)?;
    Ok(counts
        .into_iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            row.into_iter()
                .map(|c| match normalize {
                    Normalize::None => c as f64,
                    Normalize::TrueRows if total == 0 => 0.0,
                    Normalize::TrueRows => c as f64 / total as f64,
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: usize,
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Precision or recall had a zero denominator and was set to 0.
    pub ill_defined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classes: Vec<ClassMetrics>,
    pub weighted: AveragedMetrics,
    pub accuracy: f64,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn classification_report(y_true: &[usize], y_pred: &[usize], names: &[String]) -> Result<ClassificationReport, EvalError> {
    let n_classes = names.len();
    let m = confusion_counts(y_true, y_pred, n_classes)?;
    if y_true.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = y_true.len();
    let mut classes = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let tp = m[c][c];
        let predicted: usize = (0..n_classes).map(|r| m[r][c]).sum();
        let support: usize = m[c].iter().sum();
        let (precision, p_bad) = ratio(tp, predicted);
        let (recall, r_bad) = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        classes.push(ClassMetrics {
            label: c,
            name: names[c].clone(),
            precision,
            recall,
            f1,
            support,
            ill_defined: p_bad || r_bad,
        });
    }
    let wavg = |f: fn(&ClassMetrics) -> f64| classes.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / n as f64;
    let weighted = AveragedMetrics {
        precision: wavg(|c| c.precision),
        recall: wavg(|c| c.recall),
        f1: wavg(|c| c.f1),
        support: n,
    };
    let correct: usize = (0..n_classes).map(|c| m[c][c]).sum();
    Ok(ClassificationReport {
        classes,
        weighted,
        accuracy: correct as f64 / n as f64,
    })
}

/// AUC of a binary problem from the Mann-Whitney U statistic, with average
/// ranks for tied scores.
pub fn binary_auc(positive: &[bool], scores: &[f64]) -> Option<f64> {
    assert_eq!(positive.len(), scores.len());
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 averaged
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if positive[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AucMode {
    PerClass,
    Micro,
    Macro,
}

/// One value for `Micro` and `Macro`, one per class for `PerClass`.
pub fn roc_auc(y_true: &[usize], scores: &[ClassScores], mode: AucMode) -> Result<Vec<f64>, EvalError> {
    if y_true.len() != scores.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), scores.len()));
    }
    let n_classes = scores.first().map_or(0, |s| s.0.len());
    if n_classes == 0 {
        return Err(EvalError::Empty);
    }
    if let Some(s) = scores.iter().find(|s| s.0.len() != n_classes) {
        return Err(EvalError::LengthMismatch(n_classes, s.0.len()));
    }
    if let Some(&label) = y_true.iter().find(|&&l| l >= n_classes) {
        return Err(EvalError::LabelOutOfRange { label, n_classes });
    }
    let per_class = || -> Result<Vec<f64>, EvalError> {
        (0..n_classes)
            .map(|c| {
                let pos: Vec<bool> = y_true.iter().map(|&l| l == c).collect();
                let sc: Vec<f64> = scores.iter().map(|s| s.0[c]).collect();
                binary_auc(&pos, &sc).ok_or(EvalError::DegenerateClass(c))
            })
            .collect()
    };
    match mode {
        AucMode::PerClass => per_class(),
        AucMode::Macro => {
            let v = per_class()?;
            Ok(vec![v.iter().sum::<f64>() / v.len() as f64])
        }
        AucMode::Micro => {
            let mut pos = Vec::with_capacity(y_true.len() * n_classes);
            let mut sc = Vec::with_capacity(y_true.len() * n_classes);
            for (&l, s) in y_true.iter().zip(scores) {
                for (c, &v) in s.0.iter().enumerate() {
                    pos.push(l == c);
                    sc.push(v);
                }
            }
            binary_auc(&pos, &sc)
                .map(|a| vec![a])
                .ok_or(EvalError::DegenerateClass(0))
        }
    }
}

/// Full held-out evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub report: ClassificationReport,
    pub confusion: Vec<Vec<usize>>,
    pub confusion_normalized: Vec<Vec<f64>>,
    /// `None` where the class has no positives or no negatives in the data.
    pub auc_per_class: Vec<Option<f64>>,
    pub auc_micro: Option<f64>,
    pub auc_macro: Option<f64>,
    pub n_samples: usize,
}

pub fn evaluate(y_true: &[usize], scores: &[ClassScores], names: &[String]) -> Result<EvalReport, EvalError> {
    if y_true.len() != scores.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), scores.len()));
    }
    let n_classes = names.len();
    let y_pred: Vec<usize> = scores.iter().map(ClassScores::argmax).collect();
    let report = classification_report(y_true, &y_pred, names)?;
    let confusion = confusion_counts(y_true, &y_pred, n_classes)?;
    let confusion_normalized = confusion_matrix(y_true, &y_pred, n_classes, Normalize::TrueRows)?;
    let auc_per_class: Vec<Option<f64>> = (0..n_classes)
        .map(|c| {
            let pos: Vec<bool> = y_true.iter().map(|&l| l == c).collect();
            let sc: Vec<f64> = scores.iter().map(|s| s.0[c]).collect();
            binary_auc(&pos, &sc)
        })
        .collect();
    let auc_macro = if auc_per_class.iter().all(Option::is_some) {
        Some(auc_per_class.iter().flatten().sum::<f64>() / n_classes as f64)
    } else {
        None
    };
    let auc_micro = roc_auc(y_true, scores, AucMode::Micro).ok().map(|v| v[0]);
    Ok(EvalReport {
        report,
        confusion,
        confusion_normalized,
        auc_per_class,
        auc_micro,
        auc_macro,
        n_samples: y_true.len(),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

impl EvalReport {
    /// Plain-text report: per-class table, weighted average row, normalized
    /// confusion matrix, and AUC summary.
    pub fn render_table(&self) -> String {
        let r = &self.report;
        let width = r.classes.iter().map(|c| c.name.len()).max().unwrap_or(5).max(24);
        let mut s = String::new();
        let _ = writeln!(s, "{:<width$}  {:>9}  {:>9}  {:>8}  {:>7}", "Class", "Precision", "Recall", "F1-Score", "Support");
        for c in &r.classes {
            let _ = writeln!(
                s,
                "{:<width$}  {:>9.4}  {:>9.4}  {:>8.4}  {:>7}{}",
                c.name,
                c.precision,
                c.recall,
                c.f1,
                c.support,
                if c.ill_defined { "  (ill-defined)" } else { "" }
            );
        }
        let w = &r.weighted;
        let _ = writeln!(s, "{:<width$}  {:>9.4}  {:>9.4}  {:>8.4}  {:>7}", "Weighted average / Total", w.precision, w.recall, w.f1, w.support);
        let _ = writeln!(s, "\nAccuracy: {:.4}", r.accuracy);
        let _ = writeln!(s, "\nNormalized confusion matrix (rows = true, cols = predicted):");
        let _ = write!(s, "{:<width$}", "");
        for c in &r.classes {
            let _ = write!(s, "  {:>10}", truncate(&c.name, 10));
        }
        s.push('\n');
        for (c, row) in r.classes.iter().zip(&self.confusion_normalized) {
            let _ = write!(s, "{:<width$}", c.name);
            for v in row {
                let _ = write!(s, "  {v:>10.4}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "\nROC-AUC micro: {}  macro: {}", fmt_opt(self.auc_micro), fmt_opt(self.auc_macro));
        for (c, a) in r.classes.iter().zip(&self.auc_per_class) {
            let _ = writeln!(s, "  {:<width$} {}", c.name, fmt_opt(*a));
        }
        s
    }
}

fn truncate(s: &str, n: usize) -> &str {
    &s[..s.len().min(n)]
}
