//! Independent reference implementations used by the integration tests and
//! the acceptance harness. None of these call into the library's algorithms.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;

pub const ALPHABET: [&str; 6] = ["C404", "D408", "E402", "0004", "g316", "A5.8"];

/// A random token list over `ALPHABET`, 1..=max_len long.
pub fn random_tokens<R: Rng>(rng: &mut R, max_len: usize) -> Vec<String> {
    let len = rng.random_range(1..=max_len);
    (0..len)
        .map(|_| ALPHABET.choose(rng).unwrap().to_string())
        .collect()
}

pub struct DenseTfidf {
    pub vocab: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

/// Nested-loop TF-IDF: raw counts, smoothed idf, L2 rows.
pub fn dense_tfidf(
    docs: &[Vec<String>],
    ngram: (usize, usize),
    min_df: usize,
    max_df: f64,
    max_features: usize,
) -> DenseTfidf {
    let grams: Vec<Vec<String>> = docs
        .iter()
        .map(|d| {
            let mut out = Vec::new();
            for n in ngram.0..=ngram.1 {
                let mut start = 0;
                while start + n <= d.len() {
                    out.push(d[start..start + n].join(" "));
                    start += 1;
                }
            }
            out
        })
        .collect();
    let all: BTreeSet<String> = grams.iter().flatten().cloned().collect();
    let n_docs = docs.len();
    let max_count = (max_df * n_docs as f64 - 1e-9).ceil() as usize;

    let mut kept: Vec<(String, usize, usize)> = Vec::new();
    for g in &all {
        let mut df = 0;
        let mut total = 0;
        for doc in &grams {
            let c = doc.iter().filter(|x| *x == g).count();
            total += c;
            if c > 0 {
                df += 1;
            }
        }
        if df >= min_df && df <= max_count {
            kept.push((g.clone(), df, total));
        }
    }
    if kept.len() > max_features {
        kept.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)));
        kept.truncate(max_features);
    }
    kept.sort_by(|a, b| a.0.cmp(&b.0));

    let mut matrix = vec![vec![0.0; kept.len()]; n_docs];
    for (i, doc) in grams.iter().enumerate() {
        for (j, (g, df, _)) in kept.iter().enumerate() {
            let tf = doc.iter().filter(|x| *x == g).count() as f64;
            let idf = ((1.0 + n_docs as f64) / (1.0 + *df as f64)).ln() + 1.0;
            matrix[i][j] = tf * idf;
        }
        let norm = matrix[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut matrix[i] {
                *v /= norm;
            }
        }
    }
    DenseTfidf {
        vocab: kept.into_iter().map(|k| k.0).collect(),
        matrix,
    }
}

/// AUC by comparing every positive with every negative.
pub fn pair_count_auc(positive: &[bool], scores: &[f64]) -> Option<f64> {
    let mut wins = 0.0;
    let (mut p, mut n) = (0usize, 0usize);
    for (i, &pi) in positive.iter().enumerate() {
        if pi {
            p += 1;
        } else {
            n += 1;
        }
        if !pi {
            continue;
        }
        for (j, &pj) in positive.iter().enumerate() {
            if pj {
                continue;
            }
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    if p == 0 || n == 0 {
        None
    } else {
        Some(wins / (p * n) as f64)
    }
}

const EPS: f64 = 1e-9;

fn hamilton(quotas: &[f64], total: usize) -> Vec<usize> {
    let mut out: Vec<usize> = quotas.iter().map(|q| (q + EPS).floor() as usize).collect();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (quotas[a] - out[a] as f64, quotas[b] - out[b] as f64);
        if (fa - fb).abs() < EPS {
            a.cmp(&b)
        } else {
            fb.total_cmp(&fa)
        }
    });
    let short = total - out.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        out[i] += 1;
    }
    out
}

/// Exhaustive search for the per-class `[train, val, test]` allocation.
///
/// Every cell is floor or ceiling of `ratio × class_count`; rows sum to the
/// class sizes; columns sum to the Hamilton apportionment of `ratio × N`.
/// Among all such tables the one whose raised cells come first in the ranking
/// (remainder desc, then larger class, lower label, split order) wins. A class
/// left with an empty split borrows one sample from its largest split.
pub fn allocation_oracle(counts: &BTreeMap<usize, usize>, ratios: [f64; 3]) -> BTreeMap<usize, [usize; 3]> {
    let labels: Vec<usize> = counts.keys().copied().collect();
    let sizes: Vec<usize> = labels.iter().map(|l| counts[l]).collect();
    let n: usize = sizes.iter().sum();
    let cols = hamilton(&ratios.map(|r| r * n as f64), n);

    let quotas: Vec<[f64; 3]> = sizes.iter().map(|&s| ratios.map(|r| r * s as f64)).collect();
    let floors: Vec<[usize; 3]> = quotas.iter().map(|q| q.map(|v| (v + EPS).floor() as usize)).collect();

    let mut rank_of = vec![0; labels.len()];
    let mut by_size: Vec<usize> = (0..labels.len()).collect();
    by_size.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(labels[a].cmp(&labels[b])));
    for (rank, &i) in by_size.iter().enumerate() {
        rank_of[i] = rank;
    }
    let mut ranked: Vec<(usize, usize, f64)> = Vec::new();
    for r in 0..labels.len() {
        for j in 0..3 {
            let f = quotas[r][j] - floors[r][j] as f64;
            if f > EPS {
                ranked.push((r, j, f));
            }
        }
    }
    ranked.sort_by(|a, b| {
        if (a.2 - b.2).abs() < EPS {
            rank_of[a.0].cmp(&rank_of[b.0]).then(a.1.cmp(&b.1))
        } else {
            b.2.total_cmp(&a.2)
        }
    });

    // enumerate every subset choice row by row
    let mut best: Option<Vec<bool>> = None;
    let options: Vec<Vec<Vec<usize>>> = (0..labels.len())
        .map(|r| {
            let need = sizes[r] - floors[r].iter().sum::<usize>();
            let cells: Vec<usize> = (0..3).filter(|&j| quotas[r][j] - floors[r][j] as f64 > EPS).collect();
            let mut subsets = Vec::new();
            for mask in 0u8..(1 << cells.len()) {
                if mask.count_ones() as usize == need {
                    subsets.push((0..cells.len()).filter(|b| mask & (1 << b) != 0).map(|b| cells[b]).collect());
                }
            }
            subsets
        })
        .collect();
    let mut choice = vec![0usize; labels.len()];
    'outer: loop {
        let mut table = floors.clone();
        for (r, &c) in choice.iter().enumerate() {
            if options[r].is_empty() {
                break 'outer;
            }
            for &j in &options[r][c] {
                table[r][j] += 1;
            }
        }
        if (0..3).all(|j| table.iter().map(|row| row[j]).sum::<usize>() == cols[j]) {
            let key: Vec<bool> = ranked.iter().map(|&(r, j, _)| table[r][j] > floors[r][j]).collect();
            if best.as_ref().is_none_or(|b| key > *b) {
                best = Some(key);
            }
        }
        let mut r = 0;
        loop {
            if r == choice.len() {
                break 'outer;
            }
            choice[r] += 1;
            if choice[r] < options[r].len() {
                break;
            }
            choice[r] = 0;
            r += 1;
        }
    }

    let key = best.expect("a feasible rounding always exists");
    let mut table = floors;
    for (&(r, j, _), raised) in ranked.iter().zip(key) {
        if raised {
            table[r][j] += 1;
        }
    }
    labels
        .iter()
        .zip(table)
        .map(|(&l, mut row)| {
            while let Some(empty) = row.iter().position(|&c| c == 0) {
                let mut largest = 0;
                for s in 1..3 {
                    if row[s] > row[largest] {
                        largest = s;
                    }
                }
                row[largest] -= 1;
                row[empty] += 1;
            }
            (l, row)
        })
        .collect()
}
