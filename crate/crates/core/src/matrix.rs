//! Sparse row storage shared by the vectorizer, SMOTE, and the classifier.

use serde::{Deserialize, Serialize};

/// One sparse row with strictly ascending column indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseRow {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseRow {
    /// Builds a row from `(column, value)` pairs. Pairs are sorted, duplicate
    /// columns summed, and explicit zeros dropped.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if indices.last() == Some(&i) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(i);
                values.push(v);
            }
        }
        let mut row = Self { indices, values };
        row.drop_zeros();
        row
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v))
            .unzip();
        Self { indices, values }
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|v| *v != 0.0) {
            return;
        }
        let (indices, values) = self
            .indices
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (*i, *v))
            .unzip();
        self.indices = indices;
        self.values = values;
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(i, v)| (*i as usize, *v))
    }

    pub fn get(&self, col: usize) -> f64 {
        match self.indices.binary_search(&(col as u32)) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().map(|i| *i as usize)
    }

    pub fn to_dense(&self, n_cols: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_cols];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
        self.drop_zeros();
    }

    /// Walks the union of both supports in column order.
    pub fn merge_with<'a>(
        &'a self,
        other: &'a SparseRow,
    ) -> impl Iterator<Item = (usize, f64, f64)> + 'a {
        let (mut a, mut b) = (0usize, 0usize);
        std::iter::from_fn(move || {
            let ai = self.indices.get(a).copied();
            let bi = other.indices.get(b).copied();
            match (ai, bi) {
                (None, None) => None,
                (Some(i), None) => {
                    a += 1;
                    Some((i as usize, self.values[a - 1], 0.0))
                }
                (None, Some(j)) => {
                    b += 1;
                    Some((j as usize, 0.0, other.values[b - 1]))
                }
                (Some(i), Some(j)) if i < j => {
                    a += 1;
                    Some((i as usize, self.values[a - 1], 0.0))
                }
                (Some(i), Some(j)) if j < i => {
                    b += 1;
                    Some((j as usize, 0.0, other.values[b - 1]))
                }
                (Some(i), Some(_)) => {
                    a += 1;
                    b += 1;
                    Some((i as usize, self.values[a - 1], other.values[b - 1]))
                }
            }
        })
    }

    pub fn squared_distance(&self, other: &SparseRow) -> f64 {
        self.merge_with(other)
            .map(|(_, x, y)| (x - y) * (x - y))
            .sum()
    }
}

/// Row-per-document feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_cols: usize,
    rows: Vec<SparseRow>,
}

impl FeatureMatrix {
    pub fn new(n_cols: usize) -> Self {
        Self {
            n_cols,
            rows: Vec::new(),
        }
    }

    /// Panics if any row has a column outside `0..n_cols`.
    pub fn from_rows(n_cols: usize, rows: Vec<SparseRow>) -> Self {
        assert!(
            rows.iter()
                .all(|r| r.max_index().is_none_or(|m| m < n_cols)),
            "row column index out of range"
        );
        Self { n_cols, rows }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == n_cols), "ragged dense rows");
        Self {
            n_cols,
            rows: rows.iter().map(|r| SparseRow::from_dense(r)).collect(),
        }
    }

    pub fn push(&mut self, row: SparseRow) {
        assert!(row.max_index().is_none_or(|m| m < self.n_cols));
        self.rows.push(row);
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &SparseRow {
        &self.rows[i]
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            n_cols: self.n_cols,
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.to_dense(self.n_cols)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_pairs_sorts_and_merges() {
        let r = SparseRow::from_pairs(vec![(3, 1.0), (1, 2.0), (3, 0.5), (2, 0.0)]);
        assert_eq!(r.indices(), &[1, 3]);
        assert_eq!(r.values(), &[2.0, 1.5]);
        assert_eq!(r.get(3), 1.5);
        assert_eq!(r.get(2), 0.0);
    }

    #[test]
    fn distance_over_union_support() {
        let a = SparseRow::from_dense(&[1.0, 0.0, 2.0]);
        let b = SparseRow::from_dense(&[0.0, 3.0, 2.0]);
        assert_eq!(a.squared_distance(&b), 10.0);
        assert_eq!(a.merge_with(&b).count(), 3);
    }
}
