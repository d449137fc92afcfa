//! One-vs-rest L2-regularized logistic regression.
//!
//! Each binary problem minimizes
//! `Σ_i s_i · log(1 + exp(-t_i (w·x_i + b))) + ‖w‖² / (2C)` with `t_i = ±1`
//! and unpenalized intercept `b`, using truncated Newton (conjugate gradient
//! inner solves, Armijo backtracking). The objective is strictly convex in `w`
//! so the reached optimum does not depend on initialization.

use rayon::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::Vocabulary;
use crate::matrix::{FeatureMatrix, SparseRow};
use crate::resample::class_counts;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("training labels contain a single class")]
    SingleClassInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown class {0}")]
    UnknownClass(usize),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("vocabulary fingerprint does not match the model")]
    VocabularyMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeight {
    #[default]
    Balanced,
    Uniform,
}

/// Starting point of the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    #[default]
    Zero,
    /// Uniform in [-0.5, 0.5) drawn from `seed`.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Inverse penalty strength C.
    pub regularization_strength: f64,
    pub max_iter: usize,
    /// Convergence threshold on the gradient 2-norm.
    pub tol: f64,
    pub class_weight: ClassWeight,
    pub seed: u64,
    #[serde(default)]
    pub init: Init,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            regularization_strength: 1.0,
            max_iter: 2000,
            tol: 1e-6,
            class_weight: ClassWeight::Balanced,
            seed: 42,
            init: Init::Zero,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if !(self.regularization_strength > 0.0 && self.regularization_strength.is_finite()) {
            return bad("regularization_strength must be positive and finite");
        }
        if self.max_iter < 1 {
            return bad("max_iter must be >= 1");
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad("tol must be positive");
        }
        Ok(())
    }
}

/// `n_samples / (n_classes * count(class))` per sample.
pub fn balanced_sample_weights(y: &[usize]) -> Vec<f64> {
    let counts = class_counts(y);
    let n = y.len() as f64;
    let k = counts.len() as f64;
    y.iter().map(|c| n / (k * counts[c] as f64)).collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(-m))` without overflow.
fn log1p_exp_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Weighted, regularized binary logistic loss over parameters `[w.., b]`.
pub struct LogisticObjective<'a> {
    x: &'a FeatureMatrix,
    positive: Vec<bool>,
    weights: Vec<f64>,
    inv_c: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(x: &'a FeatureMatrix, positive: Vec<bool>, weights: Vec<f64>, c: f64) -> Self {
        assert_eq!(x.n_rows(), positive.len());
        assert_eq!(x.n_rows(), weights.len());
        Self {
            x,
            positive,
            weights,
            inv_c: 1.0 / c,
        }
    }

    /// Length of the parameter vector (features + intercept).
    pub fn dim(&self) -> usize {
        self.x.n_cols() + 1
    }

    fn margins(&self, params: &[f64]) -> Vec<f64> {
        let (w, b) = params.split_at(self.x.n_cols());
        self.x.rows().iter().map(|r| r.dot_dense(w) + b[0]).collect()
    }

    fn value_from_margins(&self, params: &[f64], z: &[f64]) -> f64 {
        let w = &params[..self.x.n_cols()];
        let loss: f64 = z
            .iter()
            .zip(&self.positive)
            .zip(&self.weights)
            .map(|((&zi, &p), &s)| s * log1p_exp_neg(if p { zi } else { -zi }))
            .sum();
        loss + 0.5 * self.inv_c * dot(w, w)
    }

    fn gradient_from_margins(&self, params: &[f64], z: &[f64]) -> Vec<f64> {
        let d = self.x.n_cols();
        let mut g = vec![0.0; d + 1];
        for (i, row) in self.x.rows().iter().enumerate() {
            let target = if self.positive[i] { 1.0 } else { 0.0 };
            let r = self.weights[i] * (sigmoid(z[i]) - target);
            for (j, v) in row.iter() {
                g[j] += r * v;
            }
            g[d] += r;
        }
        for j in 0..d {
            g[j] += self.inv_c * params[j];
        }
        g
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        self.value_from_margins(params, &self.margins(params))
    }

    pub fn gradient(&self, params: &[f64]) -> Vec<f64> {
        self.gradient_from_margins(params, &self.margins(params))
    }

    /// Returns `H v` given per-sample curvature `s_i σ(z_i)(1 - σ(z_i))`.
    fn hess_vec(&self, curvature: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.x.n_cols();
        let mut out = vec![0.0; d + 1];
        for (i, row) in self.x.rows().iter().enumerate() {
            let xv = row.dot_dense(&v[..d]) + v[d];
            let a = curvature[i] * xv;
            for (j, val) in row.iter() {
                out[j] += a * val;
            }
            out[d] += a;
        }
        for j in 0..d {
            out[j] += self.inv_c * v[j];
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub class: usize,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct BinaryFit {
    /// Feature weights followed by the intercept.
    pub params: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub objective: f64,
}

/// Conjugate gradient on `H p = -g`, stopping at residual `eta`.
fn cg_solve(obj: &LogisticObjective<'_>, curvature: &[f64], g: &[f64], eta: f64, max_steps: usize) -> Vec<f64> {
    let n = g.len();
    let mut p = vec![0.0; n];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut dir = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_steps {
        if rr.sqrt() <= eta {
            break;
        }
        let hd = obj.hess_vec(curvature, &dir);
        let dhd = dot(&dir, &hd);
        if dhd <= 0.0 {
            break;
        }
        let alpha = rr / dhd;
        for i in 0..n {
            p[i] += alpha * dir[i];
            r[i] -= alpha * hd[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            dir[i] = r[i] + beta * dir[i];
        }
    }
    if p.iter().all(|v| *v == 0.0) {
        // H is positive definite, so the first CG step is always available;
        // this only triggers when g was already ~0.
        p = g.iter().map(|v| -v).collect();
    }
    p
}

pub fn fit_binary(obj: &LogisticObjective<'_>, init: Vec<f64>, max_iter: usize, tol: f64) -> BinaryFit {
    assert_eq!(init.len(), obj.dim());
    let mut params = init;
    let mut z = obj.margins(&params);
    let mut f = obj.value_from_margins(&params, &z);
    let mut iterations = 0;
    let mut converged = false;
    let mut g = obj.gradient_from_margins(&params, &z);
    let max_cg = obj.dim().clamp(10, 1000);

    while iterations < max_iter {
        let gnorm = norm(&g);
        if gnorm <= tol {
            converged = true;
            break;
        }
        iterations += 1;
        let curvature: Vec<f64> = z
            .iter()
            .zip(&obj.weights)
            .map(|(&zi, &s)| {
                let p = sigmoid(zi);
                s * p * (1.0 - p)
            })
            .collect();
        let eta = gnorm.sqrt().min(0.5) * gnorm;
        let step = cg_solve(obj, &curvature, &g, eta, max_cg);
        let slope = dot(&g, &step);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p + alpha * s).collect();
            let tz = obj.margins(&trial);
            let tf = obj.value_from_margins(&trial, &tz);
            if tf <= f + 1e-4 * alpha * slope {
                params = trial;
                z = tz;
                f = tf;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        g = obj.gradient_from_margins(&params, &z);
        if !accepted {
            // no representable decrease left along the Newton direction
            converged = norm(&g) <= tol;
            break;
        }
    }
    if !converged && norm(&g) <= tol {
        converged = true;
    }
    BinaryFit {
        gradient_norm: norm(&g),
        params,
        iterations,
        converged,
        objective: f,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrModel {
    pub classes: Vec<usize>,
    pub coef: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
    pub vocab_fingerprint: Option<String>,
    pub train_config: TrainConfig,
    pub summaries: Vec<FitSummary>,
}

/// Per-class probabilities, aligned with [`OvrModel::classes`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores(pub Vec<f64>);

impl ClassScores {
    /// Index of the largest score; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

fn initial_params(dim: usize, config: &TrainConfig, class: usize) -> Vec<f64> {
    match config.init {
        Init::Zero => vec![0.0; dim],
        Init::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (class as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            (0..dim).map(|_| rng.random::<f64>() - 0.5).collect()
        }
    }
}

pub fn train_ovr(x: &FeatureMatrix, y: &[usize], config: &TrainConfig) -> Result<OvrModel, ModelError> {
    config.validate()?;
    if x.n_rows() != y.len() {
        return Err(ModelError::DimensionMismatch {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    let classes: Vec<usize> = class_counts(y).into_keys().collect();
    if classes.len() < 2 {
        return Err(ModelError::SingleClassInput);
    }
    let weights = match config.class_weight {
        ClassWeight::Balanced => balanced_sample_weights(y),
        ClassWeight::Uniform => vec![1.0; y.len()],
    };
    let d = x.n_cols();

    let fits: Vec<BinaryFit> = classes
        .par_iter()
        .map(|&c| {
            let positive = y.iter().map(|&l| l == c).collect();
            let obj = LogisticObjective::new(x, positive, weights.clone(), config.regularization_strength);
            fit_binary(&obj, initial_params(d + 1, config, c), config.max_iter, config.tol)
        })
        .collect();

    let mut coef = Vec::with_capacity(classes.len());
    let mut intercept = Vec::with_capacity(classes.len());
    let mut summaries = Vec::with_capacity(classes.len());
    for (&class, fit) in classes.iter().zip(fits) {
        summaries.push(FitSummary {
            class,
            iterations: fit.iterations,
            converged: fit.converged,
            gradient_norm: fit.gradient_norm,
            objective: fit.objective,
        });
        let mut params = fit.params;
        intercept.push(params.pop().unwrap());
        coef.push(params);
    }
    Ok(OvrModel {
        classes,
        coef,
        intercept,
        vocab_fingerprint: None,
        train_config: *config,
        summaries,
    })
}

impl OvrModel {
    pub fn n_features(&self) -> usize {
        self.coef.first().map_or(0, Vec::len)
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn with_vocabulary(mut self, vocab: &Vocabulary) -> Self {
        self.vocab_fingerprint = Some(vocab.fingerprint());
        self
    }

    fn class_position(&self, class: usize) -> Result<usize, ModelError> {
        self.classes
            .iter()
            .position(|&c| c == class)
            .ok_or(ModelError::UnknownClass(class))
    }

    pub fn decision_values(&self, x: &SparseRow) -> Result<Vec<f64>, ModelError> {
        if let Some(m) = x.max_index() {
            if m >= self.n_features() {
                return Err(ModelError::DimensionMismatch {
                    expected: self.n_features(),
                    got: m + 1,
                });
            }
        }
        Ok(self
            .coef
            .iter()
            .zip(&self.intercept)
            .map(|(w, b)| x.dot_dense(w) + b)
            .collect())
    }

    /// Per-class sigmoids divided by their sum, computed in log space.
    pub fn predict_proba(&self, x: &SparseRow) -> Result<ClassScores, ModelError> {
        let logs: Vec<f64> = self
            .decision_values(x)?
            .into_iter()
            .map(|z| -log1p_exp_neg(z))
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        Ok(ClassScores(exps.into_iter().map(|e| e / total).collect()))
    }

    pub fn predict_proba_dense(&self, x: &[f64]) -> Result<ClassScores, ModelError> {
        if x.len() != self.n_features() {
            return Err(ModelError::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        self.predict_proba(&SparseRow::from_dense(x))
    }

    pub fn predict(&self, x: &SparseRow) -> Result<usize, ModelError> {
        Ok(self.classes[self.predict_proba(x)?.argmax()])
    }

    /// The `k` strongest coefficients of one sign for `class`, ordered by
    /// magnitude with lexicographic tie-break on n-gram text.
    pub fn top_features(
        &self,
        vocab: &Vocabulary,
        class: usize,
        k: usize,
        sign: Sign,
    ) -> Result<Vec<(String, f64)>, ModelError> {
        let pos = self.class_position(class)?;
        if vocab.len() != self.n_features() {
            return Err(ModelError::DimensionMismatch {
                expected: self.n_features(),
                got: vocab.len(),
            });
        }
        if let Some(fp) = &self.vocab_fingerprint {
            if *fp != vocab.fingerprint() {
                return Err(ModelError::VocabularyMismatch);
            }
        }
        let mut picked: Vec<(String, f64)> = self.coef[pos]
            .iter()
            .enumerate()
            .filter(|(_, &w)| match sign {
                Sign::Positive => w > 0.0,
                Sign::Negative => w < 0.0,
            })
            .map(|(j, &w)| (vocab.ngram(j).to_string(), w))
            .collect();
        picked.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then_with(|| a.0.cmp(&b.0)));
        picked.truncate(k);
        Ok(picked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{VectorizerConfig, VocabEntry};

    fn toy() -> (FeatureMatrix, Vec<usize>) {
        let x = FeatureMatrix::from_dense(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![5.0, 5.0], vec![6.0, 5.0]]);
        (x, vec![0, 0, 1, 1])
    }

    #[test]
    fn separable_toy_is_fit_exactly() {
        let (x, y) = toy();
        let m = train_ovr(&x, &y, &TrainConfig::default()).unwrap();
        let acc = x
            .rows()
            .iter()
            .zip(&y)
            .filter(|(r, &l)| m.predict(r).unwrap() == l)
            .count();
        assert_eq!(acc, 4);
        assert!(m.summaries.iter().all(|s| s.converged && s.gradient_norm <= 1e-6));
    }

    #[test]
    fn balanced_weights_at_reported_class_counts() {
        let mut y = vec![0; 669];
        y.extend(std::iter::repeat_n(1, 18894));
        y.extend(std::iter::repeat_n(2, 1835));
        let w = balanced_sample_weights(&y);
        assert!((w[0] - 21398.0 / (3.0 * 669.0)).abs() < 1e-12);
        assert!((w[0] - 10.66).abs() < 0.01);
    }

    #[test]
    fn single_class_rejected() {
        let (x, _) = toy();
        assert_eq!(
            train_ovr(&x, &[1, 1, 1, 1], &TrainConfig::default()).unwrap_err(),
            ModelError::SingleClassInput
        );
        assert!(matches!(
            train_ovr(&x, &[0, 1], &TrainConfig::default()),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    fn hand_model(coef: Vec<Vec<f64>>, intercept: Vec<f64>) -> OvrModel {
        OvrModel {
            classes: (0..coef.len()).collect(),
            coef,
            intercept,
            vocab_fingerprint: None,
            train_config: TrainConfig::default(),
            summaries: vec![],
        }
    }

    #[test]
    fn zero_model_is_uniform_and_ties_pick_first() {
        let m = hand_model(vec![vec![0.0; 3]; 3], vec![0.0; 3]);
        let p = m.predict_proba_dense(&[0.3, 0.1, 0.0]).unwrap();
        for v in &p.0 {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        assert_eq!(m.predict(&SparseRow::from_dense(&[1.0, 0.0, 0.0])).unwrap(), 0);
    }

    #[test]
    fn two_class_hand_model() {
        let m = hand_model(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.0, 0.0]);
        let p = m.predict_proba_dense(&[0.0, 0.0]).unwrap();
        assert_eq!(p.0, vec![0.5, 0.5]);
        assert!(matches!(
            m.predict_proba_dense(&[0.0]),
            Err(ModelError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            m.predict_proba(&SparseRow::from_dense(&[0.0, 0.0, 1.0])),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dominant_class_two() {
        let m = hand_model(vec![vec![0.0], vec![0.0], vec![5.0]], vec![0.0, 0.0, 0.0]);
        assert_eq!(m.predict(&SparseRow::from_dense(&[1.0])).unwrap(), 2);
    }

    #[test]
    fn extreme_margins_stay_normalized() {
        let m = hand_model(vec![vec![-1e6], vec![-2e6]], vec![0.0, 0.0]);
        let p = m.predict_proba_dense(&[1.0]).unwrap();
        assert!((p.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(p.argmax(), 0);
    }

    #[test]
    fn top_features_ordering() {
        let entries = ["0002", "A404", "B404", "C404"]
            .iter()
            .map(|g| VocabEntry { ngram: g.to_string(), doc_freq: 1, idf: 1.0 })
            .collect();
        let vocab = Vocabulary::from_parts(entries, 1, VectorizerConfig::default());
        let m = hand_model(vec![vec![2.0, -1.0, 2.0, -3.0], vec![0.0; 4]], vec![0.0, 0.0]).with_vocabulary(&vocab);
        let pos = m.top_features(&vocab, 0, 10, Sign::Positive).unwrap();
        assert_eq!(pos, vec![("0002".to_string(), 2.0), ("B404".to_string(), 2.0)]);
        let neg = m.top_features(&vocab, 0, 1, Sign::Negative).unwrap();
        assert_eq!(neg, vec![("C404".to_string(), -3.0)]);
        assert!(m.top_features(&vocab, 0, 0, Sign::Positive).unwrap().is_empty());
        assert_eq!(
            m.top_features(&vocab, 7, 3, Sign::Positive).unwrap_err(),
            ModelError::UnknownClass(7)
        );
    }

    #[test]
    fn invalid_train_config() {
        let (x, y) = toy();
        for c in [
            TrainConfig { max_iter: 0, ..Default::default() },
            TrainConfig { tol: 0.0, ..Default::default() },
            TrainConfig { regularization_strength: -1.0, ..Default::default() },
        ] {
            assert!(matches!(train_ovr(&x, &y, &c), Err(ModelError::InvalidConfig(_))));
        }
    }

    #[test]
    fn max_iter_reached_is_reported_not_error() {
        let (x, y) = toy();
        let c = TrainConfig { max_iter: 1, tol: 1e-300, ..Default::default() };
        let m = train_ovr(&x, &y, &c).unwrap();
        assert!(m.summaries.iter().all(|s| !s.converged && s.iterations == 1));
    }
}
