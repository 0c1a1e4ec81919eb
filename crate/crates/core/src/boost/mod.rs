//! Gradient-boosted regression trees with Newton updates, shared by the
//! deposit predictor and every meta-learner.
//!
//! Each boosting round fits one tree (regression) or one tree per class
//! (classification) to the gradient/hessian of the configured loss at
//! the current predictions. Regularization follows the penalized-score
//! formulation described in [`tree`]: L2 on leaf values, L1 as a soft
//! threshold on gradient sums, a minimum split gain, a minimum hessian
//! mass per child, and per-tree column subsampling.
//!
//! Training is deterministic: the only randomness is the column
//! subsample, drawn from a stream keyed on `(seed, tree index)`, and
//! with `colsample_bytree = 1.0` that stream is never consulted, so the
//! seed does not matter at all.

pub mod loss;
mod tree;

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureSchema;
use crate::rng::{self, tag};

pub use loss::{focal_loss_grad, LossError, LossKind, PointGrad, PROB_CLAMP};
pub use tree::{Node, RegressionTree};

/// Serialized model layout version.
pub const FORMAT_VERSION: u32 = 1;

/// Row-major matrix of feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    values: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl Matrix {
    /// Build from a flat row-major buffer. Panics if the buffer length
    /// is not a multiple of `n_cols`.
    pub fn from_flat(values: Vec<f64>, n_cols: usize) -> Matrix {
        assert!(
            n_cols > 0 || values.is_empty(),
            "zero-column matrix must be empty"
        );
        let n_rows = if n_cols == 0 { 0 } else { values.len() / n_cols };
        assert_eq!(n_rows * n_cols, values.len(), "ragged matrix buffer");
        Matrix { values, n_rows, n_cols }
    }

    /// Build from an iterator of equally long rows.
    pub fn from_rows(rows: impl IntoIterator<Item = Vec<f64>>) -> Matrix {
        let mut values = Vec::new();
        let mut n_cols = None;
        let mut n_rows = 0;
        for row in rows {
            match n_cols {
                None => n_cols = Some(row.len()),
                Some(c) => assert_eq!(c, row.len(), "ragged matrix rows"),
            }
            values.extend_from_slice(&row);
            n_rows += 1;
        }
        let n_cols = n_cols.unwrap_or(0);
        Matrix { values, n_rows, n_cols }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }
}

/// Hyperparameters of the boosted ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseLearnerConfig {
    /// Minimum split gain; splits must strictly beat this.
    pub gamma: f64,
    pub n_estimators: usize,
    /// Fraction of columns drawn per tree, in (0, 1].
    pub colsample_bytree: f64,
    pub max_depth: usize,
    /// Minimum hessian mass in each child.
    pub min_child_weight: f64,
    /// L2 penalty on leaf values.
    pub reg_lambda: f64,
    /// L1 penalty, applied as a soft threshold on gradient sums.
    pub reg_alpha: f64,
    pub learning_rate: f64,
    pub loss: LossKind,
    /// Focusing exponent when `loss` is focal; 0 is plain cross-entropy.
    pub focal_gamma: f64,
}

impl Default for BaseLearnerConfig {
    fn default() -> BaseLearnerConfig {
        BaseLearnerConfig {
            gamma: 0.0,
            n_estimators: 100,
            colsample_bytree: 1.0,
            max_depth: 6,
            min_child_weight: 1.0,
            reg_lambda: 1.0,
            reg_alpha: 0.0,
            learning_rate: 0.3,
            loss: LossKind::SquaredError,
            focal_gamma: 2.0,
        }
    }
}

impl BaseLearnerConfig {
    fn validate(&self) -> Result<(), FitError> {
        let bound = |ok: bool, field: &'static str, value: f64| {
            if ok {
                Ok(())
            } else {
                Err(FitError::ConfigBoundViolation { field, value })
            }
        };
        bound(self.gamma.is_finite() && self.gamma >= 0.0, "gamma", self.gamma)?;
        bound(self.n_estimators >= 1, "n_estimators", self.n_estimators as f64)?;
        bound(
            self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0,
            "colsample_bytree",
            self.colsample_bytree,
        )?;
        bound(self.max_depth >= 1, "max_depth", self.max_depth as f64)?;
        bound(
            self.min_child_weight.is_finite() && self.min_child_weight >= 0.0,
            "min_child_weight",
            self.min_child_weight,
        )?;
        bound(
            self.reg_lambda.is_finite() && self.reg_lambda >= 0.0,
            "reg_lambda",
            self.reg_lambda,
        )?;
        bound(self.reg_alpha.is_finite() && self.reg_alpha >= 0.0, "reg_alpha", self.reg_alpha)?;
        bound(
            self.learning_rate > 0.0 && self.learning_rate <= 1.0,
            "learning_rate",
            self.learning_rate,
        )?;
        bound(
            self.focal_gamma.is_finite() && self.focal_gamma >= 0.0,
            "focal_gamma",
            self.focal_gamma,
        )?;
        Ok(())
    }

    fn grow_params(&self) -> tree::GrowParams {
        tree::GrowParams {
            max_depth: self.max_depth,
            min_child_weight: self.min_child_weight,
            reg_lambda: self.reg_lambda,
            reg_alpha: self.reg_alpha,
            min_split_gain: self.gamma,
            learning_rate: self.learning_rate,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least 2 training rows, got {rows}")]
    EmptyData { rows: usize },
    #[error("{rows} feature rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("feature matrix has {got} columns, schema expects {expected}")]
    SchemaArity { expected: usize, got: usize },
    #[error("config bound violated: {field} = {value}")]
    ConfigBoundViolation { field: &'static str, value: f64 },
    #[error("loss {found:?} cannot train a {task} model")]
    LossTaskMismatch { found: LossKind, task: &'static str },
    #[error("row {row}: target is not finite")]
    NonFiniteTarget { row: usize },
    #[error("{rows} training rows but {weights} weights")]
    WeightMismatch { rows: usize, weights: usize },
    #[error("row {row}: weight {value} is not a positive finite number")]
    InvalidWeight { row: usize, value: f64 },
    #[error("all labels belong to a single class")]
    SingleClassData,
    #[error("class {class} has no training examples")]
    MissingClass { class: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictError {
    #[error("model expects {expected} features, input has {got}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("operation requires a {expected} model")]
    TaskMismatch { expected: &'static str },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelDecodeError {
    #[error("malformed model JSON: {0}")]
    Json(String),
    #[error("invalid model: {0}")]
    Invalid(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTask {
    Regression,
    Classification { n_classes: usize },
}

/// A fitted boosted ensemble. `trees[round]` holds one tree for
/// regression and `n_classes` trees (one per class logit) for
/// classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleModel {
    format_version: u32,
    task: ModelTask,
    base_score: Vec<f64>,
    trees: Vec<Vec<RegressionTree>>,
    config: BaseLearnerConfig,
    schema: FeatureSchema,
}

impl TreeEnsembleModel {
    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn config(&self) -> &BaseLearnerConfig {
        &self.config
    }

    pub fn task(&self) -> &ModelTask {
        &self.task
    }

    pub fn n_classes(&self) -> Option<usize> {
        match self.task {
            ModelTask::Regression => None,
            ModelTask::Classification { n_classes } => Some(n_classes),
        }
    }

    /// Point predictions of a regression model.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>, PredictError> {
        self.check_schema(x)?;
        if !matches!(self.task, ModelTask::Regression) {
            return Err(PredictError::TaskMismatch { expected: "regression" });
        }
        let mut out = vec![self.base_score[0]; x.n_rows()];
        for round in &self.trees {
            for (i, value) in out.iter_mut().enumerate() {
                *value += round[0].predict_row(x.row(i));
            }
        }
        Ok(out)
    }

    /// Class probabilities of a classification model, one row per input.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix, PredictError> {
        self.check_schema(x)?;
        let k = match self.task {
            ModelTask::Classification { n_classes } => n_classes,
            ModelTask::Regression => {
                return Err(PredictError::TaskMismatch { expected: "classification" })
            }
        };
        let n = x.n_rows();
        let mut logits = vec![0.0; n * k];
        for i in 0..n {
            logits[i * k..(i + 1) * k].copy_from_slice(&self.base_score);
        }
        for round in &self.trees {
            for i in 0..n {
                let row = x.row(i);
                for (c, t) in round.iter().enumerate() {
                    logits[i * k + c] += t.predict_row(row);
                }
            }
        }
        for i in 0..n {
            loss::softmax(&mut logits[i * k..(i + 1) * k]);
        }
        Ok(Matrix::from_flat(logits, k))
    }

    /// Most probable class per row; ties resolve to the lowest class id.
    pub fn predict_class(&self, x: &Matrix) -> Result<Vec<usize>, PredictError> {
        let proba = self.predict_proba(x)?;
        Ok((0..proba.n_rows())
            .map(|i| {
                let row = proba.row(i);
                let mut best = 0;
                for (c, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect())
    }

    /// Versioned JSON encoding; stable for identical models.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialization cannot fail")
    }

    /// Decode and validate a model produced by [`Self::to_json`].
    pub fn from_json(text: &str) -> Result<TreeEnsembleModel, ModelDecodeError> {
        let model: TreeEnsembleModel =
            serde_json::from_str(text).map_err(|e| ModelDecodeError::Json(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), ModelDecodeError> {
        if self.format_version != FORMAT_VERSION {
            return Err(ModelDecodeError::Invalid("unsupported format version"));
        }
        self.config
            .validate()
            .map_err(|_| ModelDecodeError::Invalid("config out of bounds"))?;
        if self.trees.len() != self.config.n_estimators {
            return Err(ModelDecodeError::Invalid("tree rounds do not match n_estimators"));
        }
        let groups = match self.task {
            ModelTask::Regression => 1,
            ModelTask::Classification { n_classes } => {
                if n_classes < 2 {
                    return Err(ModelDecodeError::Invalid("classification needs >= 2 classes"));
                }
                n_classes
            }
        };
        if self.base_score.len() != groups {
            return Err(ModelDecodeError::Invalid("base score arity mismatch"));
        }
        for round in &self.trees {
            if round.len() != groups {
                return Err(ModelDecodeError::Invalid("tree group arity mismatch"));
            }
            for t in round {
                if t.max_feature().is_some_and(|f| f >= self.schema.len()) {
                    return Err(ModelDecodeError::Invalid("split references unknown feature"));
                }
            }
        }
        Ok(())
    }

    fn check_schema(&self, x: &Matrix) -> Result<(), PredictError> {
        if x.n_rows() > 0 && x.n_cols() != self.schema.len() {
            return Err(PredictError::SchemaMismatch {
                expected: self.schema.len(),
                got: x.n_cols(),
            });
        }
        Ok(())
    }

    #[cfg(test)]
    fn sum_squared_leaves(&self) -> f64 {
        self.trees
            .iter()
            .flat_map(|round| round.iter())
            .map(RegressionTree::sum_squared_leaves)
            .sum()
    }

    #[cfg(test)]
    fn truncated(&self, rounds: usize) -> TreeEnsembleModel {
        let mut m = self.clone();
        m.trees.truncate(rounds);
        m.config.n_estimators = rounds;
        m
    }
}

fn presort_columns(x: &Matrix) -> Vec<Vec<u32>> {
    (0..x.n_cols())
        .map(|j| {
            let mut idx: Vec<u32> = (0..x.n_rows() as u32).collect();
            idx.sort_unstable_by(|&a, &b| {
                x.get(a as usize, j)
                    .partial_cmp(&x.get(b as usize, j))
                    .expect("features validated finite")
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect()
}

/// Columns available to one tree. With full colsampling the stream is
/// never drawn from, which keeps models seed-independent in that case.
fn sample_columns(n_cols: usize, colsample: f64, seed: u64, tree_index: u64) -> Vec<usize> {
    if colsample >= 1.0 {
        return (0..n_cols).collect();
    }
    let k = num_traits::Float::round(colsample * n_cols as f64) as usize;
    let k = k.clamp(1, n_cols);
    let mut cols: Vec<usize> = (0..n_cols).collect();
    let mut stream = rng::stream_at(seed, tag::COLSAMPLE, tree_index);
    let (chosen, _) = cols.partial_shuffle(&mut stream, k);
    let mut chosen = chosen.to_vec();
    chosen.sort_unstable();
    chosen
}

fn check_matrix(x: &Matrix, schema: &FeatureSchema, n_targets: usize) -> Result<(), FitError> {
    if x.n_cols() != schema.len() {
        return Err(FitError::SchemaArity { expected: schema.len(), got: x.n_cols() });
    }
    if x.n_rows() != n_targets {
        return Err(FitError::LengthMismatch { rows: x.n_rows(), targets: n_targets });
    }
    if x.n_rows() < 2 {
        return Err(FitError::EmptyData { rows: x.n_rows() });
    }
    Ok(())
}

/// Fit a squared-error regressor. The base score is the target mean;
/// each round fits one tree to the residual gradient.
pub fn fit_regressor(
    x: &Matrix,
    y: &[f64],
    schema: &FeatureSchema,
    cfg: &BaseLearnerConfig,
    seed: u64,
) -> Result<TreeEnsembleModel, FitError> {
    let weights = vec![1.0; y.len()];
    fit_regressor_weighted(x, y, &weights, schema, cfg, seed)
}

/// Fit a squared-error regressor with per-row weights. A row of weight
/// w contributes w times to every gradient and hessian sum, so the base
/// score is the weighted target mean and `min_child_weight` gates on
/// weight mass. Weights must be positive and finite.
pub fn fit_regressor_weighted(
    x: &Matrix,
    y: &[f64],
    weights: &[f64],
    schema: &FeatureSchema,
    cfg: &BaseLearnerConfig,
    seed: u64,
) -> Result<TreeEnsembleModel, FitError> {
    cfg.validate()?;
    if cfg.loss != LossKind::SquaredError {
        return Err(FitError::LossTaskMismatch { found: cfg.loss, task: "regression" });
    }
    check_matrix(x, schema, y.len())?;
    if weights.len() != y.len() {
        return Err(FitError::WeightMismatch { rows: y.len(), weights: weights.len() });
    }
    for (row, &t) in y.iter().enumerate() {
        if !t.is_finite() {
            return Err(FitError::NonFiniteTarget { row });
        }
    }
    for (row, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w <= 0.0 {
            return Err(FitError::InvalidWeight { row, value: w });
        }
    }

    let n = y.len();
    let total: f64 = weights.iter().sum();
    let base = y.iter().zip(weights).map(|(&v, &w)| v * w).sum::<f64>() / total;
    let sorted = presort_columns(x);
    let params = cfg.grow_params();

    let mut preds = vec![base; n];
    let mut g = vec![0.0; n];
    let h = weights.to_vec();
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    for round in 0..cfg.n_estimators {
        for i in 0..n {
            g[i] = weights[i] * (preds[i] - y[i]);
        }
        let cols = sample_columns(x.n_cols(), cfg.colsample_bytree, seed, round as u64);
        let (t, deltas) = tree::grow(x, &sorted, &cols, &g, &h, &params);
        for (p, d) in preds.iter_mut().zip(&deltas) {
            *p += d;
        }
        trees.push(vec![t]);
    }
    Ok(TreeEnsembleModel {
        format_version: FORMAT_VERSION,
        task: ModelTask::Regression,
        base_score: vec![base],
        trees,
        config: cfg.clone(),
        schema: schema.clone(),
    })
}

/// Fit a multi-class classifier with softmax cross-entropy or focal
/// loss. Class ids must cover `0..=max(labels)` with every class
/// present. Logits start at zero; each round fits one tree per class.
pub fn fit_classifier(
    x: &Matrix,
    labels: &[usize],
    schema: &FeatureSchema,
    cfg: &BaseLearnerConfig,
    seed: u64,
) -> Result<TreeEnsembleModel, FitError> {
    cfg.validate()?;
    if cfg.loss == LossKind::SquaredError {
        return Err(FitError::LossTaskMismatch { found: cfg.loss, task: "classification" });
    }
    check_matrix(x, schema, labels.len())?;
    let n = labels.len();
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    if k < 2 {
        return Err(FitError::SingleClassData);
    }
    let mut class_counts = vec![0usize; k];
    for &label in labels {
        class_counts[label] += 1;
    }
    if let Some(class) = class_counts.iter().position(|&c| c == 0) {
        return Err(FitError::MissingClass { class });
    }

    let sorted = presort_columns(x);
    let params = cfg.grow_params();
    let focal_gamma = match cfg.loss {
        LossKind::Focal => cfg.focal_gamma,
        _ => 0.0,
    };

    let mut logits = vec![0.0; n * k];
    let mut g_cols = vec![vec![0.0; n]; k];
    let mut h_cols = vec![vec![0.0; n]; k];
    let mut p_buf = vec![0.0; k];
    let mut g_buf = vec![0.0; k];
    let mut h_buf = vec![0.0; k];
    let mut trees = Vec::with_capacity(cfg.n_estimators);
    for round in 0..cfg.n_estimators {
        for i in 0..n {
            p_buf.copy_from_slice(&logits[i * k..(i + 1) * k]);
            loss::softmax(&mut p_buf);
            loss::focal_grad_hess(&p_buf, labels[i], focal_gamma, &mut g_buf, &mut h_buf);
            for c in 0..k {
                g_cols[c][i] = g_buf[c];
                h_cols[c][i] = h_buf[c];
            }
        }
        let mut round_trees = Vec::with_capacity(k);
        for (c, (g, h)) in g_cols.iter().zip(&h_cols).enumerate() {
            let tree_index = (round * k + c) as u64;
            let cols = sample_columns(x.n_cols(), cfg.colsample_bytree, seed, tree_index);
            let (t, deltas) = tree::grow(x, &sorted, &cols, g, h, &params);
            for (i, d) in deltas.iter().enumerate() {
                logits[i * k + c] += d;
            }
            round_trees.push(t);
        }
        trees.push(round_trees);
    }
    Ok(TreeEnsembleModel {
        format_version: FORMAT_VERSION,
        task: ModelTask::Classification { n_classes: k },
        base_score: vec![0.0; k],
        trees,
        config: cfg.clone(),
        schema: schema.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn schema_of(n: usize) -> FeatureSchema {
        FeatureSchema::from_names((0..n).map(|i| alloc::format!("f{i}")).collect())
    }

    fn random_matrix(n: usize, d: usize, seed: u64) -> Matrix {
        let mut r = rng::stream(seed, 0xB005);
        Matrix::from_flat((0..n * d).map(|_| r.random::<f64>() * 10.0).collect(), d)
    }

    fn mse(pred: &[f64], y: &[f64]) -> f64 {
        pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64
    }

    #[test]
    fn constant_targets_predict_the_constant() {
        let x = random_matrix(50, 3, 1);
        let y = vec![3.7; 50];
        let cfg = BaseLearnerConfig { n_estimators: 20, ..BaseLearnerConfig::default() };
        let model = fit_regressor(&x, &y, &schema_of(3), &cfg, 0).unwrap();
        let probe = random_matrix(10, 3, 2);
        for p in model.predict(&probe).unwrap() {
            assert!((p - 3.7).abs() < 1e-9, "prediction {p}");
        }
    }

    #[test]
    fn unit_weights_reproduce_the_unweighted_fit() {
        let x = random_matrix(120, 3, 9);
        let mut r = rng::stream(9, 0x77);
        let y: Vec<f64> = (0..120).map(|i| x.get(i, 1) + r.random::<f64>()).collect();
        let cfg = BaseLearnerConfig { n_estimators: 15, ..BaseLearnerConfig::default() };
        let plain = fit_regressor(&x, &y, &schema_of(3), &cfg, 5).unwrap();
        let weighted =
            fit_regressor_weighted(&x, &y, &vec![1.0; 120], &schema_of(3), &cfg, 5).unwrap();
        assert_eq!(plain.to_json(), weighted.to_json());
    }

    #[test]
    fn integer_weights_act_like_duplicated_rows() {
        // Integer-valued targets with an integer weighted mean keep
        // every gradient sum exact, so the two fits must agree bitwise.
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [2.0, 4.0, 6.0, 8.0, 8.0];
        let ws = [1.0, 2.0, 3.0, 2.0, 2.0];
        let x = Matrix::from_rows(xs.iter().map(|&v| vec![v]));
        let cfg = BaseLearnerConfig {
            n_estimators: 1,
            max_depth: 1,
            learning_rate: 1.0,
            reg_lambda: 0.0,
            min_child_weight: 0.0,
            ..BaseLearnerConfig::default()
        };
        let weighted = fit_regressor_weighted(&x, &ys, &ws, &schema_of(1), &cfg, 0).unwrap();

        let mut dup_x = Vec::new();
        let mut dup_y = Vec::new();
        for i in 0..xs.len() {
            for _ in 0..ws[i] as usize {
                dup_x.push(vec![xs[i]]);
                dup_y.push(ys[i]);
            }
        }
        let duplicated =
            fit_regressor(&Matrix::from_rows(dup_x), &dup_y, &schema_of(1), &cfg, 0).unwrap();

        // Weighted mean of the targets is (2 + 8 + 18 + 16 + 16) / 10.
        assert_eq!(weighted.base_score[0], 6.0);
        let probe = Matrix::from_rows([0.5, 1.5, 2.5, 3.5, 4.5, 5.5].map(|v| vec![v]));
        let a = weighted.predict(&probe).unwrap();
        let b = duplicated.predict(&probe).unwrap();
        assert_eq!(a, b);
        // The split must separate the low-target prefix from the rest.
        assert!(a[0] < a[5], "left {} right {}", a[0], a[5]);
    }

    #[test]
    fn weight_validation_rejects_bad_vectors() {
        let x = random_matrix(10, 2, 4);
        let y = vec![1.0; 10];
        let cfg = BaseLearnerConfig::default();
        let short = fit_regressor_weighted(&x, &y, &[1.0; 9], &schema_of(2), &cfg, 0);
        assert_eq!(short.unwrap_err(), FitError::WeightMismatch { rows: 10, weights: 9 });
        let mut w = vec![1.0; 10];
        w[3] = 0.0;
        let zero = fit_regressor_weighted(&x, &y, &w, &schema_of(2), &cfg, 0);
        assert_eq!(zero.unwrap_err(), FitError::InvalidWeight { row: 3, value: 0.0 });
        w[3] = f64::NAN;
        assert!(matches!(
            fit_regressor_weighted(&x, &y, &w, &schema_of(2), &cfg, 0),
            Err(FitError::InvalidWeight { row: 3, .. })
        ));
    }

    #[test]
    fn linear_signal_is_learned() {
        let n = 1000;
        let x = random_matrix(n, 4, 3);
        let y: Vec<f64> = (0..n).map(|i| 3.0 * x.get(i, 0)).collect();
        let train: Vec<usize> = (0..800).collect();
        let test: Vec<usize> = (800..n).collect();
        let pick = |idx: &[usize]| {
            Matrix::from_rows(idx.iter().map(|&i| x.row(i).to_vec()))
        };
        let cfg = BaseLearnerConfig {
            n_estimators: 100,
            max_depth: 6,
            ..BaseLearnerConfig::default()
        };
        let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let model = fit_regressor(&pick(&train), &y_train, &schema_of(4), &cfg, 5).unwrap();
        let preds = model.predict(&pick(&test)).unwrap();
        let y_test: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        let rmse = mse(&preds, &y_test).sqrt();
        let mean = y.iter().sum::<f64>() / n as f64;
        let std = (y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        assert!(rmse < 0.1 * std, "rmse {rmse}, std {std}");
    }

    #[test]
    fn one_stump_cannot_represent_xor() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..25 {
            for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
                rows.push(vec![a, b]);
                y.push(if (a == 1.0) != (b == 1.0) { 1.0 } else { 0.0 });
            }
        }
        let x = Matrix::from_rows(rows);
        let cfg = BaseLearnerConfig {
            n_estimators: 1,
            max_depth: 1,
            learning_rate: 1.0,
            reg_lambda: 0.0,
            ..BaseLearnerConfig::default()
        };
        let model = fit_regressor(&x, &y, &schema_of(2), &cfg, 0).unwrap();
        let preds = model.predict(&x).unwrap();
        assert!(mse(&preds, &y) > 0.2, "mse {}", mse(&preds, &y));
    }

    #[test]
    fn deep_unpenalized_tree_interpolates() {
        let x = Matrix::from_rows((0..8).map(|i| vec![i as f64]));
        let y = vec![5.0, -2.0, 7.5, 0.25, 9.0, -4.0, 1.0, 3.0];
        let cfg = BaseLearnerConfig {
            n_estimators: 5,
            max_depth: 4,
            learning_rate: 1.0,
            reg_lambda: 0.0,
            min_child_weight: 0.0,
            ..BaseLearnerConfig::default()
        };
        let model = fit_regressor(&x, &y, &schema_of(1), &cfg, 0).unwrap();
        for (p, t) in model.predict(&x).unwrap().iter().zip(&y) {
            assert!((p - t).abs() < 1e-6, "{p} vs {t}");
        }
    }

    #[test]
    fn training_mse_never_increases_with_rounds() {
        let n = 300;
        let x = random_matrix(n, 5, 7);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut r = rng::stream(8, 0xE0);
        let y: Vec<f64> = (0..n)
            .map(|i| x.get(i, 0) - 0.4 * x.get(i, 2) + noise.sample(&mut r))
            .collect();
        let cfg = BaseLearnerConfig { n_estimators: 40, ..BaseLearnerConfig::default() };
        let model = fit_regressor(&x, &y, &schema_of(5), &cfg, 2).unwrap();
        let mut last = f64::INFINITY;
        for rounds in 1..=40 {
            let m = mse(&model.truncated(rounds).predict(&x).unwrap(), &y);
            assert!(m <= last + 1e-12, "round {rounds}: {m} > {last}");
            last = m;
        }
    }

    #[test]
    fn separable_blobs_reach_full_training_accuracy() {
        let mut r = rng::stream(11, 0xB10B);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let class = i % 2;
            let center = if class == 0 { 0.0 } else { 10.0 };
            rows.push(vec![center + noise.sample(&mut r), center + noise.sample(&mut r)]);
            labels.push(class);
        }
        let x = Matrix::from_rows(rows);
        let cfg = BaseLearnerConfig {
            loss: LossKind::SoftmaxCe,
            n_estimators: 30,
            max_depth: 3,
            ..BaseLearnerConfig::default()
        };
        let model = fit_classifier(&x, &labels, &schema_of(2), &cfg, 1).unwrap();
        let hits = model
            .predict_class(&x)
            .unwrap()
            .iter()
            .zip(&labels)
            .filter(|(p, t)| p == t)
            .count();
        assert_eq!(hits, labels.len());
    }

    #[test]
    fn uninformative_features_give_near_uniform_probabilities() {
        let mut sums = [0.0; 4];
        let mut count = 0usize;
        for seed in 0..10 {
            let n = 400;
            let x = random_matrix(n, 3, 100 + seed);
            let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
            let cfg = BaseLearnerConfig {
                loss: LossKind::SoftmaxCe,
                n_estimators: 20,
                ..BaseLearnerConfig::default()
            };
            let model = fit_classifier(&x, &labels, &schema_of(3), &cfg, seed).unwrap();
            let proba = model.predict_proba(&x).unwrap();
            for i in 0..n {
                for (c, s) in sums.iter_mut().enumerate() {
                    *s += proba.get(i, c);
                }
            }
            count += n;
        }
        for (c, s) in sums.iter().enumerate() {
            let avg = s / count as f64;
            assert!((0.15..=0.35).contains(&avg), "class {c} average probability {avg}");
        }
    }

    #[test]
    fn probability_rows_sum_to_one() {
        let x = random_matrix(300, 3, 21);
        let labels: Vec<usize> = (0..300).map(|i| i % 3).collect();
        let cfg = BaseLearnerConfig {
            loss: LossKind::Focal,
            focal_gamma: 2.0,
            n_estimators: 15,
            ..BaseLearnerConfig::default()
        };
        let model = fit_classifier(&x, &labels, &schema_of(3), &cfg, 4).unwrap();
        let probe = random_matrix(1000, 3, 22);
        let proba = model.predict_proba(&probe).unwrap();
        for i in 0..probe.n_rows() {
            let sum: f64 = proba.row(i).iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9, "row {i} sums to {sum}");
        }
    }

    #[test]
    fn class_gaps_are_rejected() {
        let x = random_matrix(30, 2, 31);
        let labels: Vec<usize> = (0..30).map(|i| if i % 2 == 0 { 0 } else { 2 }).collect();
        let cfg = BaseLearnerConfig { loss: LossKind::SoftmaxCe, ..BaseLearnerConfig::default() };
        assert_eq!(
            fit_classifier(&x, &labels, &schema_of(2), &cfg, 0).unwrap_err(),
            FitError::MissingClass { class: 1 }
        );
        let ones = vec![0usize; 30];
        assert_eq!(
            fit_classifier(&x, &ones, &schema_of(2), &cfg, 0).unwrap_err(),
            FitError::SingleClassData
        );
    }

    #[test]
    fn config_bounds_are_enforced() {
        let x = random_matrix(20, 2, 41);
        let y = vec![1.0; 20];
        let bad = BaseLearnerConfig { colsample_bytree: 0.0, ..BaseLearnerConfig::default() };
        assert!(matches!(
            fit_regressor(&x, &y, &schema_of(2), &bad, 0).unwrap_err(),
            FitError::ConfigBoundViolation { field: "colsample_bytree", .. }
        ));
        let bad = BaseLearnerConfig { learning_rate: 1.5, ..BaseLearnerConfig::default() };
        assert!(matches!(
            fit_regressor(&x, &y, &schema_of(2), &bad, 0).unwrap_err(),
            FitError::ConfigBoundViolation { field: "learning_rate", .. }
        ));
        let clf = BaseLearnerConfig { loss: LossKind::SoftmaxCe, ..BaseLearnerConfig::default() };
        assert!(matches!(
            fit_regressor(&x, &y, &schema_of(2), &clf, 0).unwrap_err(),
            FitError::LossTaskMismatch { .. }
        ));
        assert!(matches!(
            fit_regressor(&random_matrix(1, 2, 1), &[1.0], &schema_of(2), &BaseLearnerConfig::default(), 0)
                .unwrap_err(),
            FitError::EmptyData { rows: 1 }
        ));
    }

    #[test]
    fn fits_are_deterministic() {
        let x = random_matrix(200, 4, 51);
        let y: Vec<f64> = (0..200).map(|i| x.get(i, 1) * 2.0 - x.get(i, 3)).collect();
        let cfg = BaseLearnerConfig {
            n_estimators: 25,
            colsample_bytree: 0.5,
            ..BaseLearnerConfig::default()
        };
        let a = fit_regressor(&x, &y, &schema_of(4), &cfg, 9).unwrap();
        let b = fit_regressor(&x, &y, &schema_of(4), &cfg, 9).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        // A different seed draws different columns somewhere in 25 rounds.
        let c = fit_regressor(&x, &y, &schema_of(4), &cfg, 10).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn full_colsample_ignores_the_seed() {
        let x = random_matrix(150, 4, 61);
        let y: Vec<f64> = (0..150).map(|i| x.get(i, 0) + x.get(i, 2)).collect();
        let cfg = BaseLearnerConfig { n_estimators: 10, ..BaseLearnerConfig::default() };
        let a = fit_regressor(&x, &y, &schema_of(4), &cfg, 1).unwrap();
        let b = fit_regressor(&x, &y, &schema_of(4), &cfg, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn heavier_l2_shrinks_leaf_mass() {
        let x = random_matrix(250, 4, 71);
        let mut r = rng::stream(72, 0x12);
        let y: Vec<f64> = (0..250)
            .map(|i| x.get(i, 0) * 1.5 - x.get(i, 1) + r.random::<f64>())
            .collect();
        let mut last = f64::INFINITY;
        for reg_lambda in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let cfg = BaseLearnerConfig {
                n_estimators: 20,
                reg_lambda,
                ..BaseLearnerConfig::default()
            };
            let model = fit_regressor(&x, &y, &schema_of(4), &cfg, 3).unwrap();
            let mass = model.sum_squared_leaves();
            assert!(mass <= last + 1e-9, "lambda {reg_lambda}: {mass} > {last}");
            last = mass;
        }
    }

    #[test]
    fn json_round_trip_preserves_the_model() {
        let x = random_matrix(100, 3, 81);
        let labels: Vec<usize> = (0..100).map(|i| i % 3).collect();
        let cfg = BaseLearnerConfig {
            loss: LossKind::Focal,
            n_estimators: 8,
            colsample_bytree: 0.7,
            ..BaseLearnerConfig::default()
        };
        let model = fit_classifier(&x, &labels, &schema_of(3), &cfg, 6).unwrap();
        let text = model.to_json();
        let back = TreeEnsembleModel::from_json(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn decode_rejects_corrupted_models() {
        let x = random_matrix(60, 2, 91);
        let y: Vec<f64> = (0..60).map(|i| x.get(i, 0)).collect();
        let cfg = BaseLearnerConfig { n_estimators: 3, ..BaseLearnerConfig::default() };
        let model = fit_regressor(&x, &y, &schema_of(2), &cfg, 0).unwrap();

        let bad_version = model.to_json().replace("\"format_version\":1", "\"format_version\":9");
        assert_eq!(
            TreeEnsembleModel::from_json(&bad_version).unwrap_err(),
            ModelDecodeError::Invalid("unsupported format version")
        );

        let mut tampered = model.clone();
        tampered.trees[0][0] = RegressionTree {
            nodes: vec![
                Node::Split { feature: 7, threshold: 0.0, left: 1, right: 2 },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 0.0 },
            ],
        };
        assert_eq!(
            TreeEnsembleModel::from_json(&tampered.to_json()).unwrap_err(),
            ModelDecodeError::Invalid("split references unknown feature")
        );
        assert!(matches!(
            TreeEnsembleModel::from_json("{not json").unwrap_err(),
            ModelDecodeError::Json(_)
        ));
    }

    #[test]
    fn empty_input_predicts_empty() {
        let x = random_matrix(40, 2, 95);
        let y = vec![1.0; 40];
        let model =
            fit_regressor(&x, &y, &schema_of(2), &BaseLearnerConfig::default(), 0).unwrap();
        let empty = Matrix::from_rows(core::iter::empty::<Vec<f64>>());
        // A rowless matrix carries no arity; accept it for any schema.
        assert_eq!(model.predict(&empty).unwrap(), Vec::<f64>::new());
        let wrong = random_matrix(5, 3, 96);
        assert_eq!(
            model.predict(&wrong).unwrap_err(),
            PredictError::SchemaMismatch { expected: 2, got: 3 }
        );
    }
}
