//! Meta-learner CATE estimation and the argmax assignment policy.
//!
//! All four learners estimate the conditional average treatment effect
//! CATE_t(x) = E[y | x, t] − E[y | x, CG] separately for each treatment
//! group, using only the pairwise subset {CG ∪ TG_t}. Within a pair the
//! randomized grid yields a fixed assignment propensity e, and outcomes
//! are modeled with the boosted trees from [`crate::boost`]:
//!
//! * S: one model μ(x, w) over the pair with a synthetic 0/1 treatment
//!   column w; CATE_t(x) = μ(x, 1) − μ(x, 0).
//! * T: separate arm models; CATE_t(x) = μ_t(x) − μ_CG(x).
//! * X: imputed effects D¹ = y − μ_CG(x) on treated rows and
//!   D⁰ = μ_t(x) − y on control rows, each regressed on x to give τ₁
//!   and τ₀; CATE_t(x) = e·τ₀(x) + (1 − e)·τ₁(x).
//! * R: with a cross-fitted outcome nuisance m(x) and the known
//!   constant propensity e, regress the pseudo-outcome
//!   (y − m(x)) / (w − e) on x with weights (w − e)².
//!
//! Estimates are expressed in minor currency units. The policy rule
//! gives each user the treatment with the largest estimated CATE when
//! that maximum clears a non-negativity margin (zero by default) and
//! control otherwise; ties keep the lowest-intensity group.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boost::{
    fit_regressor, fit_regressor_weighted, BaseLearnerConfig, FitError, Matrix, PredictError,
    TreeEnsembleModel,
};
use crate::dataset::ExperimentDataset;
use crate::features::FeatureSchema;
use crate::rng::{self, tag};
use crate::treatment::ArmId;

/// Smallest arm size accepted for fitting.
pub const MIN_ARM_RECORDS: usize = 50;

/// Name of the synthetic treatment indicator column used by S models.
pub const TREATED_COLUMN: &str = "__treated";

/// How a policy decision was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Randomized grid assignment.
    Grid,
    /// Argmax over estimated CATEs.
    Cate,
    /// Argmax over ground-truth expected outcomes.
    Oracle,
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::Grid => "grid",
            Provenance::Cate => "cate",
            Provenance::Oracle => "oracle",
        }
    }
}

/// One user's assigned arm and where the decision came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyAssignment {
    pub arm: ArmId,
    pub provenance: Provenance,
}

/// The four supported meta-learner families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    S,
    T,
    X,
    R,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 4] =
        [LearnerKind::S, LearnerKind::T, LearnerKind::X, LearnerKind::R];

    pub fn label(self) -> &'static str {
        match self {
            LearnerKind::S => "s",
            LearnerKind::T => "t",
            LearnerKind::X => "x",
            LearnerKind::R => "r",
        }
    }

    pub fn from_label(text: &str) -> Option<LearnerKind> {
        match text {
            "s" | "S" => Some(LearnerKind::S),
            "t" | "T" => Some(LearnerKind::T),
            "x" | "X" => Some(LearnerKind::X),
            "r" | "R" => Some(LearnerKind::R),
            _ => None,
        }
    }
}

/// Base-learner configuration, either shared by every treatment group
/// or chosen per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaConfig {
    Global(BaseLearnerConfig),
    PerTg([BaseLearnerConfig; 4]),
}

impl MetaConfig {
    pub fn for_tg(&self, target_index: usize) -> &BaseLearnerConfig {
        match self {
            MetaConfig::Global(cfg) => cfg,
            MetaConfig::PerTg(cfgs) => &cfgs[target_index],
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetaError {
    #[error("training data has no {arm} records")]
    MissingArm { arm: ArmId },
    #[error("arm {arm} has {n} records, need at least {min}")]
    InsufficientArmSize { arm: ArmId, n: usize, min: usize },
    #[error("propensity must lie strictly inside (0, 1), got {0}")]
    InvalidPropensity(f64),
    #[error("feature matrix has {got} columns, model expects {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("policy is empty")]
    EmptyPolicy,
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Predict(#[from] PredictError),
}

/// Estimated uplift versus control: one row per user, one column per
/// treatment group in TG1..TG4 order, values in minor currency units.
#[derive(Debug, Clone, PartialEq)]
pub struct CateMatrix {
    values: Vec<f64>,
    n_rows: usize,
}

impl CateMatrix {
    /// Build from row-major values. The length must be a multiple of
    /// the treatment-group count and every entry finite.
    pub fn from_flat(values: Vec<f64>) -> CateMatrix {
        let width = ArmId::TARGETS.len();
        assert_eq!(values.len() % width, 0, "row-major CATE buffer is ragged");
        assert!(values.iter().all(|v| v.is_finite()), "CATE entries must be finite");
        let n_rows = values.len() / width;
        CateMatrix { values, n_rows }
    }

    pub fn from_rows(rows: impl IntoIterator<Item = [f64; 4]>) -> CateMatrix {
        let mut values = Vec::new();
        for row in rows {
            values.extend_from_slice(&row);
        }
        CateMatrix::from_flat(values)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    /// One user's estimates in TG1..TG4 order.
    pub fn row(&self, i: usize) -> &[f64] {
        let width = ArmId::TARGETS.len();
        &self.values[i * width..(i + 1) * width]
    }

    /// Estimate for `ArmId::TARGETS[target_index]`.
    pub fn get(&self, i: usize, target_index: usize) -> f64 {
        self.row(i)[target_index]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Fitted models backing one treatment group's CATE column.
#[derive(Debug, Clone)]
enum TgComponents {
    S { model: TreeEnsembleModel },
    T { treated: TreeEnsembleModel, control: TreeEnsembleModel },
    X { tau_treated: TreeEnsembleModel, tau_control: TreeEnsembleModel },
    R { effect: TreeEnsembleModel },
}

/// One fitted meta-learner: four per-treatment component sets plus the
/// in-sample CATE computed at fit time.
#[derive(Debug, Clone)]
pub struct CateModel {
    kind: LearnerKind,
    propensity: f64,
    schema: FeatureSchema,
    configs: MetaConfig,
    per_tg: [TgComponents; 4],
    in_sample: CateMatrix,
}

impl CateModel {
    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn propensity(&self) -> f64 {
        self.propensity
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn configs(&self) -> &MetaConfig {
        &self.configs
    }

    /// CATE of every training row, cached when the model was fitted.
    pub fn in_sample(&self) -> &CateMatrix {
        &self.in_sample
    }

    /// Estimate the CATE matrix for new feature rows. Pure: identical
    /// rows receive identical estimates.
    pub fn predict_cate(&self, x: &Matrix) -> Result<CateMatrix, MetaError> {
        if x.n_cols() != self.schema.len() {
            return Err(MetaError::SchemaMismatch { expected: self.schema.len(), got: x.n_cols() });
        }
        predict_components(&self.per_tg, self.propensity, x)
    }
}

/// Seed for one fitted component; slot indices keep the model streams
/// of a treatment group disjoint.
fn component_seed(seed: u64, target_index: usize, slot: u64) -> u64 {
    rng::child_seed(seed, tag::META_FIT, target_index as u64 * 8 + slot)
}

fn s_schema(schema: &FeatureSchema) -> FeatureSchema {
    let mut names: Vec<String> = schema.names().to_vec();
    names.push(TREATED_COLUMN.to_string());
    FeatureSchema::from_names(names)
}

/// Copy of the feature matrix with the treatment indicator appended.
fn augment(x: &Matrix, flag: f64) -> Matrix {
    let mut values = Vec::with_capacity(x.n_rows() * (x.n_cols() + 1));
    for i in 0..x.n_rows() {
        values.extend_from_slice(x.row(i));
        values.push(flag);
    }
    Matrix::from_flat(values, x.n_cols() + 1)
}

fn gather_rows(x: &Matrix, rows: &[usize]) -> Matrix {
    let mut values = Vec::with_capacity(rows.len() * x.n_cols());
    for &r in rows {
        values.extend_from_slice(x.row(r));
    }
    Matrix::from_flat(values, x.n_cols())
}

fn features_of(train: &ExperimentDataset, idx: &[usize]) -> Matrix {
    Matrix::from_flat(train.feature_rows(idx), train.schema().len())
}

fn outcomes_of(train: &ExperimentDataset, idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| train.records()[i].y_deposit.as_f64()).collect()
}

fn fit_arm_regressor(
    train: &ExperimentDataset,
    idx: &[usize],
    cfg: &BaseLearnerConfig,
    seed: u64,
) -> Result<TreeEnsembleModel, MetaError> {
    let x = features_of(train, idx);
    let y = outcomes_of(train, idx);
    Ok(fit_regressor(&x, &y, train.schema(), cfg, seed)?)
}

fn fit_s(
    train: &ExperimentDataset,
    target: ArmId,
    cfg: &BaseLearnerConfig,
    seed: u64,
) -> Result<TgComponents, MetaError> {
    let idx = train.indices_of_arms(&[ArmId::Cg, target]);
    let d = train.schema().len();
    let mut values = Vec::with_capacity(idx.len() * (d + 1));
    let mut y = Vec::with_capacity(idx.len());
    for &i in &idx {
        let rec = &train.records()[i];
        values.extend_from_slice(&rec.features);
        values.push(if rec.arm.is_control() { 0.0 } else { 1.0 });
        y.push(rec.y_deposit.as_f64());
    }
    let x = Matrix::from_flat(values, d + 1);
    let model = fit_regressor(&x, &y, &s_schema(train.schema()), cfg, seed)?;
    Ok(TgComponents::S { model })
}

fn fit_x(
    train: &ExperimentDataset,
    target: ArmId,
    cfg: &BaseLearnerConfig,
    meta_seed: u64,
    target_index: usize,
) -> Result<TgComponents, MetaError> {
    let treated_idx = train.indices_of_arms(&[target]);
    let control_idx = train.indices_of_arms(&[ArmId::Cg]);
    let mu_treated =
        fit_arm_regressor(train, &treated_idx, cfg, component_seed(meta_seed, target_index, 0))?;
    let mu_control =
        fit_arm_regressor(train, &control_idx, cfg, component_seed(meta_seed, target_index, 1))?;

    let x_treated = features_of(train, &treated_idx);
    let y_treated = outcomes_of(train, &treated_idx);
    let d1: Vec<f64> = mu_control
        .predict(&x_treated)?
        .iter()
        .zip(&y_treated)
        .map(|(mu, y)| y - mu)
        .collect();
    let tau_treated = fit_regressor(
        &x_treated,
        &d1,
        train.schema(),
        cfg,
        component_seed(meta_seed, target_index, 2),
    )?;

    let x_control = features_of(train, &control_idx);
    let y_control = outcomes_of(train, &control_idx);
    let d0: Vec<f64> = mu_treated
        .predict(&x_control)?
        .iter()
        .zip(&y_control)
        .map(|(mu, y)| mu - y)
        .collect();
    let tau_control = fit_regressor(
        &x_control,
        &d0,
        train.schema(),
        cfg,
        component_seed(meta_seed, target_index, 3),
    )?;
    Ok(TgComponents::X { tau_treated, tau_control })
}

fn fit_r(
    train: &ExperimentDataset,
    target: ArmId,
    cfg: &BaseLearnerConfig,
    propensity: f64,
    meta_seed: u64,
    target_index: usize,
) -> Result<TgComponents, MetaError> {
    use rand::seq::SliceRandom;

    let pair = train.indices_of_arms(&[ArmId::Cg, target]);
    let n = pair.len();
    let x = features_of(train, &pair);
    let y = outcomes_of(train, &pair);
    let w: Vec<f64> = pair
        .iter()
        .map(|&i| if train.records()[i].arm.is_control() { 0.0 } else { 1.0 })
        .collect();

    // Cross-fitted outcome nuisance: each half is scored by a model
    // trained on the other half, so m(x_i) never saw y_i.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream_at(meta_seed, tag::CROSSFIT, target_index as u64));
    let (fold_a, fold_b) = order.split_at(n / 2);
    let mut m_hat = vec![0.0; n];
    for (slot, (fit_rows, score_rows)) in
        [(fold_a, fold_b), (fold_b, fold_a)].into_iter().enumerate()
    {
        let x_fit = gather_rows(&x, fit_rows);
        let y_fit: Vec<f64> = fit_rows.iter().map(|&r| y[r]).collect();
        let nuisance = fit_regressor(
            &x_fit,
            &y_fit,
            train.schema(),
            cfg,
            component_seed(meta_seed, target_index, 1 + slot as u64),
        )?;
        let scores = nuisance.predict(&gather_rows(&x, score_rows))?;
        for (&r, s) in score_rows.iter().zip(scores) {
            m_hat[r] = s;
        }
    }

    // Pseudo-outcome regression; the denominator is ±(1 − e) or −e and
    // never zero for e strictly inside (0, 1).
    let mut z = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let denom = w[i] - propensity;
        z.push((y[i] - m_hat[i]) / denom);
        weights.push(denom * denom);
    }
    let effect = fit_regressor_weighted(
        &x,
        &z,
        &weights,
        train.schema(),
        cfg,
        component_seed(meta_seed, target_index, 0),
    )?;
    Ok(TgComponents::R { effect })
}

fn predict_components(
    per_tg: &[TgComponents; 4],
    propensity: f64,
    x: &Matrix,
) -> Result<CateMatrix, MetaError> {
    let width = ArmId::TARGETS.len();
    let n = x.n_rows();
    let augmented = match per_tg[0] {
        TgComponents::S { .. } => Some((augment(x, 1.0), augment(x, 0.0))),
        _ => None,
    };
    let mut values = vec![0.0; n * width];
    for (c, comp) in per_tg.iter().enumerate() {
        let column: Vec<f64> = match comp {
            TgComponents::S { model } => {
                let (on, off) = augmented.as_ref().expect("augmented inputs exist for S models");
                model
                    .predict(on)?
                    .iter()
                    .zip(model.predict(off)?)
                    .map(|(a, b)| a - b)
                    .collect()
            }
            TgComponents::T { treated, control } => treated
                .predict(x)?
                .iter()
                .zip(control.predict(x)?)
                .map(|(a, b)| a - b)
                .collect(),
            TgComponents::X { tau_treated, tau_control } => tau_control
                .predict(x)?
                .iter()
                .zip(tau_treated.predict(x)?)
                .map(|(t0, t1)| propensity * t0 + (1.0 - propensity) * t1)
                .collect(),
            TgComponents::R { effect } => effect.predict(x)?,
        };
        for (i, v) in column.into_iter().enumerate() {
            values[i * width + c] = v;
        }
    }
    Ok(CateMatrix::from_flat(values))
}

/// Fit one meta-learner of the given kind on a randomized experiment.
/// Every arm must be present with at least [`MIN_ARM_RECORDS`] records.
pub fn fit_meta(
    kind: LearnerKind,
    train: &ExperimentDataset,
    cfgs: &MetaConfig,
    propensity: f64,
    seed: u64,
) -> Result<CateModel, MetaError> {
    if !(propensity > 0.0 && propensity < 1.0) {
        return Err(MetaError::InvalidPropensity(propensity));
    }
    let counts = train.arm_counts();
    for arm in ArmId::ALL {
        let n = counts[arm.index()];
        if n == 0 {
            return Err(MetaError::MissingArm { arm });
        }
        if n < MIN_ARM_RECORDS {
            return Err(MetaError::InsufficientArmSize { arm, n, min: MIN_ARM_RECORDS });
        }
    }

    let mut components = Vec::with_capacity(ArmId::TARGETS.len());
    for (c, &target) in ArmId::TARGETS.iter().enumerate() {
        let cfg = cfgs.for_tg(c);
        let comp = match kind {
            LearnerKind::S => fit_s(train, target, cfg, component_seed(seed, c, 0))?,
            LearnerKind::T => {
                let treated = fit_arm_regressor(
                    train,
                    &train.indices_of_arms(&[target]),
                    cfg,
                    component_seed(seed, c, 0),
                )?;
                let control = fit_arm_regressor(
                    train,
                    &train.indices_of_arms(&[ArmId::Cg]),
                    cfg,
                    component_seed(seed, c, 1),
                )?;
                TgComponents::T { treated, control }
            }
            LearnerKind::X => fit_x(train, target, cfg, seed, c)?,
            LearnerKind::R => fit_r(train, target, cfg, propensity, seed, c)?,
        };
        components.push(comp);
    }
    let per_tg: [TgComponents; 4] = components.try_into().expect("one component set per TG");

    let all: Vec<usize> = (0..train.len()).collect();
    let in_sample = predict_components(&per_tg, propensity, &features_of(train, &all))?;
    Ok(CateModel {
        kind,
        propensity,
        schema: train.schema().clone(),
        configs: cfgs.clone(),
        per_tg,
        in_sample,
    })
}

/// Arm assignment from estimated CATE: the treatment with the largest
/// estimate when it is strictly positive, control otherwise.
pub fn assign_policy(cate: &CateMatrix) -> Vec<PolicyAssignment> {
    assign_policy_with_margin(cate, 0.0)
}

/// Policy with a non-negativity margin: a treatment is assigned only
/// when its estimate strictly exceeds `margin`. Ties keep the earlier,
/// lower-intensity group.
pub fn assign_policy_with_margin(cate: &CateMatrix, margin: f64) -> Vec<PolicyAssignment> {
    assert!(margin.is_finite() && margin >= 0.0, "margin must be non-negative and finite");
    (0..cate.n_rows())
        .map(|i| {
            let mut arm = ArmId::Cg;
            let mut best = margin;
            for (c, &value) in cate.row(i).iter().enumerate() {
                if value > best {
                    arm = ArmId::TARGETS[c];
                    best = value;
                }
            }
            PolicyAssignment { arm, provenance: Provenance::Cate }
        })
        .collect()
}

/// Share of users per arm in percent, ordered CG, TG1..TG4.
pub fn percent_treated(policy: &[PolicyAssignment]) -> Result<[f64; 5], MetaError> {
    if policy.is_empty() {
        return Err(MetaError::EmptyPolicy);
    }
    let mut counts = [0usize; 5];
    for p in policy {
        counts[p.arm.index()] += 1;
    }
    let n = policy.len() as f64;
    let mut shares = [0.0; 5];
    for (share, &count) in shares.iter_mut().zip(&counts) {
        *share = 100.0 * count as f64 / n;
    }
    Ok(shares)
}
