//! Off-policy and ranking evaluation: ERUPT with a bootstrap, uplift
//! curves with AUUC, and per-arm guardrail metrics.
//!
//! ERUPT estimates the value of a policy π from a randomized experiment
//! in two forms. The inverse-propensity-weighted form is
//! (1/n)·Σᵢ yᵢ·1[π(xᵢ) = tᵢ] / p(tᵢ); the matched-mean form is the
//! plain mean of y over the users whose observed arm equals the policy
//! arm. Under uniform propensities the two agree in expectation, and
//! the matched-mean form is the headline number. Confidence intervals
//! come from a percentile bootstrap over full-size user resamples.
//!
//! The uplift curve for one treatment group ranks the pairwise subset
//! {CG ∪ TG_t} by a score, descending, and accumulates the incremental
//! gain at each prefix of size m with m_t treated and m_c control
//! members: gain(m) = (Σy_t/m_t − Σy_c/m_c)·m, defined as zero while
//! either arm is absent from the prefix. AUUC is the signed trapezoidal
//! area between the curve and the random baseline through the origin
//! and the curve endpoint, normalized by |total gain| when the total is
//! nonzero. All currency values are in minor units.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::ExperimentDataset;
use crate::meta::PolicyAssignment;
use crate::rng::{self, tag};
use crate::treatment::ArmId;

/// Default number of bootstrap resamples.
pub const DEFAULT_RESAMPLES: usize = 5000;

/// Smallest accepted number of bootstrap resamples.
pub const MIN_RESAMPLES: usize = 100;

/// Number of evenly spaced interior points on a sampled uplift curve.
pub const CURVE_POINTS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("policy has {got} rows but the data has {expected}")]
    UncoveredUser { expected: usize, got: usize },
    #[error("propensity for {arm} must be positive and finite")]
    ZeroPropensity { arm: ArmId },
    #[error("propensities must sum to 1, got {total}")]
    InvalidPropensities { total: f64 },
    #[error("need at least {min} bootstrap resamples, got {n}", min = MIN_RESAMPLES)]
    TooFewResamples { n: usize },
    #[error("the pairwise subset has no {arm} records")]
    MissingArm { arm: ArmId },
    #[error("{arm} does not belong to the pairwise subset")]
    UnexpectedArm { arm: ArmId },
    #[error("the curve target must be a treatment group")]
    ControlTarget,
    #[error("{rows} data rows but {scores} scores")]
    LengthMismatch { rows: usize, scores: usize },
    #[error("row {row}: score is not finite")]
    NonFiniteScore { row: usize },
    #[error("degenerate curve: {0}")]
    DegenerateCurve(&'static str),
    #[error("arm {arm} has no records")]
    EmptyArm { arm: ArmId },
    #[error("the dataset is empty")]
    EmptyDataset,
}

/// Point estimates of a policy's value per user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EruptEstimate {
    /// Inverse-propensity-weighted form, normalized by the full count.
    pub ipw: f64,
    /// Mean outcome over users whose observed arm matches the policy;
    /// zero when no user matches.
    pub matched_mean: f64,
    pub n_matched: usize,
}

/// Percentile-bootstrap summary of the matched-mean ERUPT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EruptBootstrap {
    /// Matched-mean estimate of each full-size resample.
    pub sample: Vec<f64>,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

/// Cumulative incremental gain against the targeted fraction of the
/// pairwise population, with the random baseline through the endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpliftCurve {
    points: Vec<(f64, f64)>,
}

impl UpliftCurve {
    /// Validate and wrap raw `(k, gain)` points: at least two, starting
    /// at the origin, k strictly increasing to exactly 1, gains finite.
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<UpliftCurve, EvalError> {
        if points.len() < 2 {
            return Err(EvalError::DegenerateCurve("need at least two points"));
        }
        if points[0] != (0.0, 0.0) {
            return Err(EvalError::DegenerateCurve("curve must start at the origin"));
        }
        for pair in points.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(EvalError::DegenerateCurve("k must increase strictly"));
            }
        }
        if points[points.len() - 1].0 != 1.0 {
            return Err(EvalError::DegenerateCurve("curve must end at k = 1"));
        }
        if points.iter().any(|&(k, g)| !k.is_finite() || !g.is_finite()) {
            return Err(EvalError::DegenerateCurve("points must be finite"));
        }
        Ok(UpliftCurve { points })
    }

    /// Sampled `(k, gain)` points in increasing k order.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Gain at k = 1, the endpoint shared with the random baseline.
    pub fn total_gain(&self) -> f64 {
        self.points[self.points.len() - 1].1
    }

    /// Random-baseline gain at fraction `k`.
    pub fn baseline(&self, k: f64) -> f64 {
        k * self.total_gain()
    }
}

/// Per-arm guardrail metrics over one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuardrailMetrics {
    /// Share of users with a successful deposit.
    pub conversion: f64,
    /// Share of converted users who deposited the recommended amount.
    pub recall: f64,
    /// Deposited amount per transaction, Σy / Σ n_txns, minor units.
    pub per_txn_value: f64,
    pub mean_txns: f64,
    /// Mean deposit over all users of the arm, minor units.
    pub mean_deposit: f64,
}

/// Full evaluation summary of one policy on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpliftReport {
    /// Headline matched-mean ERUPT, minor units.
    pub erupt_point: f64,
    /// Inverse-propensity-weighted companion estimate.
    pub erupt_ipw: f64,
    pub erupt_bootstrap: EruptBootstrap,
    /// Normalized AUUC per treatment group, TG1..TG4 order.
    pub auuc: [f64; 4],
    /// Policy shares in percent, CG first.
    pub percent_treated: [f64; 5],
    /// Per-arm observed guardrails, CG first.
    pub guardrails: [GuardrailMetrics; 5],
}

fn check_policy_inputs(
    ds: &ExperimentDataset,
    policy: &[PolicyAssignment],
    propensities: &[f64; 5],
) -> Result<(), EvalError> {
    if ds.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    if policy.len() != ds.len() {
        return Err(EvalError::UncoveredUser { expected: ds.len(), got: policy.len() });
    }
    let mut total = 0.0;
    for (arm, &p) in ArmId::ALL.iter().zip(propensities) {
        if !(p > 0.0 && p.is_finite()) {
            return Err(EvalError::ZeroPropensity { arm: *arm });
        }
        total += p;
    }
    if Float::abs(total - 1.0) > 1e-9 {
        return Err(EvalError::InvalidPropensities { total });
    }
    Ok(())
}

/// Estimated value per user of following `policy`, from a randomized
/// experiment with known per-arm assignment `propensities`.
pub fn erupt(
    ds: &ExperimentDataset,
    policy: &[PolicyAssignment],
    propensities: &[f64; 5],
) -> Result<EruptEstimate, EvalError> {
    check_policy_inputs(ds, policy, propensities)?;
    let mut ipw_sum = 0.0;
    let mut matched_sum = 0.0;
    let mut n_matched = 0usize;
    for (rec, decision) in ds.records().iter().zip(policy) {
        if decision.arm == rec.arm {
            let y = rec.y_deposit.as_f64();
            ipw_sum += y / propensities[rec.arm.index()];
            matched_sum += y;
            n_matched += 1;
        }
    }
    Ok(EruptEstimate {
        ipw: ipw_sum / ds.len() as f64,
        matched_mean: if n_matched == 0 { 0.0 } else { matched_sum / n_matched as f64 },
        n_matched,
    })
}

/// Linearly interpolated percentile of an ascending-sorted sample.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let position = q * (sorted.len() - 1) as f64;
    let lo = position as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = position - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile bootstrap of the matched-mean ERUPT over full-size user
/// resamples. Each resample draws from its own stream keyed by
/// `(seed, resample index)`, so results do not depend on evaluation
/// order and identical seeds reproduce identical intervals.
pub fn bootstrap_erupt(
    ds: &ExperimentDataset,
    policy: &[PolicyAssignment],
    propensities: &[f64; 5],
    n_resamples: usize,
    seed: u64,
) -> Result<EruptBootstrap, EvalError> {
    if n_resamples < MIN_RESAMPLES {
        return Err(EvalError::TooFewResamples { n: n_resamples });
    }
    check_policy_inputs(ds, policy, propensities)?;
    let n = ds.len();
    let matched_y: Vec<Option<f64>> = ds
        .records()
        .iter()
        .zip(policy)
        .map(|(rec, decision)| {
            if decision.arm == rec.arm {
                Some(rec.y_deposit.as_f64())
            } else {
                None
            }
        })
        .collect();

    let mut sample = Vec::with_capacity(n_resamples);
    for r in 0..n_resamples {
        use rand::Rng;
        let mut stream = rng::stream_at(seed, tag::BOOTSTRAP, r as u64);
        let mut sum = 0.0;
        let mut count = 0usize;
        for _ in 0..n {
            if let Some(y) = matched_y[stream.random_range(0..n)] {
                sum += y;
                count += 1;
            }
        }
        sample.push(if count == 0 { 0.0 } else { sum / count as f64 });
    }

    let mut sorted = sample.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let ci_lower = percentile(&sorted, 0.025);
    let ci_upper = percentile(&sorted, 0.975);
    Ok(EruptBootstrap { sample, ci_lower, ci_upper })
}

/// Rank the pairwise subset {CG ∪ TG_target} by `scores`, descending
/// with user-id tie-breaks, and sample the cumulative incremental gain
/// at k = j/100 for j = 0..=100.
pub fn uplift_curve(
    pair: &ExperimentDataset,
    target: ArmId,
    scores: &[f64],
) -> Result<UpliftCurve, EvalError> {
    if target.is_control() {
        return Err(EvalError::ControlTarget);
    }
    if scores.len() != pair.len() {
        return Err(EvalError::LengthMismatch { rows: pair.len(), scores: scores.len() });
    }
    if let Some(row) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore { row });
    }
    let counts = pair.arm_counts();
    for arm in [ArmId::Cg, target] {
        if counts[arm.index()] == 0 {
            return Err(EvalError::MissingArm { arm });
        }
    }
    if let Some(rec) = pair.records().iter().find(|r| r.arm != ArmId::Cg && r.arm != target) {
        return Err(EvalError::UnexpectedArm { arm: rec.arm });
    }

    let n = pair.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores validated finite")
            .then_with(|| pair.records()[a].user_id.cmp(&pair.records()[b].user_id))
    });

    // Cumulative gain after each prefix of the ranking.
    let mut gains = vec![0.0; n + 1];
    let mut sum_treated = 0.0;
    let mut sum_control = 0.0;
    let mut m_treated = 0usize;
    let mut m_control = 0usize;
    for (m, &i) in order.iter().enumerate() {
        let rec = &pair.records()[i];
        if rec.arm == target {
            sum_treated += rec.y_deposit.as_f64();
            m_treated += 1;
        } else {
            sum_control += rec.y_deposit.as_f64();
            m_control += 1;
        }
        gains[m + 1] = if m_treated == 0 || m_control == 0 {
            0.0
        } else {
            (sum_treated / m_treated as f64 - sum_control / m_control as f64) * (m + 1) as f64
        };
    }

    let mut points = Vec::with_capacity(CURVE_POINTS + 1);
    for j in 0..=CURVE_POINTS {
        let k = j as f64 / CURVE_POINTS as f64;
        let m = Float::round(k * n as f64) as usize;
        points.push((k, gains[m]));
    }
    Ok(UpliftCurve { points })
}

/// Signed trapezoidal area between the curve and its random baseline,
/// normalized by |total gain| when the total is nonzero.
pub fn auuc(curve: &UpliftCurve) -> Result<f64, EvalError> {
    let points = curve.points();
    if points.len() < 2 {
        return Err(EvalError::DegenerateCurve("need at least two points"));
    }
    let total = curve.total_gain();
    let mut area = 0.0;
    for pair in points.windows(2) {
        let (k0, g0) = pair[0];
        let (k1, g1) = pair[1];
        if !(k1 > k0) {
            return Err(EvalError::DegenerateCurve("k must increase strictly"));
        }
        let d0 = g0 - k0 * total;
        let d1 = g1 - k1 * total;
        area += 0.5 * (d0 + d1) * (k1 - k0);
    }
    Ok(if total != 0.0 { area / Float::abs(total) } else { area })
}

/// Observed funnel and revenue guardrails per arm. Requires every arm
/// to be present. Within an arm, recall is conditioned on conversion
/// and the per-transaction value on a nonzero transaction count; both
/// are zero when undefined.
pub fn guardrail_report(ds: &ExperimentDataset) -> Result<[GuardrailMetrics; 5], EvalError> {
    let counts = ds.arm_counts();
    for arm in ArmId::ALL {
        if counts[arm.index()] == 0 {
            return Err(EvalError::EmptyArm { arm });
        }
    }
    let mut converted = [0usize; 5];
    let mut recalled = [0usize; 5];
    let mut deposits = [0.0f64; 5];
    let mut txns = [0u64; 5];
    for rec in ds.records() {
        let a = rec.arm.index();
        converted[a] += rec.converted as usize;
        recalled[a] += rec.recalled as usize;
        deposits[a] += rec.y_deposit.as_f64();
        txns[a] += rec.n_txns as u64;
    }
    let mut report = [GuardrailMetrics {
        conversion: 0.0,
        recall: 0.0,
        per_txn_value: 0.0,
        mean_txns: 0.0,
        mean_deposit: 0.0,
    }; 5];
    for arm in ArmId::ALL {
        let a = arm.index();
        let n = counts[a] as f64;
        report[a] = GuardrailMetrics {
            conversion: converted[a] as f64 / n,
            recall: if converted[a] == 0 { 0.0 } else { recalled[a] as f64 / converted[a] as f64 },
            per_txn_value: if txns[a] == 0 { 0.0 } else { deposits[a] / txns[a] as f64 },
            mean_txns: txns[a] as f64 / n,
            mean_deposit: deposits[a] / n,
        };
    }
    Ok(report)
}
