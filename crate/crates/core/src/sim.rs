//! Synthetic population and outcome generator with a ground-truth CATE
//! oracle.
//!
//! The generative model, with a = intensity(arm), s = price sensitivity,
//! e = engagement, new = is_new_user, m = the user's organic per-deposit
//! amount (their rolling-median past deposit):
//!
//! ```text
//! p_conv   = clamp(conv_base + b1*e - (b2*s + b3*new)*(a - 1))
//! n_txns   ~ Poisson(lambda0 * (1 - c*(a - 1)))   conditional on conversion
//! p_recall = clamp(r0 - r1*s*(a - 1))
//! amount_j = prefill * exp(N(0, sigma))   if the user recalled,
//!            m                            otherwise
//! y        = sum of amount_j over the n_txns transactions
//! ```
//!
//! Treated users see a personalized prefill, the denomination-ladder
//! rounding of m scaled by their arm's intensity; control users see the
//! fixed default triple (50, 200, 500). "Recall" is the platform sense:
//! the user takes a recommended amount instead of typing their own.
//!
//! Because every quantity above is a deterministic rate once the user is
//! fixed, the expected outcome has a closed form,
//!
//! ```text
//! E[y | x, a] = p_conv * lambda * (p_recall * prefill * exp(sigma^2/2)
//!               + (1 - p_recall) * m)
//! ```
//!
//! which [`expected_outcome`] exposes. [`oracle_cate`] estimates the same
//! difference by Monte-Carlo with common random numbers, reporting a
//! standard error; the two must agree, and tests hold them to it.
//!
//! Per-user randomness comes from streams keyed by (seed, user index), so
//! serial and parallel simulation produce identical datasets.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DataError, ExperimentDataset, ExperimentRecord};
use crate::features::FeatureSchema;
use crate::meta::{PolicyAssignment, Provenance};
use crate::money::Money;
use crate::predictor::{
    default_control_triple, default_ladder, recommend_amount, rolling_median, HistoryDataset,
    HistoryRow, PredictorError, PLATFORM_MAX_MAJOR,
};
use crate::rng::{self, tag};
use crate::treatment::ArmId;

/// Feature layout of simulated populations: the standard features plus
/// the two simulator-specific ones below, in this order.
pub const SENSITIVITY_FEATURE: &str = "price_sensitivity";
pub const GRADIENT_FEATURE: &str = "amount_gradient";

pub const IDX_TENURE: usize = 0;
pub const IDX_N_PAST: usize = 1;
pub const IDX_MEDIAN: usize = 2;
pub const IDX_ENGAGEMENT: usize = 3;
pub const IDX_NEW: usize = 4;
pub const IDX_SENSITIVITY: usize = 5;
pub const IDX_GRADIENT: usize = 6;

/// Share of users flagged as new.
const NEW_USER_RATE: f64 = 0.3;
/// Median of the lognormal organic-amount distribution, major units.
const ORGANIC_MEDIAN_MAJOR: f64 = 55.0;
/// Log-scale spread of organic amounts.
const ORGANIC_LOG_SD: f64 = 0.95;
/// Organic amounts are clamped into this band, major units.
const ORGANIC_MIN_MAJOR: f64 = 5.0;
const ORGANIC_MAX_MAJOR: f64 = 12_000.0;
/// Log-scale noise of individual history transactions.
const HISTORY_LOG_SD: f64 = 0.22;
/// Engagement-driven per-transaction log trend: delta = TREND_SCALE *
/// (engagement - TREND_CENTER).
const TREND_SCALE: f64 = 0.1;
const TREND_CENTER: f64 = 0.4;
/// Mean history length (beyond the guaranteed first transaction).
const HISTORY_RATE_NEW: f64 = 1.5;
const HISTORY_RATE_OLD: f64 = 9.0;
const HISTORY_MAX: u32 = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid sensitivity mixture: {0}")]
    InvalidMixture(&'static str),
    #[error("invalid parameter {field} = {value}")]
    InvalidParam { field: &'static str, value: f64 },
    #[error("invalid arm proportions: {0}")]
    InvalidProportions(&'static str),
    #[error("{users} users but {arms} arm assignments")]
    LengthMismatch { users: usize, arms: usize },
    #[error("oracle needs at least 2000 draws, got {draws}")]
    InsufficientDraws { draws: usize },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
}

/// One component of the sensitivity mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Generative-model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub n_users: usize,
    pub seed: u64,
    /// Two-component Gaussian mixture for price sensitivity, clamped to
    /// be non-negative; weights must sum to 1.
    pub sensitivity_mixture: [MixtureComponent; 2],
    /// Baseline conversion probability.
    pub conv_base: f64,
    /// Conversion penalty per unit sensitivity per unit excess intensity.
    pub conv_sens_coeff: f64,
    /// Conversion penalty for new users per unit excess intensity.
    pub conv_new_coeff: f64,
    /// Conversion lift per unit engagement.
    pub engagement_coeff: f64,
    /// Mean transactions per converting user at intensity 1.
    pub txn_rate: f64,
    /// Relative transaction-rate decay per unit excess intensity.
    pub txn_decay: f64,
    /// Recall probability at intensity 1.
    pub recall_base: f64,
    /// Recall decay per unit sensitivity per unit excess intensity.
    pub recall_decay: f64,
    /// Log-scale spread of recalled deposit amounts around the prefill.
    pub noise_sd: f64,
}

impl SimParams {
    /// Uncalibrated but sane parameters for tests and as the calibration
    /// search's starting point.
    pub fn example() -> SimParams {
        SimParams {
            n_users: 10_000,
            seed: 7,
            sensitivity_mixture: [
                MixtureComponent { weight: 0.7, mean: 0.1, sd: 0.06 },
                MixtureComponent { weight: 0.3, mean: 0.75, sd: 0.1 },
            ],
            conv_base: 0.55,
            conv_sens_coeff: 0.05,
            conv_new_coeff: 0.035,
            engagement_coeff: 0.15,
            txn_rate: 2.2,
            txn_decay: 0.015,
            recall_base: 0.08,
            recall_decay: 0.3,
            noise_sd: 0.25,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_users == 0 {
            return Err(SimError::InvalidParam { field: "n_users", value: 0.0 });
        }
        let [c0, c1] = self.sensitivity_mixture;
        if c0.weight < 0.0 || c1.weight < 0.0 {
            return Err(SimError::InvalidMixture("negative weight"));
        }
        if Float::abs(c0.weight + c1.weight - 1.0) > 1e-9 {
            return Err(SimError::InvalidMixture("weights must sum to 1"));
        }
        if c0.sd <= 0.0 || c1.sd <= 0.0 || !c0.sd.is_finite() || !c1.sd.is_finite() {
            return Err(SimError::InvalidMixture("component sd must be positive"));
        }
        if !c0.mean.is_finite() || !c1.mean.is_finite() || c0.mean < 0.0 || c1.mean < 0.0 {
            return Err(SimError::InvalidMixture("component means must be non-negative"));
        }
        let prob = |field: &'static str, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(SimError::InvalidParam { field, value })
            }
        };
        prob("conv_base", self.conv_base)?;
        prob("recall_base", self.recall_base)?;
        let non_negative = |field: &'static str, value: f64| {
            if value.is_finite() && value >= 0.0 {
                Ok(())
            } else {
                Err(SimError::InvalidParam { field, value })
            }
        };
        non_negative("conv_sens_coeff", self.conv_sens_coeff)?;
        non_negative("conv_new_coeff", self.conv_new_coeff)?;
        non_negative("engagement_coeff", self.engagement_coeff)?;
        non_negative("recall_decay", self.recall_decay)?;
        non_negative("noise_sd", self.noise_sd)?;
        non_negative("txn_decay", self.txn_decay)?;
        if !(self.txn_rate > 0.0 && self.txn_rate <= 50.0) {
            return Err(SimError::InvalidParam { field: "txn_rate", value: self.txn_rate });
        }
        // The transaction rate must stay positive at the most aggressive
        // intensity.
        let max_excess = ArmId::Tg4.intensity() - 1.0;
        if self.txn_decay * max_excess >= 1.0 {
            return Err(SimError::InvalidParam { field: "txn_decay", value: self.txn_decay });
        }
        Ok(())
    }
}

/// One simulated user: features plus the transaction history behind
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct SimUser {
    pub user_id: String,
    pub features: Vec<f64>,
    /// Past deposits, oldest first; never empty.
    pub past_amounts: Vec<Money>,
    /// The user's next organic deposit, the predictor's label.
    pub next_amount: Money,
}

/// A generated population, schema-conformant by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    schema: FeatureSchema,
    users: Vec<SimUser>,
}

impl Population {
    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn users(&self) -> &[SimUser] {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// Histories table for deposit-predictor training.
    pub fn history_dataset(&self) -> Result<HistoryDataset, PredictorError> {
        HistoryDataset::new(
            self.schema.clone(),
            self.users
                .iter()
                .map(|u| HistoryRow {
                    user_id: u.user_id.clone(),
                    features: u.features.clone(),
                    past_amounts: u.past_amounts.clone(),
                    next_amount: u.next_amount,
                })
                .collect(),
        )
    }
}

/// Feature schema of simulated populations.
pub fn sim_schema() -> FeatureSchema {
    FeatureSchema::with_extras(&[SENSITIVITY_FEATURE, GRADIENT_FEATURE])
}

fn clamp_amount(minor: f64) -> Money {
    let rounded = Money::from_f64_rounded(minor);
    Money::from_minor(rounded.minor().clamp(
        Money::from_major(1).minor(),
        Money::from_major(PLATFORM_MAX_MAJOR).minor(),
    ))
}

/// Inverse-CDF Poisson sample from a single uniform, so common random
/// numbers stay aligned across arms.
fn poisson_inv(lambda: f64, u: f64) -> u32 {
    let mut k = 0u32;
    let mut p = Float::exp(-lambda);
    let mut cdf = p;
    while u >= cdf && k < 500 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

/// Draw the population: sensitivity from the two-component mixture,
/// 30% new users, engagement, tenure, and a transaction history whose
/// rolling median becomes the organic-amount feature.
pub fn generate_population(params: &SimParams) -> Result<Population, SimError> {
    params.validate()?;
    let schema = sim_schema();
    let [c0, c1] = params.sensitivity_mixture;
    let users = (0..params.n_users)
        .map(|i| {
            let mut r = rng::stream_at(params.seed, tag::POPULATION, i as u64);
            let comp = if r.random::<f64>() < c0.weight { c0 } else { c1 };
            let z: f64 = r.sample(StandardNormal);
            let sensitivity = Float::max(comp.mean + comp.sd * z, 0.0);
            let is_new = r.random::<f64>() < NEW_USER_RATE;
            let tenure = if is_new {
                Float::floor(r.random::<f64>() * 30.0)
            } else {
                Float::floor(30.0 + r.random::<f64>() * 700.0)
            };
            // New users skew less engaged.
            let engagement = r.random::<f64>() * if is_new { 0.7 } else { 1.0 };
            let z_m: f64 = r.sample(StandardNormal);
            let organic_major = Float::exp(ORGANIC_LOG_SD * z_m) * ORGANIC_MEDIAN_MAJOR;
            let organic_major = organic_major.clamp(ORGANIC_MIN_MAJOR, ORGANIC_MAX_MAJOR);
            let extra = if is_new { HISTORY_RATE_NEW } else { HISTORY_RATE_OLD };
            let n_past = 1 + poisson_inv(extra, r.random()).min(HISTORY_MAX) as usize;
            let trend = TREND_SCALE * (engagement - TREND_CENTER);
            let past_amounts: Vec<Money> = (0..n_past)
                .map(|j| {
                    let steps_back = (n_past - 1 - j) as f64;
                    let drift = (-trend * steps_back).clamp(-1.5, 1.5);
                    let z: f64 = r.sample(StandardNormal);
                    clamp_amount(
                        organic_major
                            * Float::exp(drift + HISTORY_LOG_SD * z)
                            * crate::money::MINOR_PER_MAJOR as f64,
                    )
                })
                .collect();
            let z_next: f64 = r.sample(StandardNormal);
            let next_amount = clamp_amount(
                organic_major
                    * Float::exp(trend.clamp(-1.5, 1.5) + HISTORY_LOG_SD * z_next)
                    * crate::money::MINOR_PER_MAJOR as f64,
            );
            let median = rolling_median(&past_amounts).expect("history is non-empty");
            let window = past_amounts.len().min(10);
            let gradient = if window > 1 {
                let first = past_amounts[past_amounts.len() - window];
                let last = *past_amounts.last().expect("non-empty");
                (last.minor() - first.minor()) as f64 / (window - 1) as f64
            } else {
                0.0
            };
            SimUser {
                user_id: format!("u{i:07}"),
                features: alloc::vec![
                    tenure,
                    n_past as f64,
                    median.minor() as f64,
                    engagement,
                    if is_new { 1.0 } else { 0.0 },
                    sensitivity,
                    gradient,
                ],
                past_amounts,
                next_amount,
            }
        })
        .collect();
    Ok(Population { schema, users })
}

/// Randomize users over arms with quota sampling: exact largest-remainder
/// arm counts filled from a seeded shuffle, so realized shares sit within
/// one user of the targets and are independent of features.
pub fn assign_grid(
    population: &Population,
    proportions: &[f64],
    seed: u64,
) -> Result<Vec<ArmId>, SimError> {
    if proportions.len() != ArmId::ALL.len() {
        return Err(SimError::InvalidProportions("need one weight per arm"));
    }
    if proportions.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(SimError::InvalidProportions("weights must lie in [0, 1]"));
    }
    let total: f64 = proportions.iter().sum();
    if Float::abs(total - 1.0) > 1e-9 {
        return Err(SimError::InvalidProportions("weights must sum to 1"));
    }
    let n = population.len();
    let mut counts: Vec<usize> = proportions.iter().map(|p| (p * n as f64) as usize).collect();
    let assigned: usize = counts.iter().sum();
    // Hand the leftover seats to the largest fractional remainders,
    // lower arm index first on ties.
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let rem_a = proportions[a] * n as f64 - counts[a] as f64;
        let rem_b = proportions[b] * n as f64 - counts[b] as f64;
        rem_b.partial_cmp(&rem_a).expect("finite remainders").then(a.cmp(&b))
    });
    for &arm in order.iter().take(n - assigned) {
        counts[arm] += 1;
    }

    let mut slots: Vec<usize> = (0..n).collect();
    let mut r = rng::stream(seed, tag::GRID_ASSIGN);
    rand::seq::SliceRandom::shuffle(slots.as_mut_slice(), &mut r);
    let mut arms = alloc::vec![ArmId::Cg; n];
    let mut cursor = 0;
    for (arm_idx, &count) in counts.iter().enumerate() {
        for &slot in &slots[cursor..cursor + count] {
            arms[slot] = ArmId::ALL[arm_idx];
        }
        cursor += count;
    }
    Ok(arms)
}

/// Deterministic per-user, per-arm rates implied by the generative
/// model. Everything downstream (simulation, closed form, oracle) reads
/// these.
struct ArmRates {
    p_conv: f64,
    lambda: f64,
    p_recall: f64,
    prefill: Money,
    organic: Money,
}

fn user_rates(features: &[f64], arm: ArmId, params: &SimParams) -> ArmRates {
    let a = arm.intensity();
    let s = features[IDX_SENSITIVITY];
    let e = features[IDX_ENGAGEMENT];
    let new = features[IDX_NEW];
    let excess = a - 1.0;
    let p_conv = (params.conv_base + params.engagement_coeff * e
        - (params.conv_sens_coeff * s + params.conv_new_coeff * new) * excess)
        .clamp(0.0, 1.0);
    let lambda = params.txn_rate * (1.0 - params.txn_decay * excess);
    let p_recall = (params.recall_base - params.recall_decay * s * excess).clamp(0.0, 1.0);
    let organic = Money::from_minor(features[IDX_MEDIAN] as i64);
    let prefill = if arm.is_control() {
        default_control_triple().prefill
    } else {
        recommend_amount(
            organic,
            a,
            &default_ladder(),
            Money::from_major(PLATFORM_MAX_MAJOR),
        )
        .expect("platform ladder always holds a triple")
        .prefill
    };
    ArmRates { p_conv, lambda, p_recall, prefill, organic }
}

/// Outcome draw shared by the simulator and the oracle. `factors` holds
/// pre-drawn lognormal multipliers so both oracle arms reuse them.
fn outcome_from_uniforms(
    rates: &ArmRates,
    u_conv: f64,
    u_txn: f64,
    u_recall: f64,
    factors: &[f64],
) -> (bool, bool, u32, Money) {
    let converted = u_conv < rates.p_conv;
    if !converted {
        return (false, false, 0, Money::ZERO);
    }
    let n_txns = poisson_inv(rates.lambda, u_txn);
    let recalled = u_recall < rates.p_recall;
    let y = if recalled {
        let prefill = rates.prefill.minor() as f64;
        (0..n_txns as usize)
            .map(|j| Money::from_f64_rounded(prefill * factors[j]))
            .sum()
    } else {
        Money::from_minor(rates.organic.minor() * n_txns as i64)
    };
    (true, recalled, n_txns, y)
}

/// Simulate one outcome per user on per-user random streams.
pub fn simulate_outcomes(
    population: &Population,
    arms: &[ArmId],
    params: &SimParams,
) -> Result<ExperimentDataset, SimError> {
    params.validate()?;
    if population.len() != arms.len() {
        return Err(SimError::LengthMismatch { users: population.len(), arms: arms.len() });
    }
    let records = population
        .users
        .iter()
        .zip(arms)
        .enumerate()
        .map(|(i, (user, &arm))| {
            let mut r = rng::stream_at(params.seed, tag::OUTCOME, i as u64);
            let u_conv: f64 = r.random();
            let u_txn: f64 = r.random();
            let u_recall: f64 = r.random();
            let rates = user_rates(&user.features, arm, params);
            // Draw the per-transaction multipliers lazily: only a
            // converted, recalling user consumes them.
            let converted = u_conv < rates.p_conv;
            let n_txns = if converted { poisson_inv(rates.lambda, u_txn) } else { 0 };
            let recalled = converted && u_recall < rates.p_recall;
            let factors: Vec<f64> = if recalled {
                (0..n_txns)
                    .map(|_| {
                        let z: f64 = r.sample(StandardNormal);
                        Float::exp(params.noise_sd * z)
                    })
                    .collect()
            } else {
                Vec::new()
            };
            let (converted, recalled, n_txns, y) =
                outcome_from_uniforms(&rates, u_conv, u_txn, u_recall, &factors);
            ExperimentRecord {
                user_id: user.user_id.clone(),
                features: user.features.clone(),
                arm,
                y_deposit: y,
                converted,
                recalled,
                n_txns,
            }
        })
        .collect();
    Ok(ExperimentDataset::new(population.schema.clone(), records)?)
}

/// Closed-form expected deposit (minor units) for one user under one
/// arm.
pub fn expected_outcome(features: &[f64], arm: ArmId, params: &SimParams) -> f64 {
    let rates = user_rates(features, arm, params);
    let drift_mean = Float::exp(params.noise_sd * params.noise_sd / 2.0);
    rates.p_conv
        * rates.lambda
        * (rates.p_recall * rates.prefill.minor() as f64 * drift_mean
            + (1.0 - rates.p_recall) * rates.organic.minor() as f64)
}

/// Closed-form conversion probability for one user under one arm.
pub fn expected_conversion(features: &[f64], arm: ArmId, params: &SimParams) -> f64 {
    user_rates(features, arm, params).p_conv
}

/// Closed-form unconditional expected transaction count for one user
/// under one arm: the conversion probability times the conditional
/// Poisson rate.
pub fn expected_txns(features: &[f64], arm: ArmId, params: &SimParams) -> f64 {
    let rates = user_rates(features, arm, params);
    rates.p_conv * rates.lambda
}

/// Exact ground-truth CATE (minor units): closed-form expected outcome
/// under `t` minus control.
pub fn true_cate(features: &[f64], t: ArmId, params: &SimParams) -> f64 {
    expected_outcome(features, t, params) - expected_outcome(features, ArmId::Cg, params)
}

/// Monte-Carlo CATE estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    /// Mean outcome difference in minor units.
    pub value: f64,
    /// Standard error of the mean difference.
    pub stderr: f64,
    pub draws: usize,
}

/// Monte-Carlo ground-truth CATE for one user: mean difference of
/// y under `t` vs control across paired draws sharing common random
/// numbers. Draw streams are keyed by (seed, draw index) only, so clones
/// of a user receive identical estimates.
pub fn oracle_cate(
    features: &[f64],
    t: ArmId,
    params: &SimParams,
    mc_draws: usize,
) -> Result<OracleEstimate, SimError> {
    params.validate()?;
    if mc_draws < 2000 {
        return Err(SimError::InsufficientDraws { draws: mc_draws });
    }
    let treated = user_rates(features, t, params);
    let control = user_rates(features, ArmId::Cg, params);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut factors: Vec<f64> = Vec::new();
    for draw in 0..mc_draws {
        let mut r = rng::stream_at(params.seed, tag::ORACLE, draw as u64);
        let u_conv: f64 = r.random();
        let u_txn: f64 = r.random();
        let u_recall: f64 = r.random();
        // Pre-draw enough shared multipliers for whichever arm needs
        // more transactions.
        let n_t = poisson_inv(treated.lambda, u_txn);
        let n_c = poisson_inv(control.lambda, u_txn);
        factors.clear();
        factors.extend((0..n_t.max(n_c)).map(|_| {
            let z: f64 = r.sample(StandardNormal);
            Float::exp(params.noise_sd * z)
        }));
        let (_, _, _, y_t) = outcome_from_uniforms(&treated, u_conv, u_txn, u_recall, &factors);
        let (_, _, _, y_c) = outcome_from_uniforms(&control, u_conv, u_txn, u_recall, &factors);
        let d = (y_t - y_c).minor() as f64;
        sum += d;
        sum_sq += d * d;
    }
    let n = mc_draws as f64;
    let mean = sum / n;
    let var = Float::max(sum_sq / n - mean * mean, 0.0) * n / (n - 1.0);
    Ok(OracleEstimate { value: mean, stderr: Float::sqrt(var / n), draws: mc_draws })
}

/// Ground-truth policy: the closed-form argmax arm per user, control
/// when no treatment clears zero, ties to the lower intensity.
pub fn oracle_policy(population: &Population, params: &SimParams) -> Vec<PolicyAssignment> {
    population
        .users
        .iter()
        .map(|user| {
            let mut best = ArmId::Cg;
            let mut best_value = 0.0;
            for &t in &ArmId::TARGETS {
                let value = true_cate(&user.features, t, params);
                if value > best_value {
                    best = t;
                    best_value = value;
                }
            }
            PolicyAssignment { arm: best, provenance: Provenance::Oracle }
        })
        .collect()
}
