//! Deposit-amount prediction: amount binning, the rolling-median
//! heuristic baseline, classifier training with a validation report, and
//! intensity-scaled recommendation triples.
//!
//! Deposit amounts are discretized into classes ("0-20", "20-40", ...,
//! "1000-25000") and predicted with the multi-class boosted classifier.
//! A prediction's expected amount is the probability-weighted mean of
//! per-bin representatives: the geometric mean of the bin edges, except
//! the open-ended top bin which uses 1.5x its lower edge. Recommendations
//! scale the expected amount by the arm's intensity, snap to a fixed
//! denomination ladder, and derive the two alternative options as 4x and
//! 10x the prefill, capped at the platform maximum with strict ordering
//! restored by stepping down the ladder.

use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boost::{
    fit_classifier, BaseLearnerConfig, FitError, Matrix, PredictError, TreeEnsembleModel,
};
use crate::features::FeatureSchema;
use crate::money::Money;
use crate::rng::{self, tag};

/// Default class edges in major currency units.
pub const DEFAULT_BIN_EDGES_MAJOR: [i64; 12] =
    [0, 20, 40, 60, 80, 100, 150, 200, 300, 500, 1000, 25_000];

/// Default denomination ladder in major units. Recommended amounts are
/// always snapped onto this ladder.
pub const DEFAULT_LADDER_MAJOR: [i64; 16] = [
    10, 20, 25, 50, 100, 200, 250, 400, 500, 1000, 2000, 2500, 5000, 10_000, 20_000, 25_000,
];

/// Largest deposit the platform accepts.
pub const PLATFORM_MAX_MAJOR: i64 = 25_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictorError {
    #[error("binning needs at least 2 edges, got {0}")]
    TooFewEdges(usize),
    #[error("bin edges must start at zero")]
    FirstEdgeNotZero,
    #[error("bin edges must be strictly increasing (edge {0} is not)")]
    NonMonotonicEdges(usize),
    #[error("amount {amount} exceeds the platform maximum {max}")]
    AmountAboveMaximum { amount: Money, max: Money },
    #[error("amounts must be non-negative, got {0}")]
    NegativeAmount(Money),
    #[error("transaction history is empty")]
    EmptyHistory,
    #[error("denomination ladder must be non-empty and strictly increasing")]
    InvalidLadder,
    #[error("intensity {0} is not one of the experiment intensities")]
    UnsupportedIntensity(f64),
    #[error("no ladder triple below the cap can keep prefill < option1 < option2")]
    LadderExhausted,
    #[error("{left} predictions vs {right} truths")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least one sample")]
    EmptyInput,
    #[error("class id {class} out of range for {n_classes} classes")]
    ClassOutOfRange { class: usize, n_classes: usize },
    #[error("model predicts {model} classes but binning defines {binning}")]
    ClassArityMismatch { model: usize, binning: usize },
    #[error("class {class} has only {count} examples; need at least 10")]
    InsufficientClassSupport { class: usize, count: usize },
    #[error("history row {row}: no past transactions")]
    MissingHistory { row: usize },
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Predict(#[from] PredictError),
}

/// Deposit-amount classes delimited by strictly increasing edges; class
/// `i` covers `edges[i] <= amount < edges[i+1]`, with the last edge
/// inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmountBinning {
    edges: Vec<Money>,
}

impl AmountBinning {
    pub fn new(edges: Vec<Money>) -> Result<AmountBinning, PredictorError> {
        if edges.len() < 2 {
            return Err(PredictorError::TooFewEdges(edges.len()));
        }
        if edges[0] != Money::ZERO {
            return Err(PredictorError::FirstEdgeNotZero);
        }
        for i in 1..edges.len() {
            if edges[i] <= edges[i - 1] {
                return Err(PredictorError::NonMonotonicEdges(i));
            }
        }
        Ok(AmountBinning { edges })
    }

    pub fn default_platform() -> AmountBinning {
        AmountBinning::new(DEFAULT_BIN_EDGES_MAJOR.iter().map(|&e| Money::from_major(e)).collect())
            .expect("default edges are valid")
    }

    pub fn n_classes(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[Money] {
        &self.edges
    }

    /// Upper end of the binning, the platform maximum.
    pub fn max_amount(&self) -> Money {
        *self.edges.last().expect("validated non-empty")
    }

    /// Class of one amount.
    pub fn bin(&self, amount: Money) -> Result<usize, PredictorError> {
        if amount.is_negative() {
            return Err(PredictorError::NegativeAmount(amount));
        }
        if amount > self.max_amount() {
            return Err(PredictorError::AmountAboveMaximum {
                amount,
                max: self.max_amount(),
            });
        }
        // partition_point returns how many edges are <= amount; the last
        // edge is inclusive so it never pushes past the final class.
        let upper = self.edges.partition_point(|&e| e <= amount);
        Ok(upper.min(self.n_classes()) - 1)
    }

    /// Classes of a batch of amounts.
    pub fn bin_amounts(&self, amounts: &[Money]) -> Result<Vec<usize>, PredictorError> {
        amounts.iter().map(|&a| self.bin(a)).collect()
    }

    /// Human-readable class name, e.g. `"20-40"`.
    pub fn label(&self, class: usize) -> String {
        alloc::format!(
            "{}-{}",
            format_major(self.edges[class]),
            format_major(self.edges[class + 1])
        )
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.n_classes()).map(|c| self.label(c)).collect()
    }

    /// Amount standing in for a class: the geometric mean of its edges,
    /// or 1.5x the lower edge for the open-ended top class.
    pub fn representative(&self, class: usize) -> Money {
        if class + 1 == self.n_classes() {
            let lo = self.edges[class].minor() as f64;
            Money::from_f64_rounded(lo * 1.5)
        } else {
            let lo = self.edges[class].minor() as f64;
            let hi = self.edges[class + 1].minor() as f64;
            Money::from_f64_rounded(Float::sqrt(lo * hi))
        }
    }
}

fn format_major(m: Money) -> String {
    let minor = m.minor();
    if minor % crate::money::MINOR_PER_MAJOR == 0 {
        alloc::format!("{}", minor / crate::money::MINOR_PER_MAJOR)
    } else {
        alloc::format!("{:.2}", minor as f64 / crate::money::MINOR_PER_MAJOR as f64)
    }
}

/// Classifier output for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepositPrediction {
    pub class_probs: Vec<f64>,
    pub expected_amount: Money,
}

/// The three amounts shown to a user: the prefilled value and two larger
/// alternatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recommendation {
    pub prefill: Money,
    pub option1: Money,
    pub option2: Money,
}

/// Median of the most recent `min(10, len)` transactions; an even-sized
/// window takes the lower of the two middle values. The history is
/// ordered oldest first. `None` on an empty history.
pub fn rolling_median(history: &[Money]) -> Option<Money> {
    if history.is_empty() {
        return None;
    }
    let window = &history[history.len().saturating_sub(10)..];
    let mut sorted: Vec<Money> = window.to_vec();
    sorted.sort_unstable();
    Some(sorted[(sorted.len() - 1) / 2])
}

/// Rolling-median deposit class: the baseline the classifier must beat.
pub fn heuristic_predict(
    history: &[Money],
    binning: &AmountBinning,
) -> Result<usize, PredictorError> {
    let median = rolling_median(history).ok_or(PredictorError::EmptyHistory)?;
    binning.bin(median)
}

fn ladder_round(ladder: &[Money], target: f64) -> Money {
    let mut best = ladder[0];
    let mut best_dist = f64::INFINITY;
    for &rung in ladder {
        let dist = (rung.minor() as f64 - target).abs();
        // Strict improvement keeps the lower rung on exact ties.
        if dist < best_dist {
            best = rung;
            best_dist = dist;
        }
    }
    best
}

/// Recommendation triple for one prediction under an intensity
/// multiplier: prefill = ladder(expected x intensity), options at 4x and
/// 10x the prefill, everything capped at `max` and kept strictly
/// increasing by stepping lower rungs down the ladder.
pub fn recommend(
    pred: &DepositPrediction,
    intensity: f64,
    ladder: &[Money],
    max: Money,
) -> Result<Recommendation, PredictorError> {
    recommend_amount(pred.expected_amount, intensity, ladder, max)
}

/// [`recommend`] for a bare expected amount.
pub fn recommend_amount(
    expected: Money,
    intensity: f64,
    ladder: &[Money],
    max: Money,
) -> Result<Recommendation, PredictorError> {
    if ladder.is_empty() || ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PredictorError::InvalidLadder);
    }
    if ![1.0, 1.25, 1.5, 2.0].contains(&intensity) {
        return Err(PredictorError::UnsupportedIntensity(intensity));
    }
    let prefill = ladder_round(ladder, expected.minor() as f64 * intensity);
    let option1 = ladder_round(ladder, 4.0 * prefill.minor() as f64);
    let option2 = ladder_round(ladder, 10.0 * prefill.minor() as f64);

    // Cap: highest rung not exceeding the platform maximum.
    let cap_idx = ladder.partition_point(|&r| r <= max).checked_sub(1).ok_or(
        PredictorError::LadderExhausted,
    )?;
    let idx_of = |m: Money| ladder.iter().position(|&r| r == m).expect("ladder value");
    let i2 = idx_of(option2).min(cap_idx);
    let mut i1 = idx_of(option1).min(cap_idx);
    let mut i0 = idx_of(prefill).min(cap_idx);
    if i1 >= i2 {
        i1 = i2.checked_sub(1).ok_or(PredictorError::LadderExhausted)?;
    }
    if i0 >= i1 {
        i0 = i1.checked_sub(1).ok_or(PredictorError::LadderExhausted)?;
    }
    Ok(Recommendation { prefill: ladder[i0], option1: ladder[i1], option2: ladder[i2] })
}

/// Weighted F1: per-class F1 scores averaged with weights
/// `support_k / N`. Classes with zero precision and recall score 0.
pub fn weighted_f1(pred: &[usize], truth: &[usize], n_classes: usize) -> Result<f64, PredictorError> {
    let per_class = per_class_f1(pred, truth, n_classes)?;
    let n = truth.len() as f64;
    let mut support = alloc::vec![0usize; n_classes];
    for &t in truth {
        support[t] += 1;
    }
    Ok(per_class
        .iter()
        .zip(&support)
        .map(|(f1, &s)| f1 * s as f64 / n)
        .sum())
}

/// Per-class F1 scores.
pub fn per_class_f1(
    pred: &[usize],
    truth: &[usize],
    n_classes: usize,
) -> Result<Vec<f64>, PredictorError> {
    if pred.len() != truth.len() {
        return Err(PredictorError::LengthMismatch { left: pred.len(), right: truth.len() });
    }
    if pred.is_empty() {
        return Err(PredictorError::EmptyInput);
    }
    for &c in pred.iter().chain(truth) {
        if c >= n_classes {
            return Err(PredictorError::ClassOutOfRange { class: c, n_classes });
        }
    }
    let mut tp = alloc::vec![0usize; n_classes];
    let mut fp = alloc::vec![0usize; n_classes];
    let mut fnn = alloc::vec![0usize; n_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fnn[t] += 1;
        }
    }
    Ok((0..n_classes)
        .map(|k| {
            let denom = 2 * tp[k] + fp[k] + fnn[k];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[k] as f64 / denom as f64
            }
        })
        .collect())
}

/// One user's transaction history with the next deposit as the label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub user_id: String,
    pub features: Vec<f64>,
    /// Past deposit amounts, oldest first; never empty.
    pub past_amounts: Vec<Money>,
    /// The deposit whose class the model learns to predict.
    pub next_amount: Money,
}

/// Training table for the deposit predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryDataset {
    schema: FeatureSchema,
    rows: Vec<HistoryRow>,
}

impl HistoryDataset {
    pub fn new(
        schema: FeatureSchema,
        rows: Vec<HistoryRow>,
    ) -> Result<HistoryDataset, PredictorError> {
        for (row, r) in rows.iter().enumerate() {
            if schema.check_values(&r.features).is_err() {
                return Err(PredictorError::Fit(FitError::SchemaArity {
                    expected: schema.len(),
                    got: r.features.len(),
                }));
            }
            if r.past_amounts.is_empty() {
                return Err(PredictorError::MissingHistory { row });
            }
            if r.next_amount.is_negative() || r.past_amounts.iter().any(|a| a.is_negative()) {
                return Err(PredictorError::NegativeAmount(r.next_amount));
            }
        }
        Ok(HistoryDataset { schema, rows })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[HistoryRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Validation-fold quality of a trained predictor, with the heuristic
/// baseline measured on the same fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorReport {
    pub weighted_f1: f64,
    pub per_class_f1: Vec<f64>,
    /// `confusion[truth][pred]` counts on the validation fold.
    pub confusion: Vec<Vec<usize>>,
    pub heuristic_weighted_f1: f64,
    pub class_labels: Vec<String>,
    pub n_train: usize,
    pub n_valid: usize,
}

/// Fraction of rows held out as the validation fold.
const VALIDATION_FRACTION: f64 = 0.25;

/// Train the deposit classifier on binned next-deposit labels and score
/// it against the rolling-median heuristic on a held-out fold.
///
/// Every class must appear at least 10 times over the whole input; the
/// fold split is stratified per class on a stream keyed by `seed`.
pub fn train_deposit_model(
    histories: &HistoryDataset,
    cfg: &BaseLearnerConfig,
    binning: &AmountBinning,
    seed: u64,
) -> Result<(TreeEnsembleModel, PredictorReport), PredictorError> {
    let k = binning.n_classes();
    let labels: Vec<usize> = histories
        .rows()
        .iter()
        .map(|r| binning.bin(r.next_amount))
        .collect::<Result<_, _>>()?;

    let mut class_counts = alloc::vec![0usize; k];
    for &label in &labels {
        class_counts[label] += 1;
    }
    for (class, &count) in class_counts.iter().enumerate() {
        if count == 0 {
            return Err(PredictorError::Fit(FitError::MissingClass { class }));
        }
        if count < 10 {
            return Err(PredictorError::InsufficientClassSupport { class, count });
        }
    }

    // Stratified validation fold: shuffle each class's rows on its own
    // stream and hold out the leading quarter.
    let mut in_valid = alloc::vec![false; histories.len()];
    for class in 0..k {
        let mut members: Vec<usize> =
            (0..histories.len()).filter(|&i| labels[i] == class).collect();
        let mut fold_rng = rng::stream_at(seed, tag::VALIDATION_FOLD, class as u64);
        rand::seq::SliceRandom::shuffle(members.as_mut_slice(), &mut fold_rng);
        let take = Float::round(VALIDATION_FRACTION * members.len() as f64) as usize;
        for &i in members.iter().take(take) {
            in_valid[i] = true;
        }
    }

    let pick = |valid: bool| -> (Matrix, Vec<usize>, Vec<usize>) {
        let idx: Vec<usize> =
            (0..histories.len()).filter(|&i| in_valid[i] == valid).collect();
        let m = Matrix::from_rows(idx.iter().map(|&i| histories.rows()[i].features.clone()));
        let l = idx.iter().map(|&i| labels[i]).collect();
        (m, l, idx)
    };
    let (x_train, y_train, _) = pick(false);
    let (x_valid, y_valid, valid_idx) = pick(true);

    let model = fit_classifier(&x_train, &y_train, histories.schema(), cfg, seed)?;

    let predicted = model.predict_class(&x_valid)?;
    let mut confusion = alloc::vec![alloc::vec![0usize; k]; k];
    for (&p, &t) in predicted.iter().zip(&y_valid) {
        confusion[t][p] += 1;
    }
    let heuristic: Vec<usize> = valid_idx
        .iter()
        .map(|&i| heuristic_predict(&histories.rows()[i].past_amounts, binning))
        .collect::<Result<_, _>>()?;

    let report = PredictorReport {
        weighted_f1: weighted_f1(&predicted, &y_valid, k)?,
        per_class_f1: per_class_f1(&predicted, &y_valid, k)?,
        confusion,
        heuristic_weighted_f1: weighted_f1(&heuristic, &y_valid, k)?,
        class_labels: binning.labels(),
        n_train: y_train.len(),
        n_valid: y_valid.len(),
    };
    Ok((model, report))
}

/// Full prediction (class distribution plus expected amount) for each
/// row of `x`.
pub fn predict_deposits(
    model: &TreeEnsembleModel,
    binning: &AmountBinning,
    x: &Matrix,
) -> Result<Vec<DepositPrediction>, PredictorError> {
    let k = binning.n_classes();
    if model.n_classes() != Some(k) {
        return Err(PredictorError::ClassArityMismatch {
            model: model.n_classes().unwrap_or(1),
            binning: k,
        });
    }
    let proba = model.predict_proba(x)?;
    let reps: Vec<f64> = (0..k).map(|c| binning.representative(c).minor() as f64).collect();
    Ok((0..proba.n_rows())
        .map(|i| {
            let row = proba.row(i);
            let expected: f64 = row.iter().zip(&reps).map(|(p, r)| p * r).sum();
            DepositPrediction {
                class_probs: row.to_vec(),
                expected_amount: Money::from_f64_rounded(expected),
            }
        })
        .collect())
}

/// Default ladder as [`Money`] values.
pub fn default_ladder() -> Vec<Money> {
    DEFAULT_LADDER_MAJOR.iter().map(|&v| Money::from_major(v)).collect()
}

/// The non-personalized triple shown to control users.
pub const fn default_control_triple() -> Recommendation {
    Recommendation {
        prefill: Money::from_major(50),
        option1: Money::from_major(200),
        option2: Money::from_major(500),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::LossKind;
    use alloc::format;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::Rng;

    fn m(major: i64) -> Money {
        Money::from_major(major)
    }

    #[test]
    fn bins_follow_half_open_intervals_with_inclusive_top() {
        let b = AmountBinning::default_platform();
        assert_eq!(b.bin(m(0)).unwrap(), 0);
        let c = b.bin(m(25)).unwrap();
        assert_eq!(b.label(c), "20-40");
        assert_eq!(b.bin(m(20)).unwrap(), c);
        assert_eq!(b.bin(m(25_000)).unwrap(), b.n_classes() - 1);
        assert_eq!(b.label(b.n_classes() - 1), "1000-25000");
        assert_eq!(
            b.bin(m(25_001)).unwrap_err(),
            PredictorError::AmountAboveMaximum { amount: m(25_001), max: m(25_000) }
        );
        assert!(matches!(
            b.bin(Money::from_minor(-1)).unwrap_err(),
            PredictorError::NegativeAmount(_)
        ));
    }

    #[test]
    fn binning_rejects_bad_edges() {
        assert_eq!(
            AmountBinning::new(vec![m(0)]).unwrap_err(),
            PredictorError::TooFewEdges(1)
        );
        assert_eq!(
            AmountBinning::new(vec![m(10), m(20)]).unwrap_err(),
            PredictorError::FirstEdgeNotZero
        );
        assert_eq!(
            AmountBinning::new(vec![m(0), m(20), m(20)]).unwrap_err(),
            PredictorError::NonMonotonicEdges(2)
        );
    }

    #[test]
    fn representatives_are_geometric_means() {
        let b = AmountBinning::default_platform();
        // Bin (20, 40): sqrt(2000 * 4000) minor = 2828.43 -> 2828.
        assert_eq!(b.representative(1), Money::from_minor(2828));
        // Open-ended top bin: 1000 * 1.5.
        assert_eq!(b.representative(b.n_classes() - 1), m(1500));
        // First bin starts at zero, so its representative is zero.
        assert_eq!(b.representative(0), Money::ZERO);
    }

    #[test]
    fn heuristic_takes_lower_median_of_last_ten() {
        let b = AmountBinning::default_platform();
        assert_eq!(heuristic_predict(&[m(100)], &b).unwrap(), b.bin(m(100)).unwrap());
        assert_eq!(heuristic_predict(&vec![m(50); 10], &b).unwrap(), b.bin(m(50)).unwrap());
        // Twelve increasing amounts: the window is 30..=120 and the lower
        // median of an even window is 70.
        let history: Vec<Money> = (1..=12).map(|i| m(10 * i)).collect();
        let sorted_window: Vec<Money> = {
            let mut w = history[2..].to_vec();
            w.sort_unstable();
            w
        };
        assert_eq!(sorted_window[4], m(70));
        assert_eq!(heuristic_predict(&history, &b).unwrap(), b.bin(m(70)).unwrap());
        assert_eq!(heuristic_predict(&[], &b).unwrap_err(), PredictorError::EmptyHistory);
    }

    proptest! {
        #[test]
        fn heuristic_ignores_history_before_the_window(
            window in prop::collection::vec(0i64..25_000, 10),
            prefix in prop::collection::vec(0i64..25_000, 0..20),
        ) {
            let b = AmountBinning::default_platform();
            let tail: Vec<Money> = window.iter().map(|&v| m(v)).collect();
            let mut full: Vec<Money> = prefix.iter().map(|&v| m(v)).collect();
            full.extend_from_slice(&tail);
            prop_assert_eq!(
                heuristic_predict(&tail, &b).unwrap(),
                heuristic_predict(&full, &b).unwrap()
            );
        }

        #[test]
        fn recommendations_are_strict_ladder_triples(
            expected in 0i64..2_500_000,
            which in 0usize..4,
        ) {
            let pred = DepositPrediction {
                class_probs: vec![1.0],
                expected_amount: Money::from_minor(expected),
            };
            let intensity = [1.0, 1.25, 1.5, 2.0][which];
            let ladder = default_ladder();
            let rec = recommend(&pred, intensity, &ladder, m(PLATFORM_MAX_MAJOR)).unwrap();
            prop_assert!(rec.prefill < rec.option1 && rec.option1 < rec.option2);
            prop_assert!(rec.option2 <= m(PLATFORM_MAX_MAJOR));
            for v in [rec.prefill, rec.option1, rec.option2] {
                prop_assert!(ladder.contains(&v));
            }
        }
    }

    #[test]
    fn recommendation_matches_published_default_row() {
        let pred = DepositPrediction { class_probs: vec![1.0], expected_amount: m(50) };
        let ladder = default_ladder();
        let rec = recommend(&pred, 1.0, &ladder, m(PLATFORM_MAX_MAJOR)).unwrap();
        assert_eq!((rec.prefill, rec.option1, rec.option2), (m(50), m(200), m(500)));
        let rec = recommend(&pred, 2.0, &ladder, m(PLATFORM_MAX_MAJOR)).unwrap();
        assert_eq!((rec.prefill, rec.option1, rec.option2), (m(100), m(400), m(1000)));
    }

    #[test]
    fn recommendation_near_cap_steps_down_strictly() {
        let pred = DepositPrediction { class_probs: vec![1.0], expected_amount: m(24_000) };
        let ladder = default_ladder();
        let rec = recommend(&pred, 2.0, &ladder, m(PLATFORM_MAX_MAJOR)).unwrap();
        assert_eq!(
            (rec.prefill, rec.option1, rec.option2),
            (m(10_000), m(20_000), m(25_000))
        );
        // A cap that admits fewer than three rungs cannot host a triple.
        assert_eq!(
            recommend(&pred, 2.0, &ladder, m(20)).unwrap_err(),
            PredictorError::LadderExhausted
        );
    }

    #[test]
    fn recommendation_is_monotone_in_intensity() {
        let ladder = default_ladder();
        let mut r = rng::stream(5, 0x9EC);
        for _ in 0..200 {
            let pred = DepositPrediction {
                class_probs: vec![1.0],
                expected_amount: Money::from_minor((r.random::<f64>() * 1_000_000.0) as i64),
            };
            let mut last = Recommendation {
                prefill: Money::ZERO,
                option1: Money::ZERO,
                option2: Money::ZERO,
            };
            for intensity in [1.0, 1.25, 1.5, 2.0] {
                let rec =
                    recommend(&pred, intensity, &ladder, m(PLATFORM_MAX_MAJOR)).unwrap();
                assert!(rec.prefill >= last.prefill, "prefill fell at {intensity}");
                assert!(rec.option1 >= last.option1);
                assert!(rec.option2 >= last.option2);
                last = rec;
            }
        }
    }

    #[test]
    fn weighted_f1_hand_cases() {
        let truth = vec![0, 1, 0, 1, 0, 1];
        assert_eq!(weighted_f1(&truth, &truth, 2).unwrap(), 1.0);
        let all_zero = vec![0; 6];
        let got = weighted_f1(&all_zero, &truth, 2).unwrap();
        assert!((got - 1.0 / 3.0).abs() < 1e-12, "got {got}");
        assert_eq!(
            weighted_f1(&[0], &[0, 1], 2).unwrap_err(),
            PredictorError::LengthMismatch { left: 1, right: 2 }
        );
    }

    /// Brute-force oracle: build the full confusion matrix, then compute
    /// precision/recall per class from scratch.
    fn f1_oracle(pred: &[usize], truth: &[usize], k: usize) -> f64 {
        let mut matrix = vec![vec![0usize; k]; k];
        for (&p, &t) in pred.iter().zip(truth) {
            matrix[t][p] += 1;
        }
        let mut total = 0.0;
        for c in 0..k {
            let tp = matrix[c][c] as f64;
            let pred_c: usize = (0..k).map(|t| matrix[t][c]).sum();
            let truth_c: usize = matrix[c].iter().sum();
            let precision = if pred_c == 0 { 0.0 } else { tp / pred_c as f64 };
            let recall = if truth_c == 0 { 0.0 } else { tp / truth_c as f64 };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            total += f1 * truth_c as f64 / truth.len() as f64;
        }
        total
    }

    #[test]
    fn weighted_f1_matches_confusion_matrix_oracle() {
        let mut r = rng::stream(17, 0xF1);
        for _ in 0..50 {
            let n = 200;
            let pred: Vec<usize> = (0..n).map(|_| (r.random::<f64>() * 3.0) as usize).collect();
            let truth: Vec<usize> = (0..n).map(|_| (r.random::<f64>() * 3.0) as usize).collect();
            let got = weighted_f1(&pred, &truth, 3).unwrap();
            let want = f1_oracle(&pred, &truth, 3);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn weighted_f1_is_permutation_invariant_and_macro_when_balanced() {
        let truth = vec![0, 0, 1, 1, 2, 2];
        let pred = vec![0, 1, 1, 2, 2, 2];
        let base = weighted_f1(&pred, &truth, 3).unwrap();
        // Rotate both sequences by the same offset.
        let rot: Vec<usize> = (0..6).map(|i| (i + 4) % 6).collect();
        let pred_r: Vec<usize> = rot.iter().map(|&i| pred[i]).collect();
        let truth_r: Vec<usize> = rot.iter().map(|&i| truth[i]).collect();
        assert_eq!(base, weighted_f1(&pred_r, &truth_r, 3).unwrap());
        // Balanced truth: weighted F1 equals the unweighted class mean.
        let macro_f1 = per_class_f1(&pred, &truth, 3).unwrap().iter().sum::<f64>() / 3.0;
        assert!((base - macro_f1).abs() < 1e-12);
    }

    /// Rows cycling through every class: constant histories whose value
    /// is drawn inside bin `i % n_classes`, so `next_amount` (the median)
    /// lands in that bin and the median feature determines the label.
    fn toy_histories(n: usize, seed: u64) -> HistoryDataset {
        let binning = AmountBinning::default_platform();
        let mut r = rng::stream(seed, 0x415);
        let schema = FeatureSchema::standard();
        let rows: Vec<HistoryRow> = (0..n)
            .map(|i| {
                let class = i % binning.n_classes();
                let lo = binning.edges()[class].minor() as f64;
                let hi = if class + 1 == binning.n_classes() {
                    lo * 1.5
                } else {
                    binning.edges()[class + 1].minor() as f64
                };
                let amount = Money::from_f64_rounded(lo + r.random::<f64>() * (hi - lo - 1.0));
                let len = 1 + (r.random::<f64>() * 11.0) as usize;
                HistoryRow {
                    user_id: format!("u{i}"),
                    features: vec![
                        r.random::<f64>() * 1000.0,
                        len as f64,
                        amount.minor() as f64,
                        r.random::<f64>(),
                        0.0,
                    ],
                    past_amounts: vec![amount; len],
                    next_amount: amount,
                }
            })
            .collect();
        HistoryDataset::new(schema, rows).unwrap()
    }

    #[test]
    fn deposit_training_reports_validation_quality() {
        let histories = toy_histories(600, 3);
        let cfg = BaseLearnerConfig {
            loss: LossKind::SoftmaxCe,
            n_estimators: 40,
            max_depth: 4,
            ..BaseLearnerConfig::default()
        };
        let binning = AmountBinning::default_platform();
        let (model, report) = train_deposit_model(&histories, &cfg, &binning, 7).unwrap();
        assert_eq!(model.n_classes(), Some(binning.n_classes()));
        assert_eq!(report.n_train + report.n_valid, 600);
        // The label is a feature, so the model should be strong, and the
        // heuristic is exact by construction.
        assert!(report.weighted_f1 > 0.8, "weighted F1 {}", report.weighted_f1);
        assert!((report.heuristic_weighted_f1 - 1.0).abs() < 1e-12);
        let total: usize = report.confusion.iter().flatten().sum();
        assert_eq!(total, report.n_valid);

        let preds = predict_deposits(
            &model,
            &binning,
            &Matrix::from_rows(histories.rows().iter().map(|r| r.features.clone())),
        )
        .unwrap();
        for p in preds {
            let sum: f64 = p.class_probs.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(p.expected_amount >= Money::ZERO);
            assert!(p.expected_amount <= binning.max_amount());
        }
    }

    #[test]
    fn degenerate_labels_surface_classifier_errors() {
        let mut histories = toy_histories(60, 4);
        for row in &mut histories.rows {
            row.next_amount = m(70);
        }
        let cfg = BaseLearnerConfig { loss: LossKind::SoftmaxCe, ..BaseLearnerConfig::default() };
        let binning = AmountBinning::default_platform();
        assert_eq!(
            train_deposit_model(&histories, &cfg, &binning, 0).unwrap_err(),
            PredictorError::Fit(FitError::MissingClass { class: 0 })
        );
    }

    #[test]
    fn thin_classes_are_rejected_before_fitting() {
        let binning = AmountBinning::default_platform();
        let full = toy_histories(360, 5);
        let top = binning.n_classes() - 1;
        // Keep only three rows of the top class: 30 examples everywhere
        // else, 3 in the thin class.
        let mut kept_top = 0;
        let rows: Vec<HistoryRow> = full
            .rows()
            .iter()
            .filter(|row| {
                if binning.bin(row.next_amount).unwrap() == top {
                    kept_top += 1;
                    kept_top <= 3
                } else {
                    true
                }
            })
            .cloned()
            .collect();
        let histories = HistoryDataset::new(full.schema().clone(), rows).unwrap();
        let cfg = BaseLearnerConfig { loss: LossKind::SoftmaxCe, ..BaseLearnerConfig::default() };
        assert_eq!(
            train_deposit_model(&histories, &cfg, &binning, 0).unwrap_err(),
            PredictorError::InsufficientClassSupport { class: top, count: 3 }
        );
    }
}
