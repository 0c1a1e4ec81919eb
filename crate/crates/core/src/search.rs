//! Randomized hyperparameter search over base-learner configurations
//! and meta-learner kinds, scored by mean test-set AUUC.
//!
//! Each trial samples one configuration from a [`SearchSpace`], fits a
//! CATE model on the training split, and computes the per-target AUUC
//! on both splits. The global winner maximizes the unweighted mean of
//! the four test AUUC values; the local winners maximize each target's
//! test AUUC separately. Trials are independent: every trial draws its
//! own seed from the run seed and the trial index, so results do not
//! depend on execution order, and a failing trial is logged and
//! skipped rather than aborting the run.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boost::{BaseLearnerConfig, LossKind, Matrix};
use crate::dataset::ExperimentDataset;
use crate::eval::{auuc, uplift_curve};
use crate::meta::{fit_meta, CateMatrix, LearnerKind, MetaConfig};
use crate::rng::{self, tag};
use crate::treatment::ArmId;

/// Fixed learning rate of every searched ensemble. The space covers
/// the capacity and regularization knobs; the rate stays conservative
/// so that `n_estimators` alone controls fitting strength.
pub const SEARCH_LEARNING_RATE: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("search space is empty: {field}")]
    EmptySpace { field: &'static str },
    #[error("need at least one trial")]
    NoTrials,
    #[error("every trial failed; no winner can be selected")]
    NoSuccessfulTrial,
}

/// Inclusive parameter ranges for the random search.
///
/// Ranges may be degenerate (lo equal to hi) to pin a parameter. The
/// space itself only requires ordered bounds; configurations that the
/// base learner rejects surface as per-trial failures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub gamma: (f64, f64),
    /// Sampled log-uniformly and rounded to the nearest integer.
    pub n_estimators: (usize, usize),
    pub colsample_bytree: (f64, f64),
    /// Sampled uniformly over the integers of the range.
    pub max_depth: (usize, usize),
    pub min_child_weight: (f64, f64),
    pub reg_lambda: (f64, f64),
    /// Sampled log-uniformly; the lower bound must be positive.
    pub reg_alpha: (f64, f64),
    /// Candidate meta-learners, drawn uniformly.
    pub meta_learners: Vec<LearnerKind>,
}

impl Default for SearchSpace {
    fn default() -> SearchSpace {
        SearchSpace {
            gamma: (0.0, 10.0),
            n_estimators: (20, 250),
            colsample_bytree: (0.5, 1.0),
            max_depth: (3, 15),
            min_child_weight: (1.0, 10.0),
            reg_lambda: (0.1, 1.0),
            reg_alpha: (10.0, 200.0),
            meta_learners: LearnerKind::ALL.to_vec(),
        }
    }
}

impl SearchSpace {
    fn validate(&self) -> Result<(), SearchError> {
        let ordered = |ok: bool, field: &'static str| {
            if ok {
                Ok(())
            } else {
                Err(SearchError::EmptySpace { field })
            }
        };
        ordered(self.gamma.0 <= self.gamma.1, "gamma")?;
        ordered(
            self.n_estimators.0 >= 1 && self.n_estimators.0 <= self.n_estimators.1,
            "n_estimators",
        )?;
        ordered(self.colsample_bytree.0 <= self.colsample_bytree.1, "colsample_bytree")?;
        ordered(
            self.max_depth.0 >= 1 && self.max_depth.0 <= self.max_depth.1,
            "max_depth",
        )?;
        ordered(self.min_child_weight.0 <= self.min_child_weight.1, "min_child_weight")?;
        ordered(self.reg_lambda.0 <= self.reg_lambda.1, "reg_lambda")?;
        ordered(
            self.reg_alpha.0 > 0.0 && self.reg_alpha.0 <= self.reg_alpha.1,
            "reg_alpha",
        )?;
        ordered(!self.meta_learners.is_empty(), "meta_learners")?;
        Ok(())
    }

    /// Whether a configuration and learner choice lie inside the space.
    pub fn contains(&self, config: &BaseLearnerConfig, learner: LearnerKind) -> bool {
        let within = |v: f64, (lo, hi): (f64, f64)| lo <= v && v <= hi;
        within(config.gamma, self.gamma)
            && config.n_estimators >= self.n_estimators.0
            && config.n_estimators <= self.n_estimators.1
            && within(config.colsample_bytree, self.colsample_bytree)
            && config.max_depth >= self.max_depth.0
            && config.max_depth <= self.max_depth.1
            && within(config.min_child_weight, self.min_child_weight)
            && within(config.reg_lambda, self.reg_lambda)
            && within(config.reg_alpha, self.reg_alpha)
            && self.meta_learners.contains(&learner)
    }
}

fn uniform(r: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * r.random::<f64>()
}

fn log_uniform(r: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        // A degenerate range returns its point without the exp/ln
        // round trip, which would perturb the last bit.
        return lo;
    }
    let ln_lo = Float::ln(lo);
    let ln_hi = Float::ln(hi);
    Float::exp(ln_lo + (ln_hi - ln_lo) * r.random::<f64>())
}

/// Draw one configuration and learner kind, uniformly over the ranges
/// with log-uniform draws for `reg_alpha` and `n_estimators`. The same
/// `(space, seed)` pair always yields the same draw.
pub fn sample_config(
    space: &SearchSpace,
    seed: u64,
) -> Result<(BaseLearnerConfig, LearnerKind), SearchError> {
    space.validate()?;
    let mut r = rng::stream(seed, tag::SAMPLE);
    let gamma = uniform(&mut r, space.gamma);
    let raw_estimators = log_uniform(
        &mut r,
        (space.n_estimators.0 as f64, space.n_estimators.1 as f64),
    );
    let n_estimators = (Float::round(raw_estimators) as usize)
        .clamp(space.n_estimators.0, space.n_estimators.1);
    let colsample_bytree = uniform(&mut r, space.colsample_bytree);
    let max_depth = r.random_range(space.max_depth.0..=space.max_depth.1);
    let min_child_weight = uniform(&mut r, space.min_child_weight);
    let reg_lambda = uniform(&mut r, space.reg_lambda);
    let reg_alpha = log_uniform(&mut r, space.reg_alpha);
    let learner = space.meta_learners[r.random_range(0..space.meta_learners.len())];
    let config = BaseLearnerConfig {
        gamma,
        n_estimators,
        colsample_bytree,
        max_depth,
        min_child_weight,
        reg_lambda,
        reg_alpha,
        learning_rate: SEARCH_LEARNING_RATE,
        loss: LossKind::SquaredError,
        focal_gamma: 0.0,
    };
    Ok((config, learner))
}

/// Scores of one successful trial; AUUC arrays are TG1..TG4 order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrialOutcome {
    Scored {
        train_auuc: [f64; 4],
        test_auuc: [f64; 4],
        mean_test_auuc: f64,
    },
    Failed {
        error: String,
    },
}

/// One line of the search log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub learner: LearnerKind,
    pub config: BaseLearnerConfig,
    #[serde(flatten)]
    pub outcome: TrialOutcome,
    pub wall_secs: f64,
}

/// Winner of one treatment group in local mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalWinner {
    pub arm: ArmId,
    pub trial: usize,
    pub learner: LearnerKind,
    pub config: BaseLearnerConfig,
    pub test_auuc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Global,
    Local,
}

impl SearchMode {
    pub fn label(self) -> &'static str {
        match self {
            SearchMode::Global => "global",
            SearchMode::Local => "local",
        }
    }

    pub fn from_label(text: &str) -> Option<SearchMode> {
        match text {
            "global" => Some(SearchMode::Global),
            "local" => Some(SearchMode::Local),
            _ => None,
        }
    }
}

/// Mode-dependent selection over the common trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SearchWinners {
    /// The trial maximizing mean test AUUC across targets.
    Global { winner: TrialRecord },
    /// Per target, the trial maximizing that target's test AUUC.
    Local { winners: [LocalWinner; 4] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub trials: Vec<TrialRecord>,
    pub winners: SearchWinners,
}

/// Source of wall-clock readings for trial timing.
pub trait Clock {
    /// Seconds since an arbitrary fixed origin.
    fn now_secs(&self) -> f64;
}

/// Clock that always reads zero, for contexts without a time source.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn now_secs(&self) -> f64 {
        0.0
    }
}

/// Fit one sampled configuration and score it on both splits.
fn score_trial(
    train: &ExperimentDataset,
    test: &ExperimentDataset,
    learner: LearnerKind,
    config: &BaseLearnerConfig,
    trial_seed: u64,
) -> Result<TrialOutcome, String> {
    let cfgs = MetaConfig::Global(config.clone());
    let model =
        fit_meta(learner, train, &cfgs, 0.5, trial_seed).map_err(|e| e.to_string())?;
    let test_features =
        Matrix::from_flat(test.feature_rows(&(0..test.len()).collect::<Vec<_>>()), test.schema().len());
    let test_cate = model.predict_cate(&test_features).map_err(|e| e.to_string())?;

    let mut train_auuc = [0.0; 4];
    let mut test_auuc = [0.0; 4];
    for (t, &target) in ArmId::TARGETS.iter().enumerate() {
        train_auuc[t] = pair_auuc(train, target, model.in_sample(), t)?;
        test_auuc[t] = pair_auuc(test, target, &test_cate, t)?;
    }
    let mean_test_auuc = test_auuc.iter().sum::<f64>() / 4.0;
    if train_auuc.iter().chain(&test_auuc).any(|v| !v.is_finite()) {
        return Err("non-finite AUUC".to_string());
    }
    Ok(TrialOutcome::Scored { train_auuc, test_auuc, mean_test_auuc })
}

fn pair_auuc(
    ds: &ExperimentDataset,
    target: ArmId,
    cate: &CateMatrix,
    target_index: usize,
) -> Result<f64, String> {
    let idx = ds.indices_of_arms(&[ArmId::Cg, target]);
    let scores: Vec<f64> = idx.iter().map(|&i| cate.get(i, target_index)).collect();
    let pair = ds.subset(&idx);
    let curve = uplift_curve(&pair, target, &scores).map_err(|e| e.to_string())?;
    auuc(&curve).map_err(|e| e.to_string())
}

/// Run `n_trials` independent sampled trials and select winners.
///
/// Within-pair propensity is 0.5, matching a uniformly assigned grid.
/// Failed trials stay in the log with their error text and are ignored
/// during selection; ties go to the earliest trial.
pub fn run_search(
    train: &ExperimentDataset,
    test: &ExperimentDataset,
    space: &SearchSpace,
    n_trials: usize,
    mode: SearchMode,
    seed: u64,
    clock: &dyn Clock,
) -> Result<SearchOutcome, SearchError> {
    if n_trials == 0 {
        return Err(SearchError::NoTrials);
    }
    space.validate()?;

    let mut trials = Vec::with_capacity(n_trials);
    for trial in 0..n_trials {
        let trial_seed = rng::child_seed(seed, tag::TRIAL, trial as u64);
        let (config, learner) = sample_config(space, trial_seed)?;
        let started = clock.now_secs();
        let outcome = match score_trial(train, test, learner, &config, trial_seed) {
            Ok(scored) => scored,
            Err(error) => TrialOutcome::Failed { error },
        };
        trials.push(TrialRecord {
            trial,
            seed: trial_seed,
            learner,
            config,
            outcome,
            wall_secs: clock.now_secs() - started,
        });
    }

    let winners = select_winners(&trials, mode)?;
    Ok(SearchOutcome { trials, winners })
}

fn select_winners(trials: &[TrialRecord], mode: SearchMode) -> Result<SearchWinners, SearchError> {
    let scored: Vec<(&TrialRecord, [f64; 4], f64)> = trials
        .iter()
        .filter_map(|rec| match rec.outcome {
            TrialOutcome::Scored { test_auuc, mean_test_auuc, .. } => {
                Some((rec, test_auuc, mean_test_auuc))
            }
            TrialOutcome::Failed { .. } => None,
        })
        .collect();
    if scored.is_empty() {
        return Err(SearchError::NoSuccessfulTrial);
    }
    match mode {
        SearchMode::Global => {
            let mut best = &scored[0];
            for candidate in &scored[1..] {
                if candidate.2 > best.2 {
                    best = candidate;
                }
            }
            Ok(SearchWinners::Global { winner: best.0.clone() })
        }
        SearchMode::Local => {
            let winners: Vec<LocalWinner> = ArmId::TARGETS
                .iter()
                .enumerate()
                .map(|(t, &arm)| {
                    let mut best = &scored[0];
                    for candidate in &scored[1..] {
                        if candidate.1[t] > best.1[t] {
                            best = candidate;
                        }
                    }
                    LocalWinner {
                        arm,
                        trial: best.0.trial,
                        learner: best.0.learner,
                        config: best.0.config.clone(),
                        test_auuc: best.1[t],
                    }
                })
                .collect();
            let winners: [LocalWinner; 4] =
                winners.try_into().expect("exactly four targets");
            Ok(SearchWinners::Local { winners })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ExperimentRecord;
    use crate::features::FeatureSchema;
    use crate::money::Money;
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec;

    /// Linear-effect dataset small enough for many trials: the uplift
    /// of every treatment grows with x0 at a per-arm slope.
    fn search_dataset(per_arm: usize, seed: u64) -> ExperimentDataset {
        let schema = FeatureSchema::from_names(vec!["x0".to_string(), "x1".to_string()]);
        let slopes = [0.0, 400.0, 800.0, 1200.0, 1600.0];
        let mut r = rng::stream(seed, 0x5EA2C4);
        let mut records = Vec::new();
        for i in 0..per_arm * 5 {
            let arm = ArmId::ALL[i % 5];
            let x0 = r.random::<f64>();
            let x1 = r.random::<f64>();
            let mean = 3000.0 + 2000.0 * x1 + slopes[arm.index()] * x0;
            let y = mean * (0.6 + 0.8 * r.random::<f64>());
            records.push(ExperimentRecord {
                user_id: format!("u{i:05}"),
                features: vec![x0, x1],
                arm,
                y_deposit: Money::from_minor(y as i64),
                converted: true,
                recalled: false,
                n_txns: 1,
            });
        }
        ExperimentDataset::new(schema, records).unwrap()
    }

    /// Space of cheap configurations so many trials stay fast.
    fn narrow_space() -> SearchSpace {
        SearchSpace {
            gamma: (0.0, 1.0),
            n_estimators: (20, 28),
            colsample_bytree: (0.6, 1.0),
            max_depth: (3, 4),
            min_child_weight: (1.0, 4.0),
            reg_lambda: (0.1, 1.0),
            reg_alpha: (10.0, 40.0),
            meta_learners: LearnerKind::ALL.to_vec(),
        }
    }

    #[test]
    fn default_space_contains_reference_tunings() {
        // Tunings of the kind a production-scale search settles on must
        // stay reachable, one per target plus a shared one.
        let space = SearchSpace::default();
        let reference = [
            (LearnerKind::R, 1.24, 59, 0.82, 7, 5.0, 0.36, 77.0),
            (LearnerKind::X, 8.40, 153, 0.56, 10, 3.0, 0.14, 115.0),
            (LearnerKind::R, 7.95, 102, 0.93, 15, 6.0, 0.57, 50.0),
            (LearnerKind::S, 4.60, 125, 0.88, 8, 4.0, 0.94, 163.0),
            (LearnerKind::R, 5.67, 200, 0.75, 12, 2.0, 0.50, 90.0),
        ];
        for (learner, gamma, n_estimators, colsample, depth, mcw, lambda, alpha) in reference {
            let config = BaseLearnerConfig {
                gamma,
                n_estimators,
                colsample_bytree: colsample,
                max_depth: depth,
                min_child_weight: mcw,
                reg_lambda: lambda,
                reg_alpha: alpha,
                learning_rate: SEARCH_LEARNING_RATE,
                loss: LossKind::SquaredError,
                focal_gamma: 0.0,
            };
            assert!(space.contains(&config, learner), "{config:?} left the space");
        }
    }

    #[test]
    fn degenerate_ranges_sample_exactly_that_point() {
        let space = SearchSpace {
            gamma: (2.5, 2.5),
            n_estimators: (40, 40),
            colsample_bytree: (0.8, 0.8),
            max_depth: (5, 5),
            min_child_weight: (3.0, 3.0),
            reg_lambda: (0.4, 0.4),
            reg_alpha: (25.0, 25.0),
            meta_learners: vec![LearnerKind::X],
        };
        for seed in [0, 7, 991] {
            let (config, learner) = sample_config(&space, seed).unwrap();
            assert_eq!(learner, LearnerKind::X);
            assert_eq!(config.gamma, 2.5);
            assert_eq!(config.n_estimators, 40);
            assert_eq!(config.colsample_bytree, 0.8);
            assert_eq!(config.max_depth, 5);
            assert_eq!(config.min_child_weight, 3.0);
            assert_eq!(config.reg_lambda, 0.4);
            assert_eq!(config.reg_alpha, 25.0);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let space = SearchSpace::default();
        let a = sample_config(&space, 42).unwrap();
        let b = sample_config(&space, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_config(&space, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_matches_the_declared_distributions() {
        let space = SearchSpace::default();
        let mut depth_counts = [0usize; 16];
        let mut alphas = Vec::new();
        let mut estimators = Vec::new();
        let n = 10_000;
        for seed in 0..n {
            let (config, _) = sample_config(&space, seed as u64).unwrap();
            depth_counts[config.max_depth] += 1;
            alphas.push(config.reg_alpha);
            estimators.push(config.n_estimators as f64);
            assert!(space.contains(&config, LearnerKind::S));
        }
        for depth in 3..=15 {
            let freq = depth_counts[depth] as f64 / n as f64;
            assert!(
                (freq - 1.0 / 13.0).abs() <= 0.01,
                "depth {depth} frequency {freq:.4}"
            );
        }
        // Log-uniform medians sit near the geometric midpoint of the
        // range, far below the arithmetic one.
        let median = |values: &mut Vec<f64>| {
            values.sort_unstable_by(f64::total_cmp);
            values[values.len() / 2]
        };
        let alpha_median = median(&mut alphas);
        assert!((33.0..60.0).contains(&alpha_median), "reg_alpha median {alpha_median:.1}");
        let estimator_median = median(&mut estimators);
        assert!(
            (55.0..90.0).contains(&estimator_median),
            "n_estimators median {estimator_median:.1}"
        );
    }

    #[test]
    fn invalid_spaces_are_rejected() {
        let mut no_learners = SearchSpace::default();
        no_learners.meta_learners.clear();
        assert_eq!(
            sample_config(&no_learners, 1).unwrap_err(),
            SearchError::EmptySpace { field: "meta_learners" }
        );
        let mut inverted = SearchSpace::default();
        inverted.gamma = (5.0, 1.0);
        assert_eq!(
            sample_config(&inverted, 1).unwrap_err(),
            SearchError::EmptySpace { field: "gamma" }
        );
        let mut zero_alpha = SearchSpace::default();
        zero_alpha.reg_alpha = (0.0, 10.0);
        assert_eq!(
            sample_config(&zero_alpha, 1).unwrap_err(),
            SearchError::EmptySpace { field: "reg_alpha" }
        );

        let train = search_dataset(60, 1);
        let test = search_dataset(60, 2);
        assert_eq!(
            run_search(&train, &test, &SearchSpace::default(), 0, SearchMode::Global, 1, &NullClock)
                .unwrap_err(),
            SearchError::NoTrials
        );
    }

    #[test]
    fn a_single_trial_wins_both_modes() {
        let train = search_dataset(70, 3);
        let test = search_dataset(70, 4);
        let space = narrow_space();
        let global =
            run_search(&train, &test, &space, 1, SearchMode::Global, 11, &NullClock).unwrap();
        assert_eq!(global.trials.len(), 1);
        match &global.winners {
            SearchWinners::Global { winner } => assert_eq!(winner.trial, 0),
            other => panic!("expected a global winner, got {other:?}"),
        }
        let local =
            run_search(&train, &test, &space, 1, SearchMode::Local, 11, &NullClock).unwrap();
        match &local.winners {
            SearchWinners::Local { winners } => {
                for (t, winner) in winners.iter().enumerate() {
                    assert_eq!(winner.trial, 0);
                    assert_eq!(winner.arm, ArmId::TARGETS[t]);
                }
            }
            other => panic!("expected local winners, got {other:?}"),
        }
        // Both runs share the identical trial log.
        assert_eq!(global.trials, local.trials);
        assert_eq!(global.trials[0].wall_secs, 0.0);
    }

    #[test]
    fn local_winners_dominate_the_global_winner_per_target() {
        let train = search_dataset(70, 5);
        let test = search_dataset(70, 6);
        let space = narrow_space();
        let n_trials = 50;
        let global =
            run_search(&train, &test, &space, n_trials, SearchMode::Global, 21, &NullClock)
                .unwrap();
        let local =
            run_search(&train, &test, &space, n_trials, SearchMode::Local, 21, &NullClock)
                .unwrap();
        assert_eq!(global.trials, local.trials);

        let rerun =
            run_search(&train, &test, &space, n_trials, SearchMode::Global, 21, &NullClock)
                .unwrap();
        assert_eq!(global, rerun);

        let global_scores = match &global.winners {
            SearchWinners::Global { winner } => match winner.outcome {
                TrialOutcome::Scored { test_auuc, mean_test_auuc, .. } => {
                    (test_auuc, mean_test_auuc)
                }
                _ => panic!("winner must be scored"),
            },
            other => panic!("expected a global winner, got {other:?}"),
        };
        let locals = match &local.winners {
            SearchWinners::Local { winners } => winners,
            other => panic!("expected local winners, got {other:?}"),
        };
        for (t, winner) in locals.iter().enumerate() {
            assert!(
                winner.test_auuc >= global_scores.0[t],
                "target {t}: local {:.4} below global {:.4}",
                winner.test_auuc,
                global_scores.0[t]
            );
        }

        // The winning objective is the running maximum over the log,
        // so prefixes can only improve.
        let mut best_so_far = f64::NEG_INFINITY;
        let mut prefix_maxima = Vec::new();
        for rec in &global.trials {
            if let TrialOutcome::Scored { mean_test_auuc, .. } = rec.outcome {
                best_so_far = best_so_far.max(mean_test_auuc);
            }
            prefix_maxima.push(best_so_far);
        }
        assert!(prefix_maxima.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*prefix_maxima.last().unwrap(), global_scores.1);
    }

    #[test]
    fn failing_trials_are_logged_and_skipped() {
        let train = search_dataset(60, 7);
        let test = search_dataset(60, 8);
        // Part of the colsample range is invalid for the base learner,
        // so some sampled configurations must fail at fit time.
        let mut space = narrow_space();
        space.colsample_bytree = (0.9, 1.4);
        let outcome =
            run_search(&train, &test, &space, 30, SearchMode::Global, 31, &NullClock).unwrap();
        let failed = outcome
            .trials
            .iter()
            .filter(|r| matches!(r.outcome, TrialOutcome::Failed { .. }))
            .count();
        let scored = outcome.trials.len() - failed;
        assert!(failed > 0, "expected some failing trials");
        assert!(scored > 0, "expected some scoring trials");
        let winner_mean = match &outcome.winners {
            SearchWinners::Global { winner } => match winner.outcome {
                TrialOutcome::Scored { mean_test_auuc, .. } => mean_test_auuc,
                _ => panic!("the winner must come from the scored trials"),
            },
            other => panic!("expected a global winner, got {other:?}"),
        };
        let best_scored = outcome
            .trials
            .iter()
            .filter_map(|r| match r.outcome {
                TrialOutcome::Scored { mean_test_auuc, .. } => Some(mean_test_auuc),
                _ => None,
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(winner_mean, best_scored);

        // A space that can never fit yields no winner but still logs.
        space.colsample_bytree = (1.2, 1.3);
        assert_eq!(
            run_search(&train, &test, &space, 5, SearchMode::Global, 31, &NullClock).unwrap_err(),
            SearchError::NoSuccessfulTrial
        );
    }

    #[test]
    fn trial_records_round_trip_through_json_lines() {
        let train = search_dataset(60, 9);
        let test = search_dataset(60, 10);
        let outcome =
            run_search(&train, &test, &narrow_space(), 3, SearchMode::Local, 41, &NullClock)
                .unwrap();
        for rec in &outcome.trials {
            let line = serde_json::to_string(rec).unwrap();
            assert!(!line.contains('\n'));
            assert!(line.contains("\"status\""));
            let back: TrialRecord = serde_json::from_str(&line).unwrap();
            assert_eq!(&back, rec);
        }
        let winners_json = serde_json::to_string(&outcome.winners).unwrap();
        let back: SearchWinners = serde_json::from_str(&winners_json).unwrap();
        assert_eq!(back, outcome.winners);
    }
}
