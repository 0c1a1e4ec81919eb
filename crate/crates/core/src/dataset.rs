//! Experiment dataset: rows of `(features X, arm T, outcome Y)` plus
//! guardrail flags, with deterministic stratified splitting.
//!
//! Datasets are immutable after construction; all validation happens in
//! [`ExperimentDataset::new`], so downstream code can rely on the
//! invariants without re-checking.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureSchema, FeatureViolation};
use crate::money::Money;
use crate::rng::{self, tag};
use crate::treatment::ArmId;

/// One user's row in an intensity experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub user_id: String,
    pub features: Vec<f64>,
    pub arm: ArmId,
    /// Total deposit amount over the experiment window.
    pub y_deposit: Money,
    /// Completed at least the conversion funnel.
    pub converted: bool,
    /// Chose one of the recommended amounts (only meaningful when converted).
    pub recalled: bool,
    /// Number of successful transactions.
    pub n_txns: u32,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unexpected column `{0}`")]
    UnexpectedColumn(String),
    #[error("row {row}: non-finite value in column `{column}`")]
    NonFiniteValue { row: usize, column: String },
    #[error("row {row}: unknown treatment label `{label}`")]
    UnknownTreatmentLabel { row: usize, label: String },
    #[error("row {row}: cannot parse field in column `{column}`")]
    MalformedField { row: usize, column: String },
    #[error("row {row}: expected {expected} fields, found {got}")]
    WrongFieldCount { row: usize, expected: usize, got: usize },
    #[error("duplicate user_id `{0}`")]
    DuplicateUserId(String),
    #[error("row {row}: {reason}")]
    RecordInvariant { row: usize, reason: &'static str },
    #[error("column name `{0}` contains a separator and cannot be encoded")]
    UnencodableName(String),
    #[error("row {row}: user_id contains a separator and cannot be encoded")]
    UnencodableUserId { row: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("test fraction {0} outside (0, 1)")]
    InvalidFraction(f64),
    #[error("arm {arm} has only {count} record(s); need at least 2 to split")]
    DegenerateSplit { arm: ArmId, count: usize },
}

/// Immutable collection of experiment records sharing one feature schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDataset {
    schema: FeatureSchema,
    records: Vec<ExperimentRecord>,
}

impl ExperimentDataset {
    /// Validate and freeze a dataset. Checks, per record: schema arity,
    /// finite features, binary new-user flag, non-negative deposit,
    /// `!converted => y = 0 && n_txns = 0`, `recalled => converted`; and
    /// globally: unique user ids.
    pub fn new(
        schema: FeatureSchema,
        records: Vec<ExperimentRecord>,
    ) -> Result<ExperimentDataset, DataError> {
        let mut seen = BTreeSet::new();
        for (row, rec) in records.iter().enumerate() {
            schema
                .check_values(&rec.features)
                .map_err(|v| feature_violation_error(row, &schema, v))?;
            if rec.y_deposit.is_negative() {
                return Err(DataError::RecordInvariant { row, reason: "negative deposit amount" });
            }
            if !rec.converted && (rec.y_deposit != Money::ZERO || rec.n_txns != 0) {
                return Err(DataError::RecordInvariant {
                    row,
                    reason: "non-converted record with deposits or transactions",
                });
            }
            if rec.recalled && !rec.converted {
                return Err(DataError::RecordInvariant {
                    row,
                    reason: "recalled record that did not convert",
                });
            }
            if !seen.insert(rec.user_id.as_str()) {
                return Err(DataError::DuplicateUserId(rec.user_id.clone()));
            }
        }
        drop(seen);
        Ok(ExperimentDataset { schema, records })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn records(&self) -> &[ExperimentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record count per arm, indexed as [`ArmId::ALL`].
    pub fn arm_counts(&self) -> [usize; 5] {
        let mut counts = [0usize; 5];
        for rec in &self.records {
            counts[rec.arm.index()] += 1;
        }
        counts
    }

    /// Indices of records whose arm is in `arms`, in dataset order.
    pub fn indices_of_arms(&self, arms: &[ArmId]) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| arms.contains(&r.arm))
            .map(|(i, _)| i)
            .collect()
    }

    /// New dataset holding clones of the records at `indices`.
    pub fn subset(&self, indices: &[usize]) -> ExperimentDataset {
        ExperimentDataset {
            schema: self.schema.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Feature matrix (row-major) over the records at `indices`.
    pub fn feature_rows(&self, indices: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(indices.len() * self.schema.len());
        for &i in indices {
            out.extend_from_slice(&self.records[i].features);
        }
        out
    }

    /// Deterministic stratified split. Within each arm, records are
    /// shuffled by a stream keyed on `(seed, arm)` and the first
    /// `round(test_fraction * n_arm)` go to the test side; both sides
    /// keep the original record order.
    pub fn split(
        &self,
        test_fraction: f64,
        seed: u64,
    ) -> Result<(ExperimentDataset, ExperimentDataset), DataError> {
        if self.records.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(DataError::InvalidFraction(test_fraction));
        }
        let counts = self.arm_counts();
        for arm in ArmId::ALL {
            let count = counts[arm.index()];
            if count > 0 && count < 2 {
                return Err(DataError::DegenerateSplit { arm, count });
            }
        }

        let mut is_test = alloc::vec![false; self.records.len()];
        for arm in ArmId::ALL {
            let mut members: Vec<usize> = self
                .records
                .iter()
                .enumerate()
                .filter(|(_, r)| r.arm == arm)
                .map(|(i, _)| i)
                .collect();
            if members.is_empty() {
                continue;
            }
            let take = num_traits::Float::round(test_fraction * members.len() as f64) as usize;
            let mut arm_rng = rng::stream_at(seed, tag::SPLIT, arm.index() as u64);
            members.shuffle(&mut arm_rng);
            for &i in members.iter().take(take) {
                is_test[i] = true;
            }
        }

        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, rec) in self.records.iter().enumerate() {
            if is_test[i] {
                test.push(rec.clone());
            } else {
                train.push(rec.clone());
            }
        }
        Ok((
            ExperimentDataset { schema: self.schema.clone(), records: train },
            ExperimentDataset { schema: self.schema.clone(), records: test },
        ))
    }
}

fn feature_violation_error(row: usize, schema: &FeatureSchema, v: FeatureViolation) -> DataError {
    match v {
        FeatureViolation::ArityMismatch { expected, got } => {
            DataError::WrongFieldCount { row, expected, got }
        }
        FeatureViolation::NonFinite { index } => DataError::NonFiniteValue {
            row,
            column: schema.names()[index].clone(),
        },
        FeatureViolation::NonBinaryFlag { .. } => DataError::RecordInvariant {
            row,
            reason: "is_new_user flag must be 0 or 1",
        },
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use alloc::format;

    /// Small synthetic dataset: `per_arm` records for each of the five
    /// arms, features drawn from a seeded stream.
    pub fn toy_dataset(per_arm: usize, seed: u64) -> ExperimentDataset {
        use rand::Rng;
        let schema = FeatureSchema::standard();
        let mut rng = rng::stream(seed, 0xDEAD);
        let mut records = Vec::new();
        for arm in ArmId::ALL {
            for i in 0..per_arm {
                let converted = rng.random::<f64>() < 0.7;
                let n_txns = if converted { 1 + (rng.random::<f64>() * 3.0) as u32 } else { 0 };
                let y = if converted {
                    Money::from_minor((rng.random::<f64>() * 10_000.0) as i64)
                } else {
                    Money::ZERO
                };
                records.push(ExperimentRecord {
                    user_id: format!("{}-{i}", arm.label()),
                    features: alloc::vec![
                        rng.random::<f64>() * 1000.0,
                        (rng.random::<f64>() * 20.0) as u32 as f64,
                        rng.random::<f64>() * 20_000.0,
                        rng.random::<f64>(),
                        if rng.random::<f64>() < 0.3 { 1.0 } else { 0.0 },
                    ],
                    arm,
                    y_deposit: y,
                    converted,
                    recalled: converted && rng.random::<f64>() < 0.4,
                    n_txns,
                });
            }
        }
        ExperimentDataset::new(schema, records).unwrap()
    }
}
