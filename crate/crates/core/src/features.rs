//! Feature schema and vectors.
//!
//! A schema is an ordered list of feature names shared by every record in
//! a dataset. Five base features are always present; extension slots
//! (e.g. the simulator's `price_sensitivity`) append after them.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Base feature names, in schema order.
pub const BASE_FEATURES: [&str; 5] = [
    "tenure_days",
    "n_past_txns",
    "median_past_amount",
    "engagement_score",
    "is_new_user",
];

/// Name of the binary new-user flag.
pub const IS_NEW_USER: &str = "is_new_user";

/// Ordered list of feature names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    names: Vec<String>,
}

impl FeatureSchema {
    /// The five base features, no extensions.
    pub fn standard() -> FeatureSchema {
        FeatureSchema {
            names: BASE_FEATURES.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Base features plus extension slots.
    pub fn with_extras(extras: &[&str]) -> FeatureSchema {
        let mut schema = FeatureSchema::standard();
        for e in extras {
            schema.names.push(e.to_string());
        }
        schema
    }

    /// Schema from raw names (e.g. a parsed CSV header).
    pub fn from_names(names: Vec<String>) -> FeatureSchema {
        FeatureSchema { names }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Whether `values` is a valid vector under this schema: right arity,
    /// all finite, and a binary new-user flag when that column exists.
    pub fn check_values(&self, values: &[f64]) -> Result<(), FeatureViolation> {
        if values.len() != self.names.len() {
            return Err(FeatureViolation::ArityMismatch {
                expected: self.names.len(),
                got: values.len(),
            });
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(FeatureViolation::NonFinite { index: i });
            }
        }
        if let Some(i) = self.index_of(IS_NEW_USER) {
            if values[i] != 0.0 && values[i] != 1.0 {
                return Err(FeatureViolation::NonBinaryFlag { index: i });
            }
        }
        Ok(())
    }
}

/// Why a feature vector fails schema validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureViolation {
    ArityMismatch { expected: usize, got: usize },
    NonFinite { index: usize },
    NonBinaryFlag { index: usize },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_schema_has_base_features() {
        let s = FeatureSchema::standard();
        assert_eq!(s.len(), 5);
        assert_eq!(s.index_of("median_past_amount"), Some(2));
        assert_eq!(s.index_of(IS_NEW_USER), Some(4));
    }

    #[test]
    fn extras_append_in_order() {
        let s = FeatureSchema::with_extras(&["price_sensitivity"]);
        assert_eq!(s.len(), 6);
        assert_eq!(s.index_of("price_sensitivity"), Some(5));
    }

    #[test]
    fn check_values_rejects_bad_vectors() {
        let s = FeatureSchema::standard();
        let ok = [100.0, 3.0, 5000.0, 0.4, 1.0];
        assert!(s.check_values(&ok).is_ok());

        assert_eq!(
            s.check_values(&ok[..4]),
            Err(FeatureViolation::ArityMismatch { expected: 5, got: 4 })
        );
        let mut nan = ok;
        nan[2] = f64::NAN;
        assert_eq!(s.check_values(&nan), Err(FeatureViolation::NonFinite { index: 2 }));
        let mut flag = ok;
        flag[4] = 0.5;
        assert_eq!(s.check_values(&flag), Err(FeatureViolation::NonBinaryFlag { index: 4 }));
    }
}
