//! Canonical CSV encoding of experiment datasets.
//!
//! The column order is fixed: `user_id`, then the feature columns in
//! schema order, then `treatment,y_deposit,converted,recalled,n_txns`.
//! Treatments use their arm labels (`CG`, `TG1`, ...), booleans are `0`/`1`,
//! deposits are integer minor units, and features are written with the
//! shortest decimal representation that parses back to the same bits, so
//! write → parse is the identity. No quoting is supported; identifiers and
//! column names must not contain separators.
//!
//! Row indices in errors are 0-based over data rows (the header line is
//! not counted), matching record indices in the parsed dataset.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dataset::{DataError, ExperimentDataset, ExperimentRecord};
use crate::features::FeatureSchema;
use crate::money::Money;
use crate::treatment::ArmId;

/// Columns that every dataset file carries after the feature block.
pub const RESERVED_COLUMNS: [&str; 6] =
    ["user_id", "treatment", "y_deposit", "converted", "recalled", "n_txns"];

const TRAILING: [&str; 5] = ["treatment", "y_deposit", "converted", "recalled", "n_txns"];

fn encodable(text: &str) -> bool {
    !text.contains([',', '\n', '\r'])
}

/// Serialize a dataset to canonical CSV text (trailing newline included).
pub fn write_dataset(ds: &ExperimentDataset) -> Result<String, DataError> {
    let schema = ds.schema();
    for name in schema.names() {
        if !encodable(name) {
            return Err(DataError::UnencodableName(name.clone()));
        }
    }
    let mut out = String::new();
    out.push_str("user_id");
    for name in schema.names() {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",treatment,y_deposit,converted,recalled,n_txns\n");

    for (row, rec) in ds.records().iter().enumerate() {
        if !encodable(&rec.user_id) {
            return Err(DataError::UnencodableUserId { row });
        }
        out.push_str(&rec.user_id);
        for &value in &rec.features {
            out.push(',');
            out.push_str(&value.to_string());
        }
        out.push(',');
        out.push_str(rec.arm.label());
        out.push(',');
        out.push_str(&rec.y_deposit.minor().to_string());
        out.push_str(if rec.converted { ",1" } else { ",0" });
        out.push_str(if rec.recalled { ",1" } else { ",0" });
        out.push(',');
        out.push_str(&rec.n_txns.to_string());
        out.push('\n');
    }
    Ok(out)
}

/// Parse CSV text, inferring the feature schema from the header.
pub fn parse_dataset(text: &str) -> Result<ExperimentDataset, DataError> {
    let mut lines = nonempty_lines(text);
    let header = lines.next().ok_or(DataError::MissingColumn("user_id".to_owned()))?;
    let schema = schema_from_header(header)?;
    parse_rows(schema, lines)
}

/// Parse CSV text whose feature columns must match `expected` exactly
/// (same names, same order).
pub fn parse_dataset_expecting(
    text: &str,
    expected: &FeatureSchema,
) -> Result<ExperimentDataset, DataError> {
    let mut lines = nonempty_lines(text);
    let header = lines.next().ok_or(DataError::MissingColumn("user_id".to_owned()))?;
    let schema = schema_from_header(header)?;
    for name in expected.names() {
        if !schema.names().contains(name) {
            return Err(DataError::MissingColumn(name.clone()));
        }
    }
    for (i, name) in schema.names().iter().enumerate() {
        if expected.names().get(i) != Some(name) {
            return Err(DataError::UnexpectedColumn(name.clone()));
        }
    }
    parse_rows(schema, lines)
}

fn nonempty_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().filter(|l| !l.is_empty())
}

fn schema_from_header(header: &str) -> Result<FeatureSchema, DataError> {
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"user_id") {
        return Err(DataError::MissingColumn("user_id".to_owned()));
    }
    for required in TRAILING {
        if !cols.contains(&required) {
            return Err(DataError::MissingColumn(required.to_owned()));
        }
    }
    let tail = &cols[cols.len() - TRAILING.len()..];
    for (expected, &got) in TRAILING.iter().zip(tail) {
        if got != *expected {
            return Err(DataError::UnexpectedColumn(got.to_owned()));
        }
    }
    let feature_cols = &cols[1..cols.len() - TRAILING.len()];
    let mut names = Vec::with_capacity(feature_cols.len());
    for &name in feature_cols {
        if RESERVED_COLUMNS.contains(&name) || names.iter().any(|n| n == name) {
            return Err(DataError::UnexpectedColumn(name.to_owned()));
        }
        names.push(name.to_owned());
    }
    Ok(FeatureSchema::from_names(names))
}

fn parse_rows<'a>(
    schema: FeatureSchema,
    lines: impl Iterator<Item = &'a str>,
) -> Result<ExperimentDataset, DataError> {
    let n_features = schema.len();
    let expected_fields = 1 + n_features + TRAILING.len();
    let mut records = Vec::new();
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected_fields {
            return Err(DataError::WrongFieldCount {
                row,
                expected: expected_fields,
                got: fields.len(),
            });
        }
        let mut features = Vec::with_capacity(n_features);
        for (j, &field) in fields[1..1 + n_features].iter().enumerate() {
            let column = || schema.names()[j].clone();
            let value: f64 = field
                .parse()
                .map_err(|_| DataError::MalformedField { row, column: column() })?;
            if !value.is_finite() {
                return Err(DataError::NonFiniteValue { row, column: column() });
            }
            features.push(value);
        }
        let arm_label = fields[1 + n_features];
        let arm = ArmId::from_label(arm_label).ok_or_else(|| DataError::UnknownTreatmentLabel {
            row,
            label: arm_label.to_owned(),
        })?;
        let y_minor: i64 = parse_field(fields[2 + n_features], row, "y_deposit")?;
        let converted = parse_flag(fields[3 + n_features], row, "converted")?;
        let recalled = parse_flag(fields[4 + n_features], row, "recalled")?;
        let n_txns: u32 = parse_field(fields[5 + n_features], row, "n_txns")?;
        records.push(ExperimentRecord {
            user_id: fields[0].to_owned(),
            features,
            arm,
            y_deposit: Money::from_minor(y_minor),
            converted,
            recalled,
            n_txns,
        });
    }
    ExperimentDataset::new(schema, records)
}

fn parse_field<T: core::str::FromStr>(
    field: &str,
    row: usize,
    column: &str,
) -> Result<T, DataError> {
    field.parse().map_err(|_| DataError::MalformedField { row, column: column.to_owned() })
}

fn parse_flag(field: &str, row: usize, column: &str) -> Result<bool, DataError> {
    match field {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(DataError::MalformedField { row, column: column.to_owned() }),
    }
}
