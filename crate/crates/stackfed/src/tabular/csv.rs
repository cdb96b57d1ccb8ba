//! CSV ingestion with column type inference.

use std::path::Path;

use crate::error::{Error, Result};

use super::{Cell, Dataset, Feature, FeatureKind, Schema};

/// Load a CSV file into a [`Dataset`].
///
/// The first row is the header; the empty string marks a missing cell.
/// A column is numeric iff every non-missing cell parses as a number,
/// otherwise categorical with the observed distinct values (sorted
/// lexicographically) as vocabulary.
pub fn load_csv(path: impl AsRef<Path>, target_name: &str) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.display().to_string()));
    }
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Csv(e.to_string()))?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(Error::EmptyFile(path.display().to_string()));
    }
    let target_idx = headers
        .iter()
        .position(|h| h == target_name)
        .ok_or_else(|| Error::TargetNotFound(target_name.to_string()))?;

    let mut raw_rows: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        raw_rows.push(record.iter().map(|c| c.trim().to_string()).collect());
    }
    if raw_rows.is_empty() {
        return Err(Error::EmptyFile(path.display().to_string()));
    }

    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&i| i != target_idx).collect();

    // a column is numeric iff every non-missing cell parses as a number
    let mut features = Vec::with_capacity(feature_cols.len());
    for &col in &feature_cols {
        let numeric = raw_rows
            .iter()
            .filter(|r| !r[col].is_empty())
            .all(|r| r[col].parse::<f64>().is_ok());
        let kind = if numeric {
            FeatureKind::Numeric
        } else {
            let mut vocab: Vec<String> = raw_rows
                .iter()
                .map(|r| r[col].clone())
                .filter(|c| !c.is_empty())
                .collect();
            vocab.sort_unstable();
            vocab.dedup();
            FeatureKind::Categorical { vocabulary: vocab }
        };
        features.push(Feature {
            name: headers[col].clone(),
            kind,
        });
    }
    let schema = Schema::new(features, target_name)?;

    let mut classes: Vec<String> = raw_rows
        .iter()
        .map(|r| r[target_idx].clone())
        .filter(|c| !c.is_empty())
        .collect();
    classes.sort_unstable();
    classes.dedup();

    let mut cells = Vec::with_capacity(raw_rows.len() * feature_cols.len());
    let mut labels = Vec::with_capacity(raw_rows.len());
    for row in &raw_rows {
        for (fi, &col) in feature_cols.iter().enumerate() {
            let raw = &row[col];
            let cell = if raw.is_empty() {
                Cell::Missing
            } else {
                match &schema.features()[fi].kind {
                    FeatureKind::Numeric => Cell::Num(raw.parse::<f64>().expect("checked above")),
                    FeatureKind::Categorical { vocabulary } => {
                        let idx = vocabulary
                            .binary_search(raw)
                            .expect("vocabulary built from observed values");
                        Cell::Cat(idx as u32)
                    }
                }
            };
            cells.push(cell);
        }
        let label = &row[target_idx];
        labels.push(if label.is_empty() {
            None
        } else {
            Some(classes.binary_search(label).expect("built above") as u32)
        });
    }
    Dataset::new(schema, cells, labels, classes)
}
