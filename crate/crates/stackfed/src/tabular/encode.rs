//! One-hot encoding against a shared schema.

use crate::error::{Error, Result};

use super::{Cell, Dataset, FeatureKind, Schema};

/// Dense numeric matrix with named columns. Numeric features pass through
/// verbatim; each categorical feature expands to one indicator column per
/// vocabulary entry. Column order is a deterministic function of the schema.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    columns: Vec<String>,
    raw_of: Vec<String>,
    values: Vec<f64>, // row-major
    n_rows: usize,
}

impl EncodedMatrix {
    pub fn from_rows(
        columns: Vec<String>,
        raw_of: Vec<String>,
        values: Vec<f64>,
        n_rows: usize,
    ) -> Self {
        assert_eq!(columns.len(), raw_of.len());
        assert_eq!(values.len(), n_rows * columns.len());
        EncodedMatrix {
            columns,
            raw_of,
            values,
            n_rows,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    /// Raw feature name behind an encoded column.
    pub fn raw_of(&self, col: usize) -> &str {
        &self.raw_of[col]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.columns.len() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let w = self.columns.len();
        &self.values[row * w..(row + 1) * w]
    }
}

/// Encoded column names for a schema, with the raw feature behind each.
pub(crate) fn encoded_columns(schema: &Schema) -> (Vec<String>, Vec<String>) {
    let mut columns = Vec::new();
    let mut raw_of = Vec::new();
    for feature in schema.features() {
        match &feature.kind {
            FeatureKind::Numeric => {
                columns.push(feature.name.clone());
                raw_of.push(feature.name.clone());
            }
            FeatureKind::Categorical { vocabulary } => {
                for label in vocabulary {
                    columns.push(format!("{}={}", feature.name, label));
                    raw_of.push(feature.name.clone());
                }
            }
        }
    }
    (columns, raw_of)
}

/// One-hot encode the given rows of `d` against `schema`. Every schema
/// feature must be present in `d` with a matching kind, and every category
/// must be in the schema vocabulary.
pub fn encode_rows(d: &Dataset, schema: &Schema, rows: &[usize]) -> Result<EncodedMatrix> {
    let (columns, raw_of) = encoded_columns(schema);

    // per schema feature: source index in d, and category remap table
    struct Source {
        from: usize,
        width: usize,
        cat_map: Option<Vec<Option<u32>>>,
    }
    let mut sources = Vec::with_capacity(schema.n_features());
    for feature in schema.features() {
        let from = d
            .schema()
            .feature_index(&feature.name)
            .ok_or_else(|| Error::MissingFeature(feature.name.clone()))?;
        let local = &d.schema().features()[from];
        match (&feature.kind, &local.kind) {
            (FeatureKind::Numeric, FeatureKind::Numeric) => sources.push(Source {
                from,
                width: 1,
                cat_map: None,
            }),
            (
                FeatureKind::Categorical { vocabulary },
                FeatureKind::Categorical {
                    vocabulary: local_vocab,
                },
            ) => {
                let map: Vec<Option<u32>> = local_vocab
                    .iter()
                    .map(|label| {
                        vocabulary
                            .iter()
                            .position(|v| v == label)
                            .map(|i| i as u32)
                    })
                    .collect();
                sources.push(Source {
                    from,
                    width: vocabulary.len(),
                    cat_map: Some(map),
                });
            }
            _ => {
                return Err(Error::FeatureKindMismatch {
                    feature: feature.name.clone(),
                })
            }
        }
    }

    let n_cols = columns.len();
    let mut values = vec![0.0; rows.len() * n_cols];
    for (out_r, &r) in rows.iter().enumerate() {
        let mut col = 0;
        for (fi, src) in sources.iter().enumerate() {
            let name = &schema.features()[fi].name;
            match d.cell(r, src.from) {
                Cell::Num(v) => {
                    values[out_r * n_cols + col] = v;
                }
                Cell::Cat(c) => {
                    let mapped = src.cat_map.as_ref().unwrap()[c as usize].ok_or_else(|| {
                        Error::CategoryOutsideVocabulary {
                            feature: name.clone(),
                            label: d.category_label(src.from, c).to_string(),
                        }
                    })?;
                    values[out_r * n_cols + col + mapped as usize] = 1.0;
                }
                Cell::Missing => return Err(Error::MissingValueAtEncode(name.clone())),
            }
            col += src.width;
        }
    }
    Ok(EncodedMatrix::from_rows(columns, raw_of, values, rows.len()))
}

/// Encode all rows of `d` against `schema`.
pub fn encode(d: &Dataset, schema: &Schema) -> Result<EncodedMatrix> {
    let rows: Vec<usize> = (0..d.n_rows()).collect();
    encode_rows(d, schema, &rows)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::dataset;
    use super::*;

    #[test]
    fn all_numeric_is_identity() {
        let d = dataset(
            &[("a", "num"), ("b", "num")],
            &[&["1", "10"], &["2", "20"]],
            &["x", "y"],
        );
        let m = encode(&d, d.schema()).unwrap();
        assert_eq!(m.columns(), &["a".to_string(), "b".to_string()]);
        assert_eq!(m.row(0), &[1.0, 10.0]);
        assert_eq!(m.row(1), &[2.0, 20.0]);
        assert_eq!(m.raw_of(0), "a");
        assert_eq!(m.raw_of(1), "b");
    }

    #[test]
    fn one_hot_indicator_placement() {
        let d = dataset(&[("f", "cat:a|b|c")], &[&["b"]], &["x"]);
        let m = encode(&d, d.schema()).unwrap();
        assert_eq!(
            m.columns(),
            &["f=a".to_string(), "f=b".to_string(), "f=c".to_string()]
        );
        assert_eq!(m.row(0), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn mixed_fixture_column_count() {
        let d = dataset(
            &[("n1", "num"), ("c1", "cat:a|b|c"), ("c2", "cat:u|v")],
            &[&["1", "a", "u"], &["2", "c", "v"]],
            &["x", "y"],
        );
        let m = encode(&d, d.schema()).unwrap();
        // numerics + sum of vocabulary sizes
        assert_eq!(m.n_cols(), 1 + 3 + 2);
        assert_eq!(m.n_rows(), 2);
    }

    #[test]
    fn category_outside_vocabulary_is_named() {
        let d = dataset(&[("f", "cat:a|b|z")], &[&["z"]], &["x"]);
        // target schema lacks "z"
        let target = dataset(&[("f", "cat:a|b")], &[&["a"]], &["x"])
            .schema()
            .clone();
        match encode(&d, &target) {
            Err(Error::CategoryOutsideVocabulary { feature, label }) => {
                assert_eq!(feature, "f");
                assert_eq!(label, "z");
            }
            other => panic!("expected vocabulary error, got {other:?}"),
        }
    }

    #[test]
    fn missing_schema_feature_errors() {
        let d = dataset(&[("a", "num")], &[&["1"]], &["x"]);
        let target = dataset(&[("a", "num"), ("b", "num")], &[&["1", "2"]], &["x"])
            .schema()
            .clone();
        assert!(matches!(
            encode(&d, &target),
            Err(Error::MissingFeature(f)) if f == "b"
        ));
    }

    #[test]
    fn missing_cell_at_encode_errors() {
        let d = dataset(&[("a", "num")], &[&[""]], &["x"]);
        assert!(matches!(
            encode(&d, d.schema()),
            Err(Error::MissingValueAtEncode(_))
        ));
    }

    #[test]
    fn encode_rows_subsets() {
        let d = dataset(
            &[("a", "num")],
            &[&["1"], &["2"], &["3"]],
            &["x", "y", "x"],
        );
        let m = encode_rows(&d, d.schema(), &[2, 0]).unwrap();
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.row(0), &[3.0]);
        assert_eq!(m.row(1), &[1.0]);
    }

    #[test]
    fn indicator_columns_sum_to_one_per_row() {
        let d = dataset(
            &[("c", "cat:a|b|c"), ("n", "num")],
            &[&["a", "1"], &["b", "2"], &["c", "3"], &["a", "4"]],
            &["x", "y", "x", "y"],
        );
        let m = encode(&d, d.schema()).unwrap();
        for r in 0..m.n_rows() {
            let s: f64 = (0..3).map(|c| m.value(r, c)).sum();
            assert_eq!(s, 1.0);
        }
    }
}
