//! Tabular data model: schemas, datasets, CSV ingestion, binary
//! preprocessing, one-hot encoding and stratified splitting.

mod csv;
mod encode;
mod split;

pub use csv::load_csv;
pub(crate) use encode::encoded_columns;
pub use encode::{encode, encode_rows, EncodedMatrix};
pub use split::{stratified_split, SplitTriple, DEFAULT_FRACTIONS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kind of a raw feature. Categorical features carry their vocabulary so
/// that one-hot columns line up across parties encoding against the same
/// schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric,
    Categorical { vocabulary: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

/// Ordered feature list plus the target column name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    features: Vec<Feature>,
    target_name: String,
}

impl Schema {
    pub fn new(features: Vec<Feature>, target_name: impl Into<String>) -> Result<Self> {
        let target_name = target_name.into();
        let mut seen = std::collections::BTreeSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate feature name '{}'",
                    f.name
                )));
            }
            if f.name == target_name {
                return Err(Error::InvalidConfig(format!(
                    "target '{}' listed among features",
                    target_name
                )));
            }
            if let FeatureKind::Categorical { vocabulary } = &f.kind {
                if vocabulary.is_empty() {
                    return Err(Error::InvalidConfig(format!(
                        "empty vocabulary for feature '{}'",
                        f.name
                    )));
                }
                let mut v = vocabulary.clone();
                v.sort_unstable();
                v.dedup();
                if v.len() != vocabulary.len() {
                    return Err(Error::InvalidConfig(format!(
                        "duplicate vocabulary entries for feature '{}'",
                        f.name
                    )));
                }
            }
        }
        Ok(Schema {
            features,
            target_name,
        })
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Names of all raw features, in schema order.
    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }
}

/// One raw cell. Categorical cells index into the owning schema's
/// vocabulary for that feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Cat(u32),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

/// Tabular examples conforming to a schema, with class labels.
///
/// Labels index into `classes`; `None` marks a missing target cell. After
/// [`preprocess_binary`] there are exactly two classes, class 0 being the
/// more frequent one, and no missing cells anywhere.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Schema,
    cells: Vec<Cell>, // row-major, n_rows x n_features
    labels: Vec<Option<u32>>,
    classes: Vec<String>,
}

impl Dataset {
    pub fn new(
        schema: Schema,
        cells: Vec<Cell>,
        labels: Vec<Option<u32>>,
        classes: Vec<String>,
    ) -> Result<Self> {
        let d = schema.n_features();
        if d > 0 && !cells.len().is_multiple_of(d) {
            return Err(Error::InvalidConfig(
                "cell count is not a multiple of the feature count".into(),
            ));
        }
        let n = cells.len().checked_div(d).unwrap_or(labels.len());
        if labels.len() != n {
            return Err(Error::InvalidConfig(format!(
                "label count {} does not match row count {}",
                labels.len(),
                n
            )));
        }
        for (i, cell) in cells.iter().enumerate() {
            let feature = &schema.features()[i % d];
            match (cell, &feature.kind) {
                (Cell::Cat(c), FeatureKind::Categorical { vocabulary }) => {
                    if *c as usize >= vocabulary.len() {
                        return Err(Error::InvalidConfig(format!(
                            "category index {} out of range for feature '{}'",
                            c, feature.name
                        )));
                    }
                }
                (Cell::Num(_), FeatureKind::Numeric) | (Cell::Missing, _) => {}
                _ => {
                    return Err(Error::FeatureKindMismatch {
                        feature: feature.name.clone(),
                    })
                }
            }
        }
        for label in labels.iter().flatten() {
            if *label as usize >= classes.len() {
                return Err(Error::InvalidConfig(format!(
                    "label index {} out of range",
                    label
                )));
            }
        }
        Ok(Dataset {
            schema,
            cells,
            labels,
            classes,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        if self.schema.n_features() == 0 {
            self.labels.len()
        } else {
            self.cells.len() / self.schema.n_features()
        }
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    pub fn cell(&self, row: usize, feature: usize) -> Cell {
        self.cells[row * self.schema.n_features() + feature]
    }

    pub fn label(&self, row: usize) -> Option<u32> {
        self.labels[row]
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    /// Category label string for a categorical cell.
    pub fn category_label(&self, feature: usize, index: u32) -> &str {
        match &self.schema.features()[feature].kind {
            FeatureKind::Categorical { vocabulary } => &vocabulary[index as usize],
            FeatureKind::Numeric => unreachable!("numeric feature has no categories"),
        }
    }

    /// Count of missing cells (features and target).
    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_missing()).count()
            + self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Per-class row counts, ignoring rows with a missing label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.classes.len()];
        for label in self.labels.iter().flatten() {
            counts[*label as usize] += 1;
        }
        counts
    }

    /// Binary label vector. Errors unless the dataset has exactly two
    /// classes and no missing labels.
    pub fn y(&self) -> Result<Vec<u8>> {
        if self.classes.len() != 2 {
            return Err(Error::BinaryLabelsRequired);
        }
        self.labels
            .iter()
            .map(|l| l.map(|v| v as u8).ok_or(Error::BinaryLabelsRequired))
            .collect()
    }

    /// New dataset holding the given rows (in the given order).
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let d = self.schema.n_features();
        let mut cells = Vec::with_capacity(rows.len() * d);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            cells.extend_from_slice(&self.cells[r * d..(r + 1) * d]);
            labels.push(self.labels[r]);
        }
        Dataset {
            schema: self.schema.clone(),
            cells,
            labels,
            classes: self.classes.clone(),
        }
    }

    /// New dataset restricted to the given feature indices (in the given
    /// order); all rows are kept.
    pub fn select_features(&self, feature_indices: &[usize]) -> Dataset {
        let d = self.schema.n_features();
        let features: Vec<Feature> = feature_indices
            .iter()
            .map(|&i| self.schema.features()[i].clone())
            .collect();
        let schema = Schema::new(features, self.schema.target_name())
            .expect("feature subset of a valid schema is valid");
        let n = self.n_rows();
        let mut cells = Vec::with_capacity(n * feature_indices.len());
        for r in 0..n {
            for &f in feature_indices {
                cells.push(self.cells[r * d + f]);
            }
        }
        Dataset {
            schema,
            cells,
            labels: self.labels.clone(),
            classes: self.classes.clone(),
        }
    }
}

/// Drop rows with missing cells, keep only the two most frequent classes,
/// and remap labels so the more frequent class is 0 (ties broken by
/// lexicographic class name). Vocabularies are pruned to the categories
/// that survive.
pub fn preprocess_binary(d: &Dataset) -> Result<Dataset> {
    let n = d.n_rows();
    let nf = d.n_features();
    let complete: Vec<usize> = (0..n)
        .filter(|&r| d.label(r).is_some() && (0..nf).all(|f| !d.cell(r, f).is_missing()))
        .collect();

    let mut counts = vec![0usize; d.classes.len()];
    for &r in &complete {
        counts[d.label(r).unwrap() as usize] += 1;
    }
    let mut present: Vec<usize> = (0..d.classes.len()).filter(|&c| counts[c] > 0).collect();
    if present.len() < 2 {
        return Err(Error::InsufficientClasses);
    }
    // most frequent first; ties resolved by class name
    present.sort_by(|&a, &b| {
        counts[b]
            .cmp(&counts[a])
            .then_with(|| d.classes[a].cmp(&d.classes[b]))
    });
    let keep = [present[0], present[1]];

    let rows: Vec<usize> = complete
        .into_iter()
        .filter(|&r| {
            let l = d.label(r).unwrap() as usize;
            l == keep[0] || l == keep[1]
        })
        .collect();

    // prune vocabularies to surviving categories, preserving order
    let mut features = Vec::with_capacity(nf);
    let mut cat_remap: Vec<Option<Vec<Option<u32>>>> = Vec::with_capacity(nf);
    for (f, feature) in d.schema.features().iter().enumerate() {
        match &feature.kind {
            FeatureKind::Numeric => {
                features.push(feature.clone());
                cat_remap.push(None);
            }
            FeatureKind::Categorical { vocabulary } => {
                let mut used = vec![false; vocabulary.len()];
                for &r in &rows {
                    if let Cell::Cat(c) = d.cell(r, f) {
                        used[c as usize] = true;
                    }
                }
                let mut remap = vec![None; vocabulary.len()];
                let mut pruned = Vec::new();
                for (i, label) in vocabulary.iter().enumerate() {
                    if used[i] {
                        remap[i] = Some(pruned.len() as u32);
                        pruned.push(label.clone());
                    }
                }
                features.push(Feature {
                    name: feature.name.clone(),
                    kind: FeatureKind::Categorical { vocabulary: pruned },
                });
                cat_remap.push(Some(remap));
            }
        }
    }
    let schema = Schema::new(features, d.schema.target_name())?;

    let mut cells = Vec::with_capacity(rows.len() * nf);
    let mut labels = Vec::with_capacity(rows.len());
    for &r in &rows {
        for (f, remap) in cat_remap.iter().enumerate() {
            let cell = match d.cell(r, f) {
                Cell::Cat(c) => Cell::Cat(remap.as_ref().unwrap()[c as usize].unwrap()),
                other => other,
            };
            cells.push(cell);
        }
        let l = d.label(r).unwrap() as usize;
        labels.push(Some(if l == keep[0] { 0 } else { 1 }));
    }
    let classes = vec![d.classes[keep[0]].clone(), d.classes[keep[1]].clone()];
    Dataset::new(schema, cells, labels, classes)
}


#[cfg(test)]
mod tests {
    use super::testutil::dataset;
    use super::*;

    #[test]
    fn schema_rejects_duplicates_and_target_overlap() {
        let f = |name: &str| Feature {
            name: name.into(),
            kind: FeatureKind::Numeric,
        };
        assert!(Schema::new(vec![f("a"), f("a")], "y").is_err());
        assert!(Schema::new(vec![f("a"), f("y")], "y").is_err());
        assert!(Schema::new(vec![f("a"), f("b")], "y").is_ok());
    }

    #[test]
    fn schema_rejects_bad_vocabularies() {
        let cat = |vocab: &[&str]| Feature {
            name: "c".into(),
            kind: FeatureKind::Categorical {
                vocabulary: vocab.iter().map(|s| s.to_string()).collect(),
            },
        };
        assert!(Schema::new(vec![cat(&[])], "y").is_err());
        assert!(Schema::new(vec![cat(&["a", "a"])], "y").is_err());
        assert!(Schema::new(vec![cat(&["a", "b"])], "y").is_ok());
    }

    #[test]
    fn preprocess_clean_binary_is_identity_up_to_relabel() {
        let d = dataset(
            &[("x", "num")],
            &[&["1"], &["2"], &["3"], &["4"], &["5"]],
            &["no", "yes", "no", "no", "yes"],
        );
        let p = preprocess_binary(&d).unwrap();
        assert_eq!(p.n_rows(), 5);
        // "no" is more frequent -> class 0
        assert_eq!(p.classes(), &["no".to_string(), "yes".to_string()]);
        assert_eq!(p.y().unwrap(), vec![0, 1, 0, 0, 1]);
    }

    #[test]
    fn preprocess_keeps_two_most_prominent_classes() {
        let mut labels = Vec::new();
        labels.extend(std::iter::repeat_n("a", 50));
        labels.extend(std::iter::repeat_n("b", 30));
        labels.extend(std::iter::repeat_n("c", 20));
        let rows: Vec<Vec<&str>> = (0..100).map(|_| vec!["1"]).collect();
        let row_refs: Vec<&[&str]> = rows.iter().map(|r| r.as_slice()).collect();
        let d = dataset(&[("x", "num")], &row_refs, &labels);
        let p = preprocess_binary(&d).unwrap();
        assert_eq!(p.n_rows(), 80);
        assert_eq!(p.classes(), &["a".to_string(), "b".to_string()]);
        let counts = p.class_counts();
        assert_eq!(counts, vec![50, 30]);
    }

    #[test]
    fn preprocess_drops_missing_and_minor_classes() {
        // 10-row fixture, 2 rows with missing cells, 3 classes
        let rows: Vec<Vec<&str>> = vec![
            vec!["1", "a"],
            vec!["2", "b"],
            vec!["", "a"],  // missing numeric
            vec!["4", "a"],
            vec!["5", ""],  // missing categorical
            vec!["6", "b"],
            vec!["7", "a"],
            vec!["8", "b"],
            vec!["9", "a"],
            vec!["10", "b"],
        ];
        let labels = ["x", "y", "x", "z", "x", "y", "x", "y", "z", "x"];
        // independent filter: a row survives iff it has no empty cell and its
        // label is among the two most frequent labels of the complete rows
        let complete: Vec<usize> = (0..10)
            .filter(|&i| rows[i].iter().all(|c| !c.is_empty()))
            .collect();
        let mut freq = std::collections::BTreeMap::new();
        for &i in &complete {
            *freq.entry(labels[i]).or_insert(0usize) += 1;
        }
        let mut order: Vec<_> = freq.iter().collect();
        order.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
        let top2: Vec<&str> = order.iter().take(2).map(|(k, _)| **k).collect();
        let expected: usize = complete
            .iter()
            .filter(|&&i| top2.contains(&labels[i]))
            .count();

        let row_refs: Vec<&[&str]> = rows.iter().map(|r| r.as_slice()).collect();
        let d = dataset(&[("n", "num"), ("c", "cat:a|b")], &row_refs, &labels);
        let p = preprocess_binary(&d).unwrap();
        assert_eq!(p.n_rows(), expected);
        assert_eq!(p.missing_count(), 0);
        assert_eq!(p.classes().len(), 2);
    }

    #[test]
    fn preprocess_errors_on_single_class() {
        let d = dataset(
            &[("x", "num")],
            &[&["1"], &["2"], &["3"]],
            &["a", "a", "a"],
        );
        assert!(matches!(
            preprocess_binary(&d),
            Err(Error::InsufficientClasses)
        ));
    }

    #[test]
    fn preprocess_prunes_vocabulary() {
        // category "c" only appears on a row that is dropped
        let d = dataset(
            &[("f", "cat:a|b|c")],
            &[&["a"], &["b"], &["c"], &["a"], &["b"]],
            &["x", "y", "z", "x", "y"],
        );
        let p = preprocess_binary(&d).unwrap();
        match &p.schema().features()[0].kind {
            FeatureKind::Categorical { vocabulary } => {
                assert_eq!(vocabulary, &["a".to_string(), "b".to_string()]);
            }
            _ => panic!("expected categorical"),
        }
    }

    #[test]
    fn frequency_tie_broken_lexicographically() {
        let d = dataset(
            &[("x", "num")],
            &[&["1"], &["2"], &["3"], &["4"]],
            &["b", "a", "b", "a"],
        );
        let p = preprocess_binary(&d).unwrap();
        assert_eq!(p.classes(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn select_rows_and_features() {
        let d = dataset(
            &[("n", "num"), ("c", "cat:a|b")],
            &[&["1", "a"], &["2", "b"], &["3", "a"]],
            &["x", "y", "x"],
        );
        let sub = d.select_rows(&[2, 0]);
        assert_eq!(sub.n_rows(), 2);
        assert_eq!(sub.cell(0, 0), Cell::Num(3.0));
        let feat = d.select_features(&[1]);
        assert_eq!(feat.n_features(), 1);
        assert_eq!(feat.n_rows(), 3);
        assert_eq!(feat.schema().features()[0].name, "c");
    }
}
