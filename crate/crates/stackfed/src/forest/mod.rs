//! Random forest classifier with soft-voting probabilities and normalized
//! mean-decrease-in-impurity feature importance.

mod tree;

pub use tree::{fit_tree, Node, Tree};

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};
use crate::tabular::EncodedMatrix;

/// Forest hyperparameters. Impurity is always Gini.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` means unbounded depth.
    pub max_depth: Option<usize>,
    pub min_samples_split: u64,
    pub min_samples_leaf: u64,
    /// Candidate features drawn at each split; `None` means
    /// `floor(sqrt(n_features))`, at least 1.
    pub max_features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features_per_split: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
        }
        if self.min_samples_split == 0 || self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig(
                "min_samples_split and min_samples_leaf must be at least 1".into(),
            ));
        }
        if self.max_features_per_split == Some(0) {
            return Err(Error::InvalidConfig(
                "max_features_per_split must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn effective_max_features(&self, n_features: usize) -> usize {
        match self.max_features_per_split {
            Some(k) => k.min(n_features),
            None => {
                if n_features == 0 {
                    0
                } else {
                    ((n_features as f64).sqrt().floor() as usize).max(1)
                }
            }
        }
    }
}

/// A fitted random forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<Tree>,
    columns: Vec<String>,
    params: ForestParams,
}

impl ForestModel {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn column_names(&self) -> &[String] {
        &self.columns
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    /// Serialize to a stable, self-describing text form. Floats survive a
    /// round trip bit-exactly.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

/// Fit `params.n_trees` trees, each on a bootstrap resample drawn from an
/// independent substream of `seed`. Deterministic for fixed inputs,
/// including under parallel tree construction.
pub fn fit_forest(x: &EncodedMatrix, y: &[u8], params: &ForestParams, seed: u64) -> Result<ForestModel> {
    params.validate()?;
    let n = x.n_rows();
    if n < 2 {
        return Err(Error::EmptyTrainingSet);
    }
    assert_eq!(n, y.len());

    let trees: Result<Vec<Tree>> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = Rng::seed_from_u64(derive_seed(seed, "tree", &[t as u64]));
            let weights: Vec<u64> = if params.bootstrap {
                let mut w = vec![0u64; n];
                for _ in 0..n {
                    w[rng.below(n as u64) as usize] += 1;
                }
                w
            } else {
                vec![1u64; n]
            };
            fit_tree(x, y, &weights, params, &mut rng)
        })
        .collect();

    Ok(ForestModel {
        trees: trees?,
        columns: x.columns().to_vec(),
        params: params.clone(),
    })
}

fn check_columns(model: &ForestModel, x: &EncodedMatrix) -> Result<()> {
    if model.columns == x.columns() {
        return Ok(());
    }
    let missing: Vec<String> = model
        .columns
        .iter()
        .filter(|c| !x.columns().contains(c))
        .cloned()
        .collect();
    let extra: Vec<String> = x
        .columns()
        .iter()
        .filter(|c| !model.columns.contains(c))
        .cloned()
        .collect();
    Err(Error::ColumnMismatch { missing, extra })
}

/// Per-row class probabilities: the mean over trees of normalized leaf
/// class counts. Each row sums to 1 up to floating-point error.
pub fn predict_proba(model: &ForestModel, x: &EncodedMatrix) -> Result<Vec<[f64; 2]>> {
    check_columns(model, x)?;
    let n_trees = model.trees.len() as f64;
    let mut out = Vec::with_capacity(x.n_rows());
    for r in 0..x.n_rows() {
        let row = x.row(r);
        let mut acc = [0.0f64; 2];
        for tree in &model.trees {
            let counts = tree.leaf_counts(row);
            let total = (counts[0] + counts[1]) as f64;
            acc[0] += counts[0] as f64 / total;
            acc[1] += counts[1] as f64 / total;
        }
        out.push([acc[0] / n_trees, acc[1] / n_trees]);
    }
    Ok(out)
}

/// Hard labels: argmax of [`predict_proba`]; exact ties go to class 0.
pub fn predict(model: &ForestModel, x: &EncodedMatrix) -> Result<Vec<u8>> {
    Ok(predict_proba(model, x)?
        .into_iter()
        .map(|p| u8::from(p[1] > p[0]))
        .collect())
}

/// Normalized mean-decrease-in-impurity importance per encoded column.
///
/// Per tree, a feature accumulates `(n_samples / n_root) * decrease` over
/// the internal nodes splitting on it; scores are averaged over trees and
/// normalized to sum 1. A forest whose every tree is a single leaf yields
/// the all-zero vector.
pub fn mdi_importance(model: &ForestModel) -> Vec<f64> {
    let d = model.columns.len();
    let mut acc = vec![0.0f64; d];
    for tree in &model.trees {
        let root = tree.root_samples() as f64;
        for node in tree.nodes() {
            if let Node::Split {
                feature,
                decrease,
                n_samples,
                ..
            } = node
            {
                acc[*feature as usize] += (*n_samples as f64 / root) * decrease;
            }
        }
    }
    for v in &mut acc {
        *v /= model.trees.len() as f64;
    }
    let total: f64 = acc.iter().sum();
    if total > 0.0 {
        for v in &mut acc {
            *v /= total;
        }
    }
    acc
}
