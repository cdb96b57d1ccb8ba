//! Declarative experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::ForestParams;
use crate::partition::MIN_CLIENT_ROWS;
use crate::stacking::StackingMode;

fn default_n_clients() -> usize {
    10
}
fn default_partition_seeds() -> u64 {
    10
}
fn default_split_repeats() -> u64 {
    5
}
fn default_modes() -> Vec<StackingMode> {
    vec![StackingMode::HeldOut, StackingMode::Pooled]
}

/// Regime selection plus its parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum RegimeConfig {
    Quantity {
        beta: Vec<f64>,
    },
    Label {
        alpha: Vec<f64>,
        rows_per_client: usize,
    },
    Vertical {
        p: Vec<f64>,
        epsilon: Vec<f64>,
    },
    Natural {
        column: String,
    },
}

impl RegimeConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RegimeConfig::Quantity { .. } => "quantity",
            RegimeConfig::Label { .. } => "label",
            RegimeConfig::Vertical { .. } => "vertical",
            RegimeConfig::Natural { .. } => "natural",
        }
    }
}

/// Partial forest hyperparameters; unset fields keep the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestOverrides {
    pub n_trees: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_split: Option<u64>,
    pub min_samples_leaf: Option<u64>,
    pub max_features_per_split: Option<usize>,
    pub bootstrap: Option<bool>,
}

impl ForestOverrides {
    pub fn apply(&self) -> ForestParams {
        let base = ForestParams::default();
        ForestParams {
            n_trees: self.n_trees.unwrap_or(base.n_trees),
            max_depth: self.max_depth.or(base.max_depth),
            min_samples_split: self.min_samples_split.unwrap_or(base.min_samples_split),
            min_samples_leaf: self.min_samples_leaf.unwrap_or(base.min_samples_leaf),
            max_features_per_split: self
                .max_features_per_split
                .or(base.max_features_per_split),
            bootstrap: self.bootstrap.unwrap_or(base.bootstrap),
        }
    }
}

/// One sweep: dataset, regime grid, seed/repeat counts, stacking modes and
/// forest settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset_path: PathBuf,
    pub target_name: String,
    #[serde(flatten)]
    pub regime: RegimeConfig,
    #[serde(default = "default_n_clients")]
    pub n_clients: usize,
    #[serde(default = "default_partition_seeds")]
    pub partition_seeds: u64,
    #[serde(default = "default_split_repeats")]
    pub split_repeats: u64,
    #[serde(default = "default_modes")]
    pub modes: Vec<StackingMode>,
    #[serde(default)]
    pub forest: ForestOverrides,
    #[serde(default)]
    pub master_seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::FileNotFound(path.display().to_string()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.regime {
            RegimeConfig::Quantity { beta } => {
                if beta.is_empty() {
                    return Err(Error::InvalidConfig("empty beta grid".into()));
                }
                for &b in beta {
                    if !(b > 0.0 && b <= 1.0) {
                        return Err(Error::BetaOutOfRange(b));
                    }
                }
            }
            RegimeConfig::Label {
                alpha,
                rows_per_client,
            } => {
                if alpha.is_empty() {
                    return Err(Error::InvalidConfig("empty alpha grid".into()));
                }
                for &a in alpha {
                    if a <= 0.0 {
                        return Err(Error::AlphaOutOfRange(a));
                    }
                }
                if *rows_per_client < MIN_CLIENT_ROWS {
                    return Err(Error::InvalidConfig(format!(
                        "rows_per_client must be at least {MIN_CLIENT_ROWS}"
                    )));
                }
            }
            RegimeConfig::Vertical { p, epsilon } => {
                if p.is_empty() || epsilon.is_empty() {
                    return Err(Error::InvalidConfig("empty p or epsilon grid".into()));
                }
                for &v in p {
                    if !(v > 0.0 && v <= 1.0) {
                        return Err(Error::FeatureProportionOutOfRange(v));
                    }
                }
                for &e in epsilon {
                    if e < 0.0 {
                        return Err(Error::EpsilonOutOfRange(e));
                    }
                }
            }
            RegimeConfig::Natural { column } => {
                if column.is_empty() {
                    return Err(Error::InvalidConfig("empty partition column name".into()));
                }
            }
        }
        if self.n_clients == 0 {
            return Err(Error::NoClients);
        }
        if self.partition_seeds == 0 || self.split_repeats == 0 {
            return Err(Error::InvalidConfig(
                "partition_seeds and split_repeats must be at least 1".into(),
            ));
        }
        if self.modes.is_empty() {
            return Err(Error::InvalidConfig("no stacking modes configured".into()));
        }
        let mut modes = self.modes.clone();
        modes.dedup();
        if modes.len() != self.modes.len() {
            return Err(Error::InvalidConfig("duplicate stacking modes".into()));
        }
        self.forest.apply().validate()?;
        Ok(())
    }

    /// The parameter grid, flattened in declaration order.
    pub fn points(&self) -> Vec<ParamPoint> {
        match &self.regime {
            RegimeConfig::Quantity { beta } => beta
                .iter()
                .map(|&b| ParamPoint {
                    label: format!("beta={b}"),
                    kind: PointKind::Quantity { beta: b },
                })
                .collect(),
            RegimeConfig::Label {
                alpha,
                rows_per_client,
            } => alpha
                .iter()
                .map(|&a| ParamPoint {
                    label: format!("alpha={a}"),
                    kind: PointKind::Label {
                        alpha: a,
                        rows_per_client: *rows_per_client,
                    },
                })
                .collect(),
            RegimeConfig::Vertical { p, epsilon } => {
                let mut out = Vec::new();
                for &pv in p {
                    for &e in epsilon {
                        out.push(ParamPoint {
                            label: format!("p={pv};eps={e}"),
                            kind: PointKind::Vertical { p: pv, epsilon: e },
                        });
                    }
                }
                out
            }
            RegimeConfig::Natural { column } => vec![ParamPoint {
                label: format!("column={column}"),
                kind: PointKind::Natural {
                    column: column.clone(),
                },
            }],
        }
    }
}

/// One point of the parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint {
    pub label: String,
    pub kind: PointKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointKind {
    Quantity { beta: f64 },
    Label { alpha: f64, rows_per_client: usize },
    Vertical { p: f64, epsilon: f64 },
    Natural { column: String },
}

impl PointKind {
    /// Noise level for published default values (vertical only).
    pub fn epsilon(&self) -> f64 {
        match self {
            PointKind::Vertical { epsilon, .. } => *epsilon,
            _ => 0.0,
        }
    }
}
