//! Per-client personalization via stacked generalization: feature
//! alignment against fetched models, meta-feature construction, held-out
//! vs pooled meta-training, evaluation, and contribution scores.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{fit_forest, mdi_importance, predict, predict_proba, ForestModel, ForestParams};
use crate::metrics::balanced_accuracy;
use crate::partition::{DefaultValue, DefaultValues};
use crate::rng::derive_seed;
use crate::tabular::{encode_rows, Cell, Dataset, EncodedMatrix, FeatureKind, Schema, SplitTriple};

/// A fitted forest as shared with the federation, together with the
/// metadata other clients need to predict with it: the raw schema it was
/// trained on and the owner's published default values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PublishedModel {
    pub owner: u32,
    pub model: ForestModel,
    pub schema: Schema,
    pub defaults: DefaultValues,
}

/// Whether the meta-model trains on a held-out slice or on the same rows
/// as the private model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackingMode {
    HeldOut,
    Pooled,
}

impl fmt::Display for StackingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StackingMode::HeldOut => write!(f, "held_out"),
            StackingMode::Pooled => write!(f, "pooled"),
        }
    }
}

impl FromStr for StackingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "held_out" => Ok(StackingMode::HeldOut),
            "pooled" => Ok(StackingMode::Pooled),
            other => Err(Error::InvalidConfig(format!(
                "unknown stacking mode '{other}' (expected held_out or pooled)"
            ))),
        }
    }
}

/// One client's private data, split, models and stacking bookkeeping.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub client_id: u32,
    pub data: Dataset,
    pub split: SplitTriple,
    pub public_model: ForestModel,
    pub defaults: DefaultValues,
    pub mode: StackingMode,
    pub private_model: Option<ForestModel>,
    pub meta_model: Option<ForestModel>,
    /// Owners of the base models feeding the meta-model; the client's own
    /// private model always comes first.
    pub base_order: Vec<u32>,
    /// Fetched models dropped because their predictions failed.
    pub dropped_bases: Vec<u32>,
    /// Out-of-vocabulary categorical values replaced by publisher defaults
    /// while aligning.
    pub oov_substitutions: u64,
}

impl ClientState {
    pub fn new(
        client_id: u32,
        data: Dataset,
        split: SplitTriple,
        public_model: ForestModel,
        defaults: DefaultValues,
        mode: StackingMode,
    ) -> Self {
        ClientState {
            client_id,
            data,
            split,
            public_model,
            defaults,
            mode,
            private_model: None,
            meta_model: None,
            base_order: Vec::new(),
            dropped_bases: Vec::new(),
            oov_substitutions: 0,
        }
    }
}

/// Evaluation outcome of one personalized client.
#[derive(Debug, Clone)]
pub struct ClientReport {
    /// Balanced-accuracy difference, meta-model minus private model.
    pub gain: f64,
    pub private_ba: f64,
    pub meta_ba: f64,
    pub self_importance: f64,
    /// Importance assigned to each other base model, keyed by owner.
    pub contributions: BTreeMap<u32, f64>,
    /// All-zero scores from an all-leaf meta-forest.
    pub degenerate: bool,
}

/// A base model reference: either a fetched published model or the
/// client's own private model wrapped with its schema and defaults.
#[derive(Clone, Copy)]
pub struct BaseModel<'a> {
    pub owner: u32,
    pub model: &'a ForestModel,
    pub schema: &'a Schema,
    pub defaults: &'a DefaultValues,
}

impl<'a> From<&'a PublishedModel> for BaseModel<'a> {
    fn from(pm: &'a PublishedModel) -> Self {
        BaseModel {
            owner: pm.owner,
            model: &pm.model,
            schema: &pm.schema,
            defaults: &pm.defaults,
        }
    }
}

fn default_num(defaults: &DefaultValues, owner: u32, feature: &str) -> Result<f64> {
    match defaults.get(feature) {
        Some(DefaultValue::Num(v)) => Ok(*v),
        _ => Err(Error::InvalidConfig(format!(
            "model of client {owner} lacks a numeric default for feature '{feature}'"
        ))),
    }
}

fn default_cat_index(
    defaults: &DefaultValues,
    owner: u32,
    feature: &str,
    vocabulary: &[String],
) -> Result<u32> {
    match defaults.get(feature) {
        Some(DefaultValue::Cat(label)) => vocabulary
            .iter()
            .position(|v| v == label)
            .map(|i| i as u32)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "default category '{label}' of client {owner} is outside its own vocabulary \
                     for feature '{feature}'"
                ))
            }),
        _ => Err(Error::InvalidConfig(format!(
            "model of client {owner} lacks a categorical default for feature '{feature}'"
        ))),
    }
}

/// Align the given local rows to a base model's feature space.
///
/// Features the base was trained on take local values where the local
/// schema has them (with matching kind); everything else is filled with the
/// publisher's default. Local categories outside the publisher's
/// vocabulary map to the default category and are counted, not rejected.
/// Returns the encoded matrix, column-compatible with `base.model`, plus
/// the out-of-vocabulary substitution count.
pub fn align_rows(
    base: &BaseModel<'_>,
    local: &Dataset,
    rows: &[usize],
) -> Result<(EncodedMatrix, u64)> {
    enum Filler {
        NumLocal { from: usize, default: f64 },
        NumConst(f64),
        CatLocal { from: usize, map: Vec<Option<u32>>, default: u32, width: usize },
        CatConst { default: u32, width: usize },
    }

    let mut fillers = Vec::with_capacity(base.schema.n_features());
    for feature in base.schema.features() {
        let local_idx = local.schema().feature_index(&feature.name);
        let filler = match &feature.kind {
            FeatureKind::Numeric => {
                let default = default_num(base.defaults, base.owner, &feature.name)?;
                match local_idx {
                    Some(from)
                        if local.schema().features()[from].kind == FeatureKind::Numeric =>
                    {
                        Filler::NumLocal { from, default }
                    }
                    _ => Filler::NumConst(default),
                }
            }
            FeatureKind::Categorical { vocabulary } => {
                let default =
                    default_cat_index(base.defaults, base.owner, &feature.name, vocabulary)?;
                match local_idx.map(|from| (from, &local.schema().features()[from].kind)) {
                    Some((from, FeatureKind::Categorical { vocabulary: local_vocab })) => {
                        let map = local_vocab
                            .iter()
                            .map(|l| vocabulary.iter().position(|v| v == l).map(|i| i as u32))
                            .collect();
                        Filler::CatLocal {
                            from,
                            map,
                            default,
                            width: vocabulary.len(),
                        }
                    }
                    _ => Filler::CatConst {
                        default,
                        width: vocabulary.len(),
                    },
                }
            }
        };
        fillers.push(filler);
    }

    let columns = base.model.column_names().to_vec();
    let n_cols = columns.len();
    let raw_of: Vec<String> = {
        // regenerate from the schema so raw_of stays consistent
        let (cols, raws) = crate::tabular::encoded_columns(base.schema);
        debug_assert_eq!(cols, columns);
        raws
    };

    let mut oov = 0u64;
    let mut values = vec![0.0; rows.len() * n_cols];
    for (out_r, &r) in rows.iter().enumerate() {
        let mut col = 0;
        for filler in &fillers {
            match filler {
                Filler::NumLocal { from, default } => {
                    values[out_r * n_cols + col] = match local.cell(r, *from) {
                        Cell::Num(v) => v,
                        _ => *default,
                    };
                    col += 1;
                }
                Filler::NumConst(v) => {
                    values[out_r * n_cols + col] = *v;
                    col += 1;
                }
                Filler::CatLocal {
                    from,
                    map,
                    default,
                    width,
                } => {
                    let idx = match local.cell(r, *from) {
                        Cell::Cat(c) => match map[c as usize] {
                            Some(mapped) => mapped,
                            None => {
                                oov += 1;
                                *default
                            }
                        },
                        _ => *default,
                    };
                    values[out_r * n_cols + col + idx as usize] = 1.0;
                    col += width;
                }
                Filler::CatConst { default, width } => {
                    values[out_r * n_cols + col + *default as usize] = 1.0;
                    col += width;
                }
            }
        }
    }
    Ok((
        EncodedMatrix::from_rows(columns, raw_of, values, rows.len()),
        oov,
    ))
}

/// Align an entire local dataset to a published model's feature space.
pub fn align_features(pm: &PublishedModel, local: &Dataset) -> Result<(EncodedMatrix, u64)> {
    let rows: Vec<usize> = (0..local.n_rows()).collect();
    align_rows(&BaseModel::from(pm), local, &rows)
}

/// Meta-feature name for a base model.
fn meta_column_name(owner: u32) -> String {
    format!("model_{owner}")
}

/// One meta-feature column per base: its positive-class probability on the
/// aligned local rows. Returns the stacked matrix plus the total
/// out-of-vocabulary substitution count.
pub fn build_meta_matrix(
    bases: &[BaseModel<'_>],
    local: &Dataset,
    rows: &[usize],
) -> Result<(EncodedMatrix, u64)> {
    if bases.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut columns = Vec::with_capacity(bases.len());
    let mut data = vec![0.0; rows.len() * bases.len()];
    let mut oov_total = 0;
    for (b, base) in bases.iter().enumerate() {
        let (column, oov) = meta_feature_column(base, local, rows)?;
        oov_total += oov;
        for (r, v) in column.into_iter().enumerate() {
            data[r * bases.len() + b] = v;
        }
        columns.push(meta_column_name(base.owner));
    }
    Ok((
        EncodedMatrix::from_rows(columns.clone(), columns, data, rows.len()),
        oov_total,
    ))
}

fn meta_feature_column(
    base: &BaseModel<'_>,
    local: &Dataset,
    rows: &[usize],
) -> Result<(Vec<f64>, u64)> {
    let (aligned, oov) = align_rows(base, local, rows)?;
    let proba = predict_proba(base.model, &aligned)?;
    Ok((proba.into_iter().map(|p| p[1]).collect(), oov))
}

/// Row sets used for training under a mode: `(private_rows, meta_rows)`.
/// Held-out trains the private model on `train` and the meta-model on
/// `meta_train`; pooled trains both on `train ∪ meta_train`.
pub fn training_rows(split: &SplitTriple, mode: StackingMode) -> (Vec<usize>, Vec<usize>) {
    match mode {
        StackingMode::HeldOut => (split.train.clone(), split.meta_train.clone()),
        StackingMode::Pooled => {
            let pooled = split.pooled();
            (pooled.clone(), pooled)
        }
    }
}

/// Train the client's private model and personalized meta-model.
///
/// The base order is the client's own private model first, then the
/// fetched models sorted by owner. A fetched model whose meta-feature
/// cannot be computed is dropped with a warning rather than failing the
/// client.
pub fn run_client(
    state: &mut ClientState,
    fetched: &[&PublishedModel],
    params: &ForestParams,
    seed: u64,
) -> Result<()> {
    let (private_rows, meta_rows) = training_rows(&state.split, state.mode);
    let y = state.data.y()?;

    let x_private = encode_rows(&state.data, state.data.schema(), &private_rows)?;
    let y_private: Vec<u8> = private_rows.iter().map(|&r| y[r]).collect();
    let private_model = fit_forest(
        &x_private,
        &y_private,
        params,
        derive_seed(seed, "private_fit", &[]),
    )?;

    let mut sorted: Vec<&PublishedModel> = fetched
        .iter()
        .copied()
        .filter(|pm| pm.owner != state.client_id)
        .collect();
    sorted.sort_by_key(|pm| pm.owner);

    // own private model first, then fetched models that predict cleanly
    let own_base = BaseModel {
        owner: state.client_id,
        model: &private_model,
        schema: state.data.schema(),
        defaults: &state.defaults,
    };
    let y_meta: Vec<u8> = meta_rows.iter().map(|&r| y[r]).collect();
    let mut columns: Vec<(u32, Vec<f64>)> = Vec::with_capacity(sorted.len() + 1);
    let mut oov_total = 0u64;
    let (own_column, oov) = meta_feature_column(&own_base, &state.data, &meta_rows)?;
    oov_total += oov;
    columns.push((state.client_id, own_column));
    state.dropped_bases.clear();
    for pm in &sorted {
        match meta_feature_column(&BaseModel::from(*pm), &state.data, &meta_rows) {
            Ok((column, oov)) => {
                oov_total += oov;
                columns.push((pm.owner, column));
            }
            Err(e) => {
                log::warn!(
                    "client {}: dropping base model of client {}: {e}",
                    state.client_id,
                    pm.owner
                );
                state.dropped_bases.push(pm.owner);
            }
        }
    }

    let names: Vec<String> = columns.iter().map(|(o, _)| meta_column_name(*o)).collect();
    let mut data = vec![0.0; meta_rows.len() * columns.len()];
    for (b, (_, column)) in columns.iter().enumerate() {
        for (r, &v) in column.iter().enumerate() {
            data[r * columns.len() + b] = v;
        }
    }
    let meta_x = EncodedMatrix::from_rows(names.clone(), names, data, meta_rows.len());
    let meta_model = fit_forest(&meta_x, &y_meta, params, derive_seed(seed, "meta_fit", &[]))?;

    state.base_order = columns.into_iter().map(|(o, _)| o).collect();
    state.oov_substitutions = oov_total;
    state.private_model = Some(private_model);
    state.meta_model = Some(meta_model);
    Ok(())
}

/// Split a meta-model importance vector into self-importance and
/// per-owner contributions following the base order.
pub(crate) fn report_from_importance(
    base_order: &[u32],
    importance: &[f64],
    private_ba: f64,
    meta_ba: f64,
) -> ClientReport {
    let degenerate = importance.iter().all(|&v| v == 0.0);
    ClientReport {
        gain: meta_ba - private_ba,
        private_ba,
        meta_ba,
        self_importance: importance[0],
        contributions: base_order[1..]
            .iter()
            .copied()
            .zip(importance[1..].iter().copied())
            .collect(),
        degenerate,
    }
}

/// Evaluate the personalized meta-model against the private baseline on
/// the client's test rows and extract contribution scores from the
/// meta-model's feature importances.
pub fn evaluate_client(state: &ClientState, fetched: &[&PublishedModel]) -> Result<ClientReport> {
    let private_model = state
        .private_model
        .as_ref()
        .ok_or(Error::InvalidConfig("client not trained yet".into()))?;
    let meta_model = state
        .meta_model
        .as_ref()
        .ok_or(Error::InvalidConfig("client not trained yet".into()))?;

    let y = state.data.y()?;
    let test_rows = &state.split.test;
    let y_test: Vec<u8> = test_rows.iter().map(|&r| y[r]).collect();

    let x_test = encode_rows(&state.data, state.data.schema(), test_rows)?;
    let private_pred = predict(private_model, &x_test)?;
    let private_ba = balanced_accuracy(&y_test, &private_pred)?;

    let mut bases = Vec::with_capacity(state.base_order.len());
    for &owner in &state.base_order {
        if owner == state.client_id {
            bases.push(BaseModel {
                owner,
                model: private_model,
                schema: state.data.schema(),
                defaults: &state.defaults,
            });
        } else {
            let pm = fetched
                .iter()
                .find(|pm| pm.owner == owner)
                .ok_or_else(|| {
                    Error::InvalidConfig(format!("base model of client {owner} not supplied"))
                })?;
            bases.push(BaseModel::from(*pm));
        }
    }
    let (meta_x, _) = build_meta_matrix(&bases, &state.data, test_rows)?;
    let meta_pred = predict(meta_model, &meta_x)?;
    let meta_ba = balanced_accuracy(&y_test, &meta_pred)?;

    let importance = mdi_importance(meta_model);
    Ok(report_from_importance(
        &state.base_order,
        &importance,
        private_ba,
        meta_ba,
    ))
}
