//! Federation construction: synthetic non-IID partitioners and per-client
//! default-value metadata.
//!
//! Four regimes are supported. Quantity skew deals rows by power-law
//! shares, label skew draws per-client class distributions from a
//! Dirichlet around the prior, vertical partitioning assigns feature
//! subsets, and natural partitioning groups by a categorical column.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};
use crate::tabular::{Cell, Dataset, FeatureKind};

/// Smallest client a partitioner may produce: enough rows for a stratified
/// 0.6/0.2/0.2 split with both classes present.
pub const MIN_CLIENT_ROWS: usize = 15;

/// How a federation was constructed, for downstream grouping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDescriptor {
    pub regime: String,
    pub params: Vec<(String, String)>,
    pub seed: u64,
    /// Categories dropped by `natural_split` for failing the size rule.
    pub dropped_groups: Vec<String>,
}

/// One client's slice of the source data.
#[derive(Debug, Clone)]
pub struct FederationClient {
    pub client_id: u32,
    pub data: Dataset,
    pub raw_feature_set: BTreeSet<String>,
}

/// An ordered set of clients plus the descriptor of how they were built.
#[derive(Debug, Clone)]
pub struct Federation {
    pub clients: Vec<FederationClient>,
    pub descriptor: PartitionDescriptor,
}

impl Federation {
    fn from_row_assignment(
        d: &Dataset,
        assignment: Vec<Vec<usize>>,
        descriptor: PartitionDescriptor,
    ) -> Self {
        let feature_set: BTreeSet<String> = d.schema().feature_names().into_iter().collect();
        let clients = assignment
            .into_iter()
            .enumerate()
            .map(|(id, rows)| FederationClient {
                client_id: id as u32,
                data: d.select_rows(&rows),
                raw_feature_set: feature_set.clone(),
            })
            .collect();
        Federation {
            clients,
            descriptor,
        }
    }
}

/// Power-law shares: `s_i = u_i^(1/beta)` normalized. Small `beta`
/// concentrates the mass on few clients; `beta = 1` gives exchangeable
/// uniform draws.
pub fn power_shares(n_clients: usize, beta: f64, rng: &mut Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n_clients)
        .map(|_| rng.uniform_open().powf(1.0 / beta))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|s| s / total).collect()
}

/// Quantity skew: shuffle all rows once and deal them contiguously by
/// rounded cumulative power-law shares.
pub fn quantity_skew(d: &Dataset, n_clients: usize, beta: f64, seed: u64) -> Result<Federation> {
    if n_clients == 0 {
        return Err(Error::NoClients);
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::BetaOutOfRange(beta));
    }
    let n = d.n_rows();
    let mut rng = Rng::seed_from_u64(derive_seed(seed, "quantity_skew", &[]));
    let shares = power_shares(n_clients, beta, &mut rng);

    let mut rows: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut rows);

    let mut assignment = Vec::with_capacity(n_clients);
    let mut cum = 0.0;
    let mut start = 0usize;
    for (i, &share) in shares.iter().enumerate() {
        cum += share;
        let end = if i + 1 == n_clients {
            n
        } else {
            (cum * n as f64).round() as usize
        };
        let end = end.clamp(start, n);
        if end - start < MIN_CLIENT_ROWS {
            return Err(Error::DegeneratePartition {
                client: i as u32,
                rows: end - start,
            });
        }
        assignment.push(rows[start..end].to_vec());
        start = end;
    }

    Ok(Federation::from_row_assignment(
        d,
        assignment,
        PartitionDescriptor {
            regime: "quantity".into(),
            params: vec![("beta".into(), format!("{beta}"))],
            seed,
            dropped_groups: Vec::new(),
        },
    ))
}

/// One client's class distribution: `Dirichlet(alpha * p)` around the
/// prior `p`.
pub fn sample_label_distribution(rng: &mut Rng, alpha: f64, prior: &[f64]) -> Vec<f64> {
    let alphas: Vec<f64> = prior.iter().map(|&p| alpha * p).collect();
    rng.dirichlet(&alphas)
}

/// Label skew: every client receives exactly `rows_per_client` rows whose
/// labels are drawn i.i.d. from its own `Dirichlet(alpha * p)` class
/// distribution. When a class pool runs dry the distribution is
/// renormalized over the classes that still have rows.
pub fn label_skew(
    d: &Dataset,
    n_clients: usize,
    alpha: f64,
    rows_per_client: usize,
    seed: u64,
) -> Result<Federation> {
    if n_clients == 0 {
        return Err(Error::NoClients);
    }
    if alpha <= 0.0 {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    let demand = n_clients * rows_per_client;
    if demand > d.n_rows() {
        return Err(Error::NotEnoughRows {
            demand,
            available: d.n_rows(),
        });
    }
    let counts = d.class_counts();
    let total: usize = counts.iter().sum();
    if total < d.n_rows() {
        return Err(Error::BinaryLabelsRequired);
    }
    let prior: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();

    let mut rng = Rng::seed_from_u64(derive_seed(seed, "label_skew", &[]));
    // per-class pools of unseen rows, consumed across clients
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); counts.len()];
    for r in 0..d.n_rows() {
        pools[d.label(r).unwrap() as usize].push(r);
    }
    for pool in &mut pools {
        rng.shuffle(pool);
    }

    let mut assignment = Vec::with_capacity(n_clients);
    for _ in 0..n_clients {
        let mut q = sample_label_distribution(&mut rng, alpha, &prior);
        let mut rows = Vec::with_capacity(rows_per_client);
        for _ in 0..rows_per_client {
            loop {
                let c = rng.pick_weighted(&q);
                if let Some(r) = pools[c].pop() {
                    rows.push(r);
                    break;
                }
                // pool exhausted: renormalize over classes with rows left
                q[c] = 0.0;
                let rest: f64 = q.iter().sum();
                if rest <= 0.0 {
                    for (i, pool) in pools.iter().enumerate() {
                        q[i] = pool.len() as f64;
                    }
                } else {
                    for v in &mut q {
                        *v /= rest;
                    }
                }
            }
        }
        assignment.push(rows);
    }

    Ok(Federation::from_row_assignment(
        d,
        assignment,
        PartitionDescriptor {
            regime: "label".into(),
            params: vec![
                ("alpha".into(), format!("{alpha}")),
                ("rows_per_client".into(), format!("{rows_per_client}")),
            ],
            seed,
            dropped_groups: Vec::new(),
        },
    ))
}

/// Vertical partitioning: every client keeps all rows but only the
/// distinct features among `round(p * n_features)` draws made uniformly
/// with replacement.
pub fn vertical_split(d: &Dataset, n_clients: usize, p: f64, seed: u64) -> Result<Federation> {
    if n_clients == 0 {
        return Err(Error::NoClients);
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::FeatureProportionOutOfRange(p));
    }
    let n_features = d.n_features();
    let draws = (p * n_features as f64).round() as usize;
    if draws == 0 {
        return Err(Error::FeatureProportionOutOfRange(p));
    }

    let mut rng = Rng::seed_from_u64(derive_seed(seed, "vertical_split", &[]));
    let mut clients = Vec::with_capacity(n_clients);
    for id in 0..n_clients {
        let mut drawn: Vec<usize> = (0..draws)
            .map(|_| rng.below(n_features as u64) as usize)
            .collect();
        drawn.sort_unstable();
        drawn.dedup();
        let data = d.select_features(&drawn);
        let raw_feature_set = data.schema().feature_names().into_iter().collect();
        clients.push(FederationClient {
            client_id: id as u32,
            data,
            raw_feature_set,
        });
    }

    Ok(Federation {
        clients,
        descriptor: PartitionDescriptor {
            regime: "vertical".into(),
            params: vec![("p".into(), format!("{p}"))],
            seed,
            dropped_groups: Vec::new(),
        },
    })
}

/// Natural partitioning: one client per category of `column`, with the
/// partition column removed from every client's features. Groups smaller
/// than [`MIN_CLIENT_ROWS`] or missing a class are dropped with a warning.
pub fn natural_split(d: &Dataset, column: &str) -> Result<Federation> {
    let col = d
        .schema()
        .feature_index(column)
        .ok_or_else(|| Error::PartitionColumnMissing(column.to_string()))?;
    let vocabulary = match &d.schema().features()[col].kind {
        FeatureKind::Categorical { vocabulary } => vocabulary.clone(),
        FeatureKind::Numeric => {
            return Err(Error::PartitionColumnNotCategorical(column.to_string()))
        }
    };

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); vocabulary.len()];
    for r in 0..d.n_rows() {
        if let Cell::Cat(c) = d.cell(r, col) {
            groups[c as usize].push(r);
        }
    }

    let keep_features: Vec<usize> = (0..d.n_features()).filter(|&f| f != col).collect();
    let stripped = d.select_features(&keep_features);
    let feature_set: BTreeSet<String> = stripped.schema().feature_names().into_iter().collect();

    let mut clients = Vec::new();
    let mut dropped = Vec::new();
    for (category, rows) in vocabulary.iter().zip(&groups) {
        let class_count = {
            let mut seen = BTreeSet::new();
            for &r in rows {
                if let Some(l) = d.label(r) {
                    seen.insert(l);
                }
            }
            seen.len()
        };
        if rows.len() < MIN_CLIENT_ROWS || class_count < 2 {
            log::warn!(
                "natural_split: dropping group '{category}' ({} rows, {class_count} classes)",
                rows.len()
            );
            dropped.push(category.clone());
            continue;
        }
        clients.push(FederationClient {
            client_id: clients.len() as u32,
            data: stripped.select_rows(rows),
            raw_feature_set: feature_set.clone(),
        });
    }
    if clients.is_empty() {
        return Err(Error::NoViableGroups);
    }

    Ok(Federation {
        clients,
        descriptor: PartitionDescriptor {
            regime: "natural".into(),
            params: vec![("column".into(), column.to_string())],
            seed: 0,
            dropped_groups: dropped,
        },
    })
}

/// Per-feature constants a client publishes alongside its model so other
/// parties can synthesize features they lack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DefaultValue {
    Num(f64),
    Cat(String),
}

/// Defaults for exactly the owning client's raw features.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DefaultValues(pub BTreeMap<String, DefaultValue>);

impl DefaultValues {
    pub fn get(&self, feature: &str) -> Option<&DefaultValue> {
        self.0.get(feature)
    }
}

/// Compute published defaults: the modal category for categorical features
/// (ties to the lexicographically first) and `median + N(0, sd * epsilon)`
/// for numeric ones. The noise is drawn once here and stored as a constant.
pub fn make_defaults(client_data: &Dataset, epsilon: f64, seed: u64) -> Result<DefaultValues> {
    if client_data.n_rows() == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    if epsilon < 0.0 {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    let mut rng = Rng::seed_from_u64(derive_seed(seed, "defaults", &[]));
    let mut out = BTreeMap::new();
    for (f, feature) in client_data.schema().features().iter().enumerate() {
        let value = match &feature.kind {
            FeatureKind::Categorical { vocabulary } => {
                let mut counts = vec![0usize; vocabulary.len()];
                for r in 0..client_data.n_rows() {
                    if let Cell::Cat(c) = client_data.cell(r, f) {
                        counts[c as usize] += 1;
                    }
                }
                // vocabulary is sorted on ingestion, so the first maximal
                // count wins ties lexicographically
                let modal = counts
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                DefaultValue::Cat(vocabulary[modal].clone())
            }
            FeatureKind::Numeric => {
                let mut values: Vec<f64> = (0..client_data.n_rows())
                    .filter_map(|r| match client_data.cell(r, f) {
                        Cell::Num(v) => Some(v),
                        _ => None,
                    })
                    .collect();
                values.sort_by(f64::total_cmp);
                let n = values.len();
                let median = if n == 0 {
                    0.0
                } else if n % 2 == 1 {
                    values[n / 2]
                } else {
                    (values[n / 2 - 1] + values[n / 2]) / 2.0
                };
                let sd = if n < 2 {
                    0.0
                } else {
                    let mean = values.iter().sum::<f64>() / n as f64;
                    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
                    (ss / (n - 1) as f64).sqrt()
                };
                let noise = if sd * epsilon > 0.0 {
                    rng.normal() * sd * epsilon
                } else {
                    0.0
                };
                DefaultValue::Num(median + noise)
            }
        };
        out.insert(feature.name.clone(), value);
    }
    Ok(DefaultValues(out))
}
