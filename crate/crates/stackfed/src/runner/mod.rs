//! Experiment orchestration: seeded sweeps over partition regimes,
//! federation rounds, and result persistence.
//!
//! Every stochastic step derives its seed from the master seed and the
//! cell coordinates (parameter index, partition seed, client, repeat,
//! mode), so single cells can be recomputed in isolation and worker
//! parallelism cannot change the output bytes.

mod config;
mod plots;
mod results;
mod synth;

pub use config::{ExperimentConfig, ForestOverrides, ParamPoint, PointKind, RegimeConfig};
pub use plots::{emit_plot_data, Panel, PANEL_NAMES};
pub use results::{
    format_g6, read_graphs, read_results, write_graphs, write_results, GraphRow, ResultRow,
    GRAPHS_HEADER, RESULTS_HEADER,
};
pub use synth::{synthetic_csv, write_synthetic_csv};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::federation::{ContributionGraph, Registry};
use crate::forest::ForestParams;
use crate::metrics::jaccard;
use crate::partition::{
    label_skew, make_defaults, natural_split, quantity_skew, vertical_split, Federation,
};
use crate::rng::derive_seed;
use crate::stacking::{evaluate_client, run_client, ClientState, PublishedModel, StackingMode};
use crate::tabular::{
    encode, load_csv, preprocess_binary, stratified_split, Dataset, SplitTriple, DEFAULT_FRACTIONS,
};

/// Everything a sweep produces: evaluation rows, contribution edges, and
/// the log of skipped cells.
#[derive(Debug, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub graphs: Vec<GraphRow>,
    pub skipped: Vec<String>,
}

/// Stable per-mode tag for seed derivation, independent of config order.
fn mode_tag(mode: StackingMode) -> u64 {
    match mode {
        StackingMode::HeldOut => 0,
        StackingMode::Pooled => 1,
    }
}

/// Run the configured sweep. `workers` bounds the rayon pool
/// (`None` = available parallelism); results are identical either way.
pub fn run_experiment(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let raw = load_csv(&cfg.dataset_path, &cfg.target_name)?;
    let data = preprocess_binary(&raw)?;
    run_experiment_on(cfg, &data, workers)
}

/// Like [`run_experiment`] but on an already-preprocessed dataset.
pub fn run_experiment_on(
    cfg: &ExperimentConfig,
    data: &Dataset,
    workers: Option<usize>,
) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let params = cfg.forest.apply();
    let points = cfg.points();
    let cells: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|pi| (0..cfg.partition_seeds).map(move |ps| (pi, ps)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    let outputs: Vec<ExperimentOutput> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(pi, ps)| run_cell(cfg, data, &params, &points[pi], pi, ps))
            .collect()
    });

    let mut merged = ExperimentOutput::default();
    for out in outputs {
        merged.rows.extend(out.rows);
        merged.graphs.extend(out.graphs);
        merged.skipped.extend(out.skipped);
    }
    for line in &merged.skipped {
        log::warn!("{line}");
    }
    if merged.rows.is_empty() {
        return Err(Error::AllCellsFailed);
    }
    merged.rows.sort_by(|a, b| {
        (
            &a.regime,
            &a.params,
            a.partition_seed,
            a.repeat,
            a.client_id,
            a.mode.to_string(),
        )
            .cmp(&(
                &b.regime,
                &b.params,
                b.partition_seed,
                b.repeat,
                b.client_id,
                b.mode.to_string(),
            ))
    });
    merged.graphs.sort_by(|a, b| {
        (
            &a.regime,
            &a.params,
            a.partition_seed,
            a.repeat,
            a.mode.to_string(),
            a.from,
            a.to,
        )
            .cmp(&(
                &b.regime,
                &b.params,
                b.partition_seed,
                b.repeat,
                b.mode.to_string(),
                b.from,
                b.to,
            ))
    });
    Ok(merged)
}

fn build_federation(
    data: &Dataset,
    cfg: &ExperimentConfig,
    point: &ParamPoint,
    seed: u64,
) -> Result<Federation> {
    match &point.kind {
        PointKind::Quantity { beta } => quantity_skew(data, cfg.n_clients, *beta, seed),
        PointKind::Label {
            alpha,
            rows_per_client,
        } => label_skew(data, cfg.n_clients, *alpha, *rows_per_client, seed),
        PointKind::Vertical { p, .. } => vertical_split(data, cfg.n_clients, *p, seed),
        PointKind::Natural { column } => natural_split(data, column),
    }
}

fn run_cell(
    cfg: &ExperimentConfig,
    data: &Dataset,
    params: &ForestParams,
    point: &ParamPoint,
    pi: usize,
    ps: u64,
) -> ExperimentOutput {
    let mut out = ExperimentOutput::default();
    let master = cfg.master_seed;
    let pi64 = pi as u64;
    let cell_name = format!("{} seed {ps}", point.label);

    let federation = match build_federation(
        data,
        cfg,
        point,
        derive_seed(master, "partition", &[pi64, ps]),
    ) {
        Ok(f) => f,
        Err(e) => {
            out.skipped.push(format!("cell {cell_name}: {e}"));
            return out;
        }
    };
    let regime = federation.descriptor.regime.clone();

    // publish phase: every client trains its public model on all private
    // rows and shares it with defaults
    let mut registry = Registry::new();
    let mut states: Vec<ClientState> = Vec::with_capacity(federation.clients.len());
    for client in &federation.clients {
        let cid = client.client_id;
        let result = (|| -> Result<ClientState> {
            let y = client.data.y()?;
            let x = encode(&client.data, client.data.schema())?;
            let public = crate::forest::fit_forest(
                &x,
                &y,
                params,
                derive_seed(master, "public", &[pi64, ps, cid as u64]),
            )?;
            let defaults = make_defaults(
                &client.data,
                point.kind.epsilon(),
                derive_seed(master, "defaults", &[pi64, ps, cid as u64]),
            )?;
            registry.publish(PublishedModel {
                owner: cid,
                model: public.clone(),
                schema: client.data.schema().clone(),
                defaults: defaults.clone(),
            })?;
            Ok(ClientState::new(
                cid,
                client.data.clone(),
                SplitTriple {
                    train: Vec::new(),
                    meta_train: Vec::new(),
                    test: Vec::new(),
                },
                public,
                defaults,
                StackingMode::HeldOut,
            ))
        })();
        match result {
            Ok(state) => states.push(state),
            Err(e) => {
                out.skipped
                    .push(format!("cell {cell_name}: client {cid} publish failed: {e}"));
                return out;
            }
        }
    }
    registry.freeze();

    // pairwise feature-set similarity, reused for graph rows and the
    // per-client mean in vertical runs
    let n = federation.clients.len();
    let mut jac = vec![vec![1.0f64; n]; n];
    for (i, row) in jac.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = jaccard(
                &federation.clients[i].raw_feature_set,
                &federation.clients[j].raw_feature_set,
            )
            .unwrap_or(0.0);
        }
    }
    let jaccard_mean: Vec<Option<f64>> = (0..n)
        .map(|i| {
            if regime == "vertical" && n > 1 {
                let total: f64 = (0..n).filter(|&j| j != i).map(|j| jac[i][j]).sum();
                Some(total / (n - 1) as f64)
            } else {
                None
            }
        })
        .collect();

    let label_balance: Vec<f64> = states
        .iter()
        .map(|s| {
            let counts = s.data.class_counts();
            let total: usize = counts.iter().sum();
            counts.get(1).copied().unwrap_or(0) as f64 / total.max(1) as f64
        })
        .collect();

    for repeat in 0..cfg.split_repeats {
        // the split is shared by all modes of this repeat, so both
        // meta-models are evaluated on the same test rows
        let mut splits: Vec<Option<SplitTriple>> = Vec::with_capacity(n);
        for state in &states {
            let seed = derive_seed(master, "split", &[pi64, ps, state.client_id as u64, repeat]);
            match stratified_split(&state.data, DEFAULT_FRACTIONS, seed) {
                Ok(split) => splits.push(Some(split)),
                Err(e) => {
                    out.skipped.push(format!(
                        "cell {cell_name}: client {} repeat {repeat}: {e}",
                        state.client_id
                    ));
                    splits.push(None);
                }
            }
        }

        for &mode in &cfg.modes {
            let mut graph = ContributionGraph::new();
            let mut pending: Vec<ResultRow> = Vec::new();
            for (ci, state) in states.iter_mut().enumerate() {
                let Some(split) = &splits[ci] else { continue };
                state.split = split.clone();
                state.mode = mode;
                let cid = state.client_id;
                let fetched = registry.fetch_for(cid).expect("registry frozen");
                let seed = derive_seed(
                    master,
                    "fit",
                    &[pi64, ps, cid as u64, repeat, mode_tag(mode)],
                );
                let report = run_client(state, &fetched, params, seed)
                    .and_then(|()| evaluate_client(state, &fetched));
                match report {
                    Ok(report) => {
                        graph
                            .record_report(cid, &report)
                            .expect("one report per client per round");
                        pending.push(ResultRow {
                            regime: regime.clone(),
                            params: point.label.clone(),
                            partition_seed: ps,
                            repeat,
                            client_id: cid,
                            mode,
                            n_private_rows: state.data.n_rows(),
                            private_ba: report.private_ba,
                            meta_ba: report.meta_ba,
                            gain: report.gain,
                            self_importance: report.self_importance,
                            importance: 0.0,
                            label_balance: label_balance[ci],
                            jaccard_mean: jaccard_mean[ci],
                        });
                    }
                    Err(e) => out.skipped.push(format!(
                        "cell {cell_name}: client {cid} repeat {repeat} mode {mode}: {e}"
                    )),
                }
            }
            if graph.n_reports() == 0 {
                continue;
            }
            let importance = graph.compute_importance().expect("reports recorded");
            for mut row in pending {
                row.importance = importance.get(&row.client_id).copied().unwrap_or(0.0);
                out.rows.push(row);
            }
            for (from, to, weight) in graph.edge_list() {
                out.graphs.push(GraphRow {
                    regime: regime.clone(),
                    params: point.label.clone(),
                    partition_seed: ps,
                    repeat,
                    mode,
                    from,
                    to,
                    weight,
                    jaccard: jac[from as usize][to as usize],
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &std::path::Path, synth_rows: usize, extra: &str) -> ExperimentConfig {
        let data_path = dir.join("data.csv");
        write_synthetic_csv(&data_path, synth_rows, 5).unwrap();
        let json = format!(
            r#"{{
                "dataset_path": {:?},
                "target_name": "y",
                "output_dir": {:?},
                {extra}
            }}"#,
            data_path,
            dir.join("out")
        );
        ExperimentConfig::from_json(&json).unwrap()
    }

    fn tiny_config(dir: &std::path::Path) -> ExperimentConfig {
        write_config(
            dir,
            600,
            r#""regime": "quantity", "beta": [1.0], "n_clients": 3,
               "partition_seeds": 2, "split_repeats": 2,
               "forest": {"n_trees": 8}, "master_seed": 77"#,
        )
    }

    #[test]
    fn row_count_formula_holds() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let out = run_experiment(&cfg, Some(2)).unwrap();
        // |grid| x seeds x repeats x clients x modes, minus logged skips
        let expected = 2 * 2 * 3 * 2;
        assert_eq!(out.rows.len(), expected - out.skipped.len());
        for row in &out.rows {
            assert!((0.0..=1.0).contains(&row.importance));
            assert!((0.0..=1.0).contains(&row.self_importance));
            assert!((0.0..=1.0).contains(&row.private_ba));
            assert!((0.0..=1.0).contains(&row.meta_ba));
        }
        assert!(!out.graphs.is_empty());
    }

    #[test]
    fn reruns_are_identical_across_worker_counts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let a = run_experiment(&cfg, Some(1)).unwrap();
        let b = run_experiment(&cfg, Some(2)).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.graphs, b.graphs);
        // and the serialized artifacts are byte-identical
        let pa = dir.path().join("a.csv");
        let pb = dir.path().join("b.csv");
        write_results(&a.rows, &pa).unwrap();
        write_results(&b.rows, &pb).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
    }

    #[test]
    fn natural_regime_runs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            800,
            r#""regime": "natural", "column": "c0",
               "partition_seeds": 1, "split_repeats": 1,
               "forest": {"n_trees": 8}, "master_seed": 3"#,
        );
        let out = run_experiment(&cfg, Some(2)).unwrap();
        // c0 has 3 categories, all large enough
        let clients: std::collections::BTreeSet<u32> =
            out.rows.iter().map(|r| r.client_id).collect();
        assert_eq!(clients.len(), 3);
        assert!(out.rows.iter().all(|r| r.regime == "natural"));
        assert!(out.rows.iter().all(|r| r.jaccard_mean.is_none()));
    }

    #[test]
    fn vertical_regime_fills_jaccard() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_config(
            dir.path(),
            400,
            r#""regime": "vertical", "p": [0.5], "epsilon": [0, 1],
               "n_clients": 3, "partition_seeds": 1, "split_repeats": 1,
               "modes": ["held_out"],
               "forest": {"n_trees": 8}, "master_seed": 4"#,
        );
        let out = run_experiment(&cfg, Some(2)).unwrap();
        assert!(out.rows.iter().all(|r| r.jaccard_mean.is_some()));
        let params: std::collections::BTreeSet<String> =
            out.rows.iter().map(|r| r.params.clone()).collect();
        assert_eq!(params.len(), 2); // eps grid of 2
        assert!(out.graphs.iter().all(|g| (0.0..=1.0).contains(&g.jaccard)));
        // self-loops have jaccard 1
        assert!(out
            .graphs
            .iter()
            .filter(|g| g.from == g.to)
            .all(|g| g.jaccard == 1.0));
    }

    #[test]
    fn degenerate_cells_are_skipped_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        // 600 rows over 10 clients with skewed shares: some cells must
        // hit the 15-row floor and be skipped
        let cfg = write_config(
            dir.path(),
            600,
            r#""regime": "quantity", "beta": [0.2], "n_clients": 10,
               "partition_seeds": 6, "split_repeats": 1,
               "modes": ["held_out"],
               "forest": {"n_trees": 4}, "master_seed": 1"#,
        );
        match run_experiment(&cfg, Some(2)) {
            Ok(out) => assert!(!out.skipped.is_empty()),
            // all six seeds degenerate is also acceptable
            Err(Error::AllCellsFailed) => {}
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }

    #[test]
    fn cell_isolation_reproduces_rows() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let full = run_experiment(&cfg, Some(2)).unwrap();
        // a one-seed run cannot reproduce seed 1 (cells are keyed by the
        // seed value), but rerunning the same sweep with different worker
        // counts must agree cell by cell; additionally, single-cell rows
        // can be recomputed by filtering a fresh full run
        let again = run_experiment(&cfg, Some(1)).unwrap();
        let pick = |rows: &[ResultRow]| -> Vec<ResultRow> {
            rows.iter()
                .filter(|r| r.partition_seed == 1)
                .cloned()
                .collect()
        };
        assert_eq!(pick(&full.rows), pick(&again.rows));
        assert!(!pick(&full.rows).is_empty());
    }
}
