//! Plot-ready aggregation of result rows: one CSV per panel with group-by
//! keys, means, and standard errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

use super::results::{format_g6, GraphRow, ResultRow};

/// Aggregation panels, each mirroring one family of figures: gain curves
/// per parameter, per-client views against data share or label balance,
/// pairwise importance against feature overlap, self-importance curves,
/// and natural-partition summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Panel {
    GainVsParam,
    VsShare,
    VsLabelBalance,
    ImportanceVsJaccard,
    SelfImportanceVsParam,
    NaturalSummary,
}

pub const PANEL_NAMES: &[&str] = &[
    "gain_vs_param",
    "vs_share",
    "vs_label_balance",
    "importance_vs_jaccard",
    "self_importance_vs_param",
    "natural_summary",
];

impl Panel {
    pub fn name(&self) -> &'static str {
        match self {
            Panel::GainVsParam => "gain_vs_param",
            Panel::VsShare => "vs_share",
            Panel::VsLabelBalance => "vs_label_balance",
            Panel::ImportanceVsJaccard => "importance_vs_jaccard",
            Panel::SelfImportanceVsParam => "self_importance_vs_param",
            Panel::NaturalSummary => "natural_summary",
        }
    }
}

impl FromStr for Panel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gain_vs_param" => Ok(Panel::GainVsParam),
            "vs_share" => Ok(Panel::VsShare),
            "vs_label_balance" => Ok(Panel::VsLabelBalance),
            "importance_vs_jaccard" => Ok(Panel::ImportanceVsJaccard),
            "self_importance_vs_param" => Ok(Panel::SelfImportanceVsParam),
            "natural_summary" => Ok(Panel::NaturalSummary),
            other => Err(Error::UnknownPanel {
                name: other.to_string(),
                valid: PANEL_NAMES.join(", "),
            }),
        }
    }
}

/// Sample mean and standard error (sd / sqrt(n), n-1 denominator).
fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn write_csv(path: &Path, header: &[&str], records: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
    w.write_record(header).map_err(|e| Error::Csv(e.to_string()))?;
    for record in records {
        w.write_record(&record).map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregate rows (and, for the pairwise panel, graph edges) into the
/// requested panel CSV under `out_dir`. Returns the written path.
pub fn emit_plot_data(
    rows: &[ResultRow],
    graphs: &[GraphRow],
    panel: Panel,
    out_dir: impl AsRef<Path>,
) -> Result<PathBuf> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{}.csv", panel.name()));
    let g6 = format_g6;

    match panel {
        Panel::GainVsParam => {
            let mut groups: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
            for r in rows {
                groups
                    .entry((r.regime.clone(), r.params.clone(), r.mode.to_string()))
                    .or_default()
                    .push(r.gain);
            }
            warn_if_empty(&groups, panel);
            let records = groups
                .into_iter()
                .map(|((regime, params, mode), gains)| {
                    let (mean, se) = mean_se(&gains);
                    vec![regime, params, mode, gains.len().to_string(), g6(mean), g6(se)]
                })
                .collect();
            write_csv(
                &path,
                &["regime", "params", "mode", "n", "mean_gain", "se_gain"],
                records,
            )?;
        }
        Panel::VsShare => {
            let quantity: Vec<&ResultRow> =
                rows.iter().filter(|r| r.regime == "quantity").collect();
            // total private rows per (params, seed), counting each client once
            let mut totals: BTreeMap<(String, u64), BTreeMap<u32, usize>> = BTreeMap::new();
            for r in &quantity {
                totals
                    .entry((r.params.clone(), r.partition_seed))
                    .or_default()
                    .insert(r.client_id, r.n_private_rows);
            }
            type Key = (String, u64, u32, String);
            type Acc = (usize, Vec<f64>, Vec<f64>, Vec<f64>);
            let mut groups: BTreeMap<Key, Acc> = BTreeMap::new();
            for r in &quantity {
                let e = groups
                    .entry((
                        r.params.clone(),
                        r.partition_seed,
                        r.client_id,
                        r.mode.to_string(),
                    ))
                    .or_insert_with(|| (r.n_private_rows, Vec::new(), Vec::new(), Vec::new()));
                e.1.push(r.gain);
                e.2.push(r.importance);
                e.3.push(r.self_importance);
            }
            warn_if_empty(&groups, panel);
            let mut records = Vec::new();
            for ((params, seed, client, mode), (n_rows, gains, imps, selfs)) in groups {
                let total: usize = totals[&(params.clone(), seed)].values().sum();
                let share = n_rows as f64 / total as f64;
                let (mg, sg) = mean_se(&gains);
                let (mi, si) = mean_se(&imps);
                let (ms, ss) = mean_se(&selfs);
                records.push(vec![
                    params,
                    seed.to_string(),
                    client.to_string(),
                    mode,
                    g6(share),
                    gains.len().to_string(),
                    g6(mg),
                    g6(sg),
                    g6(mi),
                    g6(si),
                    g6(ms),
                    g6(ss),
                ]);
            }
            write_csv(
                &path,
                &[
                    "params",
                    "partition_seed",
                    "client_id",
                    "mode",
                    "share",
                    "n",
                    "mean_gain",
                    "se_gain",
                    "mean_importance",
                    "se_importance",
                    "mean_self_importance",
                    "se_self_importance",
                ],
                records,
            )?;
        }
        Panel::VsLabelBalance => {
            type Key = (String, u64, u32, String);
            let mut groups: BTreeMap<Key, (f64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
            for r in rows.iter().filter(|r| r.regime == "label") {
                let e = groups
                    .entry((
                        r.params.clone(),
                        r.partition_seed,
                        r.client_id,
                        r.mode.to_string(),
                    ))
                    .or_insert_with(|| (r.label_balance, Vec::new(), Vec::new()));
                e.1.push(r.gain);
                e.2.push(r.importance);
            }
            warn_if_empty(&groups, panel);
            let mut records = Vec::new();
            for ((params, seed, client, mode), (balance, gains, imps)) in groups {
                let (mg, sg) = mean_se(&gains);
                let (mi, si) = mean_se(&imps);
                records.push(vec![
                    params,
                    seed.to_string(),
                    client.to_string(),
                    mode,
                    g6(balance),
                    gains.len().to_string(),
                    g6(mg),
                    g6(sg),
                    g6(mi),
                    g6(si),
                ]);
            }
            write_csv(
                &path,
                &[
                    "params",
                    "partition_seed",
                    "client_id",
                    "mode",
                    "label_balance",
                    "n",
                    "mean_gain",
                    "se_gain",
                    "mean_importance",
                    "se_importance",
                ],
                records,
            )?;
        }
        Panel::ImportanceVsJaccard => {
            type Key = (String, u64, String, u32, u32);
            let mut groups: BTreeMap<Key, (f64, Vec<f64>)> = BTreeMap::new();
            for g in graphs.iter().filter(|g| g.from != g.to) {
                let e = groups
                    .entry((
                        g.params.clone(),
                        g.partition_seed,
                        g.mode.to_string(),
                        g.from,
                        g.to,
                    ))
                    .or_insert_with(|| (g.jaccard, Vec::new()));
                e.1.push(g.weight);
            }
            warn_if_empty(&groups, panel);
            let mut records = Vec::new();
            for ((params, seed, mode, from, to), (jaccard, weights)) in groups {
                let (mw, sw) = mean_se(&weights);
                records.push(vec![
                    params,
                    seed.to_string(),
                    mode,
                    from.to_string(),
                    to.to_string(),
                    g6(jaccard),
                    weights.len().to_string(),
                    g6(mw),
                    g6(sw),
                ]);
            }
            write_csv(
                &path,
                &[
                    "params",
                    "partition_seed",
                    "mode",
                    "from",
                    "to",
                    "jaccard",
                    "n",
                    "mean_weight",
                    "se_weight",
                ],
                records,
            )?;
        }
        Panel::SelfImportanceVsParam => {
            let mut groups: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
            for r in rows {
                groups
                    .entry((r.regime.clone(), r.params.clone(), r.mode.to_string()))
                    .or_default()
                    .push(r.self_importance);
            }
            warn_if_empty(&groups, panel);
            let records = groups
                .into_iter()
                .map(|((regime, params, mode), vals)| {
                    let (mean, se) = mean_se(&vals);
                    vec![regime, params, mode, vals.len().to_string(), g6(mean), g6(se)]
                })
                .collect();
            write_csv(
                &path,
                &[
                    "regime",
                    "params",
                    "mode",
                    "n",
                    "mean_self_importance",
                    "se_self_importance",
                ],
                records,
            )?;
        }
        Panel::NaturalSummary => {
            type Key = (String, u32, String);
            let mut groups: BTreeMap<Key, (usize, Vec<f64>, Vec<f64>)> = BTreeMap::new();
            for r in rows.iter().filter(|r| r.regime == "natural") {
                let e = groups
                    .entry((r.params.clone(), r.client_id, r.mode.to_string()))
                    .or_insert_with(|| (r.n_private_rows, Vec::new(), Vec::new()));
                e.1.push(r.gain);
                e.2.push(r.self_importance);
            }
            warn_if_empty(&groups, panel);
            let mut records = Vec::new();
            for ((params, client, mode), (n_rows, gains, selfs)) in groups {
                let (mg, sg) = mean_se(&gains);
                let (ms, ss) = mean_se(&selfs);
                records.push(vec![
                    params,
                    client.to_string(),
                    mode,
                    n_rows.to_string(),
                    gains.len().to_string(),
                    g6(mg),
                    g6(sg),
                    g6(ms),
                    g6(ss),
                ]);
            }
            write_csv(
                &path,
                &[
                    "params",
                    "client_id",
                    "mode",
                    "n_private_rows",
                    "n",
                    "mean_gain",
                    "se_gain",
                    "mean_self_importance",
                    "se_self_importance",
                ],
                records,
            )?;
        }
    }
    Ok(path)
}

fn warn_if_empty<K, V>(groups: &BTreeMap<K, V>, panel: Panel) {
    if groups.is_empty() {
        log::warn!(
            "panel {}: no rows after filtering, emitting header only",
            panel.name()
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stacking::StackingMode;

    fn row(params: &str, seed: u64, repeat: u64, client: u32, gain: f64) -> ResultRow {
        ResultRow {
            regime: "quantity".into(),
            params: params.into(),
            partition_seed: seed,
            repeat,
            client_id: client,
            mode: StackingMode::HeldOut,
            n_private_rows: 100 * (client as usize + 1),
            private_ba: 0.7,
            meta_ba: 0.7 + gain,
            gain,
            self_importance: 0.5,
            importance: 0.1 * client as f64,
            label_balance: 0.45,
            jaccard_mean: None,
        }
    }

    #[test]
    fn panel_names_round_trip() {
        for name in PANEL_NAMES {
            let panel: Panel = name.parse().unwrap();
            assert_eq!(panel.name(), *name);
        }
        match "bogus".parse::<Panel>() {
            Err(Error::UnknownPanel { valid, .. }) => {
                assert!(valid.contains("gain_vs_param"));
            }
            other => panic!("expected unknown panel error, got {other:?}"),
        }
    }

    #[test]
    fn gain_vs_param_mean_matches_oracle() {
        let rows = vec![
            row("beta=0.2", 0, 0, 0, 0.10),
            row("beta=0.2", 0, 1, 0, 0.20),
            row("beta=0.2", 1, 0, 0, 0.30),
            row("beta=0.5", 0, 0, 0, 0.05),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = emit_plot_data(&rows, &[], Panel::GainVsParam, dir.path()).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        // independent group-by recomputation
        let mean_02 = (0.10 + 0.20 + 0.30) / 3.0;
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[0], "quantity");
        assert_eq!(fields[1], "beta=0.2");
        assert_eq!(fields[3], "3");
        assert_eq!(fields[4], format_g6(mean_02));
        let fields5: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(fields5[1], "beta=0.5");
        assert_eq!(fields5[4], format_g6(0.05));
    }

    #[test]
    fn vs_share_computes_shares_per_cell() {
        // two clients, 100 and 200 rows: shares 1/3 and 2/3
        let rows = vec![
            row("beta=0.2", 0, 0, 0, 0.1),
            row("beta=0.2", 0, 1, 0, 0.2),
            row("beta=0.2", 0, 0, 1, 0.0),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = emit_plot_data(&rows, &[], Panel::VsShare, dir.path()).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        let c0: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(c0[2], "0");
        assert_eq!(c0[4], format_g6(100.0 / 300.0));
        assert_eq!(c0[5], "2");
        let c1: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(c1[4], format_g6(200.0 / 300.0));
    }

    #[test]
    fn jaccard_panel_groups_pairs_and_skips_self_loops() {
        let edge = |from: u32, to: u32, weight: f64, repeat: u64| GraphRow {
            regime: "vertical".into(),
            params: "p=0.3;eps=0".into(),
            partition_seed: 0,
            repeat,
            mode: StackingMode::HeldOut,
            from,
            to,
            weight,
            jaccard: if from == to { 1.0 } else { 0.4 },
        };
        let graphs = vec![
            edge(0, 0, 0.6, 0),
            edge(0, 1, 0.4, 0),
            edge(0, 1, 0.2, 1),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = emit_plot_data(&[], &graphs, Panel::ImportanceVsJaccard, dir.path()).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2, "{text}");
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[3], "0");
        assert_eq!(fields[4], "1");
        assert_eq!(fields[5], "0.4");
        assert_eq!(fields[6], "2");
        assert_eq!(fields[7], format_g6(0.3));
    }

    #[test]
    fn empty_filter_emits_header_only() {
        let rows = vec![row("beta=0.2", 0, 0, 0, 0.1)]; // quantity rows only
        let dir = tempfile::tempdir().unwrap();
        let path = emit_plot_data(&rows, &[], Panel::NaturalSummary, dir.path()).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), 1);
    }

    #[test]
    fn mean_se_basics() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0]);
        assert!((m - 2.0).abs() < 1e-15);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let (m1, se1) = mean_se(&[5.0]);
        assert_eq!(m1, 5.0);
        assert_eq!(se1, 0.0);
    }
}
