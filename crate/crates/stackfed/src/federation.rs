//! In-process aggregator: model registry with a publish/fetch phase
//! barrier, contribution-graph accumulation, and importance aggregation.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::stacking::{ClientReport, PublishedModel};

/// Model database. All publishes happen before the registry is frozen;
/// fetches are only allowed afterwards, so a round has no read-write races
/// by construction. `&mut self` inserts are linearizable by Rust's
/// exclusivity rules.
#[derive(Debug, Default)]
pub struct Registry {
    entries: BTreeMap<u32, PublishedModel>,
    frozen: bool,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    pub fn publish(&mut self, pm: PublishedModel) -> Result<()> {
        if self.frozen {
            return Err(Error::RegistryFrozen);
        }
        if self.entries.contains_key(&pm.owner) {
            return Err(Error::DuplicatePublish(pm.owner));
        }
        self.entries.insert(pm.owner, pm);
        Ok(())
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every published model except the requester's own, sorted by owner.
    pub fn fetch_for(&self, requester: u32) -> Result<Vec<&PublishedModel>> {
        if !self.frozen {
            return Err(Error::RegistryNotFrozen);
        }
        Ok(self
            .entries
            .values()
            .filter(|pm| pm.owner != requester)
            .collect())
    }
}

/// Weighted directed graph of reported contribution scores. Self-loops
/// store self-importance; each reporter's outgoing weights (self-loop
/// included) sum to 1, or are all zero for a degenerate report.
#[derive(Debug, Clone, Default)]
pub struct ContributionGraph {
    edges: BTreeMap<(u32, u32), f64>,
    reporters: BTreeSet<u32>,
}

impl ContributionGraph {
    pub fn new() -> Self {
        ContributionGraph::default()
    }

    pub fn record_report(&mut self, from: u32, report: &ClientReport) -> Result<()> {
        if !self.reporters.insert(from) {
            return Err(Error::DuplicateReport(from));
        }
        self.edges.insert((from, from), report.self_importance);
        for (&to, &weight) in &report.contributions {
            self.edges.insert((from, to), weight);
        }
        Ok(())
    }

    pub fn n_reports(&self) -> usize {
        self.reporters.len()
    }

    /// Edges as `(from, to, weight)`, sorted, self-loops included.
    pub fn edge_list(&self) -> Vec<(u32, u32, f64)> {
        self.edges.iter().map(|(&(f, t), &w)| (f, t, w)).collect()
    }

    /// Per-client importance: incoming weight excluding self-loops,
    /// normalized to sum 1 across clients (all zero when nothing was
    /// received).
    pub fn compute_importance(&self) -> Result<BTreeMap<u32, f64>> {
        if self.reporters.is_empty() {
            return Err(Error::NoReports);
        }
        let mut nodes: BTreeSet<u32> = BTreeSet::new();
        for &(from, to) in self.edges.keys() {
            nodes.insert(from);
            nodes.insert(to);
        }
        let mut raw: BTreeMap<u32, f64> = nodes.iter().map(|&n| (n, 0.0)).collect();
        for (&(from, to), &weight) in &self.edges {
            if from != to {
                *raw.get_mut(&to).unwrap() += weight;
            }
        }
        let total: f64 = raw.values().sum();
        if total > 0.0 {
            for v in raw.values_mut() {
                *v /= total;
            }
        }
        Ok(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{fit_forest, ForestParams};
    use crate::partition::DefaultValues;
    use crate::tabular::{encode, testutil::dataset};

    fn published(owner: u32) -> PublishedModel {
        let d = dataset(
            &[("x", "num")],
            &[&["0"], &["1"], &["2"], &["3"]],
            &["a", "b", "a", "b"],
        );
        let x = encode(&d, d.schema()).unwrap();
        let model = fit_forest(
            &x,
            &d.y().unwrap(),
            &ForestParams {
                n_trees: 2,
                ..ForestParams::default()
            },
            owner as u64,
        )
        .unwrap();
        PublishedModel {
            owner,
            model,
            schema: d.schema().clone(),
            defaults: DefaultValues::default(),
        }
    }

    fn report(self_importance: f64, contributions: &[(u32, f64)]) -> ClientReport {
        ClientReport {
            gain: 0.0,
            private_ba: 0.5,
            meta_ba: 0.5,
            self_importance,
            contributions: contributions.iter().copied().collect(),
            degenerate: self_importance == 0.0 && contributions.iter().all(|(_, w)| *w == 0.0),
        }
    }

    #[test]
    fn publish_fetch_phase_rules() {
        let mut r = Registry::new();
        r.publish(published(0)).unwrap();
        assert_eq!(r.len(), 1);
        // duplicate owner
        assert!(matches!(
            r.publish(published(0)),
            Err(Error::DuplicatePublish(0))
        ));
        // fetch before freeze
        assert!(matches!(r.fetch_for(0), Err(Error::RegistryNotFrozen)));
        r.freeze();
        // publish after freeze
        assert!(matches!(r.publish(published(1)), Err(Error::RegistryFrozen)));
    }

    #[test]
    fn fetch_excludes_own_and_sorts() {
        let mut r = Registry::new();
        for id in [5u32, 1, 3, 2, 4] {
            r.publish(published(id)).unwrap();
        }
        r.freeze();
        let fetched = r.fetch_for(3).unwrap();
        let owners: Vec<u32> = fetched.iter().map(|pm| pm.owner).collect();
        assert_eq!(owners, vec![1, 2, 4, 5]);
        // single entry, requester is that owner -> empty
        let mut solo = Registry::new();
        solo.publish(published(7)).unwrap();
        solo.freeze();
        assert!(solo.fetch_for(7).unwrap().is_empty());
    }

    #[test]
    fn record_report_builds_edges() {
        let mut g = ContributionGraph::new();
        g.record_report(0, &report(0.4, &[(1, 0.35), (2, 0.25)]))
            .unwrap();
        assert_eq!(g.edge_list().len(), 3);
        assert!(matches!(
            g.record_report(0, &report(1.0, &[])),
            Err(Error::DuplicateReport(0))
        ));
        g.record_report(1, &report(0.5, &[(0, 0.3), (2, 0.2)]))
            .unwrap();
        assert_eq!(g.edge_list().len(), 6);
    }

    #[test]
    fn symmetric_reports_give_equal_importance() {
        let mut g = ContributionGraph::new();
        g.record_report(0, &report(0.5, &[(1, 0.25), (2, 0.25)]))
            .unwrap();
        g.record_report(1, &report(0.5, &[(0, 0.25), (2, 0.25)]))
            .unwrap();
        g.record_report(2, &report(0.5, &[(0, 0.25), (1, 0.25)]))
            .unwrap();
        let imp = g.compute_importance().unwrap();
        for (_, v) in imp {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_receiver_takes_all() {
        let mut g = ContributionGraph::new();
        g.record_report(1, &report(0.6, &[(0, 0.4)])).unwrap();
        g.record_report(2, &report(0.7, &[(0, 0.3)])).unwrap();
        let imp = g.compute_importance().unwrap();
        assert!((imp[&0] - 1.0).abs() < 1e-12);
        assert_eq!(imp[&1], 0.0);
        assert_eq!(imp[&2], 0.0);
    }

    #[test]
    fn degenerate_reports_give_all_zero() {
        let mut g = ContributionGraph::new();
        g.record_report(0, &report(0.0, &[(1, 0.0)])).unwrap();
        g.record_report(1, &report(0.0, &[(0, 0.0)])).unwrap();
        let imp = g.compute_importance().unwrap();
        assert!(imp.values().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_graph_errors() {
        let g = ContributionGraph::new();
        assert!(matches!(g.compute_importance(), Err(Error::NoReports)));
    }

    /// Adjacency-sum oracle: independent in-degree summation over the raw
    /// edge list.
    fn importance_oracle(edges: &[(u32, u32, f64)]) -> BTreeMap<u32, f64> {
        let mut nodes = BTreeSet::new();
        for &(f, t, _) in edges {
            nodes.insert(f);
            nodes.insert(t);
        }
        let mut raw: BTreeMap<u32, f64> = nodes.into_iter().map(|n| (n, 0.0)).collect();
        for &(f, t, w) in edges {
            if f != t {
                *raw.get_mut(&t).unwrap() += w;
            }
        }
        let total: f64 = raw.values().sum();
        if total > 0.0 {
            for v in raw.values_mut() {
                *v /= total;
            }
        }
        raw
    }

    #[test]
    fn importance_matches_adjacency_oracle_on_random_graphs() {
        let mut rng = crate::rng::Rng::seed_from_u64(31);
        for _ in 0..20 {
            let n = 3 + rng.below(5) as u32;
            let mut g = ContributionGraph::new();
            for from in 0..n {
                // random normalized report
                let mut weights: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
                let total: f64 = weights.iter().sum();
                for w in &mut weights {
                    *w /= total;
                }
                let contributions: Vec<(u32, f64)> = (0..n)
                    .filter(|&to| to != from)
                    .map(|to| (to, weights[to as usize]))
                    .collect();
                g.record_report(from, &report(weights[from as usize], &contributions))
                    .unwrap();
            }
            let got = g.compute_importance().unwrap();
            let want = importance_oracle(&g.edge_list());
            assert_eq!(got.len(), want.len());
            for (k, v) in &got {
                assert!((v - want[k]).abs() < 1e-12);
            }
            let sum: f64 = got.values().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn importance_is_order_and_scale_invariant() {
        let reports = [
            (0u32, report(0.2, &[(1, 0.5), (2, 0.3)])),
            (1u32, report(0.9, &[(0, 0.05), (2, 0.05)])),
            (2u32, report(0.4, &[(0, 0.35), (1, 0.25)])),
        ];
        let mut forward = ContributionGraph::new();
        for (from, r) in &reports {
            forward.record_report(*from, r).unwrap();
        }
        let mut backward = ContributionGraph::new();
        for (from, r) in reports.iter().rev() {
            backward.record_report(*from, r).unwrap();
        }
        let a = forward.compute_importance().unwrap();
        assert_eq!(a, backward.compute_importance().unwrap());

        // scaling every weight by a common positive constant changes nothing
        let mut scaled = ContributionGraph::new();
        for (from, r) in &reports {
            let s = ClientReport {
                self_importance: r.self_importance * 7.5,
                contributions: r.contributions.iter().map(|(&k, &v)| (k, v * 7.5)).collect(),
                ..r.clone()
            };
            scaled.record_report(*from, &s).unwrap();
        }
        let b = scaled.compute_importance().unwrap();
        for (k, v) in &a {
            assert!((v - b[k]).abs() < 1e-12);
        }
    }
}
