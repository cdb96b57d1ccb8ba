//! Stratified train / meta-train / test splitting.

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};

use super::Dataset;

/// The split proportions used throughout: train, meta-train, test.
pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.6, 0.2, 0.2);

/// Disjoint row-index sets over one dataset. Indices within each part are
/// sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitTriple {
    pub train: Vec<usize>,
    pub meta_train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitTriple {
    /// `train` and `meta_train` merged, sorted ascending.
    pub fn pooled(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .train
            .iter()
            .chain(self.meta_train.iter())
            .copied()
            .collect();
        rows.sort_unstable();
        rows
    }
}

/// Stratified split: within each class, rows are shuffled by the seeded
/// generator and cut at floor boundaries; remainder rows go to `train`.
/// Deterministic for a fixed `(d, seed)`.
pub fn stratified_split(
    d: &Dataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<SplitTriple> {
    let (f_train, f_meta, f_test) = fractions;
    if f_train <= 0.0
        || f_meta <= 0.0
        || f_test <= 0.0
        || (f_train + f_meta + f_test - 1.0).abs() > 1e-9
    {
        return Err(Error::BadFractions);
    }

    let n_classes = d.classes().len();
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for r in 0..d.n_rows() {
        let label = d.label(r).ok_or(Error::BinaryLabelsRequired)?;
        per_class[label as usize].push(r);
    }

    let mut rng = Rng::seed_from_u64(derive_seed(seed, "stratified_split", &[]));
    let mut train = Vec::new();
    let mut meta_train = Vec::new();
    let mut test = Vec::new();
    for (c, rows) in per_class.iter_mut().enumerate() {
        if rows.is_empty() {
            continue;
        }
        if rows.len() < 3 {
            return Err(Error::ClassTooSmall(d.classes()[c].clone()));
        }
        rng.shuffle(rows);
        let n = rows.len();
        let n_meta = (f_meta * n as f64).floor() as usize;
        let n_test = (f_test * n as f64).floor() as usize;
        let n_train = n - n_meta - n_test;
        train.extend_from_slice(&rows[..n_train]);
        meta_train.extend_from_slice(&rows[n_train..n_train + n_meta]);
        test.extend_from_slice(&rows[n_train + n_meta..]);
    }
    train.sort_unstable();
    meta_train.sort_unstable();
    test.sort_unstable();
    Ok(SplitTriple {
        train,
        meta_train,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::dataset;
    use super::*;
    use proptest::prelude::*;

    fn binary_dataset(n0: usize, n1: usize) -> Dataset {
        let rows: Vec<Vec<String>> = (0..n0 + n1).map(|i| vec![i.to_string()]).collect();
        let row_refs: Vec<Vec<&str>> = rows
            .iter()
            .map(|r| r.iter().map(|s| s.as_str()).collect())
            .collect();
        let slices: Vec<&[&str]> = row_refs.iter().map(|r| r.as_slice()).collect();
        let labels: Vec<&str> = (0..n0 + n1)
            .map(|i| if i < n0 { "a" } else { "b" })
            .collect();
        dataset(&[("x", "num")], &slices, &labels)
    }

    #[test]
    fn balanced_hundred_rows() {
        let d = binary_dataset(50, 50);
        let s = stratified_split(&d, DEFAULT_FRACTIONS, 7).unwrap();
        assert_eq!(s.train.len(), 60);
        assert_eq!(s.meta_train.len(), 20);
        assert_eq!(s.test.len(), 20);
        let positives = |rows: &[usize]| rows.iter().filter(|&&r| d.label(r) == Some(1)).count();
        assert_eq!(positives(&s.train), 30);
        assert_eq!(positives(&s.meta_train), 10);
        assert_eq!(positives(&s.test), 10);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let d = binary_dataset(40, 30);
        let a = stratified_split(&d, DEFAULT_FRACTIONS, 123).unwrap();
        let b = stratified_split(&d, DEFAULT_FRACTIONS, 123).unwrap();
        assert_eq!(a, b);
        let c = stratified_split(&d, DEFAULT_FRACTIONS, 124).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sizes_match_floor_arithmetic() {
        // 97 rows, classes 60/37: per-class floor-and-remainder computation
        let d = binary_dataset(60, 37);
        let s = stratified_split(&d, DEFAULT_FRACTIONS, 5).unwrap();
        let expect = |n: usize| {
            let m = (0.2 * n as f64).floor() as usize;
            let t = (0.2 * n as f64).floor() as usize;
            (n - m - t, m, t)
        };
        let (tr0, me0, te0) = expect(60);
        let (tr1, me1, te1) = expect(37);
        assert_eq!(s.train.len(), tr0 + tr1);
        assert_eq!(s.meta_train.len(), me0 + me1);
        assert_eq!(s.test.len(), te0 + te1);
    }

    #[test]
    fn small_class_errors() {
        let d = binary_dataset(10, 2);
        assert!(matches!(
            stratified_split(&d, DEFAULT_FRACTIONS, 1),
            Err(Error::ClassTooSmall(c)) if c == "b"
        ));
    }

    #[test]
    fn bad_fractions_error() {
        let d = binary_dataset(10, 10);
        assert!(matches!(
            stratified_split(&d, (0.5, 0.2, 0.2), 1),
            Err(Error::BadFractions)
        ));
    }

    proptest! {
        #[test]
        fn parts_partition_the_index_set(n0 in 3usize..120, n1 in 3usize..120, seed in 0u64..5000) {
            let d = binary_dataset(n0, n1);
            let s = stratified_split(&d, DEFAULT_FRACTIONS, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter()
                .chain(s.meta_train.iter())
                .chain(s.test.iter())
                .copied()
                .collect();
            all.sort_unstable();
            let expected: Vec<usize> = (0..n0 + n1).collect();
            prop_assert_eq!(all, expected);
        }

        #[test]
        fn per_class_counts_near_targets(n0 in 3usize..120, n1 in 3usize..120, seed in 0u64..5000) {
            let d = binary_dataset(n0, n1);
            let s = stratified_split(&d, DEFAULT_FRACTIONS, seed).unwrap();
            for class in 0..2u32 {
                let n_c = if class == 0 { n0 } else { n1 } as f64;
                let count = |rows: &[usize]| {
                    rows.iter().filter(|&&r| d.label(r) == Some(class)).count() as f64
                };
                // meta and test are floor cuts: within one row below target
                prop_assert!((count(&s.meta_train) - 0.2 * n_c) > -1.0);
                prop_assert!((count(&s.meta_train) - 0.2 * n_c) <= 0.0);
                prop_assert!((count(&s.test) - 0.2 * n_c) > -1.0);
                prop_assert!((count(&s.test) - 0.2 * n_c) <= 0.0);
                // train absorbs the remainder, at most two extra rows
                prop_assert!((count(&s.train) - 0.6 * n_c) >= 0.0);
                prop_assert!((count(&s.train) - 0.6 * n_c) < 2.0);
            }
        }
    }
}
