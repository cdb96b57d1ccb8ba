//! Evaluation primitives: balanced accuracy, Jaccard similarity, Spearman
//! rank correlation.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Confusion counts for a binary task (class 1 is "positive").
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_labels(y_true: &[u8], y_pred: &[u8]) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
        }
        if y_true.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut c = ConfusionCounts::default();
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t, p) {
                (1, 1) => c.tp += 1,
                (0, 1) => c.fp += 1,
                (0, 0) => c.tn += 1,
                (1, 0) => c.fn_ += 1,
                _ => return Err(Error::BinaryLabelsRequired),
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Mean of the per-class recalls. Errors when `y_true` holds a single class,
/// since one recall would be 0/0.
pub fn balanced_accuracy(y_true: &[u8], y_pred: &[u8]) -> Result<f64> {
    let c = ConfusionCounts::from_labels(y_true, y_pred)?;
    let pos = c.tp + c.fn_;
    let neg = c.tn + c.fp;
    if pos == 0 || neg == 0 {
        return Err(Error::BalancedAccuracyUndefined);
    }
    Ok((c.tp as f64 / pos as f64 + c.tn as f64 / neg as f64) / 2.0)
}

/// Jaccard similarity of two sets of feature names.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> Result<f64> {
    if a.is_empty() && b.is_empty() {
        return Err(Error::JaccardUndefined);
    }
    let inter = a.intersection(b).count();
    let union = a.union(b).count();
    Ok(inter as f64 / union as f64)
}

/// Average-ties ranks: value vector to rank vector (ranks start at 1).
fn ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // tied block [i, j] gets the average of ranks i+1 ..= j+1
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(Error::TooFewObservations(x.len()));
    }
    pearson(&ranks(x), &ranks(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    // independent oracle: balanced accuracy straight from definition,
    // counting per-class hits
    fn ba_oracle(y_true: &[u8], y_pred: &[u8]) -> Option<f64> {
        let mut hits = [0usize; 2];
        let mut totals = [0usize; 2];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            totals[t as usize] += 1;
            if t == p {
                hits[t as usize] += 1;
            }
        }
        if totals[0] == 0 || totals[1] == 0 {
            return None;
        }
        Some((hits[0] as f64 / totals[0] as f64 + hits[1] as f64 / totals[1] as f64) / 2.0)
    }

    #[test]
    fn perfect_predictor_scores_one() {
        let y = vec![0, 1, 1, 0, 1];
        assert_eq!(balanced_accuracy(&y, &y).unwrap(), 1.0);
    }

    #[test]
    fn constant_predictor_scores_half() {
        let y_true = vec![0, 0, 1, 1, 1];
        assert_eq!(balanced_accuracy(&y_true, &[0; 5]).unwrap(), 0.5);
        assert_eq!(balanced_accuracy(&y_true, &[1; 5]).unwrap(), 0.5);
    }

    #[test]
    fn worked_example() {
        // tp=1 fn=1 tn=2 fp=0 -> (0.5 + 1.0)/2
        let got = balanced_accuracy(&[1, 1, 0, 0], &[1, 0, 0, 0]).unwrap();
        assert!((got - 0.75).abs() < 1e-15);
    }

    #[test]
    fn single_class_truth_errors() {
        assert!(matches!(
            balanced_accuracy(&[1, 1, 1], &[0, 1, 1]),
            Err(Error::BalancedAccuracyUndefined)
        ));
    }

    #[test]
    fn matches_confusion_oracle_exhaustively() {
        // every (y_true, y_pred) pair up to length 8
        for n in 1..=8usize {
            for t in 0..(1u32 << n) {
                for p in 0..(1u32 << n) {
                    let y_true: Vec<u8> = (0..n).map(|i| ((t >> i) & 1) as u8).collect();
                    let y_pred: Vec<u8> = (0..n).map(|i| ((p >> i) & 1) as u8).collect();
                    match ba_oracle(&y_true, &y_pred) {
                        Some(want) => {
                            let got = balanced_accuracy(&y_true, &y_pred).unwrap();
                            assert!((got - want).abs() < 1e-15);
                        }
                        None => assert!(balanced_accuracy(&y_true, &y_pred).is_err()),
                    }
                }
            }
        }
    }

    #[test]
    fn label_swap_invariance() {
        let y_true = vec![0, 1, 0, 1, 1, 0];
        let y_pred = vec![0, 0, 1, 1, 1, 0];
        let flip = |v: &[u8]| v.iter().map(|&x| 1 - x).collect::<Vec<_>>();
        let a = balanced_accuracy(&y_true, &y_pred).unwrap();
        let b = balanced_accuracy(&flip(&y_true), &flip(&y_pred)).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn jaccard_basics() {
        let a = set(&["1", "2", "3"]);
        let b = set(&["3", "4", "5"]);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        assert_eq!(jaccard(&a, &set(&["7", "8"])).unwrap(), 0.0);
        assert!((jaccard(&a, &b).unwrap() - 0.2).abs() < 1e-15);
        assert!((jaccard(&a, &b).unwrap() - jaccard(&b, &a).unwrap()).abs() < 1e-15);
        assert!(jaccard(&set(&[]), &set(&[])).is_err());
    }

    #[test]
    fn spearman_monotone() {
        let x = vec![1.0, 2.0, 5.0, 9.0];
        let up = vec![0.1, 0.4, 0.5, 3.0];
        let down: Vec<f64> = up.iter().map(|v| -v).collect();
        assert!((spearman(&x, &up).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &down).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_worked_example() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let y = vec![2.0, 1.0, 4.0, 3.0];
        assert!((spearman(&x, &y).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn spearman_monotone_transform_invariance() {
        let x = vec![0.3, 1.2, 0.9, 4.0, 2.2];
        let y = vec![5.0, 1.0, 2.5, 0.1, 0.7];
        let a = spearman(&x, &y).unwrap();
        let xe: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let y3: Vec<f64> = y.iter().map(|v| v.powi(3)).collect();
        assert!((spearman(&xe, &y3).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn spearman_constant_input_errors() {
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation)
        ));
        assert!(matches!(
            spearman(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::TooFewObservations(2))
        ));
    }

    #[test]
    fn average_ties_ranks() {
        assert_eq!(ranks(&[10.0, 20.0, 20.0, 30.0]), vec![1.0, 2.5, 2.5, 4.0]);
    }
}
