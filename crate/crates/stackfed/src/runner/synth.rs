//! Built-in synthetic classification dataset for desk-scale runs.
//!
//! Two anisotropic Gaussian class-conditional clusters over 10 numeric
//! features plus 2 class-dependent categorical features; labels carry a
//! small flip noise so no learner can be perfect.

use std::path::Path;

use crate::error::Result;
use crate::rng::{derive_seed, Rng};

pub const NUMERIC_FEATURES: usize = 10;
const LABEL_NOISE: f64 = 0.08;
const POSITIVE_PRIOR: f64 = 0.45;

const CAT0: [&str; 3] = ["a", "b", "c"];
const CAT0_NEG: [f64; 3] = [0.5, 0.3, 0.2];
const CAT0_POS: [f64; 3] = [0.2, 0.3, 0.5];
const CAT1: [&str; 4] = ["u", "v", "w", "x"];
const CAT1_NEG: [f64; 4] = [0.4, 0.3, 0.2, 0.1];
const CAT1_POS: [f64; 4] = [0.15, 0.2, 0.3, 0.35];

struct ClassModel {
    mean: [f64; NUMERIC_FEATURES],
    // lower-triangular mixing, giving a full anisotropic covariance
    mix: [[f64; NUMERIC_FEATURES]; NUMERIC_FEATURES],
}

fn class_models(seed: u64) -> [ClassModel; 2] {
    let mut rng = Rng::seed_from_u64(derive_seed(seed, "synth_structure", &[]));
    let mut models = Vec::with_capacity(2);
    for class in 0..2 {
        let mut mean = [0.0; NUMERIC_FEATURES];
        if class == 1 {
            for m in mean.iter_mut() {
                // per-dimension offsets; some dimensions barely separate
                *m = 0.55 * (rng.uniform() * 1.6 - 0.3);
            }
        }
        let mut mix = [[0.0; NUMERIC_FEATURES]; NUMERIC_FEATURES];
        for (i, row) in mix.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate().take(i + 1) {
                *v = if i == j {
                    0.7 + 0.6 * rng.uniform()
                } else {
                    0.35 * (rng.uniform() * 2.0 - 1.0)
                };
            }
        }
        models.push(ClassModel { mean, mix });
    }
    models.try_into().ok().expect("two class models")
}

/// Generate the dataset as CSV text: header `f00..f09,c0,c1,y`, labels
/// `neg`/`pos`.
pub fn synthetic_csv(rows: usize, seed: u64) -> String {
    let models = class_models(seed);
    let mut rng = Rng::seed_from_u64(derive_seed(seed, "synth_rows", &[]));
    let mut out = String::with_capacity(rows * 96);
    for i in 0..NUMERIC_FEATURES {
        out.push_str(&format!("f{i:02},"));
    }
    out.push_str("c0,c1,y\n");
    for _ in 0..rows {
        let class = usize::from(rng.uniform() < POSITIVE_PRIOR);
        let model = &models[class];
        let z: Vec<f64> = (0..NUMERIC_FEATURES).map(|_| rng.normal()).collect();
        for i in 0..NUMERIC_FEATURES {
            let mut v = model.mean[i];
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                v += model.mix[i][j] * zj;
            }
            out.push_str(&format!("{v:.6},"));
        }
        let (p0, p1): (&[f64], &[f64]) = if class == 0 {
            (&CAT0_NEG, &CAT1_NEG)
        } else {
            (&CAT0_POS, &CAT1_POS)
        };
        out.push_str(CAT0[rng.pick_weighted(p0)]);
        out.push(',');
        out.push_str(CAT1[rng.pick_weighted(p1)]);
        out.push(',');
        let observed = if rng.uniform() < LABEL_NOISE {
            1 - class
        } else {
            class
        };
        out.push_str(if observed == 1 { "pos" } else { "neg" });
        out.push('\n');
    }
    out
}

/// Write the synthetic dataset to a CSV file.
pub fn write_synthetic_csv(path: impl AsRef<Path>, rows: usize, seed: u64) -> Result<()> {
    std::fs::write(path, synthetic_csv(rows, seed))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{load_csv, preprocess_binary, FeatureKind};

    #[test]
    fn generates_parseable_csv_with_expected_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synth.csv");
        write_synthetic_csv(&path, 500, 7).unwrap();
        let d = load_csv(&path, "y").unwrap();
        assert_eq!(d.n_rows(), 500);
        assert_eq!(d.n_features(), 12);
        let numeric = d
            .schema()
            .features()
            .iter()
            .filter(|f| f.kind == FeatureKind::Numeric)
            .count();
        assert_eq!(numeric, 10);
        let p = preprocess_binary(&d).unwrap();
        assert_eq!(p.n_rows(), 500);
        assert_eq!(p.classes(), &["neg".to_string(), "pos".to_string()]);
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(synthetic_csv(100, 3), synthetic_csv(100, 3));
        assert_ne!(synthetic_csv(100, 3), synthetic_csv(100, 4));
    }

    #[test]
    fn classes_are_imbalanced_toward_negative() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("synth.csv");
        write_synthetic_csv(&path, 4000, 11).unwrap();
        let d = load_csv(&path, "y").unwrap();
        let p = preprocess_binary(&d).unwrap();
        let counts = p.class_counts();
        // class 0 is "neg" (majority), noisy prior around 0.55/0.45
        assert!(counts[0] > counts[1]);
        let frac1 = counts[1] as f64 / (counts[0] + counts[1]) as f64;
        assert!((frac1 - 0.45).abs() < 0.05, "positive fraction {frac1}");
    }
}
