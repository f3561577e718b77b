use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ExperimentConfig, ExperimentError, Splits, TrainedModel};
use crate::dataset::{mix, Dataset, ManeuverRecord, Source};
use crate::features::Scheme;

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub fraction: f64,
    pub train_rows: usize,
    /// Mean over repeats of `(X, Y, θ)` test MAE.
    pub mae: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveTable {
    pub scheme: Scheme,
    pub source: Source,
    pub vehicle: String,
    pub repeats: usize,
    pub points: Vec<CurvePoint>,
}

/// Self-prediction MAE against training-set size. The test split is the
/// one [`super::run_matrix`] uses; each repeat draws its own subset of the
/// training split, keeping source order.
pub fn learning_curve(
    scheme: Scheme,
    dataset: &Dataset,
    fractions: &[f64],
    repeats: usize,
    cfg: &ExperimentConfig,
) -> Result<CurveTable, ExperimentError> {
    if repeats == 0 {
        return Err(ExperimentError::Repeats);
    }
    let splits = Splits::new(std::slice::from_ref(dataset), cfg)?;
    let vehicle = splits.vehicles[0].clone();
    let train = &splits.train[0].records;
    let test = &splits.test[0].records;
    let min = 2 * cfg.gbt.min_samples_leaf;
    let mut sizes = Vec::with_capacity(fractions.len());
    for &f in fractions {
        if !(f > 0.0 && f <= 1.0) {
            return Err(ExperimentError::Fraction(f));
        }
        let rows = (f * train.len() as f64).round() as usize;
        if rows < min {
            return Err(ExperimentError::TooFewRows { fraction: f, rows, min });
        }
        sizes.push(rows);
    }
    let base = cfg.split_seed(&vehicle);
    let jobs: Vec<(usize, usize)> = (0..fractions.len()).flat_map(|i| (0..repeats).map(move |r| (i, r))).collect();
    let results: Vec<[f64; 3]> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let subset = subsample(train, sizes[i], mix(mix(base, r as u64 + 1), fractions[i].to_bits()));
            TrainedModel::train(scheme, &subset, cfg)?.evaluate(test)
        })
        .collect::<Result<_, _>>()?;
    let points = fractions
        .iter()
        .enumerate()
        .map(|(i, &fraction)| {
            let mut s = [0.0; 3];
            for m in &results[i * repeats..(i + 1) * repeats] {
                for k in 0..3 {
                    s[k] += m[k];
                }
            }
            CurvePoint {
                fraction,
                train_rows: sizes[i],
                mae: s.map(|v| v / repeats as f64),
            }
        })
        .collect();
    Ok(CurveTable {
        scheme,
        source: splits.source,
        vehicle,
        repeats,
        points,
    })
}

fn subsample(train: &[ManeuverRecord], rows: usize, seed: u64) -> Vec<ManeuverRecord> {
    if rows >= train.len() {
        return train.to_vec();
    }
    let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), train.len(), rows).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| train[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::super::tests::{fleet, quick_cfg};
    use super::super::{run_matrix, ExperimentError};
    use super::*;

    #[test]
    fn full_fraction_matches_self_cell() {
        let f = fleet();
        let cfg = quick_cfg();
        let m = run_matrix(Scheme::Pi, &f, &cfg).unwrap();
        let c = learning_curve(Scheme::Pi, &f[1], &[1.0], 2, &cfg).unwrap();
        assert_eq!(c.points[0].mae, m.cell("long", "long").unwrap().mae);
    }

    #[test]
    fn shape_and_determinism() {
        let f = fleet();
        let cfg = quick_cfg();
        let a = learning_curve(Scheme::Baseline, &f[0], &[0.5, 1.0], 3, &cfg).unwrap();
        assert_eq!(a.points.len(), 2);
        assert!(a.points[0].train_rows < a.points[1].train_rows);
        assert_eq!(a, learning_curve(Scheme::Baseline, &f[0], &[0.5, 1.0], 3, &cfg).unwrap());
    }

    #[test]
    fn rejects_bad_arguments() {
        let f = fleet();
        let cfg = quick_cfg();
        assert!(matches!(
            learning_curve(Scheme::Pi, &f[0], &[0.0], 1, &cfg),
            Err(ExperimentError::Fraction(_))
        ));
        assert!(matches!(
            learning_curve(Scheme::Pi, &f[0], &[1.5], 1, &cfg),
            Err(ExperimentError::Fraction(_))
        ));
        assert!(matches!(
            learning_curve(Scheme::Pi, &f[0], &[0.01], 1, &cfg),
            Err(ExperimentError::TooFewRows { .. })
        ));
        assert!(matches!(
            learning_curve(Scheme::Pi, &f[0], &[1.0], 0, &cfg),
            Err(ExperimentError::Repeats)
        ));
    }
}
