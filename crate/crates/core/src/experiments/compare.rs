use rayon::prelude::*;

use super::{single_output_mae, ExperimentConfig, ExperimentError, Output, Splits, MERGED};
use crate::dataset::{Dataset, Source};
use crate::features::Scheme;

/// Test MAE of one output on one target vehicle, for every scheme and
/// training source.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparativeReport {
    pub source: Source,
    pub target: String,
    pub output: Output,
    /// Training sources: the target itself, each other vehicle, [`MERGED`].
    pub training: Vec<String>,
    /// `(scheme, MAE per training source)`.
    pub rows: Vec<(Scheme, Vec<f64>)>,
}

impl ComparativeReport {
    pub fn mae(&self, scheme: Scheme, training: &str) -> Option<f64> {
        let j = self.training.iter().position(|t| t == training)?;
        self.rows.iter().find(|(s, _)| *s == scheme).map(|(_, v)| v[j])
    }

    /// Mean MAE over the models trained on a single other vehicle.
    pub fn transfer_mae(&self, scheme: Scheme) -> Option<f64> {
        let others: Vec<f64> = self
            .training
            .iter()
            .filter(|t| *t != &self.target && *t != MERGED)
            .filter_map(|t| self.mae(scheme, t))
            .collect();
        (!others.is_empty()).then(|| others.iter().sum::<f64>() / others.len() as f64)
    }
}

pub fn comparative_study(
    datasets: &[Dataset],
    schemes: &[Scheme],
    target: &str,
    output: Output,
    cfg: &ExperimentConfig,
) -> Result<ComparativeReport, ExperimentError> {
    let splits = Splits::new(datasets, cfg)?;
    let t = splits.position(target)?;
    let mut training = vec![target.to_string()];
    training.extend(splits.vehicles.iter().filter(|v| *v != target).cloned());
    training.push(MERGED.to_string());
    let sets = training
        .iter()
        .map(|m| splits.training_for(m))
        .collect::<Result<Vec<_>, _>>()?;
    let test = &splits.test[t].records;

    let jobs: Vec<(usize, usize)> = (0..schemes.len())
        .flat_map(|s| (0..training.len()).map(move |j| (s, j)))
        .collect();
    let maes: Vec<f64> = jobs
        .par_iter()
        .map(|&(s, j)| single_output_mae(schemes[s], &sets[j], test, output, cfg))
        .collect::<Result<_, _>>()?;
    let rows = schemes
        .iter()
        .enumerate()
        .map(|(s, &scheme)| (scheme, maes[s * training.len()..(s + 1) * training.len()].to_vec()))
        .collect();
    Ok(ComparativeReport {
        source: splits.source,
        target: target.to_string(),
        output,
        training,
        rows,
    })
}
