//! Self, cross and shared prediction matrices, learning curves and the
//! preprocessing comparison, plus their CSV and Markdown reports.

mod compare;
mod curve;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{
    fnv1a, kinematic_dataset, mix, split, surrogate_dataset, Dataset, DatasetError, GridSpec, ManeuverRecord, RecordKey, Source,
};
use crate::features::{inverse_targets, FeatureError, Pipeline, Scheme, DEFAULT_PI10_CAP};
use crate::gbt::{fit, fit_multi, Ensemble, GbtConfig, GbtError, MultiEnsemble};
use crate::simulator::{FinalPose, SurrogateConfig, VehicleSpec, DEFAULT_STEP};

pub use compare::{comparative_study, ComparativeReport};
pub use curve::{learning_curve, CurvePoint, CurveTable};
pub use report::{
    comparative_csv, comparative_markdown, curve_csv, emit_report, matrix_csv, matrix_markdown, write_comparative, write_curve,
    SHARED_CONFIG_NOTE,
};

/// Label of the model trained on every vehicle's training split.
pub const MERGED: &str = "MERGED";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Gbt(#[from] GbtError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("no dataset for vehicle `{0}`")]
    MissingDataset(String),
    #[error("need at least one dataset")]
    NoDatasets,
    #[error("dataset for `{0}` is given twice")]
    DuplicateVehicle(String),
    #[error("each dataset must hold exactly one vehicle")]
    MultiVehicleDataset,
    #[error("datasets mix kinematic and surrogate records")]
    MixedSources,
    #[error("mae needs equal nonzero lengths, got {actual} and {predicted}")]
    MaeLength { actual: usize, predicted: usize },
    #[error("fraction {0} is outside (0, 1]")]
    Fraction(f64),
    #[error("fraction {fraction} leaves {rows} training rows, below the minimum {min}")]
    TooFewRows { fraction: f64, rows: usize, min: usize },
    #[error("repeats must be at least 1")]
    Repeats,
    #[error("unknown output `{0}`; expected X, Y or theta")]
    UnknownOutput(String),
    #[error("leakage: {0}")]
    Leakage(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One of the three predicted pose components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Output {
    X,
    Y,
    Theta,
}

impl Output {
    pub const ALL: [Output; 3] = [Output::X, Output::Y, Output::Theta];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Output {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Output::X => "X",
            Output::Y => "Y",
            Output::Theta => "theta",
        })
    }
}

impl FromStr for Output {
    type Err = ExperimentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "X" | "x" => Ok(Output::X),
            "Y" | "y" => Ok(Output::Y),
            "theta" | "THETA" | "Theta" => Ok(Output::Theta),
            other => Err(ExperimentError::UnknownOutput(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub gbt: GbtConfig,
    pub train_fraction: f64,
    pub seed: u64,
    pub pi10_cap: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::new(0)
    }
}

impl ExperimentConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            gbt: GbtConfig {
                seed,
                ..GbtConfig::default()
            },
            train_fraction: 0.8,
            seed,
            pi10_cap: DEFAULT_PI10_CAP,
        }
    }

    /// Split seed of one vehicle; independent of the other vehicles.
    pub fn split_seed(&self, vehicle: &str) -> u64 {
        mix(self.seed ^ fnv1a(vehicle.as_bytes()), 0x5_u64)
    }
}

/// Generates the standard grid for every vehicle.
pub fn generate(source: Source, vehicles: &[VehicleSpec], seed: u64) -> Result<Vec<Dataset>, ExperimentError> {
    generate_grid(source, vehicles, &GridSpec::default_for(source), seed)
}

pub fn generate_grid(
    source: Source,
    vehicles: &[VehicleSpec],
    grid: &GridSpec,
    seed: u64,
) -> Result<Vec<Dataset>, ExperimentError> {
    let inputs = grid.inputs(source);
    vehicles
        .par_iter()
        .map(|v| match source {
            Source::Kinematic => kinematic_dataset(v, &inputs, DEFAULT_STEP),
            Source::Surrogate => surrogate_dataset(v, &inputs, &SurrogateConfig::default(), seed),
        })
        .collect::<Result<_, _>>()
        .map_err(Into::into)
}

/// Per-output mean absolute error `(X, Y, θ)`.
pub fn mae(actual: &[FinalPose], predicted: &[FinalPose]) -> Result<[f64; 3], ExperimentError> {
    if actual.is_empty() || actual.len() != predicted.len() {
        return Err(ExperimentError::MaeLength {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    let mut s = [0.0; 3];
    for (a, p) in actual.iter().zip(predicted) {
        let (a, p) = (a.as_array(), p.as_array());
        for k in 0..3 {
            s[k] += (a[k] - p[k]).abs();
        }
    }
    let n = actual.len() as f64;
    Ok(s.map(|v| v / n))
}

/// A preprocessing pipeline with one ensemble per output.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub pipeline: Pipeline,
    pub ensemble: MultiEnsemble,
}

impl TrainedModel {
    pub fn train(scheme: Scheme, records: &[ManeuverRecord], cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        let pipeline = Pipeline::new(scheme).with_pi10_cap(cfg.pi10_cap).fitted_on(records)?;
        let x = pipeline.inputs(records)?;
        let y = pipeline.targets(records)?;
        let ensemble = fit_multi(&x, &y, &cfg.gbt)?;
        Ok(Self { pipeline, ensemble })
    }

    pub fn predict(&self, records: &[ManeuverRecord]) -> Result<Vec<FinalPose>, ExperimentError> {
        let x = self.pipeline.inputs(records)?;
        let raw = self.ensemble.predict(&x)?;
        raw.into_iter()
            .zip(records)
            .map(|(p, r)| self.pipeline.inverse_targets(p, r).map_err(Into::into))
            .collect()
    }

    pub fn evaluate(&self, records: &[ManeuverRecord]) -> Result<[f64; 3], ExperimentError> {
        let actual: Vec<FinalPose> = records.iter().map(|r| r.outcome).collect();
        mae(&actual, &self.predict(records)?)
    }
}

/// Trains only the ensemble for `output` (seeded as in [`fit_multi`]) and
/// returns its physical-unit MAE on `test`.
pub(crate) fn single_output_mae(
    scheme: Scheme,
    train: &[ManeuverRecord],
    test: &[ManeuverRecord],
    output: Output,
    cfg: &ExperimentConfig,
) -> Result<f64, ExperimentError> {
    let k = output.index();
    let pipeline = Pipeline::new(scheme).with_pi10_cap(cfg.pi10_cap).fitted_on(train)?;
    let x = pipeline.inputs(train)?;
    let y: Vec<f64> = pipeline.targets(train)?.iter().map(|t| t[k]).collect();
    let model: Ensemble = fit(&x, &y, &cfg.gbt.with_seed(cfg.gbt.seed.wrapping_add(k as u64)))?;
    let pred = model.predict(&pipeline.inputs(test)?)?;
    let mut total = 0.0;
    for (p, r) in pred.into_iter().zip(test) {
        let pose = inverse_targets(scheme, [p; 3], Some(r))?;
        total += (pose.as_array()[k] - r.outcome.as_array()[k]).abs();
    }
    Ok(total / test.len() as f64)
}

/// Per-vehicle train/test splits shared by all studies.
#[derive(Clone, Debug)]
pub struct Splits {
    pub source: Source,
    pub vehicles: Vec<String>,
    pub train: Vec<Dataset>,
    pub test: Vec<Dataset>,
}

impl Splits {
    pub fn new(datasets: &[Dataset], cfg: &ExperimentConfig) -> Result<Self, ExperimentError> {
        let first = datasets.first().ok_or(ExperimentError::NoDatasets)?;
        let mut vehicles = Vec::new();
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for d in datasets {
            if d.source != first.source {
                return Err(ExperimentError::MixedSources);
            }
            let names = d.vehicles();
            if names.len() != 1 {
                return Err(ExperimentError::MultiVehicleDataset);
            }
            let name = names.into_iter().next().expect("one vehicle");
            if vehicles.contains(&name) {
                return Err(ExperimentError::DuplicateVehicle(name));
            }
            let (tr, te) = split(d, cfg.train_fraction, cfg.split_seed(&name))?;
            vehicles.push(name);
            train.push(tr);
            test.push(te);
        }
        Ok(Self {
            source: first.source,
            vehicles,
            train,
            test,
        })
    }

    pub fn position(&self, vehicle: &str) -> Result<usize, ExperimentError> {
        self.vehicles
            .iter()
            .position(|v| v == vehicle)
            .ok_or_else(|| ExperimentError::MissingDataset(vehicle.to_string()))
    }

    pub fn merged_train(&self) -> Vec<ManeuverRecord> {
        self.train.iter().flat_map(|d| d.records.iter().cloned()).collect()
    }

    /// Training records of a model label: a vehicle name or [`MERGED`].
    pub fn training_for(&self, model: &str) -> Result<Vec<ManeuverRecord>, ExperimentError> {
        if model == MERGED {
            Ok(self.merged_train())
        } else {
            Ok(self.train[self.position(model)?].records.clone())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellKind {
    SelfPrediction,
    Cross,
    Shared,
}

impl CellKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::SelfPrediction => "self",
            CellKind::Cross => "cross",
            CellKind::Shared => "shared",
        }
    }

    pub fn classify(model: &str, data: &str) -> Self {
        if model == MERGED {
            CellKind::Shared
        } else if model == data {
            CellKind::SelfPrediction
        } else {
            CellKind::Cross
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionCell {
    pub model: String,
    pub data: String,
    /// `(X, Y, θ)` in metres and radians.
    pub mae: [f64; 3],
    pub kind: CellKind,
}

/// Arithmetic means of the cells of each kind.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub self_mean: [f64; 3],
    pub cross_mean: [f64; 3],
    pub shared_mean: [f64; 3],
}

impl Summary {
    pub fn from_cells(cells: &[PredictionCell]) -> Self {
        let mean = |kind| {
            let picked: Vec<&PredictionCell> = cells.iter().filter(|c| c.kind == kind).collect();
            let mut s = [0.0; 3];
            for c in &picked {
                for (acc, m) in s.iter_mut().zip(c.mae) {
                    *acc += m;
                }
            }
            let n = picked.len().max(1) as f64;
            s.map(|v| v / n)
        };
        Self {
            self_mean: mean(CellKind::SelfPrediction),
            cross_mean: mean(CellKind::Cross),
            shared_mean: mean(CellKind::Shared),
        }
    }

    pub fn get(&self, kind: CellKind) -> [f64; 3] {
        match kind {
            CellKind::SelfPrediction => self.self_mean,
            CellKind::Cross => self.cross_mean,
            CellKind::Shared => self.shared_mean,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub scheme: Scheme,
    pub source: Source,
    pub cells: Vec<PredictionCell>,
    pub summary: Summary,
    pub config: ExperimentConfig,
    /// Split seed per vehicle, in dataset order.
    pub split_seeds: Vec<(String, u64)>,
    training_keys: BTreeMap<String, BTreeSet<RecordKey>>,
    test_keys: BTreeMap<String, BTreeSet<RecordKey>>,
}

impl ExperimentReport {
    pub fn vehicles(&self) -> Vec<String> {
        self.split_seeds.iter().map(|(v, _)| v.clone()).collect()
    }

    pub fn models(&self) -> Vec<String> {
        let mut m = self.vehicles();
        m.push(MERGED.to_string());
        m
    }

    pub fn cell(&self, model: &str, data: &str) -> Option<&PredictionCell> {
        self.cells.iter().find(|c| c.model == model && c.data == data)
    }

    /// Confirms that no model saw a record of the test set it is scored on,
    /// that cross models saw nothing of the scored vehicle and that the
    /// merged model saw every vehicle. Returns the number of cells checked.
    pub fn leakage_audit(&self) -> Result<usize, ExperimentError> {
        for c in &self.cells {
            let train = self
                .training_keys
                .get(&c.model)
                .ok_or_else(|| ExperimentError::Leakage(format!("no training record set for model `{}`", c.model)))?;
            let test = self
                .test_keys
                .get(&c.data)
                .ok_or_else(|| ExperimentError::Leakage(format!("no test record set for `{}`", c.data)))?;
            if let Some(k) = train.intersection(test).next() {
                return Err(ExperimentError::Leakage(format!(
                    "model `{}` trained on test record {}#{}",
                    c.model, k.vehicle, k.index
                )));
            }
            match c.kind {
                CellKind::Cross if train.iter().any(|k| k.vehicle == c.data) => {
                    return Err(ExperimentError::Leakage(format!(
                        "cross model `{}` trained on `{}` data",
                        c.model, c.data
                    )));
                }
                CellKind::Shared => {
                    for v in self.vehicles() {
                        if !train.iter().any(|k| k.vehicle == v) {
                            return Err(ExperimentError::Leakage(format!("merged model lacks `{v}` data")));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(self.cells.len())
    }
}

fn keys(records: &[ManeuverRecord]) -> BTreeSet<RecordKey> {
    records.iter().map(ManeuverRecord::key).collect()
}

/// Trains one model per vehicle plus a merged model and scores every test
/// split with every model.
pub fn run_matrix(scheme: Scheme, datasets: &[Dataset], cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let splits = Splits::new(datasets, cfg)?;
    run_matrix_on(scheme, &splits, cfg)
}

pub fn run_matrix_on(scheme: Scheme, splits: &Splits, cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let mut models: Vec<String> = splits.vehicles.clone();
    models.push(MERGED.to_string());
    let training: Vec<Vec<ManeuverRecord>> = models.iter().map(|m| splits.training_for(m)).collect::<Result<_, _>>()?;
    let trained: Vec<TrainedModel> = training
        .par_iter()
        .map(|recs| TrainedModel::train(scheme, recs, cfg))
        .collect::<Result<_, _>>()?;

    let jobs: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|m| (0..splits.vehicles.len()).map(move |d| (m, d)))
        .collect();
    let cells: Vec<PredictionCell> = jobs
        .par_iter()
        .map(|&(m, d)| {
            let mae = trained[m].evaluate(&splits.test[d].records)?;
            Ok(PredictionCell {
                model: models[m].clone(),
                data: splits.vehicles[d].clone(),
                mae,
                kind: CellKind::classify(&models[m], &splits.vehicles[d]),
            })
        })
        .collect::<Result<_, ExperimentError>>()?;

    let training_keys = models.iter().cloned().zip(training.iter().map(|r| keys(r))).collect();
    let test_keys = splits
        .vehicles
        .iter()
        .cloned()
        .zip(splits.test.iter().map(|d| keys(&d.records)))
        .collect();
    Ok(ExperimentReport {
        scheme,
        source: splits.source,
        summary: Summary::from_cells(&cells),
        cells,
        config: cfg.clone(),
        split_seeds: splits.vehicles.iter().map(|v| (v.clone(), cfg.split_seed(v))).collect(),
        training_keys,
        test_keys,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::kinematic_dataset;
    use crate::simulator::ManeuverInput;

    pub(crate) fn small_grid(v: &VehicleSpec) -> Dataset {
        let mut inputs = Vec::new();
        for i in 0..8 {
            for j in 0..3 {
                for k in 0..3 {
                    inputs.push(ManeuverInput::kinematic(
                        0.5 + 0.5 * i as f64,
                        -0.981 * (1 + 2 * j) as f64,
                        0.25 * k as f64,
                    ));
                }
            }
        }
        kinematic_dataset(v, &inputs, DEFAULT_STEP).unwrap()
    }

    pub(crate) fn quick_cfg() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(3);
        c.gbt.n_rounds = 40;
        c
    }

    pub(crate) fn fleet() -> Vec<Dataset> {
        VehicleSpec::registry().iter().map(small_grid).collect()
    }

    #[test]
    fn mae_examples() {
        let a = [FinalPose::new(0.0, 1.0, 2.0), FinalPose::new(2.0, 1.0, 2.0)];
        assert_eq!(mae(&a, &a).unwrap(), [0.0; 3]);
        let p = [FinalPose::new(1.0, 1.0, 2.0), FinalPose::new(1.0, 1.0, 2.0)];
        assert_eq!(mae(&a, &p).unwrap()[0], 1.0);
        assert!(mae(&a, &p[..1]).is_err());
        assert!(mae(&[], &[]).is_err());
    }

    #[test]
    fn output_names() {
        for o in Output::ALL {
            assert_eq!(o.to_string().parse::<Output>().unwrap(), o);
        }
        assert!("Z".parse::<Output>().is_err());
    }

    #[test]
    fn matrix_shape_and_summary() {
        let r = run_matrix(Scheme::Baseline, &fleet(), &quick_cfg()).unwrap();
        assert_eq!(r.cells.len(), 12);
        let count = |k| r.cells.iter().filter(|c| c.kind == k).count();
        assert_eq!(count(CellKind::SelfPrediction), 3);
        assert_eq!(count(CellKind::Cross), 6);
        assert_eq!(count(CellKind::Shared), 3);
        for c in &r.cells {
            assert_eq!(c.kind == CellKind::SelfPrediction, c.model == c.data);
            assert_eq!(c.kind == CellKind::Shared, c.model == MERGED);
        }
        assert_eq!(r.summary, Summary::from_cells(&r.cells));
        let self_x: f64 = r
            .cells
            .iter()
            .filter(|c| c.kind == CellKind::SelfPrediction)
            .map(|c| c.mae[0])
            .sum::<f64>()
            / 3.0;
        assert_eq!(r.summary.self_mean[0], self_x);
        assert_eq!(r.leakage_audit().unwrap(), 12);
    }

    #[test]
    fn matrix_is_deterministic() {
        let a = run_matrix(Scheme::Pi, &fleet(), &quick_cfg()).unwrap();
        let b = run_matrix(Scheme::Pi, &fleet(), &quick_cfg()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn leakage_audit_catches_contamination() {
        let mut r = run_matrix(Scheme::Baseline, &fleet(), &quick_cfg()).unwrap();
        let leaked = r.test_keys["small"].iter().next().unwrap().clone();
        r.training_keys.get_mut("long").unwrap().insert(leaked);
        assert!(matches!(r.leakage_audit(), Err(ExperimentError::Leakage(_))));
    }

    #[test]
    fn rejects_bad_fleets() {
        let f = fleet();
        assert!(matches!(
            run_matrix(Scheme::Pi, &[], &quick_cfg()),
            Err(ExperimentError::NoDatasets)
        ));
        let dup = vec![f[0].clone(), f[0].clone()];
        assert!(matches!(
            run_matrix(Scheme::Pi, &dup, &quick_cfg()),
            Err(ExperimentError::DuplicateVehicle(_))
        ));
    }

    #[test]
    fn single_output_matches_multi() {
        let f = fleet();
        let cfg = quick_cfg();
        let splits = Splits::new(&f, &cfg).unwrap();
        let m = TrainedModel::train(Scheme::Pi, &splits.train[2].records, &cfg).unwrap();
        let full = m.evaluate(&splits.test[2].records).unwrap();
        let y = single_output_mae(Scheme::Pi, &splits.train[2].records, &splits.test[2].records, Output::Y, &cfg).unwrap();
        assert!((full[1] - y).abs() < 1e-15);
    }
}
