//! Preprocessing schemes mapping maneuver records to learner inputs and
//! targets, and predictions back to physical poses.
//!
//! | scheme       | inputs                                   | targets            |
//! |--------------|------------------------------------------|--------------------|
//! | `baseline`   | raw physical inputs                      | `X, Y, θ`          |
//! | `normalized` | baseline / training max abs per column   | `X, Y, θ`          |
//! | `pca<k>`     | top-k components of standardized baseline| `X, Y, θ`          |
//! | `augmented`  | baseline + `v_i tan δ / l`               | `X, Y, θ`          |
//! | `pi`         | π groups                                 | `X/l, Y/l, θ`      |
//! | `pi-aug`     | π groups + handcrafted ratios            | `X/l, Y/l, θ`      |
//! | `pi-fillers` | π groups + `v_i, l`                      | `X/l, Y/l, θ`      |

mod matrix;
mod pca;
mod pi;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::{ManeuverRecord, Source};
use crate::dimension::DimensionError;
use crate::simulator::FinalPose;

pub use matrix::FeatureMatrix;
pub use pca::Pca;
pub use pi::{pi_basis, pi_inverse, pi_targets, DEFAULT_PI10_CAP};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error(transparent)]
    Dimension(#[from] DimensionError),
    #[error("scheme `{0}` must be fitted before transforming")]
    NotFitted(Scheme),
    #[error("scheme `{0}` needs the test record to invert its targets")]
    MissingContext(Scheme),
    #[error("acceleration is zero; the handcrafted ratios are undefined")]
    ZeroAcceleration,
    #[error("cannot fit on an empty training set")]
    EmptyTraining,
    #[error("pca needs 1 <= k <= {cols}, got k = {k}")]
    ComponentCount { k: usize, cols: usize },
    #[error("pca needs more rows than columns ({rows} rows, {cols} columns)")]
    InsufficientRows { rows: usize, cols: usize },
    #[error("records from different sources cannot share one feature matrix")]
    MixedSources,
    #[error("expected {expected} columns, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
    #[error("non-finite feature in column `{0}`")]
    NonFinite(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Baseline,
    Normalized,
    Pca(usize),
    Augmented,
    Pi,
    PiAugmented,
    PiFillers,
}

impl Scheme {
    /// The eight variants of the preprocessing comparison.
    pub const COMPARATIVE: [Scheme; 8] = [
        Scheme::Baseline,
        Scheme::Normalized,
        Scheme::Pca(2),
        Scheme::Pca(3),
        Scheme::Augmented,
        Scheme::Pi,
        Scheme::PiAugmented,
        Scheme::PiFillers,
    ];

    pub fn is_dimensionless(&self) -> bool {
        matches!(self, Scheme::Pi | Scheme::PiAugmented | Scheme::PiFillers)
    }

    pub fn is_stateful(&self) -> bool {
        matches!(self, Scheme::Normalized | Scheme::Pca(_))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Baseline => f.write_str("baseline"),
            Scheme::Normalized => f.write_str("normalized"),
            Scheme::Pca(k) => write!(f, "pca{k}"),
            Scheme::Augmented => f.write_str("augmented"),
            Scheme::Pi => f.write_str("pi"),
            Scheme::PiAugmented => f.write_str("pi-aug"),
            Scheme::PiFillers => f.write_str("pi-fillers"),
        }
    }
}

impl FromStr for Scheme {
    type Err = FeatureError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "baseline" => Scheme::Baseline,
            "normalized" => Scheme::Normalized,
            "augmented" => Scheme::Augmented,
            "pi" => Scheme::Pi,
            "pi-aug" => Scheme::PiAugmented,
            "pi-fillers" => Scheme::PiFillers,
            other => match other.strip_prefix("pca").and_then(|k| k.parse().ok()) {
                Some(k) if k >= 1 => Scheme::Pca(k),
                _ => return Err(FeatureError::UnknownScheme(other.to_string())),
            },
        })
    }
}

/// Raw physical inputs: `[v_i, a, δ, l]` for kinematic records,
/// `[μ, v_i, g, a, δ, N_f, N_r, l]` for surrogate records.
pub fn baseline_features(r: &ManeuverRecord) -> Vec<f64> {
    let m = &r.inputs;
    let v = &r.vehicle;
    match r.source {
        Source::Kinematic => vec![m.v_i, m.a, m.delta, v.wheelbase],
        Source::Surrogate => vec![m.mu, m.v_i, m.g, m.a, m.delta, v.front_normal, v.rear_normal, v.wheelbase],
    }
}

pub fn baseline_columns(source: Source) -> Vec<&'static str> {
    match source {
        Source::Kinematic => vec!["v_i", "a", "delta", "l"],
        Source::Surrogate => vec!["mu", "v_i", "g", "a", "delta", "N_f", "N_r", "l"],
    }
}

/// Baseline plus the kinematic yaw rate `v_i tan δ / l`.
pub fn augmented_features(r: &ManeuverRecord) -> Vec<f64> {
    let mut f = baseline_features(r);
    f.push(r.inputs.v_i * r.inputs.delta.tan() / r.vehicle.wheelbase);
    f
}

pub use pi::{pi_augmented_features, pi_features, pi_fillers_features};

/// Target triple a scheme is trained on.
pub fn targets(scheme: Scheme, r: &ManeuverRecord) -> Result<[f64; 3], FeatureError> {
    if scheme.is_dimensionless() {
        pi_targets(r)
    } else {
        Ok(r.outcome.as_array())
    }
}

/// Maps a prediction in the scheme's target space back to a physical pose.
/// π schemes scale lengths by the wheelbase of `context`, the record being
/// predicted.
pub fn inverse_targets(
    scheme: Scheme,
    prediction: [f64; 3],
    context: Option<&ManeuverRecord>,
) -> Result<FinalPose, FeatureError> {
    if scheme.is_dimensionless() {
        let r = context.ok_or(FeatureError::MissingContext(scheme))?;
        pi_inverse(prediction, r)
    } else {
        Ok(FinalPose::from_array(prediction))
    }
}

/// Per-column divisor equal to the largest absolute training value.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    divisors: Vec<f64>,
}

impl Normalizer {
    pub fn fit(train: &FeatureMatrix) -> Result<Self, FeatureError> {
        if train.n_rows() == 0 {
            return Err(FeatureError::EmptyTraining);
        }
        let divisors = (0..train.n_cols())
            .map(|j| {
                let m = train.rows().map(|r| r[j].abs()).fold(0.0, f64::max);
                if m > 0.0 {
                    m
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { divisors })
    }

    pub fn divisors(&self) -> &[f64] {
        &self.divisors
    }

    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
        if x.n_cols() != self.divisors.len() {
            return Err(FeatureError::Shape {
                expected: self.divisors.len(),
                got: x.n_cols(),
            });
        }
        Ok(x.map_rows(x.column_names().to_vec(), |row| {
            row.iter().zip(&self.divisors).map(|(v, d)| v / d).collect()
        }))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Fitted {
    Normalizer(Normalizer),
    Pca(Pca),
}

/// A scheme plus whatever it learned from the training records.
#[derive(Clone, Debug, PartialEq)]
pub struct Pipeline {
    scheme: Scheme,
    fitted: Option<Fitted>,
    pi10_cap: f64,
}

impl Pipeline {
    /// Unfitted pipeline; usable directly for stateless schemes.
    pub fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            fitted: None,
            pi10_cap: DEFAULT_PI10_CAP,
        }
    }

    pub fn with_pi10_cap(mut self, cap: f64) -> Self {
        self.pi10_cap = cap;
        self
    }

    pub fn fit(scheme: Scheme, train: &[ManeuverRecord]) -> Result<Self, FeatureError> {
        Self::new(scheme).fitted_on(train)
    }

    pub fn fitted_on(mut self, train: &[ManeuverRecord]) -> Result<Self, FeatureError> {
        if train.is_empty() {
            return Err(FeatureError::EmptyTraining);
        }
        self.fitted = match self.scheme {
            Scheme::Normalized => Some(Fitted::Normalizer(Normalizer::fit(&raw_baseline(train)?)?)),
            Scheme::Pca(k) => Some(Fitted::Pca(Pca::fit(&raw_baseline(train)?, k)?)),
            _ => None,
        };
        Ok(self)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn is_fitted(&self) -> bool {
        !self.scheme.is_stateful() || self.fitted.is_some()
    }

    pub fn pca(&self) -> Option<&Pca> {
        match &self.fitted {
            Some(Fitted::Pca(p)) => Some(p),
            _ => None,
        }
    }

    pub fn normalizer(&self) -> Option<&Normalizer> {
        match &self.fitted {
            Some(Fitted::Normalizer(n)) => Some(n),
            _ => None,
        }
    }

    /// Learner input matrix for `records`.
    pub fn inputs(&self, records: &[ManeuverRecord]) -> Result<FeatureMatrix, FeatureError> {
        if !self.is_fitted() {
            return Err(FeatureError::NotFitted(self.scheme));
        }
        let source = common_source(records)?;
        let cap = self.pi10_cap;
        let m = match self.scheme {
            Scheme::Baseline => raw_baseline(records)?,
            Scheme::Normalized => match &self.fitted {
                Some(Fitted::Normalizer(n)) => n.apply(&raw_baseline(records)?)?,
                _ => unreachable!("checked by is_fitted"),
            },
            Scheme::Pca(_) => match &self.fitted {
                Some(Fitted::Pca(p)) => p.transform(&raw_baseline(records)?)?,
                _ => unreachable!("checked by is_fitted"),
            },
            Scheme::Augmented => {
                let mut cols: Vec<String> = baseline_columns(source).iter().map(|s| s.to_string()).collect();
                cols.push("yaw_rate".into());
                build(cols, records, |r| Ok(augmented_features(r)))?
            }
            Scheme::Pi => build(pi::input_columns(source, false, false), records, pi_features)?,
            Scheme::PiAugmented => build(pi::input_columns(source, true, false), records, |r| {
                pi_augmented_features(r, cap)
            })?,
            Scheme::PiFillers => build(pi::input_columns(source, false, true), records, pi_fillers_features)?,
        };
        Ok(m)
    }

    pub fn targets(&self, records: &[ManeuverRecord]) -> Result<Vec<[f64; 3]>, FeatureError> {
        records.iter().map(|r| targets(self.scheme, r)).collect()
    }

    pub fn inverse_targets(&self, prediction: [f64; 3], record: &ManeuverRecord) -> Result<FinalPose, FeatureError> {
        inverse_targets(self.scheme, prediction, Some(record))
    }
}

fn common_source(records: &[ManeuverRecord]) -> Result<Source, FeatureError> {
    let source = records.first().map_or(Source::Kinematic, |r| r.source);
    if records.iter().any(|r| r.source != source) {
        return Err(FeatureError::MixedSources);
    }
    Ok(source)
}

fn raw_baseline(records: &[ManeuverRecord]) -> Result<FeatureMatrix, FeatureError> {
    let source = common_source(records)?;
    let cols = baseline_columns(source).iter().map(|s| s.to_string()).collect();
    build(cols, records, |r| Ok(baseline_features(r)))
}

fn build<F>(columns: Vec<String>, records: &[ManeuverRecord], f: F) -> Result<FeatureMatrix, FeatureError>
where
    F: Fn(&ManeuverRecord) -> Result<Vec<f64>, FeatureError>,
{
    let mut data = Vec::with_capacity(records.len() * columns.len());
    for r in records {
        let row = f(r)?;
        if row.len() != columns.len() {
            return Err(FeatureError::Shape {
                expected: columns.len(),
                got: row.len(),
            });
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(columns[j].clone()));
        }
        data.extend(row);
    }
    FeatureMatrix::from_flat(columns, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::kinematic_dataset;
    use crate::simulator::{ManeuverInput, VehicleSpec, DEFAULT_STEP};

    fn record(v: VehicleSpec, v_i: f64, a: f64, delta: f64) -> ManeuverRecord {
        kinematic_dataset(&v, &[ManeuverInput::kinematic(v_i, a, delta)], DEFAULT_STEP)
            .unwrap()
            .records
            .remove(0)
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::COMPARATIVE {
            assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
        }
        assert!("pca0".parse::<Scheme>().is_err());
        assert!("zscore".parse::<Scheme>().is_err());
    }

    #[test]
    fn baseline_small_vehicle() {
        let r = record(VehicleSpec::small(), 1.0, -0.981, 0.0);
        assert_eq!(baseline_features(&r), vec![1.0, -0.981, 0.0, 0.345]);
        assert_eq!(targets(Scheme::Baseline, &r).unwrap(), r.outcome.as_array());
        assert_eq!(baseline_columns(Source::Surrogate).len(), 8);
    }

    #[test]
    fn augmented_feature_identity() {
        let r = record(VehicleSpec::long(), 2.0, -1.962, 0.3);
        let f = augmented_features(&r);
        assert_eq!(f.len(), 5);
        assert!((f[4] * 0.853 / 2.0 - 0.3f64.tan()).abs() < 1e-15);
        let straight = record(VehicleSpec::long(), 2.0, -1.962, 0.0);
        assert_eq!(augmented_features(&straight)[4], 0.0);
    }

    #[test]
    fn normalizer_examples() {
        let m = FeatureMatrix::new(
            vec!["c".into(), "z".into()],
            vec![vec![1.0, 0.0], vec![-2.0, 0.0], vec![0.5, 0.0]],
        )
        .unwrap();
        let n = Normalizer::fit(&m).unwrap();
        assert_eq!(n.divisors(), &[2.0, 1.0]);
        let out = n.apply(&m).unwrap();
        assert_eq!(out.column(0), vec![0.5, -1.0, 0.25]);
        assert_eq!(out.column(1), vec![0.0, 0.0, 0.0]);
        let test = FeatureMatrix::new(vec!["c".into(), "z".into()], vec![vec![4.0, 0.0]]).unwrap();
        assert_eq!(n.apply(&test).unwrap().row(0)[0], 2.0);
        let empty = FeatureMatrix::from_flat(vec!["c".into()], vec![]).unwrap();
        assert_eq!(Normalizer::fit(&empty).unwrap_err(), FeatureError::EmptyTraining);
    }

    #[test]
    fn stateful_schemes_require_fit() {
        let recs = vec![record(VehicleSpec::small(), 1.0, -0.981, 0.0)];
        assert_eq!(
            Pipeline::new(Scheme::Normalized).inputs(&recs).unwrap_err(),
            FeatureError::NotFitted(Scheme::Normalized)
        );
        assert!(Pipeline::new(Scheme::Pi).inputs(&recs).is_ok());
        assert!(Pipeline::new(Scheme::Augmented).inputs(&recs).is_ok());
    }

    #[test]
    fn inverse_passthrough_and_context() {
        let r = record(VehicleSpec::large(), 1.0, -0.981, 0.2);
        let p = inverse_targets(Scheme::Baseline, [1.0, 2.0, 3.0], None).unwrap();
        assert_eq!(p, FinalPose::new(1.0, 2.0, 3.0));
        assert_eq!(
            inverse_targets(Scheme::Pi, [1.0, 2.0, 3.0], None).unwrap_err(),
            FeatureError::MissingContext(Scheme::Pi)
        );
        let p = inverse_targets(Scheme::Pi, [2.0, 1.0, 0.3], Some(&r)).unwrap();
        assert!((p.x - 0.95).abs() < 1e-15);
        assert!((p.y - 0.475).abs() < 1e-15);
        assert_eq!(p.theta, 0.3);
    }

    #[test]
    fn mixed_sources_rejected() {
        let a = record(VehicleSpec::small(), 1.0, -0.981, 0.0);
        let mut b = a.clone();
        b.source = Source::Surrogate;
        b.inputs.mu = 0.4;
        assert_eq!(
            Pipeline::new(Scheme::Baseline).inputs(&[a, b]).unwrap_err(),
            FeatureError::MixedSources
        );
    }
}
