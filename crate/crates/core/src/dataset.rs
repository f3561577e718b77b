//! Maneuver grids, CSV persistence, seeded splits and merges.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::simulator::{
    simulate_dynamic_surrogate_with, simulate_kinematic, FinalPose, ManeuverInput, SimError, SurrogateConfig, VehicleSpec,
    DEFAULT_STEP, STANDARD_GRAVITY,
};

pub const CSV_HEADER: [&str; 13] = [
    "vehicle", "v_i", "a", "delta", "mu", "g", "l", "Nf", "Nr", "X", "Y", "theta", "source",
];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("train fraction must lie in (0, 1), got {0}")]
    Fraction(f64),
    #[error("cannot merge datasets of different sources")]
    MixedSources,
    #[error("nothing to merge")]
    EmptyMerge,
    #[error("unknown source `{0}`")]
    UnknownSource(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
}

/// Where a record's outcome came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Kinematic,
    Surrogate,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Kinematic => "kinematic",
            Source::Surrogate => "surrogate",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = DatasetError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kinematic" => Ok(Source::Kinematic),
            "surrogate" => Ok(Source::Surrogate),
            other => Err(DatasetError::UnknownSource(other.to_string())),
        }
    }
}

/// Identity of a record across splits and merges.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordKey {
    pub vehicle: String,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManeuverRecord {
    pub vehicle: VehicleSpec,
    /// Position in the vehicle's generated grid; with the vehicle name this
    /// identifies the record.
    pub index: usize,
    pub inputs: ManeuverInput,
    pub outcome: FinalPose,
    pub source: Source,
}

impl ManeuverRecord {
    pub fn key(&self) -> RecordKey {
        RecordKey {
            vehicle: self.vehicle.name.clone(),
            index: self.index,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub records: Vec<ManeuverRecord>,
    pub provenance: String,
    pub seed: u64,
    pub source: Source,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn vehicles(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for r in &self.records {
            if !names.contains(&r.vehicle.name) {
                names.push(r.vehicle.name.clone());
            }
        }
        names
    }
}

/// Evenly spaced values `start + i·step` for `i < count`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl Axis {
    pub const fn new(start: f64, step: f64, count: usize) -> Self {
        Self { start, step, count }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.start + i as f64 * self.step)
    }
}

/// Cartesian input grid, iterated friction-major then speed, acceleration
/// and steering. Accelerations are signed (braking is negative).
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub v_i: Axis,
    pub a: Axis,
    pub delta: Axis,
    /// Friction levels; ignored for kinematic records.
    pub mu: Vec<f64>,
}

impl GridSpec {
    /// 50 speeds × 10 decelerations × 11 steering angles.
    pub fn kinematic() -> Self {
        let g = STANDARD_GRAVITY;
        Self {
            v_i: Axis::new(0.1, 0.1, 50),
            a: Axis::new(-0.1 * g, -0.1 * g, 10),
            delta: Axis::new(0.0, FRAC_PI_4 / 10.0, 11),
            mu: vec![0.0],
        }
    }

    /// 3 friction levels × 6 speeds × 10 decelerations × 3 steering angles.
    pub fn surrogate() -> Self {
        let g = STANDARD_GRAVITY;
        Self {
            v_i: Axis::new(1.0, 0.5, 6),
            a: Axis::new(-0.1 * g, -0.1 * g, 10),
            delta: Axis::new(0.0, FRAC_PI_8, 3),
            mu: vec![0.2, 0.4, 0.9],
        }
    }

    pub fn default_for(source: Source) -> Self {
        match source {
            Source::Kinematic => Self::kinematic(),
            Source::Surrogate => Self::surrogate(),
        }
    }

    pub fn inputs(&self, source: Source) -> Vec<ManeuverInput> {
        let mus: &[f64] = match source {
            Source::Kinematic => &[0.0],
            Source::Surrogate => &self.mu,
        };
        let mut out = Vec::with_capacity(mus.len() * self.v_i.count * self.a.count * self.delta.count);
        for &mu in mus {
            for v_i in self.v_i.values() {
                for a in self.a.values() {
                    for delta in self.delta.values() {
                        let m = ManeuverInput::kinematic(v_i, a, delta);
                        out.push(if source == Source::Surrogate { m.with_friction(mu) } else { m });
                    }
                }
            }
        }
        out
    }
}

pub fn kinematic_grid_inputs() -> Vec<ManeuverInput> {
    GridSpec::kinematic().inputs(Source::Kinematic)
}

pub fn surrogate_grid_inputs() -> Vec<ManeuverInput> {
    GridSpec::surrogate().inputs(Source::Surrogate)
}

/// Simulates the kinematic grid for one vehicle (5500 records).
pub fn kinematic_grid(v: &VehicleSpec) -> Result<Dataset, DatasetError> {
    kinematic_dataset(v, &kinematic_grid_inputs(), DEFAULT_STEP)
}

pub fn kinematic_dataset(v: &VehicleSpec, inputs: &[ManeuverInput], step: f64) -> Result<Dataset, DatasetError> {
    let records = inputs
        .par_iter()
        .enumerate()
        .map(|(index, m)| {
            Ok(ManeuverRecord {
                vehicle: v.clone(),
                index,
                inputs: *m,
                outcome: simulate_kinematic(v, m, step)?,
                source: Source::Kinematic,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(Dataset {
        records,
        provenance: format!("kinematic bicycle grid, vehicle {}, rk4 step {step}", v.name),
        seed: 0,
        source: Source::Kinematic,
    })
}

/// Simulates the surrogate grid for one vehicle (540 records).
pub fn surrogate_grid(v: &VehicleSpec, seed: u64) -> Result<Dataset, DatasetError> {
    surrogate_dataset(v, &surrogate_grid_inputs(), &SurrogateConfig::default(), seed)
}

pub fn surrogate_dataset(
    v: &VehicleSpec,
    inputs: &[ManeuverInput],
    cfg: &SurrogateConfig,
    seed: u64,
) -> Result<Dataset, DatasetError> {
    let vehicle_hash = fnv1a(v.name.as_bytes());
    let records = inputs
        .par_iter()
        .enumerate()
        .map(|(index, m)| {
            let noise_seed = mix(seed ^ vehicle_hash, index as u64);
            Ok(ManeuverRecord {
                vehicle: v.clone(),
                index,
                inputs: *m,
                outcome: simulate_dynamic_surrogate_with(v, m, cfg, noise_seed)?,
                source: Source::Surrogate,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(Dataset {
        records,
        provenance: format!(
            "SYNTHETIC friction-limited surrogate (not measured data), vehicle {}, noise sigma_xy {} m sigma_theta {} rad",
            v.name, cfg.sigma_xy, cfg.sigma_theta
        ),
        seed,
        source: Source::Surrogate,
    })
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// SplitMix64 finalizer over `a + b`; decorrelates per-record seeds.
pub(crate) fn mix(a: u64, b: u64) -> u64 {
    let mut z = a
        .wrapping_add(b.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded shuffle split into (train, test). Both keep the source order of
/// their records.
pub fn split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::Fraction(train_fraction));
    }
    let n = d.records.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = if n < 2 {
        n
    } else {
        ((train_fraction * n as f64).round() as usize).clamp(1, n - 1)
    };
    let mut in_train = vec![false; n];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let part = |keep: bool, tag: &str| Dataset {
        records: d
            .records
            .iter()
            .zip(&in_train)
            .filter(|(_, &t)| t == keep)
            .map(|(r, _)| r.clone())
            .collect(),
        provenance: format!("{} [{tag} split {train_fraction}, seed {seed}]", d.provenance),
        seed,
        source: d.source,
    };
    Ok((part(true, "train"), part(false, "test")))
}

/// Concatenates datasets of one source.
pub fn merge(ds: &[&Dataset]) -> Result<Dataset, DatasetError> {
    let first = ds.first().ok_or(DatasetError::EmptyMerge)?;
    if ds.len() == 1 {
        return Ok((*first).clone());
    }
    if ds.iter().any(|d| d.source != first.source) {
        return Err(DatasetError::MixedSources);
    }
    Ok(Dataset {
        records: ds.iter().flat_map(|d| d.records.iter().cloned()).collect(),
        provenance: format!(
            "merged: {}",
            ds.iter().map(|d| d.provenance.as_str()).collect::<Vec<_>>().join(" + ")
        ),
        seed: first.seed,
        source: first.source,
    })
}

/// Writes the dataset as CSV. Two `#` comment lines carry provenance and
/// seed; the header row follows.
pub fn write_csv<W: Write>(d: &Dataset, mut w: W) -> Result<(), DatasetError> {
    writeln!(w, "# provenance: {}", d.provenance.replace('\n', " "))?;
    writeln!(w, "# seed: {}", d.seed)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in &d.records {
        let m = &r.inputs;
        let o = &r.outcome;
        let v = &r.vehicle;
        out.write_record([
            v.name.clone(),
            m.v_i.to_string(),
            m.a.to_string(),
            m.delta.to_string(),
            m.mu.to_string(),
            m.g.to_string(),
            v.wheelbase.to_string(),
            v.front_normal.to_string(),
            v.rear_normal.to_string(),
            o.x.to_string(),
            o.y.to_string(),
            o.theta.to_string(),
            r.source.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Dataset, DatasetError> {
    let mut text = String::new();
    std::io::BufReader::new(r).read_to_string(&mut text)?;
    let mut provenance = String::new();
    let mut seed = 0;
    let mut body_start = 0;
    for line in text.lines() {
        let Some(comment) = line.strip_prefix('#') else { break };
        body_start += line.len() + 1;
        let comment = comment.trim();
        if let Some(p) = comment.strip_prefix("provenance:") {
            provenance = p.trim().to_string();
        } else if let Some(s) = comment.strip_prefix("seed:") {
            seed = s.trim().parse().map_err(|_| DatasetError::Format {
                line: 0,
                msg: format!("bad seed `{}`", s.trim()),
            })?;
        }
    }
    let mut rdr = csv::Reader::from_reader(&text.as_bytes()[body_start.min(text.len())..]);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(DatasetError::Format {
            line: 1,
            msg: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }
    let mut records = Vec::new();
    let mut source = None;
    for (index, row) in rdr.records().enumerate() {
        let row = row?;
        let line = index + 2;
        let num = |i: usize| -> Result<f64, DatasetError> {
            row[i].parse().map_err(|_| DatasetError::Format {
                line,
                msg: format!("column {} is not a number: `{}`", CSV_HEADER[i], &row[i]),
            })
        };
        let vehicle = VehicleSpec::new(&row[0], num(6)?, num(7)?, num(8)?)?;
        let rec_source: Source = row[12].parse()?;
        match source {
            None => source = Some(rec_source),
            Some(s) if s != rec_source => return Err(DatasetError::MixedSources),
            _ => {}
        }
        records.push(ManeuverRecord {
            vehicle,
            index,
            inputs: ManeuverInput {
                v_i: num(1)?,
                a: num(2)?,
                delta: num(3)?,
                mu: num(4)?,
                g: num(5)?,
            },
            outcome: FinalPose::new(num(9)?, num(10)?, num(11)?),
            source: rec_source,
        });
    }
    Ok(Dataset {
        records,
        provenance,
        seed,
        source: source.unwrap_or(Source::Kinematic),
    })
}

pub fn save(d: &Dataset, path: &Path) -> Result<(), DatasetError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_csv(d, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Dataset, DatasetError> {
    read_csv(std::fs::File::open(path)?)
}

/// Parses vehicle lines `name, l, Nf, Nr`. Blank and `#` lines are skipped.
pub fn parse_vehicle_lines<'a, I>(lines: I) -> Result<Vec<VehicleSpec>, DatasetError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut out: Vec<VehicleSpec> = Vec::new();
    for (i, line) in lines.into_iter().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        let bad = |msg: String| DatasetError::Format { line: i + 1, msg };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(bad(format!("expected `name, l, Nf, Nr`, got `{line}`")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("not a number: `{s}`")));
        let v = VehicleSpec::new(fields[0], num(fields[1])?, num(fields[2])?, num(fields[3])?)?;
        if out.iter().any(|o| o.name == v.name) {
            return Err(bad(format!("duplicate vehicle `{}`", v.name)));
        }
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
#[allow(clippy::approx_constant)] // four-digit angle literals are deliberate inputs
mod tests {
    use super::*;

    fn tiny(n: usize) -> Dataset {
        let v = VehicleSpec::small();
        let inputs: Vec<_> = (0..n)
            .map(|i| ManeuverInput::kinematic(0.1 * (i + 1) as f64, -1.0, 0.0))
            .collect();
        kinematic_dataset(&v, &inputs, DEFAULT_STEP).unwrap()
    }

    #[test]
    fn grid_sizes_and_bounds() {
        let k = kinematic_grid_inputs();
        assert_eq!(k.len(), 5500);
        assert!(k.iter().all(|m| m.v_i > 0.0));
        assert_eq!(k[0].v_i, 0.1);
        assert!((k[0].a + 0.981).abs() < 1e-15);
        assert_eq!(k[0].delta, 0.0);
        let last = k.last().unwrap();
        assert!((last.v_i - 5.0).abs() < 1e-12);
        assert!((last.a + 9.81).abs() < 1e-12);
        assert!((last.delta - 0.7854).abs() < 1e-4);
        let s = surrogate_grid_inputs();
        assert_eq!(s.len(), 540);
        assert!(s.iter().all(|m| m.a < 0.0 && m.mu > 0.0));
        assert!((s.last().unwrap().delta - 0.7854).abs() < 1e-4);
        assert!((s[1].delta - 0.3927).abs() < 1e-4);
    }

    #[test]
    fn first_kinematic_record_is_straight_stop() {
        let d = kinematic_dataset(&VehicleSpec::small(), &kinematic_grid_inputs()[..1], DEFAULT_STEP).unwrap();
        let expected = 0.1 * 0.1 / (2.0 * 0.981);
        assert!((d.records[0].outcome.x - expected).abs() < 1e-12);
    }

    #[test]
    fn split_partitions() {
        let d = tiny(10);
        let (tr, te) = split(&d, 0.8, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        let mut keys: Vec<_> = tr.records.iter().chain(&te.records).map(|r| r.index).collect();
        keys.sort_unstable();
        assert_eq!(keys, (0..10).collect::<Vec<_>>());
        let (tr2, _) = split(&d, 0.8, 1).unwrap();
        assert_eq!(tr, tr2);
        let (tr3, _) = split(&d, 0.8, 2).unwrap();
        assert_ne!(tr.records, tr3.records);

        let (a, b) = split(&tiny(2), 0.5, 9).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
        assert!(matches!(split(&d, 1.0, 0), Err(DatasetError::Fraction(_))));
        assert!(matches!(split(&d, 0.0, 0), Err(DatasetError::Fraction(_))));
    }

    #[test]
    fn merge_rules() {
        let a = tiny(3);
        let mut b = tiny(4);
        assert_eq!(merge(&[&a]).unwrap(), a);
        assert_eq!(merge(&[&a, &b]).unwrap().len(), 7);
        b.source = Source::Surrogate;
        assert!(matches!(merge(&[&a, &b]), Err(DatasetError::MixedSources)));
        assert!(matches!(merge(&[]), Err(DatasetError::EmptyMerge)));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = surrogate_dataset(
            &VehicleSpec::long(),
            &surrogate_grid_inputs()[..40],
            &SurrogateConfig::default(),
            5,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(2).unwrap() == CSV_HEADER.join(","));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn vehicle_lines() {
        let v = parse_vehicle_lines(["# name, l, Nf, Nr", "tiny, 0.2, 10, 12", "", "big,1.0,100,100"]).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].wheelbase, 0.2);
        assert!(parse_vehicle_lines(["bad, 0.2, 10"]).is_err());
        assert!(parse_vehicle_lines(["neg, -0.2, 10, 1"]).is_err());
        assert!(parse_vehicle_lines(["a, 1, 1, 1", "a, 2, 2, 2"]).is_err());
    }
}
