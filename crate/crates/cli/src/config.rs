//! Run configuration: built-in defaults, an optional sectioned
//! `key = value` file, then command-line overrides.
//!
//! ```text
//! [run]
//! source = kinematic
//! scheme = pi
//! seed = 7
//!
//! [gbt]
//! n_rounds = 300
//!
//! [vehicles]
//! small = 0.345, 37.77, 28.84
//!
//! [grid]
//! v_i = 0.1, 0.1, 50
//!
//! [variables]
//! l = "L"
//! ```

use std::path::PathBuf;
use std::str::FromStr;

use dimtransfer::dataset::{parse_vehicle_lines, Axis, GridSpec, Source};
use dimtransfer::dimension::{parse_variable_lines, VariableDecl};
use dimtransfer::experiments::{ExperimentConfig, Output};
use dimtransfer::features::Scheme;
use dimtransfer::gbt::GbtConfig;
use dimtransfer::simulator::VehicleSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub vehicles: Vec<VehicleSpec>,
    pub source: Source,
    pub scheme: Scheme,
    pub gbt: GbtConfig,
    pub seed: u64,
    pub train_fraction: f64,
    pub out: PathBuf,
    pub data: PathBuf,
    pub fractions: Vec<f64>,
    pub repeats: usize,
    pub target: String,
    pub output: Output,
    /// Axis overrides; unset axes keep the source's default grid.
    pub grid: GridOverrides,
    pub variables: Option<Vec<VariableDecl>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GridOverrides {
    pub v_i: Option<Axis>,
    pub a: Option<Axis>,
    pub delta: Option<Axis>,
    pub mu: Option<Vec<f64>>,
}

impl GridOverrides {
    pub fn apply(&self, source: Source) -> GridSpec {
        let mut g = GridSpec::default_for(source);
        if let Some(x) = self.v_i {
            g.v_i = x;
        }
        if let Some(x) = self.a {
            g.a = x;
        }
        if let Some(x) = self.delta {
            g.delta = x;
        }
        if let Some(m) = &self.mu {
            g.mu = m.clone();
        }
        g
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            vehicles: VehicleSpec::registry(),
            source: Source::Kinematic,
            scheme: Scheme::Baseline,
            gbt: GbtConfig::default(),
            seed: 0,
            train_fraction: 0.8,
            out: PathBuf::from("reports"),
            data: PathBuf::from("data"),
            fractions: vec![0.05, 0.1, 0.2, 0.4, 0.8, 1.0],
            repeats: 5,
            target: "large".to_string(),
            output: Output::Y,
            grid: GridOverrides::default(),
            variables: None,
        }
    }
}

impl RunConfig {
    pub fn experiment(&self) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(self.seed);
        c.gbt = GbtConfig {
            seed: self.seed,
            ..self.gbt.clone()
        };
        c.train_fraction = self.train_fraction;
        c
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.grid.apply(self.source)
    }

    /// Defaults overlaid with the settings in `text`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = Self::default();
        let mut section = String::new();
        let mut vehicle_lines = Vec::new();
        let mut variable_lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            // `#` starts a comment anywhere on the line
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            let at = |msg: String| format!("config line {}: {msg}", i + 1);
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| at(format!("expected `key = value`, got `{line}`")))?;
            match section.as_str() {
                "run" => cfg.set_run(key, value).map_err(at)?,
                "gbt" => cfg.set_gbt(key, value).map_err(at)?,
                "grid" => cfg.set_grid(key, value).map_err(at)?,
                "vehicles" => vehicle_lines.push(format!("{key}, {value}")),
                "variables" => variable_lines.push(line.to_string()),
                "" => return Err(at("setting outside a section".into())),
                other => return Err(at(format!("unknown section `[{other}]`"))),
            }
        }
        if !vehicle_lines.is_empty() {
            cfg.vehicles =
                parse_vehicle_lines(vehicle_lines.iter().map(String::as_str)).map_err(|e| format!("[vehicles]: {e}"))?;
        }
        if !variable_lines.is_empty() {
            cfg.variables =
                Some(parse_variable_lines(variable_lines.iter().map(String::as_str)).map_err(|e| format!("[variables]: {e}"))?);
        }
        Ok(cfg)
    }

    fn set_run(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "source" => self.source = parse(key, value)?,
            "scheme" => self.scheme = value.parse().map_err(|e| format!("{e}"))?,
            "seed" => self.seed = parse(key, value)?,
            "train_fraction" => self.train_fraction = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "data" => self.data = PathBuf::from(value),
            "fractions" => self.fractions = parse_list(key, value)?,
            "repeats" => self.repeats = parse(key, value)?,
            "target" => self.target = value.to_string(),
            "output" => self.output = value.parse().map_err(|e| format!("{e}"))?,
            _ => return Err(format!("unknown key `{key}` in [run]")),
        }
        Ok(())
    }

    fn set_gbt(&mut self, key: &str, value: &str) -> Result<(), String> {
        let g = &mut self.gbt;
        match key {
            "n_rounds" | "rounds" => g.n_rounds = parse(key, value)?,
            "learning_rate" | "lr" => g.learning_rate = parse(key, value)?,
            "max_depth" | "depth" => g.max_depth = parse(key, value)?,
            "min_samples_leaf" => g.min_samples_leaf = parse(key, value)?,
            "subsample" => g.subsample = parse(key, value)?,
            _ => return Err(format!("unknown key `{key}` in [gbt]")),
        }
        Ok(())
    }

    fn set_grid(&mut self, key: &str, value: &str) -> Result<(), String> {
        let axis = || -> Result<Axis, String> {
            let v: Vec<f64> = parse_list(key, value)?;
            if v.len() != 3 || v[2] < 1.0 || v[2].fract() != 0.0 {
                return Err(format!("`{key}` takes `start, step, count`"));
            }
            Ok(Axis::new(v[0], v[1], v[2] as usize))
        };
        match key {
            "v_i" => self.grid.v_i = Some(axis()?),
            "a" => self.grid.a = Some(axis()?),
            "delta" => self.grid.delta = Some(axis()?),
            "mu" => self.grid.mu = Some(parse_list(key, value)?),
            _ => return Err(format!("unknown key `{key}` in [grid]")),
        }
        Ok(())
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("bad value `{value}` for `{key}`"))
}

pub fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::default().vehicles.len(), 3);
    }

    #[test]
    fn sections_override_defaults() {
        let text = "\
# comment
[run]
source = surrogate
scheme = pi-aug
seed = 7
fractions = 0.5, 1.0

[gbt]
n_rounds = 20
lr = 0.3

[vehicles]
tiny = 0.2, 10, 12

[grid]
v_i = 1, 1, 3
mu = 0.5
";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.source, Source::Surrogate);
        assert_eq!(c.scheme, Scheme::PiAugmented);
        assert_eq!(c.seed, 7);
        assert_eq!(c.fractions, vec![0.5, 1.0]);
        assert_eq!(c.gbt.n_rounds, 20);
        assert_eq!(c.gbt.learning_rate, 0.3);
        assert_eq!(c.vehicles.len(), 1);
        assert_eq!(c.vehicles[0].name, "tiny");
        let g = c.grid_spec();
        assert_eq!(g.v_i, Axis::new(1.0, 1.0, 3));
        assert_eq!(g.inputs(Source::Surrogate).len(), 3 * 10 * 3);
        assert_eq!(c.experiment().gbt.seed, 7);
    }

    #[test]
    fn inline_comments() {
        let c = RunConfig::parse("[run]   # main\nseed = 5  # five\n").unwrap();
        assert_eq!(c.seed, 5);
    }

    #[test]
    fn variables_section() {
        let c = RunConfig::parse("[variables]\nl = \"L\"\nv = \"L T^-1\"\nt = \"T\"\n").unwrap();
        assert_eq!(c.variables.unwrap().len(), 3);
    }

    #[test]
    fn errors_name_the_line() {
        for bad in [
            "seed = 1",
            "[run]\nseed = x",
            "[run]\ncolour = red",
            "[nope]\na = 1",
            "[grid]\nv_i = 1, 2",
            "[run]\njunk",
        ] {
            let e = RunConfig::parse(bad).unwrap_err();
            assert!(e.starts_with("config line"), "{bad}: {e}");
        }
        assert!(RunConfig::parse("[vehicles]\nx = 1, 2").unwrap_err().contains("[vehicles]"));
    }
}
