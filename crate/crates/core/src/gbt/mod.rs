//! Gradient-boosted regression trees with squared loss.
//!
//! Each round fits a depth-limited tree to the current residuals with an
//! exact greedy split search and adds `learning_rate` times its output.
//! Everything is deterministic for a fixed [`GbtConfig::seed`].

mod tree;

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::features::FeatureMatrix;

pub use tree::{Node, RegressionTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GbtError {
    #[error("training data is empty")]
    Empty,
    #[error("target {0} is not finite")]
    NonFiniteTarget(usize),
    #[error("feature value at row {row}, column {col} is not finite")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("{rows} rows cannot fill two leaves of {min_leaf}")]
    TooFewRows { rows: usize, min_leaf: usize },
    #[error("{x_rows} feature rows but {y_len} targets")]
    LengthMismatch { x_rows: usize, y_len: usize },
    #[error("model expects {expected} features, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
    #[error("model text line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GbtConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            n_rounds: 300,
            learning_rate: 0.1,
            max_depth: 4,
            min_samples_leaf: 5,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<(), GbtError> {
        if self.n_rounds == 0 {
            return Err(GbtError::InvalidConfig("n_rounds must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(GbtError::InvalidConfig("learning_rate must lie in (0, 1]"));
        }
        if self.max_depth == 0 {
            return Err(GbtError::InvalidConfig("max_depth must be at least 1"));
        }
        if self.min_samples_leaf == 0 {
            return Err(GbtError::InvalidConfig("min_samples_leaf must be at least 1"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(GbtError::InvalidConfig("subsample must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// `prediction = base_score + learning_rate · Σ tree(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    base_score: f64,
    trees: Vec<RegressionTree>,
    config: GbtConfig,
    n_features: usize,
}

impl Ensemble {
    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn config(&self) -> &GbtConfig {
        &self.config
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let s: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        self.base_score + self.config.learning_rate * s
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>, GbtError> {
        if x.n_cols() != self.n_features {
            return Err(GbtError::Shape {
                expected: self.n_features,
                got: x.n_cols(),
            });
        }
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }

    /// Line-oriented text form that [`Ensemble::from_text`] reads back.
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "gbt 1");
        let _ = writeln!(s, "n_features {}", self.n_features);
        let _ = writeln!(s, "base_score {}", self.base_score);
        let _ = writeln!(
            s,
            "config {} {} {} {} {} {}",
            c.n_rounds, c.learning_rate, c.max_depth, c.min_samples_leaf, c.subsample, c.seed
        );
        let _ = writeln!(s, "trees {}", self.trees.len());
        for t in &self.trees {
            let _ = writeln!(s, "tree {}", t.nodes().len());
            for n in t.nodes() {
                match n {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        let _ = writeln!(s, "split {feature} {threshold} {left} {right}");
                    }
                    Node::Leaf { value } => {
                        let _ = writeln!(s, "leaf {value}");
                    }
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, GbtError> {
        let all: Vec<(usize, Vec<&str>)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split_whitespace().collect()))
            .collect();
        let mut lines = all.iter();
        fn num<T: std::str::FromStr>(line: usize, tok: Option<&&str>) -> Result<T, GbtError> {
            tok.and_then(|t| t.parse().ok()).ok_or(GbtError::Parse {
                line,
                msg: "bad number".into(),
            })
        }
        let (line, v) = keyed(&mut lines, "gbt")?;
        if v != ["1"] {
            return Err(GbtError::Parse {
                line,
                msg: "unsupported version".into(),
            });
        }
        let (line, v) = keyed(&mut lines, "n_features")?;
        let n_features = num(line, v.first())?;
        let (line, v) = keyed(&mut lines, "base_score")?;
        let base_score = num(line, v.first())?;
        let (line, v) = keyed(&mut lines, "config")?;
        let config = GbtConfig {
            n_rounds: num(line, v.first())?,
            learning_rate: num(line, v.get(1))?,
            max_depth: num(line, v.get(2))?,
            min_samples_leaf: num(line, v.get(3))?,
            subsample: num(line, v.get(4))?,
            seed: num(line, v.get(5))?,
        };
        let (line, v) = keyed(&mut lines, "trees")?;
        let n_trees: usize = num(line, v.first())?;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let (line, v) = keyed(&mut lines, "tree")?;
            let n_nodes: usize = num(line, v.first())?;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let (line, toks) = lines.next().ok_or(GbtError::Parse {
                    line: 0,
                    msg: "truncated tree".into(),
                })?;
                let line = *line;
                let node = match toks.first() {
                    Some(&"leaf") => Node::Leaf {
                        value: num(line, toks.get(1))?,
                    },
                    Some(&"split") => {
                        let feature: usize = num(line, toks.get(1))?;
                        let left: usize = num(line, toks.get(3))?;
                        let right: usize = num(line, toks.get(4))?;
                        if feature >= n_features || left >= n_nodes || right >= n_nodes {
                            return Err(GbtError::Parse {
                                line,
                                msg: "index out of range".into(),
                            });
                        }
                        Node::Split {
                            feature,
                            threshold: num(line, toks.get(2))?,
                            left,
                            right,
                        }
                    }
                    _ => {
                        return Err(GbtError::Parse {
                            line,
                            msg: "expected `leaf` or `split`".into(),
                        })
                    }
                };
                nodes.push(node);
            }
            trees.push(RegressionTree::from_nodes(nodes));
        }
        Ok(Self {
            base_score,
            trees,
            config,
            n_features,
        })
    }
}

type Line<'a> = (usize, Vec<&'a str>);

fn keyed<'a, 'b>(lines: &mut std::slice::Iter<'b, Line<'a>>, key: &str) -> Result<(usize, &'b [&'a str]), GbtError> {
    let (line, toks) = lines.next().ok_or_else(|| GbtError::Parse {
        line: 0,
        msg: format!("missing `{key}` line"),
    })?;
    if toks.first() != Some(&key) {
        return Err(GbtError::Parse {
            line: *line,
            msg: format!("expected `{key}`"),
        });
    }
    Ok((*line, &toks[1..]))
}

pub fn fit(x: &FeatureMatrix, y: &[f64], cfg: &GbtConfig) -> Result<Ensemble, GbtError> {
    fit_traced(x, y, cfg).map(|(e, _)| e)
}

/// Like [`fit`], also returning the mean squared training loss after
/// each round.
pub fn fit_traced(x: &FeatureMatrix, y: &[f64], cfg: &GbtConfig) -> Result<(Ensemble, Vec<f64>), GbtError> {
    cfg.validate()?;
    let n = y.len();
    if n == 0 || x.n_rows() == 0 {
        return Err(GbtError::Empty);
    }
    if x.n_rows() != n {
        return Err(GbtError::LengthMismatch {
            x_rows: x.n_rows(),
            y_len: n,
        });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(GbtError::NonFiniteTarget(i));
    }
    for (row, r) in x.rows().enumerate() {
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(GbtError::NonFiniteFeature { row, col });
        }
    }
    if n < 2 * cfg.min_samples_leaf {
        return Err(GbtError::TooFewRows {
            rows: n,
            min_leaf: cfg.min_samples_leaf,
        });
    }

    let presorted: Vec<Vec<usize>> = (0..x.n_cols())
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
            idx
        })
        .collect();
    let base_score = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base_score; n];
    let mut residuals: Vec<f64> = y.iter().map(|v| v - base_score).collect();
    let params = tree::TreeParams {
        max_depth: cfg.max_depth,
        min_samples_leaf: cfg.min_samples_leaf,
    };
    let n_sub = ((cfg.subsample * n as f64).round() as usize).clamp(2 * cfg.min_samples_leaf, n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut active = vec![true; n];
    let mut trees = Vec::with_capacity(cfg.n_rounds);
    let mut trace = Vec::with_capacity(cfg.n_rounds);

    for _ in 0..cfg.n_rounds {
        let sorted = if n_sub < n {
            active.iter_mut().for_each(|a| *a = false);
            for i in sample(&mut rng, n, n_sub) {
                active[i] = true;
            }
            presorted
                .iter()
                .map(|l| l.iter().copied().filter(|&i| active[i]).collect())
                .collect()
        } else {
            presorted.clone()
        };
        let t = tree::grow(x, &residuals, sorted, &params);
        for (i, r) in x.rows().enumerate() {
            pred[i] += cfg.learning_rate * t.predict_row(r);
            residuals[i] = y[i] - pred[i];
        }
        trace.push(residuals.iter().map(|r| r * r).sum::<f64>() / n as f64);
        trees.push(t);
    }
    Ok((
        Ensemble {
            base_score,
            trees,
            config: cfg.clone(),
            n_features: x.n_cols(),
        },
        trace,
    ))
}

/// One independent ensemble per output column, seeded `seed + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiEnsemble {
    pub models: [Ensemble; 3],
}

impl MultiEnsemble {
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<[f64; 3]>, GbtError> {
        let cols: Vec<Vec<f64>> = self.models.iter().map(|m| m.predict(x)).collect::<Result<_, _>>()?;
        Ok((0..x.n_rows()).map(|i| [cols[0][i], cols[1][i], cols[2][i]]).collect())
    }
}

pub fn fit_multi(x: &FeatureMatrix, y: &[[f64; 3]], cfg: &GbtConfig) -> Result<MultiEnsemble, GbtError> {
    let fitted: Vec<Ensemble> = (0..3usize)
        .into_par_iter()
        .map(|k| {
            let col: Vec<f64> = y.iter().map(|t| t[k]).collect();
            fit(x, &col, &cfg.with_seed(cfg.seed.wrapping_add(k as u64)))
        })
        .collect::<Result<_, _>>()?;
    let [a, b, c]: [Ensemble; 3] = fitted.try_into().expect("three outputs");
    Ok(MultiEnsemble { models: [a, b, c] })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> (FeatureMatrix, Vec<f64>) {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        (FeatureMatrix::from_column("x", &xs), xs)
    }

    fn mae(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(u, v)| (u - v).abs()).sum::<f64>() / a.len() as f64
    }

    #[test]
    fn constant_target() {
        let (x, _) = line(20);
        let e = fit(&x, &[2.5; 20], &GbtConfig::default()).unwrap();
        assert!(e.trees().iter().all(|t| t.nodes() == [Node::Leaf { value: 0.0 }]));
        assert!(e.predict(&x).unwrap().iter().all(|&p| p == 2.5));
    }

    #[test]
    fn identity_converges() {
        let (x, y) = line(100);
        let cfg = GbtConfig {
            n_rounds: 200,
            ..GbtConfig::default()
        };
        let e = fit(&x, &y, &cfg).unwrap();
        assert!(mae(&e.predict(&x).unwrap(), &y) <= 1e-2);
    }

    #[test]
    fn overfit_recovers_training_points() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.37).collect();
        let y: Vec<f64> = xs.iter().map(|v| v.sin() + 0.1 * v).collect();
        let x = FeatureMatrix::from_column("x", &xs);
        let cfg = GbtConfig {
            n_rounds: 500,
            learning_rate: 0.3,
            max_depth: 8,
            min_samples_leaf: 1,
            ..GbtConfig::default()
        };
        let e = fit(&x, &y, &cfg).unwrap();
        for (p, t) in e.predict(&x).unwrap().iter().zip(&y) {
            assert!((p - t).abs() < 1e-6);
        }
    }

    #[test]
    fn no_trees_gives_base_score() {
        let e = Ensemble {
            base_score: 1.25,
            trees: vec![],
            config: GbtConfig::default(),
            n_features: 1,
        };
        assert_eq!(
            e.predict(&FeatureMatrix::from_column("x", &[0.0, 9.0])).unwrap(),
            vec![1.25, 1.25]
        );
    }

    #[test]
    fn extrapolates_as_constant() {
        let (x, y) = line(100);
        let e = fit(&x, &y, &GbtConfig::default()).unwrap();
        let far = e
            .predict(&FeatureMatrix::from_column("x", &[5.0, 50.0, -3.0, -30.0]))
            .unwrap();
        assert_eq!(far[0], far[1]);
        assert_eq!(far[2], far[3]);
    }

    #[test]
    fn loss_is_non_increasing() {
        let xs: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = xs.iter().map(|v| (3.0 * v).sin() * v).collect();
        let x = FeatureMatrix::from_column("x", &xs);
        let (_, trace) = fit_traced(&x, &y, &GbtConfig::default()).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn deterministic_with_subsample() {
        let (x, y) = line(120);
        let cfg = GbtConfig {
            n_rounds: 50,
            subsample: 0.6,
            seed: 9,
            ..GbtConfig::default()
        };
        let a = fit(&x, &y, &cfg).unwrap();
        let b = fit(&x, &y, &cfg).unwrap();
        assert_eq!(a, b);
        let c = fit(&x, &y, &cfg.with_seed(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn multi_matches_single_fits() {
        let (x, y) = line(60);
        let ys: Vec<[f64; 3]> = y.iter().map(|&v| [v, v * v, -v]).collect();
        let cfg = GbtConfig {
            n_rounds: 30,
            subsample: 0.8,
            seed: 4,
            ..GbtConfig::default()
        };
        let m = fit_multi(&x, &ys, &cfg).unwrap();
        let sq: Vec<f64> = y.iter().map(|v| v * v).collect();
        assert_eq!(m.models[1], fit(&x, &sq, &cfg.with_seed(5)).unwrap());
        assert_eq!(m.models[0].config().seed, 4);
        assert_eq!(m.predict(&x).unwrap().len(), 60);
    }

    #[test]
    fn errors() {
        let (x, y) = line(20);
        let cfg = GbtConfig::default();
        assert_eq!(
            fit(&FeatureMatrix::from_column("x", &[]), &[], &cfg).unwrap_err(),
            GbtError::Empty
        );
        let mut bad = y.clone();
        bad[3] = f64::NAN;
        assert_eq!(fit(&x, &bad, &cfg).unwrap_err(), GbtError::NonFiniteTarget(3));
        assert_eq!(
            fit(&x, &y[..5], &cfg).unwrap_err(),
            GbtError::LengthMismatch { x_rows: 20, y_len: 5 }
        );
        let (x9, y9) = line(9);
        assert_eq!(
            fit(&x9, &y9, &cfg).unwrap_err(),
            GbtError::TooFewRows { rows: 9, min_leaf: 5 }
        );
        let bad_cfg = GbtConfig {
            learning_rate: 0.0,
            ..cfg.clone()
        };
        assert!(matches!(fit(&x, &y, &bad_cfg), Err(GbtError::InvalidConfig(_))));
        let e = fit(&x, &y, &cfg).unwrap();
        let two = FeatureMatrix::new(vec!["a".into(), "b".into()], vec![vec![0.0, 0.0]]).unwrap();
        assert_eq!(e.predict(&two).unwrap_err(), GbtError::Shape { expected: 1, got: 2 });
    }

    #[test]
    fn text_round_trip() {
        let (x, y) = line(40);
        let cfg = GbtConfig {
            n_rounds: 20,
            subsample: 0.7,
            seed: 3,
            ..GbtConfig::default()
        };
        let e = fit(&x, &y, &cfg).unwrap();
        let back = Ensemble::from_text(&e.to_text()).unwrap();
        assert_eq!(back, e);
        assert!(Ensemble::from_text("gbt 2\n").is_err());
        assert!(Ensemble::from_text(&e.to_text().replace("leaf", "leap")).is_err());
    }
}
