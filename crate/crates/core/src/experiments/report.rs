use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{CellKind, ComparativeReport, CurveTable, ExperimentConfig, ExperimentError, ExperimentReport};

pub const SHARED_CONFIG_NOTE: &str = "Every scheme is trained with the same GBT configuration.";

fn num(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:.3e}")
    } else {
        format!("{v:.4}")
    }
}

fn config_line(c: &ExperimentConfig) -> String {
    let g = &c.gbt;
    format!(
        "Seed {}, train fraction {}. GBT: {} rounds, learning rate {}, max depth {}, min leaf {}, subsample {}.",
        c.seed, c.train_fraction, g.n_rounds, g.learning_rate, g.max_depth, g.min_samples_leaf, g.subsample
    )
}

/// One row per cell: `model,data,kind,mae_x,mae_y,mae_theta`.
pub fn matrix_csv(r: &ExperimentReport) -> String {
    let mut s = String::from("model,data,kind,mae_x,mae_y,mae_theta\n");
    for c in &r.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            c.model,
            c.data,
            c.kind.as_str(),
            c.mae[0],
            c.mae[1],
            c.mae[2]
        );
    }
    s
}

/// Model-by-data tables per output with self cells in bold, then the
/// per-kind means.
pub fn matrix_markdown(r: &ExperimentReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Prediction matrix: `{}` scheme, {} data\n", r.scheme, r.source);
    let _ = writeln!(s, "{}\n{}\n", config_line(&r.config), SHARED_CONFIG_NOTE);
    let data = r.vehicles();
    for (k, label) in ["X [m]", "Y [m]", "θ [rad]"].iter().enumerate() {
        let _ = writeln!(s, "## MAE {label}\n");
        let _ = writeln!(s, "| model \\ data | {} |", data.join(" | "));
        let _ = writeln!(s, "|---|{}", "---|".repeat(data.len()));
        for m in r.models() {
            let mut row = format!("| {m} |");
            for d in &data {
                let cell = match r.cell(&m, d) {
                    Some(c) if c.kind == CellKind::SelfPrediction => format!(" **{}** |", num(c.mae[k])),
                    Some(c) => format!(" {} |", num(c.mae[k])),
                    None => " |".to_string(),
                };
                row.push_str(&cell);
            }
            let _ = writeln!(s, "{row}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "## Mean MAE by prediction kind\n");
    let _ = writeln!(s, "| kind | X [m] | Y [m] | θ [rad] |\n|---|---|---|---|");
    for kind in [CellKind::SelfPrediction, CellKind::Cross, CellKind::Shared] {
        let m = r.summary.get(kind);
        let _ = writeln!(s, "| {} | {} | {} | {} |", kind.as_str(), num(m[0]), num(m[1]), num(m[2]));
    }
    s
}

/// `fraction,mae_x,mae_y,mae_theta`, one row per fraction.
pub fn curve_csv(c: &CurveTable) -> String {
    let mut s = String::from("fraction,mae_x,mae_y,mae_theta\n");
    for p in &c.points {
        let _ = writeln!(s, "{},{},{},{}", p.fraction, p.mae[0], p.mae[1], p.mae[2]);
    }
    s
}

/// Scheme rows by training-source columns.
pub fn comparative_csv(r: &ComparativeReport) -> String {
    let mut s = format!("scheme,{}\n", r.training.join(","));
    for (scheme, v) in &r.rows {
        let vals: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "{scheme},{}", vals.join(","));
    }
    s
}

pub fn comparative_markdown(r: &ComparativeReport, cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# MAE of {} on the `{}` test set, {} data\n", r.output, r.target, r.source);
    let _ = writeln!(s, "{}\n{}\n", config_line(cfg), SHARED_CONFIG_NOTE);
    let _ = writeln!(s, "| scheme | {} |", r.training.join(" | "));
    let _ = writeln!(s, "|---|{}", "---|".repeat(r.training.len()));
    for (scheme, v) in &r.rows {
        let vals: Vec<String> = v.iter().map(|x| num(*x)).collect();
        let _ = writeln!(s, "| {scheme} | {} |", vals.join(" | "));
    }
    s
}

fn write(path: PathBuf, body: &str) -> Result<PathBuf, ExperimentError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(&path, body)?;
    Ok(path)
}

/// Writes `<out>/<source>/<scheme>/matrix.{csv,md}`.
pub fn emit_report(r: &ExperimentReport, out: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let dir = out.join(r.source.as_str()).join(r.scheme.to_string());
    Ok(vec![
        write(dir.join("matrix.csv"), &matrix_csv(r))?,
        write(dir.join("matrix.md"), &matrix_markdown(r))?,
    ])
}

/// Writes `<out>/<source>/<scheme>/curves/<vehicle>.csv`.
pub fn write_curve(c: &CurveTable, out: &Path) -> Result<PathBuf, ExperimentError> {
    let path = out
        .join(c.source.as_str())
        .join(c.scheme.to_string())
        .join("curves")
        .join(format!("{}.csv", c.vehicle));
    write(path, &curve_csv(c))
}

/// Writes `<out>/<source>/comparative.{csv,md}`.
pub fn write_comparative(r: &ComparativeReport, cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let dir = out.join(r.source.as_str());
    Ok(vec![
        write(dir.join("comparative.csv"), &comparative_csv(r))?,
        write(dir.join("comparative.md"), &comparative_markdown(r, cfg))?,
    ])
}

#[cfg(test)]
mod tests {
    use super::super::tests::{fleet, quick_cfg};
    use super::super::{learning_curve, run_matrix};
    use super::*;
    use crate::features::Scheme;

    #[test]
    fn matrix_files_are_stable() {
        let r = run_matrix(Scheme::Baseline, &fleet(), &quick_cfg()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_report(&r, dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths[0].ends_with("kinematic/baseline/matrix.csv"));
        let first: Vec<Vec<u8>> = paths.iter().map(|p| fs::read(p).unwrap()).collect();
        emit_report(&r, dir.path()).unwrap();
        let second: Vec<Vec<u8>> = paths.iter().map(|p| fs::read(p).unwrap()).collect();
        assert_eq!(first, second);
        let csv = String::from_utf8(first[0].clone()).unwrap();
        assert_eq!(csv.lines().count(), 13);
        assert!(csv.starts_with("model,data,kind,mae_x,mae_y,mae_theta\n"));
    }

    #[test]
    fn markdown_bolds_self_cells() {
        let r = run_matrix(Scheme::Baseline, &fleet(), &quick_cfg()).unwrap();
        let md = matrix_markdown(&r);
        assert_eq!(md.matches("**").count(), 2 * 3 * 3);
        assert!(md.contains(SHARED_CONFIG_NOTE));
        let small_row = md.lines().find(|l| l.starts_with("| small |")).unwrap();
        assert!(small_row.split('|').nth(2).unwrap().contains("**"));
    }

    #[test]
    fn curve_layout() {
        let c = learning_curve(Scheme::Pi, &fleet()[2], &[0.5, 1.0], 1, &quick_cfg()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = write_curve(&c, dir.path()).unwrap();
        assert!(p.ends_with("kinematic/pi/curves/large.csv"));
        let body = fs::read_to_string(p).unwrap();
        assert_eq!(body.lines().next().unwrap(), "fraction,mae_x,mae_y,mae_theta");
        assert_eq!(body.lines().count(), 3);
    }
}
