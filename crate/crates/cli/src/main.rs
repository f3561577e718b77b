mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{parse_list, RunConfig};
use dimtransfer::dataset::{load, save, Dataset, Source};
use dimtransfer::dimension::{
    dynamic_variables, kinematic_variables, DimensionMatrix, PiBasis, DYNAMIC_REPEATED, KINEMATIC_REPEATED,
};
use dimtransfer::experiments::{
    comparative_study, emit_report, generate_grid, learning_curve, run_matrix, write_comparative, write_curve, Output, MERGED,
};
use dimtransfer::features::Scheme;

/// Dimensionless transfer learning for car-like vehicles.
#[derive(Parser, Debug)]
#[command(name = "dimtransfer", version, about, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the input grid for every vehicle and write one CSV each.
    Gen(Common),
    /// Print the π basis of a variable set.
    Pi(PiArgs),
    /// Self, cross and shared prediction matrix for one scheme.
    Matrix(MatrixArgs),
    /// Self-prediction MAE against training-set size for one vehicle.
    Curve(CurveArgs),
    /// MAE of one output on one vehicle for every scheme and training source.
    Compare(CompareArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Sectioned `key = value` file; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Record source: kinematic or surrogate.
    #[arg(long)]
    source: Option<Source>,
    /// Seed for noise, splits and boosting.
    #[arg(long)]
    seed: Option<u64>,
    /// Report directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Dataset directory; files live at `<DIR>/<source>/<vehicle>.csv`.
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Vehicle file with lines `name, l, Nf, Nr`.
    #[arg(long, value_name = "FILE")]
    vehicles: Option<PathBuf>,
    /// Boosting rounds.
    #[arg(long)]
    rounds: Option<usize>,
    /// Maximum tree depth.
    #[arg(long)]
    depth: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Args, Debug)]
struct PiArgs {
    /// Variable set.
    #[arg(long, value_enum, default_value_t = VariableSet::Kinematic)]
    set: VariableSet,
    /// Comma-separated repeated variables; omit for the set's default
    /// (custom sets fall back to a nullspace basis).
    #[arg(long, value_name = "NAMES")]
    repeated: Option<String>,
    /// File of `name = "M^p L^q T^r"` lines for `--set custom`.
    #[arg(long, value_name = "FILE")]
    variables: Option<PathBuf>,
    /// Config file whose `[variables]` section defines a custom set.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariableSet {
    Kinematic,
    Dynamic,
    Custom,
}

#[derive(Args, Debug)]
struct MatrixArgs {
    #[command(flatten)]
    common: Common,
    /// Preprocessing scheme.
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Generate missing datasets instead of failing.
    #[arg(long)]
    gen: bool,
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Vehicle whose self-prediction is measured.
    #[arg(long)]
    vehicle: Option<String>,
    /// Comma-separated training fractions in (0, 1].
    #[arg(long, value_name = "LIST")]
    fractions: Option<String>,
    /// Subsamples averaged per fraction.
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    gen: bool,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Vehicle whose test set is scored.
    #[arg(long)]
    target: Option<String>,
    /// Predicted output: X, Y or theta.
    #[arg(long)]
    output: Option<Output>,
    #[arg(long)]
    gen: bool,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Gen(c) => cmd_gen(&resolve(&c)?),
        Command::Pi(p) => cmd_pi(&p),
        Command::Matrix(m) => {
            let mut cfg = resolve(&m.common)?;
            if let Some(s) = m.scheme {
                cfg.scheme = s;
            }
            cmd_matrix(&cfg, m.gen)
        }
        Command::Curve(c) => {
            let mut cfg = resolve(&c.common)?;
            if let Some(s) = c.scheme {
                cfg.scheme = s;
            }
            if let Some(v) = c.vehicle {
                cfg.target = v;
            }
            if let Some(f) = &c.fractions {
                cfg.fractions = parse_list("--fractions", f).map_err(Failure::Usage)?;
            }
            if let Some(r) = c.repeats {
                cfg.repeats = r;
            }
            cmd_curve(&cfg, c.gen)
        }
        Command::Compare(c) => {
            let mut cfg = resolve(&c.common)?;
            if let Some(t) = c.target {
                cfg.target = t;
            }
            if let Some(o) = c.output {
                cfg.output = o;
            }
            cmd_compare(&cfg, c.gen)
        }
    }
}

fn read_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    RunConfig::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn resolve(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => read_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &c.vehicles {
        let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
        cfg.vehicles = dimtransfer::dataset::parse_vehicle_lines(text.lines())
            .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
    }
    if let Some(s) = c.source {
        cfg.source = s;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(d) = &c.data {
        cfg.data = d.clone();
    }
    if let Some(r) = c.rounds {
        cfg.gbt.n_rounds = r;
    }
    if let Some(d) = c.depth {
        cfg.gbt.max_depth = d;
    }
    if let Some(lr) = c.lr {
        cfg.gbt.learning_rate = lr;
    }
    if cfg.vehicles.is_empty() {
        return Err(Failure::Usage("no vehicles configured".into()));
    }
    cfg.gbt.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn dataset_path(cfg: &RunConfig, vehicle: &str) -> PathBuf {
    cfg.data.join(cfg.source.as_str()).join(format!("{vehicle}.csv"))
}

fn cmd_gen(cfg: &RunConfig) -> Result<(), Failure> {
    let datasets = generate_grid(cfg.source, &cfg.vehicles, &cfg.grid_spec(), cfg.seed).map_err(runtime)?;
    for d in &datasets {
        let name = &d.records[0].vehicle.name;
        let path = dataset_path(cfg, name);
        save(d, &path).map_err(runtime)?;
        println!("{name}: {} records -> {}", d.len(), path.display());
    }
    Ok(())
}

/// Loads every vehicle's dataset, or simulates them all when any is missing
/// and `generate` is set.
fn datasets(cfg: &RunConfig, generate: bool) -> Result<Vec<Dataset>, Failure> {
    let paths: Vec<PathBuf> = cfg.vehicles.iter().map(|v| dataset_path(cfg, &v.name)).collect();
    if let Some(missing) = paths.iter().find(|p| !p.exists()) {
        if !generate {
            return Err(Failure::Runtime(format!(
                "missing dataset {}; run `dimtransfer gen` first or pass --gen",
                missing.display()
            )));
        }
        cmd_gen(cfg)?;
    }
    let mut out = Vec::with_capacity(paths.len());
    for (p, v) in paths.iter().zip(&cfg.vehicles) {
        let d = load(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
        if d.source != cfg.source || d.vehicles() != [v.name.clone()] {
            return Err(Failure::Runtime(format!(
                "{} does not hold {} records of vehicle `{}`",
                p.display(),
                cfg.source,
                v.name
            )));
        }
        out.push(d);
    }
    Ok(out)
}

fn cmd_matrix(cfg: &RunConfig, generate: bool) -> Result<(), Failure> {
    let data = datasets(cfg, generate)?;
    let report = run_matrix(cfg.scheme, &data, &cfg.experiment()).map_err(runtime)?;
    let audited = report.leakage_audit().map_err(runtime)?;
    println!(
        "scheme {} on {} data, {audited} cells, leakage audit passed",
        cfg.scheme, cfg.source
    );
    println!("{:<8} {:>12} {:>12} {:>12}", "kind", "mae_x", "mae_y", "mae_theta");
    for (kind, m) in [
        ("self", report.summary.self_mean),
        ("cross", report.summary.cross_mean),
        ("shared", report.summary.shared_mean),
    ] {
        println!("{kind:<8} {:>12.6} {:>12.6} {:>12.6}", m[0], m[1], m[2]);
    }
    for p in emit_report(&report, &cfg.out).map_err(runtime)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_curve(cfg: &RunConfig, generate: bool) -> Result<(), Failure> {
    let data = datasets(cfg, generate)?;
    let d = data
        .iter()
        .find(|d| d.vehicles() == [cfg.target.clone()])
        .ok_or_else(|| Failure::Usage(format!("unknown vehicle `{}`", cfg.target)))?;
    let table = learning_curve(cfg.scheme, d, &cfg.fractions, cfg.repeats, &cfg.experiment()).map_err(runtime)?;
    println!(
        "{:>8} {:>8} {:>12} {:>12} {:>12}",
        "fraction", "rows", "mae_x", "mae_y", "mae_theta"
    );
    for p in &table.points {
        println!(
            "{:>8} {:>8} {:>12.6} {:>12.6} {:>12.6}",
            p.fraction, p.train_rows, p.mae[0], p.mae[1], p.mae[2]
        );
    }
    println!("wrote {}", write_curve(&table, &cfg.out).map_err(runtime)?.display());
    Ok(())
}

fn cmd_compare(cfg: &RunConfig, generate: bool) -> Result<(), Failure> {
    let data = datasets(cfg, generate)?;
    let exp = cfg.experiment();
    let r = comparative_study(&data, &Scheme::COMPARATIVE, &cfg.target, cfg.output, &exp).map_err(runtime)?;
    println!("MAE of {} on `{}` test data by training source", r.output, r.target);
    print!("{:<12}", "scheme");
    for t in &r.training {
        print!(" {t:>12}");
    }
    println!();
    for (s, v) in &r.rows {
        print!("{:<12}", s.to_string());
        for x in v {
            print!(" {x:>12.6}");
        }
        println!();
    }
    debug_assert_eq!(r.training.last().map(String::as_str), Some(MERGED));
    for p in write_comparative(&r, &exp, &cfg.out).map_err(runtime)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn cmd_pi(args: &PiArgs) -> Result<(), Failure> {
    let (vars, default_repeated): (_, Option<Vec<String>>) = match args.set {
        VariableSet::Kinematic => (kinematic_variables(), Some(KINEMATIC_REPEATED.map(String::from).to_vec())),
        VariableSet::Dynamic => (dynamic_variables(), Some(DYNAMIC_REPEATED.map(String::from).to_vec())),
        VariableSet::Custom => {
            let vars = if let Some(p) = &args.variables {
                let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
                dimtransfer::dimension::parse_variable_lines(text.lines()).map_err(|e| Failure::Usage(e.to_string()))?
            } else if let Some(p) = &args.config {
                read_config(p)?
                    .variables
                    .ok_or_else(|| Failure::Usage(format!("{} has no [variables] section", p.display())))?
            } else {
                return Err(Failure::Usage("--set custom needs --variables or --config".into()));
            };
            (vars, None)
        }
    };
    let matrix = DimensionMatrix::new(vars).map_err(|e| Failure::Usage(e.to_string()))?;
    let repeated: Option<Vec<String>> = match &args.repeated {
        Some(list) => Some(
            list.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
        ),
        None => default_repeated,
    };
    let basis: PiBasis = match &repeated {
        Some(names) => {
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            matrix
                .repeated_vars_pi_basis(&refs)
                .map_err(|e| Failure::Usage(e.to_string()))?
        }
        None => matrix.nullspace_pi_basis(),
    };
    let names: Vec<&str> = matrix.columns().iter().map(|v| v.name.as_str()).collect();
    println!("variables: {}", names.join(", "));
    match &repeated {
        Some(r) => println!("repeated: {}", r.join(", ")),
        None => println!("repeated: none (nullspace basis)"),
    }
    for (i, g) in basis.groups().iter().enumerate() {
        println!("pi_{} = {}", i + 1, g.monomial());
    }
    println!("N - P = {} - {} = {}", names.len(), matrix.rank(), matrix.buckingham_count());
    Ok(())
}
