use dimtransfer::dataset::{load, save, split, Axis, GridSpec, Source};
use dimtransfer::experiments::{
    comparative_study, emit_report, generate_grid, learning_curve, mae, run_matrix, ExperimentConfig, Output, TrainedModel,
};
use dimtransfer::features::{Pipeline, Scheme};
use dimtransfer::gbt::{fit_multi, GbtConfig};
use dimtransfer::simulator::VehicleSpec;

fn grid() -> GridSpec {
    GridSpec {
        v_i: Axis::new(0.5, 0.5, 6),
        a: Axis::new(-0.981, -0.981, 5),
        delta: Axis::new(0.0, 0.1, 4),
        mu: vec![0.0],
    }
}

fn cfg() -> ExperimentConfig {
    let mut c = ExperimentConfig::new(9);
    c.gbt.n_rounds = 60;
    c
}

#[test]
fn pi_pipeline_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate_grid(Source::Kinematic, &VehicleSpec::registry(), &grid(), 9).unwrap();
    let path = dir.path().join("large.csv");
    save(&data[2], &path).unwrap();
    let large = load(&path).unwrap();
    assert_eq!(large, data[2]);

    let (train, test) = split(&large, 0.8, 9).unwrap();
    let pipe = Pipeline::fit(Scheme::Pi, &train.records).unwrap();
    let model = fit_multi(
        &pipe.inputs(&train.records).unwrap(),
        &pipe.targets(&train.records).unwrap(),
        &GbtConfig::default(),
    )
    .unwrap();
    let pred = model.predict(&pipe.inputs(&test.records).unwrap()).unwrap();
    let poses: Vec<_> = pred
        .iter()
        .zip(&test.records)
        .map(|(p, r)| pipe.inverse_targets(*p, r).unwrap())
        .collect();
    let actual: Vec<_> = test.records.iter().map(|r| r.outcome).collect();
    let err = mae(&actual, &poses).unwrap();
    // outputs span metres and radians; the fit should be far inside that
    assert!(err.iter().all(|e| *e < 0.5), "{err:?}");

    let direct = TrainedModel::train(Scheme::Pi, &train.records, &ExperimentConfig::new(9))
        .unwrap()
        .evaluate(&test.records)
        .unwrap();
    assert_eq!(direct, err);
}

#[test]
fn experiment_stack_is_deterministic() {
    let data = generate_grid(Source::Kinematic, &VehicleSpec::registry(), &grid(), 9).unwrap();
    let a = run_matrix(Scheme::PiAugmented, &data, &cfg()).unwrap();
    let b = run_matrix(Scheme::PiAugmented, &data, &cfg()).unwrap();
    assert_eq!(a.leakage_audit().unwrap(), 12);
    assert_eq!(a.summary, b.summary);

    let dir = tempfile::tempdir().unwrap();
    let first: Vec<String> = emit_report(&a, dir.path())
        .unwrap()
        .iter()
        .map(|p| std::fs::read_to_string(p).unwrap())
        .collect();
    let second: Vec<String> = emit_report(&b, dir.path())
        .unwrap()
        .iter()
        .map(|p| std::fs::read_to_string(p).unwrap())
        .collect();
    assert_eq!(first, second);

    let curve = learning_curve(Scheme::Pi, &data[0], &[0.5, 1.0], 2, &cfg()).unwrap();
    assert_eq!(curve.points.len(), 2);
    assert!(curve.points[0].train_rows < curve.points[1].train_rows);

    let cmp = comparative_study(&data, &[Scheme::Baseline, Scheme::Pi], "long", Output::Theta, &cfg()).unwrap();
    assert_eq!(cmp.training.len(), 4);
    let own = a.cell("long", "long");
    assert!(own.is_some());
}

#[test]
fn surrogate_grid_generates_noisy_records() {
    let g = GridSpec {
        v_i: Axis::new(1.0, 1.0, 2),
        a: Axis::new(-1.0, -1.0, 2),
        delta: Axis::new(0.0, 0.3, 2),
        mu: vec![0.3, 0.9],
    };
    let d = generate_grid(Source::Surrogate, &[VehicleSpec::small()], &g, 2).unwrap();
    assert_eq!(d[0].len(), 16);
    assert!(d[0]
        .records
        .iter()
        .all(|r| r.source == Source::Surrogate && r.inputs.mu > 0.0));
    let again = generate_grid(Source::Surrogate, &[VehicleSpec::small()], &g, 2).unwrap();
    assert_eq!(d, again);
    let other = generate_grid(Source::Surrogate, &[VehicleSpec::small()], &g, 3).unwrap();
    assert_ne!(d, other);
}
