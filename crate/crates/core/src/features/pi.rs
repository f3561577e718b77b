use std::sync::OnceLock;

use super::FeatureError;
use crate::dataset::{ManeuverRecord, Source};
use crate::dimension::{dynamic_variables, kinematic_variables, DimensionMatrix, PiBasis, DYNAMIC_REPEATED, KINEMATIC_REPEATED};
use crate::simulator::FinalPose;

/// Magnitude cap for `g μ l / (v_i² tan δ)`, which diverges as `δ → 0`.
pub const DEFAULT_PI10_CAP: f64 = 1e3;

type Accessor = fn(&ManeuverRecord) -> f64;

struct PiSpace {
    basis: PiBasis,
    accessors: Vec<Accessor>,
    inputs: Vec<usize>,
    outputs: [usize; 3],
    output_vars: [usize; 3],
}

impl PiSpace {
    fn build(vars: Vec<crate::dimension::VariableDecl>, repeated: &[&str], input_anchors: &[&str], invert: &[&str]) -> Self {
        let m = DimensionMatrix::new(vars).expect("built-in variable sets are valid");
        let mut basis = m.repeated_vars_pi_basis(repeated).expect("built-in repeated sets are valid");
        for name in invert {
            let idx = basis.group_by_anchor(name).expect("anchor exists");
            basis = basis.with_inverted_group(idx).expect("index exists");
        }
        let accessors = basis.variables().iter().map(|v| accessor(&v.name)).collect();
        let inputs = input_anchors
            .iter()
            .map(|a| basis.group_by_anchor(a).expect("anchor exists"))
            .collect();
        let outputs = ["X", "Y", "theta"].map(|a| basis.group_by_anchor(a).expect("output anchor exists"));
        let output_vars = ["X", "Y", "theta"].map(|a| basis.variable_index(a).expect("output declared"));
        Self {
            basis,
            accessors,
            inputs,
            outputs,
            output_vars,
        }
    }

    fn values(&self, r: &ManeuverRecord) -> Vec<f64> {
        self.accessors.iter().map(|f| f(r)).collect()
    }
}

fn accessor(name: &str) -> Accessor {
    match name {
        "X" => |r| r.outcome.x,
        "Y" => |r| r.outcome.y,
        "theta" => |r| r.outcome.theta,
        "v_i" => |r| r.inputs.v_i,
        "a" => |r| r.inputs.a,
        "delta" => |r| r.inputs.delta,
        "mu" => |r| r.inputs.mu,
        "g" => |r| r.inputs.g,
        "l" => |r| r.vehicle.wheelbase,
        "N_f" => |r| r.vehicle.front_normal,
        "N_r" => |r| r.vehicle.rear_normal,
        other => panic!("no record field for variable `{other}`"),
    }
}

fn space(source: Source) -> &'static PiSpace {
    static KINEMATIC: OnceLock<PiSpace> = OnceLock::new();
    static DYNAMIC: OnceLock<PiSpace> = OnceLock::new();
    match source {
        Source::Kinematic => {
            KINEMATIC.get_or_init(|| PiSpace::build(kinematic_variables(), &KINEMATIC_REPEATED, &["a", "delta"], &[]))
        }
        Source::Surrogate => DYNAMIC.get_or_init(|| {
            PiSpace::build(
                dynamic_variables(),
                &DYNAMIC_REPEATED,
                &["a", "delta", "N_r", "mu", "g"],
                &["N_r"],
            )
        }),
    }
}

/// The π basis behind a record source, with the `N_f/N_r` orientation for
/// surrogate records.
pub fn pi_basis(source: Source) -> &'static PiBasis {
    &space(source).basis
}

pub(super) fn input_columns(source: Source, augmented: bool, fillers: bool) -> Vec<String> {
    let s = space(source);
    let mut cols: Vec<String> = s.inputs.iter().map(|&i| s.basis.groups()[i].monomial()).collect();
    if augmented {
        match source {
            Source::Kinematic => cols.push("v_i^2 tan(delta)/(a l)".into()),
            Source::Surrogate => {
                cols.push("N_r mu g/((N_f+N_r)|a|)".into());
                cols.push("g mu l/(v_i^2 tan(delta))".into());
            }
        }
    }
    if fillers {
        cols.push("v_i".into());
        cols.push("l".into());
    }
    cols
}

/// Input π groups: `[al/v_i², δ]` for kinematic records and
/// `[al/v_i², δ, N_f/N_r, μ, gl/v_i²]` for surrogate records.
pub fn pi_features(r: &ManeuverRecord) -> Result<Vec<f64>, FeatureError> {
    let s = space(r.source);
    let values = s.values(r);
    s.inputs
        .iter()
        .map(|&i| s.basis.evaluate_group(i, &values).map_err(FeatureError::from))
        .collect()
}

/// π inputs plus handcrafted ratios. Kinematic: `v_i² tan δ / (a l)`.
/// Surrogate: `N_r μ g / ((N_f+N_r)|a|)` and `g μ l / (v_i² tan δ)`, the
/// latter clamped to `±cap`.
pub fn pi_augmented_features(r: &ManeuverRecord, cap: f64) -> Result<Vec<f64>, FeatureError> {
    let mut f = pi_features(r)?;
    let m = &r.inputs;
    let v = &r.vehicle;
    if m.a == 0.0 {
        return Err(FeatureError::ZeroAcceleration);
    }
    match r.source {
        Source::Kinematic => f.push(m.v_i * m.v_i * m.delta.tan() / (m.a * v.wheelbase)),
        Source::Surrogate => {
            f.push(v.rear_normal * m.mu * m.g / ((v.front_normal + v.rear_normal) * m.a.abs()));
            let tan = m.delta.tan();
            let raw = if tan == 0.0 {
                cap
            } else {
                m.g * m.mu * v.wheelbase / (m.v_i * m.v_i * tan)
            };
            f.push(raw.clamp(-cap, cap));
        }
    }
    Ok(f)
}

/// π inputs plus the dimensional fillers `v_i` and `l`.
pub fn pi_fillers_features(r: &ManeuverRecord) -> Result<Vec<f64>, FeatureError> {
    let mut f = pi_features(r)?;
    f.push(r.inputs.v_i);
    f.push(r.vehicle.wheelbase);
    Ok(f)
}

/// Output π groups `[X/l, Y/l, θ]`.
pub fn pi_targets(r: &ManeuverRecord) -> Result<[f64; 3], FeatureError> {
    let s = space(r.source);
    let values = s.values(r);
    let mut out = [0.0; 3];
    for (o, &i) in out.iter_mut().zip(&s.outputs) {
        *o = s.basis.evaluate_group(i, &values)?;
    }
    Ok(out)
}

/// Solves the output groups for `X, Y, θ` using the inputs of `r`.
pub fn pi_inverse(prediction: [f64; 3], r: &ManeuverRecord) -> Result<FinalPose, FeatureError> {
    let s = space(r.source);
    let values = s.values(r);
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[k] = s.basis.solve_group(s.outputs[k], prediction[k], s.output_vars[k], &values)?;
    }
    Ok(FinalPose::from_array(out))
}
