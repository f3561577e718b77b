//! Variable sets of the braking case study.

use super::{DimensionVector as D, Role, VariableDecl};

pub const KINEMATIC_REPEATED: [&str; 2] = ["l", "v_i"];
pub const DYNAMIC_REPEATED: [&str; 3] = ["l", "v_i", "N_f"];

/// Final pose as a function of initial speed, deceleration, steering and
/// wheelbase.
pub fn kinematic_variables() -> Vec<VariableDecl> {
    vec![
        VariableDecl::new("X", D::length(), Role::Output),
        VariableDecl::new("Y", D::length(), Role::Output),
        VariableDecl::new("theta", D::dimensionless(), Role::Output),
        VariableDecl::new("v_i", D::velocity(), Role::RepeatedCandidate),
        VariableDecl::new("a", D::acceleration(), Role::Input),
        VariableDecl::new("delta", D::dimensionless(), Role::Input),
        VariableDecl::new("l", D::length(), Role::RepeatedCandidate),
    ]
}

/// The friction-aware set: adds μ, g and the static axle loads.
pub fn dynamic_variables() -> Vec<VariableDecl> {
    vec![
        VariableDecl::new("X", D::length(), Role::Output),
        VariableDecl::new("Y", D::length(), Role::Output),
        VariableDecl::new("theta", D::dimensionless(), Role::Output),
        VariableDecl::new("mu", D::dimensionless(), Role::Input),
        VariableDecl::new("v_i", D::velocity(), Role::RepeatedCandidate),
        VariableDecl::new("g", D::acceleration(), Role::Input),
        VariableDecl::new("a", D::acceleration(), Role::Input),
        VariableDecl::new("delta", D::dimensionless(), Role::Input),
        VariableDecl::new("N_f", D::force(), Role::RepeatedCandidate),
        VariableDecl::new("N_r", D::force(), Role::Input),
        VariableDecl::new("l", D::length(), Role::RepeatedCandidate),
    ]
}
