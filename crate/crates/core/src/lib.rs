//! Dimensionless transfer learning for car-like vehicles.

pub mod dataset;
pub mod dimension;
pub mod experiments;
pub mod features;
pub mod gbt;
pub mod simulator;
