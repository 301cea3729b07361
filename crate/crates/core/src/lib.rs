//! Simulation core for coordinated spacecraft-manipulator planning: rotation
//! algebra, free-floating dynamics, the dual-agent environment and the
//! model-based expert policies.

pub mod dynamics;
pub mod env;
pub mod geometry;
pub mod priors;
pub mod rng;
