//! Coupled spacecraft-manipulator dynamics.
//!
//! The rigid base carries a serial 6-joint arm on a fixed mount. Joint motion
//! is prescribed by velocity commands; the base responds through angular
//! momentum exchange (see [`momentum`]) and translates so the system CoM stays
//! put.

mod kinematics;
pub mod momentum;
mod model;
mod step;

pub use kinematics::{fixed_base_kinematics, Jacobians, Kinematics};
pub use model::{
    hex_digest, BodyParams, CommandInput, JointVec, LinkParams, ModelError, SystemModel, SystemState,
    DEFAULT_MODEL_TOML, NUM_JOINTS,
};
pub use momentum::{BodyVelocities, MomentumMaps};
pub use step::{angular_momentum, reaction_torque_probe, step, DynamicsError};
