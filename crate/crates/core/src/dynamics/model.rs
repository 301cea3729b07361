use nalgebra::{Matrix3, UnitQuaternion, Vector6};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::path::Path;

use crate::geometry::{Mat3, Pose, Vec3};

pub const NUM_JOINTS: usize = 6;
pub type JointVec = Vector6<f64>;

/// Parameter set shipped with the crate (UR5 arm on a 100 kg cube).
pub const DEFAULT_MODEL_TOML: &str = include_str!("../../data/ur5_on_cube.toml");
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("cannot read model file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed model file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unsupported model format_version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("invalid model field `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodyParams {
    pub mass: f64,
    /// About the body CoM, expressed in the body frame.
    pub inertia: Mat3,
    /// Body frame origin to CoM, body frame.
    pub com_offset: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    pub name: String,
    /// Joint frame relative to the parent link frame.
    pub origin: Pose,
    /// Unit joint axis in the joint frame.
    pub axis: Vec3,
    pub body: BodyParams,
    pub angle_limit: f64,
    pub velocity_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub name: String,
    pub base: BodyParams,
    pub mount: Pose,
    pub links: Vec<LinkParams>,
    pub tool: Pose,
    pub base_torque_limit: f64,
    /// Hex SHA-256 of the source text; empty for programmatic models.
    pub checksum: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBody {
    mass: f64,
    inertia: [f64; 6],
    com_offset: [f64; 3],
    torque_limit: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFrame {
    xyz: [f64; 3],
    rpy: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    name: String,
    origin_xyz: [f64; 3],
    origin_rpy: [f64; 3],
    axis: [f64; 3],
    mass: f64,
    com: [f64; 3],
    inertia: [f64; 6],
    angle_limit: f64,
    velocity_limit: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    format_version: u32,
    name: String,
    base: RawBody,
    mount: RawFrame,
    links: Vec<RawLink>,
    tool: RawFrame,
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ModelError {
    ModelError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

fn inertia_matrix(field: &str, v: [f64; 6]) -> Result<Mat3, ModelError> {
    let [ixx, iyy, izz, ixy, ixz, iyz] = v;
    let m = Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz);
    if m.iter().any(|x| !x.is_finite()) || m.cholesky().is_none() {
        return Err(invalid(field, "inertia must be symmetric positive definite"));
    }
    Ok(m)
}

fn body(field: &str, mass: f64, inertia: [f64; 6], com: [f64; 3]) -> Result<BodyParams, ModelError> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(invalid(format!("{field}.mass"), "must be positive"));
    }
    Ok(BodyParams {
        mass,
        inertia: inertia_matrix(&format!("{field}.inertia"), inertia)?,
        com_offset: Vec3::from(com),
    })
}

impl SystemModel {
    pub fn from_toml_str(text: &str) -> Result<Self, ModelError> {
        let raw: RawModel = toml::from_str(text)?;
        if raw.format_version != FORMAT_VERSION {
            return Err(ModelError::Version(raw.format_version));
        }
        if raw.links.len() != NUM_JOINTS {
            return Err(invalid(
                "links",
                format!("expected {NUM_JOINTS} revolute links, found {}", raw.links.len()),
            ));
        }
        if !(raw.base.torque_limit > 0.0) {
            return Err(invalid("base.torque_limit", "must be positive"));
        }
        let base = body("base", raw.base.mass, raw.base.inertia, raw.base.com_offset)?;
        let mut links = Vec::with_capacity(NUM_JOINTS);
        for (i, l) in raw.links.into_iter().enumerate() {
            let field = format!("links[{i}]");
            let axis = Vec3::from(l.axis);
            if (axis.norm() - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("{field}.axis"), "must be a unit vector"));
            }
            if !(l.angle_limit > 0.0) || !(l.velocity_limit > 0.0) {
                return Err(invalid(field, "limits must be positive"));
            }
            links.push(LinkParams {
                body: body(&field, l.mass, l.inertia, l.com)?,
                name: l.name,
                origin: Pose::from_xyz_rpy(l.origin_xyz, l.origin_rpy),
                axis,
                angle_limit: l.angle_limit,
                velocity_limit: l.velocity_limit,
            });
        }
        Ok(Self {
            name: raw.name,
            base,
            mount: Pose::from_xyz_rpy(raw.mount.xyz, raw.mount.rpy),
            links,
            tool: Pose::from_xyz_rpy(raw.tool.xyz, raw.tool.rpy),
            base_torque_limit: raw.base.torque_limit,
            checksum: hex_digest(text.as_bytes()),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn ur5_on_cube() -> Self {
        Self::from_toml_str(DEFAULT_MODEL_TOML).expect("bundled model file is valid")
    }

    /// Copy with base mass and inertia multiplied by `scale`.
    pub fn with_base_mass_scale(&self, scale: f64) -> Self {
        let mut m = self.clone();
        m.base.mass *= scale;
        m.base.inertia *= scale;
        m
    }

    pub fn total_mass(&self) -> f64 {
        self.base.mass + self.links.iter().map(|l| l.body.mass).sum::<f64>()
    }

    pub fn angle_limits(&self) -> JointVec {
        JointVec::from_fn(|i, _| self.links[i].angle_limit)
    }

    pub fn velocity_limits(&self) -> JointVec {
        JointVec::from_fn(|i, _| self.links[i].velocity_limit)
    }

    pub fn clamp_joint_velocity(&self, qdot: &JointVec) -> JointVec {
        JointVec::from_fn(|i, _| {
            let lim = self.links[i].velocity_limit;
            qdot[i].clamp(-lim, lim)
        })
    }

    pub fn clamp_base_torque(&self, tau: &Vec3) -> Vec3 {
        tau.map(|x| x.clamp(-self.base_torque_limit, self.base_torque_limit))
    }

    pub fn within_joint_limits(&self, q: &JointVec) -> bool {
        q.iter().zip(&self.links).all(|(x, l)| x.abs() <= l.angle_limit)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Full mechanical state. `base_omega` is in inertial-frame components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemState {
    pub base_attitude: UnitQuaternion<f64>,
    pub base_omega: Vec3,
    pub base_position: Vec3,
    pub q: JointVec,
    pub qdot: JointVec,
    pub t: u32,
}

impl SystemState {
    /// Base at the inertial origin with identity attitude, everything at rest.
    pub fn at_rest(q: JointVec) -> Self {
        Self {
            base_attitude: UnitQuaternion::identity(),
            base_omega: Vec3::zeros(),
            base_position: Vec3::zeros(),
            q,
            qdot: JointVec::zeros(),
            t: 0,
        }
    }

    pub fn base_pose(&self) -> Pose {
        Pose::new(self.base_attitude.to_rotation_matrix(), self.base_position)
    }

    pub fn is_finite(&self) -> bool {
        self.base_attitude.coords.iter().all(|x| x.is_finite())
            && self.base_omega.iter().all(|x| x.is_finite())
            && self.base_position.iter().all(|x| x.is_finite())
            && self.q.iter().all(|x| x.is_finite())
            && self.qdot.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CommandInput {
    pub qdot_cmd: JointVec,
    /// Base control torque, inertial frame.
    pub tau_b: Vec3,
    /// External disturbance torque, inertial frame. Never clipped.
    pub tau_ext: Vec3,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_model_matches_table_values() {
        let m = SystemModel::ur5_on_cube();
        assert_eq!(m.base.mass, 100.0);
        assert_eq!(m.base.inertia, Matrix3::from_diagonal(&Vec3::new(41.6, 52.9, 52.9)));
        assert_eq!(m.mount.translation, Vec3::new(0.0, -0.4, 0.6));
        assert_eq!(m.base_torque_limit, 0.1);
        assert_eq!(m.links.len(), 6);
        let two_pi = 2.0 * std::f64::consts::PI;
        let pi = std::f64::consts::PI;
        let limits: Vec<f64> = m.links.iter().map(|l| l.angle_limit).collect();
        assert_eq!(limits, vec![two_pi, two_pi, two_pi, pi, pi, pi]);
        assert!(m.links.iter().all(|l| l.velocity_limit == 2.0));
        assert_eq!(m.checksum.len(), 64);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let bad = DEFAULT_MODEL_TOML.replace("torque_limit = 0.1", "torque_limit = 0.1\nfoo = 1");
        assert!(matches!(SystemModel::from_toml_str(&bad), Err(ModelError::Parse(_))));
        let bad = DEFAULT_MODEL_TOML.replace("mass = 100.0", "mass = -1.0");
        assert!(matches!(SystemModel::from_toml_str(&bad), Err(ModelError::Invalid { .. })));
        let bad = DEFAULT_MODEL_TOML.replace("format_version = 1", "format_version = 7");
        assert!(matches!(SystemModel::from_toml_str(&bad), Err(ModelError::Version(7))));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = SystemModel::load(Path::new("/nonexistent/model.toml")).unwrap_err();
        assert!(matches!(err, ModelError::Io { .. }));
    }

    #[test]
    fn checksum_tracks_content() {
        let a = SystemModel::ur5_on_cube();
        let b = SystemModel::from_toml_str(&format!("{DEFAULT_MODEL_TOML}\n# edited\n")).unwrap();
        assert_ne!(a.checksum, b.checksum);
    }
}
