use super::kinematics::Kinematics;
use super::model::{CommandInput, JointVec, SystemModel, SystemState, NUM_JOINTS};
use super::momentum::MomentumMaps;
use crate::geometry::{exp_rotation_vector, renormalize, Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("state became non-finite during step {t}")]
    NonFiniteState { t: u32 },
    #[error("invalid integration settings: dt = {dt}, substeps = {substeps}")]
    InvalidStep { dt: f64, substeps: usize },
}

/// Advances the system by one control period `dt`.
///
/// Joint rates ramp linearly from the current rates to the clipped command.
/// Within each of the `substeps` sub-intervals the angular momentum about the
/// system CoM gains `(τ_b + τ_ext)·δt`, the base rate is recovered from
/// `A·ω_b = H − B·q̇`, and the attitude advances by the quaternion
/// exponential. The base origin follows from keeping the system CoM fixed.
pub fn step(
    model: &SystemModel,
    state: &SystemState,
    cmd: &CommandInput,
    dt: f64,
    substeps: usize,
) -> Result<SystemState, DynamicsError> {
    if !(dt > 0.0) || substeps == 0 {
        return Err(DynamicsError::InvalidStep { dt, substeps });
    }
    let non_finite = DynamicsError::NonFiniteState { t: state.t };
    let target = model.clamp_joint_velocity(&cmd.qdot_cmd);
    let tau = model.clamp_base_torque(&cmd.tau_b) + cmd.tau_ext;
    let limits = model.angle_limits();

    let kin = Kinematics::of_state(model, state);
    let com = kin.com;
    let mut h = MomentumMaps::compute(model, &kin).angular_momentum(&state.base_omega, &state.qdot);

    let sub = dt / substeps as f64;
    let mut attitude = state.base_attitude;
    let mut q = state.q;
    let start = state.qdot;
    let mut locked = [false; NUM_JOINTS];
    let rate_at = |k: usize, locked: &[bool; NUM_JOINTS]| {
        let s = k as f64 / substeps as f64;
        JointVec::from_fn(|j, _| {
            if locked[j] {
                0.0
            } else {
                start[j] + (target[j] - start[j]) * s
            }
        })
    };

    for k in 0..substeps {
        let qd_a = rate_at(k, &locked);
        let qd_b = rate_at(k + 1, &locked);
        let kin = Kinematics::compute(model, &Pose::new(attitude.to_rotation_matrix(), Vec3::zeros()), &q);
        let omega = MomentumMaps::compute(model, &kin)
            .base_rate(&h, &qd_a)
            .ok_or(non_finite)?;
        attitude = renormalize((exp_rotation_vector(&(omega * sub)) * attitude).into_inner());
        q += (qd_a + qd_b) * (0.5 * sub);
        for j in 0..NUM_JOINTS {
            if q[j].abs() > limits[j] {
                q[j] = q[j].clamp(-limits[j], limits[j]);
                locked[j] = true;
            }
        }
        h += tau * sub;
    }

    let qdot = rate_at(substeps, &locked);
    let kin = Kinematics::compute(model, &Pose::new(attitude.to_rotation_matrix(), Vec3::zeros()), &q);
    let base_omega = MomentumMaps::compute(model, &kin)
        .base_rate(&h, &qdot)
        .ok_or(non_finite)?;
    let next = SystemState {
        base_attitude: attitude,
        base_omega,
        base_position: com - kin.com,
        q,
        qdot,
        t: state.t + 1,
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(non_finite)
    }
}

/// Reaction torque the arm motion exerts on the base,
/// `−(dB/dt·q̇ + B·q̈ + dA/dt·ω_b)`, with the time derivatives of `A` and `B`
/// taken by central differences along the current motion.
///
/// Diagnostic only; [`step`] never calls it.
pub fn reaction_torque_probe(model: &SystemModel, state: &SystemState, qddot: &JointVec) -> Vec3 {
    const H: f64 = 1e-6;
    let maps_at = |s: f64| {
        let attitude = exp_rotation_vector(&(state.base_omega * s)) * state.base_attitude;
        let q = state.q + state.qdot * s + qddot * (0.5 * s * s);
        let base = Pose::new(attitude.to_rotation_matrix(), state.base_position);
        MomentumMaps::compute(model, &Kinematics::compute(model, &base, &q))
    };
    let now = maps_at(0.0);
    let plus = maps_at(H);
    let minus = maps_at(-H);
    let a_dot = (plus.locked_inertia - minus.locked_inertia) / (2.0 * H);
    let b_dot = (plus.coupling - minus.coupling) / (2.0 * H);
    -(b_dot * state.qdot + now.coupling * qddot + a_dot * state.base_omega)
}

/// Total angular momentum about the system CoM.
pub fn angular_momentum(model: &SystemModel, state: &SystemState) -> Vec3 {
    MomentumMaps::compute(model, &Kinematics::of_state(model, state))
        .angular_momentum(&state.base_omega, &state.qdot)
}
