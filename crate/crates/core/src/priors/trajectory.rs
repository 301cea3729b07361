use super::rrt::JointPath;
use crate::dynamics::JointVec;

/// Fraction of the joint-rate limit the reference moves at.
pub const SPEED_FRACTION: f64 = 0.8;
/// Proportional tracking gain (1/s).
pub const K_TRACK: f64 = 2.0;

/// Joint reference sampled once per control step.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorTrajectory {
    pub q_ref: Vec<JointVec>,
    pub qdot_ref: Vec<JointVec>,
    pub dt: f64,
}

impl PriorTrajectory {
    /// Resamples `path` at constant joint-space speed and differences it
    /// forward. Samples beyond the path end hold its terminus.
    pub fn from_path(path: &JointPath, speed: f64, dt: f64, steps: usize) -> Self {
        let wp = &path.waypoints;
        let mut arc = vec![0.0];
        for w in wp.windows(2) {
            arc.push(arc.last().unwrap() + (w[1] - w[0]).norm());
        }
        let total = *arc.last().unwrap();
        let at = |s: f64| -> JointVec {
            if s >= total || wp.len() == 1 {
                return *wp.last().unwrap();
            }
            let k = arc.partition_point(|&a| a <= s).clamp(1, wp.len() - 1);
            let seg = arc[k] - arc[k - 1];
            let u = if seg > 0.0 { (s - arc[k - 1]) / seg } else { 1.0 };
            wp[k - 1] + (wp[k] - wp[k - 1]) * u
        };
        let q_ref: Vec<JointVec> = (0..=steps).map(|t| at(speed * dt * t as f64)).collect();
        let qdot_ref = q_ref.windows(2).map(|w| (w[1] - w[0]) / dt).collect();
        Self { q_ref, qdot_ref, dt }
    }

    /// Holds `q` for the whole horizon.
    pub fn hold(q: &JointVec, dt: f64, steps: usize) -> Self {
        Self {
            q_ref: vec![*q; steps + 1],
            qdot_ref: vec![JointVec::zeros(); steps],
            dt,
        }
    }

    pub fn reference(&self, t: usize) -> (JointVec, JointVec) {
        match (self.q_ref.get(t), self.qdot_ref.get(t)) {
            (Some(q), Some(qd)) => (*q, *qd),
            _ => (*self.q_ref.last().unwrap(), JointVec::zeros()),
        }
    }

    pub fn steps(&self) -> usize {
        self.qdot_ref.len()
    }
}

/// `q̇_ref(t) + K_track·(q_ref(t) − q)`, clipped componentwise to `limit`.
pub fn prior_manipulator_action(traj: &PriorTrajectory, q: &JointVec, t: usize, limit: f64) -> JointVec {
    let (q_ref, qdot_ref) = traj.reference(t);
    (qdot_ref + (q_ref - q) * K_TRACK).map(|v| v.clamp(-limit, limit))
}
