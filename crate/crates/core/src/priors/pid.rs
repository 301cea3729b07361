use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Per-axis output clip (N·m).
    pub limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self {
            kp: 15.0,
            ki: 2.5,
            kd: 800.0,
            limit: 0.1,
        }
    }
}

/// Discrete PID on Euler-angle errors. The integral is a plain running sum
/// with no anti-windup; only the output is clipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidState {
    pub gains: PidGains,
    pub error_sum: Vec3,
    pub prev_error: Vec3,
}

impl PidState {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            error_sum: Vec3::zeros(),
            prev_error: Vec3::zeros(),
        }
    }

    pub fn reset(&mut self) {
        self.error_sum = Vec3::zeros();
        self.prev_error = Vec3::zeros();
    }

    /// One control period. `error` is target minus current attitude, in
    /// roll/pitch/yaw order.
    pub fn step(&mut self, error: &Vec3) -> Vec3 {
        let g = self.gains;
        self.error_sum += error;
        let raw = error * g.kp + self.error_sum * g.ki + (error - self.prev_error) * g.kd;
        self.prev_error = *error;
        raw.map(|v| v.clamp(-g.limit, g.limit))
    }
}

impl Default for PidState {
    fn default() -> Self {
        Self::new(PidGains::default())
    }
}
