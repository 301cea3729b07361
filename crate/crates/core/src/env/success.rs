use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TaskErrors {
    pub e_pos: f64,
    pub e_ori: f64,
    pub e_att: f64,
}

impl TaskErrors {
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            e_pos: self.e_pos * s,
            e_ori: self.e_ori * s,
            e_att: self.e_att * s,
        }
    }
}

/// Success holds when all three errors stay within tolerance for `window`
/// consecutive steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuccessThresholds {
    pub pos: f64,
    pub ori: f64,
    pub att: f64,
    pub window: usize,
}

impl Default for SuccessThresholds {
    fn default() -> Self {
        Self {
            pos: 0.05,
            ori: 0.1,
            att: 0.05,
            window: 10,
        }
    }
}

impl SuccessThresholds {
    pub fn relaxed() -> Self {
        Self {
            pos: 0.1,
            ori: 0.2,
            att: 0.1,
            window: 10,
        }
    }

    pub fn arm_met(&self, e: &TaskErrors) -> bool {
        e.e_pos <= self.pos && e.e_ori <= self.ori
    }

    pub fn met(&self, e: &TaskErrors) -> bool {
        self.arm_met(e) && e.e_att <= self.att
    }
}

fn has_run(trace: &[TaskErrors], window: usize, ok: impl Fn(&TaskErrors) -> bool) -> bool {
    let mut run = 0;
    for e in trace {
        run = if ok(e) { run + 1 } else { 0 };
        if run >= window {
            return true;
        }
    }
    false
}

pub fn success_monitor(trace: &[TaskErrors], thr: &SuccessThresholds) -> bool {
    has_run(trace, thr.window, |e| thr.met(e))
}

/// Arm-only criterion (position and orientation), used for goal relabeling.
pub fn arm_success(trace: &[TaskErrors], thr: &SuccessThresholds) -> bool {
    has_run(trace, thr.window, |e| thr.arm_met(e))
}
