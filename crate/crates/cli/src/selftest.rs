//! Fast invariant checks runnable from the command line.

use std::time::Instant;

use nalgebra::Rotation3;
use rand::{Rng, SeedableRng};
use spacearm_core::dynamics::{self, angular_momentum, CommandInput, Jacobians, JointVec, Kinematics, SystemModel, SystemState};
use spacearm_core::env::reward::{
    alignment_reward, euler_l1_reduction, manipulator_completion, pose_penalty, reward_base, smoothness_penalty,
};
use spacearm_core::env::{BaseSnapshot, RewardConfig};
use spacearm_core::geometry::{log_rotation, EulerZyx, Pose, Vec3};
use spacearm_core::rng::SimRng;
use spacearm_learn::nn::Mlp;
use spacearm_learn::trainer::{compute_gae, GuidanceSchedule};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// Largest error observed.
    pub error: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, error: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            error,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }
}

fn close(name: &str, got: f64, expected: f64, tol: f64) -> Check {
    Check::new(name, (got - expected).abs(), tol)
}

/// Hand-evaluated reward cases; `cfg` is normally the default coefficients
/// and only differs when a fault is injected on purpose.
pub fn reward_oracles(cfg: &RewardConfig) -> Vec<Check> {
    let tol = 1e-12;
    let still = BaseSnapshot {
        e_att: 0.0,
        euler: EulerZyx::default(),
    };
    let a = JointVec::new(-2.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let b = JointVec::new(2.0, 1.0, 0.0, 0.0, 0.0, 0.0);
    let signed = RewardConfig {
        aln_signed: true,
        ..cfg.clone()
    };
    vec![
        close("reward: pose penalty 0.5*0.1 + 0.125*0.2", pose_penalty(0.1, 0.2, cfg), 0.075, tol),
        close("reward: smoothness excess 2 rad/s", smoothness_penalty(&a, &b, cfg), 0.2, tol),
        close("reward: alignment literal |0.5-0.3|", alignment_reward(0.5, 0.3, cfg), 0.03, tol),
        close("reward: alignment literal on increase", alignment_reward(0.3, 0.5, cfg), 0.03, tol),
        close("reward: alignment signed on increase", alignment_reward(0.3, 0.5, &signed), 0.0, tol),
        close("reward: arm completion at zero error", manipulator_completion(0.0, 0.0, cfg), 0.2, tol),
        close(
            "reward: arm completion at thresholds",
            manipulator_completion(cfg.eps_pos, cfg.eps_ori, cfg),
            0.0,
            tol,
        ),
        close(
            "reward: euler L1 reduction",
            euler_l1_reduction(&EulerZyx::new(0.1, -0.2, 0.05), &EulerZyx::new(0.05, -0.1, 0.05)),
            0.15,
            tol,
        ),
        close("reward: base at rest", reward_base(&still, &still, cfg).total, 0.2, tol),
        close(
            "reward: base attitude penalty 2.5*0.02",
            reward_base(
                &BaseSnapshot {
                    e_att: 0.02,
                    euler: EulerZyx::default(),
                },
                &BaseSnapshot {
                    e_att: 0.02,
                    euler: EulerZyx::default(),
                },
                cfg,
            )
            .attitude,
            -0.05,
            tol,
        ),
    ]
}

/// Angular-momentum drift and CoM-velocity momentum over free-floating
/// episodes with random joint-rate commands.
pub fn conservation(model: &SystemModel, trials: usize, steps: usize, substeps: usize, seed: u64) -> (f64, f64) {
    let mut rng = SimRng::seed_from_u64(seed);
    let dt = 0.1;
    let (mut worst_h, mut worst_p) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let q0 = JointVec::from_fn(|_, _| rng.random_range(-2.0..2.0));
        let mut s = SystemState::at_rest(q0);
        let h0 = angular_momentum(model, &s);
        let mut com = Kinematics::of_state(model, &s).com;
        for _ in 0..steps {
            let cmd = CommandInput {
                qdot_cmd: JointVec::from_fn(|_, _| rng.random_range(-2.0..2.0)),
                ..Default::default()
            };
            s = dynamics::step(model, &s, &cmd, dt, substeps).expect("free-float step");
            worst_h = worst_h.max((angular_momentum(model, &s) - h0).norm());
            let c = Kinematics::of_state(model, &s).com;
            worst_p = worst_p.max(((c - com) * model.total_mass() / dt).norm());
            com = c;
        }
    }
    (worst_h, worst_p)
}

/// Worst relative error of the analytic end-effector twist against central
/// differences of the forward kinematics.
pub fn jacobian_error(model: &SystemModel, cases: usize, seed: u64) -> f64 {
    let mut rng = SimRng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let q = JointVec::from_fn(|_, _| rng.random_range(-3.0..3.0));
        let base = Pose::new(
            Rotation3::from_scaled_axis(Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0))),
            Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
        );
        let wb = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let qd = JointVec::from_fn(|_, _| rng.random_range(-2.0..2.0));
        let kin = Kinematics::compute(model, &base, &q);
        let jac = Jacobians::compute(&kin);
        let analytic = jac.base * wb + jac.arm * qd;
        let eval = |s: f64| {
            let rot = Rotation3::from_scaled_axis(wb * s) * base.rotation;
            Kinematics::compute(model, &Pose::new(rot, base.translation), &(q + qd * s)).ee
        };
        let (plus, minus) = (eval(h), eval(-h));
        let v = (plus.translation - minus.translation) / (2.0 * h);
        let w = log_rotation(&(plus.rotation * minus.rotation.inverse())) / (2.0 * h);
        let fd = nalgebra::Vector6::new(v.x, v.y, v.z, w.x, w.y, w.z);
        worst = worst.max((analytic - fd).norm() / analytic.norm().max(1e-12));
    }
    worst
}

/// Worst relative error of every parameter gradient of a small network
/// against central differences of a squared loss.
pub fn network_gradient_error(widths: &[usize], seed: u64) -> f64 {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut net = Mlp::orthogonal(widths, 1.0, &mut rng);
    for p in &mut net.params {
        *p += rng.random_range(-0.3..0.3);
    }
    let (din, dout) = (widths[0], *widths.last().unwrap());
    let x = ndarray::Array2::from_shape_fn((7, din), |_| rng.random_range(-1.0..1.0));
    let y = ndarray::Array2::from_shape_fn((7, dout), |_| rng.random_range(-1.0..1.0));
    let loss = |n: &Mlp| (&n.predict(x.view()).unwrap() - &y).mapv(|v| v * v).sum() * 0.5;
    let (out, tape) = net.forward(x.view()).unwrap();
    let g = net.backward(&tape, (&out - &y).view());
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..net.params.len() {
        let mut p = net.clone();
        p.params[i] += h;
        let up = loss(&p);
        p.params[i] -= 2.0 * h;
        let fd = (up - loss(&p)) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-8));
    }
    worst
}

/// Largest deviation of the estimator from the explicit discounted sum of
/// TD errors, over random sequences.
pub fn gae_error(sequences: usize, seed: u64) -> f64 {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..sequences {
        let n = rng.random_range(1..40);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..=n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (gamma, lambda) = (rng.random_range(0.5..1.0), rng.random_range(0.0..1.0));
        let (adv, _) = compute_gae(&r, &v, gamma, lambda);
        for t in 0..n {
            let brute: f64 = (t..n)
                .map(|l| (gamma * lambda).powi((l - t) as i32) * (r[l] + gamma * v[l + 1] - v[l]))
                .sum();
            worst = worst.max((adv[t] - brute).abs());
        }
    }
    worst
}

/// Largest deviation of `p(k)` from the printed schedule over `k = 0..=20`.
pub fn schedule_error() -> f64 {
    let s = GuidanceSchedule::new(15);
    (0..=20u64)
        .map(|k| {
            let expected = if k <= 15 { 0.3 + 0.5 * k as f64 / 15.0 } else { 1.0 };
            (s.p(k) - expected).abs()
        })
        .fold(0.0, f64::max)
}

/// The full fast suite. `reward` is the coefficient set under test.
pub fn run(reward: &RewardConfig) -> Vec<(Check, std::time::Duration)> {
    let model = SystemModel::ur5_on_cube();
    let mut out = Vec::new();
    let mut timed = |f: &mut dyn FnMut() -> Vec<Check>| {
        let t = Instant::now();
        let checks = f();
        let dt = t.elapsed();
        for c in checks {
            out.push((c, dt));
        }
    };
    timed(&mut || {
        let (h, p) = conservation(&model, 5, 50, 100, 1);
        vec![
            Check::new("dynamics: angular momentum drift (N·m·s)", h, 1e-8),
            Check::new("dynamics: linear momentum (kg·m/s)", p, 1e-10),
        ]
    });
    timed(&mut || vec![Check::new("kinematics: Jacobian vs finite differences (rel)", jacobian_error(&model, 100, 2), 1e-5)]);
    timed(&mut || vec![Check::new("nn: gradient vs finite differences (rel)", network_gradient_error(&[4, 8, 8, 2], 3), 1e-4)]);
    timed(&mut || vec![Check::new("trainer: GAE vs explicit sum", gae_error(20, 4), 1e-12)]);
    timed(&mut || vec![Check::new("trainer: guidance schedule table", schedule_error(), 0.0)]);
    timed(&mut || reward_oracles(reward));
    out
}
