//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when a criterion outside `KNOWN_RED` fails.
//!
//! Criterion 9 trains six scaled runs (about 35 minutes on one core) and only
//! runs when `SPACEARM_FULL_ACCEPTANCE=1`.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Matrix4, Rotation3};
use rand::{Rng, SeedableRng};
use spacearm_cli::commands::{cmd_train, Loaded};
use spacearm_cli::{selftest, Common, RunConfig};
use spacearm_core::dynamics::{self, CommandInput, JointVec, Kinematics, SystemModel, SystemState};
use spacearm_core::env::{EnvConfig, RewardConfig, ScenarioRegistry, SuccessThresholds};
use spacearm_core::geometry::{axis_angle, geodesic_angle, Vec3};
use spacearm_core::priors::{attitude_error, rrt_star_plan, PidState, RrtSettings};
use spacearm_core::rng::{self, SimRng};
use spacearm_learn::eval::{
    aggregate, evaluate, metrics_of, run_one, run_scenario, CampaignSpec, ControllerContext, ControllerRegistry,
    EvalSpec, PolicyPair,
};
use spacearm_learn::trainer::{
    initial_agents, tesg_select, train, train_toy, GuidanceRegistry, GuidanceSchedule, Source, ToyConfig, TrainConfig,
    TrainSetup,
};

/// Criteria that fail on this build for reasons recorded in the decisions
/// ledger; they are reported but do not fail the suite.
const KNOWN_RED: &[u32] = &[6, 7, 9];

enum Verdict {
    Pass(String),
    Fail(String),
    NotRun(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn c1_conservation() -> Verdict {
    let model = SystemModel::ur5_on_cube();
    let t = Instant::now();
    let (h, p) = selftest::conservation(&model, 100, 50, 100, 101);
    let secs = t.elapsed().as_secs_f64();
    verdict(
        h <= 1e-8 && p <= 1e-10 && secs < 30.0,
        format!("100 trials: |ΔH| {h:.2e} N·m·s, |P| {p:.2e} kg·m/s, {secs:.1} s"),
    )
}

/// UR5 forward kinematics from its DH table.
fn dh_fk(q: &JointVec) -> Matrix4<f64> {
    let d = [0.089159, 0.0, 0.0, 0.10915, 0.09465, 0.0823];
    let a = [0.0, -0.425, -0.39225, 0.0, 0.0, 0.0];
    let alpha = [PI / 2.0, 0.0, 0.0, PI / 2.0, -PI / 2.0, 0.0];
    let mut t = Matrix4::identity();
    for i in 0..6 {
        let (ct, st) = (q[i].cos(), q[i].sin());
        let (ca, sa) = (alpha[i].cos(), alpha[i].sin());
        #[rustfmt::skip]
        let link = Matrix4::new(
            ct, -st * ca, st * sa, a[i] * ct,
            st, ct * ca, -ct * sa, a[i] * st,
            0.0, sa, ca, d[i],
            0.0, 0.0, 0.0, 1.0,
        );
        t *= link;
    }
    t
}

fn c2_kinematics() -> Verdict {
    let model = SystemModel::ur5_on_cube();
    let jac = selftest::jacobian_error(&model, 100, 102);
    // the model's arm frame is the DH frame turned by π about z, and its
    // tool frame differs from the DH flange by a constant rotation
    let flip = Rotation3::from_axis_angle(&Vec3::z_axis(), PI);
    let mut rng = SimRng::seed_from_u64(103);
    let (mut pos, mut ori) = (0.0f64, 0.0f64);
    let mut offset: Option<Rotation3<f64>> = None;
    for _ in 0..100 {
        let q = JointVec::from_fn(|_, _| rng.random_range(-PI..PI));
        let kin = Kinematics::compute(&model, &model.mount.inverse(), &q);
        let t = dh_fk(&q);
        let p = flip * Vec3::new(t[(0, 3)], t[(1, 3)], t[(2, 3)]);
        let r = flip * Rotation3::from_matrix_unchecked(t.fixed_view::<3, 3>(0, 0).into_owned());
        pos = pos.max((kin.ee.translation - p).norm());
        let c = r.inverse() * kin.ee.rotation;
        let c0 = *offset.get_or_insert(c);
        ori = ori.max(geodesic_angle(&c0, &c));
    }
    verdict(
        jac < 1e-5 && pos < 1e-9 && ori < 1e-9,
        format!("Jacobian rel {jac:.2e}; FK vs DH {pos:.2e} m, {ori:.2e} rad"),
    )
}

fn c3_rewards() -> Verdict {
    let checks = selftest::reward_oracles(&RewardConfig::default());
    let worst = checks.iter().map(|c| c.error).fold(0.0, f64::max);
    let failed: Vec<_> = checks.iter().filter(|c| c.error > 1e-12).map(|c| c.name.clone()).collect();
    verdict(
        failed.is_empty(),
        format!("{} hand cases, worst error {worst:.1e}{}", checks.len(), if failed.is_empty() { String::new() } else { format!(", failed {failed:?}") }),
    )
}

fn c4_schedule() -> Verdict {
    let table = selftest::schedule_error();
    let s = GuidanceSchedule::new(15);
    let edges = s.p(15) == 0.8 && s.p(16) == 1.0;
    let mut rng = SimRng::seed_from_u64(104);
    let n = 100_000;
    let a = Default::default();
    let policy = (0..n).filter(|_| tesg_select(&s, 6, &mut rng, &a, &a).1 == Source::Policy).count();
    let freq = policy as f64 / n as f64;
    let sigma = (0.25 / n as f64).sqrt();
    verdict(
        table == 0.0 && edges && (freq - 0.5).abs() <= 3.0 * sigma,
        format!("table deviation {table:e}, p(15)={} p(16)={}, k=6 policy frequency {freq:.4} (3σ = {:.4})", s.p(15), s.p(16), 3.0 * sigma),
    )
}

fn c5_gradients() -> Verdict {
    let nn = selftest::network_gradient_error(&[5, 8, 8, 3], 105);
    let gae = selftest::gae_error(20, 106);
    verdict(nn < 1e-4 && gae < 1e-12, format!("probe net rel {nn:.2e}; GAE vs explicit sum {gae:.2e}"))
}

fn c6_pid() -> Verdict {
    let model = SystemModel::ur5_on_cube();
    let mut state = SystemState::at_rest(EnvConfig::default().home_q());
    state.base_attitude = nalgebra::UnitQuaternion::from_rotation_matrix(&axis_angle(&Vec3::x(), 0.1));
    let mut pid = PidState::default();
    let (dt, mut settled, mut peak) = (0.1, None, 0.0f64);
    for k in 0..3000 {
        let rel = state.base_attitude.to_rotation_matrix();
        let e = rel.angle();
        if settled.is_none() && e < 0.05 {
            settled = Some(k as f64 * dt);
        }
        peak = peak.max(e);
        let cmd = CommandInput {
            qdot_cmd: JointVec::zeros(),
            tau_b: pid.step(&attitude_error(&rel)),
            tau_ext: Vec3::zeros(),
        };
        state = dynamics::step(&model, &state, &cmd, dt, 10).expect("locked-arm step");
    }
    let last = state.base_attitude.angle();
    let ok = settled.is_some_and(|t| t <= 120.0) && peak <= 0.1 + 1e-12;
    verdict(
        ok,
        format!("below 0.05 rad at {settled:?} s; peak e_att over 300 s {peak:.3} rad, final {last:.3} rad"),
    )
}

fn c7_planner() -> Verdict {
    let limits = SystemModel::ur5_on_cube().angle_limits();
    let s = RrtSettings {
        budget: 5000,
        ..Default::default()
    };
    let mut rng = SimRng::seed_from_u64(107);
    let (mut worst, mut monotone, mut failures) = (0.0f64, true, 0);
    for _ in 0..20 {
        let a = JointVec::from_fn(|i, _| rng.random_range(-limits[i]..limits[i]));
        let b = JointVec::from_fn(|i, _| rng.random_range(-limits[i]..limits[i]));
        match rrt_star_plan(&a, &[b], &limits, &s, &mut rng) {
            Ok(out) => {
                worst = worst.max(out.path.cost / (b - a).norm());
                monotone &= out.cost_history.windows(2).all(|w| w[1] <= w[0]);
            }
            Err(_) => failures += 1,
        }
    }
    verdict(
        worst <= 1.05 && monotone && failures == 0,
        format!("worst cost ratio {worst:.3} (bound 1.05), monotone {monotone}, failed plans {failures}"),
    )
}

fn c8_toy() -> Verdict {
    let t = Instant::now();
    let report = train_toy(&ToyConfig::default());
    let secs = t.elapsed().as_secs_f64();
    let best = report.epochs.iter().map(|e| e.success).fold(0.0, f64::max);
    verdict(
        report.solved_at.is_some_and(|e| e <= 200) && secs < 300.0,
        format!("solved at epoch {:?}, best success {best:.3}, {secs:.1} s", report.solved_at),
    )
}

fn relaxed_eval<'a>(model: &'a SystemModel, env: &'a EnvConfig, seed: u64) -> EvalSpec<'a> {
    EvalSpec {
        model,
        env,
        thresholds: SuccessThresholds::relaxed(),
        episodes: 200,
        seed,
        stream: rng::EVAL,
    }
}

fn c9_scaled() -> Verdict {
    if std::env::var("SPACEARM_FULL_ACCEPTANCE").as_deref() != Ok("1") {
        return Verdict::NotRun("six 50-epoch training runs (about 35 minutes); set SPACEARM_FULL_ACCEPTANCE=1".into());
    }
    let model = SystemModel::ur5_on_cube();
    let env = EnvConfig::default();
    let registry = GuidanceRegistry::builtin();
    let controllers = ControllerRegistry::builtin();
    let t = Instant::now();
    let mut rows = Vec::new();
    for seed in 0..3u64 {
        let run = |guidance: &str| {
            let cfg = TrainConfig {
                buffer: 4000,
                minibatch: 1000,
                update_steps: 30,
                epochs: Some(50),
                guidance_epochs: 5,
                guidance: guidance.into(),
                eval_every: 50,
                eval_episodes: 200,
                ..Default::default()
            };
            let out = train(&TrainSetup {
                model: &model,
                env: &env,
                cfg: &cfg,
                thresholds: SuccessThresholds::relaxed(),
                guidance: &registry,
                out_dir: None,
                workers: None,
                seed,
            })
            .expect("scaled run");
            out.log.last().and_then(|e| e.eval).expect("final evaluation").asr
        };
        let (arm, base) = initial_agents(&model, &TrainConfig::default(), seed);
        let ctx = ControllerContext {
            policies: Some(Arc::new(PolicyPair {
                arm: arm.policy,
                base: base.policy,
            })),
        };
        let untrained = aggregate(&metrics_of(
            &evaluate(&relaxed_eval(&model, &env, seed), "learned", &controllers, &ctx, None).expect("untrained eval"),
        ))
        .asr;
        rows.push((untrained, run("tesg"), run("none")));
    }
    let gain = rows.iter().all(|(u, g, _)| g - u >= 0.30);
    let mean = |f: fn(&(f64, f64, f64)) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    let (tesg, none) = (mean(|r| r.1), mean(|r| r.2));
    verdict(
        gain && tesg > none,
        format!(
            "per seed (untrained, tesg, none) {rows:.3?}; mean tesg {tesg:.3} vs none {none:.3}; {:.0} s",
            t.elapsed().as_secs_f64()
        ),
    )
}

fn c10_expert() -> Verdict {
    let model = SystemModel::ur5_on_cube();
    let env = EnvConfig::default();
    let spec = EvalSpec {
        model: &model,
        env: &env,
        thresholds: SuccessThresholds::default(),
        episodes: 500,
        seed: 110,
        stream: rng::EVAL,
    };
    let registry = ControllerRegistry::builtin();
    let ctx = ControllerContext::default();
    let summary = |name| aggregate(&metrics_of(&evaluate(&spec, name, &registry, &ctx, None).expect("baseline eval")));
    let (expert, free) = (summary("expert"), summary("free-float"));
    verdict(
        expert.asr > 0.0 && expert.abae < free.abae,
        format!(
            "expert ASR {:.3} ABAE {:.4} rad; free-floating ASR {:.3} ABAE {:.4} rad",
            expert.asr, expert.abae, free.asr, free.abae
        ),
    )
}

fn c11_robustness() -> Verdict {
    let model = SystemModel::ur5_on_cube();
    let env = EnvConfig::default();
    let scenarios = ScenarioRegistry::builtin();
    let registry = ControllerRegistry::builtin();
    let (arm, base) = initial_agents(&model, &TrainConfig::default(), 111);
    let learned = ControllerContext {
        policies: Some(Arc::new(PolicyPair {
            arm: arm.policy,
            base: base.policy,
        })),
    };
    let expert = ControllerContext::default();
    let eval = |episodes| EvalSpec {
        model: &model,
        env: &env,
        thresholds: SuccessThresholds::default(),
        episodes,
        seed: 0,
        stream: rng::SCENARIO,
    };
    let mut mismatches = Vec::new();
    let names: Vec<_> = scenarios.names().collect();
    for (controller, ctx, episodes) in [("learned", &learned, 20), ("expert", &expert, 3)] {
        let spec = eval(episodes);
        let nominal = evaluate(&spec, controller, &registry, ctx, None).expect("nominal eval");
        for name in &names {
            let campaign = run_scenario(
                &CampaignSpec {
                    eval: spec,
                    controller,
                    scenario: name,
                    grid: &[0.0],
                    seeds: &[0],
                },
                &scenarios,
                &registry,
                ctx,
            )
            .expect("campaign");
            let episodes_match = (0..episodes).all(|i| {
                run_one(&spec, controller, &registry, ctx, Some((scenarios.get(name).unwrap(), 0.0)), i, None)
                    .expect("faulted episode")
                    == nominal[i]
            });
            if !episodes_match || campaign[0].per_seed[0].summary != aggregate(&metrics_of(&nominal)) {
                mismatches.push(format!("{controller}/{name}"));
            }
        }
    }
    let sat = scenarios.get("momentum-sat").expect("momentum-sat scenario");
    let spec = eval(10);
    let (mut steps, mut nonzero, mut commanded) = (0, 0, 0.0f64);
    for i in 0..10 {
        let out = run_one(&spec, "expert", &registry, &expert, Some((sat, 1.0)), i, None).expect("saturated episode");
        for r in &out.trace.records {
            steps += 1;
            nonzero += r.tau_applied.iter().any(|v| *v != 0.0) as usize;
            commanded = commanded.max(r.action_base.iter().fold(0.0, |m, v| m.max(v.abs())));
        }
    }
    verdict(
        mismatches.is_empty() && nonzero == 0 && steps == 500 && commanded > 0.0,
        format!(
            "{} scenarios x 2 controllers at zero magnitude, mismatches {mismatches:?}; full saturation: {nonzero} of {steps} steps with torque (max commanded {commanded:.3} N·m)",
            names.len()
        ),
    )
}

fn c12_determinism() -> Verdict {
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut cfg = RunConfig::default();
    cfg.seed = 12;
    cfg.train = TrainConfig {
        buffer: 500,
        minibatch: 100,
        update_steps: 4,
        epochs: Some(3),
        guidance_epochs: 1,
        eval_every: 2,
        eval_episodes: 6,
        checkpoint_every: 1,
        arm_hidden: vec![32, 32],
        base_hidden: vec![8, 8],
        ..Default::default()
    };
    let loaded = Loaded {
        cfg,
        model: SystemModel::ur5_on_cube(),
    };
    let dirs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let common = Common {
                config: None,
                seed: None,
                out: Some(tmp.path().join(name)),
                workers: Some(1),
            };
            cmd_train(&loaded, &common).expect("training run")
        })
        .collect();
    let mut files = vec!["metrics.csv".to_string(), "arm.ckpt".into(), "base.ckpt".into()];
    for e in 1..=3 {
        for agent in ["arm", "base"] {
            files.push(format!("checkpoints/epoch_{e:04}/{agent}.ckpt"));
        }
    }
    let differing: Vec<_> = files
        .iter()
        .filter(|f| std::fs::read(dirs[0].join(f)).ok() != std::fs::read(dirs[1].join(f)).ok() || !dirs[0].join(f).is_file())
        .cloned()
        .collect();
    verdict(
        differing.is_empty(),
        format!("{} files compared, differing or missing {differing:?}", files.len()),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Verdict); 12] = [
        (1, "conservation", c1_conservation),
        (2, "kinematics", c2_kinematics),
        (3, "reward oracles", c3_rewards),
        (4, "guidance schedule", c4_schedule),
        (5, "gradient and GAE checks", c5_gradients),
        (6, "PID regression", c6_pid),
        (7, "planner", c7_planner),
        (8, "toy learning", c8_toy),
        (9, "scaled dual-agent run", c9_scaled),
        (10, "expert baseline", c10_expert),
        (11, "robustness harness", c11_robustness),
        (12, "determinism", c12_determinism),
    ];
    let only: Option<u32> = std::env::var("SPACEARM_CRITERION").ok().and_then(|s| s.parse().ok());
    let mut unexpected = Vec::new();
    for (n, name, check) in criteria {
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let t = Instant::now();
        let v = check();
        let secs = t.elapsed().as_secs_f64();
        let (status, detail) = match v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) if KNOWN_RED.contains(&n) => ("FAIL (known, see ledger)", d),
            Verdict::Fail(d) => {
                unexpected.push(n);
                ("FAIL", d)
            }
            Verdict::NotRun(d) => ("NOT RUN", d),
        };
        println!("criterion {n:>2} {name:<24} {status}: {detail} [{secs:.1} s]");
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
