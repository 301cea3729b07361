use spacearm_core::dynamics::SystemModel;
use spacearm_core::env::reward::{reward_manipulator, ArmSnapshot};
use spacearm_core::env::{Env, EnvConfig, EpisodeConditions, FaultDraws, ScenarioRegistry, SuccessThresholds};
use spacearm_core::geometry::geodesic_angle;
use spacearm_core::rng::{self, substream};
use spacearm_learn::eval::{run_one, ControllerContext, ControllerRegistry, EvalSpec};
use spacearm_learn::trainer::*;

fn small_config() -> TrainConfig {
    TrainConfig {
        buffer: 300,
        minibatch: 64,
        update_steps: 3,
        epochs: Some(3),
        guidance_epochs: 1,
        her_epochs: 2,
        eval_every: 3,
        eval_episodes: 4,
        checkpoint_every: 1,
        arm_hidden: vec![16, 16],
        base_hidden: vec![8, 8],
        ..Default::default()
    }
}

fn collect_spec<'a>(model: &'a SystemModel, env: &'a EnvConfig, guidance: &'a dyn Guidance, k: u64, relabel: bool) -> CollectSpec<'a> {
    CollectSpec {
        model,
        env,
        thresholds: SuccessThresholds::default(),
        guidance,
        k,
        epoch: k + 1,
        relabel,
        episodes: 6,
        seed: 17,
    }
}

#[test]
fn stored_log_densities_match_the_collecting_policy() {
    let model = SystemModel::ur5_on_cube();
    let env = EnvConfig::default();
    let (arm, base) = initial_agents(&model, &small_config(), 5);
    let policies = spacearm_learn::eval::PolicyPair {
        arm: arm.policy,
        base: base.policy,
    };
    let tesg = Tesg(GuidanceSchedule::new(5));
    let spec = collect_spec(&model, &env, &tesg, 0, false);
    let mut sources = [0usize; 2];
    for i in 0..4 {
        let r = rollout(&spec, &policies, i).expect("nominal rollout");
        for (ep, pol) in [(&r.arm, &policies.arm), (&r.base, &policies.base)] {
            let (od, ad) = (ep.obs.len() / ep.len(), pol.act_dim());
            for t in 0..ep.len() {
                let lp = pol.log_prob(&ep.obs[t * od..(t + 1) * od], &ep.u[t * ad..(t + 1) * ad]).unwrap();
                assert!((lp - ep.logp[t]).abs() < 1e-10, "step {t}: {lp} vs {}", ep.logp[t]);
            }
        }
        for s in &r.arm.sources {
            sources[(*s == Source::Prior) as usize] += 1;
        }
        assert_eq!(r.arm.sources, r.base.sources, "one draw gates both agents");
    }
    assert!(sources[0] > 0 && sources[1] > 0, "{sources:?}");
}

#[test]
fn replaying_stored_actions_reproduces_rewards_bit_exactly() {
    let model = SystemModel::ur5_on_cube();
    let env = EnvConfig::default();
    let (arm, base) = initial_agents(&model, &small_config(), 6);
    let policies = spacearm_learn::eval::PolicyPair {
        arm: arm.policy,
        base: base.policy,
    };
    let tesg = Tesg(GuidanceSchedule::new(5));
    let spec = collect_spec(&model, &env, &tesg, 2, false);
    for i in 0..3 {
        let r = rollout(&spec, &policies, i).unwrap();
        let mut fault_rng = substream(spec.seed, &[rng::TRAIN, spec.epoch, i as u64, rng::FAULT]);
        let draws = FaultDraws::draw(&mut fault_rng);
        let cond = EpisodeConditions::nominal(&draws);
        let (mut e, _) = Env::new(&model, &env, r.target, cond.faults, fault_rng).unwrap();
        for (t, a) in r.actions.iter().enumerate() {
            let out = e.step(a).unwrap();
            assert_eq!(out.reward_m.total.to_bits(), r.arm.rewards[t].to_bits(), "arm reward at {t}");
            assert_eq!(out.reward_b.total.to_bits(), r.base.rewards[t].to_bits(), "base reward at {t}");
        }
    }
}

#[test]
fn full_policy_probability_never_uses_the_prior() {
    let model = SystemModel::ur5_on_cube();
    let env = EnvConfig::default();
    let cfg = small_config();
    let (arm, base) = initial_agents(&model, &cfg, 7);
    let policies = spacearm_learn::eval::PolicyPair {
        arm: arm.policy,
        base: base.policy,
    };
    let schedule = GuidanceSchedule::new(3);
    assert_eq!(schedule.p(4), 1.0);
    let tesg = Tesg(schedule);
    let spec = collect_spec(&model, &env, &tesg, 4, false);
    let mut ab = AgentBuffer::new(AgentId::Arm, spacearm_core::env::ARM_OBS_DIM, 6);
    let mut bb = AgentBuffer::new(AgentId::Base, spacearm_core::env::BASE_OBS_DIM, 3);
    let stats = collect_epoch(&spec, &policies, &mut ab, &mut bb).unwrap();
    assert_eq!(stats.prior_steps, 0);
    assert_eq!(ab.source_count(Source::Prior), 0);
    assert_eq!(bb.source_count(Source::Prior), 0);
    assert_eq!(ab.len(), 6 * 50);
}

#[test]
fn relabeled_episodes_end_at_the_achieved_goal() {
    let model = SystemModel::ur5_on_cube();
    let env = EnvConfig::default();
    let (arm, base) = initial_agents(&model, &small_config(), 8);
    let policies = spacearm_learn::eval::PolicyPair {
        arm: arm.policy,
        base: base.policy,
    };
    let none = NoGuidance;
    let spec = collect_spec(&model, &env, &none, 0, true);
    let r = rollout(&spec, &policies, 0).unwrap();
    let relabeled = her_relabel(&r.arm, &r.path, &env, &policies.arm);
    let n = relabeled.len();
    assert_eq!(n, r.arm.len());
    assert_eq!(relabeled.u, r.arm.u);
    let goal = r.path.ee[n];
    let prev = ArmSnapshot {
        e_pos: (r.path.ee[n - 1].translation - goal.translation).norm(),
        e_ori: geodesic_angle(&r.path.ee[n - 1].rotation, &goal.rotation),
        qdot: r.path.qdot[n - 1],
    };
    let last = reward_manipulator(
        &prev,
        &ArmSnapshot {
            e_pos: 0.0,
            e_ori: 0.0,
            qdot: r.path.qdot[n],
        },
        &env.reward,
    );
    assert_eq!(last.completion, 0.2);
    assert_eq!(relabeled.rewards[n - 1], last.total);

    let mut ab = AgentBuffer::new(AgentId::Arm, spacearm_core::env::ARM_OBS_DIM, 6);
    let mut bb = AgentBuffer::new(AgentId::Base, spacearm_core::env::BASE_OBS_DIM, 3);
    let stats = collect_epoch(&spec, &policies, &mut ab, &mut bb).unwrap();
    assert_eq!(ab.episodes().len(), 6 + stats.relabeled);
    assert_eq!(bb.episodes().len(), 6);
    assert!(stats.relabeled > 0);
}

#[test]
fn training_is_deterministic_and_independent_of_worker_count() {
    let model = SystemModel::ur5_on_cube();
    let env = EnvConfig::default();
    let cfg = small_config();
    let reg = GuidanceRegistry::builtin();
    let run = |workers: usize, dir: &std::path::Path| {
        train(&TrainSetup {
            model: &model,
            env: &env,
            cfg: &cfg,
            thresholds: SuccessThresholds::relaxed(),
            guidance: &reg,
            out_dir: Some(dir),
            workers: Some(workers),
            seed: 11,
        })
        .unwrap()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run(1, a.path());
    let second = run(2, b.path());
    assert_eq!(first.log, second.log);
    assert_eq!(first.arm.policy, second.arm.policy);
    assert_eq!(first.base.critic, second.base.critic);
    for rel in ["metrics.csv", "arm.ckpt", "base.ckpt", "checkpoints/epoch_0001/arm.ckpt"] {
        assert_eq!(std::fs::read(a.path().join(rel)).unwrap(), std::fs::read(b.path().join(rel)).unwrap(), "{rel}");
    }
    for e in &first.log {
        assert_eq!((e.arm_reads, e.base_reads), (2, 2), "epoch {}", e.epoch);
        assert!(e.arm.finite() && e.base.finite());
    }
    assert_eq!(first.log.iter().map(|e| e.k).collect::<Vec<_>>(), vec![0, 1, 2]);
    assert!(first.log[0].collect.prior_steps > 0);
    assert_eq!(first.log[2].collect.prior_steps, 0);
    assert!(first.log[0].collect.relabeled > 0);
    assert_eq!(first.log[2].collect.relabeled, 0);
    assert!(first.log[2].eval.is_some() && first.log[0].eval.is_none());
}

#[test]
fn zero_magnitude_faults_match_nominal_episodes() {
    let model = SystemModel::ur5_on_cube();
    let env = EnvConfig::default();
    let spec = EvalSpec {
        model: &model,
        env: &env,
        thresholds: SuccessThresholds::default(),
        episodes: 2,
        seed: 4,
        stream: rng::SCENARIO,
    };
    let registry = ControllerRegistry::builtin();
    let ctx = ControllerContext::default();
    let scenarios = ScenarioRegistry::builtin();
    for i in 0..2 {
        let nominal = run_one(&spec, "expert", &registry, &ctx, None, i, None).unwrap();
        for name in scenarios.names() {
            let s = scenarios.get(name).unwrap();
            let faulted = run_one(&spec, "expert", &registry, &ctx, Some((s, 0.0)), i, None).unwrap();
            assert_eq!(faulted, nominal, "{name} at zero magnitude, episode {i}");
        }
    }
}
