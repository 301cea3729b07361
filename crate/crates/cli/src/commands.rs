use std::borrow::Cow;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use spacearm_core::dynamics::SystemModel;
use spacearm_core::env::trace::write_trace;
use spacearm_core::env::{RewardConfig, ScenarioRegistry, SuccessThresholds};
use spacearm_core::rng;
use spacearm_learn::eval::{
    aggregate, evaluate, maintenance_replay, metrics_of, parse_grid, plot_export, run_scenario, CampaignSpec,
    ControllerContext, ControllerRegistry, EvalSpec, PolicyPair, Summary,
};
use spacearm_learn::nn::AgentCheckpoint;
use spacearm_learn::trainer::{train, GuidanceRegistry, TrainSetup};

use crate::config::RunConfig;
use crate::manifest::Manifest;
use crate::{selftest, CliError, Command, Common, PolicySource};

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

pub struct Loaded {
    pub cfg: RunConfig,
    pub model: SystemModel,
}

pub fn load(common: &Common) -> Result<Loaded, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let model = match &cfg.model {
        Some(p) => SystemModel::load(p).map_err(|e| CliError::Validation(e.to_string()))?,
        None => SystemModel::ur5_on_cube(),
    };
    Ok(Loaded { cfg, model })
}

fn out_dir(common: &Common, cfg: &RunConfig, default_name: &str) -> Result<PathBuf, CliError> {
    let dir = common.out.clone().unwrap_or_else(|| cfg.output_root().join(default_name));
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

fn install_workers(workers: Option<usize>) {
    if let Some(n) = workers {
        // only the first call can configure the global pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Loads the policy pair from a run directory or explicit checkpoint paths.
pub fn load_policies(src: &PolicySource, manifest: Option<&mut Manifest>) -> Result<Option<Arc<PolicyPair>>, CliError> {
    let (arm, base) = match (&src.run, &src.arm, &src.base) {
        (Some(run), None, None) => (run.join("arm.ckpt"), run.join("base.ckpt")),
        (None, Some(a), Some(b)) => (a.clone(), b.clone()),
        (None, None, None) => return Ok(None),
        _ => return Err(CliError::Validation("give either --run or both --arm and --base".into())),
    };
    for p in [&arm, &base] {
        if !p.is_file() {
            return Err(CliError::Validation(format!("checkpoint {} does not exist", p.display())));
        }
    }
    let a = AgentCheckpoint::load_agent(&arm, "arm").map_err(|e| CliError::Validation(format!("{}: {e}", arm.display())))?;
    let b =
        AgentCheckpoint::load_agent(&base, "base").map_err(|e| CliError::Validation(format!("{}: {e}", base.display())))?;
    if let Some(m) = manifest {
        m.add_input(&arm)?;
        m.add_input(&base)?;
    }
    Ok(Some(Arc::new(PolicyPair {
        arm: a.actor,
        base: b.actor,
    })))
}

pub fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train {
            common,
            epochs,
            buffer,
            minibatch,
            update_steps,
            guidance,
            print_config,
        } => {
            let mut loaded = load(&common)?;
            let t = &mut loaded.cfg.train;
            if let Some(e) = epochs {
                t.epochs = Some(e);
            }
            if let Some(b) = buffer {
                t.buffer = b;
            }
            if let Some(n) = minibatch {
                t.minibatch = n;
            }
            if let Some(k) = update_steps {
                t.update_steps = k;
            }
            if let Some(g) = guidance {
                t.guidance = g;
            }
            if t.minibatch > t.buffer {
                t.minibatch = t.buffer;
            }
            loaded.cfg.validate()?;
            if print_config {
                print!("{}", loaded.cfg.to_toml());
                println!("# {}", schedule_line(&loaded.cfg));
                return Ok(());
            }
            cmd_train(&loaded, &common).map(|_| ())
        }
        Command::Eval {
            common,
            policies,
            episodes,
            expert,
            free_float,
            relaxed,
        } => {
            let loaded = load(&common)?;
            install_workers(common.workers);
            let thresholds = if relaxed {
                SuccessThresholds::relaxed()
            } else {
                loaded.cfg.eval.thresholds
            };
            cmd_eval(&loaded, &common, &policies, episodes, expert, free_float, thresholds).map(|_| ())
        }
        Command::Robustness {
            scenario,
            grid,
            common,
            policies,
            controller,
            episodes,
            seeds,
            full_scale,
        } => {
            let loaded = load(&common)?;
            install_workers(common.workers);
            cmd_robustness(
                &loaded,
                &common,
                &policies,
                &RobustnessArgs {
                    scenario,
                    grid,
                    controller,
                    episodes,
                    seeds,
                    full_scale,
                },
            )
            .map(|_| ())
        }
        Command::Replay {
            common,
            policies,
            controller,
            episode,
            horizon,
        } => {
            let loaded = load(&common)?;
            cmd_replay(&loaded, &common, &policies, &controller, episode, horizon).map(|_| ())
        }
        Command::Selftest { inject_sign_flip } => {
            let mut reward = RewardConfig::default();
            if inject_sign_flip {
                reward.k_pos = -reward.k_pos;
            }
            cmd_selftest(&reward)
        }
    }
}

pub fn schedule_line(cfg: &RunConfig) -> String {
    format!(
        "training schedule: {} epochs x {} episodes ({} transitions per buffer, horizon {}), seed {}",
        cfg.train.epochs(cfg.env.horizon),
        cfg.train.episodes_per_epoch(cfg.env.horizon),
        cfg.train.buffer,
        cfg.env.horizon,
        cfg.seed
    )
}

pub fn cmd_train(loaded: &Loaded, common: &Common) -> Result<PathBuf, CliError> {
    let cfg = &loaded.cfg;
    let dir = out_dir(common, cfg, &format!("train-seed{}", cfg.seed))?;
    let snapshot = cfg.to_toml();
    let cfg_path = dir.join("config.toml");
    fs::write(&cfg_path, &snapshot).map_err(io_err(&cfg_path))?;
    let epochs = cfg.train.epochs(cfg.env.horizon);
    println!("{}", schedule_line(cfg));
    let registry = GuidanceRegistry::builtin();
    let outcome = train(&TrainSetup {
        model: &loaded.model,
        env: &cfg.env,
        cfg: &cfg.train,
        thresholds: cfg.eval.thresholds,
        guidance: &registry,
        out_dir: Some(&dir),
        workers: common.workers,
        seed: cfg.seed,
    })
    .map_err(|e| match e {
        spacearm_learn::trainer::TrainError::Config(m) | spacearm_learn::trainer::TrainError::UnknownGuidance(m) => {
            CliError::Validation(m)
        }
        other => runtime(other),
    })?;

    let mut manifest = Manifest::new("train", cfg.seed, &loaded.model.checksum, &snapshot, common.workers);
    manifest.add_output(&dir, &cfg_path)?;
    manifest.add_output(&dir, &dir.join("metrics.csv"))?;
    for p in &outcome.checkpoints {
        manifest.add_output(&dir, p)?;
    }
    manifest.extra.insert("epochs".into(), epochs.into());
    if let Some(last) = outcome.log.iter().rev().find_map(|e| e.eval) {
        manifest.extra.insert("final_eval".into(), serde_json::to_value(last).expect("summary serializes"));
    }
    manifest.write(&dir)?;
    println!("run directory: {}", dir.display());
    Ok(dir)
}

pub fn print_table(rows: &[(String, Summary)], thresholds: &SuccessThresholds) {
    println!("{:<12} {:>8} {:>8} {:>10} {:>10} {:>10}", "controller", "episodes", "ASR", "APE (m)", "AOE (rad)", "ABAE (rad)");
    for (name, s) in rows {
        println!(
            "{:<12} {:>8} {:>8.4} {:>10.5} {:>10.5} {:>10.5}",
            name, s.episodes, s.asr, s.ape, s.aoe, s.abae
        );
    }
    println!(
        "ASR: fraction of episodes holding e_pos <= {} m, e_ori <= {} rad and e_att <= {} rad for {} consecutive steps",
        thresholds.pos, thresholds.ori, thresholds.att, thresholds.window
    );
    println!("APE/AOE/ABAE: end-effector position, orientation and base attitude error averaged over the last 10 steps, then over episodes");
}

pub fn cmd_eval(
    loaded: &Loaded,
    common: &Common,
    src: &PolicySource,
    episodes: usize,
    expert: bool,
    free_float: bool,
    thresholds: SuccessThresholds,
) -> Result<Vec<(String, Summary)>, CliError> {
    let cfg = &loaded.cfg;
    let snapshot = cfg.to_toml();
    let mut manifest = Manifest::new("eval", cfg.seed, &loaded.model.checksum, &snapshot, common.workers);
    let policies = load_policies(src, Some(&mut manifest))?;
    if episodes == 0 {
        return Err(CliError::Validation("--episodes must be positive".into()));
    }
    let mut names = Vec::new();
    if policies.is_some() {
        names.push("learned");
    }
    if expert {
        names.push("expert");
    }
    if free_float {
        names.push("free-float");
    }
    if names.is_empty() {
        return Err(CliError::Validation("nothing to evaluate: give --run/--arm/--base, --expert or --free-float".into()));
    }
    let spec = EvalSpec {
        model: &loaded.model,
        env: &cfg.env,
        thresholds,
        episodes,
        seed: cfg.seed,
        stream: rng::EVAL,
    };
    let registry = ControllerRegistry::builtin();
    let ctx = ControllerContext { policies };
    let mut rows = Vec::new();
    for name in names {
        let outcomes = evaluate(&spec, name, &registry, &ctx, None).map_err(runtime)?;
        rows.push((name.to_string(), aggregate(&metrics_of(&outcomes))));
    }
    print_table(&rows, &thresholds);

    let dir = out_dir(common, cfg, &format!("eval-seed{}", cfg.seed))?;
    let path = dir.join("eval.csv");
    let mut w = csv::Writer::from_path(&path).map_err(runtime)?;
    w.write_record(["controller", "episodes", "asr", "ape", "aoe", "abae"]).map_err(runtime)?;
    for (name, s) in &rows {
        w.write_record([
            name.clone(),
            s.episodes.to_string(),
            s.asr.to_string(),
            s.ape.to_string(),
            s.aoe.to_string(),
            s.abae.to_string(),
        ])
        .map_err(runtime)?;
    }
    w.flush().map_err(io_err(&path))?;
    drop(w);
    manifest.add_output(&dir, &path)?;
    manifest.extra.insert("episodes".into(), episodes.into());
    manifest.extra.insert("thresholds".into(), serde_json::to_value(thresholds).expect("thresholds serialize"));
    manifest.write(&dir)?;
    Ok(rows)
}

pub struct RobustnessArgs {
    pub scenario: String,
    pub grid: Option<String>,
    pub controller: String,
    pub episodes: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub full_scale: bool,
}

pub fn cmd_robustness(
    loaded: &Loaded,
    common: &Common,
    src: &PolicySource,
    args: &RobustnessArgs,
) -> Result<PathBuf, CliError> {
    let cfg = &loaded.cfg;
    let scenarios = ScenarioRegistry::builtin();
    if scenarios.get(&args.scenario).is_none() {
        let known: Vec<_> = scenarios.names().collect();
        return Err(CliError::Validation(format!(
            "unknown scenario {:?}; expected one of {}",
            args.scenario,
            known.join(", ")
        )));
    }
    let grid_text: Cow<'_, str> = match (&args.grid, cfg.robustness.grids.get(&args.scenario)) {
        (Some(g), _) => Cow::Borrowed(g),
        (None, Some(g)) => Cow::Borrowed(g),
        (None, None) => return Err(CliError::Validation(format!("no grid configured for {}", args.scenario))),
    };
    let grid = parse_grid(&grid_text).map_err(|e| CliError::Validation(e.to_string()))?;
    let (mut episodes, mut seeds) = (cfg.robustness.episodes, cfg.robustness.seeds.clone());
    if args.full_scale {
        episodes = 5000;
        seeds = (0..5).collect();
    }
    if let Some(e) = args.episodes {
        episodes = e;
    }
    if let Some(s) = &args.seeds {
        seeds = s.clone();
    }
    if episodes == 0 || seeds.is_empty() {
        return Err(CliError::Validation("episodes and seeds must be non-empty".into()));
    }

    let snapshot = cfg.to_toml();
    let mut manifest = Manifest::new("robustness", cfg.seed, &loaded.model.checksum, &snapshot, common.workers);
    let registry = ControllerRegistry::builtin();
    if !registry.contains(&args.controller) {
        return Err(CliError::Validation(format!("unknown controller {:?}", args.controller)));
    }
    let policies = load_policies(src, Some(&mut manifest))?;
    if args.controller == "learned" && policies.is_none() {
        return Err(CliError::Validation("the learned controller needs --run or --arm/--base".into()));
    }
    let spec = CampaignSpec {
        eval: EvalSpec {
            model: &loaded.model,
            env: &cfg.env,
            thresholds: cfg.eval.thresholds,
            episodes,
            seed: cfg.seed,
            stream: rng::SCENARIO,
        },
        controller: &args.controller,
        scenario: &args.scenario,
        grid: &grid,
        seeds: &seeds,
    };
    let results = run_scenario(&spec, &scenarios, &registry, &ControllerContext { policies }).map_err(|e| match e {
        spacearm_learn::eval::CampaignError::Invalid(m) => CliError::Validation(m),
        other => runtime(other),
    })?;
    let dir = out_dir(common, cfg, &format!("robustness-{}-{}", args.controller, args.scenario))?;
    let files = plot_export(&dir, &args.scenario, &results).map_err(runtime)?;
    for f in &files {
        manifest.add_output(&dir, f)?;
    }
    let unit = scenarios.get(&args.scenario).map(|s| s.unit()).unwrap_or_default();
    manifest.extra.insert("scenario".into(), args.scenario.clone().into());
    manifest.extra.insert("unit".into(), unit.into());
    manifest.extra.insert("controller".into(), args.controller.clone().into());
    manifest.extra.insert("grid".into(), serde_json::to_value(&grid).expect("grid serializes"));
    manifest.extra.insert("seeds".into(), serde_json::to_value(&seeds).expect("seeds serialize"));
    manifest.extra.insert("episodes".into(), episodes.into());
    manifest.write(&dir)?;
    for r in &results {
        let asr = r.stat(|s| s.asr);
        let abae = r.stat(|s| s.abae);
        println!(
            "{} = {} {unit}: ASR {:.4} ± {:.4}, ABAE {:.5} ± {:.5}",
            args.scenario, r.value, asr.mean, asr.std, abae.mean, abae.std
        );
    }
    println!("results: {}", dir.display());
    Ok(dir)
}

pub fn cmd_replay(
    loaded: &Loaded,
    common: &Common,
    src: &PolicySource,
    controller: &str,
    episode: usize,
    horizon: u32,
) -> Result<PathBuf, CliError> {
    let cfg = &loaded.cfg;
    let snapshot = cfg.to_toml();
    let mut manifest = Manifest::new("replay", cfg.seed, &loaded.model.checksum, &snapshot, common.workers);
    let policies = load_policies(src, Some(&mut manifest))?;
    let registry = ControllerRegistry::builtin();
    let spec = EvalSpec {
        model: &loaded.model,
        env: &cfg.env,
        thresholds: cfg.eval.thresholds,
        episodes: 1,
        seed: cfg.seed,
        stream: rng::EVAL,
    };
    let out = maintenance_replay(&spec, controller, &registry, &ControllerContext { policies }, episode, horizon)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let dir = out_dir(common, cfg, &format!("replay-{controller}-ep{episode}"))?;
    let path = dir.join("trace.csv");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    write_trace(file, &out.trace.records).map_err(runtime)?;
    manifest.add_output(&dir, &path)?;
    manifest.extra.insert("episode".into(), episode.into());
    manifest.extra.insert("horizon".into(), horizon.into());
    manifest.write(&dir)?;
    if let Some(e) = out.trace.failure {
        return Err(CliError::Runtime(format!("episode aborted: {e}")));
    }
    println!("{} steps written to {}", out.trace.records.len(), path.display());
    Ok(path)
}

pub fn cmd_selftest(reward: &RewardConfig) -> Result<(), CliError> {
    let results = selftest::run(reward);
    let mut failed = 0;
    for (c, dt) in &results {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        if !c.passed() {
            failed += 1;
        }
        println!("{status} {:<52} error {:.3e} (tolerance {:.1e}, {:.2?})", c.name, c.error, c.tolerance, dt);
    }
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} of {} checks failed", results.len())));
    }
    println!("all {} checks passed", results.len());
    Ok(())
}
