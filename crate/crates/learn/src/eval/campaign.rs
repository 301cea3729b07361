//! Robustness campaigns: one named fault swept over a grid, several seeds
//! per grid point.
//!
//! Two files per scenario: `<name>.csv` with one row per grid point
//! (`value`, `episodes`, then `mean`/`std` of ASR, APE, AOE, ABAE across
//! seeds) and `<name>_seeds.csv` with one row per (grid point, seed). The
//! per-seed file alone reconstructs the campaign.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spacearm_core::env::{Scenario, ScenarioRegistry};
use spacearm_core::rng;

use super::controllers::{ControllerContext, ControllerError, ControllerRegistry};
use super::metrics::{aggregate, Summary};
use super::runner::{evaluate, metrics_of, EvalSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub summary: Summary,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Population standard deviation; zero for a single value.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub scenario: String,
    pub value: f64,
    pub per_seed: Vec<SeedResult>,
}

impl CampaignResult {
    pub fn stat(&self, f: fn(&Summary) -> f64) -> MeanStd {
        MeanStd::of(&self.per_seed.iter().map(|s| f(&s.summary)).collect::<Vec<_>>())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("campaign io: {0}")]
    Io(#[from] std::io::Error),
    #[error("campaign file: {0}")]
    Csv(#[from] csv::Error),
}

/// Parses `start:step:end` (inclusive end, tolerant to rounding).
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CampaignError> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CampaignError::Invalid(format!("grid {s:?} must look like start:step:end"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let (a, step, b) = (nums[0], nums[1], nums[2]);
    if !(a.is_finite() && b.is_finite() && step.is_finite()) || step <= 0.0 {
        return Err(CampaignError::Invalid(format!("grid {s:?}: step must be positive")));
    }
    if b < a {
        return Err(CampaignError::Invalid(format!("grid {s:?} is empty")));
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| a + step * k as f64).collect())
}

pub struct CampaignSpec<'a> {
    pub eval: EvalSpec<'a>,
    pub controller: &'a str,
    pub scenario: &'a str,
    pub grid: &'a [f64],
    pub seeds: &'a [u64],
}

pub fn run_scenario(
    spec: &CampaignSpec<'_>,
    scenarios: &ScenarioRegistry,
    controllers: &ControllerRegistry,
    ctx: &ControllerContext,
) -> Result<Vec<CampaignResult>, CampaignError> {
    let scenario: &dyn Scenario = scenarios
        .get(spec.scenario)
        .ok_or_else(|| CampaignError::UnknownScenario(spec.scenario.into()))?;
    if spec.grid.is_empty() {
        return Err(CampaignError::Invalid("scenario grid is empty".into()));
    }
    for &m in spec.grid {
        scenario.validate(m).map_err(CampaignError::Invalid)?;
    }
    let mut out = Vec::with_capacity(spec.grid.len());
    for &value in spec.grid {
        let mut per_seed = Vec::with_capacity(spec.seeds.len());
        for &seed in spec.seeds {
            let eval = EvalSpec {
                seed,
                stream: rng::SCENARIO,
                ..spec.eval
            };
            let outcomes = evaluate(&eval, spec.controller, controllers, ctx, Some((scenario, value)))?;
            per_seed.push(SeedResult {
                seed,
                summary: aggregate(&metrics_of(&outcomes)),
            });
        }
        log::info!("{} = {value}: done", spec.scenario);
        out.push(CampaignResult {
            scenario: spec.scenario.into(),
            value,
            per_seed,
        });
    }
    Ok(out)
}

const SUMMARY_HEADER: [&str; 10] = [
    "value", "episodes", "asr_mean", "asr_std", "ape_mean", "ape_std", "aoe_mean", "aoe_std", "abae_mean", "abae_std",
];
const SEED_HEADER: [&str; 7] = ["value", "seed", "episodes", "asr", "ape", "aoe", "abae"];

pub fn write_summary<W: Write>(out: W, results: &[CampaignResult]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in results {
        let episodes = r.per_seed.first().map_or(0, |s| s.summary.episodes);
        let mut row = vec![r.value.to_string(), episodes.to_string()];
        for f in [|s: &Summary| s.asr, |s: &Summary| s.ape, |s: &Summary| s.aoe, |s: &Summary| s.abae] {
            let m = r.stat(f);
            row.push(m.mean.to_string());
            row.push(m.std.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_seeds<W: Write>(out: W, results: &[CampaignResult]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SEED_HEADER)?;
    for r in results {
        for s in &r.per_seed {
            let m = &s.summary;
            w.write_record([
                r.value.to_string(),
                s.seed.to_string(),
                m.episodes.to_string(),
                m.asr.to_string(),
                m.ape.to_string(),
                m.aoe.to_string(),
                m.abae.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Re-reads a per-seed file; rows sharing a value are grouped in file order.
pub fn read_seeds<R: Read>(scenario: &str, input: R) -> Result<Vec<CampaignResult>, CampaignError> {
    let mut rd = csv::Reader::from_reader(input);
    let mut out: Vec<CampaignResult> = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let field = |i: usize| -> Result<&str, CampaignError> {
            rec.get(i).ok_or_else(|| CampaignError::Invalid(format!("short row {rec:?}")))
        };
        let num = |i: usize| -> Result<f64, CampaignError> {
            field(i)?.parse().map_err(|_| CampaignError::Invalid(format!("bad number in row {rec:?}")))
        };
        let value = num(0)?;
        let seed: u64 = field(1)?.parse().map_err(|_| CampaignError::Invalid(format!("bad seed in row {rec:?}")))?;
        let episodes: usize = field(2)?.parse().map_err(|_| CampaignError::Invalid(format!("bad count in row {rec:?}")))?;
        let summary = Summary {
            episodes,
            asr: num(3)?,
            ape: num(4)?,
            aoe: num(5)?,
            abae: num(6)?,
        };
        match out.last_mut() {
            Some(last) if last.value.to_bits() == value.to_bits() => last.per_seed.push(SeedResult { seed, summary }),
            _ => out.push(CampaignResult {
                scenario: scenario.into(),
                value,
                per_seed: vec![SeedResult { seed, summary }],
            }),
        }
    }
    Ok(out)
}

/// Writes both files for one scenario; returns their paths.
pub fn plot_export(dir: &Path, scenario: &str, results: &[CampaignResult]) -> Result<[PathBuf; 2], CampaignError> {
    fs::create_dir_all(dir)?;
    let summary = dir.join(format!("{scenario}.csv"));
    let seeds = dir.join(format!("{scenario}_seeds.csv"));
    write_summary(fs::File::create(&summary)?, results)?;
    write_seeds(fs::File::create(&seeds)?, results)?;
    Ok([summary, seeds])
}
