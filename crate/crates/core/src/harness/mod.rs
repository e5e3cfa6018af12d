//! Experiment orchestration: read, reason and train per seed for the
//! baseline and assisted arms, then write curves, a report and a plot.

mod config;
mod metrics;
mod observe;
mod plot;
mod report;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

pub use config::{RunConfig, DEFAULT_STEPS, DEFAULT_WINDOW};
pub use metrics::{
    correlation, episode_points, final_score, learning_curve, mean_curve, mean_std, pearson, read_curves,
    steps_to_reach, write_curves, CurvePoint, EpisodePoint, CURVES_HEADER,
};
pub use observe::{EventLogger, FrameDumper, Observers};
pub use plot::svg;
pub use report::{
    compare, compare_arms, Arm, ArmReport, ArmSummary, Comparison, Failure, FailureKind, RunReport, SeedResult,
};

use crate::agents::{run_random, train, AgentError, NoObserver, TrainSpec};
use crate::manual::{load_manual, read_manual, ContextFile, ManualError};
use crate::provider::ProviderError;
use crate::reason::{build_table, ReasonError, RewardTable};

/// Sample points per learning curve.
pub const CURVE_SAMPLES: u64 = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("provider: {0}")]
    Provider(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("{0}")]
    Io(String),
    #[error("reports are not comparable: {0}")]
    Incomparable(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Provider(_) => 3,
            HarnessError::Divergence(_) => 4,
            _ => 2,
        }
    }
}

impl From<&Failure> for HarnessError {
    fn from(f: &Failure) -> Self {
        let m = f.message.clone();
        match f.kind {
            FailureKind::Config => HarnessError::Config(m),
            FailureKind::Io => HarnessError::Io(m),
            FailureKind::Provider => HarnessError::Provider(m),
            FailureKind::Divergence => HarnessError::Divergence(m),
        }
    }
}

fn fail(kind: FailureKind, message: impl ToString) -> Failure {
    Failure {
        kind,
        message: message.to_string(),
    }
}

impl From<AgentError> for Failure {
    fn from(e: AgentError) -> Self {
        let kind = match e {
            AgentError::Divergence(_) => FailureKind::Divergence,
            AgentError::Io(_) => FailureKind::Io,
            AgentError::Config(_) | AgentError::Env(_) => FailureKind::Config,
        };
        fail(kind, e)
    }
}

impl From<ManualError> for Failure {
    fn from(e: ManualError) -> Self {
        let kind = match e {
            ManualError::Provider { .. } => FailureKind::Provider,
            _ => FailureKind::Config,
        };
        fail(kind, e)
    }
}

impl From<ReasonError> for Failure {
    fn from(e: ReasonError) -> Self {
        let kind = match e {
            ReasonError::Provider { .. } => FailureKind::Provider,
            ReasonError::Io(_) => FailureKind::Io,
            _ => FailureKind::Config,
        };
        fail(kind, e)
    }
}

impl From<ProviderError> for Failure {
    fn from(e: ProviderError) -> Self {
        fail(FailureKind::Provider, e)
    }
}

/// Read the manual and reason over it: the assisted arm's reward table.
pub fn prepare(config: &RunConfig, manual: &Path) -> Result<(ContextFile, RewardTable), Failure> {
    let provider = config.provider.build()?;
    let doc = load_manual(manual, config.source_tag)?;
    let ctx = read_manual(provider.as_ref(), &doc, config.game, config.top_k, None, config.max_tokens)?;
    let table = build_table(provider.as_ref(), &ctx.contexts, config.r_p, config.r_n)?;
    Ok((ctx, table))
}

fn train_spec(config: &RunConfig, seed: u64) -> TrainSpec {
    let mut spec = TrainSpec::new(config.env_config(seed), config.agent, config.steps, seed);
    spec.noise = config.noise;
    spec.q = config.q.clone();
    spec.a2c = config.a2c.clone();
    spec
}

fn run_seed(config: &RunConfig, arm: Arm, seed: u64, table: Option<&RewardTable>, out: &Path) -> SeedResult {
    let spec = train_spec(config, seed);
    let result = match arm {
        Arm::Random => run_random(&spec, None),
        Arm::Baseline => train(&spec, None, &mut NoObserver),
        Arm::Assisted => train(&spec, table, &mut NoObserver),
    };
    let output = match result {
        Ok(o) => o,
        Err(e) => return SeedResult::failed(seed, e.into()),
    };
    let points = episode_points(&output.traces);
    let rel = format!("{arm}/seed-{seed}/curves.csv");
    let path = out.join(&rel);
    let written = path
        .parent()
        .map_or(Ok(()), fs::create_dir_all)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
        .and_then(|_| write_curves(&path, &points));
    if let Err(e) = written {
        return SeedResult::failed(seed, fail(FailureKind::Io, e));
    }
    SeedResult {
        seed,
        final_score: final_score(&points, config.window),
        episodes: points.len(),
        correlation: correlation(&points, config.window),
        curves: Some(rel),
        failure: None,
        curve: learning_curve(&points, config.steps, CURVE_SAMPLES, config.window),
    }
}

fn summarize(arm: Arm, seeds: Vec<SeedResult>) -> ArmReport {
    let finals: Vec<f64> = seeds.iter().filter_map(|s| s.final_score).collect();
    let stats = mean_std(&finals);
    let corrs: Vec<f64> = seeds.iter().filter_map(|s| s.correlation).collect();
    let curves: Vec<Vec<CurvePoint>> = seeds
        .iter()
        .filter(|s| s.final_score.is_some())
        .map(|s| s.curve.clone())
        .collect();
    ArmReport {
        arm,
        mean: stats.map(|s| s.0),
        std: stats.map(|s| s.1),
        correlation: (!corrs.is_empty()).then(|| corrs.iter().sum::<f64>() / corrs.len() as f64),
        curve: mean_curve(&curves),
        seeds,
    }
}

/// Run every configured seed for each arm. Stage failures are recorded per
/// seed; only an invalid config or an unusable output directory is an error.
pub fn run(config: &RunConfig) -> Result<RunReport, HarnessError> {
    config.validate()?;
    let out = config.out.as_path();
    fs::create_dir_all(out).map_err(|e| HarnessError::Io(format!("{}: {e}", out.display())))?;
    fs::write(out.join("config.toml"), config.to_toml())
        .map_err(|e| HarnessError::Io(format!("{}: {e}", out.display())))?;

    let prepared = config.manual.as_deref().map(|m| prepare(config, m));
    let table = match &prepared {
        Some(Ok((ctx, table))) => {
            ctx.save(&out.join("context.json")).map_err(|e| HarnessError::Io(e.to_string()))?;
            table.save(&out.join("rewards.json")).map_err(|e| HarnessError::Io(e.to_string()))?;
            Some(table)
        }
        Some(Err(f)) => {
            log::error!("assisted arm unavailable: {}", f.message);
            None
        }
        None => None,
    };

    let mut arms = vec![Arm::Baseline];
    if prepared.is_some() {
        arms.push(Arm::Assisted);
    }
    if config.random_reference {
        arms.push(Arm::Random);
    }
    let jobs: Vec<(Arm, u64)> = arms
        .iter()
        .flat_map(|&a| config.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let results: Vec<SeedResult> = jobs
        .par_iter()
        .map(|&(arm, seed)| match (arm, &prepared) {
            (Arm::Assisted, Some(Err(f))) => SeedResult::failed(seed, f.clone()),
            _ => run_seed(config, arm, seed, table, out),
        })
        .collect();

    let mut results = results.into_iter();
    let arm_reports: Vec<ArmReport> = arms
        .iter()
        .map(|&a| summarize(a, results.by_ref().take(config.seeds.len()).collect()))
        .collect();

    let find = |a: Arm| arm_reports.iter().find(|r| r.arm == a);
    let comparison = match (find(Arm::Baseline), find(Arm::Assisted)) {
        (Some(b), Some(a)) => Some(compare_arms(config.game, config.steps, ("baseline", b), ("assisted", a))),
        _ => None,
    };
    if config.plot {
        let mut lines: Vec<(&str, &str, &[CurvePoint])> = Vec::new();
        if let Some(b) = find(Arm::Baseline) {
            lines.push(("baseline", "#777777", &b.curve));
        }
        if let Some(a) = find(Arm::Assisted) {
            lines.push(("assisted", "#1f6fd0", &a.curve));
        }
        let title = format!("{} / {} ({} seeds)", config.game, config.agent, config.seeds.len());
        let path = out.join("curves.svg");
        fs::write(&path, svg(&title, &lines)).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    }

    let report = RunReport {
        game: config.game,
        agent: config.agent,
        delayed: config.delayed,
        steps: config.steps,
        seeds: config.seeds.clone(),
        window: config.window,
        r_p: config.r_p,
        r_n: config.r_n,
        provider: config.provider.to_string(),
        manual: config.manual.as_ref().map(|p| p.display().to_string()),
        rewards: table.cloned(),
        arms: arm_reports,
        comparison,
    };
    report.save(&out.join("report.json"))?;
    Ok(report)
}
