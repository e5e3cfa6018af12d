//! Learners and the training loop that feeds them environment plus
//! auxiliary reward.

mod a2c;
mod features;
mod qlearn;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use a2c::{
    a2c_loss, a2c_step, advantage, GRAD_CHECK_FLOOR, loss_and_grad, max_relative_error, numerical_grad, sample_action, softmax,
    A2cAgent, A2cConfig, Mlp, Optimizer, OptimizerState, PolicyParams, Sample,
};
pub use features::{feature_dim, FeatureEncoder, Observation, BINS, KEY_DIMS, NUM_KEYS};
pub use qlearn::{greedy, q_update, QAgent, QConfig, QTable};

use crate::env::{make_env, EnvConfig, EnvError, GameKind, StepResult};
use crate::interact::{shape, InteractionDetector, InteractionEvent, NoiseModel};
use crate::provider::sha256_hex;
use crate::reason::RewardTable;
use crate::trace::{EpisodeTrace, StepRecord};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("agent configuration: {0}")]
    Config(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Q,
    A2c,
}

impl FromStr for AgentKind {
    type Err = AgentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "q" => Ok(AgentKind::Q),
            "a2c" => Ok(AgentKind::A2c),
            _ => Err(AgentError::Config(format!("unknown agent `{s}` (q | a2c)"))),
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentKind::Q => "q",
            AgentKind::A2c => "a2c",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    pub action: usize,
    /// Clipped total reward.
    pub reward: f64,
    pub next: Observation,
    pub terminal: bool,
}

pub trait Agent {
    fn act(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> usize;
    fn learn(&mut self, t: &Transition) -> Result<(), AgentError>;
}

/// Uniform random policy, the reference the learners are compared to.
#[derive(Debug, Clone)]
pub struct RandomAgent {
    pub num_actions: usize,
}

impl Agent for RandomAgent {
    fn act(&mut self, _: &Observation, rng: &mut ChaCha8Rng) -> usize {
        use rand::Rng;
        rng.gen_range(0..self.num_actions)
    }
    fn learn(&mut self, _: &Transition) -> Result<(), AgentError> {
        Ok(())
    }
}

pub fn clip_reward(r: f64) -> f64 {
    r.clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub env: EnvConfig,
    pub agent: AgentKind,
    pub steps: u64,
    pub seed: u64,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    #[serde(default = "yes")]
    pub clip: bool,
    #[serde(default)]
    pub q: QConfig,
    #[serde(default)]
    pub a2c: A2cConfig,
}

fn yes() -> bool {
    true
}

impl TrainSpec {
    pub fn new(env: EnvConfig, agent: AgentKind, steps: u64, seed: u64) -> Self {
        TrainSpec {
            env,
            agent,
            steps,
            seed,
            noise: None,
            clip: true,
            q: QConfig::default(),
            a2c: A2cConfig::default(),
        }
    }

    /// Hash of the canonical JSON form, stored in checkpoints.
    pub fn config_hash(&self) -> String {
        sha256_hex(&serde_json::to_string(self).expect("spec serializes"))
    }
}

/// Per-tick hook for frame dumps and event logs.
pub trait StepObserver {
    fn on_step(
        &mut self,
        global_step: u64,
        result: &StepResult,
        events: &[InteractionEvent],
        table: Option<&RewardTable>,
    ) -> Result<(), AgentError>;
}

pub struct NoObserver;

impl StepObserver for NoObserver {
    fn on_step(&mut self, _: u64, _: &StepResult, _: &[InteractionEvent], _: Option<&RewardTable>) -> Result<(), AgentError> {
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Learner {
    Q(QAgent),
    A2c(A2cAgent),
    Random(RandomAgent),
}

impl Learner {
    pub fn new(spec: &TrainSpec, rng: &mut ChaCha8Rng) -> Result<Self, AgentError> {
        let game = spec.env.game;
        Ok(match spec.agent {
            AgentKind::Q => Learner::Q(QAgent::new(game.num_actions(), spec.q.clone(), spec.steps)?),
            AgentKind::A2c => Learner::A2c(A2cAgent::new(
                feature_dim(game),
                game.num_actions(),
                spec.a2c.clone(),
                rng,
            )?),
        })
    }

    fn agent(&mut self) -> &mut dyn Agent {
        match self {
            Learner::Q(a) => a,
            Learner::A2c(a) => a,
            Learner::Random(a) => a,
        }
    }
}

pub struct TrainOutput {
    /// Every episode in order; the last one may be incomplete.
    pub traces: Vec<EpisodeTrace>,
    pub learner: Learner,
}

impl TrainOutput {
    pub fn complete(&self) -> impl Iterator<Item = &EpisodeTrace> {
        self.traces.iter().filter(|t| t.complete)
    }
}

fn check_table(game: GameKind, table: &RewardTable) -> Result<(), AgentError> {
    let classes = game.object_classes();
    let known = table.rules().filter(|r| classes.contains(&r.object.as_str())).count();
    if !table.is_empty() && known == 0 {
        return Err(AgentError::Config(format!(
            "reward table has no rule for any {game} object ({classes:?})"
        )));
    }
    for r in table.rules().filter(|r| !classes.contains(&r.object.as_str())) {
        warn!("rule for `{}` never fires in {game}", r.object);
    }
    Ok(())
}

/// Train for `spec.steps` environment steps. With `table = None` no
/// interaction detection runs at all.
pub fn train(
    spec: &TrainSpec,
    table: Option<&RewardTable>,
    observer: &mut dyn StepObserver,
) -> Result<TrainOutput, AgentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xA6E7_5EED);
    let learner = Learner::new(spec, &mut rng)?;
    run_learner(spec, table, learner, rng, observer)
}

/// Same loop with a uniform random policy.
pub fn run_random(spec: &TrainSpec, table: Option<&RewardTable>) -> Result<TrainOutput, AgentError> {
    let rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xA6E7_5EED);
    let learner = Learner::Random(RandomAgent {
        num_actions: spec.env.game.num_actions(),
    });
    run_learner(spec, table, learner, rng, &mut NoObserver)
}

fn run_learner(
    spec: &TrainSpec,
    table: Option<&RewardTable>,
    mut learner: Learner,
    mut rng: ChaCha8Rng,
    observer: &mut dyn StepObserver,
) -> Result<TrainOutput, AgentError> {
    if spec.steps == 0 {
        return Err(AgentError::Config("steps must be positive".into()));
    }
    let game = spec.env.game;
    let mut env_cfg = spec.env.clone();
    env_cfg.seed = spec.seed;
    let mut env = make_env(&env_cfg)?;
    if let Some(t) = table {
        check_table(game, t)?;
    }
    let mut detector = table.map(|_| {
        let noise = spec.noise.map(|n| NoiseModel {
            seed: n.seed ^ spec.seed.wrapping_mul(0x2545_F491_4F6C_DD1D),
            ..n
        });
        InteractionDetector::new(game, noise)
    });
    let mut encoder = FeatureEncoder::new(game);
    let mut traces = Vec::new();
    let mut global = 0u64;

    'outer: while global < spec.steps {
        let first = env.reset();
        encoder.reset();
        if let Some(d) = detector.as_mut() {
            d.prime(&first);
        }
        let mut obs = encoder.encode(&first);
        let mut trace = EpisodeTrace::new(traces.len() as u64, global);
        loop {
            let action = learner.agent().act(&obs, &mut rng);
            let r = env.step(action)?;
            global += 1;
            let (events, aux) = match (detector.as_mut(), table) {
                (Some(d), Some(t)) => {
                    let ev = d.observe(&r);
                    let aux = shape(&ev, t);
                    (ev, aux)
                }
                _ => (Vec::new(), 0.0),
            };
            observer.on_step(global, &r, &events, table)?;
            let raw = r.reward + aux;
            let total = if spec.clip { clip_reward(raw) } else { raw };
            let next = encoder.encode(&r);
            learner.agent().learn(&Transition {
                obs,
                action,
                reward: total,
                next: next.clone(),
                terminal: r.terminal,
            })?;
            trace.steps.push(StepRecord {
                step: r.info.step,
                action: action as u32,
                env_reward: r.reward,
                native_reward: r.info.native_reward,
                aux_reward: aux,
                total_reward: total,
            });
            trace.events.extend(events);
            obs = next;
            if r.terminal {
                trace.complete = true;
                traces.push(trace);
                continue 'outer;
            }
            if global >= spec.steps {
                traces.push(trace);
                break 'outer;
            }
        }
    }
    Ok(TrainOutput { traces, learner })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckpointBody {
    Q { config: QConfig, table: QTable },
    A2c { config: A2cConfig, params: PolicyParams },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub game: GameKind,
    pub config_hash: String,
    pub body: CheckpointBody,
}

impl Checkpoint {
    pub fn from_learner(spec: &TrainSpec, learner: &Learner) -> Option<Self> {
        let body = match learner {
            Learner::Q(a) => CheckpointBody::Q {
                config: a.config.clone(),
                table: a.table.clone(),
            },
            Learner::A2c(a) => CheckpointBody::A2c {
                config: a.config.clone(),
                params: a.params.clone(),
            },
            Learner::Random(_) => return None,
        };
        Some(Checkpoint {
            version: CHECKPOINT_VERSION,
            game: spec.env.game,
            config_hash: spec.config_hash(),
            body,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        let json = serde_json::to_string(self).map_err(|e| AgentError::Io(e.to_string()))?;
        fs::write(path, json).map_err(|e| AgentError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let raw = fs::read_to_string(path).map_err(|e| AgentError::Io(format!("{}: {e}", path.display())))?;
        let c: Checkpoint = serde_json::from_str(&raw).map_err(|e| AgentError::Io(format!("{}: {e}", path.display())))?;
        if c.version != CHECKPOINT_VERSION {
            return Err(AgentError::Io(format!("unsupported checkpoint version {}", c.version)));
        }
        Ok(c)
    }
}
