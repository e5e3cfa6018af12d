use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agents::{A2cConfig, AgentKind, QConfig};
use crate::env::{BrickWallParams, DotMazeParams, EnvConfig, GameKind, NativeRewards, SkiRunParams, DEFAULT_EPISODE_CAP};
use crate::interact::NoiseModel;
use crate::manual::{SourceTag, DEFAULT_MAX_TOKENS, DEFAULT_TOP_K};
use crate::provider::ProviderSpec;
use crate::reason::{check_magnitude, DEFAULT_REWARD};

pub const DEFAULT_WINDOW: usize = 50;
pub const DEFAULT_STEPS: u64 = 200_000;

/// Everything `run` needs. Loaded from TOML; CLI flags override fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub game: GameKind,
    pub agent: AgentKind,
    pub delayed: bool,
    /// Without a manual only the baseline (and random) arms run.
    pub manual: Option<PathBuf>,
    pub source_tag: SourceTag,
    pub provider: ProviderSpec,
    pub noise: Option<NoiseModel>,
    pub seeds: Vec<u64>,
    pub steps: u64,
    pub r_p: f64,
    pub r_n: f64,
    pub out: PathBuf,
    pub plot: bool,
    /// Also run a uniform random policy per seed.
    pub random_reference: bool,
    /// Episodes per final-score and correlation window.
    pub window: usize,
    pub top_k: usize,
    pub max_tokens: usize,
    pub episode_cap: u64,
    pub rewards: NativeRewards,
    pub dot_maze: DotMazeParams,
    pub ski_run: SkiRunParams,
    pub brick_wall: BrickWallParams,
    pub q: QConfig,
    pub a2c: A2cConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            game: GameKind::DotMaze,
            agent: AgentKind::Q,
            delayed: false,
            manual: None,
            source_tag: SourceTag::Official,
            provider: ProviderSpec::Lexical,
            noise: None,
            seeds: vec![1, 2, 3],
            steps: DEFAULT_STEPS,
            r_p: DEFAULT_REWARD,
            r_n: DEFAULT_REWARD,
            out: PathBuf::from("runs/latest"),
            plot: false,
            random_reference: true,
            window: DEFAULT_WINDOW,
            top_k: DEFAULT_TOP_K,
            max_tokens: DEFAULT_MAX_TOKENS,
            episode_cap: DEFAULT_EPISODE_CAP,
            rewards: NativeRewards::default(),
            dot_maze: DotMazeParams::default(),
            ski_run: SkiRunParams::default(),
            brick_wall: BrickWallParams::default(),
            q: QConfig::default(),
            a2c: A2cConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn new(game: GameKind, agent: AgentKind) -> Self {
        RunConfig {
            game,
            agent,
            ..RunConfig::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let raw = fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&raw).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(raw: &str) -> Result<Self, HarnessError> {
        toml::from_str(raw).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad(format!("duplicate seeds in {:?}", self.seeds));
        }
        if self.steps == 0 {
            return bad("steps must be positive".into());
        }
        if self.window == 0 {
            return bad("window must be positive".into());
        }
        if self.top_k == 0 {
            return bad("top_k must be positive".into());
        }
        for r in [self.r_p, self.r_n] {
            check_magnitude(r).map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        if let Some(n) = &self.noise {
            n.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        self.q.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.env_config(self.seeds[0])
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn env_config(&self, seed: u64) -> EnvConfig {
        let mut env = EnvConfig::new(self.game, seed).delayed(self.delayed).with_cap(self.episode_cap);
        env.rewards = self.rewards;
        env.dot_maze = self.dot_maze;
        env.ski_run = self.ski_run;
        env.brick_wall = self.brick_wall;
        env
    }
}
