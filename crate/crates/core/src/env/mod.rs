//! Small deterministic arcade games with ground-truth object annotations.
//!
//! Every game runs on a grid of cells (default 40x52, four logical units per
//! cell) and reports, at each tick, the rendered frame plus the list of
//! visible objects with their boxes. Objects that are consumed during a tick
//! (an eaten pellet, a knocked-out brick) are still reported on that tick so
//! the contact is visible in the frame, and disappear on the next one.

mod brick_wall;
mod delayed;
mod dot_maze;
mod geometry;
mod ski_run;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use brick_wall::{BrickWall, BrickWallParams};
pub use delayed::{wrap_delayed, DelayedReward};
pub use dot_maze::{DotMaze, DotMazeParams};
pub use geometry::{BBox, CELL_SIZE};
pub use ski_run::{SkiRun, SkiRunParams};

use crate::trace::EpisodeTrace;

pub const DEFAULT_WIDTH: i32 = 40;
pub const DEFAULT_HEIGHT: i32 = 52;
pub const DEFAULT_EPISODE_CAP: u64 = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("unknown game `{0}` (expected ski_run, dot_maze or brick_wall)")]
    UnknownGame(String),
    #[error("step called on a terminal episode; call reset first")]
    StepAfterTerminal,
    #[error("action {action} out of range for {num_actions} actions")]
    ActionOutOfRange { action: usize, num_actions: usize },
    #[error("environment already reports delayed rewards")]
    AlreadyDelayed,
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("episode trace is incomplete")]
    IncompleteEpisode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    SkiRun,
    DotMaze,
    BrickWall,
}

impl GameKind {
    pub const ALL: [GameKind; 3] = [GameKind::SkiRun, GameKind::DotMaze, GameKind::BrickWall];

    pub fn as_str(&self) -> &'static str {
        match self {
            GameKind::SkiRun => "ski_run",
            GameKind::DotMaze => "dot_maze",
            GameKind::BrickWall => "brick_wall",
        }
    }

    /// Non-agent object classes the game can emit.
    pub fn object_classes(&self) -> &'static [&'static str] {
        match self {
            GameKind::SkiRun => &["gate", "tree"],
            GameKind::DotMaze => &["ghost", "pellet"],
            GameKind::BrickWall => &["ball", "brick"],
        }
    }

    pub fn agent_class(&self) -> &'static str {
        match self {
            GameKind::SkiRun => "skier",
            GameKind::DotMaze => "agent",
            GameKind::BrickWall => "paddle",
        }
    }

    pub fn action_names(&self) -> &'static [&'static str] {
        match self {
            GameKind::SkiRun | GameKind::BrickWall => &["left", "right", "noop"],
            GameKind::DotMaze => &["up", "down", "left", "right"],
        }
    }

    pub fn num_actions(&self) -> usize {
        self.action_names().len()
    }
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GameKind {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ski_run" => Ok(GameKind::SkiRun),
            "dot_maze" => Ok(GameKind::DotMaze),
            "brick_wall" => Ok(GameKind::BrickWall),
            other => Err(EnvError::UnknownGame(other.to_string())),
        }
    }
}

/// A classed, located entity in a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GameObject {
    pub id: u32,
    pub class_name: &'static str,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub is_agent: bool,
}

/// Cell-class raster. Cell values index [`CELL_CLASSES`]; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<u8>,
}

pub const CELL_CLASSES: [&str; 12] = [
    "empty", "wall", "agent", "ghost", "pellet", "paddle", "ball", "brick", "skier", "tree",
    "gate", "flag",
];

pub fn cell_class_index(class: &str) -> u8 {
    CELL_CLASSES.iter().position(|c| *c == class).unwrap_or(0) as u8
}

impl Frame {
    pub fn new(width: usize, height: usize) -> Self {
        Frame {
            width,
            height,
            cells: vec![0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.cells[y * self.width + x]
    }

    pub fn set(&mut self, x: i32, y: i32, value: u8) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.cells[y as usize * self.width + x as usize] = value;
        }
    }

    pub fn fill(&mut self, b: &BBox, value: u8) {
        for y in b.y_min..=b.y_max {
            for x in b.x_min..=b.x_max {
                self.set(x, y, value);
            }
        }
    }

    /// Binary PGM (P5), one byte per cell holding the class index.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.cells);
        out
    }

    pub fn write_pgm(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_pgm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepInfo {
    /// Ticks since the last reset.
    pub step: u64,
    /// Reward produced by the game itself this tick, whatever the wrapper
    /// reports in `reward`.
    pub native_reward: f64,
    pub lives: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub frame: Frame,
    pub objects: Vec<GameObject>,
    pub reward: f64,
    pub terminal: bool,
    pub info: StepInfo,
}

impl StepResult {
    pub fn agent(&self) -> &GameObject {
        self.objects
            .iter()
            .find(|o| o.is_agent)
            .expect("every frame carries exactly one agent")
    }
}

/// Native reward magnitudes for all games.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NativeRewards {
    pub pellet: f64,
    pub ghost: f64,
    pub gate_pass: f64,
    pub gate_miss: f64,
    pub brick: f64,
    pub ball_drop: f64,
}

impl Default for NativeRewards {
    fn default() -> Self {
        NativeRewards {
            pellet: 1.0,
            // a catch costs a life, not points
            ghost: 0.0,
            gate_pass: 10.0,
            gate_miss: -5.0,
            brick: 1.0,
            ball_drop: -5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub game: GameKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub episode_cap: u64,
    #[serde(default)]
    pub delayed: bool,
    #[serde(default = "default_width")]
    pub width: i32,
    #[serde(default = "default_height")]
    pub height: i32,
    #[serde(default)]
    pub rewards: NativeRewards,
    #[serde(default)]
    pub dot_maze: DotMazeParams,
    #[serde(default)]
    pub ski_run: SkiRunParams,
    #[serde(default)]
    pub brick_wall: BrickWallParams,
}

fn default_cap() -> u64 {
    DEFAULT_EPISODE_CAP
}
fn default_width() -> i32 {
    DEFAULT_WIDTH
}
fn default_height() -> i32 {
    DEFAULT_HEIGHT
}

impl EnvConfig {
    pub fn new(game: GameKind, seed: u64) -> Self {
        EnvConfig {
            game,
            seed,
            episode_cap: DEFAULT_EPISODE_CAP,
            delayed: false,
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            rewards: NativeRewards::default(),
            dot_maze: DotMazeParams::default(),
            ski_run: SkiRunParams::default(),
            brick_wall: BrickWallParams::default(),
        }
    }

    pub fn delayed(mut self, delayed: bool) -> Self {
        self.delayed = delayed;
        self
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.episode_cap = cap;
        self
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.episode_cap == 0 {
            return Err(EnvError::InvalidConfig("episode_cap must be > 0".into()));
        }
        if self.width < 16 || self.height < 16 {
            return Err(EnvError::InvalidConfig(format!(
                "grid {}x{} is too small (min 16x16)",
                self.width, self.height
            )));
        }
        let r = &self.rewards;
        for v in [r.pellet, r.ghost, r.gate_pass, r.gate_miss, r.brick, r.ball_drop] {
            if !v.is_finite() {
                return Err(EnvError::InvalidConfig("native rewards must be finite".into()));
            }
        }
        Ok(())
    }
}

/// Gym-style interface shared by the native games and the delayed wrapper.
pub trait Environment: Send {
    fn game(&self) -> GameKind;

    fn num_actions(&self) -> usize {
        self.game().num_actions()
    }

    /// Start a new episode. The first reset after construction is fully
    /// determined by the config seed; later resets continue the same stream.
    fn reset(&mut self) -> StepResult;

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError>;

    fn is_delayed(&self) -> bool {
        false
    }
}

/// Output of one game tick, before episode bookkeeping.
pub(crate) struct Tick {
    pub reward: f64,
    pub over: bool,
}

pub(crate) trait GameLogic: Send {
    fn reset(&mut self, rng: &mut ChaCha8Rng);
    fn advance(&mut self, action: usize, rng: &mut ChaCha8Rng) -> Tick;
    fn objects(&self, out: &mut Vec<GameObject>);
    fn render(&self, frame: &mut Frame);
    fn dims(&self) -> (i32, i32);
    fn lives(&self) -> u32;
}

/// Undelayed game with episode bookkeeping (step counter, cap, terminal flag).
pub struct ArcadeEnv {
    kind: GameKind,
    cap: u64,
    rng: ChaCha8Rng,
    logic: Box<dyn GameLogic>,
    step: u64,
    terminal: bool,
}

impl ArcadeEnv {
    pub fn new(config: &EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let logic: Box<dyn GameLogic> = match config.game {
            GameKind::DotMaze => Box::new(DotMaze::new(config)?),
            GameKind::SkiRun => Box::new(SkiRun::new(config)?),
            GameKind::BrickWall => Box::new(BrickWall::new(config)?),
        };
        Ok(Self::from_logic(config.game, config.episode_cap, config.seed, logic))
    }

    /// Dot maze on a hand-written layout; see [`DotMaze::from_layout`].
    pub fn dot_maze_layout(
        layout: &[&str],
        params: DotMazeParams,
        rewards: NativeRewards,
        seed: u64,
        cap: u64,
    ) -> Result<Self, EnvError> {
        let logic = DotMaze::from_layout(layout, params, rewards)?;
        Ok(Self::from_logic(GameKind::DotMaze, cap, seed, Box::new(logic)))
    }

    pub(crate) fn from_logic(kind: GameKind, cap: u64, seed: u64, logic: Box<dyn GameLogic>) -> Self {
        ArcadeEnv {
            kind,
            cap,
            rng: ChaCha8Rng::seed_from_u64(seed),
            logic,
            step: 0,
            terminal: true,
        }
    }

    fn observe(&self, reward: f64) -> StepResult {
        let (w, h) = self.logic.dims();
        let mut frame = Frame::new(w as usize, h as usize);
        self.logic.render(&mut frame);
        let mut objects = Vec::new();
        self.logic.objects(&mut objects);
        StepResult {
            frame,
            objects,
            reward,
            terminal: self.terminal,
            info: StepInfo {
                step: self.step,
                native_reward: reward,
                lives: self.logic.lives(),
            },
        }
    }
}

impl Environment for ArcadeEnv {
    fn game(&self) -> GameKind {
        self.kind
    }

    fn reset(&mut self) -> StepResult {
        self.logic.reset(&mut self.rng);
        self.step = 0;
        self.terminal = false;
        self.observe(0.0)
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        if self.terminal {
            return Err(EnvError::StepAfterTerminal);
        }
        let n = self.kind.num_actions();
        if action >= n {
            return Err(EnvError::ActionOutOfRange {
                action,
                num_actions: n,
            });
        }
        let tick = self.logic.advance(action, &mut self.rng);
        self.step += 1;
        self.terminal = tick.over || self.step >= self.cap;
        Ok(self.observe(tick.reward))
    }
}

/// Build the environment described by `config`, delayed-wrapped when asked.
pub fn make_env(config: &EnvConfig) -> Result<Box<dyn Environment>, EnvError> {
    let env: Box<dyn Environment> = Box::new(ArcadeEnv::new(config)?);
    if config.delayed {
        wrap_delayed(env)
    } else {
        Ok(env)
    }
}

/// Native (undelayed) return of a finished episode.
pub fn game_score(trace: &EpisodeTrace) -> Result<f64, EnvError> {
    if !trace.complete {
        return Err(EnvError::IncompleteEpisode);
    }
    Ok(trace.native_return())
}
