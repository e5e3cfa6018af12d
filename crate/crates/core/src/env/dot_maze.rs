use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    cell_class_index, BBox, EnvConfig, EnvError, Frame, GameLogic, GameObject, NativeRewards, Tick,
};

const AGENT_ID: u32 = 0;
const GHOST_ID_BASE: u32 = 1;
const PELLET_ID_BASE: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DotMazeParams {
    /// Grid cells per maze tile.
    pub tile: i32,
    pub ghosts: usize,
    pub lives: u32,
    /// Probability that a ghost step heads toward the agent.
    pub chase_bias: f64,
    /// Ghosts move once every `ghost_period` ticks.
    pub ghost_period: u32,
    /// Interior wall pillars sit on tiles whose coordinates are both
    /// multiples of this spacing. 0 disables pillars.
    pub pillar_spacing: i32,
}

impl Default for DotMazeParams {
    fn default() -> Self {
        DotMazeParams {
            tile: 4,
            ghosts: 1,
            lives: 5,
            chase_bias: 0.9,
            ghost_period: 2,
            pillar_spacing: 2,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Ghost {
    pos: (i32, i32),
    start: (i32, i32),
}

/// Pellet-eating maze with wandering ghosts. Positions are in tiles; every
/// open tile starts with a pellet.
#[derive(Debug, Clone)]
pub struct DotMaze {
    params: DotMazeParams,
    rewards: NativeRewards,
    cols: i32,
    rows: i32,
    walls: Vec<bool>,
    pellet_layout: Vec<bool>,
    pellets: Vec<bool>,
    agent: (i32, i32),
    agent_start: (i32, i32),
    ghosts: Vec<Ghost>,
    lives: u32,
    ticks: u32,
    // pellet eaten this tick, still shown under the agent
    remnant: Option<usize>,
    pending_respawn: bool,
    // last life lost; the game ends on the next, frozen tick
    game_over: bool,
    eaten: u32,
    caught: u32,
}

impl DotMaze {
    pub fn new(config: &EnvConfig) -> Result<Self, EnvError> {
        let p = config.dot_maze;
        if p.tile < 1 {
            return Err(EnvError::InvalidConfig("dot_maze tile must be >= 1".into()));
        }
        let cols = config.width / p.tile;
        let rows = config.height / p.tile;
        if cols < 5 || rows < 5 {
            return Err(EnvError::InvalidConfig("dot_maze needs at least 5x5 tiles".into()));
        }
        let mut layout: Vec<String> = Vec::with_capacity(rows as usize);
        for y in 0..rows {
            let mut line = String::with_capacity(cols as usize);
            for x in 0..cols {
                let border = x == 0 || y == 0 || x == cols - 1 || y == rows - 1;
                let s = p.pillar_spacing;
                let pillar = s > 0 && x % s == 0 && y % s == 0;
                line.push(if border || pillar { '#' } else { '.' });
            }
            layout.push(line);
        }
        // agent bottom centre, ghosts in the top corners
        let ay = rows - 2;
        let mut ax = cols / 2;
        if layout[ay as usize].as_bytes()[ax as usize] == b'#' {
            ax += 1;
        }
        set_char(&mut layout, ax, ay, 'A');
        let corners = [(1, 1), (cols - 2, 1), (1, rows / 2), (cols - 2, rows / 2)];
        for i in 0..p.ghosts {
            let (mut gx, mut gy) = corners[i % corners.len()];
            if layout[gy as usize].as_bytes()[gx as usize] == b'#' {
                gy += 1;
            }
            if layout[gy as usize].as_bytes()[gx as usize] == b'#' {
                gx += 1;
            }
            set_char(&mut layout, gx, gy, 'G');
        }
        let refs: Vec<&str> = layout.iter().map(String::as_str).collect();
        Self::from_layout(&refs, p, config.rewards)
    }

    /// Build from an ASCII layout: `#` wall, `.` pellet, ` ` empty floor,
    /// `A` agent start, `G` ghost start (with a pellet underneath).
    /// `params.ghosts` is ignored; the layout decides.
    pub fn from_layout(
        layout: &[&str],
        params: DotMazeParams,
        rewards: NativeRewards,
    ) -> Result<Self, EnvError> {
        let rows = layout.len() as i32;
        let cols = layout.first().map(|l| l.len()).unwrap_or(0) as i32;
        if rows == 0 || cols == 0 || layout.iter().any(|l| l.len() as i32 != cols) {
            return Err(EnvError::InvalidConfig("layout must be a non-empty rectangle".into()));
        }
        if params.tile < 1 {
            return Err(EnvError::InvalidConfig("dot_maze tile must be >= 1".into()));
        }
        let n = (rows * cols) as usize;
        let mut walls = vec![false; n];
        let mut pellets = vec![false; n];
        let mut agent = None;
        let mut ghosts = Vec::new();
        for (y, line) in layout.iter().enumerate() {
            for (x, c) in line.chars().enumerate() {
                let i = y * cols as usize + x;
                let pos = (x as i32, y as i32);
                match c {
                    '#' => walls[i] = true,
                    '.' => pellets[i] = true,
                    ' ' => {}
                    'A' => agent = Some(pos),
                    'G' => {
                        pellets[i] = true;
                        ghosts.push(Ghost { pos, start: pos });
                    }
                    other => {
                        return Err(EnvError::InvalidConfig(format!(
                            "unexpected layout character `{other}`"
                        )))
                    }
                }
            }
        }
        let agent = agent.ok_or_else(|| EnvError::InvalidConfig("layout has no agent".into()))?;
        if params.lives == 0 {
            return Err(EnvError::InvalidConfig("lives must be >= 1".into()));
        }
        Ok(DotMaze {
            params,
            rewards,
            cols,
            rows,
            walls,
            pellet_layout: pellets.clone(),
            pellets,
            agent,
            agent_start: agent,
            ghosts,
            lives: params.lives,
            ticks: 0,
            remnant: None,
            pending_respawn: false,
            game_over: false,
            eaten: 0,
            caught: 0,
        })
    }

    fn idx(&self, (x, y): (i32, i32)) -> usize {
        (y * self.cols + x) as usize
    }

    fn open(&self, (x, y): (i32, i32)) -> bool {
        x >= 0 && y >= 0 && x < self.cols && y < self.rows && !self.walls[self.idx((x, y))]
    }

    fn tile_box(&self, (x, y): (i32, i32)) -> BBox {
        let t = self.params.tile;
        BBox::at(x * t, y * t, t, t)
    }

    fn pellet_box(&self, (x, y): (i32, i32)) -> BBox {
        let t = self.params.tile;
        let size = (t / 2).max(1);
        let off = (t - size) / 2;
        BBox::at(x * t + off, y * t + off, size, size)
    }

    pub fn pellets_left(&self) -> usize {
        self.pellets.iter().filter(|p| **p).count()
    }

    /// Pellets eaten since the last reset.
    pub fn pellets_eaten(&self) -> u32 {
        self.eaten
    }

    /// Ghost contacts since the last reset.
    pub fn times_caught(&self) -> u32 {
        self.caught
    }

    fn move_ghost(&self, g: &Ghost, rng: &mut ChaCha8Rng) -> (i32, i32) {
        let (x, y) = g.pos;
        let options: Vec<(i32, i32)> = [(x, y - 1), (x, y + 1), (x - 1, y), (x + 1, y)]
            .into_iter()
            .filter(|p| self.open(*p))
            .collect();
        if options.is_empty() {
            return g.pos;
        }
        if rng.gen::<f64>() < self.params.chase_bias {
            let dist = |p: &(i32, i32)| (p.0 - self.agent.0).abs() + (p.1 - self.agent.1).abs();
            let best = options.iter().map(dist).min().unwrap();
            let closer: Vec<_> = options.iter().filter(|p| dist(p) == best).copied().collect();
            *closer.choose(rng).unwrap()
        } else {
            *options.choose(rng).unwrap()
        }
    }
}

fn set_char(layout: &mut [String], x: i32, y: i32, c: char) {
    let line = &mut layout[y as usize];
    line.replace_range(x as usize..x as usize + 1, &c.to_string());
}

impl GameLogic for DotMaze {
    fn reset(&mut self, _rng: &mut ChaCha8Rng) {
        self.pellets.clone_from(&self.pellet_layout);
        self.agent = self.agent_start;
        for g in &mut self.ghosts {
            g.pos = g.start;
        }
        self.lives = self.params.lives;
        self.ticks = 0;
        self.remnant = None;
        self.pending_respawn = false;
        self.game_over = false;
        self.eaten = 0;
        self.caught = 0;
    }

    fn advance(&mut self, action: usize, rng: &mut ChaCha8Rng) -> Tick {
        if self.game_over {
            self.remnant = None;
            self.ticks += 1;
            return Tick { reward: 0.0, over: true };
        }
        if self.pending_respawn {
            self.agent = self.agent_start;
            for g in &mut self.ghosts {
                g.pos = g.start;
            }
            self.pending_respawn = false;
        }
        self.remnant = None;
        self.ticks += 1;

        let (x, y) = self.agent;
        let target = match action {
            0 => (x, y - 1),
            1 => (x, y + 1),
            2 => (x - 1, y),
            _ => (x + 1, y),
        };
        if self.open(target) {
            self.agent = target;
        }

        let mut reward = 0.0;
        let here = self.idx(self.agent);
        if self.pellets[here] {
            self.pellets[here] = false;
            self.remnant = Some(here);
            self.eaten += 1;
            reward += self.rewards.pellet;
        }

        // A ghost sitting on the agent's new tile catches it before moving,
        // which also covers the two swapping places.
        let mut caught = self.ghosts.iter().any(|g| g.pos == self.agent);
        if !caught && self.ticks % self.params.ghost_period.max(1) == 0 {
            for i in 0..self.ghosts.len() {
                let next = self.move_ghost(&self.ghosts[i], rng);
                self.ghosts[i].pos = next;
                if next == self.agent {
                    caught = true;
                }
            }
        }
        if caught {
            reward += self.rewards.ghost;
            self.caught += 1;
            self.lives -= 1;
            self.pending_respawn = self.lives > 0;
            self.game_over = self.lives == 0;
        }
        Tick {
            reward,
            over: self.pellets_left() == 0,
        }
    }

    fn objects(&self, out: &mut Vec<GameObject>) {
        out.push(GameObject {
            id: AGENT_ID,
            class_name: "agent",
            bbox: self.tile_box(self.agent),
            is_agent: true,
        });
        for (i, g) in self.ghosts.iter().enumerate() {
            out.push(GameObject {
                id: GHOST_ID_BASE + i as u32,
                class_name: "ghost",
                bbox: self.tile_box(g.pos),
                is_agent: false,
            });
        }
        for (i, &p) in self.pellets.iter().enumerate() {
            if p || self.remnant == Some(i) {
                let pos = (i as i32 % self.cols, i as i32 / self.cols);
                out.push(GameObject {
                    id: PELLET_ID_BASE + i as u32,
                    class_name: "pellet",
                    bbox: self.pellet_box(pos),
                    is_agent: false,
                });
            }
        }
    }

    fn render(&self, frame: &mut Frame) {
        let wall = cell_class_index("wall");
        for (i, &w) in self.walls.iter().enumerate() {
            if w {
                let pos = (i as i32 % self.cols, i as i32 / self.cols);
                frame.fill(&self.tile_box(pos), wall);
            }
        }
        let mut objs = Vec::new();
        self.objects(&mut objs);
        // pellets under agents and ghosts
        for o in objs.iter().rev() {
            frame.fill(&o.bbox, cell_class_index(o.class_name));
        }
    }

    fn dims(&self) -> (i32, i32) {
        (self.cols * self.params.tile, self.rows * self.params.tile)
    }

    fn lives(&self) -> u32 {
        self.lives
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ArcadeEnv, Environment};

    fn tiny(layout: &[&str]) -> ArcadeEnv {
        let params = DotMazeParams {
            tile: 1,
            ghost_period: 1,
            lives: 3,
            ..DotMazeParams::default()
        };
        let rewards = NativeRewards {
            ghost: -10.0,
            ..NativeRewards::default()
        };
        ArcadeEnv::dot_maze_layout(layout, params, rewards, 3, 100).unwrap()
    }

    #[test]
    fn two_step_trace_on_small_maze() {
        // agent at (1,3); pellets at (1,2) and (2,2); no ghosts
        let mut env = tiny(&["#####", "#   #", "#.. #", "#A  #", "#####"]);
        let r0 = env.reset();
        assert_eq!(r0.objects.iter().filter(|o| o.class_name == "pellet").count(), 2);

        // up onto (1,2): +1, pellet still drawn this tick
        let r1 = env.step(0).unwrap();
        assert_eq!(r1.reward, 1.0);
        assert!(r1
            .objects
            .iter()
            .any(|o| o.id == PELLET_ID_BASE + 2 * 5 + 1 && o.bbox.intersects(&r1.agent().bbox)));

        // right onto (2,2): +1, first pellet gone
        let r2 = env.step(3).unwrap();
        assert_eq!(r2.reward, 1.0);
        assert!(!r2.objects.iter().any(|o| o.id == PELLET_ID_BASE + 11));
        // clearing the board ends the episode
        assert!(r2.terminal);
    }

    #[test]
    fn walking_into_wall_keeps_position() {
        let mut env = tiny(&["#####", "#  .#", "#   #", "#A  #", "#####"]);
        let r0 = env.reset();
        let r1 = env.step(2).unwrap();
        assert_eq!(r1.reward, 0.0);
        assert_eq!(r0.agent().bbox, r1.agent().bbox);
    }

    #[test]
    fn ghost_contact_costs_a_life_and_respawns() {
        // ghost boxed in next to the agent: stepping right is a catch; the
        // sealed pellet on the right keeps the board from being cleared
        let mut env = tiny(&["#####", "#####", "#AG#.", "#####", "#####"]);
        env.reset();
        let r = env.step(3).unwrap();
        assert_eq!(r.reward, 1.0 - 10.0); // ghost tile carries a pellet
        assert_eq!(r.info.lives, 2);
        assert!(!r.terminal);
        let agent = r.agent().bbox;
        assert!(r.objects.iter().any(|o| o.class_name == "ghost" && o.bbox == agent));
        let r = env.step(2).unwrap();
        // respawned at start, then tried to move left into a wall
        assert_eq!(r.agent().bbox, BBox::at(1, 2, 1, 1));
    }

    #[test]
    fn last_catch_ends_the_game_one_tick_later() {
        let params = DotMazeParams {
            tile: 1,
            ghost_period: 1,
            lives: 1,
            ..DotMazeParams::default()
        };
        let layout = ["#####", "#####", "#AG#.", "#####", "#####"];
        let mut env = ArcadeEnv::dot_maze_layout(&layout, params, NativeRewards::default(), 3, 100).unwrap();
        env.reset();
        let r = env.step(3).unwrap();
        assert_eq!(r.info.lives, 0);
        assert!(!r.terminal);
        let caught_at = r.agent().bbox;
        let r = env.step(2).unwrap();
        assert!(r.terminal);
        assert_eq!(r.reward, 0.0);
        assert_eq!(r.agent().bbox, caught_at);
    }

    #[test]
    fn default_maze_shape() {
        let cfg = EnvConfig::new(crate::env::GameKind::DotMaze, 0);
        let mut env = ArcadeEnv::new(&cfg).unwrap();
        let r = env.reset();
        assert_eq!((r.frame.width, r.frame.height), (40, 52));
        let ghosts = r.objects.iter().filter(|o| o.class_name == "ghost").count();
        assert_eq!(ghosts, 1);
        for o in &r.objects {
            assert!(o.bbox.within(40, 52));
        }
    }
}
