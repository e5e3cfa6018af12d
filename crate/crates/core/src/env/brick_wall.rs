use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    cell_class_index, BBox, EnvConfig, EnvError, Frame, GameLogic, GameObject, NativeRewards, Tick,
};

const PADDLE_ID: u32 = 0;
const BALL_ID: u32 = 1;
const BRICK_ID_BASE: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BrickWallParams {
    pub brick_rows: i32,
    pub brick_width: i32,
    pub brick_height: i32,
    /// First row of the wall.
    pub wall_top: i32,
    pub paddle_width: i32,
    pub paddle_speed: i32,
    pub lives: u32,
    /// Row the ball is served from.
    pub serve_row: i32,
}

impl Default for BrickWallParams {
    fn default() -> Self {
        BrickWallParams {
            brick_rows: 4,
            brick_width: 4,
            brick_height: 2,
            wall_top: 6,
            paddle_width: 6,
            paddle_speed: 2,
            lives: 3,
            serve_row: 26,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Ball {
    x: i32,
    y: i32,
    vx: i32,
    vy: i32,
}

/// Paddle-and-ball wall breaker. The ball moves one cell diagonally per tick.
#[derive(Debug, Clone)]
pub struct BrickWall {
    params: BrickWallParams,
    rewards: NativeRewards,
    width: i32,
    height: i32,
    cols: i32,
    bricks: Vec<bool>,
    remnant: Option<usize>,
    paddle_x: i32,
    ball: Ball,
    lives: u32,
    pending_serve: bool,
    returns: u32,
}

impl BrickWall {
    pub fn new(config: &EnvConfig) -> Result<Self, EnvError> {
        let p = config.brick_wall;
        if p.brick_width < 1 || p.brick_height < 1 || p.brick_rows < 1 {
            return Err(EnvError::InvalidConfig("brick dimensions must be positive".into()));
        }
        if p.paddle_width < 1 || p.paddle_width > config.width || p.paddle_speed < 1 {
            return Err(EnvError::InvalidConfig("paddle settings out of range".into()));
        }
        let wall_bottom = p.wall_top + p.brick_rows * p.brick_height;
        if wall_bottom >= p.serve_row || p.serve_row >= config.height - 3 || p.lives == 0 {
            return Err(EnvError::InvalidConfig("brick_wall layout does not fit the grid".into()));
        }
        let cols = config.width / p.brick_width;
        Ok(BrickWall {
            params: p,
            rewards: config.rewards,
            width: config.width,
            height: config.height,
            cols,
            bricks: vec![true; (cols * p.brick_rows) as usize],
            remnant: None,
            paddle_x: (config.width - p.paddle_width) / 2,
            ball: Ball {
                x: config.width / 2,
                y: p.serve_row,
                vx: 1,
                vy: 1,
            },
            lives: p.lives,
            pending_serve: false,
            returns: 0,
        })
    }

    fn paddle_y(&self) -> i32 {
        self.height - 3
    }

    fn paddle_box(&self) -> BBox {
        BBox::at(self.paddle_x, self.paddle_y(), self.params.paddle_width, 1)
    }

    fn brick_box(&self, i: usize) -> BBox {
        let p = &self.params;
        let (c, r) = (i as i32 % self.cols, i as i32 / self.cols);
        BBox::at(
            c * p.brick_width,
            p.wall_top + r * p.brick_height,
            p.brick_width,
            p.brick_height,
        )
    }

    fn brick_at(&self, x: i32, y: i32) -> Option<usize> {
        let p = &self.params;
        if x < 0 || y < p.wall_top || x >= self.cols * p.brick_width {
            return None;
        }
        let r = (y - p.wall_top) / p.brick_height;
        if r >= p.brick_rows {
            return None;
        }
        let i = (r * self.cols + x / p.brick_width) as usize;
        self.bricks[i].then_some(i)
    }

    fn serve(&mut self, rng: &mut ChaCha8Rng) {
        self.ball = Ball {
            x: rng.gen_range(self.width / 4..=3 * self.width / 4),
            y: self.params.serve_row,
            vx: if rng.gen::<bool>() { 1 } else { -1 },
            vy: 1,
        };
    }

    pub fn bricks_left(&self) -> usize {
        self.bricks.iter().filter(|b| **b).count()
    }

    /// Paddle returns since the last reset.
    pub fn returns(&self) -> u32 {
        self.returns
    }
}

impl GameLogic for BrickWall {
    fn reset(&mut self, rng: &mut ChaCha8Rng) {
        self.bricks.iter_mut().for_each(|b| *b = true);
        self.remnant = None;
        self.paddle_x = (self.width - self.params.paddle_width) / 2;
        self.lives = self.params.lives;
        self.pending_serve = false;
        self.returns = 0;
        self.serve(rng);
    }

    fn advance(&mut self, action: usize, rng: &mut ChaCha8Rng) -> Tick {
        if self.pending_serve {
            self.serve(rng);
            self.pending_serve = false;
        }
        self.remnant = None;
        let p = self.params;
        let dx = match action {
            0 => -p.paddle_speed,
            1 => p.paddle_speed,
            _ => 0,
        };
        self.paddle_x = (self.paddle_x + dx).clamp(0, self.width - p.paddle_width);

        let mut b = self.ball;
        let mut nx = b.x + b.vx;
        if nx < 0 || nx >= self.width {
            b.vx = -b.vx;
            nx = b.x + b.vx;
        }
        let mut ny = b.y + b.vy;
        if ny < 0 {
            b.vy = 1;
            ny = b.y + 1;
        }

        let mut reward = 0.0;
        let py = self.paddle_y();
        if let Some(i) = self.brick_at(nx, ny) {
            self.bricks[i] = false;
            self.remnant = Some(i);
            reward += self.rewards.brick;
            b.vy = -b.vy;
        } else if ny == py && nx >= self.paddle_x && nx < self.paddle_x + p.paddle_width {
            b.vy = -1;
            let third = (p.paddle_width / 3).max(1);
            let rel = nx - self.paddle_x;
            if rel < third {
                b.vx = -1;
            } else if rel >= p.paddle_width - third {
                b.vx = 1;
            }
            self.returns += 1;
        } else if ny > py {
            reward += self.rewards.ball_drop;
            self.lives -= 1;
            self.pending_serve = self.lives > 0;
        }
        b.x = nx;
        b.y = ny.min(self.height - 1);
        self.ball = b;

        Tick {
            reward,
            over: self.lives == 0 || self.bricks_left() == 0,
        }
    }

    fn objects(&self, out: &mut Vec<GameObject>) {
        out.push(GameObject {
            id: PADDLE_ID,
            class_name: "paddle",
            bbox: self.paddle_box(),
            is_agent: true,
        });
        out.push(GameObject {
            id: BALL_ID,
            class_name: "ball",
            bbox: BBox::at(self.ball.x, self.ball.y, 1, 1),
            is_agent: false,
        });
        for i in 0..self.bricks.len() {
            if self.bricks[i] || self.remnant == Some(i) {
                out.push(GameObject {
                    id: BRICK_ID_BASE + i as u32,
                    class_name: "brick",
                    bbox: self.brick_box(i),
                    is_agent: false,
                });
            }
        }
    }

    fn render(&self, frame: &mut Frame) {
        let brick = cell_class_index("brick");
        for i in 0..self.bricks.len() {
            if self.bricks[i] || self.remnant == Some(i) {
                frame.fill(&self.brick_box(i), brick);
            }
        }
        frame.fill(&self.paddle_box(), cell_class_index("paddle"));
        frame.set(self.ball.x, self.ball.y, cell_class_index("ball"));
    }

    fn dims(&self) -> (i32, i32) {
        (self.width, self.height)
    }

    fn lives(&self) -> u32 {
        self.lives
    }
}
