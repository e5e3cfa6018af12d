use crate::env::{GameKind, GameObject, StepResult};

/// Bins per dimension of the tabular state key.
pub const BINS: u32 = 8;
/// Dimensions of the tabular state key.
pub const KEY_DIMS: u32 = 4;
pub const NUM_KEYS: usize = (BINS * BINS * BINS * BINS) as usize;
const ABSENT: u32 = BINS - 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Components in [-1, 1]; length fixed per game.
    pub features: Vec<f64>,
    /// Quantized reduced state for tabular learners, `< NUM_KEYS`.
    pub key: u32,
}

pub fn feature_dim(game: GameKind) -> usize {
    // agent x, y; per class: nearest dx, dy, count
    2 + 3 * game.object_classes().len() + extra_dims(game)
}

fn extra_dims(game: GameKind) -> usize {
    match game {
        // ball velocity, which one frame cannot show
        GameKind::BrickWall => 2,
        _ => 0,
    }
}

fn center(o: &GameObject) -> (f64, f64) {
    o.bbox.center()
}

/// Signed offset clamped to [-3, 3] in bins 0..=6.
fn signed_bin(d: f64, unit: f64) -> u32 {
    let q = (d / unit).round().clamp(-3.0, 3.0);
    (q + 3.0) as u32
}

/// Non-negative offset in bins 0..=6.
fn range_bin(d: f64, unit: f64) -> u32 {
    (d / unit).floor().clamp(0.0, 6.0) as u32
}

fn pack(dims: [u32; 4]) -> u32 {
    dims.iter().fold(0, |acc, &d| acc * BINS + d.min(BINS - 1))
}

/// Turns a frame's objects into features. Keeps the previous ball position
/// for brick_wall, so call [`FeatureEncoder::reset`] at episode start.
#[derive(Debug, Clone)]
pub struct FeatureEncoder {
    game: GameKind,
    prev_ball: Option<(f64, f64)>,
}

impl FeatureEncoder {
    pub fn new(game: GameKind) -> Self {
        FeatureEncoder { game, prev_ball: None }
    }

    pub fn game(&self) -> GameKind {
        self.game
    }

    pub fn dim(&self) -> usize {
        feature_dim(self.game)
    }

    pub fn reset(&mut self) {
        self.prev_ball = None;
    }

    pub fn encode(&mut self, r: &StepResult) -> Observation {
        let (w, h) = (r.frame.width as f64, r.frame.height as f64);
        let agent = r.agent();
        let (ax, ay) = center(agent);
        let mut features = Vec::with_capacity(self.dim());
        features.push((2.0 * ax / w - 1.0).clamp(-1.0, 1.0));
        features.push((2.0 * ay / h - 1.0).clamp(-1.0, 1.0));
        for class in self.game.object_classes() {
            let mut count = 0usize;
            let mut best: Option<(f64, f64, f64)> = None;
            for o in r.objects.iter().filter(|o| o.class_name == *class) {
                count += 1;
                let (cx, cy) = center(o);
                let (dx, dy) = (cx - ax, cy - ay);
                let d = dx.abs() + dy.abs();
                if best.is_none_or(|b| d < b.0) {
                    best = Some((d, dx, dy));
                }
            }
            let (dx, dy) = best.map_or((0.0, 0.0), |b| (b.1, b.2));
            features.push((dx / w).clamp(-1.0, 1.0));
            features.push((dy / h).clamp(-1.0, 1.0));
            features.push((count as f64 / 32.0).min(1.0));
        }
        let ball = r.objects.iter().find(|o| o.class_name == "ball").map(center);
        let vel = match (self.game, ball, self.prev_ball) {
            (GameKind::BrickWall, Some(b), Some(p)) => (b.0 - p.0, b.1 - p.1),
            _ => (0.0, 0.0),
        };
        if self.game == GameKind::BrickWall {
            features.push(vel.0.clamp(-1.0, 1.0));
            features.push(vel.1.clamp(-1.0, 1.0));
            self.prev_ball = ball;
        }
        let key = match self.game {
            GameKind::DotMaze => dot_maze_key(r, agent),
            GameKind::SkiRun => ski_run_key(r, agent),
            GameKind::BrickWall => brick_wall_key(agent, ball, vel),
        };
        Observation { features, key }
    }
}

/// Nearest pellet and nearest ghost offsets in tiles.
fn dot_maze_key(r: &StepResult, agent: &GameObject) -> u32 {
    let tile = agent.bbox.width().max(1) as f64;
    let (ax, ay) = center(agent);
    let nearest = |class: &str| {
        r.objects
            .iter()
            .filter(|o| o.class_name == class)
            .map(|o| {
                let (cx, cy) = center(o);
                (cx - ax, cy - ay)
            })
            .min_by(|a, b| (a.0.abs() + a.1.abs()).total_cmp(&(b.0.abs() + b.1.abs())))
    };
    let enc = |p: Option<(f64, f64)>| match p {
        Some((dx, dy)) => [signed_bin(dx, tile), signed_bin(dy, tile)],
        None => [ABSENT, ABSENT],
    };
    let [px, py] = enc(nearest("pellet"));
    let [gx, gy] = enc(nearest("ghost"));
    pack([px, py, gx, gy])
}

/// Next gate and next tree below the skier: lateral offset and distance.
fn ski_run_key(r: &StepResult, agent: &GameObject) -> u32 {
    let (ax, _) = center(agent);
    let bottom = agent.bbox.y_max as f64;
    let next = |class: &str| {
        r.objects
            .iter()
            .filter(|o| o.class_name == class && o.bbox.y_max as f64 >= agent.bbox.y_min as f64)
            .min_by_key(|o| o.bbox.y_min)
            .map(|o| {
                let (cx, _) = center(o);
                (cx - ax, o.bbox.y_min as f64 - bottom)
            })
    };
    let gate = next("gate").map_or([ABSENT, ABSENT], |(dx, dy)| [signed_bin(dx, 2.0), range_bin(dy, 4.0)]);
    let tree = next("tree").map_or([ABSENT, ABSENT], |(dx, dy)| [signed_bin(dx, 2.0), range_bin(dy, 4.0)]);
    pack([gate[0], gate[1], tree[0], tree[1]])
}

/// Ball offset from the paddle centre plus its direction of travel.
fn brick_wall_key(paddle: &GameObject, ball: Option<(f64, f64)>, vel: (f64, f64)) -> u32 {
    let Some((bx, by)) = ball else {
        return pack([ABSENT, ABSENT, ABSENT, ABSENT]);
    };
    let (px, py) = center(paddle);
    let vx = (vel.0.signum() + 1.0) as u32;
    let vy = if vel.1 > 0.0 { 1 } else { 0 };
    pack([signed_bin(bx - px, 2.0), range_bin(py - by, 4.0), vx, vy])
}
