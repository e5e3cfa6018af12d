use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    cell_class_index, BBox, EnvConfig, EnvError, Frame, GameLogic, GameObject, NativeRewards, Tick,
};

const SKIER_ID: u32 = 0;
const GATE_ID_BASE: u32 = 100;
const TREE_ID_BASE: u32 = 500;
const SKIER_Y: i32 = 6;
const SKIER_W: i32 = 2;
const SKIER_H: i32 = 3;
const TREE_SIZE: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkiRunParams {
    pub gates: usize,
    /// Gate span in cells, flags included.
    pub gate_width: i32,
    /// Rows between consecutive gates.
    pub gate_spacing: i32,
    pub trees_per_gap: usize,
    /// Cells moved per steering action.
    pub speed: i32,
    /// Ticks without steering after hitting a tree.
    pub stun: u32,
    /// Inclusive range for the left flag column; `None` spans the slope.
    pub gate_x_range: Option<(i32, i32)>,
}

impl Default for SkiRunParams {
    fn default() -> Self {
        SkiRunParams {
            gates: 10,
            gate_width: 10,
            gate_spacing: 16,
            trees_per_gap: 2,
            speed: 2,
            stun: 3,
            gate_x_range: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Gate {
    x: i32,
    y: i32,
    passed: Option<bool>,
}

#[derive(Debug, Clone, Copy)]
struct Tree {
    x: i32,
    y: i32,
    hit: bool,
}

/// Downhill slalom. The skier holds a fixed row near the top while gates and
/// trees scroll upward one row per tick.
#[derive(Debug, Clone)]
pub struct SkiRun {
    params: SkiRunParams,
    rewards: NativeRewards,
    width: i32,
    height: i32,
    skier_x: i32,
    stunned: u32,
    gates: Vec<Gate>,
    trees: Vec<Tree>,
}

impl SkiRun {
    pub fn new(config: &EnvConfig) -> Result<Self, EnvError> {
        let p = config.ski_run;
        if p.gates == 0 || p.gate_width < 3 || p.gate_width >= config.width - 2 {
            return Err(EnvError::InvalidConfig("ski_run gate settings out of range".into()));
        }
        if p.gate_spacing < 4 || p.speed < 1 {
            return Err(EnvError::InvalidConfig("ski_run spacing/speed out of range".into()));
        }
        Ok(SkiRun {
            params: p,
            rewards: config.rewards,
            width: config.width,
            height: config.height,
            skier_x: config.width / 2 - 1,
            stunned: 0,
            gates: Vec::new(),
            trees: Vec::new(),
        })
    }

    fn skier_box(&self) -> BBox {
        BBox::at(self.skier_x, SKIER_Y, SKIER_W, SKIER_H)
    }

    fn gate_box(&self, g: &Gate) -> BBox {
        BBox::at(g.x, g.y, self.params.gate_width, 1)
    }

    fn tree_box(t: &Tree) -> BBox {
        BBox::at(t.x, t.y, TREE_SIZE, TREE_SIZE)
    }

    pub fn gates_passed(&self) -> usize {
        self.gates.iter().filter(|g| g.passed == Some(true)).count()
    }

    pub fn gates_missed(&self) -> usize {
        self.gates.iter().filter(|g| g.passed == Some(false)).count()
    }
}

impl GameLogic for SkiRun {
    fn reset(&mut self, rng: &mut ChaCha8Rng) {
        let p = self.params;
        self.skier_x = self.width / 2 - 1;
        self.stunned = 0;
        let (lo, hi) = p
            .gate_x_range
            .unwrap_or((1, self.width - p.gate_width - 1));
        let hi = hi.clamp(0, self.width - p.gate_width);
        let lo = lo.clamp(0, hi);
        self.gates = (0..p.gates)
            .map(|i| Gate {
                x: rng.gen_range(lo..=hi),
                y: self.height + 4 + i as i32 * p.gate_spacing,
                passed: None,
            })
            .collect();
        self.trees.clear();
        for g in 0..p.gates {
            let gap_mid = self.height + 4 + g as i32 * p.gate_spacing + p.gate_spacing / 2;
            for _ in 0..p.trees_per_gap {
                self.trees.push(Tree {
                    x: rng.gen_range(0..=self.width - TREE_SIZE),
                    y: gap_mid + rng.gen_range(-2..=2) - TREE_SIZE / 2,
                    hit: false,
                });
            }
        }
    }

    fn advance(&mut self, action: usize, _rng: &mut ChaCha8Rng) -> Tick {
        if self.stunned > 0 {
            self.stunned -= 1;
        } else {
            let dx = match action {
                0 => -self.params.speed,
                1 => self.params.speed,
                _ => 0,
            };
            self.skier_x = (self.skier_x + dx).clamp(0, self.width - SKIER_W);
        }
        for g in &mut self.gates {
            g.y -= 1;
        }
        for t in &mut self.trees {
            t.y -= 1;
        }

        let skier = self.skier_box();
        let mut reward = 0.0;
        let bottom = skier.y_max;
        for i in 0..self.gates.len() {
            let g = self.gates[i];
            if g.passed.is_none() && g.y == bottom {
                let through = self.gate_box(&g).intersects(&skier);
                self.gates[i].passed = Some(through);
                reward += if through {
                    self.rewards.gate_pass
                } else {
                    self.rewards.gate_miss
                };
            }
        }
        for t in &mut self.trees {
            if !t.hit && Self::tree_box(t).intersects(&skier) {
                t.hit = true;
                self.stunned = self.params.stun;
            }
        }
        Tick {
            reward,
            over: self.gates.iter().all(|g| g.passed.is_some()),
        }
    }

    fn objects(&self, out: &mut Vec<GameObject>) {
        out.push(GameObject {
            id: SKIER_ID,
            class_name: "skier",
            bbox: self.skier_box(),
            is_agent: true,
        });
        for (i, g) in self.gates.iter().enumerate() {
            let b = self.gate_box(g);
            if b.within(self.width, self.height) {
                out.push(GameObject {
                    id: GATE_ID_BASE + i as u32,
                    class_name: "gate",
                    bbox: b,
                    is_agent: false,
                });
            }
        }
        for (i, t) in self.trees.iter().enumerate() {
            let b = Self::tree_box(t);
            if b.within(self.width, self.height) {
                out.push(GameObject {
                    id: TREE_ID_BASE + i as u32,
                    class_name: "tree",
                    bbox: b,
                    is_agent: false,
                });
            }
        }
    }

    fn render(&self, frame: &mut Frame) {
        let flag = cell_class_index("flag");
        for g in &self.gates {
            frame.set(g.x, g.y, flag);
            frame.set(g.x + self.params.gate_width - 1, g.y, flag);
        }
        let tree = cell_class_index("tree");
        for t in &self.trees {
            frame.fill(&Self::tree_box(t), tree);
        }
        frame.fill(&self.skier_box(), cell_class_index("skier"));
    }

    fn dims(&self) -> (i32, i32) {
        (self.width, self.height)
    }

    fn lives(&self) -> u32 {
        1
    }
}
