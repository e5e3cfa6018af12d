use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{Observation, NUM_KEYS};
use super::{Agent, AgentError, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of the training budget over which epsilon decays linearly.
    pub epsilon_decay_frac: f64,
}

impl Default for QConfig {
    fn default() -> Self {
        QConfig {
            alpha: 0.1,
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_frac: 0.5,
        }
    }
}

impl QConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(AgentError::Config(format!("alpha {} not in (0, 1]", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(AgentError::Config(format!("gamma {} not in [0, 1)", self.gamma)));
        }
        for e in [self.epsilon_start, self.epsilon_end] {
            if !(0.0..=1.0).contains(&e) {
                return Err(AgentError::Config(format!("epsilon {e} not in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Dense action-value table over the quantized state keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub num_actions: usize,
    pub values: Vec<f64>,
}

impl QTable {
    pub fn new(num_actions: usize) -> Self {
        QTable {
            num_actions,
            values: vec![0.0; NUM_KEYS * num_actions],
        }
    }

    pub fn row(&self, s: u32) -> &[f64] {
        let i = s as usize * self.num_actions;
        &self.values[i..i + self.num_actions]
    }

    pub fn get(&self, s: u32, a: usize) -> f64 {
        self.row(s)[a]
    }

    pub fn set(&mut self, s: u32, a: usize, v: f64) {
        self.values[s as usize * self.num_actions + a] = v;
    }

    pub fn max(&self, s: u32) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One-step Q-learning backup; `next = None` for terminal transitions.
pub fn q_update(q: &mut QTable, s: u32, a: usize, r: f64, next: Option<u32>, alpha: f64, gamma: f64) {
    let target = r + next.map_or(0.0, |s2| gamma * q.max(s2));
    let old = q.get(s, a);
    q.set(s, a, old + alpha * (target - old));
}

/// Greedy action with uniform tie-breaking.
pub fn greedy(row: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..row.len()).filter(|&a| row[a] == best).collect();
    ties[rng.gen_range(0..ties.len())]
}

#[derive(Debug, Clone)]
pub struct QAgent {
    pub config: QConfig,
    pub table: QTable,
    total_steps: u64,
    steps_done: u64,
}

impl QAgent {
    pub fn new(num_actions: usize, config: QConfig, total_steps: u64) -> Result<Self, AgentError> {
        config.validate()?;
        Ok(QAgent {
            config,
            table: QTable::new(num_actions),
            total_steps,
            steps_done: 0,
        })
    }

    pub fn epsilon(&self) -> f64 {
        let span = (self.config.epsilon_decay_frac * self.total_steps as f64).max(1.0);
        let frac = self.steps_done as f64 / span;
        if frac >= 1.0 {
            return self.config.epsilon_end;
        }
        self.config.epsilon_start + frac * (self.config.epsilon_end - self.config.epsilon_start)
    }
}

impl Agent for QAgent {
    fn act(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> usize {
        let eps = self.epsilon();
        self.steps_done += 1;
        if rng.gen::<f64>() < eps {
            rng.gen_range(0..self.table.num_actions)
        } else {
            greedy(self.table.row(obs.key), rng)
        }
    }

    fn learn(&mut self, t: &Transition) -> Result<(), AgentError> {
        let next = (!t.terminal).then_some(t.next.key);
        q_update(
            &mut self.table,
            t.obs.key,
            t.action,
            t.reward,
            next,
            self.config.alpha,
            self.config.gamma,
        );
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn update_from_zero() {
        let mut q = QTable::new(2);
        q_update(&mut q, 3, 1, 1.0, Some(4), 0.5, 0.9);
        assert_eq!(q.get(3, 1), 0.5);
        assert!(q.values.iter().enumerate().all(|(i, v)| i == 3 * 2 + 1 || *v == 0.0));
    }

    #[test]
    fn zero_reward_is_a_fixed_point() {
        let mut q = QTable::new(2);
        q_update(&mut q, 0, 0, 0.0, Some(1), 0.5, 0.9);
        assert!(q.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn bootstraps_from_best_next_action() {
        let mut q = QTable::new(2);
        q.set(9, 1, 2.0);
        q_update(&mut q, 1, 0, 1.0, Some(9), 1.0, 0.9);
        assert!((q.get(1, 0) - 2.8).abs() < 1e-12);
    }

    #[test]
    fn ties_are_broken_uniformly() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut counts = [0; 3];
        for _ in 0..3000 {
            counts[greedy(&[1.0, 1.0, 0.0], &mut rng)] += 1;
        }
        assert_eq!(counts[2], 0);
        assert!(counts[0] > 1300 && counts[1] > 1300);
    }

    #[test]
    fn epsilon_decays_linearly() {
        let mut a = QAgent::new(2, QConfig::default(), 100).unwrap();
        assert_eq!(a.epsilon(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = Observation { features: vec![], key: 0 };
        for _ in 0..25 {
            a.act(&obs, &mut rng);
        }
        assert!((a.epsilon() - 0.525).abs() < 1e-12);
        for _ in 0..100 {
            a.act(&obs, &mut rng);
        }
        assert_eq!(a.epsilon(), 0.05);
    }

    #[test]
    fn bad_hyperparameters_rejected() {
        let cfg = QConfig { gamma: 1.0, ..QConfig::default() };
        assert!(QAgent::new(2, cfg, 10).is_err());
    }
}
