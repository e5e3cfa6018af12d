//! Per-step logs of a training or evaluation episode.

use serde::{Deserialize, Serialize};

use crate::interact::InteractionEvent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Tick within the episode, starting at 1.
    pub step: u64,
    pub action: u32,
    /// Reward as reported by the environment (zero until the end when delayed).
    pub env_reward: f64,
    /// Reward the game itself produced this tick.
    pub native_reward: f64,
    pub aux_reward: f64,
    /// Clipped `env_reward + aux_reward`, the signal the learner sees.
    pub total_reward: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub episode: u64,
    /// Global training step at which the episode started.
    pub start_step: u64,
    pub steps: Vec<StepRecord>,
    pub events: Vec<InteractionEvent>,
    pub complete: bool,
}

impl EpisodeTrace {
    pub fn new(episode: u64, start_step: u64) -> Self {
        EpisodeTrace {
            episode,
            start_step,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn end_step(&self) -> u64 {
        self.start_step + self.steps.len() as u64
    }

    pub fn native_return(&self) -> f64 {
        self.steps.iter().map(|s| s.native_reward).sum()
    }

    pub fn env_return(&self) -> f64 {
        self.steps.iter().map(|s| s.env_reward).sum()
    }

    pub fn aux_sum(&self) -> f64 {
        self.steps.iter().map(|s| s.aux_reward).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{game_score, EnvError};

    fn record(native: f64, env: f64) -> StepRecord {
        StepRecord {
            step: 0,
            action: 0,
            env_reward: env,
            native_reward: native,
            aux_reward: 0.0,
            total_reward: 0.0,
        }
    }

    #[test]
    fn score_uses_native_rewards() {
        let mut t = EpisodeTrace::new(0, 0);
        t.steps = vec![record(1.0, 0.0), record(1.0, 0.0), record(1.0, 3.0)];
        t.complete = true;
        assert_eq!(game_score(&t), Ok(3.0));
    }

    #[test]
    fn zero_length_episode_scores_zero() {
        let mut t = EpisodeTrace::new(0, 0);
        t.complete = true;
        assert_eq!(game_score(&t), Ok(0.0));
    }

    #[test]
    fn incomplete_episode_has_no_score() {
        assert_eq!(game_score(&EpisodeTrace::new(0, 0)), Err(EnvError::IncompleteEpisode));
    }
}
