use super::{EnvError, Environment, GameKind, StepResult};

/// Reports zero reward on every tick except the terminal one, which carries
/// the sum of the episode's native rewards.
pub struct DelayedReward {
    inner: Box<dyn Environment>,
    accumulated: f64,
}

pub fn wrap_delayed(env: Box<dyn Environment>) -> Result<Box<dyn Environment>, EnvError> {
    if env.is_delayed() {
        return Err(EnvError::AlreadyDelayed);
    }
    Ok(Box::new(DelayedReward {
        inner: env,
        accumulated: 0.0,
    }))
}

impl Environment for DelayedReward {
    fn game(&self) -> GameKind {
        self.inner.game()
    }

    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    fn reset(&mut self) -> StepResult {
        self.accumulated = 0.0;
        let mut r = self.inner.reset();
        r.reward = 0.0;
        r
    }

    fn step(&mut self, action: usize) -> Result<StepResult, EnvError> {
        let mut r = self.inner.step(action)?;
        self.accumulated += r.reward;
        r.reward = if r.terminal { self.accumulated } else { 0.0 };
        Ok(r)
    }

    fn is_delayed(&self) -> bool {
        true
    }
}
