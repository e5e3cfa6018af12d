use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::Observation;
use super::{Agent, AgentError, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Rmsprop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct A2cConfig {
    pub gamma: f64,
    pub lr: f64,
    pub n_steps: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub hidden: usize,
    pub optimizer: Optimizer,
    pub rms_decay: f64,
    pub rms_eps: f64,
    /// Global gradient-norm cap per update; 0 disables.
    pub max_grad_norm: f64,
}

impl Default for A2cConfig {
    fn default() -> Self {
        A2cConfig {
            gamma: 0.99,
            lr: 7e-4,
            n_steps: 5,
            value_coef: 0.5,
            entropy_coef: 0.01,
            hidden: 64,
            optimizer: Optimizer::Rmsprop,
            rms_decay: 0.99,
            rms_eps: 1e-5,
            max_grad_norm: 0.5,
        }
    }
}

impl A2cConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(AgentError::Config(format!("lr {} must be positive", self.lr)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(AgentError::Config(format!("gamma {} not in [0, 1)", self.gamma)));
        }
        if self.n_steps == 0 || self.hidden == 0 {
            return Err(AgentError::Config("n_steps and hidden must be positive".into()));
        }
        Ok(())
    }
}

/// Two-layer tanh network, parameters stored flat as W1, b1, W2, b2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub params: Vec<f64>,
}

impl Mlp {
    pub fn new(inputs: usize, hidden: usize, outputs: usize, out_scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let n = hidden * inputs + hidden + outputs * hidden + outputs;
        let mut params = vec![0.0; n];
        let l1 = 1.0 / (inputs as f64).sqrt();
        let l2 = out_scale / (hidden as f64).sqrt();
        for p in &mut params[..hidden * inputs] {
            *p = rng.gen_range(-l1..l1);
        }
        let w2 = hidden * inputs + hidden;
        for p in &mut params[w2..w2 + outputs * hidden] {
            *p = rng.gen_range(-l2..l2);
        }
        Mlp {
            inputs,
            hidden,
            outputs,
            params,
        }
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.inputs;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.outputs * self.hidden;
        (b1, w2, b2)
    }

    /// Hidden activations and outputs.
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        let h: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &p[j * self.inputs..(j + 1) * self.inputs];
                let z: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + p[b1 + j];
                z.tanh()
            })
            .collect();
        let out = (0..self.outputs)
            .map(|k| {
                let row = &p[w2 + k * self.hidden..w2 + (k + 1) * self.hidden];
                row.iter().zip(&h).map(|(w, hj)| w * hj).sum::<f64>() + p[b2 + k]
            })
            .collect();
        (h, out)
    }

    /// Accumulate into `grad` the gradient given dL/d(output).
    pub fn backward(&self, x: &[f64], h: &[f64], dout: &[f64], grad: &mut [f64]) {
        let (b1, w2, b2) = self.offsets();
        let mut dh = vec![0.0; self.hidden];
        for k in 0..self.outputs {
            grad[b2 + k] += dout[k];
            for j in 0..self.hidden {
                grad[w2 + k * self.hidden + j] += dout[k] * h[j];
                dh[j] += dout[k] * self.params[w2 + k * self.hidden + j];
            }
        }
        for j in 0..self.hidden {
            let dz = dh[j] * (1.0 - h[j] * h[j]);
            grad[b1 + j] += dz;
            for i in 0..self.inputs {
                grad[j * self.inputs + i] += dz * x[i];
            }
        }
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub critic: Mlp,
}

impl PolicyParams {
    pub fn new(inputs: usize, actions: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        PolicyParams {
            actor: Mlp::new(inputs, hidden, actions, 0.01, rng),
            critic: Mlp::new(inputs, hidden, 1, 1.0, rng),
        }
    }

    pub fn policy(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.actor.forward(x).1)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.critic.forward(x).1[0]
    }

    pub fn len(&self) -> usize {
        self.actor.params.len() + self.critic.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> f64 {
        let na = self.actor.params.len();
        if i < na {
            self.actor.params[i]
        } else {
            self.critic.params[i - na]
        }
    }

    pub fn set(&mut self, i: usize, v: f64) {
        let na = self.actor.params.len();
        if i < na {
            self.actor.params[i] = v;
        } else {
            self.critic.params[i - na] = v;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.actor.params.iter().chain(&self.critic.params).all(|p| p.is_finite())
    }
}

/// One training sample; `advantage` is a constant in the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub obs: Vec<f64>,
    pub action: usize,
    pub ret: f64,
    pub advantage: f64,
}

/// n-step returns bootstrapped from `bootstrap` after the last reward, and
/// advantages against `values`.
pub fn advantage(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(rewards.len(), values.len());
    let mut returns = vec![0.0; rewards.len()];
    let mut acc = bootstrap;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        returns[t] = acc;
    }
    let adv = returns.iter().zip(values).map(|(r, v)| r - v).collect();
    (returns, adv)
}

/// Loss  -Σ A·log π(a|s) + c_v Σ (R - V)² - c_e Σ H(π(·|s)).
pub fn a2c_loss(params: &PolicyParams, batch: &[Sample], cfg: &A2cConfig) -> f64 {
    let mut loss = 0.0;
    for s in batch {
        let logp = log_softmax(&params.actor.forward(&s.obs).1);
        let entropy: f64 = -logp.iter().map(|l| l.exp() * l).sum::<f64>();
        let v = params.value(&s.obs);
        loss += -s.advantage * logp[s.action] + cfg.value_coef * (s.ret - v).powi(2) - cfg.entropy_coef * entropy;
    }
    loss
}

/// Loss and its analytic gradient, actor parameters first.
pub fn loss_and_grad(params: &PolicyParams, batch: &[Sample], cfg: &A2cConfig) -> (f64, Vec<f64>) {
    let na = params.actor.params.len();
    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    for s in batch {
        let (ha, logits) = params.actor.forward(&s.obs);
        let logp = log_softmax(&logits);
        let pi: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let entropy: f64 = -pi.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();
        let (hc, out) = params.critic.forward(&s.obs);
        let v = out[0];
        loss += -s.advantage * logp[s.action] + cfg.value_coef * (s.ret - v).powi(2) - cfg.entropy_coef * entropy;

        let dlogits: Vec<f64> = (0..pi.len())
            .map(|j| {
                let onehot = if j == s.action { 1.0 } else { 0.0 };
                -s.advantage * (onehot - pi[j]) + cfg.entropy_coef * pi[j] * (logp[j] + entropy)
            })
            .collect();
        params.actor.backward(&s.obs, &ha, &dlogits, &mut grad[..na]);
        let dv = -2.0 * cfg.value_coef * (s.ret - v);
        params.critic.backward(&s.obs, &hc, &[dv], &mut grad[na..]);
    }
    (loss, grad)
}

/// Central differences of [`a2c_loss`], for checking [`loss_and_grad`].
pub fn numerical_grad(params: &PolicyParams, batch: &[Sample], cfg: &A2cConfig, eps: f64) -> Vec<f64> {
    let mut p = params.clone();
    (0..params.len())
        .map(|i| {
            let x = p.get(i);
            p.set(i, x + eps);
            let up = a2c_loss(&p, batch, cfg);
            p.set(i, x - eps);
            let down = a2c_loss(&p, batch, cfg);
            p.set(i, x);
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// Denominator floor for gradient checks. Central differences at eps 1e-5
/// carry about 1e-10 of rounding noise, so smaller components are judged
/// on absolute error.
pub const GRAD_CHECK_FLOOR: f64 = 1e-5;

/// Largest |a - n| / max(|a|, |n|, floor) over components.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub sq: Vec<f64>,
}

/// One descent step on `batch`. Returns the pre-step loss.
pub fn a2c_step(
    params: &mut PolicyParams,
    opt: &mut OptimizerState,
    batch: &[Sample],
    cfg: &A2cConfig,
) -> Result<f64, AgentError> {
    if batch.is_empty() {
        return Err(AgentError::Config("empty batch".into()));
    }
    let (loss, mut grad) = loss_and_grad(params, batch, cfg);
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        let worst = batch.iter().map(|s| s.ret.abs()).fold(0.0, f64::max);
        return Err(AgentError::Divergence(format!(
            "non-finite loss {loss} on batch of {} (max |return| {worst:.3e})",
            batch.len()
        )));
    }
    if cfg.max_grad_norm > 0.0 {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > cfg.max_grad_norm {
            let k = cfg.max_grad_norm / norm;
            grad.iter_mut().for_each(|g| *g *= k);
        }
    }
    if opt.sq.len() != grad.len() {
        opt.sq = vec![0.0; grad.len()];
    }
    for (i, g) in grad.iter().enumerate() {
        let step = match cfg.optimizer {
            Optimizer::Sgd => cfg.lr * g,
            Optimizer::Rmsprop => {
                opt.sq[i] = cfg.rms_decay * opt.sq[i] + (1.0 - cfg.rms_decay) * g * g;
                cfg.lr * g / (opt.sq[i].sqrt() + cfg.rms_eps)
            }
        };
        params.set(i, params.get(i) - step);
    }
    if !params.is_finite() {
        return Err(AgentError::Divergence("parameters became non-finite".into()));
    }
    Ok(loss)
}

pub fn sample_action(pi: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (a, p) in pi.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    pi.len() - 1
}

/// Single-worker synchronous advantage actor-critic.
#[derive(Debug, Clone)]
pub struct A2cAgent {
    pub config: A2cConfig,
    pub params: PolicyParams,
    pub opt: OptimizerState,
    rollout: Vec<(Vec<f64>, usize, f64)>,
    pub last_loss: f64,
}

impl A2cAgent {
    pub fn new(inputs: usize, actions: usize, config: A2cConfig, rng: &mut ChaCha8Rng) -> Result<Self, AgentError> {
        config.validate()?;
        Ok(A2cAgent {
            params: PolicyParams::new(inputs, actions, config.hidden, rng),
            config,
            opt: OptimizerState { sq: Vec::new() },
            rollout: Vec::new(),
            last_loss: 0.0,
        })
    }
}

impl Agent for A2cAgent {
    fn act(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> usize {
        sample_action(&self.params.policy(&obs.features), rng)
    }

    fn learn(&mut self, t: &Transition) -> Result<(), AgentError> {
        self.rollout.push((t.obs.features.clone(), t.action, t.reward));
        if self.rollout.len() < self.config.n_steps && !t.terminal {
            return Ok(());
        }
        let bootstrap = if t.terminal { 0.0 } else { self.params.value(&t.next.features) };
        let rewards: Vec<f64> = self.rollout.iter().map(|r| r.2).collect();
        let values: Vec<f64> = self.rollout.iter().map(|r| self.params.value(&r.0)).collect();
        let (returns, adv) = advantage(&rewards, &values, bootstrap, self.config.gamma);
        let batch: Vec<Sample> = self
            .rollout
            .drain(..)
            .zip(returns.into_iter().zip(adv))
            .map(|((obs, action, _), (ret, advantage))| Sample {
                obs,
                action,
                ret,
                advantage,
            })
            .collect();
        self.last_loss = a2c_step(&mut self.params, &mut self.opt, &batch, &self.config)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn toy(seed: u64) -> (PolicyParams, Vec<Sample>) {
        let mut r = rng(seed);
        let mut p = PolicyParams::new(4, 3, 5, &mut r);
        // non-uniform policies so every term of the loss is exercised
        for w in &mut p.actor.params {
            *w *= 4.0;
        }
        let batch = (0..4)
            .map(|_| Sample {
                obs: (0..4).map(|_| r.gen_range(-1.0..1.0)).collect(),
                action: r.gen_range(0..3),
                ret: r.gen_range(-2.0..2.0),
                advantage: r.gen_range(-2.0..2.0),
            })
            .collect();
        (p, batch)
    }

    #[test]
    fn advantage_examples() {
        let (_, a) = advantage(&[0.0, 0.0], &[0.0, 0.0], 0.0, 0.99);
        assert_eq!(a, vec![0.0, 0.0]);
        let (r, a) = advantage(&[1.0], &[0.5], 0.0, 0.9);
        assert_eq!((r[0], a[0]), (1.0, 0.5));
        let (_, a) = advantage(&[1.0; 5], &[0.0; 5], 3.0, 0.0);
        assert_eq!(a, vec![1.0; 5]);
        // R_0 = 1 + 0.5 * (2 + 0.5 * 4)
        let (r, _) = advantage(&[1.0, 2.0], &[0.0, 0.0], 4.0, 0.5);
        assert_eq!(r, vec![3.0, 4.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = A2cConfig::default();
        for seed in 0..10 {
            let (p, batch) = toy(seed);
            let (_, g) = loss_and_grad(&p, &batch, &cfg);
            let n = numerical_grad(&p, &batch, &cfg, 1e-5);
            let err = max_relative_error(&g, &n, GRAD_CHECK_FLOOR);
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn zero_signal_moves_only_the_actor_via_entropy() {
        let cfg = A2cConfig {
            optimizer: Optimizer::Sgd,
            max_grad_norm: 0.0,
            lr: 0.1,
            ..A2cConfig::default()
        };
        let (mut p, mut batch) = toy(1);
        for s in &mut batch {
            s.advantage = 0.0;
            s.ret = p.value(&s.obs);
        }
        let before = p.clone();
        let h0: f64 = batch.iter().map(|s| entropy(&p.policy(&s.obs))).sum();
        a2c_step(&mut p, &mut OptimizerState { sq: vec![] }, &batch, &cfg).unwrap();
        assert_eq!(p.critic, before.critic);
        assert_ne!(p.actor, before.actor);
        let h1: f64 = batch.iter().map(|s| entropy(&p.policy(&s.obs))).sum();
        assert!(h1 > h0);
    }

    fn entropy(pi: &[f64]) -> f64 {
        -pi.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }

    #[test]
    fn bandit_policy_concentrates() {
        let cfg = A2cConfig {
            entropy_coef: 0.0,
            n_steps: 1,
            ..A2cConfig::default()
        };
        let mut r = rng(7);
        let mut agent = A2cAgent::new(2, 3, cfg, &mut r).unwrap();
        let obs = Observation {
            features: vec![0.5, -0.5],
            key: 0,
        };
        for _ in 0..2000 {
            let a = agent.act(&obs, &mut r);
            let t = Transition {
                obs: obs.clone(),
                action: a,
                reward: if a == 2 { 1.0 } else { 0.0 },
                next: obs.clone(),
                terminal: true,
            };
            agent.learn(&t).unwrap();
        }
        let pi = agent.params.policy(&obs.features);
        assert!(pi[2] > 0.99, "{pi:?}");
    }

    #[test]
    fn non_finite_loss_aborts() {
        let (mut p, mut batch) = toy(2);
        batch[0].ret = f64::NAN;
        let err = a2c_step(&mut p, &mut OptimizerState { sq: vec![] }, &batch, &A2cConfig::default());
        assert!(matches!(err, Err(AgentError::Divergence(_))));
    }

    proptest! {
        #[test]
        fn softmax_normalizes(logits in prop::collection::vec(-50.0f64..50.0, 1..8)) {
            let s: f64 = softmax(&logits).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }

        #[test]
        fn random_instances_pass_gradient_check(seed in any::<u64>()) {
            let (p, batch) = toy(seed);
            let cfg = A2cConfig::default();
            let (_, g) = loss_and_grad(&p, &batch, &cfg);
            let n = numerical_grad(&p, &batch, &cfg, 1e-5);
            prop_assert!(max_relative_error(&g, &n, GRAD_CHECK_FLOOR) < 1e-4);
        }
    }
}
