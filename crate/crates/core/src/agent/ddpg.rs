use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::adam::Adam;
use super::mlp::{Activation, Mlp, MlpGrads};
use super::replay::Transition;
use crate::error::check_dim;
use crate::linalg::{Mat, Vector};
use crate::{Error, Result};

/// Output-layer initialisation range for both networks.
const FINAL_INIT: f64 = 3e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub state_dim: usize,
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub hidden_sizes: Vec<usize>,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Standard deviation of the Gaussian exploration noise, in action units.
    pub exploration_noise_std: f64,
    pub action_scale: f64,
    pub seed: u64,
}

impl AgentConfig {
    /// Conventional DDPG settings with noise at 10% of the action range.
    pub fn new(state_dim: usize, action_scale: f64) -> Self {
        Self {
            state_dim,
            gamma: 0.99,
            tau: 0.005,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            hidden_sizes: vec![64, 64],
            batch_size: 128,
            buffer_capacity: 100_000,
            exploration_noise_std: 0.1 * action_scale,
            action_scale,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("agent: {msg}")));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.actor_lr > 0.0 && self.actor_lr.is_finite() && self.critic_lr > 0.0 && self.critic_lr.is_finite()) {
            return bad("learning rates must be positive and finite");
        }
        if self.state_dim == 0 || self.batch_size == 0 || self.buffer_capacity == 0 {
            return bad("state_dim, batch_size and buffer_capacity must be at least 1");
        }
        if self.hidden_sizes.contains(&0) {
            return bad("hidden layer widths must be at least 1");
        }
        if !(self.action_scale > 0.0 && self.action_scale.is_finite()) {
            return bad("action_scale must be positive and finite");
        }
        if !(self.exploration_noise_std >= 0.0 && self.exploration_noise_std.is_finite()) {
            return bad("exploration_noise_std must be non-negative and finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
}

/// Online and target networks plus optimizer state.
///
/// The actor emits `tanh(.)` in `[-1, 1]`; actions are that value times
/// `action_scale`. The critic reads `[s; a / action_scale]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    config: AgentConfig,
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    updates: u64,
}

fn batch_from_states(states: &[&Vector], n: usize) -> Result<Mat> {
    let mut m = Mat::zeros(n, states.len());
    for (j, s) in states.iter().enumerate() {
        check_dim("state", n, s.len())?;
        m.set_column(j, s);
    }
    Ok(m)
}

fn stack_input(states: &Mat, actions: &Mat) -> Mat {
    let n = states.nrows();
    let mut x = Mat::zeros(n + 1, states.ncols());
    x.view_mut((0, 0), (n, states.ncols())).copy_from(states);
    x.row_mut(n).copy_from(&actions.row(0));
    x
}

fn check_finite(s: &Vector) -> Result<()> {
    if s.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("agent input"))
    }
}

impl AgentParams {
    pub fn new(config: AgentConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let n = config.state_dim;
        let mut actor_sizes = vec![n];
        actor_sizes.extend_from_slice(&config.hidden_sizes);
        actor_sizes.push(1);
        let mut critic_sizes = vec![n + 1];
        critic_sizes.extend_from_slice(&config.hidden_sizes);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, Activation::Relu, Activation::Tanh, FINAL_INIT, &mut rng);
        let critic = Mlp::new(&critic_sizes, Activation::Relu, Activation::Identity, FINAL_INIT, &mut rng);
        let actor_opt = Adam::new(&actor, config.actor_lr);
        let critic_opt = Adam::new(&critic, config.critic_lr);
        Ok(Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            actor_opt,
            critic_opt,
            config,
            updates: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn set_updates(&mut self, updates: u64) {
        self.updates = updates;
    }

    /// Zeroes the output layers of the online and target networks.
    pub fn zero_output_layers(&mut self) {
        for net in [&mut self.actor, &mut self.critic, &mut self.actor_target, &mut self.critic_target] {
            net.zero_output_layer();
        }
    }

    pub fn actor_forward(&self, s: &Vector) -> Result<f64> {
        check_dim("state", self.config.state_dim, s.len())?;
        check_finite(s)?;
        let x = Mat::from_column_slice(s.len(), 1, s.as_slice());
        Ok(self.actor.forward(&x)[0] * self.config.action_scale)
    }

    pub fn critic_forward(&self, s: &Vector, a: f64) -> Result<f64> {
        check_dim("state", self.config.state_dim, s.len())?;
        check_finite(s)?;
        if !a.is_finite() {
            return Err(Error::NonFinite("agent input"));
        }
        let x = Mat::from_iterator(s.len() + 1, 1, s.iter().copied().chain([a / self.config.action_scale]));
        let q = self.critic.forward(&x)[0];
        if q.is_finite() {
            Ok(q)
        } else {
            Err(Error::NonFinite("critic output"))
        }
    }

    /// `∂Q/∂a` in action units.
    pub fn critic_action_gradient(&self, s: &Vector, a: f64) -> Result<f64> {
        check_dim("state", self.config.state_dim, s.len())?;
        let n = s.len();
        let x = Mat::from_iterator(n + 1, 1, s.iter().copied().chain([a / self.config.action_scale]));
        let cache = self.critic.forward_cached(&x);
        let dx = self.critic.input_gradient(&cache, &Mat::from_element(1, 1, 1.0));
        Ok(dx[n] / self.config.action_scale)
    }

    /// Actor output plus Gaussian noise, clamped to `±action_scale`.
    pub fn act_with_exploration<R: Rng + ?Sized>(&self, s: &Vector, rng: &mut R) -> Result<f64> {
        let a = self.actor_forward(s)?;
        let std = self.config.exploration_noise_std;
        let noise = if std > 0.0 {
            Normal::new(0.0, std)
                .map_err(|_| Error::InvalidConfig("exploration noise".into()))?
                .sample(rng)
        } else {
            0.0
        };
        let scale = self.config.action_scale;
        Ok((a + noise).clamp(-scale, scale))
    }

    fn unpack(&self, batch: &[&Transition]) -> Result<(Mat, Mat, Vec<f64>, Mat, Vec<f64>)> {
        let n = self.config.state_dim;
        let states = batch_from_states(&batch.iter().map(|t| &t.s).collect::<Vec<_>>(), n)?;
        let next = batch_from_states(&batch.iter().map(|t| &t.s_next).collect::<Vec<_>>(), n)?;
        let actions = Mat::from_iterator(1, batch.len(), batch.iter().map(|t| t.a_drl / self.config.action_scale));
        let rewards = batch.iter().map(|t| t.reward).collect();
        let not_done = batch.iter().map(|t| if t.done { 0.0 } else { 1.0 }).collect();
        Ok((states, actions, rewards, next, not_done))
    }

    /// Bootstrapped regression targets `y = r + γ (1 - done) Q'(s', π'(s'))`.
    pub fn critic_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        let (_, _, rewards, next, not_done) = self.unpack(batch)?;
        let next_actions = self.actor_target.forward(&next);
        let q_next = self.critic_target.forward(&stack_input(&next, &next_actions));
        Ok((0..batch.len())
            .map(|j| rewards[j] + self.config.gamma * not_done[j] * q_next[j])
            .collect())
    }

    /// Mean squared TD error and its gradient w.r.t. the online critic.
    pub fn critic_loss_and_grads(&self, batch: &[&Transition]) -> Result<(f64, MlpGrads)> {
        let targets = self.critic_targets(batch)?;
        let (states, actions, ..) = self.unpack(batch)?;
        let cache = self.critic.forward_cached(&stack_input(&states, &actions));
        let q = cache.output();
        let count = batch.len() as f64;
        let mut loss = 0.0;
        let mut d_out = Mat::zeros(1, batch.len());
        for j in 0..batch.len() {
            let err = q[j] - targets[j];
            loss += err * err / count;
            d_out[j] = 2.0 * err / count;
        }
        let (grads, _) = self.critic.backward(&cache, &d_out);
        Ok((loss, grads))
    }

    /// `-mean Q(s, π(s))` and its gradient w.r.t. the actor, chained through the critic.
    pub fn actor_loss_and_grads(&self, states: &Mat) -> Result<(f64, MlpGrads)> {
        check_dim("state", self.config.state_dim, states.nrows())?;
        let n = states.nrows();
        let count = states.ncols() as f64;
        let actor_cache = self.actor.forward_cached(states);
        let critic_cache = self.critic.forward_cached(&stack_input(states, actor_cache.output()));
        let loss = -critic_cache.output().sum() / count;
        let d_q = Mat::from_element(1, states.ncols(), -1.0 / count);
        let dx = self.critic.input_gradient(&critic_cache, &d_q);
        let d_action = dx.rows(n, 1).into_owned();
        let (grads, _) = self.actor.backward(&actor_cache, &d_action);
        Ok((loss, grads))
    }

    /// One DDPG step: critic regression, actor ascent, soft target update.
    pub fn update(&mut self, batch: &[&Transition]) -> Result<UpdateStats> {
        check_dim("batch size", self.config.batch_size, batch.len())?;
        let update = self.updates + 1;
        let (critic_loss, critic_grads) = self.critic_loss_and_grads(batch)?;
        if !critic_loss.is_finite() {
            return Err(Error::NonFiniteLoss { which: "critic", update });
        }
        self.critic_opt.apply(&mut self.critic, &critic_grads);

        let states = batch_from_states(&batch.iter().map(|t| &t.s).collect::<Vec<_>>(), self.config.state_dim)?;
        let (actor_loss, actor_grads) = self.actor_loss_and_grads(&states)?;
        if !actor_loss.is_finite() {
            return Err(Error::NonFiniteLoss { which: "actor", update });
        }
        self.actor_opt.apply(&mut self.actor, &actor_grads);

        let tau = self.config.tau;
        self.actor_target.blend_from(&self.actor, tau);
        self.critic_target.blend_from(&self.critic, tau);
        self.updates = update;

        if !self.actor.is_finite() || !self.critic.is_finite() {
            return Err(Error::NonFiniteLoss { which: "parameter", update });
        }
        Ok(UpdateStats { critic_loss, actor_loss })
    }

    /// Every stored array in a fixed order: actor, critic, actor target,
    /// critic target, then the Adam first and second moments of actor and critic.
    pub fn tensors(&self) -> Vec<&Mat> {
        let mut out = Vec::new();
        out.extend(self.actor.tensors());
        out.extend(self.critic.tensors());
        out.extend(self.actor_target.tensors());
        out.extend(self.critic_target.tensors());
        out.extend(self.actor_opt.first.iter());
        out.extend(self.actor_opt.second.iter());
        out.extend(self.critic_opt.first.iter());
        out.extend(self.critic_opt.second.iter());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut out = Vec::new();
        out.extend(self.actor.tensors_mut());
        out.extend(self.critic.tensors_mut());
        out.extend(self.actor_target.tensors_mut());
        out.extend(self.critic_target.tensors_mut());
        out.extend(self.actor_opt.first.iter_mut());
        out.extend(self.actor_opt.second.iter_mut());
        out.extend(self.critic_opt.first.iter_mut());
        out.extend(self.critic_opt.second.iter_mut());
        out
    }

    /// `(actor, critic)` Adam step counters.
    pub fn optimizer_steps(&self) -> (u64, u64) {
        (self.actor_opt.step, self.critic_opt.step)
    }

    pub fn set_optimizer_steps(&mut self, actor: u64, critic: u64) {
        self.actor_opt.step = actor;
        self.critic_opt.step = critic;
    }
}
