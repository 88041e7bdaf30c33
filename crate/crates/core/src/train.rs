//! Seeded single-threaded training loop.
//!
//! Independent ChaCha streams drive agent initialisation (the agent seed),
//! exploration noise, replay sampling, episode initial states and evaluation
//! initial states, so a run is fully determined by its configuration.

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{AgentConfig, AgentParams, ReplayBuffer, Transition};
use crate::phy::{self, EnvelopeGain, RewardConfig};
use crate::plant::{InitRegion, PlantParams};
use crate::rollout::{self, Controller, Plant, RolloutOptions};
use crate::safety::SafetySpec;
use crate::{Error, Result};

const NOISE_STREAM: u64 = 1;
const REPLAY_STREAM: u64 = 2;
const INIT_STREAM: u64 = 3;
const EVAL_STREAM: u64 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub total_steps: u64,
    pub max_episode_steps: usize,
    /// Replay size required before updates begin.
    pub warmup_steps: usize,
    /// Evaluate every this many environment steps; 0 disables evaluation.
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub eval_horizon: usize,
    /// Add the model-based term `F s` to the learned action.
    pub residual: bool,
    pub reward: RewardConfig,
    pub init_region: InitRegion,
    pub eval_region: InitRegion,
    /// Stop as soon as an evaluation reaches this return.
    pub stop_at_eval_return: Option<f64>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_episode_steps == 0 {
            return Err(Error::InvalidConfig("train: max_episode_steps must be at least 1".into()));
        }
        if self.eval_interval > 0 && self.eval_episodes == 0 {
            return Err(Error::InvalidConfig("train: eval_episodes must be at least 1".into()));
        }
        if !(self.reward.performance_weight >= 0.0) || !self.reward.performance_weight.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "train: performance_weight must be finite and non-negative, got {}",
                self.reward.performance_weight
            )));
        }
        Ok(())
    }
}

/// One row per finished episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    /// Environment steps taken so far (after the episode ended).
    pub step: u64,
    pub episode: u64,
    /// Undiscounted sum of rewards.
    pub episode_return: f64,
    pub length: usize,
    pub safety_exit: bool,
    /// Mean losses over the episode's updates (NaN when no update ran).
    pub critic_loss: f64,
    pub actor_loss: f64,
}

/// Deterministic evaluation: mean number of steps spent inside the safety set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRecord {
    pub step: u64,
    pub eval_return: f64,
    pub exits: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: AgentParams,
    pub episodes: Vec<EpisodeRecord>,
    pub evals: Vec<EvalRecord>,
    pub steps: u64,
    /// Set when training stopped on a non-finite loss.
    pub aborted: Option<Error>,
}

impl TrainOutcome {
    /// First step whose evaluation reached `threshold`.
    pub fn steps_to_threshold(&self, threshold: f64) -> Option<u64> {
        self.evals.iter().find(|e| e.eval_return >= threshold).map(|e| e.step)
    }
}

/// Everything the loop needs that is not a hyperparameter.
#[derive(Debug, Clone, Copy)]
pub struct TrainEnv<'a> {
    pub plant: &'a PlantParams,
    pub safety: &'a SafetySpec,
    /// Supplies `P` for the reward and `F` for the residual term.
    pub gain: &'a EnvelopeGain,
}

/// Mean steps-in-safe-set of the frozen `agent` over `episodes` starts drawn from `region`.
pub fn evaluate(
    env: &TrainEnv<'_>,
    agent: &AgentParams,
    residual: bool,
    region: &InitRegion,
    episodes: usize,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, usize)> {
    let controller = if residual {
        Controller::residual(agent, env.gain.f())
    } else {
        Controller::policy_only(agent)
    };
    let opts = RolloutOptions {
        horizon,
        stop_on_exit: true,
    };
    let mut total = 0usize;
    let mut exits = 0usize;
    for _ in 0..episodes {
        let s0 = region.sample(rng)?.to_vector();
        let traj = rollout::rollout(env.plant, &controller, Some(env.safety), &s0, opts)?;
        total += traj.steps_in_safe_set();
        exits += usize::from(traj.safety_exit.is_some());
    }
    Ok((total as f64 / episodes.max(1) as f64, exits))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Runs DDPG on `env` with the physics-regulated reward. `on_episode` and
/// `on_eval` observe records as they are produced.
pub fn train(
    env: &TrainEnv<'_>,
    agent_cfg: &AgentConfig,
    cfg: &TrainConfig,
    mut on_episode: impl FnMut(&EpisodeRecord),
    mut on_eval: impl FnMut(&EvalRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut agent = AgentParams::new(agent_cfg.clone())?;
    let mut buffer = ReplayBuffer::new(agent_cfg.buffer_capacity);
    let mut noise_rng = stream(cfg.seed, NOISE_STREAM);
    let mut replay_rng = stream(cfg.seed, REPLAY_STREAM);
    let mut init_rng = stream(cfg.seed, INIT_STREAM);
    let warmup = cfg.warmup_steps.max(agent_cfg.batch_size);
    let force_limit = env.plant.force_limit();
    let controller_gain = if cfg.residual { Some(env.gain.f()) } else { None };

    let mut outcome = TrainOutcome {
        agent: agent.clone(),
        episodes: Vec::new(),
        evals: Vec::new(),
        steps: 0,
        aborted: None,
    };
    let mut step: u64 = 0;
    let mut episode: u64 = 0;
    let mut stop = false;

    while step < cfg.total_steps && !stop {
        let mut s = cfg.init_region.sample(&mut init_rng)?.to_vector();
        let mut ep_return = 0.0;
        let mut length = 0usize;
        let mut exited = false;
        let (mut critic_sum, mut actor_sum, mut updates) = (0.0, 0.0, 0u32);

        while length < cfg.max_episode_steps && step < cfg.total_steps {
            let a_drl = agent.act_with_exploration(&s, &mut noise_rng)?;
            let controller = Controller {
                policy: &rollout::ZeroPolicy,
                gain: controller_gain,
            };
            let command = controller.compose(&s, a_drl, force_limit)?;
            let (s_next, diverged) = match env.plant.advance(&s, command.applied.value) {
                Ok(next) => (next, false),
                Err(Error::NonFiniteState) => (s.clone(), true),
                Err(e) => return Err(e),
            };
            let left = diverged || !env.safety.contains(&s_next)?;
            let reward = phy::reward(env.gain, &cfg.reward, &s, a_drl, &s_next)?;
            buffer.push(Transition {
                s: s.clone(),
                a_drl,
                reward,
                s_next: s_next.clone(),
                done: left,
            })?;
            ep_return += reward;
            length += 1;
            step += 1;

            if buffer.len() >= warmup {
                let batch = buffer.sample(agent_cfg.batch_size, &mut replay_rng)?;
                match agent.update(&batch) {
                    Ok(stats) => {
                        critic_sum += stats.critic_loss;
                        actor_sum += stats.actor_loss;
                        updates += 1;
                    }
                    Err(e @ Error::NonFiniteLoss { .. }) => {
                        outcome.aborted = Some(e);
                        stop = true;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }

            if cfg.eval_interval > 0 && step.is_multiple_of(cfg.eval_interval) {
                let mut eval_rng = stream(cfg.seed, EVAL_STREAM);
                let (eval_return, exits) = evaluate(
                    env,
                    &agent,
                    cfg.residual,
                    &cfg.eval_region,
                    cfg.eval_episodes,
                    cfg.eval_horizon,
                    &mut eval_rng,
                )?;
                let rec = EvalRecord {
                    step,
                    eval_return,
                    exits,
                };
                on_eval(&rec);
                outcome.evals.push(rec);
                if cfg.stop_at_eval_return.is_some_and(|t| eval_return >= t) {
                    stop = true;
                }
            }

            s = s_next;
            if left {
                exited = true;
                break;
            }
            if stop {
                break;
            }
        }

        episode += 1;
        let mean = |sum: f64| if updates > 0 { sum / f64::from(updates) } else { f64::NAN };
        let rec = EpisodeRecord {
            step,
            episode,
            episode_return: ep_return,
            length,
            safety_exit: exited,
            critic_loss: mean(critic_sum),
            actor_loss: mean(actor_sum),
        };
        on_episode(&rec);
        outcome.episodes.push(rec);
    }

    outcome.agent = agent;
    outcome.steps = step;
    Ok(outcome)
}
