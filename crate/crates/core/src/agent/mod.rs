//! Deterministic-policy actor-critic learner (DDPG) written from scratch.

mod adam;
mod ddpg;
mod mlp;
mod replay;

pub use adam::Adam;
pub use ddpg::{AgentConfig, AgentParams, UpdateStats};
pub use mlp::{Activation, Dense, Mlp, MlpCache, MlpGrads};
pub use replay::{ReplayBuffer, Transition};
