//! Closed-loop rollouts under the residual controller `a = clamp(a_drl + F s)`.

use alloc::vec::Vec;
use core::fmt::Debug;

use crate::agent::AgentParams;
use crate::error::check_dim;
use crate::linalg::{Mat, Vector};
use crate::phy::{self, ResidualAction};
use crate::plant::{self, PlantParams, PlantState, STATE_DIM};
use crate::safety::SafetySpec;
use crate::{Error, Result};

/// Source of the data-driven action `a_drl`.
pub trait Policy: Debug {
    fn action(&self, s: &Vector) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn action(&self, _s: &Vector) -> Result<f64> {
        Ok(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPolicy(pub f64);

impl Policy for ConstantPolicy {
    fn action(&self, _s: &Vector) -> Result<f64> {
        Ok(self.0)
    }
}

impl Policy for AgentParams {
    fn action(&self, s: &Vector) -> Result<f64> {
        self.actor_forward(s)
    }
}

/// Discrete-time plant driven by a scalar force.
pub trait Plant: Debug {
    fn dim(&self) -> usize;
    fn force_limit(&self) -> f64;
    /// Next state after applying an already-saturated force.
    fn advance(&self, s: &Vector, force: f64) -> Result<Vector>;
}

impl Plant for PlantParams {
    fn dim(&self) -> usize {
        STATE_DIM
    }

    fn force_limit(&self) -> f64 {
        self.force_limit
    }

    fn advance(&self, s: &Vector, force: f64) -> Result<Vector> {
        let out = plant::step(&PlantState::from_vector(s)?, force, self)?;
        Ok(out.state.to_vector())
    }
}

/// `s' = A s + B a`, single input.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPlant {
    pub a: Mat,
    pub b: Mat,
    pub force_limit: f64,
}

impl LinearPlant {
    pub fn new(a: Mat, b: Mat, force_limit: f64) -> Result<Self> {
        check_dim("A columns", a.nrows(), a.ncols())?;
        check_dim("B rows", a.nrows(), b.nrows())?;
        check_dim("B columns", 1, b.ncols())?;
        Ok(Self { a, b, force_limit })
    }
}

impl Plant for LinearPlant {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn force_limit(&self) -> f64 {
        self.force_limit
    }

    fn advance(&self, s: &Vector, force: f64) -> Result<Vector> {
        check_dim("state", self.dim(), s.len())?;
        let next = &self.a * s + self.b.column(0) * force;
        if next.iter().all(|v| v.is_finite()) {
            Ok(next)
        } else {
            Err(Error::NonFiniteState)
        }
    }
}

/// Residual controller: `policy` supplies `a_drl`, `gain` (if any) supplies `F s`.
#[derive(Debug, Clone, Copy)]
pub struct Controller<'a> {
    pub policy: &'a dyn Policy,
    pub gain: Option<&'a Mat>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub a_drl: f64,
    pub a_phy: f64,
    pub applied: ResidualAction,
}

impl<'a> Controller<'a> {
    /// Phy-DRL controller.
    pub fn residual(policy: &'a dyn Policy, gain: &'a Mat) -> Self {
        Self {
            policy,
            gain: Some(gain),
        }
    }

    /// Policy alone, without the model-based term.
    pub fn policy_only(policy: &'a dyn Policy) -> Self {
        Self { policy, gain: None }
    }

    pub fn command(&self, s: &Vector, force_limit: f64) -> Result<Command> {
        let a_drl = self.policy.action(s)?;
        self.compose(s, a_drl, force_limit)
    }

    /// Composes a given `a_drl` with the model-based term.
    pub fn compose(&self, s: &Vector, a_drl: f64, force_limit: f64) -> Result<Command> {
        let a_phy = match self.gain {
            Some(f) => phy::physics_action(f, s)?,
            None => 0.0,
        };
        Ok(Command {
            a_drl,
            a_phy,
            applied: phy::residual_action(a_drl, a_phy, force_limit)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub state: Vector,
    pub command: Command,
    pub next: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: Vector,
    pub steps: Vec<StepRecord>,
    /// Index of the first step whose next state lies outside the safety set.
    pub safety_exit: Option<usize>,
    /// Set when the plant produced a non-finite state; the rollout stops there.
    pub diverged: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> &Vector {
        self.steps.last().map(|r| &r.next).unwrap_or(&self.initial)
    }

    /// Steps completed before leaving the safety set (all steps if it never left).
    pub fn steps_in_safe_set(&self) -> usize {
        self.safety_exit.unwrap_or(self.steps.len())
    }

    pub fn states(&self) -> impl Iterator<Item = &Vector> {
        core::iter::once(&self.initial).chain(self.steps.iter().map(|r| &r.next))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RolloutOptions {
    pub horizon: usize,
    /// Stop at the first safety-set exit instead of running the full horizon.
    pub stop_on_exit: bool,
}

pub fn rollout(
    plant: &dyn Plant,
    controller: &Controller<'_>,
    safety: Option<&SafetySpec>,
    initial: &Vector,
    opts: RolloutOptions,
) -> Result<Trajectory> {
    check_dim("initial state", plant.dim(), initial.len())?;
    let mut traj = Trajectory {
        initial: initial.clone(),
        steps: Vec::with_capacity(opts.horizon),
        safety_exit: None,
        diverged: false,
    };
    let mut s = initial.clone();
    for k in 0..opts.horizon {
        let command = controller.command(&s, plant.force_limit())?;
        let next = match plant.advance(&s, command.applied.value) {
            Ok(next) => next,
            Err(Error::NonFiniteState) => {
                traj.diverged = true;
                traj.safety_exit.get_or_insert(k);
                break;
            }
            Err(e) => return Err(e),
        };
        let left = match safety {
            Some(spec) => !spec.contains(&next)?,
            None => false,
        };
        traj.steps.push(StepRecord {
            state: s,
            command,
            next: next.clone(),
        });
        s = next;
        if left && traj.safety_exit.is_none() {
            traj.safety_exit = Some(k);
            if opts.stop_on_exit {
                break;
            }
        }
    }
    Ok(traj)
}
