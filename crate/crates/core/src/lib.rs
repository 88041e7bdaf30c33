//! Safe residual control toolkit.
//!
//! The crate covers the whole numerical pipeline behind a physics-regulated
//! actor-critic controller:
//!
//! - [`safety`]: polytopic safety sets, their normalized form and ellipsoidal
//!   safety envelopes.
//! - [`lmi`]: verification and synthesis of the envelope/gain LMIs.
//! - [`plant`]: a friction cart-pole simulator and its linearization.
//! - [`phy`]: closed-loop matrix, residual action composition, Lyapunov value
//!   and the physics-regulated reward.
//! - [`agent`]: a from-scratch DDPG learner (MLPs, Adam, replay buffer).
//! - [`rollout`] and [`train`]: closed-loop rollouts and the seeded training loop.
//! - [`analysis`]: empirical checks of the safety and stability conditions.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. All file formats and the command-line driver live in the `phydrl`
//! companion crate.
#![cfg_attr(not(feature = "std"), no_std)]
#![warn(rust_2018_idioms, missing_debug_implementations)]
// `!(x >= y)` is used deliberately so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod agent;
pub mod analysis;
mod error;
pub mod linalg;
pub mod lmi;
pub mod phy;
pub mod plant;
pub mod rollout;
pub mod safety;
pub mod train;

pub use error::{Error, Result};
pub use linalg::{Mat, Vector};
