//! Simulator for competitive multi-armed bandit games with collisions.
//!
//! `N` players repeatedly pick among `K > N` Bernoulli arms. Players who pick
//! the same arm collide: one of them, chosen uniformly, gets the arm's reward
//! and the rest get nothing. The crate provides the environment, belief
//! bookkeeping, selfish and socially optimal policies, the CISP incentive
//! mechanism, metrics, and an experiment harness that writes CSV and JSON.

// Negated float comparisons are how NaN gets rejected here.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beliefs;
pub mod cisp;
pub mod config;
pub mod env;
pub mod equilibrium;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod output;
pub mod rng;
pub mod selfish;
pub mod sim;
pub mod social;

pub use error::{Error, Result};
