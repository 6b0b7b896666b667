//! Mean-field-game optimal execution with a latent, filtered alpha.
//!
//! The engine computes the closed-form equilibrium of heterogeneous
//! sub-populations of liquidating agents, simulates the finite-player game
//! on a pure-jump price with a hidden Markov driver, and measures how far
//! the equilibrium is from a Nash equilibrium of the finite game.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod filter;
pub mod io_cli;
pub mod market_sim;
pub mod model;
pub mod nash_eval;
pub mod riccati;

pub use error::{Error, Result};
