//! Deterministic dense-traffic merge simulator and game-theoretic merge
//! planner.

pub mod agents;
pub mod dynamics;
pub mod error;
pub mod gap_selector;
pub mod harness;
pub mod intention_game;
pub mod manifest;
pub mod planner;
pub mod prediction;
pub mod rng;
pub mod trace;
pub mod world;

pub use error::{Error, Result};
