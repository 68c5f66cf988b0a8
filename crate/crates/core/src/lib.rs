//! Bandit puzzles for evaluating language models as exploit and explore
//! oracles.
//!
//! Exploit tasks show a model a bandit history and ask for the best arm.
//! Explore tasks ask a model for candidate actions and score them with UCB1
//! on an embedding-similarity reward.

pub mod baselines;
pub mod cb;
pub mod config;
pub mod datasets;
pub mod error;
pub mod explore;
pub mod harness;
pub mod history;
pub mod kmeans;
pub mod mab;
pub mod mitigations;
pub mod oracle;
pub mod prompts;
pub mod stochastics;
pub mod util;

pub use error::{Error, Result};
pub use stochastics::RngStream;
