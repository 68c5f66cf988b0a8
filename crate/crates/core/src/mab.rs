//! Multi-armed bandit exploit puzzles.
//!
//! A task picks a best arm uniformly at random, gives it mean `1/2 + Δ/2`
//! and every other arm `1/2 - Δ/2`, then realizes `T` rounds in which every
//! arm's Bernoulli reward is revealed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastics::{bernoulli, RngStream};

/// Gap values used when no grid is configured (0.35 is absent on purpose).
pub const DEFAULT_GAP_GRID: [f64; 10] = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.45, 0.5];
pub const DEFAULT_NUM_ARMS: usize = 5;
pub const DEFAULT_TASKS_PER_GAP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MabParams {
    pub num_arms: usize,
    pub gap: f64,
    pub horizon: usize,
}

impl MabParams {
    pub fn new(num_arms: usize, gap: f64, horizon: usize) -> Self {
        Self {
            num_arms,
            gap,
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_arms < 2 {
            return Err(Error::param("MAB puzzles need at least 2 arms"));
        }
        if !(0.0..=1.0).contains(&self.gap) {
            return Err(Error::param(format!("gap {} outside [0, 1]", self.gap)));
        }
        if self.horizon == 0 {
            return Err(Error::param("horizon must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MabTask {
    pub seed: u64,
    pub params: MabParams,
    pub best_arm: usize,
    pub means: Vec<f64>,
    /// Round-major: `rewards[t][a]` is arm `a`'s reward in round `t`.
    pub rewards: Vec<Vec<u8>>,
}

impl MabTask {
    pub fn num_arms(&self) -> usize {
        self.means.len()
    }

    pub fn horizon(&self) -> usize {
        self.rewards.len()
    }

    /// Per-arm success counts.
    pub fn reward_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.num_arms()];
        for row in &self.rewards {
            for (c, &r) in counts.iter_mut().zip(row) {
                *c += u64::from(r);
            }
        }
        counts
    }

    pub fn empirical_means(&self) -> Vec<f64> {
        let t = self.horizon() as f64;
        self.reward_counts().into_iter().map(|c| c as f64 / t).collect()
    }
}

pub fn generate_mab_task(params: MabParams, rng: &mut RngStream) -> Result<MabTask> {
    params.validate()?;
    let k = params.num_arms;
    let best_arm = rng.index(k);
    let means: Vec<f64> = (0..k)
        .map(|a| {
            if a == best_arm {
                0.5 + params.gap / 2.0
            } else {
                0.5 - params.gap / 2.0
            }
        })
        .collect();
    let mut rewards = Vec::with_capacity(params.horizon);
    for _ in 0..params.horizon {
        let row = means
            .iter()
            .map(|&m| bernoulli(m, rng).map(u8::from))
            .collect::<Result<Vec<_>>>()?;
        rewards.push(row);
    }
    Ok(MabTask {
        seed: rng.master_seed(),
        params,
        best_arm,
        means,
        rewards,
    })
}

/// Largest minus second-largest empirical mean.
pub fn empirical_gap(task: &MabTask) -> f64 {
    crate::util::top_two_gap(&task.empirical_means())
}

/// Every arm attaining the largest empirical mean.
pub fn correct_answers_mab(task: &MabTask) -> Vec<usize> {
    // integer counts share the denominator, so ties are exact
    let counts = task.reward_counts();
    let best = counts.iter().copied().max().unwrap_or(0);
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == best)
        .map(|(a, _)| a)
        .collect()
}
