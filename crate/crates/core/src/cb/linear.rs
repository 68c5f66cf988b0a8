use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{CbHistory, Context};
use crate::stochastics::{gaussian, uniform_box, RngStream};
use crate::util::{argmax_set, dot, top_two_gap};

pub const DEFAULT_TASKS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCbParams {
    pub num_arms: usize,
    pub dimension: usize,
    pub horizon: usize,
    pub tasks: usize,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
}

fn default_noise_sd() -> f64 {
    1.0
}

impl LinearCbParams {
    pub fn new(num_arms: usize, dimension: usize, horizon: usize) -> Self {
        Self {
            num_arms,
            dimension,
            horizon,
            tasks: DEFAULT_TASKS,
            noise_sd: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_arms < 2 {
            return Err(Error::param("linear CB puzzles need at least 2 arms"));
        }
        if self.dimension == 0 {
            return Err(Error::param("dimension must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(Error::param("horizon must be at least 1"));
        }
        if self.tasks == 0 {
            return Err(Error::param("tasks must be at least 1"));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::param("noise_sd must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCbTask {
    pub seed: u64,
    pub params: LinearCbParams,
    /// `weights[a]` is arm `a`'s coefficient vector.
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub contexts: Vec<Vec<f64>>,
    /// `rewards[t][a]`.
    pub rewards: Vec<Vec<f64>>,
    pub query: Vec<f64>,
}

impl LinearCbTask {
    pub fn history(&self) -> CbHistory {
        CbHistory {
            contexts: self.contexts.iter().cloned().map(Context::Numeric).collect(),
            rewards: self.rewards.clone(),
        }
    }

    pub fn query_context(&self) -> Context {
        Context::Numeric(self.query.clone())
    }

    /// Expected reward of every arm at the query context.
    pub fn query_means(&self) -> Vec<f64> {
        (0..self.weights.len())
            .map(|a| dot(&self.query, &self.weights[a]) + self.intercepts[a])
            .collect()
    }
}

pub fn generate_linear_cb_task(params: LinearCbParams, rng: &mut RngStream) -> Result<LinearCbTask> {
    params.validate()?;
    let (k, d) = (params.num_arms, params.dimension);
    let mut weights = Vec::with_capacity(k);
    let mut intercepts = Vec::with_capacity(k);
    for _ in 0..k {
        weights.push(uniform_box(-1.0, 1.0, d, rng)?);
        intercepts.push(uniform_box(-0.25, 0.25, 1, rng)?[0]);
    }
    let mut contexts = Vec::with_capacity(params.horizon);
    let mut rewards = Vec::with_capacity(params.horizon);
    for _ in 0..params.horizon {
        let z = uniform_box(-1.0, 1.0, d, rng)?;
        let row = (0..k)
            .map(|a| gaussian(dot(&z, &weights[a]) + intercepts[a], params.noise_sd, rng))
            .collect::<Result<Vec<_>>>()?;
        contexts.push(z);
        rewards.push(row);
    }
    let query = uniform_box(-1.0, 1.0, d, rng)?;
    Ok(LinearCbTask {
        seed: rng.master_seed(),
        params,
        weights,
        intercepts,
        contexts,
        rewards,
        query,
    })
}

pub fn expected_reward_linear(task: &LinearCbTask, z: &[f64], arm: usize) -> Result<f64> {
    let d = task.params.dimension;
    if z.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: z.len(),
        });
    }
    let weights = task
        .weights
        .get(arm)
        .ok_or_else(|| Error::param(format!("arm {arm} out of range")))?;
    Ok(dot(z, weights) + task.intercepts[arm])
}

/// Gap between the two best expected rewards at the query context.
pub fn effective_gap(task: &LinearCbTask) -> f64 {
    top_two_gap(&task.query_means())
}

/// Arms maximizing expected reward at the query context.
pub fn correct_answer_cb(task: &LinearCbTask) -> Vec<usize> {
    argmax_set(&task.query_means())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(weights: Vec<Vec<f64>>, intercepts: Vec<f64>, query: Vec<f64>) -> LinearCbTask {
        let k = weights.len();
        let d = query.len();
        LinearCbTask {
            seed: 0,
            params: LinearCbParams::new(k, d, 1),
            weights,
            intercepts,
            contexts: vec![vec![0.0; d]],
            rewards: vec![vec![0.0; k]],
            query,
        }
    }

    #[test]
    fn noiseless_rewards_are_exact() {
        let mut params = LinearCbParams::new(3, 2, 50);
        params.noise_sd = 0.0;
        let mut rng = RngStream::new(5, &[]);
        let task = generate_linear_cb_task(params, &mut rng).unwrap();
        for (z, row) in task.contexts.iter().zip(&task.rewards) {
            for a in 0..3 {
                let mu = expected_reward_linear(&task, z, a).unwrap();
                assert_eq!(row[a], mu);
            }
        }
    }

    #[test]
    fn support_of_samples() {
        let mut rng = RngStream::new(6, &[]);
        let task = generate_linear_cb_task(LinearCbParams::new(4, 3, 200), &mut rng).unwrap();
        assert!(task.weights.iter().flatten().all(|x| (-1.0..=1.0).contains(x)));
        assert!(task.intercepts.iter().all(|x| (-0.25..=0.25).contains(x)));
        assert!(task
            .contexts
            .iter()
            .chain(std::iter::once(&task.query))
            .flatten()
            .all(|x| (-1.0..=1.0).contains(x)));
        assert_eq!(task.rewards.len(), 200);
        assert!(task.rewards.iter().all(|r| r.len() == 4));
    }

    #[test]
    fn empirical_mean_matches_context_average() {
        // contexts are centered, so E_z[mu(z, a)] = gamma_a
        let mut rng = RngStream::new(8, &[]);
        let mut params = LinearCbParams::new(3, 2, 10_000);
        params.tasks = 1;
        let task = generate_linear_cb_task(params, &mut rng).unwrap();
        for a in 0..3 {
            let mean = task.rewards.iter().map(|r| r[a]).sum::<f64>() / 10_000.0;
            // Monte-Carlo oracle: average of mu(z_t, a) over the realized contexts
            let mc = task
                .contexts
                .iter()
                .map(|z| expected_reward_linear(&task, z, a).unwrap())
                .sum::<f64>()
                / 10_000.0;
            assert!((mean - mc).abs() <= 0.05, "arm {a}: {mean} vs {mc}");
            assert!((mc - task.intercepts[a]).abs() <= 0.05);
        }
    }

    #[test]
    fn expected_reward_examples() {
        let task = tiny(vec![vec![1.0, 0.0], vec![0.5, -0.5]], vec![0.0, 0.2], vec![0.0, 0.0]);
        assert_eq!(expected_reward_linear(&task, &[0.0, 0.0], 1).unwrap(), 0.2);
        assert!((expected_reward_linear(&task, &[0.3, 0.7], 0).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(
            expected_reward_linear(&task, &[0.3], 0),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn gap_and_answers() {
        let same = tiny(vec![vec![0.2], vec![0.2]], vec![0.1, 0.1], vec![0.5]);
        assert_eq!(effective_gap(&same), 0.0);
        assert_eq!(correct_answer_cb(&same), vec![0, 1]);

        let two = tiny(vec![vec![0.0], vec![0.0]], vec![0.9, 0.4], vec![0.5]);
        assert!((effective_gap(&two) - 0.5).abs() < 1e-12);
        assert_eq!(correct_answer_cb(&two), vec![0]);
    }

    #[test]
    fn params_validation() {
        let mut rng = RngStream::new(0, &[]);
        assert!(generate_linear_cb_task(LinearCbParams::new(1, 2, 10), &mut rng).is_err());
        assert!(generate_linear_cb_task(LinearCbParams::new(2, 0, 10), &mut rng).is_err());
        assert!(generate_linear_cb_task(LinearCbParams::new(2, 2, 0), &mut rng).is_err());
    }
}
