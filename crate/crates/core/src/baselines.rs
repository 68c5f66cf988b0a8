//! Reference policies that need no language model: per-arm least squares,
//! empirical-mean greedy, and uniform random choice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{CbHistory, Context};
use crate::mab::{correct_answers_mab, MabTask};
use crate::stochastics::RngStream;
use crate::util::{argmax_set, dot};

/// Regularization added to the normal equations when they are singular.
pub const RIDGE_FALLBACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// Per arm: feature weights followed by the intercept.
    pub weights: Vec<Vec<f64>>,
    pub residual_norms: Vec<f64>,
    /// Whether the ridge fallback was needed.
    pub regularized: bool,
}

impl LinearFit {
    pub fn num_features(&self) -> usize {
        self.weights.first().map_or(0, |w| w.len() - 1)
    }

    pub fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        let d = self.num_features();
        if features.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: features.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .map(|w| dot(&w[..d], features) + w[d])
            .collect())
    }
}

/// Lower-triangular Cholesky factor, or `None` when the matrix is not
/// numerically positive definite.
fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let scale = a.iter().enumerate().map(|(i, r)| r[i].abs()).fold(1.0, f64::max);
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let pivot = a[i][i] - s;
                if pivot <= 1e-12 * scale {
                    return None;
                }
                l[i][i] = pivot.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    x
}

/// Ordinary least squares per arm on contexts augmented with a constant 1.
pub fn fit_linear(history: &CbHistory) -> Result<LinearFit> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let rows: Vec<Vec<f64>> = history
        .contexts
        .iter()
        .map(|c| {
            let mut f = c.features();
            f.push(1.0);
            f
        })
        .collect();
    let p = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p - 1,
            got: bad.len() - 1,
        });
    }

    let mut gram = vec![vec![0.0; p]; p];
    for r in &rows {
        for i in 0..p {
            for j in 0..=i {
                gram[i][j] += r[i] * r[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[j][i] = gram[i][j];
        }
    }
    let (factor, regularized) = match cholesky(&gram) {
        Some(l) => (l, false),
        None => {
            let mut ridge = gram.clone();
            for (i, row) in ridge.iter_mut().enumerate() {
                row[i] += RIDGE_FALLBACK;
            }
            let l = cholesky(&ridge)
                .ok_or_else(|| Error::param("normal equations are singular even with ridge"))?;
            (l, true)
        }
    };

    let arms = history.num_arms();
    let mut weights = Vec::with_capacity(arms);
    let mut residual_norms = Vec::with_capacity(arms);
    for a in 0..arms {
        let mut rhs = vec![0.0; p];
        for (r, y) in rows.iter().zip(&history.rewards) {
            for (b, x) in rhs.iter_mut().zip(r) {
                *b += x * y[a];
            }
        }
        let w = cholesky_solve(&factor, &rhs);
        let rss: f64 = rows
            .iter()
            .zip(&history.rewards)
            .map(|(r, y)| (y[a] - dot(r, &w)).powi(2))
            .sum();
        weights.push(w);
        residual_norms.push(rss.sqrt());
    }
    Ok(LinearFit {
        weights,
        residual_norms,
        regularized,
    })
}

/// Arms with the largest fitted value at `context`; ties give every tied arm.
pub fn predict_best_arm(fit: &LinearFit, context: &Context) -> Result<Vec<usize>> {
    Ok(argmax_set(&fit.predict(&context.features())?))
}

/// Empirically best arms of a MAB history.
pub fn greedy_empirical(task: &MabTask) -> Vec<usize> {
    correct_answers_mab(task)
}

/// Arms with the largest average reward over a contextual history,
/// ignoring contexts.
pub fn greedy_history(history: &CbHistory) -> Result<Vec<usize>> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let mut sums = vec![0.0; history.num_arms()];
    for row in &history.rewards {
        for (s, r) in sums.iter_mut().zip(row) {
            *s += r;
        }
    }
    Ok(argmax_set(&sums))
}

pub fn random_arm(num_arms: usize, rng: &mut RngStream) -> Result<usize> {
    if num_arms == 0 {
        return Err(Error::param("need at least one arm"));
    }
    Ok(rng.index(num_arms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cb::linear::{generate_linear_cb_task, LinearCbParams};

    /// Least squares through modified Gram-Schmidt QR, an independent route
    /// to the normal-equations solution.
    fn qr_least_squares(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let n = x.len();
        let p = x[0].len();
        let mut q: Vec<Vec<f64>> = (0..p).map(|j| (0..n).map(|i| x[i][j]).collect()).collect();
        let mut r = vec![vec![0.0; p]; p];
        for j in 0..p {
            for i in 0..j {
                let proj: f64 = (0..n).map(|t| q[i][t] * q[j][t]).sum();
                r[i][j] = proj;
                for t in 0..n {
                    q[j][t] -= proj * q[i][t];
                }
            }
            let norm = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            r[j][j] = norm;
            q[j].iter_mut().for_each(|v| *v /= norm);
        }
        let qty: Vec<f64> = (0..p).map(|j| (0..n).map(|t| q[j][t] * y[t]).sum()).collect();
        let mut w = vec![0.0; p];
        for i in (0..p).rev() {
            let s: f64 = (i + 1..p).map(|k| r[i][k] * w[k]).sum();
            w[i] = (qty[i] - s) / r[i][i];
        }
        w
    }

    fn numeric_history(contexts: Vec<Vec<f64>>, rewards: Vec<Vec<f64>>) -> CbHistory {
        CbHistory::new(contexts.into_iter().map(Context::Numeric).collect(), rewards).unwrap()
    }

    #[test]
    fn recovers_noiseless_parameters() {
        let mut params = LinearCbParams::new(3, 4, 20);
        params.noise_sd = 0.0;
        let task = generate_linear_cb_task(params, &mut RngStream::new(12, &[])).unwrap();
        let fit = fit_linear(&task.history()).unwrap();
        assert!(!fit.regularized);
        for a in 0..3 {
            for j in 0..4 {
                assert!((fit.weights[a][j] - task.weights[a][j]).abs() < 1e-6);
            }
            assert!((fit.weights[a][4] - task.intercepts[a]).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_rewards() {
        let mut rng = RngStream::new(2, &[]);
        let contexts: Vec<Vec<f64>> = (0..30)
            .map(|_| crate::stochastics::uniform_box(-1.0, 1.0, 2, &mut rng).unwrap())
            .collect();
        let h = numeric_history(contexts, vec![vec![0.7, -0.2]; 30]);
        let fit = fit_linear(&h).unwrap();
        for (a, c) in [(0, 0.7), (1, -0.2)] {
            assert!(fit.weights[a][0].abs() < 1e-9);
            assert!(fit.weights[a][1].abs() < 1e-9);
            assert!((fit.weights[a][2] - c).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_qr_oracle() {
        for seed in 0..20 {
            let mut params = LinearCbParams::new(2, 3, 15);
            params.tasks = 1;
            let task = generate_linear_cb_task(params, &mut RngStream::new(seed, &[])).unwrap();
            let h = task.history();
            let fit = fit_linear(&h).unwrap();
            let x: Vec<Vec<f64>> = task
                .contexts
                .iter()
                .map(|z| z.iter().copied().chain([1.0]).collect())
                .collect();
            for a in 0..2 {
                let y: Vec<f64> = task.rewards.iter().map(|r| r[a]).collect();
                let w = qr_least_squares(&x, &y);
                for (u, v) in w.iter().zip(&fit.weights[a]) {
                    assert!((u - v).abs() < 1e-8, "seed {seed}: {u} vs {v}");
                }
            }
        }
    }

    #[test]
    fn repeated_contexts_use_ridge() {
        let h = numeric_history(vec![vec![0.5, 0.5]; 10], vec![vec![1.0, 0.0]; 10]);
        let fit = fit_linear(&h).unwrap();
        assert!(fit.regularized);
        let pred = fit.predict(&[0.5, 0.5]).unwrap();
        assert!((pred[0] - 1.0).abs() < 1e-3);
        assert_eq!(predict_best_arm(&fit, &Context::Numeric(vec![0.5, 0.5])).unwrap(), vec![0]);
    }

    #[test]
    fn prediction_edge_cases() {
        let single = LinearFit {
            weights: vec![vec![0.3, 0.1]],
            residual_norms: vec![0.0],
            regularized: false,
        };
        assert_eq!(predict_best_arm(&single, &Context::Numeric(vec![2.0])).unwrap(), vec![0]);
        let twins = LinearFit {
            weights: vec![vec![0.3, 0.1], vec![0.3, 0.1]],
            residual_norms: vec![0.0; 2],
            regularized: false,
        };
        assert_eq!(predict_best_arm(&twins, &Context::Numeric(vec![2.0])).unwrap(), vec![0, 1]);
        assert!(predict_best_arm(&twins, &Context::Numeric(vec![2.0, 1.0])).is_err());
    }

    #[test]
    fn intercept_shift_invariance() {
        let mut rng = RngStream::new(77, &[]);
        for _ in 0..50 {
            let weights: Vec<Vec<f64>> = (0..4)
                .map(|_| crate::stochastics::uniform_box(-1.0, 1.0, 3, &mut rng).unwrap())
                .collect();
            let z = crate::stochastics::uniform_box(-1.0, 1.0, 2, &mut rng).unwrap();
            let fit = LinearFit {
                weights: weights.clone(),
                residual_norms: vec![0.0; 4],
                regularized: false,
            };
            let shifted = LinearFit {
                weights: weights
                    .iter()
                    .map(|w| vec![w[0], w[1], w[2] + 0.375])
                    .collect(),
                ..fit.clone()
            };
            let ctx = Context::Numeric(z);
            assert_eq!(predict_best_arm(&fit, &ctx).unwrap(), predict_best_arm(&shifted, &ctx).unwrap());
        }
    }

    #[test]
    fn random_arm_frequencies() {
        let mut rng = RngStream::new(5, &[]);
        assert_eq!(random_arm(1, &mut rng).unwrap(), 0);
        assert!(random_arm(0, &mut rng).is_err());
        let mut counts = [0usize; 5];
        for _ in 0..100_000 {
            let a = random_arm(5, &mut rng).unwrap();
            assert!(a < 5);
            counts[a] += 1;
        }
        for c in counts {
            assert!((c as f64 / 100_000.0 - 0.2).abs() <= 0.01);
        }
    }

    #[test]
    fn fit_errors() {
        let empty = CbHistory::new(vec![], vec![]).unwrap();
        assert!(matches!(fit_linear(&empty), Err(Error::EmptyHistory)));
    }
}
