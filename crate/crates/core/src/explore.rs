//! Exploration-oracle pipeline: candidates proposed by an oracle are scored
//! by cosine similarity to a hidden target and graded by running UCB1 on
//! them.

use serde::{Deserialize, Serialize};

use crate::datasets::{ArxivItem, QaItem};
use crate::error::{Error, Result};
use crate::oracle::{CachedEmbedder, Responder};
use crate::prompts::{
    candidate_reminder, parse_candidates, render_explore_prompt, CandidateParseError, ExploreMode, ExplorePayload,
};
use crate::stochastics::{bernoulli, purpose, uniform_sphere, RngStream};
use crate::util::total_cmp;

pub const DEFAULT_HORIZON: usize = 1000;
pub const DEFAULT_RUNS: usize = 10;
pub const K_GRID: [usize; 7] = [1, 2, 3, 4, 5, 7, 10];
pub const EMBEDDING_DIM: usize = 384;
pub const MAX_CANDIDATE_REASKS: usize = 2;
pub const ALL_AT_ONCE_TEMPERATURE: f64 = 0.0;
pub const ONE_BY_ONE_TEMPERATURE: f64 = 1.0;

/// `max(0, cos)` between two vectors, capped at 1.
pub fn cosine_reward(candidate: &[f64], target: &[f64]) -> Result<f64> {
    if candidate.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            got: candidate.len(),
        });
    }
    let dot: f64 = candidate.iter().zip(target).map(|(a, b)| a * b).sum();
    let na: f64 = candidate.iter().map(|x| x * x).sum();
    let nb: f64 = target.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::param("cosine similarity of a zero-norm vector"));
    }
    Ok((dot / (na * nb).sqrt()).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditRun {
    pub pulls: Vec<usize>,
    pub counts: Vec<usize>,
    /// Time-averaged expected reward of the pulled arms.
    pub rew: f64,
}

/// UCB1 over arms with Bernoulli rewards of the given means. Each arm is
/// played once, then the arm maximizing `mean + sqrt(2 ln t / n_a)` with
/// `t` the number of rounds played so far; ties go to the lowest index.
pub fn ucb1(means: &[f64], horizon: usize, rng: &mut RngStream) -> Result<BanditRun> {
    let k = means.len();
    if k == 0 {
        return Err(Error::param("UCB1 needs at least one arm"));
    }
    if horizon < k {
        return Err(Error::param(format!("horizon {horizon} shorter than {k} arms")));
    }
    if let Some(m) = means.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return Err(Error::param(format!("arm mean {m} outside [0, 1]")));
    }
    let mut counts = vec![0usize; k];
    let mut sums = vec![0.0f64; k];
    let mut pulls = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let arm = if t < k {
            t
        } else {
            let log_t = (t as f64).ln();
            let mut best = 0;
            let mut best_index = f64::NEG_INFINITY;
            for a in 0..k {
                let n = counts[a] as f64;
                let index = sums[a] / n + (2.0 * log_t / n).sqrt();
                if index > best_index {
                    best = a;
                    best_index = index;
                }
            }
            best
        };
        let r = bernoulli(means[arm], rng)?;
        counts[arm] += 1;
        sums[arm] += if r { 1.0 } else { 0.0 };
        pulls.push(arm);
    }
    let t = horizon as f64;
    let rew = counts.iter().zip(means).map(|(&n, &m)| (n as f64 / t) * m).sum();
    Ok(BanditRun { pulls, counts, rew })
}

/// Sorts each run's means in descending order and averages position-wise.
pub fn arm_histogram(runs: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
    if runs.is_empty() {
        return Err(Error::param("no runs to summarize"));
    }
    let mut acc = vec![0.0; k];
    for run in runs {
        if run.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: run.len(),
            });
        }
        let mut sorted = run.clone();
        sorted.sort_by(|a, b| total_cmp(b, a));
        for (a, x) in acc.iter_mut().zip(sorted) {
            *a += x;
        }
    }
    let n = runs.len() as f64;
    Ok(acc.into_iter().map(|x| x / n).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Workload {
    Qa,
    Arxiv,
}

impl Workload {
    pub fn as_str(self) -> &'static str {
        match self {
            Workload::Qa => "qa",
            Workload::Arxiv => "arxiv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    AllAtOnce,
    AllAtOnceEncourage,
    OneByOne,
    OneByOneEncourage,
    /// Uniform points on the embedding sphere instead of texts.
    Random,
    /// All-at-once titles from the category name alone.
    CategoryOnly,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::AllAtOnce,
        Strategy::AllAtOnceEncourage,
        Strategy::OneByOne,
        Strategy::OneByOneEncourage,
        Strategy::Random,
        Strategy::CategoryOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::AllAtOnce => "all_at_once",
            Strategy::AllAtOnceEncourage => "all_at_once_encourage",
            Strategy::OneByOne => "one_by_one",
            Strategy::OneByOneEncourage => "one_by_one_encourage",
            Strategy::Random => "random",
            Strategy::CategoryOnly => "category_only",
        }
    }

    pub fn index(self) -> u64 {
        Strategy::ALL.iter().position(|s| *s == self).unwrap_or(0) as u64
    }

    pub fn encourage(self) -> bool {
        matches!(self, Strategy::AllAtOnceEncourage | Strategy::OneByOneEncourage)
    }

    pub fn one_by_one(self) -> bool {
        matches!(self, Strategy::OneByOne | Strategy::OneByOneEncourage)
    }

    /// Candidates are deterministic and shared by all runs.
    pub fn reuses_candidates(self) -> bool {
        matches!(
            self,
            Strategy::AllAtOnce | Strategy::AllAtOnceEncourage | Strategy::CategoryOnly
        )
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .iter()
            .copied()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown explore strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExploreTask {
    pub id: String,
    pub workload: Workload,
    pub payload: ExplorePayload,
    /// The best arm a*.
    pub target: String,
    pub category: Option<String>,
}

impl ExploreTask {
    pub fn qa(item: &QaItem) -> Self {
        ExploreTask {
            id: format!("qa-{}", item.index),
            workload: Workload::Qa,
            payload: ExplorePayload::Qa {
                question: item.question.clone(),
            },
            target: item.ground_truth.clone(),
            category: None,
        }
    }

    pub fn arxiv(item: &ArxivItem, index: usize) -> Self {
        ExploreTask {
            id: format!("arxiv-{}-{index}", item.category),
            workload: Workload::Arxiv,
            payload: ExplorePayload::Arxiv {
                abstract_text: item.abstract_text.clone(),
            },
            target: item.title.clone(),
            category: Some(item.category.clone()),
        }
    }

    fn payload_for(&self, strategy: Strategy) -> Result<ExplorePayload> {
        if strategy == Strategy::CategoryOnly {
            let category = self
                .category
                .clone()
                .ok_or_else(|| Error::Config(format!("task {} has no category", self.id)))?;
            return Ok(ExplorePayload::CategoryOnly { category });
        }
        Ok(self.payload.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreSettings {
    pub horizon: usize,
    pub runs: usize,
    pub seed: u64,
    pub k_grid: Vec<usize>,
}

impl Default for ExploreSettings {
    fn default() -> Self {
        ExploreSettings {
            horizon: DEFAULT_HORIZON,
            runs: DEFAULT_RUNS,
            seed: 0,
            k_grid: K_GRID.to_vec(),
        }
    }
}

impl ExploreSettings {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.k_grid.is_empty() || self.k_grid.contains(&0) {
            return Err(Error::Config("K grid must be nonempty and positive".into()));
        }
        Ok(())
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if !self.k_grid.contains(&k) {
            return Err(Error::Config(format!("K = {k} is not in the grid {:?}", self.k_grid)));
        }
        if k > self.horizon {
            return Err(Error::Config(format!("K = {k} exceeds the horizon {}", self.horizon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// `None` for random points of the embedding space.
    pub text: Option<String>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreEnvironment {
    pub target: String,
    pub target_vector: Vec<f64>,
    pub candidates: Vec<Candidate>,
    pub horizon: usize,
}

impl ExploreEnvironment {
    pub fn means(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.mean).collect()
    }
}

fn stream(settings: &ExploreSettings, tag: u64, task_index: u64, strategy: Strategy, k: usize, run: usize) -> RngStream {
    RngStream::new(
        settings.seed,
        &[tag, task_index, strategy.index(), k as u64, run as u64],
    )
}

/// Asks until `parse_candidates` yields `expected` lines, re-asking at
/// most [`MAX_CANDIDATE_REASKS`] times.
fn ask_candidates(
    responder: &Responder,
    payload: &ExplorePayload,
    mode: &ExploreMode,
    encourage: bool,
    temperature: f64,
    sample: u64,
    rng: &mut RngStream,
) -> Result<Vec<String>> {
    let prompt = render_explore_prompt(payload, mode, encourage)?;
    let expected = prompt.expected_count.unwrap_or(1);
    let mut followups: Vec<(String, String)> = Vec::new();
    let mut got = 0;
    for _ in 0..=MAX_CANDIDATE_REASKS {
        let reply = responder.ask(&prompt, &followups, temperature, sample, &[], rng)?;
        match parse_candidates(&reply.text, expected) {
            Ok(lines) => return Ok(lines),
            Err(CandidateParseError::NoLines) => got = 0,
            Err(CandidateParseError::ShortCount { got: partial, .. }) => got = partial.len(),
        }
        followups.push((reply.text, candidate_reminder(expected)));
    }
    Err(Error::ShortCandidates { expected, got })
}

/// Proposes `k` candidate texts for one run.
pub fn propose_candidates(
    task: &ExploreTask,
    strategy: Strategy,
    k: usize,
    responder: &Responder,
    run: usize,
    rng: &mut RngStream,
) -> Result<Vec<String>> {
    if strategy == Strategy::Random {
        return Err(Error::param("the random baseline proposes no texts"));
    }
    let payload = task.payload_for(strategy)?;
    if strategy.one_by_one() {
        let mut prior: Vec<String> = Vec::with_capacity(k);
        for _ in 0..k {
            let mode = ExploreMode::OneByOne { prior: prior.clone() };
            let mut line = ask_candidates(
                responder,
                &payload,
                &mode,
                strategy.encourage(),
                ONE_BY_ONE_TEMPERATURE,
                run as u64,
                rng,
            )?;
            prior.push(line.remove(0));
        }
        Ok(prior)
    } else {
        ask_candidates(
            responder,
            &payload,
            &ExploreMode::AllAtOnce { count: k },
            strategy.encourage(),
            ALL_AT_ONCE_TEMPERATURE,
            0,
            rng,
        )
    }
}

/// Scores candidate texts against the task's target.
pub fn score_texts(target: &str, texts: &[String], embedder: &CachedEmbedder, horizon: usize) -> Result<ExploreEnvironment> {
    let target_vector = embedder.embed_one(target)?.vector;
    let embedded = embedder.embed(texts)?;
    let candidates = texts
        .iter()
        .zip(embedded)
        .map(|(t, e)| {
            Ok(Candidate {
                text: Some(t.clone()),
                mean: cosine_reward(&e.vector, &target_vector)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExploreEnvironment {
        target: target.to_string(),
        target_vector,
        candidates,
        horizon,
    })
}

/// Builds the bandit environment of one run.
pub fn build_environment(
    task: &ExploreTask,
    strategy: Strategy,
    k: usize,
    responder: Option<&Responder>,
    embedder: &CachedEmbedder,
    settings: &ExploreSettings,
    run: usize,
    rng: &mut RngStream,
) -> Result<ExploreEnvironment> {
    settings.check_k(k)?;
    if strategy == Strategy::Random {
        let target_vector = embedder.embed_one(&task.target)?.vector;
        let candidates = (0..k)
            .map(|_| {
                let v = uniform_sphere(target_vector.len(), rng)?;
                Ok(Candidate {
                    text: None,
                    mean: cosine_reward(&v, &target_vector)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(ExploreEnvironment {
            target: task.target.clone(),
            target_vector,
            candidates,
            horizon: settings.horizon,
        });
    }
    let responder = responder.ok_or_else(|| Error::Config(format!("strategy {} needs an oracle", strategy.as_str())))?;
    let texts = propose_candidates(task, strategy, k, responder, run, rng)?;
    score_texts(&task.target, &texts, embedder, settings.horizon)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreRunRecord {
    pub run: usize,
    pub seed: u64,
    pub candidates: Vec<Option<String>>,
    pub means: Vec<f64>,
    pub rew: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreTaskResult {
    pub task_id: String,
    pub workload: Workload,
    pub category: Option<String>,
    pub strategy: Strategy,
    #[serde(rename = "K")]
    pub k: usize,
    pub horizon: usize,
    /// Candidates were generated once and shared by all runs.
    pub reused_candidates: bool,
    pub runs: Vec<ExploreRunRecord>,
    pub rbar: f64,
}

impl ExploreTaskResult {
    pub fn rews(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.rew).collect()
    }

    pub fn histogram(&self) -> Result<Vec<f64>> {
        let runs: Vec<Vec<f64>> = self.runs.iter().map(|r| r.means.clone()).collect();
        arm_histogram(&runs, self.k)
    }
}

/// Runs `settings.runs` independent candidate-selection + UCB1 runs.
/// Deterministic strategies generate candidates once and reuse them.
pub fn run_experiment(
    task: &ExploreTask,
    task_index: u64,
    strategy: Strategy,
    k: usize,
    settings: &ExploreSettings,
    responder: Option<&Responder>,
    embedder: &CachedEmbedder,
) -> Result<ExploreTaskResult> {
    settings.validate()?;
    settings.check_k(k)?;
    let mut shared: Option<ExploreEnvironment> = None;
    let mut runs = Vec::with_capacity(settings.runs);
    for run in 0..settings.runs {
        let env = match (&shared, strategy.reuses_candidates()) {
            (Some(env), true) => env.clone(),
            _ => {
                let mut rng = stream(settings, purpose::CANDIDATES, task_index, strategy, k, run);
                let env = build_environment(task, strategy, k, responder, embedder, settings, run, &mut rng)?;
                if strategy.reuses_candidates() {
                    shared = Some(env.clone());
                }
                env
            }
        };
        let means = env.means();
        let mut rng = stream(settings, purpose::BANDIT, task_index, strategy, k, run);
        let bandit = ucb1(&means, settings.horizon, &mut rng)?;
        runs.push(ExploreRunRecord {
            run,
            seed: settings.seed,
            candidates: env.candidates.iter().map(|c| c.text.clone()).collect(),
            means,
            rew: bandit.rew,
        });
    }
    let rbar = runs.iter().map(|r| r.rew).sum::<f64>() / runs.len() as f64;
    Ok(ExploreTaskResult {
        task_id: task.id.clone(),
        workload: task.workload,
        category: task.category.clone(),
        strategy,
        k,
        horizon: settings.horizon,
        reused_candidates: strategy.reuses_candidates(),
        runs,
        rbar,
    })
}
