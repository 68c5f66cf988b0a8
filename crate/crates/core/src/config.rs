//! Experiment configuration files.
//!
//! Configs are JSON documents with named fields; unknown fields are
//! rejected and every config is validated before any task is generated.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cb::linear::DEFAULT_TASKS;
use crate::cb::room::RewardMode;
use crate::error::{Error, Result};
use crate::explore::{Strategy, DEFAULT_HORIZON, DEFAULT_RUNS, EMBEDDING_DIM, K_GRID};
use crate::mab::{DEFAULT_GAP_GRID, DEFAULT_NUM_ARMS, DEFAULT_TASKS_PER_GAP};
use crate::mitigations::Mitigation;
use crate::oracle::ScriptedPolicy;
use crate::prompts::MabStyle;

pub const DEFAULT_JOBS: usize = 4;

fn default_jobs() -> usize {
    DEFAULT_JOBS
}
fn default_num_arms() -> usize {
    DEFAULT_NUM_ARMS
}
fn default_gaps() -> Vec<f64> {
    DEFAULT_GAP_GRID.to_vec()
}
fn default_tasks_per_gap() -> usize {
    DEFAULT_TASKS_PER_GAP
}
fn default_tasks() -> usize {
    DEFAULT_TASKS
}
fn default_noise_sd() -> f64 {
    1.0
}
fn default_style() -> MabStyle {
    MabStyle::Buttons
}
fn default_horizon() -> usize {
    DEFAULT_HORIZON
}
fn default_runs() -> usize {
    DEFAULT_RUNS
}
fn default_k_grid() -> Vec<usize> {
    K_GRID.to_vec()
}
fn default_dimension() -> usize {
    EMBEDDING_DIM
}
fn default_per_category() -> usize {
    crate::datasets::DEFAULT_COUNT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PuzzleConfig {
    Mab {
        #[serde(default = "default_num_arms")]
        num_arms: usize,
        #[serde(default = "default_gaps")]
        gaps: Vec<f64>,
        #[serde(default = "default_tasks_per_gap")]
        tasks_per_gap: usize,
        horizon: usize,
        #[serde(default = "default_style")]
        style: MabStyle,
    },
    LinearCb {
        num_arms: usize,
        dimension: usize,
        horizon: usize,
        #[serde(default = "default_tasks")]
        tasks: usize,
        #[serde(default = "default_noise_sd")]
        noise_sd: f64,
    },
    Room {
        horizon: usize,
        mode: RewardMode,
        #[serde(default = "default_tasks")]
        tasks: usize,
    },
}

impl PuzzleConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            PuzzleConfig::Mab { .. } => "mab",
            PuzzleConfig::LinearCb { .. } => "linear_cb",
            PuzzleConfig::Room { .. } => "room",
        }
    }

    pub fn horizon(&self) -> usize {
        match *self {
            PuzzleConfig::Mab { horizon, .. } | PuzzleConfig::LinearCb { horizon, .. } | PuzzleConfig::Room { horizon, .. } => {
                horizon
            }
        }
    }

    pub fn num_tasks(&self) -> usize {
        match self {
            PuzzleConfig::Mab { gaps, tasks_per_gap, .. } => gaps.len() * tasks_per_gap,
            PuzzleConfig::LinearCb { tasks, .. } | PuzzleConfig::Room { tasks, .. } => *tasks,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |r: Result<()>| r.map_err(|e| Error::Config(e.to_string()));
        match self {
            PuzzleConfig::Mab {
                num_arms,
                gaps,
                tasks_per_gap,
                horizon,
                ..
            } => {
                if gaps.is_empty() || *tasks_per_gap == 0 {
                    return Err(Error::Config("MAB puzzles need at least one gap and one task per gap".into()));
                }
                for &g in gaps {
                    check(crate::mab::MabParams::new(*num_arms, g, *horizon).validate())?;
                }
                Ok(())
            }
            PuzzleConfig::LinearCb {
                num_arms,
                dimension,
                horizon,
                tasks,
                noise_sd,
            } => check(
                crate::cb::linear::LinearCbParams {
                    num_arms: *num_arms,
                    dimension: *dimension,
                    horizon: *horizon,
                    tasks: *tasks,
                    noise_sd: *noise_sd,
                }
                .validate(),
            ),
            PuzzleConfig::Room { horizon, tasks, .. } => {
                if *horizon == 0 || *tasks == 0 {
                    return Err(Error::Config("room puzzles need a positive horizon and task count".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    Scripted {
        policy: ScriptedPolicy,
    },
    /// Per-arm least squares on the shown history (greedy on MAB).
    Linear,
    /// Best average reward on the shown history, ignoring contexts.
    Greedy,
    Random,
    Chat {
        model: String,
        #[serde(default)]
        endpoint: Option<String>,
        #[serde(default)]
        temperature: f64,
    },
}

impl PolicyConfig {
    pub fn tag(&self) -> String {
        match self {
            PolicyConfig::Scripted { policy } => {
                crate::oracle::Responder::Scripted(crate::oracle::ScriptedOracle::new(policy.clone())).tag()
            }
            PolicyConfig::Linear => "baseline:linear".into(),
            PolicyConfig::Greedy => "baseline:greedy".into(),
            PolicyConfig::Random => "baseline:random".into(),
            PolicyConfig::Chat { model, .. } => format!("chat:{model}"),
        }
    }

    pub fn temperature(&self) -> f64 {
        match self {
            PolicyConfig::Chat { temperature, .. } => *temperature,
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PolicyConfig::Chat { model, temperature, .. } => {
                if model.is_empty() {
                    return Err(Error::Config("chat policy needs a model".into()));
                }
                if !(0.0..=2.0).contains(temperature) {
                    return Err(Error::Config(format!("temperature {temperature} outside [0, 2]")));
                }
                Ok(())
            }
            PolicyConfig::Scripted {
                policy: ScriptedPolicy::FixedLabel { label },
            } if label.is_empty() => Err(Error::Config("fixed_label needs a label".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Thresholds {
    /// Sorted distinct observed difficulties.
    #[default]
    Observed,
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExploitConfig {
    /// Series label of the curve; derived from the config when absent.
    #[serde(default)]
    pub name: Option<String>,
    pub puzzle: PuzzleConfig,
    #[serde(default = "no_mitigation")]
    pub mitigation: Mitigation,
    pub policy: PolicyConfig,
    #[serde(default)]
    pub cot: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn no_mitigation() -> Mitigation {
    Mitigation::None
}

impl ExploitConfig {
    pub fn new(puzzle: PuzzleConfig, policy: PolicyConfig) -> Self {
        ExploitConfig {
            name: None,
            puzzle,
            mitigation: Mitigation::None,
            policy,
            cot: false,
            seed: 0,
            jobs: DEFAULT_JOBS,
            thresholds: Thresholds::Observed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.puzzle.validate()?;
        self.policy.validate()?;
        self.mitigation
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if matches!(self.puzzle, PuzzleConfig::Mab { .. }) && self.mitigation != Mitigation::None {
            return Err(Error::Config("mitigations apply to contextual puzzles only".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if let Thresholds::Fixed(t) = &self.thresholds {
            if t.is_empty() || t.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config("fixed thresholds must be a nonempty list of numbers".into()));
            }
        }
        Ok(())
    }

    pub fn series_label(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        let size = match &self.puzzle {
            PuzzleConfig::Mab { num_arms, .. } => format!("K={num_arms}"),
            PuzzleConfig::LinearCb { num_arms, dimension, .. } => format!("K={num_arms},d={dimension}"),
            PuzzleConfig::Room { mode, .. } => format!("mode={}", mode.as_str()),
        };
        let mut label = format!(
            "{} {} T={} {}",
            self.puzzle.kind(),
            size,
            self.puzzle.horizon(),
            self.policy.tag()
        );
        if self.mitigation != Mitigation::None {
            label.push(' ');
            label.push_str(self.mitigation.tag());
            if let Some(k) = self.mitigation.k() {
                label.push_str(&format!(" k={k}"));
            }
            if let Some(kp) = self.mitigation.k_prime() {
                label.push_str(&format!(" k'={kp}"));
            }
        }
        if self.cot {
            label.push_str(" cot");
        }
        label
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WorkloadConfig {
    Qa {
        /// Question indices; all ten when absent.
        #[serde(default)]
        tasks: Option<Vec<usize>>,
    },
    Arxiv {
        corpus_dir: PathBuf,
        categories: Vec<String>,
        #[serde(default = "default_per_category")]
        per_category: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExplorePolicyConfig {
    Scripted {
        policy: ScriptedPolicy,
    },
    Chat {
        model: String,
        #[serde(default)]
        endpoint: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingConfig {
    /// Offline feature hashing.
    Hashed {
        #[serde(default = "default_dimension")]
        dimension: usize,
    },
    File {
        path: PathBuf,
    },
    Endpoint {
        model: String,
        #[serde(default)]
        endpoint: Option<String>,
    },
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig::Hashed {
            dimension: EMBEDDING_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExploreConfig {
    pub workload: WorkloadConfig,
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_k_grid")]
    pub k_grid: Vec<usize>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub policy: Option<ExplorePolicyConfig>,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
}

impl ExploreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Config("no explore strategies given".into()));
        }
        if self.k_grid.is_empty() || self.k_grid.contains(&0) {
            return Err(Error::Config("K grid must be nonempty and positive".into()));
        }
        if let Some(k) = self.k_grid.iter().find(|k| !K_GRID.contains(k)) {
            return Err(Error::Config(format!("K = {k} is not in the grid {K_GRID:?}")));
        }
        if self.runs == 0 || self.horizon == 0 || self.jobs == 0 {
            return Err(Error::Config("runs, horizon and jobs must be positive".into()));
        }
        if let Some(k) = self.k_grid.iter().find(|&&k| k > self.horizon) {
            return Err(Error::Config(format!("K = {k} exceeds the horizon {}", self.horizon)));
        }
        let needs_oracle = self.strategies.iter().any(|s| *s != Strategy::Random);
        if needs_oracle && self.policy.is_none() {
            return Err(Error::Config("strategies other than random need an oracle policy".into()));
        }
        match &self.workload {
            WorkloadConfig::Qa { tasks: Some(t) } if t.iter().any(|&i| i >= 10) => {
                return Err(Error::Config("Q/A task indices run from 0 to 9".into()))
            }
            WorkloadConfig::Qa { .. } => {
                if self.strategies.contains(&Strategy::CategoryOnly) {
                    return Err(Error::Config("category_only applies to the arXiv workload".into()));
                }
            }
            WorkloadConfig::Arxiv {
                categories,
                per_category,
                ..
            } => {
                if categories.is_empty() || *per_category == 0 {
                    return Err(Error::Config("arXiv workload needs categories and a positive per_category".into()));
                }
                for c in categories {
                    crate::datasets::check_category(c).map_err(|e| Error::Config(e.to_string()))?;
                }
            }
        }
        if let EmbeddingConfig::Hashed { dimension: 0 } = self.embedding {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(())
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Parses an exploit config without validating it, so callers can apply
/// overrides first.
pub fn parse_exploit_config(path: &Path) -> Result<ExploitConfig> {
    read_json(path)
}

pub fn parse_explore_config(path: &Path) -> Result<ExploreConfig> {
    read_json(path)
}

pub fn load_exploit_config(path: &Path) -> Result<ExploitConfig> {
    let config = parse_exploit_config(path)?;
    config.validate()?;
    Ok(config)
}

pub fn load_explore_config(path: &Path) -> Result<ExploreConfig> {
    let config = parse_explore_config(path)?;
    config.validate()?;
    Ok(config)
}
