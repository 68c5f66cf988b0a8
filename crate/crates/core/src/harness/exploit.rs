use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_linear, greedy_empirical, greedy_history, predict_best_arm, random_arm};
use crate::cb::linear::{correct_answer_cb, effective_gap, generate_linear_cb_task, LinearCbParams, LinearCbTask};
use crate::cb::room::{generate_room_task, RewardMode, RoomTask};
use crate::config::{ExploitConfig, PolicyConfig, PuzzleConfig};
use crate::error::{Error, Result};
use crate::history::{CbHistory, Context, SummarizedHistory};
use crate::mab::{correct_answers_mab, empirical_gap, generate_mab_task, MabParams, MabTask};
use crate::oracle::{ChatOracle, OracleError, Responder, ScriptedOracle};
use crate::prompts::{parse_answer, render_cb_prompt, render_mab_prompt, MabStyle, RenderedPrompt};
use crate::stochastics::{purpose, RngStream};
use crate::util::fmt_num;

pub const KIND_MAB: u64 = 1;
pub const KIND_LINEAR: u64 = 2;
pub const KIND_ROOM: u64 = 3;

/// One scored exploit task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task_id: String,
    pub kind: String,
    #[serde(rename = "K")]
    pub num_arms: usize,
    pub d: Option<usize>,
    #[serde(rename = "T")]
    pub horizon: usize,
    /// Generating gap of MAB tasks.
    pub delta: Option<f64>,
    /// Difficulty: empirical gap (MAB) or effective gap (CB).
    pub gap: f64,
    pub mitigation: String,
    pub k: Option<usize>,
    pub k_prime: Option<usize>,
    pub policy: String,
    pub chosen: Option<usize>,
    pub correct: bool,
    pub invalid: bool,
    pub attempts: u32,
    pub latency_ms: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExploitTask {
    Mab(MabTask),
    LinearCb(LinearCbTask),
    Room(RoomTask),
}

impl ExploitTask {
    pub fn num_arms(&self) -> usize {
        match self {
            ExploitTask::Mab(t) => t.num_arms(),
            ExploitTask::LinearCb(t) => t.params.num_arms,
            ExploitTask::Room(_) => crate::cb::room::RoomAction::ALL.len(),
        }
    }

    pub fn correct_answers(&self) -> Vec<usize> {
        match self {
            ExploitTask::Mab(t) => correct_answers_mab(t),
            ExploitTask::LinearCb(t) => correct_answer_cb(t),
            ExploitTask::Room(t) => t.correct_answers(),
        }
    }

    pub fn difficulty(&self) -> f64 {
        match self {
            ExploitTask::Mab(t) => empirical_gap(t),
            ExploitTask::LinearCb(t) => effective_gap(t),
            ExploitTask::Room(t) => t.effective_gap(),
        }
    }

    /// History and query of a contextual task.
    pub fn contextual(&self) -> Option<(CbHistory, Context)> {
        match self {
            ExploitTask::Mab(_) => None,
            ExploitTask::LinearCb(t) => Some((t.history(), t.query_context())),
            ExploitTask::Room(t) => Some((t.history(), Context::Room(*t.query()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub id: String,
    /// Stream path shared by the generation, mitigation and policy streams.
    pub path: Vec<u64>,
    pub task: ExploitTask,
}

impl TaskInstance {
    fn stream(&self, seed: u64, tag: u64) -> RngStream {
        let mut path = vec![tag];
        path.extend_from_slice(&self.path);
        RngStream::new(seed, &path)
    }
}

fn mode_code(mode: RewardMode) -> u64 {
    match mode {
        RewardMode::Easy => 0,
        RewardMode::Hard => 1,
    }
}

fn generation_stream(seed: u64, path: &[u64]) -> RngStream {
    let mut full = vec![purpose::GENERATE];
    full.extend_from_slice(path);
    RngStream::new(seed, &full)
}

/// Generates every task of a puzzle configuration. Each task draws from its
/// own stream, so the set is independent of evaluation order.
pub fn generate_tasks(puzzle: &PuzzleConfig, seed: u64) -> Result<Vec<TaskInstance>> {
    puzzle.validate()?;
    match puzzle {
        PuzzleConfig::Mab {
            num_arms,
            gaps,
            tasks_per_gap,
            horizon,
            ..
        } => {
            let mut out = Vec::with_capacity(gaps.len() * tasks_per_gap);
            for (gi, &gap) in gaps.iter().enumerate() {
                for j in 0..*tasks_per_gap {
                    let path = vec![KIND_MAB, *num_arms as u64, *horizon as u64, gi as u64, j as u64];
                    let task = generate_mab_task(
                        MabParams::new(*num_arms, gap, *horizon),
                        &mut generation_stream(seed, &path),
                    )?;
                    out.push(TaskInstance {
                        id: format!("mab-K{num_arms}-T{horizon}-gap{}-{j:02}", fmt_num(gap)),
                        path,
                        task: ExploitTask::Mab(task),
                    });
                }
            }
            Ok(out)
        }
        PuzzleConfig::LinearCb {
            num_arms,
            dimension,
            horizon,
            tasks,
            noise_sd,
        } => (0..*tasks)
            .map(|i| {
                let path = vec![KIND_LINEAR, *num_arms as u64, *dimension as u64, *horizon as u64, i as u64];
                let params = LinearCbParams {
                    num_arms: *num_arms,
                    dimension: *dimension,
                    horizon: *horizon,
                    tasks: *tasks,
                    noise_sd: *noise_sd,
                };
                let task = generate_linear_cb_task(params, &mut generation_stream(seed, &path))?;
                Ok(TaskInstance {
                    id: format!("linear_cb-K{num_arms}-d{dimension}-T{horizon}-{i:03}"),
                    path,
                    task: ExploitTask::LinearCb(task),
                })
            })
            .collect(),
        PuzzleConfig::Room { horizon, mode, tasks } => (0..*tasks)
            .map(|i| {
                let path = vec![KIND_ROOM, mode_code(*mode), *horizon as u64, i as u64];
                let task = generate_room_task(*horizon, *mode, &mut generation_stream(seed, &path))?;
                Ok(TaskInstance {
                    id: format!("room-{}-T{horizon}-{i:03}", mode.as_str()),
                    path,
                    task: ExploitTask::Room(task),
                })
            })
            .collect(),
    }
}

struct Decision {
    chosen: Option<usize>,
    attempts: u32,
    latency_ms: u64,
    error: Option<String>,
}

fn ask_oracle(
    responder: &Responder,
    prompt: &RenderedPrompt,
    temperature: f64,
    correct: &[usize],
    rng: &mut RngStream,
) -> std::result::Result<Decision, OracleError> {
    let first = responder.ask(prompt, &[], temperature, 0, correct, rng)?;
    let mut attempts = first.attempts;
    let mut latency_ms = first.latency_ms;
    let mut chosen = parse_answer(&first.text, &prompt.answer_labels).choice;
    if chosen.is_none() {
        // one re-ask with a reminder, then the answer counts as invalid
        let second = responder.ask(prompt, &[(first.text, prompt.reminder())], temperature, 0, correct, rng)?;
        attempts += second.attempts;
        latency_ms += second.latency_ms;
        chosen = parse_answer(&second.text, &prompt.answer_labels).choice;
    }
    Ok(Decision {
        chosen,
        attempts,
        latency_ms,
        error: None,
    })
}

fn mab_style(puzzle: &PuzzleConfig) -> MabStyle {
    match puzzle {
        PuzzleConfig::Mab { style, .. } => *style,
        _ => MabStyle::Buttons,
    }
}

/// Runs one task through mitigation, rendering, the policy and scoring.
pub fn evaluate_task(config: &ExploitConfig, inst: &TaskInstance, responder: Option<&Responder>) -> Result<RunRecord> {
    let task = &inst.task;
    let correct = task.correct_answers();
    let mut policy_rng = inst.stream(config.seed, purpose::POLICY);

    let summary: Option<(SummarizedHistory, Context)> = match task.contextual() {
        Some((history, query)) => {
            let mut rng = inst.stream(config.seed, purpose::MITIGATE);
            Some((config.mitigation.apply(&history, &query, &mut rng)?, query))
        }
        None => None,
    };

    let lowest = |set: Vec<usize>| set.first().copied();
    let decision = match &config.policy {
        PolicyConfig::Linear | PolicyConfig::Greedy | PolicyConfig::Random => {
            let chosen = match (&config.policy, task, &summary) {
                (PolicyConfig::Random, _, _) => Some(random_arm(task.num_arms(), &mut policy_rng)?),
                (_, ExploitTask::Mab(t), _) => lowest(greedy_empirical(t)),
                (PolicyConfig::Linear, _, Some((s, q))) => lowest(predict_best_arm(&fit_linear(&s.as_history())?, q)?),
                (PolicyConfig::Greedy, _, Some((s, _))) => lowest(greedy_history(&s.as_history())?),
                _ => return Err(Error::Config("baseline without a history".into())),
            };
            Decision {
                chosen,
                attempts: 0,
                latency_ms: 0,
                error: None,
            }
        }
        PolicyConfig::Scripted { .. } | PolicyConfig::Chat { .. } => {
            let responder = responder.ok_or_else(|| Error::Oracle(OracleError::NotConfigured("no oracle for policy".into())))?;
            let prompt = match (task, &summary) {
                (ExploitTask::Mab(t), _) => render_mab_prompt(t, mab_style(&config.puzzle), config.cot)?,
                (_, Some((s, q))) => render_cb_prompt(s, q, config.cot)?,
                _ => return Err(Error::Config("contextual task without a summary".into())),
            };
            match ask_oracle(responder, &prompt, config.policy.temperature(), &correct, &mut policy_rng) {
                Ok(d) => d,
                Err(e) if e.is_fatal() => return Err(Error::Oracle(e)),
                Err(e) => Decision {
                    chosen: None,
                    attempts: 0,
                    latency_ms: 0,
                    error: Some(e.kind().to_string()),
                },
            }
        }
    };

    let is_correct = decision.chosen.is_some_and(|c| correct.contains(&c));
    let (d, delta) = match task {
        ExploitTask::Mab(t) => (None, Some(t.params.gap)),
        ExploitTask::LinearCb(t) => (Some(t.params.dimension), None),
        ExploitTask::Room(_) => (None, None),
    };
    Ok(RunRecord {
        task_id: inst.id.clone(),
        kind: config.puzzle.kind().to_string(),
        num_arms: task.num_arms(),
        d,
        horizon: config.puzzle.horizon(),
        delta,
        gap: task.difficulty(),
        mitigation: config.mitigation.tag().to_string(),
        k: config.mitigation.k(),
        k_prime: config.mitigation.k_prime(),
        policy: config.policy.tag(),
        chosen: decision.chosen,
        correct: is_correct,
        invalid: decision.chosen.is_none(),
        attempts: decision.attempts,
        latency_ms: decision.latency_ms,
        error: decision.error,
    })
}

/// Evaluates every task of `config` on a pool of `config.jobs` workers.
/// Records come back in task order. `chat` backs a chat policy and is
/// ignored otherwise.
pub fn run_exploit_eval(config: &ExploitConfig, chat: Option<Arc<dyn ChatOracle>>) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let responder = match &config.policy {
        PolicyConfig::Scripted { policy } => Some(Responder::Scripted(ScriptedOracle::new(policy.clone()))),
        PolicyConfig::Chat { model, .. } => {
            let oracle = chat.ok_or_else(|| {
                Error::Oracle(OracleError::NotConfigured("chat policy without a chat client".into()))
            })?;
            Some(Responder::Chat {
                oracle,
                model: model.clone(),
            })
        }
        _ => None,
    };
    let tasks = generate_tasks(&config.puzzle, config.seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<RunRecord>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|inst| evaluate_task(config, inst, responder.as_ref()))
            .collect()
    });
    results.into_iter().collect()
}
