use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use super::io::{write_atomic, write_explore_csv, write_histogram_csv};
use super::metrics::{explore_histograms, explore_summary};
use crate::config::{ExploreConfig, ExplorePolicyConfig, WorkloadConfig};
use crate::datasets::{corpus_path, load_builtin_qa, read_corpus};
use crate::error::{Error, Result};
use crate::explore::{run_experiment, ExploreSettings, ExploreTask, ExploreTaskResult};
use crate::oracle::{CachedEmbedder, ChatOracle, OracleError, Responder, ScriptedOracle};

/// Tasks of a workload in a fixed order; the position is the stream index.
pub fn explore_tasks(workload: &WorkloadConfig) -> Result<Vec<ExploreTask>> {
    match workload {
        WorkloadConfig::Qa { tasks } => {
            let items = load_builtin_qa();
            Ok(match tasks {
                Some(idx) => idx
                    .iter()
                    .map(|&i| {
                        items
                            .get(i)
                            .map(ExploreTask::qa)
                            .ok_or_else(|| Error::Config(format!("no Q/A task {i}")))
                    })
                    .collect::<Result<_>>()?,
                None => items.iter().map(ExploreTask::qa).collect(),
            })
        }
        WorkloadConfig::Arxiv {
            corpus_dir,
            categories,
            per_category,
        } => {
            let mut out = Vec::new();
            for category in categories {
                let corpus = read_corpus(&corpus_path(corpus_dir, category))?;
                if corpus.items.len() < *per_category {
                    return Err(Error::Dataset(format!(
                        "{category}: corpus holds {} abstracts, {per_category} needed",
                        corpus.items.len()
                    )));
                }
                out.extend(corpus.items[..*per_category].iter().enumerate().map(|(i, item)| ExploreTask::arxiv(item, i)));
            }
            Ok(out)
        }
    }
}

/// Runs every (task, strategy, K) cell of `config`. Results come back in
/// task, strategy, K order regardless of `config.jobs`.
pub fn run_explore_eval(
    config: &ExploreConfig,
    chat: Option<Arc<dyn ChatOracle>>,
    embedder: &CachedEmbedder,
) -> Result<Vec<ExploreTaskResult>> {
    config.validate()?;
    let responder = match &config.policy {
        None => None,
        Some(ExplorePolicyConfig::Scripted { policy }) => Some(Responder::Scripted(ScriptedOracle::new(policy.clone()))),
        Some(ExplorePolicyConfig::Chat { model, .. }) => Some(Responder::Chat {
            oracle: chat.ok_or_else(|| {
                Error::Oracle(OracleError::NotConfigured("chat policy without a chat client".into()))
            })?,
            model: model.clone(),
        }),
    };
    let settings = ExploreSettings {
        horizon: config.horizon,
        runs: config.runs,
        seed: config.seed,
        k_grid: config.k_grid.clone(),
    };
    let tasks = explore_tasks(&config.workload)?;
    let mut cells = Vec::new();
    for (ti, task) in tasks.iter().enumerate() {
        for &strategy in &config.strategies {
            for &k in &config.k_grid {
                cells.push((ti, task, strategy, k));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<Result<ExploreTaskResult>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(ti, task, strategy, k)| {
                run_experiment(task, ti as u64, strategy, k, &settings, responder.as_ref(), embedder)
            })
            .collect()
    });
    results.into_iter().collect()
}

/// Writes one JSON file per cell under `dir/explore/`, plus
/// `explore.csv` and `histogram.csv`.
pub fn write_explore_results(dir: &Path, results: &[ExploreTaskResult]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for r in results {
        let path = dir
            .join("explore")
            .join(format!("{}-{}-K{}.json", r.task_id, r.strategy.as_str(), r.k));
        let mut bytes = serde_json::to_vec_pretty(r)?;
        bytes.push(b'\n');
        write_atomic(&path, &bytes)?;
        paths.push(path);
    }
    let summary = dir.join("explore.csv");
    write_explore_csv(&summary, &explore_summary(results)?)?;
    let hist = dir.join("histogram.csv");
    write_histogram_csv(&hist, &explore_histograms(results)?)?;
    paths.push(summary);
    paths.push(hist);
    Ok(paths)
}
