//! Python bindings. Configs and results cross the boundary as JSON text so
//! the Python side sees exactly what the command line reads and writes.
//!
//! Only offline responders are available here: scripted policies,
//! baselines, and hashed or file-backed embeddings.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use bandit_oracles::cb::room::{room_reward, RewardMode, RoomAction, RoomContext};
use bandit_oracles::config::{EmbeddingConfig, ExploitConfig, ExploreConfig, PuzzleConfig};
use bandit_oracles::explore::ucb1;
use bandit_oracles::harness::{
    build_report, ci95, frac_correct_curve, generate_tasks, observed_thresholds, read_results_csv, run_exploit_eval,
    run_explore_eval, write_exploit_outputs, write_explore_results,
};
use bandit_oracles::oracle::{CachedEmbedder, HashedEmbeddings, PrecomputedEmbeddings};
use bandit_oracles::{Error, Result, RngStream};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::json;

/// Runs an exploit config and returns its records as a JSON array. Writes
/// the usual output files when `out_dir` is given.
pub fn exploit(config_json: &str, out_dir: Option<&Path>) -> Result<String> {
    let config: ExploitConfig = serde_json::from_str(config_json)?;
    config.validate()?;
    let records = run_exploit_eval(&config, None)?;
    if let Some(dir) = out_dir {
        write_exploit_outputs(dir, &config, &records)?;
    }
    Ok(serde_json::to_string(&records)?)
}

fn offline_embedder(embedding: &EmbeddingConfig) -> Result<CachedEmbedder> {
    match embedding {
        EmbeddingConfig::Hashed { dimension } => Ok(CachedEmbedder::new(Arc::new(HashedEmbeddings::new(*dimension)))),
        EmbeddingConfig::File { path } => Ok(CachedEmbedder::new(Arc::new(PrecomputedEmbeddings::load(path)?))),
        EmbeddingConfig::Endpoint { .. } => Err(Error::Config(
            "endpoint embeddings are only available from the command line".into(),
        )),
    }
}

/// Runs an explore config and returns the per-cell results as JSON.
pub fn explore(config_json: &str, out_dir: Option<&Path>) -> Result<String> {
    let config: ExploreConfig = serde_json::from_str(config_json)?;
    config.validate()?;
    let embedder = offline_embedder(&config.embedding)?;
    let results = run_explore_eval(&config, None, &embedder)?;
    if let Some(dir) = out_dir {
        write_explore_results(dir, &results)?;
    }
    Ok(serde_json::to_string(&results)?)
}

/// Generated tasks with their ids, correct answers and difficulty.
pub fn tasks(puzzle_json: &str, seed: u64) -> Result<String> {
    let puzzle: PuzzleConfig = serde_json::from_str(puzzle_json)?;
    puzzle.validate()?;
    let out: Vec<_> = generate_tasks(&puzzle, seed)?
        .into_iter()
        .map(|inst| {
            json!({
                "id": inst.id,
                "correct": inst.task.correct_answers(),
                "difficulty": inst.task.difficulty(),
                "task": inst.task,
            })
        })
        .collect();
    Ok(serde_json::to_string(&out)?)
}

/// FracCorrect curve of a `results.csv` at its observed difficulties.
pub fn curve(results_csv: &Path, label: &str) -> Result<String> {
    let records = read_results_csv(results_csv)?;
    if records.is_empty() {
        return Err(Error::Config(format!("{} holds no records", results_csv.display())));
    }
    let points = frac_correct_curve(&records, &observed_thresholds(&records), label)?;
    Ok(serde_json::to_string(&points)?)
}

/// Writes report files for the run directories and returns the table text.
pub fn report(dirs: &[PathBuf], out_dir: &Path) -> Result<String> {
    let report = build_report(dirs)?;
    report.write(out_dir)?;
    Ok(report.table)
}

pub fn room(mode: &str, context_json: &str, action: &str) -> Result<f64> {
    let mode: RewardMode = serde_json::from_value(serde_json::Value::String(mode.to_string()))?;
    let ctx: RoomContext = serde_json::from_str(context_json)?;
    Ok(room_reward(mode, &ctx, RoomAction::from_label(action)?))
}

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Param(_) | Error::Config(_) | Error::Json(_) | Error::DimensionMismatch { .. } | Error::EmptyHistory => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyfunction]
#[pyo3(name = "exploit", signature = (config_json, out_dir=None))]
fn py_exploit(config_json: &str, out_dir: Option<PathBuf>) -> PyResult<String> {
    exploit(config_json, out_dir.as_deref()).map_err(to_py)
}

#[pyfunction]
#[pyo3(name = "explore", signature = (config_json, out_dir=None))]
fn py_explore(config_json: &str, out_dir: Option<PathBuf>) -> PyResult<String> {
    explore(config_json, out_dir.as_deref()).map_err(to_py)
}

#[pyfunction]
#[pyo3(name = "tasks", signature = (puzzle_json, seed=0))]
fn py_tasks(puzzle_json: &str, seed: u64) -> PyResult<String> {
    tasks(puzzle_json, seed).map_err(to_py)
}

#[pyfunction]
#[pyo3(name = "curve", signature = (results_csv, label="curve"))]
fn py_curve(results_csv: PathBuf, label: &str) -> PyResult<String> {
    curve(&results_csv, label).map_err(to_py)
}

#[pyfunction]
#[pyo3(name = "report")]
fn py_report(dirs: Vec<PathBuf>, out_dir: PathBuf) -> PyResult<String> {
    report(&dirs, &out_dir).map_err(to_py)
}

#[pyfunction]
#[pyo3(name = "room_reward")]
fn py_room_reward(mode: &str, context_json: &str, action: &str) -> PyResult<f64> {
    room(mode, context_json, action).map_err(to_py)
}

/// Returns `(rew, counts)` of one UCB1 run.
#[pyfunction]
#[pyo3(name = "ucb1", signature = (means, horizon, seed=0))]
fn py_ucb1(means: Vec<f64>, horizon: usize, seed: u64) -> PyResult<(f64, Vec<usize>)> {
    let run = ucb1(&means, horizon, &mut RngStream::new(seed, &[])).map_err(to_py)?;
    Ok((run.rew, run.counts))
}

#[pyfunction]
#[pyo3(name = "ci95")]
fn py_ci95(successes: usize, n: usize) -> PyResult<(f64, f64)> {
    ci95(successes, n).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "bandit_oracles")]
fn bandit_oracles_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(py_exploit, m)?)?;
    m.add_function(wrap_pyfunction!(py_explore, m)?)?;
    m.add_function(wrap_pyfunction!(py_tasks, m)?)?;
    m.add_function(wrap_pyfunction!(py_curve, m)?)?;
    m.add_function(wrap_pyfunction!(py_report, m)?)?;
    m.add_function(wrap_pyfunction!(py_room_reward, m)?)?;
    m.add_function(wrap_pyfunction!(py_ucb1, m)?)?;
    m.add_function(wrap_pyfunction!(py_ci95, m)?)?;
    Ok(())
}
