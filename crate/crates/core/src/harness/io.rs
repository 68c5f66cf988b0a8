use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::exploit::{generate_tasks, RunRecord};
use super::metrics::{frac_correct_curve, observed_thresholds, CurvePoint, ExploreRow, HistogramRow};
use crate::config::{ExploitConfig, PuzzleConfig, Thresholds};
use crate::error::{Error, Result};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::param(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::param(format!("csv buffer: {e}")))?;
    write_atomic(path, &bytes)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(Error::from)
}

pub fn write_results_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    write_csv(path, records)
}

pub fn read_results_csv(path: &Path) -> Result<Vec<RunRecord>> {
    read_csv(path)
}

pub fn write_curve_csv(path: &Path, points: &[CurvePoint]) -> Result<()> {
    write_csv(path, points)
}

pub fn write_explore_csv(path: &Path, rows: &[ExploreRow]) -> Result<()> {
    write_csv(path, rows)
}

pub fn write_histogram_csv(path: &Path, rows: &[HistogramRow]) -> Result<()> {
    write_csv(path, rows)
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `config.json`, `results.csv` and `curve.csv` into `dir`.
pub fn write_exploit_outputs(dir: &Path, config: &ExploitConfig, records: &[RunRecord]) -> Result<Vec<PathBuf>> {
    let thresholds = match &config.thresholds {
        Thresholds::Observed => observed_thresholds(records),
        Thresholds::Fixed(t) => t.clone(),
    };
    let curve = if records.is_empty() {
        Vec::new()
    } else {
        frac_correct_curve(records, &thresholds, &config.series_label())?
    };
    let paths = [dir.join("config.json"), dir.join("results.csv"), dir.join("curve.csv")];
    write_atomic(&paths[0], &to_json(config)?)?;
    write_results_csv(&paths[1], records)?;
    write_curve_csv(&paths[2], &curve)?;
    Ok(paths.to_vec())
}

fn is_nonempty_dir(dir: &Path) -> Result<bool> {
    match fs::read_dir(dir) {
        Ok(mut entries) => Ok(entries.next().is_some()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(false),
        Err(e) => Err(Error::io(dir, e)),
    }
}

#[derive(Serialize)]
struct Fixture<'a> {
    id: &'a str,
    stream_path: &'a [u64],
    correct: Vec<usize>,
    difficulty: f64,
    task: &'a super::exploit::ExploitTask,
}

/// Writes one JSON file per generated task plus a `puzzle.json` manifest.
/// A non-empty `dir` is refused unless `force` is set.
pub fn write_fixtures(puzzle: &PuzzleConfig, seed: u64, dir: &Path, force: bool) -> Result<Vec<PathBuf>> {
    if !force && is_nonempty_dir(dir)? {
        return Err(Error::Config(format!("{} is not empty; pass --force to overwrite", dir.display())));
    }
    let tasks = generate_tasks(puzzle, seed)?;
    let manifest = serde_json::json!({ "seed": seed, "puzzle": puzzle, "tasks": tasks.len() });
    let mut paths = vec![dir.join("puzzle.json")];
    write_atomic(&paths[0], &to_json(&manifest)?)?;
    for inst in &tasks {
        let fixture = Fixture {
            id: &inst.id,
            stream_path: &inst.path,
            correct: inst.task.correct_answers(),
            difficulty: inst.task.difficulty(),
            task: &inst.task,
        };
        let path = dir.join(format!("{}.json", inst.id));
        write_atomic(&path, &to_json(&fixture)?)?;
        paths.push(path);
    }
    Ok(paths)
}
