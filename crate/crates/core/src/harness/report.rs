use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::exploit::RunRecord;
use super::io::{read_results_csv, write_atomic, write_curve_csv, write_explore_csv};
use super::metrics::{explore_summary, frac_correct_curve, observed_thresholds, CurvePoint, ExploreRow};
use crate::config::{ExploitConfig, Thresholds};
use crate::error::{Error, Result};
use crate::explore::{ExploreTaskResult, Strategy};

pub const REPORT_K: [usize; 3] = [1, 2, 5];

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub curves: Vec<CurvePoint>,
    pub explore: Vec<ExploreRow>,
    pub table: String,
}

impl Report {
    /// Writes `curve.csv`, `explore.csv` and `table.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let paths = [dir.join("curve.csv"), dir.join("explore.csv"), dir.join("table.txt")];
        write_curve_csv(&paths[0], &self.curves)?;
        write_explore_csv(&paths[1], &self.explore)?;
        write_atomic(&paths[2], self.table.as_bytes())?;
        Ok(paths.to_vec())
    }
}

fn load_exploit_run(dir: &Path) -> Result<Option<(ExploitConfig, Vec<RunRecord>)>> {
    let results = dir.join("results.csv");
    if !results.exists() {
        return Ok(None);
    }
    let config_path = dir.join("config.json");
    let text = fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
    let config: ExploitConfig = serde_json::from_str(&text)?;
    Ok(Some((config, read_results_csv(&results)?)))
}

fn load_explore_run(dir: &Path) -> Result<Vec<ExploreTaskResult>> {
    let sub = dir.join("explore");
    if !sub.is_dir() {
        return Ok(Vec::new());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(&sub)
        .map_err(|e| Error::io(&sub, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(&sub, err)))
        .collect::<Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|x| x == "json"));
    files.sort();
    files
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect()
}

/// Collects exploit curves and explore summaries from run directories.
pub fn build_report(run_dirs: &[PathBuf]) -> Result<Report> {
    let mut curves = Vec::new();
    let mut explore_results = Vec::new();
    for dir in run_dirs {
        if !dir.is_dir() {
            return Err(Error::Config(format!("{} is not a directory", dir.display())));
        }
        if let Some((config, records)) = load_exploit_run(dir)? {
            if !records.is_empty() {
                let thresholds = match &config.thresholds {
                    Thresholds::Observed => observed_thresholds(&records),
                    Thresholds::Fixed(t) => t.clone(),
                };
                curves.extend(frac_correct_curve(&records, &thresholds, &config.series_label())?);
            }
        }
        explore_results.extend(load_explore_run(dir)?);
    }
    if curves.is_empty() && explore_results.is_empty() {
        return Err(Error::Config("no results found in the given directories".into()));
    }
    let explore = if explore_results.is_empty() {
        Vec::new()
    } else {
        explore_summary(&explore_results)?
    };
    let table = render_explore_table(&explore, &REPORT_K);
    Ok(Report { curves, explore, table })
}

/// Plain-text r̄ew tables, one per (workload, group), with a column per K.
pub fn render_explore_table(rows: &[ExploreRow], ks: &[usize]) -> String {
    let mut blocks: BTreeMap<(&str, &str), BTreeMap<usize, BTreeMap<usize, &ExploreRow>>> = BTreeMap::new();
    for row in rows {
        let strategy = row.strategy.parse::<Strategy>().map(Strategy::index).unwrap_or(u64::MAX) as usize;
        blocks
            .entry((row.workload.as_str(), row.group.as_str()))
            .or_default()
            .entry(strategy)
            .or_default()
            .insert(row.k, row);
    }
    let mut out = String::new();
    for ((workload, group), strategies) in blocks {
        let _ = writeln!(out, "{workload} / {group}");
        let _ = write!(out, "{:<24}", "strategy");
        for k in ks {
            let _ = write!(out, "{:>18}", format!("K={k}"));
        }
        out.push('\n');
        for by_k in strategies.values() {
            let name = &by_k.values().next().map(|r| r.strategy.as_str()).unwrap_or("?");
            let _ = write!(out, "{name:<24}");
            for k in ks {
                let cell = match by_k.get(k) {
                    Some(r) => format!("{:.3} ± {:.3}", r.rbar, (r.band_high - r.band_low) / 2.0),
                    None => "-".to_string(),
                };
                let _ = write!(out, "{cell:>18}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
