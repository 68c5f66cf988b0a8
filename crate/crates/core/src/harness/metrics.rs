use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RunRecord;
use crate::error::{Error, Result};
use crate::explore::{arm_histogram, ExploreTaskResult};

pub const Z95: f64 = 1.96;

/// Wilson score interval for `successes` out of `n`.
pub fn ci95(successes: usize, n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::param("confidence interval of zero trials"));
    }
    if successes > n {
        return Err(Error::param(format!("{successes} successes out of {n}")));
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let low = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let high = if successes == n { 1.0 } else { (center + half).clamp(p, 1.0) };
    Ok((low, high))
}

/// Mean with a normal-approximation 95% band (sample standard deviation).
pub fn normal_band(values: &[f64]) -> Result<(f64, f64, f64)> {
    if values.is_empty() {
        return Err(Error::param("band of an empty sample"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, mean, mean));
    }
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let half = Z95 * (var / n).sqrt();
    Ok((mean, mean - half, mean + half))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epsilon: f64,
    pub frac: f64,
    pub n: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    pub series_label: String,
}

/// Sorted distinct difficulties of the records.
pub fn observed_thresholds(records: &[RunRecord]) -> Vec<f64> {
    let mut gaps: Vec<f64> = records.iter().map(|r| r.gap).collect();
    gaps.sort_by(f64::total_cmp);
    gaps.dedup();
    gaps
}

/// FracCorrect over records with difficulty at most each threshold.
/// Thresholds are visited in ascending order; thresholds no record falls
/// under are omitted.
pub fn frac_correct_curve(records: &[RunRecord], thresholds: &[f64], label: &str) -> Result<Vec<CurvePoint>> {
    if thresholds.is_empty() {
        return Err(Error::param("no thresholds"));
    }
    if let Some(first) = records.first() {
        let same = |r: &RunRecord| (&r.kind, r.num_arms, r.d, r.horizon) == (&first.kind, first.num_arms, first.d, first.horizon);
        if !records.iter().all(same) {
            return Err(Error::param("records mix puzzle kinds or sizes"));
        }
    }
    let mut eps: Vec<f64> = thresholds.to_vec();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let mut sorted: Vec<(f64, bool)> = records.iter().map(|r| (r.gap, r.correct)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut points = Vec::new();
    let (mut i, mut n, mut hits) = (0, 0usize, 0usize);
    for e in eps {
        while i < sorted.len() && sorted[i].0 <= e {
            n += 1;
            hits += usize::from(sorted[i].1);
            i += 1;
        }
        if n == 0 {
            continue;
        }
        let (ci_low, ci_high) = ci95(hits, n)?;
        points.push(CurvePoint {
            epsilon: e,
            frac: hits as f64 / n as f64,
            n,
            ci_low,
            ci_high,
            series_label: label.to_string(),
        });
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploreRow {
    pub workload: String,
    pub strategy: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub rbar: f64,
    pub band_low: f64,
    pub band_high: f64,
    pub n_runs: usize,
    /// Task id for Q/A, category for arXiv, `all` for the pooled cell.
    pub group: String,
}

type CellKey = (String, String, String, usize);

fn group_results(results: &[ExploreTaskResult]) -> BTreeMap<CellKey, Vec<&ExploreTaskResult>> {
    let mut cells: BTreeMap<CellKey, Vec<&ExploreTaskResult>> = BTreeMap::new();
    for r in results {
        let group = match &r.category {
            Some(c) => c.clone(),
            None => r.task_id.clone(),
        };
        for g in [group, "all".to_string()] {
            cells
                .entry((r.workload.as_str().to_string(), g, r.strategy.as_str().to_string(), r.k))
                .or_default()
                .push(r);
        }
    }
    cells
}

/// r̄ew per (group, strategy, K) with normal bands over the pooled runs of
/// the group's tasks. Every task also contributes to the `all` group.
pub fn explore_summary(results: &[ExploreTaskResult]) -> Result<Vec<ExploreRow>> {
    if results.is_empty() {
        return Err(Error::param("no explore results"));
    }
    group_results(results)
        .into_iter()
        .map(|((workload, group, strategy, k), cell)| {
            let rews: Vec<f64> = cell.iter().flat_map(|r| r.rews()).collect();
            let (rbar, band_low, band_high) = normal_band(&rews)?;
            Ok(ExploreRow {
                workload,
                strategy,
                k,
                rbar,
                band_low,
                band_high,
                n_runs: rews.len(),
                group,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub workload: String,
    pub group: String,
    pub strategy: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub rank: usize,
    pub mean: f64,
}

/// Arm histograms per (group, strategy, K) over the pooled runs.
pub fn explore_histograms(results: &[ExploreTaskResult]) -> Result<Vec<HistogramRow>> {
    let mut rows = Vec::new();
    for ((workload, group, strategy, k), cell) in group_results(results) {
        let runs: Vec<Vec<f64>> = cell.iter().flat_map(|r| r.runs.iter().map(|x| x.means.clone())).collect();
        for (rank, mean) in arm_histogram(&runs, k)?.into_iter().enumerate() {
            rows.push(HistogramRow {
                workload: workload.clone(),
                group: group.clone(),
                strategy: strategy.clone(),
                k,
                rank: rank + 1,
                mean,
            });
        }
    }
    Ok(rows)
}
