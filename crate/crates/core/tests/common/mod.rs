//! Brute-force recomputations used by `metric_oracles` and `acceptance`.
//! Nothing here calls the library's own metric code.

#![allow(dead_code)]

use bandit_oracles::cb::linear::{effective_gap, generate_linear_cb_task, LinearCbParams};
use bandit_oracles::explore::arm_histogram;
use bandit_oracles::harness::{frac_correct_curve, RunRecord};
use bandit_oracles::mab::{empirical_gap, generate_mab_task, MabParams};
use bandit_oracles::RngStream;

pub const FIXTURES: u64 = 100;
const TOL: f64 = 1e-12;

pub fn wilson(successes: usize, n: usize) -> (f64, f64) {
    let z = 1.96_f64;
    let n = n as f64;
    let phat = successes as f64 / n;
    let a = phat + z * z / (2.0 * n);
    let b = z * ((phat * (1.0 - phat) + z * z / (4.0 * n)) / n).sqrt();
    let c = 1.0 + z * z / n;
    ((a - b) / c, (a + b) / c)
}

/// Largest minus second largest, by sorting a copy.
fn sorted_gap(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if v.len() < 2 {
        0.0
    } else {
        v[0] - v[1]
    }
}

pub fn check_empirical_gap() -> Result<(), String> {
    for i in 0..FIXTURES {
        let mut rng = RngStream::new(1000 + i, &[]);
        let k = 2 + rng.index(9);
        let t = 1 + rng.index(200);
        let gap = [0.0, 0.05, 0.2, 0.5][rng.index(4)];
        let task = generate_mab_task(MabParams::new(k, gap, t), &mut rng).map_err(|e| e.to_string())?;
        let mut sums = vec![0u64; k];
        for row in &task.rewards {
            for a in 0..k {
                sums[a] += u64::from(row[a]);
            }
        }
        let means: Vec<f64> = sums.iter().map(|&s| s as f64 / t as f64).collect();
        let expected = sorted_gap(&means);
        let got = empirical_gap(&task);
        if (expected - got).abs() > TOL {
            return Err(format!("fixture {i}: empirical_gap {got} vs brute force {expected}"));
        }
    }
    Ok(())
}

pub fn check_effective_gap() -> Result<(), String> {
    for i in 0..FIXTURES {
        let mut rng = RngStream::new(2000 + i, &[]);
        let k = 2 + rng.index(6);
        let d = 1 + rng.index(6);
        let task = generate_linear_cb_task(LinearCbParams::new(k, d, 5), &mut rng).map_err(|e| e.to_string())?;
        let mut means = Vec::new();
        for a in 0..k {
            let mut m = task.intercepts[a];
            for j in 0..d {
                m += task.weights[a][j] * task.query[j];
            }
            means.push(m);
        }
        let expected = sorted_gap(&means);
        let got = effective_gap(&task);
        if (expected - got).abs() > 1e-9 {
            return Err(format!("fixture {i}: effective_gap {got} vs brute force {expected}"));
        }
    }
    Ok(())
}

fn record(gap: f64, correct: bool) -> RunRecord {
    RunRecord {
        task_id: String::new(),
        kind: "mab".into(),
        num_arms: 5,
        d: None,
        horizon: 50,
        delta: Some(0.0),
        gap,
        mitigation: "full".into(),
        k: None,
        k_prime: None,
        policy: "fixture".into(),
        chosen: Some(0),
        correct,
        invalid: false,
        attempts: 1,
        latency_ms: 0,
        error: None,
    }
}

pub fn check_frac_correct_curve() -> Result<(), String> {
    for i in 0..FIXTURES {
        let mut rng = RngStream::new(3000 + i, &[]);
        let n = 1 + rng.index(80);
        // coarse gaps so ties and repeated thresholds occur
        let records: Vec<RunRecord> = (0..n)
            .map(|_| record(rng.index(11) as f64 / 20.0, rng.unit() < 0.6))
            .collect();
        let thresholds: Vec<f64> = (0..1 + rng.index(8)).map(|_| rng.index(13) as f64 / 20.0 - 0.05).collect();
        let curve = frac_correct_curve(&records, &thresholds, "fixture").map_err(|e| e.to_string())?;

        let mut eps = thresholds.clone();
        eps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        eps.dedup();
        let mut expected = Vec::new();
        for e in eps {
            let members: Vec<&RunRecord> = records.iter().filter(|r| r.gap <= e).collect();
            if members.is_empty() {
                continue;
            }
            let hits = members.iter().filter(|r| r.correct).count();
            expected.push((e, hits, members.len()));
        }
        if curve.len() != expected.len() {
            return Err(format!("fixture {i}: {} points vs {} expected", curve.len(), expected.len()));
        }
        for (p, &(e, hits, n)) in curve.iter().zip(&expected) {
            let frac = hits as f64 / n as f64;
            let (lo, hi) = wilson(hits, n);
            let lo = if hits == 0 { 0.0 } else { lo };
            let hi = if hits == n { 1.0 } else { hi };
            let ok = p.epsilon == e
                && p.n == n
                && (p.frac - frac).abs() < TOL
                && (p.ci_low - lo).abs() < 1e-9
                && (p.ci_high - hi).abs() < 1e-9;
            if !ok {
                return Err(format!("fixture {i}: point {p:?} vs eps={e} hits={hits} n={n} ci=({lo}, {hi})"));
            }
        }
    }
    Ok(())
}

pub fn check_arm_histogram() -> Result<(), String> {
    for i in 0..FIXTURES {
        let mut rng = RngStream::new(4000 + i, &[]);
        let k = 1 + rng.index(10);
        let runs: Vec<Vec<f64>> = (0..1 + rng.index(10))
            .map(|_| (0..k).map(|_| (rng.unit() * 10.0).floor() / 10.0).collect())
            .collect();
        let got = arm_histogram(&runs, k).map_err(|e| e.to_string())?;
        let mut expected = vec![0.0; k];
        for run in &runs {
            // repeatedly remove the maximum
            let mut left = run.clone();
            for slot in expected.iter_mut() {
                let (pos, &max) = left
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap();
                *slot += max / runs.len() as f64;
                left.remove(pos);
            }
        }
        for (r, (g, e)) in got.iter().zip(&expected).enumerate() {
            if (g - e).abs() > 1e-9 {
                return Err(format!("fixture {i}: rank {r} mean {g} vs brute force {e}"));
            }
        }
    }
    Ok(())
}
