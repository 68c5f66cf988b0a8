use std::cmp::Ordering;

/// Indices attaining the maximum value; exact ties are all included.
pub fn argmax_set(values: &[f64]) -> Vec<usize> {
    let Some(best) = values.iter().copied().fold(None, |acc: Option<f64>, v| match acc {
        Some(a) if a >= v => Some(a),
        _ => Some(v),
    }) else {
        return Vec::new();
    };
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == best)
        .map(|(i, _)| i)
        .collect()
}

/// Largest minus second-largest value. Zero for fewer than two values.
pub fn top_two_gap(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in values {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    first - second
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn total_cmp(a: &f64, b: &f64) -> Ordering {
    a.total_cmp(b)
}

/// Formats a number rounded to three decimals with trailing zeros removed,
/// so `0.3` renders as `0.3`, `1.0` as `1` and `0.12345` as `0.123`.
pub fn fmt_num(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

/// `a`, `a or b`, `a, b, or c`.
pub fn or_list(items: &[String]) -> String {
    match items.len() {
        0 => String::new(),
        1 => items[0].clone(),
        2 => format!("{} or {}", items[0], items[1]),
        n => format!("{}, or {}", items[..n - 1].join(", "), items[n - 1]),
    }
}
