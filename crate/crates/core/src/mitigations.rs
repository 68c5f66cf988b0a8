//! History summarization rules that shrink what an exploit prompt shows.
//!
//! Each rule returns a [`SummarizedHistory`] that is rendered exactly like a
//! raw history, so the oracle cannot tell which rule produced it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{CbHistory, Context, Metric, SummarizedHistory, SummarySource, SummaryTuple};
use crate::kmeans::{kmodes, lloyd_kmeans};
use crate::stochastics::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mitigation {
    None,
    KNearest { k: usize },
    KMeans { k: usize },
    KMeansNearest { k: usize, k_prime: usize },
}

impl Mitigation {
    pub fn tag(&self) -> &'static str {
        match self {
            Mitigation::None => SummarySource::Full.as_str(),
            Mitigation::KNearest { .. } => SummarySource::KNearest.as_str(),
            Mitigation::KMeans { .. } => SummarySource::KMeans.as_str(),
            Mitigation::KMeansNearest { .. } => SummarySource::KMeansNearest.as_str(),
        }
    }

    pub fn k(&self) -> Option<usize> {
        match *self {
            Mitigation::None => None,
            Mitigation::KNearest { k } | Mitigation::KMeans { k } | Mitigation::KMeansNearest { k, .. } => Some(k),
        }
    }

    pub fn k_prime(&self) -> Option<usize> {
        match *self {
            Mitigation::KMeansNearest { k_prime, .. } => Some(k_prime),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Mitigation::None => Ok(()),
            Mitigation::KNearest { k } | Mitigation::KMeans { k } if k == 0 => {
                Err(Error::param("k must be at least 1"))
            }
            Mitigation::KMeansNearest { k, k_prime } if k_prime == 0 || k_prime >= k => Err(
                Error::param(format!("k' must satisfy 1 <= k' < k (k = {k}, k' = {k_prime})")),
            ),
            _ => Ok(()),
        }
    }

    pub fn apply(&self, history: &CbHistory, query: &Context, rng: &mut RngStream) -> Result<SummarizedHistory> {
        self.validate()?;
        match *self {
            Mitigation::None => {
                if history.is_empty() {
                    return Err(Error::EmptyHistory);
                }
                Ok(SummarizedHistory::full(history))
            }
            Mitigation::KNearest { k } => k_nearest(history, query, k, Metric::for_context(query)),
            Mitigation::KMeans { k } => k_means_summarize(history, k, rng),
            Mitigation::KMeansNearest { k, k_prime } => k_means_then_nearest(history, query, k, k_prime, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum ContextKey {
    Numeric(Vec<u64>),
    Room([usize; 6]),
}

fn key_of(ctx: &Context) -> ContextKey {
    match ctx {
        // +0.0 and -0.0 compare equal, so normalize before taking bits
        Context::Numeric(v) => ContextKey::Numeric(v.iter().map(|x| (x + 0.0).to_bits()).collect()),
        Context::Room(r) => ContextKey::Room(r.codes()),
    }
}

/// Rounds whose context is among the `k` distinct contexts nearest to
/// `query`, in original round order. Distance ties go to the context that
/// appeared first.
pub fn k_nearest(history: &CbHistory, query: &Context, k: usize, metric: Metric) -> Result<SummarizedHistory> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    let mut first_seen: HashMap<ContextKey, usize> = HashMap::new();
    let mut distinct: Vec<(ContextKey, f64)> = Vec::new();
    for ctx in &history.contexts {
        let key = key_of(ctx);
        if !first_seen.contains_key(&key) {
            first_seen.insert(key.clone(), distinct.len());
            distinct.push((key, metric.distance(ctx, query)?));
        }
    }
    let mut order: Vec<usize> = (0..distinct.len()).collect();
    order.sort_by(|&a, &b| distinct[a].1.total_cmp(&distinct[b].1));
    let selected: std::collections::HashSet<&ContextKey> =
        order.iter().take(k).map(|&i| &distinct[i].0).collect();

    let tuples = history
        .contexts
        .iter()
        .zip(&history.rewards)
        .filter(|(c, _)| selected.contains(&key_of(c)))
        .map(|(c, r)| SummaryTuple {
            context: c.clone(),
            rewards: r.clone(),
        })
        .collect();
    Ok(SummarizedHistory {
        tuples,
        source: SummarySource::KNearest,
        k,
        k_prime: None,
    })
}

/// One tuple per non-empty cluster: the centroid context and each arm's
/// average reward over the cluster's rounds.
pub fn k_means_summarize(history: &CbHistory, k: usize, rng: &mut RngStream) -> Result<SummarizedHistory> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let (centroids, assignment): (Vec<Context>, Vec<usize>) = match &history.contexts[0] {
        Context::Numeric(_) => {
            let points = history
                .contexts
                .iter()
                .map(|c| c.as_numeric().map(<[f64]>::to_vec))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::param("mixed context kinds in history"))?;
            let c = lloyd_kmeans(&points, k, rng)?;
            (c.centroids.into_iter().map(Context::Numeric).collect(), c.assignment)
        }
        Context::Room(_) => {
            let points = history
                .contexts
                .iter()
                .map(|c| c.as_room().copied())
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::param("mixed context kinds in history"))?;
            let c = kmodes(&points, k, rng)?;
            (c.centroids.into_iter().map(Context::Room).collect(), c.assignment)
        }
    };
    let arms = history.num_arms();
    let mut sums = vec![vec![0.0; arms]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (row, &a) in history.rewards.iter().zip(&assignment) {
        counts[a] += 1;
        for (s, r) in sums[a].iter_mut().zip(row) {
            *s += r;
        }
    }
    let tuples = centroids
        .into_iter()
        .zip(sums)
        .zip(counts)
        .map(|((context, s), n)| SummaryTuple {
            context,
            rewards: s.into_iter().map(|x| x / n as f64).collect(),
        })
        .collect();
    Ok(SummarizedHistory {
        tuples,
        source: SummarySource::KMeans,
        k,
        k_prime: None,
    })
}

/// The k-means summary restricted to the `k_prime` centroids nearest to
/// `query`, kept in summary order.
pub fn k_means_then_nearest(
    history: &CbHistory,
    query: &Context,
    k: usize,
    k_prime: usize,
    rng: &mut RngStream,
) -> Result<SummarizedHistory> {
    if k_prime == 0 || k_prime >= k {
        return Err(Error::param(format!("k' must satisfy 1 <= k' < k (k = {k}, k' = {k_prime})")));
    }
    let summary = k_means_summarize(history, k, rng)?;
    let metric = Metric::for_context(query);
    let dists = summary
        .tuples
        .iter()
        .map(|t| metric.distance(&t.context, query))
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..dists.len()).collect();
    order.sort_by(|&a, &b| dists[a].total_cmp(&dists[b]));
    let mut keep = vec![false; dists.len()];
    for &i in order.iter().take(k_prime) {
        keep[i] = true;
    }
    let tuples = summary
        .tuples
        .into_iter()
        .zip(keep)
        .filter_map(|(t, k)| k.then_some(t))
        .collect();
    Ok(SummarizedHistory {
        tuples,
        source: SummarySource::KMeansNearest,
        k,
        k_prime: Some(k_prime),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric(points: &[&[f64]], rewards: &[&[f64]]) -> CbHistory {
        CbHistory::new(
            points.iter().map(|p| Context::Numeric(p.to_vec())).collect(),
            rewards.iter().map(|r| r.to_vec()).collect(),
        )
        .unwrap()
    }

    fn rng() -> RngStream {
        RngStream::new(1, &[])
    }

    #[test]
    fn k_nearest_saturates() {
        let h = numeric(&[&[0.0], &[1.0], &[0.0], &[2.0]], &[&[1.0], &[0.0], &[1.0], &[0.5]]);
        let s = k_nearest(&h, &Context::Numeric(vec![0.4]), 3, Metric::Euclidean).unwrap();
        assert_eq!(s.as_history(), h);
        let s = k_nearest(&h, &Context::Numeric(vec![0.4]), 10, Metric::Euclidean).unwrap();
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn k_nearest_exact_match_wins() {
        let h = numeric(&[&[0.0], &[1.0], &[0.0], &[2.0]], &[&[1.0], &[0.0], &[0.0], &[0.5]]);
        let s = k_nearest(&h, &Context::Numeric(vec![0.0]), 1, Metric::Euclidean).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.tuples.iter().all(|t| t.context == Context::Numeric(vec![0.0])));
        assert_eq!(s.tuples[0].rewards, vec![1.0]);
        assert_eq!(s.tuples[1].rewards, vec![0.0]);
    }

    #[test]
    fn k_nearest_tie_prefers_first_seen() {
        let h = numeric(&[&[2.0], &[0.0], &[1.0]], &[&[0.0], &[1.0], &[2.0]]);
        // 0.0 and 2.0 are both at distance 1 from the query
        let s = k_nearest(&h, &Context::Numeric(vec![1.0]), 2, Metric::Euclidean).unwrap();
        let ctxs: Vec<_> = s.tuples.iter().map(|t| t.context.clone()).collect();
        assert_eq!(ctxs, vec![Context::Numeric(vec![2.0]), Context::Numeric(vec![1.0])]);
    }

    #[test]
    fn k_nearest_errors() {
        let empty = CbHistory::new(vec![], vec![]).unwrap();
        assert!(matches!(
            k_nearest(&empty, &Context::Numeric(vec![0.0]), 1, Metric::Euclidean),
            Err(Error::EmptyHistory)
        ));
        let h = numeric(&[&[0.0]], &[&[1.0]]);
        assert!(k_nearest(&h, &Context::Numeric(vec![0.0]), 1, Metric::Hamming).is_err());
    }

    #[test]
    fn k_means_single_cluster() {
        let h = numeric(&[&[0.0, 2.0], &[2.0, 0.0]], &[&[1.0, 0.0], &[0.0, 0.5]]);
        let s = k_means_summarize(&h, 1, &mut rng()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.tuples[0].context, Context::Numeric(vec![1.0, 1.0]));
        assert_eq!(s.tuples[0].rewards, vec![0.5, 0.25]);
    }

    #[test]
    fn hybrid_drops_far_centroid() {
        let mut points: Vec<Vec<f64>> = Vec::new();
        let mut rewards = Vec::new();
        for (cx, r) in [(0.0, 1.0), (1.0, 2.0), (50.0, 3.0)] {
            for j in 0..5 {
                points.push(vec![cx + 0.01 * j as f64]);
                rewards.push(vec![r]);
            }
        }
        let h = CbHistory::new(points.into_iter().map(Context::Numeric).collect(), rewards).unwrap();
        let q = Context::Numeric(vec![0.5]);
        let full = k_means_summarize(&h, 3, &mut rng()).unwrap();
        assert_eq!(full.len(), 3);
        let near = k_means_then_nearest(&h, &q, 3, 2, &mut rng()).unwrap();
        assert_eq!(near.len(), 2);
        assert!(near.tuples.iter().all(|t| full.tuples.contains(t)));
        assert!(near.tuples.iter().all(|t| t.rewards[0] != 3.0));
        let one = k_means_then_nearest(&h, &Context::Numeric(vec![49.0]), 2, 1, &mut rng()).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.k_prime, Some(1));
    }

    #[test]
    fn hybrid_requires_smaller_k_prime() {
        let h = numeric(&[&[0.0], &[1.0]], &[&[1.0], &[0.0]]);
        let q = Context::Numeric(vec![0.0]);
        assert!(k_means_then_nearest(&h, &q, 2, 2, &mut rng()).is_err());
        assert!(k_means_then_nearest(&h, &q, 2, 0, &mut rng()).is_err());
    }

    #[test]
    fn mitigation_config_json() {
        let m: Mitigation = serde_json::from_str(r#"{"kind":"k_means_nearest","k":10,"k_prime":3}"#).unwrap();
        assert_eq!(m, Mitigation::KMeansNearest { k: 10, k_prime: 3 });
        assert_eq!(m.tag(), "k_means_nearest");
        assert!(serde_json::from_str::<Mitigation>(r#"{"kind":"k_means","k":3,"extra":1}"#).is_err());
    }
}
