//! Contextual bandit histories and the summarized form shown in prompts.

use serde::{Deserialize, Serialize};

use crate::cb::room::RoomContext;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Context {
    Numeric(Vec<f64>),
    Room(RoomContext),
}

impl Context {
    pub fn as_numeric(&self) -> Option<&[f64]> {
        match self {
            Context::Numeric(v) => Some(v),
            Context::Room(_) => None,
        }
    }

    pub fn as_room(&self) -> Option<&RoomContext> {
        match self {
            Context::Room(r) => Some(r),
            Context::Numeric(_) => None,
        }
    }

    /// Regression features: numeric contexts as-is, room contexts one-hot
    /// encoded with the first value of each attribute as the reference level.
    pub fn features(&self) -> Vec<f64> {
        match self {
            Context::Numeric(v) => v.clone(),
            Context::Room(r) => r.one_hot(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Hamming,
}

impl Metric {
    pub fn distance(self, a: &Context, b: &Context) -> Result<f64> {
        match (self, a, b) {
            (Metric::Euclidean, Context::Numeric(x), Context::Numeric(y)) => {
                if x.len() != y.len() {
                    return Err(Error::DimensionMismatch {
                        expected: x.len(),
                        got: y.len(),
                    });
                }
                Ok(crate::util::sq_dist(x, y).sqrt())
            }
            (Metric::Hamming, Context::Room(x), Context::Room(y)) => {
                Ok(crate::cb::room::hamming_distance(x, y) as f64)
            }
            _ => Err(Error::param("metric does not match the context kind")),
        }
    }

    /// Natural metric for a context kind.
    pub fn for_context(ctx: &Context) -> Metric {
        match ctx {
            Context::Numeric(_) => Metric::Euclidean,
            Context::Room(_) => Metric::Hamming,
        }
    }
}

/// A full-information contextual bandit history: one context per round and
/// the reward of every arm in that round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbHistory {
    pub contexts: Vec<Context>,
    /// `rewards[t][a]`.
    pub rewards: Vec<Vec<f64>>,
}

impl CbHistory {
    pub fn new(contexts: Vec<Context>, rewards: Vec<Vec<f64>>) -> Result<Self> {
        if contexts.len() != rewards.len() {
            return Err(Error::param(format!(
                "{} contexts but {} reward rows",
                contexts.len(),
                rewards.len()
            )));
        }
        if let Some(first) = rewards.first() {
            if rewards.iter().any(|r| r.len() != first.len()) {
                return Err(Error::param("ragged reward rows"));
            }
        }
        Ok(Self { contexts, rewards })
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn num_arms(&self) -> usize {
        self.rewards.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummarySource {
    Full,
    KNearest,
    KMeans,
    KMeansNearest,
}

impl SummarySource {
    pub fn as_str(self) -> &'static str {
        match self {
            SummarySource::Full => "full",
            SummarySource::KNearest => "k_nearest",
            SummarySource::KMeans => "k_means",
            SummarySource::KMeansNearest => "k_means_nearest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTuple {
    pub context: Context,
    pub rewards: Vec<f64>,
}

/// The context/reward tuples actually shown to an oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarizedHistory {
    pub tuples: Vec<SummaryTuple>,
    pub source: SummarySource,
    pub k: usize,
    pub k_prime: Option<usize>,
}

impl SummarizedHistory {
    /// Identity summary: every round, in order.
    pub fn full(history: &CbHistory) -> Self {
        Self {
            tuples: history
                .contexts
                .iter()
                .zip(&history.rewards)
                .map(|(c, r)| SummaryTuple {
                    context: c.clone(),
                    rewards: r.clone(),
                })
                .collect(),
            source: SummarySource::Full,
            k: history.len(),
            k_prime: None,
        }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn num_arms(&self) -> usize {
        self.tuples.first().map_or(0, |t| t.rewards.len())
    }

    /// View the tuples as a history so the baselines can fit on exactly
    /// what a prompt would show.
    pub fn as_history(&self) -> CbHistory {
        CbHistory {
            contexts: self.tuples.iter().map(|t| t.context.clone()).collect(),
            rewards: self.tuples.iter().map(|t| t.rewards.clone()).collect(),
        }
    }
}
