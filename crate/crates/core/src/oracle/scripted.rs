use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::prompts::RenderedPrompt;
use crate::stochastics::RngStream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScriptedPolicy {
    /// Answers with the lowest-index member of the correct-answer set.
    PerfectArgmax,
    UniformRandom,
    FixedLabel { label: String },
    /// Explore replies: the first K lines for an all-at-once prompt, line
    /// `p` for a one-by-one prompt showing `p` previous candidates.
    CannedLines { lines: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedOracle {
    pub policy: ScriptedPolicy,
}

fn tagged(label: &str) -> String {
    format!("<Answer>{label}</Answer>")
}

impl ScriptedOracle {
    pub fn new(policy: ScriptedPolicy) -> Self {
        ScriptedOracle { policy }
    }

    /// Produces a reply to `prompt`. `correct` is the correct-answer set of
    /// an exploit task (ignored for explore prompts).
    pub fn respond(&self, prompt: &RenderedPrompt, correct: &[usize], rng: &mut RngStream) -> Result<String, OracleError> {
        match &self.policy {
            ScriptedPolicy::PerfectArgmax => {
                let best = correct
                    .iter()
                    .min()
                    .ok_or_else(|| OracleError::ScriptExhausted("empty correct-answer set".into()))?;
                let label = prompt
                    .answer_labels
                    .get(*best)
                    .ok_or_else(|| OracleError::ScriptExhausted(format!("no label for arm {best}")))?;
                Ok(tagged(label))
            }
            ScriptedPolicy::UniformRandom => {
                if prompt.answer_labels.is_empty() {
                    return Err(OracleError::ScriptExhausted("prompt has no answer labels".into()));
                }
                Ok(tagged(&prompt.answer_labels[rng.index(prompt.answer_labels.len())]))
            }
            ScriptedPolicy::FixedLabel { label } => Ok(tagged(label)),
            ScriptedPolicy::CannedLines { lines } => match (prompt.expected_count, prompt.prior_count) {
                (Some(_), Some(p)) => lines
                    .get(p)
                    .cloned()
                    .ok_or_else(|| OracleError::ScriptExhausted(format!("no canned line {p} of {}", lines.len()))),
                (Some(k), None) => {
                    if k > lines.len() {
                        return Err(OracleError::ScriptExhausted(format!(
                            "{k} lines requested, {} scripted",
                            lines.len()
                        )));
                    }
                    Ok(lines[..k].join("\n"))
                }
                (None, _) => Ok(lines.join("\n")),
            },
        }
    }
}
