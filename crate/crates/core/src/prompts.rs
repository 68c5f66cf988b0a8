//! Prompt templates for exploit and explore tasks, and parsers for the
//! replies.
//!
//! Rendering is a pure function of its inputs. Exploit prompts ask for the
//! answer inside `<Answer>` tags; explore prompts ask for one candidate per
//! line.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::cb::room::{RoomAction, RoomContext};
use crate::error::{Error, Result};
use crate::history::{Context, SummarizedHistory};
use crate::mab::MabTask;
use crate::util::{fmt_num, or_list};

pub const BUTTON_COLORS: [&str; 10] = [
    "blue", "green", "red", "yellow", "purple", "orange", "black", "white", "pink", "brown",
];

pub const ENCOURAGEMENT_ANSWERS: &str =
    "Try to come up with answers that are very different in spirit from one another.";
pub const ENCOURAGEMENT_TITLES: &str =
    "Try to come up with titles that are very different in spirit from one another.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
    /// Valid answers of an exploit prompt, in arm order.
    pub answer_labels: Vec<String>,
    /// Number of candidates requested by an explore prompt.
    pub expected_count: Option<usize>,
    /// Number of previous candidates shown by a one-by-one explore prompt.
    pub prior_count: Option<usize>,
}

impl RenderedPrompt {
    /// Follow-up used once when a reply has no recognizable answer.
    pub fn reminder(&self) -> String {
        format!("You must answer with one of: {}.", self.answer_labels.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MabStyle {
    Buttons,
    Adverts,
}

pub fn button_labels(num_arms: usize) -> Result<Vec<String>> {
    if num_arms == 0 || num_arms > BUTTON_COLORS.len() {
        return Err(Error::param(format!(
            "button prompts support 1..={} arms, got {num_arms}",
            BUTTON_COLORS.len()
        )));
    }
    Ok(BUTTON_COLORS[..num_arms].iter().map(|s| s.to_string()).collect())
}

pub fn advert_labels(num_arms: usize) -> Result<Vec<String>> {
    if num_arms == 0 || num_arms > 26 {
        return Err(Error::param(format!("advert prompts support 1..=26 arms, got {num_arms}")));
    }
    Ok((0..num_arms)
        .map(|i| char::from(b'A' + i as u8).to_string())
        .collect())
}

fn mab_instruction(placeholder: &str, choices: &str, cot: bool) -> String {
    if cot {
        format!(
            "Think step by step, then provide your final answer within the tags <Answer> {placeholder} <Answer> where {placeholder} is one of {choices}."
        )
    } else {
        format!(
            "You must provide your final answer immediately within the tags <Answer> {placeholder} <Answer> where {placeholder} is one of {choices} and with no text explanation."
        )
    }
}

fn reminder_tail(question: &str, placeholder: &str, choices: &str, cot: bool) -> String {
    if cot {
        format!(
            "{question} Remember, think step by step, then provide your final answer within the tags <Answer> {placeholder} <Answer> where {placeholder} is one of {choices}."
        )
    } else {
        format!(
            "{question} Remember, YOU MUST provide your final answer within the tags <Answer> {placeholder} <Answer> where {placeholder} is one of {choices} and with no text explanation."
        )
    }
}

/// Renders a MAB exploit task with the default label set for `style`.
pub fn render_mab_prompt(task: &MabTask, style: MabStyle, cot: bool) -> Result<RenderedPrompt> {
    let labels = match style {
        MabStyle::Buttons => button_labels(task.num_arms())?,
        MabStyle::Adverts => advert_labels(task.num_arms())?,
    };
    render_mab_prompt_with_labels(task, style, cot, &labels)
}

pub fn render_mab_prompt_with_labels(
    task: &MabTask,
    style: MabStyle,
    cot: bool,
    labels: &[String],
) -> Result<RenderedPrompt> {
    if task.rewards.is_empty() {
        return Err(Error::EmptyHistory);
    }
    if labels.len() != task.num_arms() {
        return Err(Error::param(format!(
            "{} labels for {} arms",
            labels.len(),
            task.num_arms()
        )));
    }
    let k = labels.len();
    let choices = or_list(labels);
    let (system, intro, question, placeholder) = match style {
        MabStyle::Buttons => {
            let system = format!(
                "You are in a room with {k} buttons labeled {}. Each button is associated with a Bernoulli distribution with a fixed but unknown mean; the means for the buttons could be different. For each button, when you press it, you will get a reward that is sampled from the button's associated distribution. Then you must pick the button with the highest empirical average, which must be exactly one of {choices}. {}",
                labels.join(", "),
                mab_instruction("COLOR", &choices, cot),
            );
            (system, "The past rewards for each button are:", "Which button do you choose?", "COLOR")
        }
        MabStyle::Adverts => {
            let instruction = if cot {
                mab_instruction("ADVERTISEMENT", &choices, true)
            } else {
                format!(
                    "You must provide your final answer immediately and with no text explanation. within the tags <Answer> ADVERTISEMENT <Answer> where ADVERTISEMENT is one of {choices}."
                )
            };
            let system = format!(
                "You are recommendation engine that chooses advertisements to display to users when they visit your webpage. There are {k} advertisements you can choose from, named {}. When a user visits the webpage you can choose an advertisement to display and you will observe whether the user would have clicked each of the ads. You model this by assuming that each advertisement has a certain click rate and users click on advertisements with their corresponding rates. I will show you the past clicks for each advertisement. Then you must pick the advertisement with the highest empirical click rate, which must be exactly one of {choices}. {instruction}",
                labels.join(", "),
            );
            (
                system,
                "The past clicks for each advertisement are:",
                "Which advertisement do you choose?",
                "ADVERTISEMENT",
            )
        }
    };

    let mut paragraphs = vec![intro.to_string()];
    for (t, row) in task.rewards.iter().enumerate() {
        let cells: Vec<String> = labels
            .iter()
            .zip(row)
            .map(|(label, &r)| match style {
                MabStyle::Buttons => format!("{label} button had reward {r}"),
                MabStyle::Adverts => {
                    let verb = if r == 1 { "was clicked" } else { "was not clicked" };
                    format!("advertisement {label} {verb}")
                }
            })
            .collect();
        paragraphs.push(format!("round {}: {}", t + 1, cells.join(", ")));
    }
    paragraphs.push(reminder_tail(question, placeholder, &choices, cot));

    Ok(RenderedPrompt {
        system,
        user: paragraphs.join("\n\n"),
        answer_labels: labels.to_vec(),
        expected_count: None,
        prior_count: None,
    })
}

fn fmt_vector(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(", "))
}

/// Renders a contextual history, dispatching on the context kind.
pub fn render_cb_prompt(summary: &SummarizedHistory, query: &Context, cot: bool) -> Result<RenderedPrompt> {
    match query {
        Context::Numeric(q) => render_numeric_cb_prompt(summary, q, cot),
        Context::Room(q) => render_room_prompt(summary, q, cot),
    }
}

fn render_numeric_cb_prompt(summary: &SummarizedHistory, query: &[f64], cot: bool) -> Result<RenderedPrompt> {
    if summary.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let labels = button_labels(summary.num_arms())?;
    let k = labels.len();
    let choices = or_list(&labels);
    let closing = if cot {
        format!(
            "Think step by step, then provide your final answer within the tags <Answer> COLOR </Answer> where COLOR is one of {choices}."
        )
    } else {
        format!(
            "You must provide your final answer immediately within the tags <Answer> COLOR </Answer> where COLOR is one of {choices} and with no text explanation."
        )
    };
    let system = format!(
        "You are in a room with a television and {k} buttons labeled {}. Each button is associated with a Bernoulli distribution with an unknown mean; the means for the buttons could be different from each other and may depend on the list of numbers shown on the screen (i.e. the context). For each button, when you press it, you will get a reward that is sampled from the button's associated distribution, conditioned on the numbers shown on the television screen. I will show you the past numbers shown on the screen and the corresponding rewards for each button. A new list of numbers will then appear on the screen and you must pick the next button in order to maximize your reward in this round only, which must be exactly one of {choices}. {closing}",
        labels.join(", "),
    );

    let mut paragraphs = vec!["The past contexts and rewards for each button are:".to_string()];
    for (t, tuple) in summary.tuples.iter().enumerate() {
        let ctx = tuple
            .context
            .as_numeric()
            .ok_or_else(|| Error::param("room context in a numeric history"))?;
        if ctx.len() != query.len() {
            return Err(Error::DimensionMismatch {
                expected: query.len(),
                got: ctx.len(),
            });
        }
        let cells: Vec<String> = labels
            .iter()
            .zip(&tuple.rewards)
            .map(|(label, r)| format!("the {label} button had reward {}", fmt_num(*r)))
            .collect();
        let mut cells = cells.join(", ");
        // sentence-initial capital, as in "The blue button had reward 1"
        cells.replace_range(0..1, "T");
        paragraphs.push(format!("In round {}, the context was {}. {cells}", t + 1, fmt_vector(ctx)));
    }
    paragraphs.push(format!(
        "In round {}, the context is {}.",
        summary.len() + 1,
        fmt_vector(query)
    ));
    paragraphs.push(reminder_tail("Which button do you choose?", "COLOR", &choices, cot));

    Ok(RenderedPrompt {
        system,
        user: paragraphs.join("\n\n"),
        answer_labels: labels,
        expected_count: None,
        prior_count: None,
    })
}

fn quoted_actions() -> Vec<String> {
    RoomAction::ALL.iter().map(|a| format!("\"{}\"", a.label())).collect()
}

pub fn render_room_prompt(summary: &SummarizedHistory, query: &RoomContext, cot: bool) -> Result<RenderedPrompt> {
    if summary.is_empty() {
        return Err(Error::EmptyHistory);
    }
    if summary.num_arms() != RoomAction::ALL.len() {
        return Err(Error::param(format!(
            "room histories have 5 actions, got {}",
            summary.num_arms()
        )));
    }
    let actions = quoted_actions();
    let choices = or_list(&actions);
    let closing = if cot {
        format!(
            "Think step by step, then provide your final answer within the tags <Answer> ACTION <Answer> where ACTION is one of {choices}."
        )
    } else {
        format!(
            "You must provide your final answer immediately within the tags <Answer> ACTION <Answer> where ACTION is one of {choices} and with no text explanation."
        )
    };
    let system = format!(
        "You are in a room with a table and a button. There may also be other objects in the room, which I will tell you about. You must then take one of the following actions: {}, after which you will receive some reward. The reward you receive is a random function of both the action you take and the information you receive about the objects in the room and time of day. Your goal is to maximize the expected reward you receive. I will show you the past history of play over {} rounds. For each round, I will show you the state of the room and the corresponding rewards for each action. I will then tell you the current state of the room, and you must pick the next action in order to maximize your reward in this round only, which must be exactly one of {choices}. Look for patterns in the data and try to estimate the reward of each action, given the information at your disposal. {closing}",
        actions.join(", "),
        summary.len(),
    );

    let mut paragraphs = vec!["The past observations and outcomes for each action are:".to_string()];
    for (t, tuple) in summary.tuples.iter().enumerate() {
        let ctx = tuple
            .context
            .as_room()
            .ok_or_else(|| Error::param("numeric context in a room history"))?;
        let cells: Vec<String> = actions
            .iter()
            .zip(&tuple.rewards)
            .map(|(a, r)| format!("{a} had reward {}", fmt_num(*r)))
            .collect();
        paragraphs.push(format!(
            "Round {} had context {}. {}",
            t + 1,
            ctx.describe(),
            cells.join(", ")
        ));
    }
    paragraphs.push(format!("The current state of the room is {}.", query.describe()));
    let tail = if cot {
        format!(
            "Which action do you choose? Remember, think step by step, then provide your final answer within the tags <Answer> ACTION <Answer> where ACTION is one of {choices}."
        )
    } else {
        format!(
            "Which action do you choose? Remember, you must provide your final answer immediately within the tags <Answer> ACTION <Answer> where ACTION is one of {choices} and with no text explanation."
        )
    };
    paragraphs.push(tail);

    Ok(RenderedPrompt {
        system,
        user: paragraphs.join("\n\n"),
        answer_labels: RoomAction::labels(),
        expected_count: None,
        prior_count: None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExplorePayload {
    Qa { question: String },
    Arxiv { abstract_text: String },
    CategoryOnly { category: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExploreMode {
    AllAtOnce { count: usize },
    OneByOne { prior: Vec<String> },
}

pub fn render_explore_prompt(payload: &ExplorePayload, mode: &ExploreMode, encourage: bool) -> Result<RenderedPrompt> {
    let plural = match payload {
        ExplorePayload::Qa { .. } => "answers",
        _ => "titles",
    };
    let encouragement = match payload {
        ExplorePayload::Qa { .. } => ENCOURAGEMENT_ANSWERS,
        _ => ENCOURAGEMENT_TITLES,
    };
    let concise = "Each answer should only be a few words, skipping any introductory phrasing and going straight to the essence.";

    let mut system = match (payload, mode) {
        (_, ExploreMode::AllAtOnce { count: 0 }) => {
            return Err(Error::param("all-at-once prompts need a candidate count of at least 1"))
        }
        (ExplorePayload::Qa { .. }, ExploreMode::AllAtOnce { count }) => format!(
            "I will give you an open-ended question. Come up with {count} different candidate answers. Reply only with the {count} candidate answers, and put each candidate answer on a separate line. {concise}"
        ),
        (ExplorePayload::Qa { .. }, ExploreMode::OneByOne { .. }) => format!(
            "I will give you an open-ended question and some candidate answers. Come up with a new candidate answer that is relevant to the question, but different from the other candidate answers. Reply only with the candidate answer. {concise}"
        ),
        (ExplorePayload::Arxiv { .. }, ExploreMode::AllAtOnce { count }) => format!(
            "I will give you an abstract for a paper. Come up with {count} different candidate titles that are relevant to the abstract. Reply only with the {count} candidate titles, and put each candidate title on a separate line."
        ),
        (ExplorePayload::Arxiv { .. }, ExploreMode::OneByOne { .. }) => "I will give you an abstract and some candidate titles for a paper. Come up with a new candidate title that is relevant to the abstract, but different from the other candidate titles. Reply only with the candidate title.".to_string(),
        (ExplorePayload::CategoryOnly { .. }, ExploreMode::AllAtOnce { count }) => format!(
            "I will give you the arXiv category of a paper. Come up with {count} different candidate titles for a paper in this category. Reply only with the {count} candidate titles, and put each candidate title on a separate line."
        ),
        (ExplorePayload::CategoryOnly { .. }, ExploreMode::OneByOne { .. }) => "I will give you the arXiv category of a paper and some candidate titles for it. Come up with a new candidate title for a paper in this category, but different from the other candidate titles. Reply only with the candidate title.".to_string(),
    };
    if encourage {
        system.push(' ');
        system.push_str(encouragement);
    }

    let mut user = match payload {
        ExplorePayload::Qa { question } => format!("Here is the question: \"{question}\""),
        ExplorePayload::Arxiv { abstract_text } => format!("Here is the abstract: {abstract_text}"),
        ExplorePayload::CategoryOnly { category } => format!("Here is the category: {category}"),
    };
    let (expected_count, prior_count) = match mode {
        ExploreMode::AllAtOnce { count } => (Some(*count), None),
        ExploreMode::OneByOne { prior } => {
            let listed = if prior.is_empty() {
                "none yet".to_string()
            } else {
                prior.join("; ")
            };
            user.push_str(&format!("\n\nHere are the other candidate {plural}: {listed}"));
            (Some(1), Some(prior.len()))
        }
    };
    Ok(RenderedPrompt {
        system,
        user,
        answer_labels: Vec::new(),
        expected_count,
        prior_count,
    })
}

/// Follow-up used when an explore reply has too few candidate lines.
pub fn candidate_reminder(expected: usize) -> String {
    if expected == 1 {
        "Reply with exactly 1 candidate on a single line.".to_string()
    } else {
        format!("Reply with exactly {expected} candidates, each on a separate line.")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    /// Index into the label list, `None` when no label could be extracted.
    pub choice: Option<usize>,
    pub raw: String,
}

impl ParsedAnswer {
    pub fn is_invalid(&self) -> bool {
        self.choice.is_none()
    }
}

fn answer_tag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // closing tag may be `</Answer>` or a second `<Answer>`
    RE.get_or_init(|| Regex::new(r"(?is)<\s*answer\s*>(.*?)<\s*/?\s*answer\s*>").unwrap())
}

fn normalize(s: &str) -> String {
    s.trim()
        .trim_matches(|c: char| c == '"' || c == '\'' || c == '`' || c == '*' || c == '.' || c.is_whitespace())
        .to_lowercase()
}

/// Labels occurring as whole words (case-insensitive) in `text`.
fn labels_mentioned(text: &str, labels: &[String]) -> Vec<usize> {
    let lower = text.to_lowercase();
    labels
        .iter()
        .enumerate()
        .filter(|(_, l)| {
            let pattern = format!(r"\b{}\b", regex::escape(&l.to_lowercase()));
            Regex::new(&pattern).map(|re| re.is_match(&lower)).unwrap_or(false)
        })
        .map(|(i, _)| i)
        .collect()
}

/// Extracts the chosen label from a reply.
///
/// The last `<Answer>...</Answer>` (or `<Answer>...<Answer>`) pair wins. Its
/// content must name exactly one label. Without tags, a reply that mentions
/// exactly one label is accepted.
pub fn parse_answer(response: &str, labels: &[String]) -> ParsedAnswer {
    let raw = response.to_string();
    let tagged: Vec<&str> = answer_tag_re()
        .captures_iter(response)
        .filter_map(|c| c.get(1).map(|m| m.as_str()))
        .collect();
    let pick = |content: &str| -> Option<usize> {
        let norm = normalize(content);
        if let Some(i) = labels.iter().position(|l| l.to_lowercase() == norm) {
            return Some(i);
        }
        match labels_mentioned(content, labels).as_slice() {
            [only] => Some(*only),
            _ => None,
        }
    };
    let choice = match tagged.last() {
        Some(content) => pick(content),
        None => pick(response),
    };
    ParsedAnswer { choice, raw }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CandidateParseError {
    NoLines,
    ShortCount { expected: usize, got: Vec<String> },
}

fn list_prefix_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:[-*•]+|\(?\d+[.):]|\(?[a-zA-Z][.)])\s+").unwrap())
}

/// One candidate per non-empty line, with list numbering and bullets
/// stripped. Extra lines beyond `expected` are dropped.
pub fn parse_candidates(response: &str, expected: usize) -> std::result::Result<Vec<String>, CandidateParseError> {
    let lines: Vec<String> = response
        .lines()
        .map(|l| list_prefix_re().replace(l, "").trim().to_string())
        .map(|l| {
            let t = l.trim_matches('"').trim();
            t.to_string()
        })
        .filter(|l| !l.is_empty())
        .collect();
    if lines.is_empty() {
        return Err(CandidateParseError::NoLines);
    }
    if lines.len() < expected {
        return Err(CandidateParseError::ShortCount { expected, got: lines });
    }
    Ok(lines.into_iter().take(expected).collect())
}
