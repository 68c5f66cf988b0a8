//! The text-based room puzzle: categorical contexts, five fixed actions, and
//! two expected-reward tables ("easy" and "hard").

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{CbHistory, Context};
use crate::stochastics::{bernoulli, RngStream};

macro_rules! attribute {
    ($name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $label)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|&v| v == self).unwrap()
            }
        }
    };
}

attribute!(TimeOfDay {
    Morning => "morning",
    Afternoon => "afternoon",
    Evening => "evening",
    Night => "night",
});

attribute!(Animal {
    Bear => "bear",
    Dog => "dog",
    Cat => "cat",
    None => "none",
});

attribute!(TableItem {
    Chest => "chest",
    Card => "card",
    Envelope => "envelope",
    None => "none",
});

attribute!(Tool {
    Key => "key",
    LetterOpener => "letter opener",
    Hammer => "hammer",
    None => "none",
});

attribute!(Food {
    Cake => "cake",
    Apple => "apple",
    Nut => "nut",
    None => "none",
});

attribute!(ButtonColor {
    Red => "red",
    Orange => "orange",
    Yellow => "yellow",
    Green => "green",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoomContext {
    pub time_of_day: TimeOfDay,
    pub animal: Animal,
    pub table_item: TableItem,
    pub tool: Tool,
    pub food: Food,
    pub button_color: ButtonColor,
}

pub const NUM_ATTRIBUTES: usize = 6;

impl RoomContext {
    /// Attribute value indices in declaration order.
    pub fn codes(&self) -> [usize; NUM_ATTRIBUTES] {
        [
            self.time_of_day.index(),
            self.animal.index(),
            self.table_item.index(),
            self.tool.index(),
            self.food.index(),
            self.button_color.index(),
        ]
    }

    pub fn from_codes(codes: [usize; NUM_ATTRIBUTES]) -> Self {
        Self {
            time_of_day: TimeOfDay::ALL[codes[0]],
            animal: Animal::ALL[codes[1]],
            table_item: TableItem::ALL[codes[2]],
            tool: Tool::ALL[codes[3]],
            food: Food::ALL[codes[4]],
            button_color: ButtonColor::ALL[codes[5]],
        }
    }

    /// Number of values each attribute can take.
    pub fn cardinalities() -> [usize; NUM_ATTRIBUTES] {
        [
            TimeOfDay::ALL.len(),
            Animal::ALL.len(),
            TableItem::ALL.len(),
            Tool::ALL.len(),
            Food::ALL.len(),
            ButtonColor::ALL.len(),
        ]
    }

    /// Every possible context (4^6 = 4096).
    pub fn enumerate() -> Vec<RoomContext> {
        let card = Self::cardinalities();
        let total: usize = card.iter().product();
        (0..total)
            .map(|mut i| {
                let mut codes = [0usize; NUM_ATTRIBUTES];
                for (slot, &c) in codes.iter_mut().zip(&card).rev() {
                    *slot = i % c;
                    i /= c;
                }
                Self::from_codes(codes)
            })
            .collect()
    }

    /// Drop-first one-hot encoding (three indicators per attribute).
    pub fn one_hot(&self) -> Vec<f64> {
        let card = Self::cardinalities();
        let mut out = Vec::with_capacity(card.iter().map(|c| c - 1).sum());
        for (code, c) in self.codes().into_iter().zip(card) {
            for v in 1..c {
                out.push(if code == v { 1.0 } else { 0.0 });
            }
        }
        out
    }

    pub fn sample(rng: &mut RngStream) -> Self {
        let card = Self::cardinalities();
        let mut codes = [0usize; NUM_ATTRIBUTES];
        for (slot, c) in codes.iter_mut().zip(card) {
            *slot = rng.index(c);
        }
        Self::from_codes(codes)
    }

    /// Prompt rendering, e.g. `time of day: morning, animal: bear, ...`.
    /// Absent objects read as "no animal", "no tool" and so on.
    pub fn describe(&self) -> String {
        fn or_none(label: &str, none: bool, noun: &str) -> String {
            if none {
                format!("no {noun}")
            } else {
                label.to_string()
            }
        }
        format!(
            "time of day: {}, animal: {}, table item: {}, tool: {}, food: {}, button color: {}",
            self.time_of_day.label(),
            or_none(self.animal.label(), self.animal == Animal::None, "animal"),
            or_none(self.table_item.label(), self.table_item == TableItem::None, "table item"),
            or_none(self.tool.label(), self.tool == Tool::None, "tool"),
            or_none(self.food.label(), self.food == Food::None, "food"),
            self.button_color.label(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RoomAction {
    #[serde(rename = "pet animal")]
    PetAnimal,
    #[serde(rename = "leave room")]
    LeaveRoom,
    #[serde(rename = "use tool")]
    UseTool,
    #[serde(rename = "eat food")]
    EatFood,
    #[serde(rename = "press button")]
    PressButton,
}

impl RoomAction {
    pub const ALL: [RoomAction; 5] = [
        RoomAction::PetAnimal,
        RoomAction::LeaveRoom,
        RoomAction::UseTool,
        RoomAction::EatFood,
        RoomAction::PressButton,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RoomAction::PetAnimal => "pet animal",
            RoomAction::LeaveRoom => "leave room",
            RoomAction::UseTool => "use tool",
            RoomAction::EatFood => "eat food",
            RoomAction::PressButton => "press button",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_label(label: &str) -> Result<Self> {
        let norm = label.trim().trim_matches('"').to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|a| a.label() == norm)
            .ok_or_else(|| Error::param(format!("unknown room action {label:?}")))
    }

    pub fn labels() -> Vec<String> {
        Self::ALL.iter().map(|a| a.label().to_string()).collect()
    }
}

impl fmt::Display for RoomAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Easy,
    Hard,
}

impl RewardMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RewardMode::Easy => "easy",
            RewardMode::Hard => "hard",
        }
    }
}

pub fn room_reward_easy(ctx: &RoomContext, action: RoomAction) -> f64 {
    match action {
        RoomAction::PetAnimal => match ctx.animal {
            Animal::Bear => 0.01,
            Animal::Dog => 0.7,
            Animal::Cat => 0.4,
            Animal::None => 0.5,
        },
        RoomAction::LeaveRoom => 0.5,
        RoomAction::UseTool => match ctx.tool {
            Tool::Key => 0.75,
            Tool::LetterOpener => 0.6,
            Tool::Hammer => 0.45,
            Tool::None => 0.2,
        },
        RoomAction::EatFood => match ctx.food {
            Food::Cake => 0.8,
            Food::Apple => 0.6,
            Food::Nut => 0.2,
            Food::None => 0.3,
        },
        RoomAction::PressButton => match ctx.button_color {
            ButtonColor::Green => 0.89,
            ButtonColor::Yellow => 0.62,
            ButtonColor::Orange => 0.39,
            ButtonColor::Red => 0.27,
        },
    }
}

pub fn room_reward_hard(ctx: &RoomContext, action: RoomAction) -> f64 {
    let bear = ctx.animal == Animal::Bear;
    match action {
        RoomAction::PetAnimal => match (ctx.animal, ctx.time_of_day) {
            (Animal::Bear, _) => 0.01,
            (Animal::Dog, _) => 0.7,
            (Animal::Cat, TimeOfDay::Morning | TimeOfDay::Afternoon) => 0.3,
            (Animal::Cat, TimeOfDay::Evening | TimeOfDay::Night) => 0.7,
            (Animal::None, _) => 0.5,
        },
        RoomAction::LeaveRoom => 0.5,
        RoomAction::UseTool => {
            if bear {
                0.1
            } else if ctx.tool == Tool::Key && ctx.table_item == TableItem::Chest {
                0.9
            } else {
                0.4
            }
        }
        RoomAction::EatFood => {
            if bear {
                return 0.5;
            }
            match ctx.food {
                Food::Cake => 0.8,
                Food::Apple => 0.6,
                Food::Nut => 0.2,
                Food::None => 0.5,
            }
        }
        RoomAction::PressButton => {
            if bear {
                return 0.1;
            }
            let matched = matches!(
                (ctx.button_color, ctx.time_of_day),
                (ButtonColor::Green, TimeOfDay::Morning)
                    | (ButtonColor::Yellow, TimeOfDay::Afternoon)
                    | (ButtonColor::Orange, TimeOfDay::Evening)
                    | (ButtonColor::Red, TimeOfDay::Night)
            );
            if matched {
                0.9
            } else {
                0.25
            }
        }
    }
}

pub fn room_reward(mode: RewardMode, ctx: &RoomContext, action: RoomAction) -> f64 {
    match mode {
        RewardMode::Easy => room_reward_easy(ctx, action),
        RewardMode::Hard => room_reward_hard(ctx, action),
    }
}

/// Expected rewards of all five actions, in [`RoomAction::ALL`] order.
pub fn room_means(mode: RewardMode, ctx: &RoomContext) -> Vec<f64> {
    RoomAction::ALL.iter().map(|&a| room_reward(mode, ctx, a)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardTableEntry {
    pub context: RoomContext,
    pub action: RoomAction,
    pub reward: f64,
}

/// Full expected-reward table for a mode, one entry per context and action.
pub fn reward_table(mode: RewardMode) -> Vec<RewardTableEntry> {
    RoomContext::enumerate()
        .into_iter()
        .flat_map(|context| {
            RoomAction::ALL.into_iter().map(move |action| RewardTableEntry {
                context,
                action,
                reward: room_reward(mode, &context, action),
            })
        })
        .collect()
}

pub fn reward_table_json(mode: RewardMode) -> serde_json::Value {
    serde_json::json!({
        "mode": mode.as_str(),
        "actions": RoomAction::labels(),
        "entries": reward_table(mode),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomTask {
    pub seed: u64,
    pub reward_mode: RewardMode,
    /// `T + 1` contexts; the last one is the query.
    pub contexts: Vec<RoomContext>,
    /// `rewards[t][action]`, one column per [`RoomAction::ALL`] entry.
    pub rewards: Vec<Vec<u8>>,
}

impl RoomTask {
    pub fn horizon(&self) -> usize {
        self.rewards.len()
    }

    pub fn query(&self) -> &RoomContext {
        self.contexts.last().expect("room task has a query context")
    }

    pub fn history(&self) -> CbHistory {
        CbHistory {
            contexts: self.contexts[..self.horizon()]
                .iter()
                .copied()
                .map(Context::Room)
                .collect(),
            rewards: self
                .rewards
                .iter()
                .map(|r| r.iter().map(|&x| f64::from(x)).collect())
                .collect(),
        }
    }

    pub fn query_means(&self) -> Vec<f64> {
        room_means(self.reward_mode, self.query())
    }

    pub fn correct_answers(&self) -> Vec<usize> {
        crate::util::argmax_set(&self.query_means())
    }

    pub fn effective_gap(&self) -> f64 {
        crate::util::top_two_gap(&self.query_means())
    }
}

pub fn generate_room_task(horizon: usize, mode: RewardMode, rng: &mut RngStream) -> Result<RoomTask> {
    if horizon == 0 {
        return Err(Error::param("horizon must be at least 1"));
    }
    let mut contexts = Vec::with_capacity(horizon + 1);
    let mut rewards = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let ctx = RoomContext::sample(rng);
        let row = RoomAction::ALL
            .iter()
            .map(|&a| bernoulli(room_reward(mode, &ctx, a), rng).map(u8::from))
            .collect::<Result<Vec<_>>>()?;
        contexts.push(ctx);
        rewards.push(row);
    }
    contexts.push(RoomContext::sample(rng));
    Ok(RoomTask {
        seed: rng.master_seed(),
        reward_mode: mode,
        contexts,
        rewards,
    })
}

/// Number of attributes on which two contexts differ.
pub fn hamming_distance(a: &RoomContext, b: &RoomContext) -> usize {
    a.codes()
        .iter()
        .zip(b.codes().iter())
        .filter(|(x, y)| x != y)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> RoomContext {
        RoomContext {
            time_of_day: TimeOfDay::Morning,
            animal: Animal::Bear,
            table_item: TableItem::Chest,
            tool: Tool::Key,
            food: Food::Apple,
            button_color: ButtonColor::Red,
        }
    }

    #[test]
    fn easy_examples() {
        let c = ctx();
        assert_eq!(room_reward_easy(&c, RoomAction::PetAnimal), 0.01);
        for other in RoomContext::enumerate().iter().step_by(97) {
            assert_eq!(room_reward_easy(other, RoomAction::LeaveRoom), 0.5);
        }
        let green = RoomContext {
            button_color: ButtonColor::Green,
            ..c
        };
        assert_eq!(room_reward_easy(&green, RoomAction::PressButton), 0.89);
    }

    #[test]
    fn hard_examples() {
        let c = ctx();
        assert_eq!(room_reward_hard(&c, RoomAction::UseTool), 0.1);
        let dog = RoomContext {
            animal: Animal::Dog,
            ..c
        };
        assert_eq!(room_reward_hard(&dog, RoomAction::UseTool), 0.9);
        let night = RoomContext {
            animal: Animal::None,
            button_color: ButtonColor::Red,
            time_of_day: TimeOfDay::Night,
            ..c
        };
        assert_eq!(room_reward_hard(&night, RoomAction::PressButton), 0.9);
        let cat_evening = RoomContext {
            animal: Animal::Cat,
            time_of_day: TimeOfDay::Evening,
            ..c
        };
        assert_eq!(room_reward_hard(&cat_evening, RoomAction::PetAnimal), 0.7);
    }

    #[test]
    fn action_labels() {
        assert_eq!(RoomAction::from_label("\"Use Tool\"").unwrap(), RoomAction::UseTool);
        assert!(RoomAction::from_label("dance").is_err());
    }

    #[test]
    fn enumeration_covers_everything_once() {
        let all = RoomContext::enumerate();
        assert_eq!(all.len(), 4096);
        let set: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(set.len(), 4096);
        for c in &all {
            assert_eq!(RoomContext::from_codes(c.codes()), *c);
        }
    }

    #[test]
    fn tables_are_probabilities() {
        for mode in [RewardMode::Easy, RewardMode::Hard] {
            let table = reward_table(mode);
            assert_eq!(table.len(), 4096 * 5);
            assert!(table.iter().all(|e| (0.0..=1.0).contains(&e.reward)));
        }
    }

    #[test]
    fn task_shape() {
        let mut rng = RngStream::new(1, &[]);
        let task = generate_room_task(30, RewardMode::Hard, &mut rng).unwrap();
        assert_eq!(task.contexts.len(), 31);
        assert!(task.rewards.iter().all(|r| r.len() == 5));
        assert!(generate_room_task(0, RewardMode::Easy, &mut rng).is_err());
    }

    #[test]
    fn bear_petting_rate() {
        // sd = sqrt(0.01 * 0.99 / 20000) ~ 0.0007
        let mut rng = RngStream::new(2, &[]);
        let c = ctx();
        let n = 20_000;
        let hits = (0..n)
            .filter(|_| bernoulli(room_reward_easy(&c, RoomAction::PetAnimal), &mut rng).unwrap())
            .count();
        assert!((hits as f64 / n as f64 - 0.01).abs() <= 0.01);
    }

    #[test]
    fn hamming_examples() {
        let a = ctx();
        assert_eq!(hamming_distance(&a, &a), 0);
        let b = RoomContext {
            button_color: ButtonColor::Green,
            ..a
        };
        assert_eq!(hamming_distance(&a, &b), 1);
        let mut rng = RngStream::new(3, &[]);
        for _ in 0..500 {
            let x = RoomContext::sample(&mut rng);
            let y = RoomContext::sample(&mut rng);
            assert_eq!(hamming_distance(&x, &y), hamming_distance(&y, &x));
            assert!(hamming_distance(&x, &y) <= NUM_ATTRIBUTES);
        }
    }

    #[test]
    fn describe_renders_absent_objects() {
        let c = RoomContext {
            animal: Animal::None,
            tool: Tool::LetterOpener,
            ..ctx()
        };
        assert_eq!(
            c.describe(),
            "time of day: morning, animal: no animal, table item: chest, tool: letter opener, food: apple, button color: red"
        );
    }

    #[test]
    fn one_hot_width() {
        assert_eq!(ctx().one_hot().len(), 18);
        assert!(ctx().one_hot().iter().all(|&x| x == 0.0 || x == 1.0));
    }
}
