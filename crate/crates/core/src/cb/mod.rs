//! Contextual bandit exploit puzzles: numeric linear contexts and the
//! text-based room puzzle.

pub mod linear;
pub mod room;

pub use linear::{
    correct_answer_cb, effective_gap, expected_reward_linear, generate_linear_cb_task,
    LinearCbParams, LinearCbTask,
};
pub use room::{
    generate_room_task, hamming_distance, room_reward, room_reward_easy, room_reward_hard,
    RewardMode, RoomAction, RoomContext, RoomTask,
};
