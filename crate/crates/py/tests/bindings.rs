use bandit_oracles_py::{curve, exploit, explore, report, room, tasks};
use serde_json::Value;

const MAB: &str = r#"{
    "puzzle": {"kind": "mab", "num_arms": 3, "gaps": [0.0, 0.3], "tasks_per_gap": 4, "horizon": 20},
    "policy": {"kind": "scripted", "policy": {"kind": "perfect_argmax"}},
    "seed": 5,
    "jobs": 2
}"#;

#[test]
fn exploit_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let records: Value = serde_json::from_str(&exploit(MAB, Some(dir.path())).unwrap()).unwrap();
    let records = records.as_array().unwrap();
    assert_eq!(records.len(), 8);
    assert!(records.iter().all(|r| r["correct"] == true));

    let points: Value = serde_json::from_str(&curve(&dir.path().join("results.csv"), "s").unwrap()).unwrap();
    assert!(points.as_array().unwrap().iter().all(|p| p["frac"] == 1.0));

    let out = tempfile::tempdir().unwrap();
    assert!(report(&[dir.path().to_path_buf()], out.path()).is_ok());
    assert!(out.path().join("curve.csv").exists());
}

#[test]
fn bad_json_and_chat_policies_are_errors() {
    assert!(exploit("{", None).is_err());
    let chat = MAB.replace(r#"{"kind": "scripted", "policy": {"kind": "perfect_argmax"}}"#, r#"{"kind": "chat", "model": "m"}"#);
    assert!(exploit(&chat, None).is_err());
}

#[test]
fn tasks_and_room_rewards() {
    let list: Value = serde_json::from_str(&tasks(r#"{"kind": "room", "horizon": 10, "mode": "hard", "tasks": 3}"#, 1).unwrap()).unwrap();
    assert_eq!(list.as_array().unwrap().len(), 3);
    assert_eq!(list[0]["id"], "room-hard-T10-000");

    let ctx = r#"{"time_of_day": "morning", "animal": "bear", "table_item": "chest", "tool": "key", "food": "cake", "button_color": "green"}"#;
    assert_eq!(room("easy", ctx, "pet animal").unwrap(), 0.01);
    assert_eq!(room("hard", ctx, "use tool").unwrap(), 0.1);
    assert!(room("hard", ctx, "dance").is_err());
}

#[test]
fn explore_random_offline() {
    let config = r#"{
        "workload": {"kind": "qa", "tasks": [0]},
        "strategies": ["random"],
        "k_grid": [1, 5],
        "horizon": 100,
        "runs": 2,
        "embedding": {"kind": "hashed", "dimension": 64}
    }"#;
    let results: Value = serde_json::from_str(&explore(config, None).unwrap()).unwrap();
    assert_eq!(results.as_array().unwrap().len(), 2);
}
