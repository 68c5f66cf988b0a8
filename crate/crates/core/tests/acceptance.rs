//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs offline.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use bandit_oracles::cb::linear::{generate_linear_cb_task, LinearCbParams};
use bandit_oracles::cb::room::{room_reward, RewardMode, RoomAction, RoomContext};
use bandit_oracles::config::{EmbeddingConfig, ExploitConfig, ExploreConfig, ExplorePolicyConfig, PolicyConfig, PuzzleConfig, WorkloadConfig};
use bandit_oracles::datasets::load_builtin_qa;
use bandit_oracles::explore::{run_experiment, ucb1, ExploreSettings, ExploreTask, Strategy, EMBEDDING_DIM};
use bandit_oracles::harness::{generate_tasks, run_exploit_eval, run_explore_eval, write_exploit_outputs, write_explore_results};
use bandit_oracles::mab::DEFAULT_GAP_GRID;
use bandit_oracles::mitigations::Mitigation;
use bandit_oracles::oracle::{
    CachedChat, CachedEmbedder, ChatOracle, ChatReply, ChatRequest, ExchangeCache, HashedEmbeddings, OracleError, ScriptedPolicy, Usage,
};
use bandit_oracles::prompts::{button_labels, render_cb_prompt, MabStyle};
use bandit_oracles::history::SummarizedHistory;
use bandit_oracles::RngStream;
use serde_json::Value;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn mab_config(policy: ScriptedPolicy) -> ExploitConfig {
    let mut config = ExploitConfig::new(
        PuzzleConfig::Mab {
            num_arms: 5,
            gaps: DEFAULT_GAP_GRID.to_vec(),
            tasks_per_gap: 100,
            horizon: 50,
            style: MabStyle::Buttons,
        },
        PolicyConfig::Scripted { policy },
    );
    config.seed = 2024;
    config
}

fn scripted_exactness() -> Check {
    let perfect = run_exploit_eval(&mab_config(ScriptedPolicy::PerfectArgmax), None).map_err(err)?;
    let perfect_frac = perfect.iter().filter(|r| r.correct).count() as f64 / perfect.len() as f64;
    if perfect.len() != 1000 || perfect_frac != 1.0 {
        return Err(format!("perfect_argmax: {} tasks, FracCorrect {perfect_frac}", perfect.len()));
    }

    let config = mab_config(ScriptedPolicy::UniformRandom);
    let records = run_exploit_eval(&config, None).map_err(err)?;
    let tasks = generate_tasks(&config.puzzle, config.seed).map_err(err)?;
    let chance = tasks
        .iter()
        .map(|t| t.task.correct_answers().len() as f64 / t.task.num_arms() as f64)
        .sum::<f64>()
        / tasks.len() as f64;
    let frac = records.iter().filter(|r| r.correct).count() as f64 / records.len() as f64;
    ensure(
        (frac - chance).abs() <= 0.03,
        format!("perfect_argmax 1.000 on 1000 tasks; uniform_random {frac:.4} vs chance {chance:.4} (tol 0.03)"),
    )
}

fn linear_config(k: usize, d: usize, horizon: usize, tasks: usize) -> ExploitConfig {
    let mut config = ExploitConfig::new(
        PuzzleConfig::LinearCb {
            num_arms: k,
            dimension: d,
            horizon,
            tasks,
            noise_sd: 1.0,
        },
        PolicyConfig::Linear,
    );
    config.seed = 7;
    config
}

fn linear_baseline() -> Check {
    let small = run_exploit_eval(&linear_config(2, 2, 4000, 200), None).map_err(err)?;
    let easy: Vec<_> = small.iter().filter(|r| r.gap >= 0.2).collect();
    let easy_frac = easy.iter().filter(|r| r.correct).count() as f64 / easy.len().max(1) as f64;

    let large = run_exploit_eval(&linear_config(5, 5, 1000, 200), None).map_err(err)?;
    let large_frac = large.iter().filter(|r| r.correct).count() as f64 / large.len() as f64;
    ensure(
        !easy.is_empty() && easy_frac >= 0.95 && large_frac - 0.2 >= 0.4,
        format!(
            "K=d=2 T=4000: {easy_frac:.3} on {} tasks with gap >= 0.2 (need 0.95); K=d=5 T=1000: {large_frac:.3} (need 0.600)",
            easy.len()
        ),
    )
}

fn rule_reward(rules: &Value, ctx: &Value) -> Option<f64> {
    rules.as_array()?.iter().find_map(|rule| {
        let when = rule["when"].as_object()?;
        let hit = when
            .iter()
            .all(|(attr, allowed)| allowed.as_array().is_some_and(|a| a.contains(&ctx[attr])));
        if hit {
            rule["reward"].as_f64()
        } else {
            None
        }
    })
}

fn room_tables() -> Check {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/room_rewards.json");
    let tables: Value = serde_json::from_str(&fs::read_to_string(path).map_err(err)?).map_err(err)?;
    let contexts = RoomContext::enumerate();
    if contexts.len() != 4096 {
        return Err(format!("{} contexts enumerated", contexts.len()));
    }
    let mut checked = 0;
    for mode in [RewardMode::Easy, RewardMode::Hard] {
        for ctx in &contexts {
            let ctx_value = serde_json::to_value(ctx).map_err(err)?;
            for action in RoomAction::ALL {
                let expected = rule_reward(&tables[mode.as_str()][action.label()], &ctx_value)
                    .ok_or_else(|| format!("no rule for {} / {} / {ctx_value}", mode.as_str(), action.label()))?;
                let got = room_reward(mode, ctx, action);
                if got != expected {
                    return Err(format!("{} {} {ctx_value}: {got} vs table {expected}", mode.as_str(), action.label()));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (mode, context, action) entries match"))
}

fn random_explore() -> Check {
    let embedder = CachedEmbedder::new(Arc::new(HashedEmbeddings::new(EMBEDDING_DIM)));
    let tasks: Vec<ExploreTask> = load_builtin_qa().iter().map(ExploreTask::qa).collect();
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let settings = ExploreSettings {
            horizon: 1000,
            runs: 10,
            seed,
            k_grid: (1..=10).collect(),
        };
        for (i, task) in tasks.iter().enumerate() {
            for k in 1..=10 {
                let result = run_experiment(task, i as u64, Strategy::Random, k, &settings, None, &embedder).map_err(err)?;
                worst = worst.max(result.rbar);
            }
        }
    }
    ensure(worst < 0.1, format!("max rbar {worst:.4} over 10 targets x K 1..10 x 10 seeds x 10 runs at d=384"))
}

fn ucb_sanity() -> Check {
    let means = [0.9, 0.1];
    let mean_rew = (0..20)
        .map(|s| ucb1(&means, 1000, &mut RngStream::new(s, &[])).map(|r| r.rew))
        .sum::<Result<f64, _>>()
        .map_err(err)?
        / 20.0;
    for mu in [0.0, 0.25, 0.5, 0.9, 1.0] {
        let run = ucb1(&[mu], 1000, &mut RngStream::new(0, &[])).map_err(err)?;
        if run.rew != mu {
            return Err(format!("single arm {mu}: rew {}", run.rew));
        }
    }
    for s in 0..50u64 {
        let mut rng = RngStream::new(s, &[99]);
        let k = 1 + rng.index(10);
        let fixture: Vec<f64> = (0..k).map(|_| rng.unit()).collect();
        let max = fixture.iter().copied().fold(f64::MIN, f64::max);
        let run = ucb1(&fixture, 500, &mut rng).map_err(err)?;
        if run.rew > max + 1e-12 {
            return Err(format!("rew {} above max mean {max}", run.rew));
        }
    }
    ensure(
        (0.85..=0.90).contains(&mean_rew),
        format!("mean rew {mean_rew:.4} for (0.9, 0.1) at T=1000 over 20 seeds; single-arm exact; rew <= max mean on 50 fixtures"),
    )
}

fn compression() -> Check {
    let task = generate_linear_cb_task(LinearCbParams::new(2, 2, 4000), &mut RngStream::new(5, &[])).map_err(err)?;
    let history = task.history();
    let query = task.query_context();
    let summary = Mitigation::KMeans { k: 10 }
        .apply(&history, &query, &mut RngStream::new(5, &[1]))
        .map_err(err)?;
    let full = render_cb_prompt(&SummarizedHistory::full(&history), &query, false).map_err(err)?;
    let short = render_cb_prompt(&summary, &query, false).map_err(err)?;
    let full_len = full.system.chars().count() + full.user.chars().count();
    let short_len = short.system.chars().count() + short.user.chars().count();
    let saving = 1.0 - short_len as f64 / full_len as f64;
    ensure(
        summary.len() <= 10 && saving >= 0.95,
        format!("{} tuples; prompt {short_len} vs {full_len} chars ({:.1}% shorter)", summary.len(), saving * 100.0),
    )
}

/// Deterministic stand-in for a remote model. Latencies come from a shared
/// counter, so they depend on call order and only a cache makes them repeat.
struct FakeChat {
    calls: AtomicU64,
}

impl ChatOracle for FakeChat {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, OracleError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        let text: String = request.messages.iter().map(|m| m.content.as_str()).collect();
        let h = text.bytes().fold(request.sample, |h, b| h.wrapping_mul(31).wrapping_add(u64::from(b)));
        let reply = if request.model == "fake-explore" {
            (0..10).map(|i| format!("{}. proposal {} {}", i + 1, h % 97, i)).collect::<Vec<_>>().join("\n")
        } else if h % 5 == 0 {
            "I am not sure.".to_string()
        } else {
            let labels = button_labels(2).unwrap();
            format!("<Answer>{}</Answer>", labels[(h % 2) as usize])
        };
        Ok(ChatReply {
            text: reply,
            usage: Usage::default(),
            latency_ms: 10 + n % 7,
            attempts: 1,
            cached: false,
        })
    }
}

fn read_all(dir: &Path, names: &[&str]) -> Result<BTreeMap<String, Vec<u8>>, String> {
    names
        .iter()
        .map(|n| fs::read(dir.join(n)).map(|b| (n.to_string(), b)).map_err(err))
        .collect()
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(err)?;
    let cache_dir = tmp.path().join("cache");
    let fake: Arc<dyn ChatOracle> = Arc::new(FakeChat { calls: AtomicU64::new(0) });
    let recording = || -> Result<Arc<dyn ChatOracle>, String> {
        Ok(Arc::new(CachedChat::new(ExchangeCache::open(cache_dir.join("chat")).map_err(err)?, fake.clone())))
    };
    let replaying = || -> Result<Arc<dyn ChatOracle>, String> {
        Ok(Arc::new(CachedChat::replay_only(ExchangeCache::open(cache_dir.join("chat")).map_err(err)?)))
    };

    let mut exploit = linear_config(2, 2, 50, 30);
    exploit.policy = PolicyConfig::Chat {
        model: "fake-exploit".into(),
        endpoint: None,
        temperature: 0.0,
    };
    exploit.mitigation = Mitigation::KMeans { k: 5 };
    exploit.jobs = 4;

    let explore = ExploreConfig {
        workload: WorkloadConfig::Qa { tasks: Some(vec![0, 1]) },
        strategies: vec![Strategy::AllAtOnce, Strategy::OneByOne, Strategy::Random],
        k_grid: vec![1, 2, 5],
        horizon: 200,
        runs: 3,
        seed: 3,
        jobs: 4,
        policy: Some(ExplorePolicyConfig::Chat {
            model: "fake-explore".into(),
            endpoint: None,
        }),
        embedding: EmbeddingConfig::default(),
    };

    let mut outputs = Vec::new();
    for (i, chat) in [recording()?, recording()?, replaying()?].into_iter().enumerate() {
        let out = tmp.path().join(format!("run{i}"));
        let records = run_exploit_eval(&exploit, Some(chat.clone())).map_err(err)?;
        write_exploit_outputs(&out, &exploit, &records).map_err(err)?;
        let embedder = CachedEmbedder::new(Arc::new(HashedEmbeddings::new(EMBEDDING_DIM)))
            .with_dir(cache_dir.join("embeddings"))
            .map_err(err)?;
        let results = run_explore_eval(&explore, Some(chat), &embedder).map_err(err)?;
        write_explore_results(&out, &results).map_err(err)?;
        outputs.push(read_all(&out, &["results.csv", "curve.csv", "explore.csv", "histogram.csv"])?);
    }
    let invalid = String::from_utf8_lossy(&outputs[0]["results.csv"]).matches(",true,2,").count();
    ensure(
        outputs[0] == outputs[1] && outputs[1] == outputs[2],
        format!("4 CSVs identical across fresh, warm-cache and replay-only runs ({invalid} rows re-asked and still invalid)"),
    )
}

fn metric_oracles() -> Check {
    common::check_empirical_gap()?;
    common::check_effective_gap()?;
    common::check_frac_correct_curve()?;
    common::check_arm_histogram()?;
    Ok(format!("4 metrics x {} fixtures match brute force", common::FIXTURES))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("scripted-oracle exactness", scripted_exactness),
        ("linear baseline regime", linear_baseline),
        ("room reward tables", room_tables),
        ("explore random baseline", random_explore),
        ("UCB1 sanity", ucb_sanity),
        ("mitigation compression", compression),
        ("determinism", determinism),
        ("metric oracles", metric_oracles),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
