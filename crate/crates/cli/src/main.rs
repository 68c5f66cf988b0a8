//! `bandit-oracles`: generate puzzles, run exploit and explore
//! evaluations, ingest arXiv corpora and aggregate results.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use bandit_oracles::cb::room::RewardMode;
use bandit_oracles::config::{
    parse_exploit_config, parse_explore_config, EmbeddingConfig, ExploitConfig, ExploreConfig, ExplorePolicyConfig,
    PolicyConfig, PuzzleConfig,
};
use bandit_oracles::datasets::{check_category, corpus_path, default_cutoff, fetch_arxiv, HttpFeedSource, DEFAULT_COUNT};
use bandit_oracles::explore::EMBEDDING_DIM;
use bandit_oracles::harness::{
    build_report, run_exploit_eval, run_explore_eval, write_atomic, write_exploit_outputs, write_explore_results,
    write_fixtures,
};
use bandit_oracles::mab::{DEFAULT_GAP_GRID, DEFAULT_NUM_ARMS, DEFAULT_TASKS_PER_GAP};
use bandit_oracles::oracle::{
    api_key_from_env, CachedChat, CachedEmbedder, ChatOracle, EmbeddingProvider, ExchangeCache, HashedEmbeddings,
    HttpChatClient, HttpEmbedder, OracleError, PrecomputedEmbeddings, ReqwestTransport, ScriptedPolicy, API_KEY_ENV,
};
use bandit_oracles::prompts::MabStyle;
use bandit_oracles::util::dot;
use bandit_oracles::{Error, Result};
use chrono::NaiveDate;
use clap::{Parser, Subcommand, ValueEnum};

const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1";
const DEFAULT_EMBEDDING_MODEL: &str = "text-embedding-3-small";

#[derive(Parser)]
#[command(name = "bandit-oracles", version, about = "Evaluate language models as bandit exploit and explore oracles")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads (overrides the config file).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Oracle and embedding cache directory [default: <out>/cache].
    #[arg(long, global = true)]
    cache: Option<PathBuf>,

    /// Base URL of an OpenAI-compatible API.
    #[arg(long, global = true)]
    endpoint: Option<String>,

    /// Chat model name, or a scripted policy name with `--provider scripted`.
    #[arg(long, global = true)]
    model: Option<String>,

    #[arg(long, global = true, value_enum)]
    provider: Option<Provider>,

    #[arg(long, global = true, value_enum)]
    embedding: Option<EmbeddingKind>,

    /// Precomputed embeddings JSON used by `--embedding file`.
    #[arg(long, global = true)]
    embeddings_file: Option<PathBuf>,

    /// Embedding model used by `--embedding endpoint`.
    #[arg(long, global = true)]
    embedding_model: Option<String>,

    /// Answer oracle calls from the cache only.
    #[arg(long, global = true)]
    replay: bool,

    /// Overwrite a non-empty output directory.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Provider {
    Chat,
    Scripted,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EmbeddingKind {
    Endpoint,
    File,
    Hashed,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PuzzleKind {
    Mab,
    LinearCb,
    Room,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Easy,
    Hard,
}

#[derive(Subcommand)]
enum Command {
    /// Write task fixtures for a puzzle.
    Gen {
        #[arg(value_enum)]
        kind: PuzzleKind,
        /// Puzzle JSON; flags below are ignored when given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        num_arms: Option<usize>,
        #[arg(long)]
        dimension: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        /// Tasks per gap (mab) or per configuration (contextual).
        #[arg(long)]
        tasks: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        gaps: Option<Vec<f64>>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Run an exploit evaluation and write results and curve CSVs.
    Exploit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fail with exit code 3 unless results.csv matches this file.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
    /// Run an explore evaluation and write per-cell JSON and summary CSVs.
    Explore {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fail with exit code 3 unless explore.csv matches this file.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
    /// Fetch recent abstract/title pairs into a local corpus.
    Arxiv {
        #[arg(required = true)]
        categories: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_COUNT)]
        count: usize,
        /// Keep papers submitted after this date [default: 2024-06-30].
        #[arg(long)]
        cutoff: Option<NaiveDate>,
        #[arg(long)]
        out: PathBuf,
        /// Pause between feed requests in milliseconds.
        #[arg(long, default_value_t = 3000)]
        delay_ms: u64,
    },
    /// Print cosine similarities of word pairs (one `a,b` pair per line).
    Embedsim {
        pairs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate result directories into curve and summary tables.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Fail with exit code 3 unless table.txt matches this file.
        #[arg(long)]
        golden: Option<PathBuf>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Integrity(_) | Error::Oracle(OracleError::Integrity(_)) => 3,
        Error::Oracle(_) | Error::Dataset(_) | Error::Io { .. } | Error::ShortCandidates { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen {
            kind,
            config,
            out,
            num_arms,
            dimension,
            horizon,
            tasks,
            gaps,
            mode,
        } => {
            let puzzle = match config {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| config_error(io_error(path, e)))?;
                    let puzzle: PuzzleConfig =
                        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                    if puzzle.kind() != puzzle_kind_name(*kind) {
                        return Err(Error::Config(format!("{} describes a {} puzzle", path.display(), puzzle.kind())));
                    }
                    puzzle
                }
                None => match kind {
                    PuzzleKind::Mab => PuzzleConfig::Mab {
                        num_arms: num_arms.unwrap_or(DEFAULT_NUM_ARMS),
                        gaps: gaps.clone().unwrap_or_else(|| DEFAULT_GAP_GRID.to_vec()),
                        tasks_per_gap: tasks.unwrap_or(DEFAULT_TASKS_PER_GAP),
                        horizon: horizon.unwrap_or(50),
                        style: MabStyle::Buttons,
                    },
                    PuzzleKind::LinearCb => PuzzleConfig::LinearCb {
                        num_arms: num_arms.unwrap_or(2),
                        dimension: dimension.unwrap_or(2),
                        horizon: horizon.unwrap_or(1000),
                        tasks: tasks.unwrap_or(bandit_oracles::cb::linear::DEFAULT_TASKS),
                        noise_sd: 1.0,
                    },
                    PuzzleKind::Room => PuzzleConfig::Room {
                        horizon: horizon.unwrap_or(100),
                        mode: match mode.unwrap_or(Mode::Easy) {
                            Mode::Easy => RewardMode::Easy,
                            Mode::Hard => RewardMode::Hard,
                        },
                        tasks: tasks.unwrap_or(bandit_oracles::cb::linear::DEFAULT_TASKS),
                    },
                },
            };
            puzzle.validate()?;
            let paths = write_fixtures(&puzzle, cli.seed.unwrap_or(0), out, cli.force)?;
            println!("wrote {} fixtures to {}", paths.len() - 1, out.display());
            Ok(())
        }
        Command::Exploit { config, out, golden } => cmd_exploit(cli, config, out, golden.as_deref()),
        Command::Explore { config, out, golden } => cmd_explore(cli, config, out, golden.as_deref()),
        Command::Arxiv {
            categories,
            count,
            cutoff,
            out,
            delay_ms,
        } => {
            for category in categories {
                check_category(category).map_err(|e| Error::Config(e.to_string()))?;
            }
            let source = HttpFeedSource::new(Duration::from_millis(*delay_ms))?;
            let after = cutoff.unwrap_or_else(default_cutoff);
            for category in categories {
                let items = fetch_arxiv(category, *count, after, &source, out)?;
                println!("{category}: {} items in {}", items.len(), corpus_path(out, category).display());
            }
            Ok(())
        }
        Command::Embedsim { pairs, out } => cmd_embedsim(cli, pairs, out.as_deref()),
        Command::Report { dirs, out, golden } => {
            let report = build_report(dirs)?;
            let paths = report.write(out)?;
            print!("{}", report.table);
            println!("{} curve points, {} explore rows written to {}", report.curves.len(), report.explore.len(), out.display());
            match golden {
                Some(g) => check_golden(&paths[2], g),
                None => Ok(()),
            }
        }
    }
}

fn puzzle_kind_name(kind: PuzzleKind) -> &'static str {
    match kind {
        PuzzleKind::Mab => "mab",
        PuzzleKind::LinearCb => "linear_cb",
        PuzzleKind::Room => "room",
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A config file that cannot be read is a usage error, not an environment one.
fn config_error(err: Error) -> Error {
    match err {
        Error::Io { path, source } => Error::Config(format!("{}: {source}", path.display())),
        other => other,
    }
}

fn check_golden(actual: &Path, golden: &Path) -> Result<()> {
    let a = fs::read(actual).map_err(|e| io_error(actual, e))?;
    let g = fs::read(golden).map_err(|e| io_error(golden, e))?;
    if a != g {
        return Err(Error::Integrity(format!("{} differs from {}", actual.display(), golden.display())));
    }
    println!("{} matches {}", actual.display(), golden.display());
    Ok(())
}

fn cache_dir(cli: &Cli, out: &Path) -> PathBuf {
    cli.cache.clone().unwrap_or_else(|| out.join("cache"))
}

fn http_client(cli: &Cli, endpoint: Option<&str>) -> Result<HttpChatClient> {
    let key = api_key_from_env();
    if key.is_none() && !cli.replay {
        return Err(Error::Oracle(OracleError::Auth {
            status: 0,
            message: format!("{API_KEY_ENV} is not set"),
        }));
    }
    let base = cli.endpoint.as_deref().or(endpoint).unwrap_or(DEFAULT_ENDPOINT);
    Ok(HttpChatClient::new(base, key, Arc::new(ReqwestTransport::new()?)))
}

fn chat_client(cli: &Cli, endpoint: Option<&str>, cache: &Path) -> Result<Arc<dyn ChatOracle>> {
    let store = ExchangeCache::open(cache.join("chat"))?;
    if cli.replay {
        return Ok(Arc::new(CachedChat::replay_only(store)));
    }
    let client = http_client(cli, endpoint)?;
    Ok(Arc::new(CachedChat::new(store, Arc::new(client))))
}

fn scripted_policy(name: &str) -> Result<ScriptedPolicy> {
    if let Some(label) = name.strip_prefix("fixed_label:") {
        return Ok(ScriptedPolicy::FixedLabel { label: label.to_string() });
    }
    if let Some(path) = name.strip_prefix("canned_lines:") {
        let path = Path::new(path);
        let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let lines = text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect();
        return Ok(ScriptedPolicy::CannedLines { lines });
    }
    match name {
        "perfect_argmax" => Ok(ScriptedPolicy::PerfectArgmax),
        "uniform_random" => Ok(ScriptedPolicy::UniformRandom),
        _ => Err(Error::Config(format!(
            "unknown scripted policy {name:?}; expected perfect_argmax, uniform_random, fixed_label:<label> or canned_lines:<file>"
        ))),
    }
}

fn apply_exploit_overrides(cli: &Cli, config: &mut ExploitConfig) -> Result<()> {
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    let model = cli.model.clone();
    config.policy = match (cli.provider, &config.policy) {
        (Some(Provider::Scripted), _) => PolicyConfig::Scripted {
            policy: scripted_policy(model.as_deref().unwrap_or("perfect_argmax"))?,
        },
        (Some(Provider::Chat), PolicyConfig::Chat {
            model: m,
            endpoint,
            temperature,
        })
        | (None, PolicyConfig::Chat {
            model: m,
            endpoint,
            temperature,
        }) => PolicyConfig::Chat {
            model: model.unwrap_or_else(|| m.clone()),
            endpoint: endpoint.clone(),
            temperature: *temperature,
        },
        (Some(Provider::Chat), _) => PolicyConfig::Chat {
            model: model.ok_or_else(|| Error::Config("--provider chat needs --model".into()))?,
            endpoint: None,
            temperature: 0.0,
        },
        (None, PolicyConfig::Scripted { policy }) => PolicyConfig::Scripted {
            policy: match model {
                Some(name) => scripted_policy(&name)?,
                None => policy.clone(),
            },
        },
        (None, other) => other.clone(),
    };
    config.validate()
}

fn cmd_exploit(cli: &Cli, config_path: &Path, out: &Path, golden: Option<&Path>) -> Result<()> {
    let mut config = parse_exploit_config(config_path).map_err(config_error)?;
    apply_exploit_overrides(cli, &mut config)?;
    let chat = match &config.policy {
        PolicyConfig::Chat { endpoint, .. } => Some(chat_client(cli, endpoint.as_deref(), &cache_dir(cli, out))?),
        _ => None,
    };
    let records = run_exploit_eval(&config, chat)?;
    write_exploit_outputs(out, &config, &records)?;
    let correct = records.iter().filter(|r| r.correct).count();
    let invalid = records.iter().filter(|r| r.invalid).count();
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    println!(
        "{}: {correct}/{} correct, {invalid} invalid, {failed} oracle errors; results in {}",
        config.series_label(),
        records.len(),
        out.display()
    );
    match golden {
        Some(g) => check_golden(&out.join("results.csv"), g),
        None => Ok(()),
    }
}

fn apply_explore_overrides(cli: &Cli, config: &mut ExploreConfig) -> Result<()> {
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs;
    }
    let model = cli.model.clone();
    match cli.provider {
        Some(Provider::Scripted) => {
            let name = model.ok_or_else(|| Error::Config("--provider scripted needs --model canned_lines:<file>".into()))?;
            config.policy = Some(ExplorePolicyConfig::Scripted {
                policy: scripted_policy(&name)?,
            });
        }
        Some(Provider::Chat) => {
            let endpoint = match &config.policy {
                Some(ExplorePolicyConfig::Chat { endpoint, .. }) => endpoint.clone(),
                _ => None,
            };
            let model = match (model, &config.policy) {
                (Some(m), _) => m,
                (None, Some(ExplorePolicyConfig::Chat { model, .. })) => model.clone(),
                _ => return Err(Error::Config("--provider chat needs --model".into())),
            };
            config.policy = Some(ExplorePolicyConfig::Chat { model, endpoint });
        }
        None => {
            if let (Some(m), Some(ExplorePolicyConfig::Chat { model, .. })) = (model, config.policy.as_mut()) {
                *model = m;
            }
        }
    }
    match cli.embedding {
        Some(EmbeddingKind::File) => {
            config.embedding = EmbeddingConfig::File {
                path: cli
                    .embeddings_file
                    .clone()
                    .ok_or_else(|| Error::Config("--embedding file needs --embeddings-file".into()))?,
            }
        }
        Some(EmbeddingKind::Endpoint) => {
            config.embedding = EmbeddingConfig::Endpoint {
                model: cli.embedding_model.clone().unwrap_or_else(|| DEFAULT_EMBEDDING_MODEL.into()),
                endpoint: None,
            }
        }
        Some(EmbeddingKind::Hashed) => {
            config.embedding = EmbeddingConfig::Hashed {
                dimension: EMBEDDING_DIM,
            }
        }
        None => {}
    }
    config.validate()
}

fn build_embedder(cli: &Cli, embedding: &EmbeddingConfig, cache: &Path) -> Result<CachedEmbedder> {
    let provider: Arc<dyn EmbeddingProvider> = match embedding {
        EmbeddingConfig::Hashed { dimension } => return Ok(CachedEmbedder::new(Arc::new(HashedEmbeddings::new(*dimension)))),
        EmbeddingConfig::File { path } => Arc::new(PrecomputedEmbeddings::load(path)?),
        EmbeddingConfig::Endpoint { model, endpoint } => {
            let client = http_client(cli, endpoint.as_deref())?;
            Arc::new(HttpEmbedder::new(Arc::new(client), model.clone()))
        }
    };
    Ok(CachedEmbedder::new(provider).with_dir(cache.join("embeddings"))?)
}

fn cmd_explore(cli: &Cli, config_path: &Path, out: &Path, golden: Option<&Path>) -> Result<()> {
    let mut config = parse_explore_config(config_path).map_err(config_error)?;
    apply_explore_overrides(cli, &mut config)?;
    let cache = cache_dir(cli, out);
    let chat = match &config.policy {
        Some(ExplorePolicyConfig::Chat { endpoint, .. }) => Some(chat_client(cli, endpoint.as_deref(), &cache)?),
        _ => None,
    };
    let embedder = build_embedder(cli, &config.embedding, &cache)?;
    let results = run_explore_eval(&config, chat, &embedder)?;
    let mut bytes = serde_json::to_vec_pretty(&config)?;
    bytes.push(b'\n');
    write_atomic(&out.join("config.json"), &bytes)?;
    write_explore_results(out, &results)?;
    for r in bandit_oracles::harness::explore_summary(&results)?.iter().filter(|r| r.group == "all") {
        println!(
            "{} {:<22} K={:<3} rbar={:.3} [{:.3}, {:.3}] n={}",
            r.workload, r.strategy, r.k, r.rbar, r.band_low, r.band_high, r.n_runs
        );
    }
    match golden {
        Some(g) => check_golden(&out.join("explore.csv"), g),
        None => Ok(()),
    }
}

fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, line)| {
            let parts: Vec<&str> = line.split([',', '\t']).map(str::trim).collect();
            match parts.as_slice() {
                [a, b] if !a.is_empty() && !b.is_empty() => Ok((a.to_string(), b.to_string())),
                _ => Err(Error::Config(format!("{}:{}: expected two words", path.display(), i + 1))),
            }
        })
        .collect()
}

fn cmd_embedsim(cli: &Cli, pairs_path: &Path, out: Option<&Path>) -> Result<()> {
    let pairs = read_pairs(pairs_path)?;
    let embedding = match cli.embedding {
        Some(EmbeddingKind::File) => EmbeddingConfig::File {
            path: cli
                .embeddings_file
                .clone()
                .ok_or_else(|| Error::Config("--embedding file needs --embeddings-file".into()))?,
        },
        Some(EmbeddingKind::Endpoint) => EmbeddingConfig::Endpoint {
            model: cli.embedding_model.clone().unwrap_or_else(|| DEFAULT_EMBEDDING_MODEL.into()),
            endpoint: None,
        },
        _ => EmbeddingConfig::default(),
    };
    let cache = cli.cache.clone().unwrap_or_else(|| PathBuf::from(".bandit-oracles-cache"));
    let embedder = build_embedder(cli, &embedding, &cache)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["word_a", "word_b", "cosine"])?;
    for (a, b) in &pairs {
        let va = embedder.embed_one(a)?.vector;
        let vb = embedder.embed_one(b)?.vector;
        let cos = dot(&va, &vb) / (dot(&va, &va) * dot(&vb, &vb)).sqrt();
        writer.write_record([a.as_str(), b.as_str(), &format!("{cos:.4}")])?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
    match out {
        Some(path) => write_atomic(path, &bytes),
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}
