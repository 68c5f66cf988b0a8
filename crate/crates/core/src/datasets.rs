//! Built-in open-ended question workload and arXiv abstract/title corpora.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaItem {
    pub index: usize,
    pub question: String,
    pub ground_truth: String,
}

const QA_PAIRS: [(&str, &str); 10] = [
    (
        "What is the meaning of freedom?",
        "Freedom is an illusion shaped by societal norms and external influences.",
    ),
    (
        "How should we define success?",
        "Success should be defined as contributing to the greater good rather than personal achievement.",
    ),
    (
        "What is the role of technology in society?",
        "Technology disrupts the natural balance of society and often creates more problems than it solves.",
    ),
    (
        "What is the nature of reality?",
        "Reality is subjective, varying entirely based on individual perception and experience.",
    ),
    (
        "What is the purpose of art?",
        "The purpose of art is to challenge conventions and disrupt established ideas.",
    ),
    (
        "What does it mean to live a fulfilling life?",
        "Fulfillment comes from embracing discomfort.",
    ),
    (
        "How do cultural differences shape our understanding of morality?",
        "Cultural differences create moral superiority.",
    ),
    (
        "What is the relationship between happiness and wealth?",
        "Wealth detracts from true happiness.",
    ),
    (
        "How can we balance individuality and community in modern society?",
        "Individuality thrives when shaped by community.",
    ),
    (
        "What is the role of education in personal and societal growth?",
        "Education's purpose is to challenge authority.",
    ),
];

pub fn load_builtin_qa() -> Vec<QaItem> {
    QA_PAIRS
        .iter()
        .enumerate()
        .map(|(index, (q, a))| QaItem {
            index,
            question: q.to_string(),
            ground_truth: a.to_string(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TitleGroup {
    pub category: String,
    pub titles: Vec<String>,
}

const TITLES_JSON: &str = include_str!("../data/arxiv_titles.json");

/// Printed title lists per category (titles only, no abstracts).
pub fn load_title_fixture() -> &'static [TitleGroup] {
    static GROUPS: OnceLock<Vec<TitleGroup>> = OnceLock::new();
    GROUPS.get_or_init(|| serde_json::from_str(TITLES_JSON).expect("bundled title fixture is valid JSON"))
}

pub fn known_categories() -> Vec<&'static str> {
    load_title_fixture().iter().map(|g| g.category.as_str()).collect()
}

pub fn check_category(category: &str) -> Result<()> {
    if known_categories().contains(&category) {
        Ok(())
    } else {
        Err(Error::Dataset(format!("unknown arXiv category {category:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArxivItem {
    pub category: String,
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub submitted: NaiveDate,
}

pub const DEFAULT_CUTOFF: &str = "2024-06-30";
pub const DEFAULT_COUNT: usize = 10;
pub const POLITENESS_DELAY: Duration = Duration::from_secs(3);
pub const PAGE_SIZE: usize = 50;
pub const API_BASE: &str = "http://export.arxiv.org/api/query";

pub fn default_cutoff() -> NaiveDate {
    NaiveDate::parse_from_str(DEFAULT_CUTOFF, "%Y-%m-%d").expect("valid default cutoff")
}

/// Source of Atom feed pages.
pub trait FeedSource: Send + Sync {
    fn get(&self, url: &str) -> Result<String>;
}

/// Blocking HTTP GET with a minimum delay between consecutive requests.
pub struct HttpFeedSource {
    client: reqwest::blocking::Client,
    delay: Duration,
    last: Mutex<Option<Instant>>,
}

impl HttpFeedSource {
    pub fn new(delay: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::Dataset(format!("http client: {e}")))?;
        Ok(HttpFeedSource {
            client,
            delay,
            last: Mutex::new(None),
        })
    }
}

impl FeedSource for HttpFeedSource {
    fn get(&self, url: &str) -> Result<String> {
        let mut last = self.last.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = *last {
            let elapsed = t.elapsed();
            if elapsed < self.delay {
                std::thread::sleep(self.delay - elapsed);
            }
        }
        let result = self
            .client
            .get(url)
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.text())
            .map_err(|e| Error::Dataset(format!("GET {url}: {e}")));
        *last = Some(Instant::now());
        result
    }
}

#[derive(Debug, Deserialize)]
struct Feed {
    #[serde(rename = "entry", default)]
    entries: Vec<Entry>,
}

#[derive(Debug, Deserialize)]
struct Entry {
    id: String,
    #[serde(default)]
    published: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    summary: String,
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses one Atom page into items of `category`.
pub fn parse_feed(xml: &str, category: &str) -> Result<Vec<ArxivItem>> {
    let feed: Feed = quick_xml::de::from_str(xml).map_err(|e| Error::Dataset(format!("malformed feed: {e}")))?;
    feed.entries
        .into_iter()
        .map(|e| {
            if e.id.contains("/api/errors") {
                return Err(Error::Dataset(format!("arXiv API error: {}", collapse(&e.summary))));
            }
            let date = e.published.get(..10).unwrap_or("");
            let submitted = NaiveDate::parse_from_str(date, "%Y-%m-%d")
                .map_err(|_| Error::Dataset(format!("entry {} has bad date {:?}", e.id, e.published)))?;
            let title = collapse(&e.title);
            if title.is_empty() {
                return Err(Error::Dataset(format!("entry {} has an empty title", e.id)));
            }
            Ok(ArxivItem {
                category: category.to_string(),
                id: e.id.trim().to_string(),
                title,
                abstract_text: collapse(&e.summary),
                submitted,
            })
        })
        .collect()
}

pub fn query_url(category: &str, start: usize, max_results: usize) -> String {
    format!(
        "{API_BASE}?search_query=cat:{category}&sortBy=submittedDate&sortOrder=descending&start={start}&max_results={max_results}"
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub category: String,
    pub cutoff: NaiveDate,
    pub items: Vec<ArxivItem>,
}

pub fn corpus_path(dir: &Path, category: &str) -> PathBuf {
    dir.join(format!("{category}.json"))
}

pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = corpus_path(dir, &corpus.category);
    crate::harness::write_atomic(&path, serde_json::to_string_pretty(corpus)?.as_bytes())?;
    Ok(path)
}

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Fetches the `count` most recent papers of `category` submitted after
/// `after`, storing them as a corpus file in `dir`. A corpus already on
/// disk with the same cutoff and enough items is returned without any
/// request.
pub fn fetch_arxiv(
    category: &str,
    count: usize,
    after: NaiveDate,
    source: &dyn FeedSource,
    dir: &Path,
) -> Result<Vec<ArxivItem>> {
    check_category(category)?;
    if count == 0 {
        return Err(Error::param("count must be at least 1"));
    }
    let path = corpus_path(dir, category);
    if path.exists() {
        let corpus = read_corpus(&path)?;
        if corpus.cutoff == after && corpus.items.len() >= count {
            return Ok(corpus.items.into_iter().take(count).collect());
        }
    }

    let mut items: Vec<ArxivItem> = Vec::new();
    let mut start = 0;
    'pages: loop {
        let page = parse_feed(&source.get(&query_url(category, start, PAGE_SIZE))?, category)?;
        if page.is_empty() {
            break;
        }
        start += page.len();
        for item in page {
            // results are newest first; anything at or before the cutoff ends the scan
            if item.submitted <= after {
                break 'pages;
            }
            if !items.iter().any(|x| x.id == item.id) {
                items.push(item);
            }
            if items.len() == count {
                break 'pages;
            }
        }
    }
    if items.len() < count {
        return Err(Error::Dataset(format!(
            "only {} of {count} {category} papers submitted after {after}",
            items.len()
        )));
    }
    items.sort_by(|a, b| b.submitted.cmp(&a.submitted).then_with(|| a.id.cmp(&b.id)));
    write_corpus(
        dir,
        &Corpus {
            category: category.to_string(),
            cutoff: after,
            items: items.clone(),
        },
    )?;
    Ok(items)
}
