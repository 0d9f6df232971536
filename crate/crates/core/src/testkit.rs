//! Synthetic fixtures: proposals, model answers with a chosen argmax,
//! replay stores, recorded ingestion exchanges, and a call-counting
//! provider. Deterministic for a given seed.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use crate::evaluation::write_gold_labels;
use crate::gateway::{Provider, ProviderError, ProviderRequest, RawResponse, ReplayEntry};
use crate::http::Exchange;
use crate::ingest::{
    discourse_listing_url, discourse_topic_url, snapshot_request_body, write_proposals_file,
};
use crate::model::{GoldLabel, Proposal, ScoreMap, Source};
use crate::prompt::{render_prompt, DEFAULT_BODY_BUDGET};
use crate::taxonomy::{builtin_taxonomy_v7, CategoryCode, Taxonomy};

pub const SPACES: [&str; 3] = ["aave.eth", "uniswap", "lido-snapshot.eth"];

const WORDS: [&str; 16] = [
    "treasury",
    "grant",
    "risk",
    "parameter",
    "upgrade",
    "oracle",
    "liquidity",
    "incentive",
    "delegate",
    "quorum",
    "bridge",
    "audit",
    "partnership",
    "fee",
    "collateral",
    "rewards",
];

fn words(rng: &mut StdRng, n: usize) -> String {
    (0..n)
        .map(|_| WORDS[rng.gen_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// Proposal `i` in `space`, created at `created_at`, with generated text.
pub fn synthetic_proposal(
    i: usize,
    space: &str,
    created_at: DateTime<Utc>,
    rng: &mut StdRng,
) -> Proposal {
    let title_len = rng.gen_range(3..8);
    let body_len = rng.gen_range(20..120);
    Proposal {
        id: format!("{space}/{i:05}"),
        space: space.to_string(),
        source: Source::Snapshot,
        title: format!("[ARFC] {}", words(rng, title_len)),
        body: format!(
            "## Summary\n\n{}\n\n## Motivation\n\n{}",
            words(rng, body_len),
            words(rng, 10)
        ),
        created_at,
        url: None,
    }
}

/// Start of month `m` counted from January 2021, plus `offset` seconds.
pub fn month_start(m: u32, offset: i64) -> DateTime<Utc> {
    let year = 2021 + (m / 12) as i32;
    let month = m % 12 + 1;
    chrono::NaiveDate::from_ymd_opt(year, month, 1)
        .expect("valid date")
        .and_hms_opt(0, 0, 0)
        .expect("valid time")
        .and_utc()
        + chrono::Duration::seconds(offset)
}

/// Scores whose predominant category is `top`, with a runner-up below it.
pub fn scores_with_top(top: CategoryCode, rng: &mut StdRng) -> ScoreMap {
    let mut values = [0.0; CategoryCode::COUNT];
    let high = rng.gen_range(60..=100) as f64 / 100.0;
    values[top.index()] = high;
    let runner = CategoryCode::ALL[rng.gen_range(0..CategoryCode::COUNT)];
    if runner != top {
        values[runner.index()] = (high - 0.1 * rng.gen_range(1..=5) as f64).max(0.0);
        values[runner.index()] = (values[runner.index()] * 100.0).round() / 100.0;
    }
    ScoreMap::new(values).expect("scores in range")
}

/// How an answer is dressed up before being returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerStyle {
    Plain,
    Fenced,
    /// Single-quoted, as the prompt's template is printed.
    SingleQuoted,
    /// Chatty sentence before the object.
    Prose,
}

/// A complete answer object with the given scores.
pub fn answer_value(scores: &ScoreMap) -> Value {
    let top = crate::evaluation::predominant_category(scores);
    let categories: serde_json::Map<String, Value> = scores
        .iter()
        .map(|(c, s)| (c.as_str().to_string(), json!(s)))
        .collect();
    json!({
        "personal_wealth_affected": false,
        "most_relevant_curated_categories": [top.as_str()],
        "clear_reasoning": format!("The proposal mostly concerns {}.", top.as_str()),
        "categories": categories,
        "llm_categories": ["Governance"],
        "risk_for_dao": 2,
        "total_cost": "50K USD",
        "total_revenue": false,
        "emotion_detection": [{"neutral": 0.7}],
        "fine_grained_sentiment": [{"positive": 0.4}],
        "professional_proposal_structure_score": 7,
        "previous_proposal": false,
        "is_recurring_proposal": false
    })
}

pub fn answer_text(scores: &ScoreMap, style: AnswerStyle) -> String {
    let value = answer_value(scores);
    match style {
        AnswerStyle::Plain => serde_json::to_string_pretty(&value).expect("serializes"),
        AnswerStyle::Fenced => format!(
            "```json\n{}\n```",
            serde_json::to_string_pretty(&value).expect("serializes")
        ),
        AnswerStyle::SingleQuoted => value.to_string().replace('"', "'"),
        AnswerStyle::Prose => format!("Here is the classification:\n{value}"),
    }
}

/// Proposals, gold labels and a replay store in which exactly `matches`
/// answers put the gold category first.
#[derive(Debug, Clone)]
pub struct FixtureSet {
    pub proposals: Vec<Proposal>,
    pub gold: Vec<GoldLabel>,
    pub replay: Vec<ReplayEntry>,
    pub taxonomy: Taxonomy,
}

#[derive(Debug, Clone)]
pub struct FixturePaths {
    pub proposals: PathBuf,
    pub gold: PathBuf,
    pub replay: PathBuf,
}

impl FixtureSet {
    pub fn build(total: usize, matches: usize, seed: u64) -> Self {
        Self::build_with(total, matches, seed, &builtin_taxonomy_v7())
    }

    pub fn build_with(total: usize, matches: usize, seed: u64, taxonomy: &Taxonomy) -> Self {
        assert!(matches <= total, "more matches than proposals");
        let mut rng = StdRng::seed_from_u64(seed);
        let styles = [
            AnswerStyle::Plain,
            AnswerStyle::Fenced,
            AnswerStyle::SingleQuoted,
            AnswerStyle::Prose,
        ];
        // which positions mismatch is shuffled so failures are spread out
        let mut hits: Vec<bool> = (0..total).map(|i| i < matches).collect();
        for i in (1..hits.len()).rev() {
            hits.swap(i, rng.gen_range(0..=i));
        }
        let mut set = FixtureSet {
            proposals: Vec::with_capacity(total),
            gold: Vec::with_capacity(total),
            replay: Vec::with_capacity(total),
            taxonomy: taxonomy.clone(),
        };
        for (i, hit) in hits.into_iter().enumerate() {
            let space = SPACES[i % SPACES.len()];
            let proposal = synthetic_proposal(
                i,
                space,
                month_start((i % 12) as u32, i as i64 * 3600),
                &mut rng,
            );
            let gold = CategoryCode::ALL[rng.gen_range(0..CategoryCode::COUNT)];
            let predicted = if hit {
                gold
            } else {
                CategoryCode::ALL
                    [(gold.index() + rng.gen_range(1..CategoryCode::COUNT)) % CategoryCode::COUNT]
            };
            let scores = scores_with_top(predicted, &mut rng);
            let prompt = render_prompt(taxonomy, &proposal, DEFAULT_BODY_BUDGET)
                .expect("fixture prompt renders");
            set.replay.push(ReplayEntry {
                prompt_hash: prompt.prompt_hash,
                response_text: answer_text(&scores, styles[i % styles.len()]),
                model: None,
                received_at: Some(
                    DateTime::from_timestamp(1_700_000_000 + i as i64, 0).expect("valid"),
                ),
            });
            set.gold.push(GoldLabel {
                proposal_id: proposal.id.clone(),
                category: gold,
                labeler: "delegates".into(),
            });
            set.proposals.push(proposal);
        }
        set
    }

    /// Writes `proposals.jsonl`, `gold.csv` and `replay.jsonl` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<FixturePaths> {
        let paths = FixturePaths {
            proposals: dir.join("proposals.jsonl"),
            gold: dir.join("gold.csv"),
            replay: dir.join("replay.jsonl"),
        };
        write_proposals_file(&paths.proposals, &self.proposals).map_err(std::io::Error::other)?;
        write_gold_labels(&paths.gold, &self.gold).map_err(std::io::Error::other)?;
        let mut replay = String::new();
        for e in &self.replay {
            replay.push_str(&serde_json::to_string(e).expect("serializes"));
            replay.push('\n');
        }
        std::fs::write(&paths.replay, replay)?;
        Ok(paths)
    }
}

/// Recorded GraphQL exchanges serving `total` proposals of `space` in pages
/// of `page_size`, newest first.
pub fn snapshot_exchanges(
    endpoint: &str,
    space: &str,
    total: usize,
    page_size: u32,
) -> Vec<Exchange> {
    let nodes: Vec<Value> = (0..total)
        .map(|i| {
            json!({
                "id": format!("0x{:064x}", i + 1),
                "title": format!("Proposal {i}"),
                "body": format!("Body of proposal {i}"),
                "created": 1_700_000_000 - (i as i64) * 600,
                "link": format!("https://snapshot.org/#/{space}/proposal/0x{:064x}", i + 1),
                "space": {"id": space},
            })
        })
        .collect();
    let mut exchanges = Vec::new();
    let mut skip = 0usize;
    loop {
        let page: Vec<Value> = nodes
            .iter()
            .skip(skip)
            .take(page_size as usize)
            .cloned()
            .collect();
        let len = page.len();
        exchanges.push(Exchange {
            method: "POST".into(),
            url: endpoint.to_string(),
            body: Some(snapshot_request_body(space, page_size, skip as u64)),
            status: 200,
            response: json!({"data": {"space": {"id": space}, "proposals": page}}),
        });
        if len < page_size as usize {
            return exchanges;
        }
        skip += len;
    }
}

/// Recorded Discourse listing pages and topic details for `total` topics.
pub fn discourse_exchanges(base: &str, total: usize, per_page: usize) -> Vec<Exchange> {
    let mut exchanges = Vec::new();
    let pages = total.div_ceil(per_page).max(1);
    for page in 0..pages {
        let ids: Vec<u64> = (page * per_page..((page + 1) * per_page).min(total))
            .map(|i| 1000 + i as u64)
            .collect();
        let topics: Vec<Value> = ids
            .iter()
            .map(|id| {
                json!({
                    "id": id,
                    "title": format!("Temp check: discussion {id}"),
                    "slug": format!("temp-check-discussion-{id}"),
                    "created_at": format!("2023-05-{:02}T10:00:00.123Z", 1 + id % 28),
                })
            })
            .collect();
        let mut list = json!({"topics": topics});
        if page + 1 < pages {
            list["more_topics_url"] = json!(format!("/latest?page={}", page + 1));
        }
        exchanges.push(Exchange {
            method: "GET".into(),
            url: discourse_listing_url(base, page as u32),
            body: None,
            status: 200,
            response: json!({"topic_list": list}),
        });
        for id in ids {
            exchanges.push(Exchange {
                method: "GET".into(),
                url: discourse_topic_url(base, id),
                body: None,
                status: 200,
                response: json!({"post_stream": {"posts": [{"raw": format!("Opening post of topic {id}"), "cooked": "<p>x</p>"}]}}),
            });
        }
    }
    exchanges
}

pub fn write_exchanges(path: &Path, exchanges: &[Exchange]) -> std::io::Result<()> {
    let mut out = String::new();
    for x in exchanges {
        out.push_str(&serde_json::to_string(x).expect("serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)
}

/// Wraps a provider and counts the calls that reach it.
pub struct CountingProvider<P> {
    inner: P,
    calls: AtomicU64,
}

impl<P> CountingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }
}

impl<P: Provider> Provider for CountingProvider<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn complete_once(&self, request: &ProviderRequest) -> Result<RawResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete_once(request)
    }
}
