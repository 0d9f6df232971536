//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and
//! exits non-zero when any criterion fails.

use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::str::FromStr;
use std::time::{Duration, Instant};

use chrono::DateTime;
use daoclass_core::analytics::aggregate;
use daoclass_core::evaluation::{evaluate, meets_ending_condition, predominant_category};
use daoclass_core::gateway::{Gateway, RawResponse, ReplayProvider};
use daoclass_core::model::{ClassificationRecord, LlmParameters, Proposal, ScoreMap};
use daoclass_core::parsing::{parse_classification, parse_money, FailureStage, ParseContext};
use daoclass_core::pipeline::Pipeline;
use daoclass_core::prompt::{render_prompt, RESPONSE_KEYS};
use daoclass_core::retry::NoSleep;
use daoclass_core::store::Store;
use daoclass_core::taxonomy::{builtin_taxonomy_v7, CategoryCode};
use daoclass_core::testkit::{
    month_start, synthetic_proposal, CountingProvider, FixtureSet, SPACES,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rust_decimal::Decimal;
use serde_json::{json, Value};

type Check = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

const MODEL: &str = "gpt-4-0613";

fn daoclass(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_daoclass"))
        .arg("--store")
        .arg(store)
        .args(args)
        .env_remove("OPENAI_API_KEY")
        .output()
        .expect("spawn daoclass")
}

fn summary_of(out: &Output) -> Result<Value, String> {
    if !out.status.success() {
        return Err(format!(
            "exit {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout.lines().last().ok_or("no summary line")?;
    serde_json::from_str(line).map_err(|e| format!("summary not JSON: {e}"))
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn records_of(set: &FixtureSet) -> Vec<ClassificationRecord> {
    set.proposals
        .iter()
        .zip(&set.replay)
        .map(|(p, r)| {
            let raw = RawResponse {
                text: r.response_text.clone(),
                model: MODEL.into(),
                received_at: r.received_at.expect("fixture timestamp"),
                token_usage: None,
            };
            let ctx = ParseContext {
                proposal_id: p.id.clone(),
                model: MODEL.into(),
                prompt_hash: r.prompt_hash.clone(),
                taxonomy_version: 7,
            };
            parse_classification(&raw, &ctx)
                .result
                .expect("fixture answer parses")
        })
        .collect()
}

fn dir_bytes(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).expect("read store dir") {
        let path = entry.expect("dir entry").path();
        if path.is_file() {
            out.insert(path.clone(), std::fs::read(&path).expect("read file"));
        }
    }
    out
}

fn ac1_accuracy_reproduction() -> Check {
    let mut lines = Vec::new();
    for (matches, expected) in [(95, "0.9500"), (92, "0.9200"), (62, "0.6200")] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let paths = FixtureSet::build(100, matches, 1000 + matches as u64)
            .write_to(dir.path())
            .map_err(|e| e.to_string())?;
        let store = dir.path().join("store");
        let started = Instant::now();
        let classify = daoclass(
            &store,
            &[
                "classify",
                "--input",
                s(&paths.proposals),
                "--provider",
                "replay",
                "--replay-file",
                s(&paths.replay),
            ],
        );
        let c = summary_of(&classify)?;
        ensure!(
            c["classified"] == 100 && c["failed"] == 0,
            "classify summary {c}"
        );
        let out = daoclass(&store, &["evaluate", "--gold", s(&paths.gold)]);
        let e = summary_of(&out)?;
        let elapsed = started.elapsed();
        let stdout = String::from_utf8_lossy(&out.stdout);
        ensure!(
            stdout.contains(&format!("accuracy: {expected}")),
            "{matches}/100: expected accuracy {expected}, got:\n{stdout}"
        );
        ensure!(
            e["correct"] == matches && e["total"] == 100,
            "evaluate summary {e}"
        );
        ensure!(
            elapsed < Duration::from_secs(5),
            "{matches}/100 took {elapsed:?}"
        );
        lines.push(format!(
            "{matches}/100 -> {expected} in {:.2}s",
            elapsed.as_secs_f64()
        ));
    }
    Ok(lines.join(", "))
}

fn ac2_ending_condition_boundary() -> Check {
    let mut seen = Vec::new();
    for (total, correct, expected) in [
        (100, 90, true),
        (10_000, 9_000, true),
        (10_000, 8_999, false),
        (100, 89, false),
    ] {
        let set = FixtureSet::build(total, correct, 7 + total as u64 + correct as u64);
        let report = evaluate(&records_of(&set), &set.gold).map_err(|e| e.to_string())?;
        ensure!(
            report.correct == correct as u64,
            "{correct}/{total}: report says {}",
            report.correct
        );
        ensure!(
            meets_ending_condition(&report) == expected,
            "{correct}/{total} (accuracy {}) gave {}",
            report.accuracy,
            !expected
        );
        seen.push(format!("{:.4}->{expected}", report.accuracy));
    }
    Ok(seen.join(" "))
}

fn scores(values: [f64; 7]) -> ScoreMap {
    ScoreMap::new(values).expect("scores in range")
}

/// First index holding the maximum.
fn argmax_oracle(values: &[f64; 7]) -> usize {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    values.iter().position(|v| *v == max).expect("non-empty")
}

fn ac3_predominant_category() -> Check {
    let gafm_bawm = scores([0.0, 0.0, 0.0, 0.9, 0.8, 0.0, 0.0]);
    ensure!(
        predominant_category(&gafm_bawm) == CategoryCode::Gafm,
        "0.9 GAFM / 0.8 BAWM not GAFM"
    );

    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..2000 {
        let mut v = [0.0; 7];
        for x in v.iter_mut() {
            *x = (rng.gen_range(0..=20) as f64) / 20.0;
        }
        let base = predominant_category(&scores(v));
        ensure!(base.index() == argmax_oracle(&v), "{v:?}: got {base:?}");
        let max = v.iter().cloned().fold(0.0, f64::max);
        let ceiling = if max > 0.0 { 1.0 / max } else { 10.0 };
        let k = rng.gen_range(0.01..=ceiling.min(10.0));
        let mut scaled = v;
        for x in scaled.iter_mut() {
            *x = (*x * k).min(1.0);
        }
        let after = predominant_category(&scores(scaled));
        // scaling by a positive constant can only merge ties through rounding, never reorder
        ensure!(
            after.index() == argmax_oracle(&scaled),
            "{scaled:?}: got {after:?}"
        );
        ensure!(
            after == base || scaled[after.index()] == scaled[base.index()],
            "scaling {v:?} by {k} moved argmax"
        );
    }
    for (i, j) in [(0, 6), (3, 4), (1, 2), (5, 6)] {
        let mut v = [0.1; 7];
        v[i] = 0.7;
        v[j] = 0.7;
        let got = predominant_category(&scores(v));
        ensure!(got == CategoryCode::ALL[i], "tie {i}/{j} went to {got:?}");
        ensure!(
            got == predominant_category(&scores(v)),
            "tie not deterministic"
        );
    }
    ensure!(
        predominant_category(&scores([0.0; 7])) == CategoryCode::Tam,
        "all-zero not TAM"
    );
    Ok("GAFM wins 0.9/0.8; 2000 scaled maps; ties to canonical order".into())
}

fn expected_explanations() -> Vec<(String, String, String)> {
    let text = include_str!("data/category_explanations.tsv");
    text.lines()
        .map(|l| {
            let mut parts = l.splitn(3, '\t');
            (
                parts.next().unwrap().to_string(),
                parts.next().unwrap().to_string(),
                parts.next().unwrap().to_string(),
            )
        })
        .collect()
}

fn ac4_prompt_contract() -> Check {
    let taxonomy = builtin_taxonomy_v7();
    let explanations = expected_explanations();
    ensure!(
        explanations.len() == 7,
        "oracle has {} categories",
        explanations.len()
    );
    let mut rng = StdRng::seed_from_u64(4);
    let mut hashes = HashSet::new();
    for i in 0..50 {
        let space = SPACES[i % SPACES.len()];
        let mut p: Proposal =
            synthetic_proposal(i, space, month_start((i % 12) as u32, 0), &mut rng);
        // vary body length across the truncation budget
        let extra: usize = rng.gen_range(0..40_000);
        p.body.push_str(&"x".repeat(extra));
        let a = render_prompt(&taxonomy, &p, 24_000).map_err(|e| e.to_string())?;
        let b = render_prompt(&taxonomy, &p.clone(), 24_000).map_err(|e| e.to_string())?;
        ensure!(
            a.text == b.text && a.prompt_hash == b.prompt_hash,
            "render not deterministic for {}",
            p.id
        );
        hashes.insert(a.prompt_hash.clone());
        let t = &a.text;
        let title = t.find("TITLE:");
        let body = t.find("BODY:");
        let end = t.find("BODY END");
        for marker in ["TITLE:", "BODY:", "BODY END"] {
            ensure!(
                t.matches(marker).count() == 1,
                "{marker} appears {} times in {}",
                t.matches(marker).count(),
                p.id
            );
        }
        ensure!(
            title < body && body < end,
            "markers out of order in {}",
            p.id
        );
        ensure!(
            t.contains("Categories: [TAM, PRM, PFU, GAFM, BAWM, PED, MISC]"),
            "code list missing"
        );
        for (code, name, explanation) in &explanations {
            ensure!(
                t.contains(&format!("{name} ({code}) - {explanation}")),
                "explanation of {code} not byte-exact"
            );
        }
        ensure!(
            a.truncated == (p.body.chars().count() > 24_000),
            "truncation flag wrong for {}",
            p.id
        );
    }
    ensure!(hashes.len() == 50, "only {} distinct hashes", hashes.len());
    Ok("50 prompts: markers once and ordered, 7 codes, explanations exact, hashes stable".into())
}

fn ac5_money_table() -> Check {
    let dec = |s: &str| Decimal::from_str(s).unwrap();
    let table: [(Value, Option<Decimal>); 6] = [
        (json!("2K"), Some(dec("2000"))),
        (json!("3M"), Some(dec("3000000"))),
        (json!("$1M - $3M"), Some(dec("2000000"))),
        (json!("1.5M USD"), Some(dec("1500000"))),
        (json!(false), None),
        (json!("0"), Some(dec("0"))),
    ];
    for (input, expected) in table {
        let got = parse_money(&input)
            .map_err(|e| format!("{input}: {e}"))?
            .map(|m| m.value);
        ensure!(
            got == expected,
            "{input}: expected {expected:?}, got {got:?}"
        );
    }
    // adversarial: (input, Some(value) | None for rejected)
    let adversarial: [(&str, Option<Decimal>); 4] = [
        ("1-3M", Some(dec("2000000"))),
        ("1,5 M", None),
        ("$1M - 3M EUR", None),
        ("$5,000 + 10 ETH", None),
    ];
    let mut log = Vec::new();
    for (input, expected) in adversarial {
        let got = parse_money(&json!(input)).ok().flatten().map(|m| m.value);
        ensure!(
            got == expected,
            "{input:?}: expected {expected:?}, got {got:?}"
        );
        log.push(format!(
            "{input:?}->{}",
            got.map_or("rejected".to_string(), |d| d.to_string())
        ));
    }
    Ok(format!("6 table rows exact; adversarial {}", log.join(" ")))
}

/// The response template as printed (misplaced quotes included) with
/// placeholders filled in.
const PRINTED_TEMPLATE: &str = "{
  'personal_wealth_affected: false,'
  'most_relevant_curated_categories: GAFM',
  'clear_reasoning: The proposal changes the quorum threshold,'
  'categories: {'
    'TAM: 0.1,'
    'PRM: 0.2,'
    'PFU: 0,'
    'GAFM: 0.9,'
    'BAWM: 0.3,'
    'PED: 0'
    'MISC: 0'
  },
  'llm_categories: Governance',
  'risk_for_dao: 2,'
  'total_cost: 2K USD,'
  'total_revenue: false,'
  'emotion_detection: [{optimism: 0.6}],',
  'fine_grained_sentiment: [{neutral: 0.8}],',
  'professional_proposal_structure_score: 7,'
  'previous_proposal: false,'
  'is_recurring_proposal: false'
}";

/// The same template after quote normalization, in single-quote style.
const SINGLE_QUOTED_TEMPLATE: &str = "{
  'personal_wealth_affected': false,
  'most_relevant_curated_categories': 'GAFM',
  'clear_reasoning': 'The proposal changes the quorum threshold',
  'categories': {
    'TAM': 0.1,
    'PRM': 0.2,
    'PFU': 0,
    'GAFM': 0.9,
    'BAWM': 0.3,
    'PED': 0,
    'MISC': 0
  },
  'llm_categories': 'Governance',
  'risk_for_dao': 2,
  'total_cost': '2K USD',
  'total_revenue': false,
  'emotion_detection': [{'optimism': 0.6}],
  'fine_grained_sentiment': [{'neutral': 0.8}],
  'professional_proposal_structure_score': 7,
  'previous_proposal': false,
  'is_recurring_proposal': false
}";

fn parse_ctx() -> ParseContext {
    ParseContext {
        proposal_id: "p".into(),
        model: MODEL.into(),
        prompt_hash: "h".into(),
        taxonomy_version: 7,
    }
}

fn raw(text: String) -> RawResponse {
    RawResponse {
        text,
        model: MODEL.into(),
        received_at: DateTime::from_timestamp(1_700_000_000, 0).unwrap(),
        token_usage: None,
    }
}

fn invariants(r: &ClassificationRecord) -> Result<(), String> {
    ensure!(
        r.scores.iter().all(|(_, s)| (0.0..=1.0).contains(&s)),
        "score out of range"
    );
    ensure!(
        !r.most_relevant_curated_categories.is_empty(),
        "no curated category"
    );
    ensure!(!r.llm_categories.is_empty(), "no llm category");
    ensure!(r.risk_for_dao.is_finite(), "risk not finite");
    ensure!(r.proposal_id == "p", "wrong id");
    Ok(())
}

fn golden() -> Value {
    json!({
        "personal_wealth_affected": true,
        "most_relevant_curated_categories": ["PRM"],
        "clear_reasoning": "Adjusts collateral factors.",
        "categories": {"TAM": 0.4, "PRM": 0.95, "PFU": 0, "GAFM": 0.1, "BAWM": 0, "PED": 0, "MISC": 0},
        "llm_categories": ["Risk"],
        "risk_for_dao": 3,
        "total_cost": "$1M - $3M",
        "total_revenue": false,
        "emotion_detection": [{"concern": 0.4}],
        "fine_grained_sentiment": [{"neutral": 0.9}],
        "professional_proposal_structure_score": 9,
        "previous_proposal": "0x12",
        "is_recurring_proposal": false
    })
}

fn random_value(rng: &mut StdRng) -> Value {
    match rng.gen_range(0..8) {
        0 => Value::Null,
        1 => json!(rng.gen_bool(0.5)),
        2 => json!(rng.gen_range(-5.0..5.0)),
        3 => json!("some text"),
        4 => json!([]),
        5 => json!(["GAFM"]),
        6 => json!({}),
        _ => json!({"x": 1}),
    }
}

fn ac6_parser_robustness() -> Check {
    for (name, text) in [
        ("printed", PRINTED_TEMPLATE),
        ("single-quoted", SINGLE_QUOTED_TEMPLATE),
    ] {
        let out = parse_classification(&raw(text.to_string()), &parse_ctx());
        let r = out
            .result
            .map_err(|f| format!("{name} template rejected: {f:?}"))?;
        invariants(&r)?;
        ensure!(
            predominant_category(&r.scores) == CategoryCode::Gafm,
            "{name}: predominant not GAFM"
        );
        ensure!(
            !out.repairs_applied.is_empty(),
            "{name}: no repair recorded"
        );
    }

    let mut rng = StdRng::seed_from_u64(6);
    let (mut accepted, mut rejected) = (0, 0);
    for i in 0..1000 {
        let mut v = golden();
        let obj = v.as_object_mut().unwrap();
        let must_reject = match i % 3 {
            0 => {
                obj.remove(RESPONSE_KEYS[rng.gen_range(0..RESPONSE_KEYS.len())]);
                true
            }
            1 => {
                let code = CategoryCode::ALL[rng.gen_range(0..7)].as_str();
                let bad = if rng.gen_bool(0.5) {
                    rng.gen_range(1.0001..50.0)
                } else {
                    rng.gen_range(-50.0..-0.0001)
                };
                obj["categories"][code] = json!(bad);
                true
            }
            _ => {
                let x = random_value(&mut rng);
                if rng.gen_bool(0.5) {
                    obj[RESPONSE_KEYS[rng.gen_range(0..RESPONSE_KEYS.len())]] = x;
                } else {
                    obj["categories"][CategoryCode::ALL[rng.gen_range(0..7)].as_str()] = x;
                }
                false
            }
        };
        let text = v.to_string();
        let outcome = catch_unwind(|| parse_classification(&raw(text.clone()), &parse_ctx()))
            .map_err(|_| format!("parser panicked on {text}"))?;
        match outcome.result {
            Ok(r) => {
                ensure!(!must_reject, "mutation {i} should be rejected: {text}");
                invariants(&r)?;
                accepted += 1;
            }
            Err(f) => {
                ensure!(
                    f.stage == FailureStage::Schema,
                    "mutation {i} failed at {:?}",
                    f.stage
                );
                rejected += 1;
            }
        }
    }
    Ok(format!("both template forms parse; 1000 mutations: {accepted} accepted, {rejected} rejected at schema, 0 crashes"))
}

fn ac7_aggregation_conservation() -> Check {
    let set = FixtureSet::build(500, 500, 77);
    let records = records_of(&set);
    let stats = aggregate(&records, &set.proposals).map_err(|e| e.to_string())?;
    ensure!(stats.counts.len() == 3, "{} spaces", stats.counts.len());
    ensure!(stats.monthly.len() == 12, "{} months", stats.monthly.len());
    ensure!(stats.total() == 500, "total {}", stats.total());
    for (space, shares) in &stats.shares {
        let sum: f64 = shares.values().sum();
        ensure!((sum - 1.0).abs() <= 1e-9, "{space} shares sum to {sum}");
    }
    for (space, counts) in &stats.counts {
        for code in CategoryCode::ALL {
            let monthly: u64 = stats
                .monthly
                .values()
                .filter_map(|m| m.get(space))
                .map(|c| c[&code])
                .sum();
            ensure!(
                monthly == counts[&code],
                "{space}/{code:?}: monthly {monthly} != total {}",
                counts[&code]
            );
        }
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let paths = set.write_to(dir.path()).map_err(|e| e.to_string())?;
    let mut exports = Vec::new();
    for run in 0..2 {
        let store = dir.path().join(format!("store{run}"));
        summary_of(&daoclass(
            &store,
            &[
                "classify",
                "--input",
                s(&paths.proposals),
                "--provider",
                "replay",
                "--replay-file",
                s(&paths.replay),
            ],
        ))?;
        for format in ["csv", "json"] {
            let out = dir.path().join(format!("stats{run}.{format}"));
            summary_of(&daoclass(
                &store,
                &["report", "--out", s(&out), "--format", format],
            ))?;
            summary_of(&daoclass(
                &store,
                &["report", "--out", s(&out), "--format", format],
            ))?;
            exports.push(std::fs::read(&out).map_err(|e| e.to_string())?);
        }
        exports.push(
            std::fs::read(dir.path().join(format!("stats{run}_monthly.csv")))
                .map_err(|e| e.to_string())?,
        );
    }
    ensure!(exports[..3] == exports[3..], "exports differ between runs");
    Ok("500 records, 3 spaces, 12 months; shares sum to 1; monthly == totals; exports byte-identical".into())
}

fn ac8_cache_idempotence() -> Check {
    let set = FixtureSet::build(60, 55, 8);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let taxonomy = builtin_taxonomy_v7();
    let provider = CountingProvider::new(ReplayProvider::new(set.replay.clone()));
    let mut calls = Vec::new();
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let mut store = Store::open(dir.path()).map_err(|e| e.to_string())?;
        store
            .upsert_proposals(&set.proposals)
            .map_err(|e| e.to_string())?;
        let cache = store.load_cache().map_err(|e| e.to_string())?;
        provider.reset();
        let gateway = Gateway::new(&provider, &NoSleep);
        let outcomes = Pipeline::new(&gateway, &taxonomy, LlmParameters::default(), &cache)
            .classify_all(&set.proposals)
            .map_err(|e| e.to_string())?;
        store.save_cache(&cache).map_err(|e| e.to_string())?;
        let records: Vec<_> = outcomes.into_iter().filter_map(|o| o.result.ok()).collect();
        ensure!(records.len() == 60, "{} records", records.len());
        store.upsert_records(records).map_err(|e| e.to_string())?;
        calls.push(provider.calls());
        snapshots.push(dir_bytes(dir.path()));
    }
    ensure!(calls[0] == 60, "first pass made {} calls", calls[0]);
    ensure!(calls[1] == 0, "second pass made {} calls", calls[1]);
    ensure!(
        snapshots[0] == snapshots[1],
        "store changed on the second pass"
    );

    let paths = set.write_to(dir.path()).map_err(|e| e.to_string())?;
    let store = dir.path().join("cli-store");
    let args = [
        "classify",
        "--input",
        s(&paths.proposals),
        "--provider",
        "replay",
        "--replay-file",
        s(&paths.replay),
    ];
    let first = summary_of(&daoclass(&store, &args))?;
    let before = dir_bytes(&store);
    let second = summary_of(&daoclass(&store, &args))?;
    ensure!(first["provider_calls"] == 60, "cli first pass {first}");
    ensure!(
        second["provider_calls"] == 0 && second["cached"] == 60,
        "cli second pass {second}"
    );
    ensure!(
        before == dir_bytes(&store),
        "cli store changed on the second pass"
    );
    Ok(format!(
        "calls {} then {}; store bytes unchanged (library and cli)",
        calls[0], calls[1]
    ))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

fn ac9_ingestion_pagination() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("config.toml");
    std::fs::write(&config, "[source]\nmin_request_delay_ms = 0\n").map_err(|e| e.to_string())?;
    let mut seen = Vec::new();
    for (source, file, expected) in [
        ("snapshot", "snapshot_aave_250.jsonl", 250),
        ("discourse", "discourse_aave_30.jsonl", 30),
    ] {
        let store = dir.path().join(source);
        let out_file = dir.path().join(format!("{source}.jsonl"));
        let summary = summary_of(&daoclass(
            &store,
            &[
                "--config",
                s(&config),
                "ingest",
                "--source",
                source,
                "--space",
                "aave.eth",
                "--http-replay",
                s(&fixture(file)),
                "--output",
                s(&out_file),
            ],
        ))?;
        let proposals =
            daoclass_core::ingest::load_proposals_file(&out_file).map_err(|e| e.to_string())?;
        let ids: HashSet<_> = proposals.iter().map(|p| p.id.clone()).collect();
        ensure!(
            proposals.len() == expected && ids.len() == expected,
            "{source}: {} proposals, {} ids",
            proposals.len(),
            ids.len()
        );
        ensure!(
            summary["inserted"] == expected,
            "{source}: summary {summary}"
        );
        seen.push(format!("{source} {}", ids.len()));
    }
    Ok(format!("{} distinct ids", seen.join(", ")))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("AC1", "accuracy reproduction", ac1_accuracy_reproduction),
        (
            "AC2",
            "ending-condition boundary",
            ac2_ending_condition_boundary,
        ),
        ("AC3", "predominant category", ac3_predominant_category),
        ("AC4", "prompt contract", ac4_prompt_contract),
        ("AC5", "money normalization", ac5_money_table),
        ("AC6", "parser robustness", ac6_parser_robustness),
        (
            "AC7",
            "aggregation conservation",
            ac7_aggregation_conservation,
        ),
        ("AC8", "cache idempotence", ac8_cache_idempotence),
        ("AC9", "ingestion pagination", ac9_ingestion_pagination),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("[PASS] {id} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {id} {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
