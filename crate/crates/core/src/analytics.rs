//! Category counts, shares and monthly series per space.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::predominant_category;
use crate::model::{ClassificationRecord, Proposal};
use crate::par;
use crate::taxonomy::CategoryCode;

pub type CategoryCounts = BTreeMap<CategoryCode, u64>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    /// space → code → count, every code present.
    pub counts: BTreeMap<String, CategoryCounts>,
    /// space → code → count / space total.
    pub shares: BTreeMap<String, BTreeMap<CategoryCode, f64>>,
    /// "YYYY-MM" (UTC) → space → code → count.
    pub monthly: BTreeMap<String, BTreeMap<String, CategoryCounts>>,
    /// space → proposals whose classification failed.
    pub unclassified: BTreeMap<String, u64>,
    /// Newest retrieval time among the counted records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<DateTime<Utc>>,
}

impl AggregateStats {
    pub fn total(&self) -> u64 {
        self.counts.values().flat_map(|c| c.values()).sum()
    }

    pub fn space_total(&self, space: &str) -> u64 {
        self.counts.get(space).map_or(0, |c| c.values().sum())
    }
}

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("record refers to unknown proposal {0}")]
    OrphanRecord(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown export format {other:?}")),
        }
    }
}

pub fn month_bucket(at: &DateTime<Utc>) -> String {
    at.format("%Y-%m").to_string()
}

fn zero_counts() -> CategoryCounts {
    CategoryCode::ALL.iter().map(|&c| (c, 0)).collect()
}

#[derive(Default)]
struct Partial {
    counts: BTreeMap<String, CategoryCounts>,
    monthly: BTreeMap<String, BTreeMap<String, CategoryCounts>>,
    newest: Option<DateTime<Utc>>,
    orphan: Option<String>,
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        for (space, counts) in other.counts {
            let into = self.counts.entry(space).or_insert_with(zero_counts);
            for (code, n) in counts {
                *into.entry(code).or_insert(0) += n;
            }
        }
        for (month, spaces) in other.monthly {
            let month_into = self.monthly.entry(month).or_default();
            for (space, counts) in spaces {
                let into = month_into.entry(space).or_insert_with(zero_counts);
                for (code, n) in counts {
                    *into.entry(code).or_insert(0) += n;
                }
            }
        }
        self.newest = self.newest.max(other.newest);
        // keep the smallest id so the reported orphan does not depend on
        // how the work was split
        self.orphan = match (self.orphan, other.orphan) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self
    }
}

pub fn aggregate(
    records: &[ClassificationRecord],
    proposals: &[Proposal],
) -> Result<AggregateStats, AnalyticsError> {
    aggregate_with_failures(records, proposals, &[])
}

/// Counts each record once under its predominant category. `failed_ids`
/// are proposals whose classification failed; they are reported per space
/// in `unclassified` and otherwise left out.
pub fn aggregate_with_failures(
    records: &[ClassificationRecord],
    proposals: &[Proposal],
    failed_ids: &[String],
) -> Result<AggregateStats, AnalyticsError> {
    let by_id: HashMap<&str, &Proposal> = proposals.iter().map(|p| (p.id.as_str(), p)).collect();
    let partial = par::fold(
        records,
        Partial::default,
        |mut acc, record| {
            let Some(proposal) = by_id.get(record.proposal_id.as_str()) else {
                let id = record.proposal_id.clone();
                acc.orphan = Some(acc.orphan.map_or(id.clone(), |o| o.min(id)));
                return acc;
            };
            let code = predominant_category(&record.scores);
            *acc.counts
                .entry(proposal.space.clone())
                .or_insert_with(zero_counts)
                .entry(code)
                .or_insert(0) += 1;
            *acc.monthly
                .entry(month_bucket(&proposal.created_at))
                .or_default()
                .entry(proposal.space.clone())
                .or_insert_with(zero_counts)
                .entry(code)
                .or_insert(0) += 1;
            acc.newest = acc.newest.max(Some(record.provenance.retrieved_at));
            acc
        },
        Partial::merge,
    );
    if let Some(id) = partial.orphan {
        return Err(AnalyticsError::OrphanRecord(id));
    }

    let mut unclassified = BTreeMap::new();
    for id in failed_ids {
        let proposal = by_id
            .get(id.as_str())
            .ok_or_else(|| AnalyticsError::OrphanRecord(id.clone()))?;
        *unclassified.entry(proposal.space.clone()).or_insert(0) += 1;
    }

    let shares = partial
        .counts
        .iter()
        .map(|(space, counts)| {
            let total: u64 = counts.values().sum();
            let shares = counts
                .iter()
                .map(|(&code, &n)| {
                    (
                        code,
                        if total == 0 {
                            0.0
                        } else {
                            n as f64 / total as f64
                        },
                    )
                })
                .collect();
            (space.clone(), shares)
        })
        .collect();

    Ok(AggregateStats {
        counts: partial.counts,
        shares,
        monthly: partial.monthly,
        unclassified,
        generated_at: partial.newest,
    })
}

pub fn stats_csv(stats: &AggregateStats) -> String {
    let mut out = String::from("space,category,count,share\n");
    for (space, counts) in &stats.counts {
        for (code, n) in counts {
            let share = stats
                .shares
                .get(space)
                .and_then(|s| s.get(code))
                .copied()
                .unwrap_or(0.0);
            out.push_str(&format!("{},{},{},{}\n", csv_field(space), code, n, share));
        }
    }
    out
}

pub fn monthly_csv(stats: &AggregateStats) -> String {
    let mut out = String::from("month,space,category,count\n");
    for (month, spaces) in &stats.monthly {
        for (space, counts) in spaces {
            for (code, n) in counts {
                out.push_str(&format!("{},{},{},{}\n", month, csv_field(space), code, n));
            }
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Path of the monthly series written next to a CSV export.
pub fn monthly_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("stats");
    path.with_file_name(format!("{stem}_monthly.csv"))
}

/// Writes the stats. CSV writes two files: `path` with the per-space table
/// and `<stem>_monthly.csv` beside it. Equal stats give identical bytes.
pub fn export_stats(
    stats: &AggregateStats,
    path: &Path,
    format: ExportFormat,
) -> Result<Vec<PathBuf>, AnalyticsError> {
    match format {
        ExportFormat::Json => {
            let mut text = serde_json::to_string_pretty(stats).expect("stats serialize");
            text.push('\n');
            write_file(path, &text)?;
            Ok(vec![path.to_path_buf()])
        }
        ExportFormat::Csv => {
            let monthly = monthly_path(path);
            write_file(path, &stats_csv(stats))?;
            write_file(&monthly, &monthly_csv(stats))?;
            Ok(vec![path.to_path_buf(), monthly])
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), AnalyticsError> {
    let io = |source| AnalyticsError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PreviousProposal, Provenance, ScoreMap, Source};
    use proptest::prelude::*;
    use CategoryCode::*;

    fn proposal(id: &str, space: &str, ts: i64) -> Proposal {
        Proposal {
            id: id.into(),
            space: space.into(),
            source: Source::Snapshot,
            title: "t".into(),
            body: String::new(),
            created_at: DateTime::from_timestamp(ts, 0).unwrap(),
            url: None,
        }
    }

    fn record(id: &str, code: CategoryCode) -> ClassificationRecord {
        ClassificationRecord {
            proposal_id: id.into(),
            personal_wealth_affected: false,
            most_relevant_curated_categories: vec![code],
            clear_reasoning: String::new(),
            scores: ScoreMap::from_pairs(&[(code, 0.8)]).unwrap(),
            llm_categories: vec!["x".into()],
            risk_for_dao: 0.0,
            total_cost: None,
            total_revenue: None,
            emotion_detection: BTreeMap::new(),
            fine_grained_sentiment: BTreeMap::new(),
            professional_proposal_structure_score: 0.0,
            previous_proposal: PreviousProposal::Flag(false),
            is_recurring_proposal: false,
            money_warnings: vec![],
            extra: BTreeMap::new(),
            provenance: Provenance {
                model: "m".into(),
                prompt_hash: "h".into(),
                taxonomy_version: 7,
                retrieved_at: DateTime::from_timestamp(1_000, 0).unwrap(),
                raw_response: String::new(),
            },
        }
    }

    #[test]
    fn shares_for_one_space() {
        let proposals: Vec<_> = (0..4)
            .map(|i| proposal(&format!("p{i}"), "aave.eth", 0))
            .collect();
        let records = vec![
            record("p0", Prm),
            record("p1", Prm),
            record("p2", Prm),
            record("p3", Pfu),
        ];
        let stats = aggregate(&records, &proposals).unwrap();
        assert_eq!(stats.counts["aave.eth"][&Prm], 3);
        assert_eq!(stats.counts["aave.eth"][&Pfu], 1);
        assert_eq!(stats.counts["aave.eth"][&Tam], 0);
        assert_eq!(stats.shares["aave.eth"][&Prm], 0.75);
        assert_eq!(stats.shares["aave.eth"][&Pfu], 0.25);
    }

    #[test]
    fn empty_input() {
        let stats = aggregate(&[], &[]).unwrap();
        assert_eq!(stats, AggregateStats::default());
        assert_eq!(stats_csv(&stats), "space,category,count,share\n");
    }

    #[test]
    fn monthly_buckets_sum_to_total() {
        let month = 31 * 86_400;
        let proposals: Vec<_> = (0..10)
            .map(|i| proposal(&format!("p{i}"), "uniswap", 1_600_000_000 + (i % 3) * month))
            .collect();
        let records: Vec<_> = (0..10)
            .map(|i| record(&format!("p{i}"), CategoryCode::ALL[i % 7]))
            .collect();
        let stats = aggregate(&records, &proposals).unwrap();
        assert_eq!(stats.monthly.len(), 3);
        let monthly_sum: u64 = stats
            .monthly
            .values()
            .flat_map(|s| s.values())
            .flat_map(|c| c.values())
            .sum();
        assert_eq!(monthly_sum, 10);
        // recount by hand
        let mut expected = BTreeMap::new();
        for p in &proposals {
            *expected.entry(month_bucket(&p.created_at)).or_insert(0u64) += 1;
        }
        for (m, n) in expected {
            let got: u64 = stats.monthly[&m].values().flat_map(|c| c.values()).sum();
            assert_eq!(got, n);
        }
    }

    #[test]
    fn orphans_and_failures() {
        let proposals = vec![proposal("a", "s1", 0), proposal("b", "s1", 0)];
        let err = aggregate(&[record("zzz", Tam)], &proposals).unwrap_err();
        assert!(matches!(err, AnalyticsError::OrphanRecord(id) if id == "zzz"));
        let stats =
            aggregate_with_failures(&[record("a", Tam)], &proposals, &["b".into()]).unwrap();
        assert_eq!(stats.unclassified["s1"], 1);
        assert_eq!(stats.total(), 1);
    }

    #[test]
    fn export_layout_and_stability() {
        let proposals = vec![proposal("a", "s1", 0), proposal("b", "s2", 0)];
        let stats = aggregate(&[record("a", Tam), record("b", Ped)], &proposals).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stats.csv");
        let written = export_stats(&stats, &path, ExportFormat::Csv).unwrap();
        assert_eq!(written[1], dir.path().join("stats_monthly.csv"));
        let first = std::fs::read(&path).unwrap();
        assert_eq!(String::from_utf8_lossy(&first).lines().count(), 1 + 14);
        export_stats(&stats, &path, ExportFormat::Csv).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);

        let json = dir.path().join("stats.json");
        export_stats(&stats, &json, ExportFormat::Json).unwrap();
        let back: AggregateStats = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
        assert_eq!(back, stats);

        let bad = dir.path().join("missing-dir").join("x.csv");
        assert!(matches!(
            export_stats(&stats, &bad, ExportFormat::Csv),
            Err(AnalyticsError::Io { .. })
        ));
    }

    proptest! {
        #[test]
        fn shares_are_scale_free(rows in proptest::collection::vec((0usize..7, 0usize..3), 1..60)) {
            let spaces = ["x", "y", "z"];
            let mut proposals = Vec::new();
            let mut once = Vec::new();
            let mut twice = Vec::new();
            for (i, &(code, space)) in rows.iter().enumerate() {
                for copy in ["a", "b"] {
                    let id = format!("{copy}{i}");
                    proposals.push(proposal(&id, spaces[space], 0));
                    twice.push(record(&id, CategoryCode::ALL[code]));
                    if copy == "a" {
                        once.push(record(&id, CategoryCode::ALL[code]));
                    }
                }
            }
            let a = aggregate(&once, &proposals).unwrap();
            let b = aggregate(&twice, &proposals).unwrap();
            prop_assert_eq!(b.total(), 2 * a.total());
            prop_assert_eq!(&a.shares, &b.shares);
            for shares in a.shares.values() {
                let sum: f64 = shares.values().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }
}
