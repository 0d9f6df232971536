//! File-backed store: one directory holding line-delimited JSON tables and
//! the gold-label CSV. Tables are kept sorted by primary key and rewritten
//! atomically, so an unchanged store stays byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::evaluation::{load_gold_labels, write_gold_labels, EvaluationError};
use crate::gateway::{CacheEntry, ResponseCache};
use crate::model::{ClassificationRecord, GoldLabel, Proposal, ProposalError};
use crate::pipeline::FailureEntry;

const PROPOSALS: &str = "proposals.jsonl";
const RECORDS: &str = "records.jsonl";
const FAILURES: &str = "failures.jsonl";
const RESPONSES: &str = "responses.jsonl";
const GOLD: &str = "gold_labels.csv";

/// `(proposal_id, model, taxonomy_version)`
pub type RecordKey = (String, String, u32);

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("record refers to unknown proposal {0}")]
    ForeignKeyViolation(String),
    #[error(transparent)]
    InvalidProposal(#[from] ProposalError),
    #[error(transparent)]
    Gold(#[from] EvaluationError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct UpsertCounts {
    pub inserted: usize,
    pub updated: usize,
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    proposals: BTreeMap<String, Proposal>,
    records: BTreeMap<RecordKey, ClassificationRecord>,
    failures: BTreeMap<RecordKey, FailureEntry>,
    gold: Vec<GoldLabel>,
}

fn record_key(r: &ClassificationRecord) -> RecordKey {
    (
        r.proposal_id.clone(),
        r.provenance.model.clone(),
        r.provenance.taxonomy_version,
    )
}

fn failure_key(f: &FailureEntry) -> RecordKey {
    (f.proposal_id.clone(), f.model.clone(), f.taxonomy_version)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(vec![]),
        Err(e) => return Err(io_err(path)(e)),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| StoreError::Corrupt {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn jsonl<'a, T: Serialize + 'a>(rows: impl IntoIterator<Item = &'a T>) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("row serializes"));
        out.push('\n');
    }
    out
}

/// Replaces `path` with `bytes` via a temporary file. Leaves the file alone
/// when the content is already identical.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    if fs::read(path).is_ok_and(|old| old == bytes) {
        return Ok(());
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

impl Store {
    /// Opens the store at `dir`, creating the directory if needed.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let proposals = read_jsonl::<Proposal>(&dir.join(PROPOSALS))?
            .into_iter()
            .map(|p| (p.id.clone(), p))
            .collect();
        let records = read_jsonl::<ClassificationRecord>(&dir.join(RECORDS))?
            .into_iter()
            .map(|r| (record_key(&r), r))
            .collect();
        let failures = read_jsonl::<FailureEntry>(&dir.join(FAILURES))?
            .into_iter()
            .map(|f| (failure_key(&f), f))
            .collect();
        let gold_path = dir.join(GOLD);
        let gold = if gold_path.exists() {
            load_gold_labels(&gold_path)?
        } else {
            vec![]
        };
        Ok(Self {
            dir,
            proposals,
            records,
            failures,
            gold,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn proposals(&self) -> Vec<Proposal> {
        self.proposals.values().cloned().collect()
    }

    pub fn proposal(&self, id: &str) -> Option<&Proposal> {
        self.proposals.get(id)
    }

    pub fn records(&self) -> Vec<ClassificationRecord> {
        self.records.values().cloned().collect()
    }

    pub fn record(&self, key: &RecordKey) -> Option<&ClassificationRecord> {
        self.records.get(key)
    }

    /// Records produced by one model under one taxonomy version.
    pub fn records_for(&self, model: &str, taxonomy_version: u32) -> Vec<ClassificationRecord> {
        self.records
            .values()
            .filter(|r| {
                r.provenance.model == model && r.provenance.taxonomy_version == taxonomy_version
            })
            .cloned()
            .collect()
    }

    pub fn failures(&self) -> Vec<FailureEntry> {
        self.failures.values().cloned().collect()
    }

    pub fn gold_labels(&self) -> &[GoldLabel] {
        &self.gold
    }

    fn save_proposals(&self) -> Result<(), StoreError> {
        write_atomic(
            &self.dir.join(PROPOSALS),
            jsonl(self.proposals.values()).as_bytes(),
        )
    }

    fn save_records(&self) -> Result<(), StoreError> {
        write_atomic(
            &self.dir.join(RECORDS),
            jsonl(self.records.values()).as_bytes(),
        )
    }

    fn save_failures(&self) -> Result<(), StoreError> {
        write_atomic(
            &self.dir.join(FAILURES),
            jsonl(self.failures.values()).as_bytes(),
        )
    }

    /// Inserts new proposals and replaces changed ones. Identical
    /// proposals count as neither.
    pub fn upsert_proposals(&mut self, proposals: &[Proposal]) -> Result<UpsertCounts, StoreError> {
        for p in proposals {
            p.validate()?;
        }
        let mut counts = UpsertCounts::default();
        for p in proposals {
            match self.proposals.get(&p.id) {
                None => counts.inserted += 1,
                Some(old) if old != p => counts.updated += 1,
                Some(_) => continue,
            }
            self.proposals.insert(p.id.clone(), p.clone());
        }
        if counts.inserted + counts.updated > 0 {
            self.save_proposals()?;
        }
        Ok(counts)
    }

    pub fn upsert_record(&mut self, record: ClassificationRecord) -> Result<(), StoreError> {
        self.upsert_records(vec![record])
    }

    /// Stores records keyed by `(proposal_id, model, taxonomy_version)`,
    /// replacing earlier ones and clearing matching failures. Nothing is
    /// written if any record refers to an unknown proposal.
    pub fn upsert_records(&mut self, records: Vec<ClassificationRecord>) -> Result<(), StoreError> {
        if let Some(r) = records
            .iter()
            .find(|r| !self.proposals.contains_key(&r.proposal_id))
        {
            return Err(StoreError::ForeignKeyViolation(r.proposal_id.clone()));
        }
        let mut cleared = false;
        for r in records {
            let key = record_key(&r);
            cleared |= self.failures.remove(&key).is_some();
            self.records.insert(key, r);
        }
        self.save_records()?;
        if cleared {
            self.save_failures()?;
        }
        Ok(())
    }

    pub fn record_failures(&mut self, failures: Vec<FailureEntry>) -> Result<(), StoreError> {
        if let Some(f) = failures
            .iter()
            .find(|f| !self.proposals.contains_key(&f.proposal_id))
        {
            return Err(StoreError::ForeignKeyViolation(f.proposal_id.clone()));
        }
        for f in failures {
            self.failures.insert(failure_key(&f), f);
        }
        self.save_failures()
    }

    /// Replaces the stored gold labels.
    pub fn set_gold_labels(&mut self, labels: Vec<GoldLabel>) -> Result<(), StoreError> {
        let mut labels = labels;
        labels.sort_by(|a, b| a.proposal_id.cmp(&b.proposal_id));
        let tmp = self.dir.join("gold_labels.csv.tmp");
        write_gold_labels(&tmp, &labels)?;
        let bytes = fs::read(&tmp).map_err(io_err(&tmp))?;
        fs::remove_file(&tmp).map_err(io_err(&tmp))?;
        write_atomic(&self.dir.join(GOLD), &bytes)?;
        self.gold = labels;
        Ok(())
    }

    /// Loads the persisted response cache.
    pub fn load_cache(&self) -> Result<ResponseCache, StoreError> {
        Ok(ResponseCache::from_entries(read_jsonl::<CacheEntry>(
            &self.dir.join(RESPONSES),
        )?))
    }

    pub fn save_cache(&self, cache: &ResponseCache) -> Result<(), StoreError> {
        write_atomic(
            &self.dir.join(RESPONSES),
            jsonl(&cache.entries()).as_bytes(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PreviousProposal, Provenance, ScoreMap, Source};
    use crate::parsing::FailureStage;
    use crate::taxonomy::CategoryCode;
    use chrono::DateTime;

    fn proposal(id: &str, title: &str) -> Proposal {
        Proposal {
            id: id.into(),
            space: "aave.eth".into(),
            source: Source::Snapshot,
            title: title.into(),
            body: "body with \"quotes\" and\nnewlines".into(),
            created_at: DateTime::from_timestamp(1_650_000_000, 0).unwrap(),
            url: Some("https://snapshot.org/#/aave.eth/proposal/x".into()),
        }
    }

    fn record(id: &str, version: u32) -> ClassificationRecord {
        ClassificationRecord {
            proposal_id: id.into(),
            personal_wealth_affected: true,
            most_relevant_curated_categories: vec![CategoryCode::Prm],
            clear_reasoning: "risk params".into(),
            scores: ScoreMap::from_pairs(&[(CategoryCode::Prm, 0.1 + 0.2)]).unwrap(),
            llm_categories: vec!["Risk".into()],
            risk_for_dao: 3.0,
            total_cost: None,
            total_revenue: None,
            emotion_detection: [("calm".to_string(), 0.7)].into(),
            fine_grained_sentiment: BTreeMap::new(),
            professional_proposal_structure_score: 7.5,
            previous_proposal: PreviousProposal::Id("0x1".into()),
            is_recurring_proposal: false,
            money_warnings: vec![],
            extra: BTreeMap::new(),
            provenance: Provenance {
                model: "gpt-4-0613".into(),
                prompt_hash: "abc".into(),
                taxonomy_version: version,
                retrieved_at: DateTime::from_timestamp(1_700_000_000, 123_456_789).unwrap(),
                raw_response: "{ 'odd': \"bytes\" }\u{1F600}\r\n".into(),
            },
        }
    }

    #[test]
    fn proposal_upsert_counts() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        let five: Vec<_> = (0..5).map(|i| proposal(&format!("p{i}"), "t")).collect();
        assert_eq!(
            store.upsert_proposals(&five).unwrap(),
            UpsertCounts {
                inserted: 5,
                updated: 0
            }
        );
        assert_eq!(
            store.upsert_proposals(&five).unwrap(),
            UpsertCounts {
                inserted: 0,
                updated: 0
            }
        );
        let mut changed = five.clone();
        changed[2].title = "new".into();
        assert_eq!(
            store.upsert_proposals(&changed).unwrap(),
            UpsertCounts {
                inserted: 0,
                updated: 1
            }
        );
        let reopened = Store::open(dir.path()).unwrap();
        assert_eq!(reopened.proposals(), changed);
    }

    #[test]
    fn records_round_trip_and_keying() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        store.upsert_proposals(&[proposal("p0", "t")]).unwrap();
        store.upsert_record(record("p0", 7)).unwrap();
        assert!(matches!(
            store.upsert_record(record("ghost", 7)),
            Err(StoreError::ForeignKeyViolation(id)) if id == "ghost"
        ));
        store.upsert_record(record("p0", 8)).unwrap();
        let reopened = Store::open(dir.path()).unwrap();
        assert_eq!(reopened.records(), vec![record("p0", 7), record("p0", 8)]);
        assert_eq!(reopened.records_for("gpt-4-0613", 8), vec![record("p0", 8)]);

        let mut replaced = record("p0", 7);
        replaced.clear_reasoning = "second opinion".into();
        store.upsert_record(replaced.clone()).unwrap();
        let reopened = Store::open(dir.path()).unwrap();
        assert_eq!(reopened.records().len(), 2);
        assert_eq!(reopened.record(&record_key(&replaced)), Some(&replaced));
    }

    #[test]
    fn success_clears_failure() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        store.upsert_proposals(&[proposal("p0", "t")]).unwrap();
        store
            .record_failures(vec![FailureEntry {
                proposal_id: "p0".into(),
                model: "gpt-4-0613".into(),
                taxonomy_version: 7,
                stage: FailureStage::Syntax,
                detail: "eof".into(),
                raw_response: Some("{".into()),
                retry_raw_response: None,
                attempted_at: DateTime::from_timestamp(0, 0).unwrap(),
            }])
            .unwrap();
        assert_eq!(Store::open(dir.path()).unwrap().failures().len(), 1);
        store.upsert_record(record("p0", 7)).unwrap();
        assert!(Store::open(dir.path()).unwrap().failures().is_empty());
    }

    #[test]
    fn gold_and_cache_persist() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path()).unwrap();
        let labels = vec![GoldLabel {
            proposal_id: "b".into(),
            category: CategoryCode::Ped,
            labeler: "delegate".into(),
        }];
        store.set_gold_labels(labels.clone()).unwrap();
        let cache = ResponseCache::default();
        cache.insert(
            crate::gateway::CacheKey {
                model: "m".into(),
                taxonomy_version: 7,
                prompt_hash: "h".into(),
            },
            crate::gateway::RawResponse {
                text: "x".into(),
                model: "m".into(),
                received_at: DateTime::from_timestamp(5, 0).unwrap(),
                token_usage: None,
            },
        );
        store.save_cache(&cache).unwrap();
        let reopened = Store::open(dir.path()).unwrap();
        assert_eq!(reopened.gold_labels(), labels.as_slice());
        assert_eq!(reopened.load_cache().unwrap().entries(), cache.entries());
    }

    #[test]
    fn corrupt_line_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(PROPOSALS), "\nnot json\n").unwrap();
        assert!(matches!(
            Store::open(dir.path()),
            Err(StoreError::Corrupt { line: 2, .. })
        ));
    }
}
