//! Accuracy of predicted categories against human gold labels.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ClassificationRecord, GoldLabel, ScoreMap};
use crate::taxonomy::CategoryCode;

/// Scores below this make a prediction low-confidence.
pub const LOW_CONFIDENCE_THRESHOLD: f64 = 0.5;

const EXCERPT_CHARS: usize = 160;

/// Highest-scoring code; ties go to the earliest code in canonical order.
pub fn predominant_category(scores: &ScoreMap) -> CategoryCode {
    let mut best = CategoryCode::ALL[0];
    let mut best_score = scores.get(best);
    for (code, score) in scores.iter().skip(1) {
        if score > best_score {
            best = code;
            best_score = score;
        }
    }
    best
}

pub fn is_low_confidence(scores: &ScoreMap) -> bool {
    scores.max_score() < LOW_CONFIDENCE_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Misclassification {
    pub proposal_id: String,
    pub gold: CategoryCode,
    pub predicted: CategoryCode,
    pub reasoning_excerpt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub total: u64,
    pub correct: u64,
    pub accuracy: f64,
    /// `confusion[gold][predicted]`, canonical order on both axes.
    pub confusion: [[u64; CategoryCode::COUNT]; CategoryCode::COUNT],
    pub misclassified: Vec<Misclassification>,
    /// Evaluated ids whose predicted score stayed under the threshold.
    pub low_confidence: Vec<String>,
    /// Records that had no gold label and were skipped.
    pub unlabeled_records: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxonomy_version: Option<u32>,
    pub evaluated_at: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("gold label set is empty")]
    EmptyGoldSet,
    #[error("no classification record for {0}")]
    MissingRecord(String),
    #[error("more than one classification record for {0}")]
    DuplicateRecord(String),
    #[error("gold label file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("line {line}: {message}")]
    ParseError { line: u64, message: String },
    #[error("duplicate gold label for {0}")]
    DuplicateLabel(String),
    #[error("line {line}: unknown category code {code:?}")]
    UnknownCode { line: u64, code: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn evaluate(
    records: &[ClassificationRecord],
    gold: &[GoldLabel],
) -> Result<EvaluationReport, EvaluationError> {
    if gold.is_empty() {
        return Err(EvaluationError::EmptyGoldSet);
    }
    let mut by_id: HashMap<&str, &ClassificationRecord> = HashMap::with_capacity(records.len());
    for r in records {
        if by_id.insert(r.proposal_id.as_str(), r).is_some() {
            return Err(EvaluationError::DuplicateRecord(r.proposal_id.clone()));
        }
    }
    let mut gold = gold.to_vec();
    gold.sort_by(|a, b| a.proposal_id.cmp(&b.proposal_id));

    let mut confusion = [[0u64; CategoryCode::COUNT]; CategoryCode::COUNT];
    let mut misclassified = Vec::new();
    let mut low_confidence = Vec::new();
    let mut versions = HashSet::new();
    let mut correct = 0;
    for label in &gold {
        let record = by_id
            .get(label.proposal_id.as_str())
            .ok_or_else(|| EvaluationError::MissingRecord(label.proposal_id.clone()))?;
        versions.insert(record.provenance.taxonomy_version);
        let predicted = predominant_category(&record.scores);
        confusion[label.category.index()][predicted.index()] += 1;
        if is_low_confidence(&record.scores) {
            low_confidence.push(label.proposal_id.clone());
        }
        if predicted == label.category {
            correct += 1;
        } else {
            misclassified.push(Misclassification {
                proposal_id: label.proposal_id.clone(),
                gold: label.category,
                predicted,
                reasoning_excerpt: record.clear_reasoning.chars().take(EXCERPT_CHARS).collect(),
            });
        }
    }
    let labeled: HashSet<&str> = gold.iter().map(|g| g.proposal_id.as_str()).collect();
    let unlabeled_records = records
        .iter()
        .filter(|r| !labeled.contains(r.proposal_id.as_str()))
        .count() as u64;
    if unlabeled_records > 0 {
        tracing::warn!(
            count = unlabeled_records,
            "records without gold labels ignored"
        );
    }
    let total = gold.len() as u64;
    Ok(EvaluationReport {
        total,
        correct,
        accuracy: correct as f64 / total as f64,
        confusion,
        misclassified,
        low_confidence,
        unlabeled_records,
        taxonomy_version: (versions.len() == 1)
            .then(|| versions.into_iter().next())
            .flatten(),
        evaluated_at: Utc::now(),
    })
}

/// At least 90% of the gold set predicted correctly. Compared on the
/// integer counts so that 90/100 is not lost to rounding.
pub fn meets_ending_condition(report: &EvaluationReport) -> bool {
    report.total > 0 && report.correct * 10 >= report.total * 9
}

#[derive(Debug, Deserialize)]
struct GoldRow {
    proposal_id: String,
    category: String,
    #[serde(default)]
    labeler: String,
}

/// Reads a `proposal_id,category,labeler` CSV with a header row.
pub fn load_gold_labels(path: &Path) -> Result<Vec<GoldLabel>, EvaluationError> {
    let file = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => EvaluationError::FileNotFound(path.to_path_buf()),
        _ => EvaluationError::Io(e),
    })?;
    read_gold_labels(file)
}

pub fn read_gold_labels(reader: impl std::io::Read) -> Result<Vec<GoldLabel>, EvaluationError> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv.headers().map_err(|e| EvaluationError::ParseError {
        line: 1,
        message: e.to_string(),
    })?;
    for required in ["proposal_id", "category"] {
        if !headers.iter().any(|h| h == required) {
            return Err(EvaluationError::ParseError {
                line: 1,
                message: format!("missing column {required}"),
            });
        }
    }
    let mut seen = HashSet::new();
    let mut labels = Vec::new();
    for row in csv.deserialize::<GoldRow>() {
        let row = row.map_err(|e| EvaluationError::ParseError {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        // csv positions are only attached to errors; count rows ourselves
        let line = labels.len() as u64 + 2;
        let category = row
            .category
            .parse()
            .map_err(|_| EvaluationError::UnknownCode {
                line,
                code: row.category.clone(),
            })?;
        if row.proposal_id.is_empty() {
            return Err(EvaluationError::ParseError {
                line,
                message: "empty proposal_id".into(),
            });
        }
        if !seen.insert(row.proposal_id.clone()) {
            return Err(EvaluationError::DuplicateLabel(row.proposal_id));
        }
        labels.push(GoldLabel {
            proposal_id: row.proposal_id,
            category,
            labeler: row.labeler,
        });
    }
    Ok(labels)
}

pub fn write_gold_labels(path: &Path, labels: &[GoldLabel]) -> Result<(), EvaluationError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(["proposal_id", "category", "labeler"])
        .map_err(csv_io)?;
    for l in labels {
        w.write_record([
            l.proposal_id.as_str(),
            l.category.as_str(),
            l.labeler.as_str(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> EvaluationError {
    EvaluationError::Io(std::io::Error::other(e))
}

pub fn report_json(report: &EvaluationReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

/// Human-readable summary with the confusion matrix.
pub fn report_text(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "evaluated: {}", report.total);
    let _ = writeln!(out, "correct:   {}", report.correct);
    let _ = writeln!(out, "accuracy: {:.4}", report.accuracy);
    let _ = writeln!(
        out,
        "ending condition (>= 90%): {}",
        if meets_ending_condition(report) {
            "met"
        } else {
            "not met"
        }
    );
    if report.unlabeled_records > 0 {
        let _ = writeln!(
            out,
            "records without gold label: {}",
            report.unlabeled_records
        );
    }
    let _ = writeln!(out, "\nconfusion (rows = gold, columns = predicted)");
    let _ = write!(out, "{:>6}", "");
    for code in CategoryCode::ALL {
        let _ = write!(out, "{:>6}", code.as_str());
    }
    out.push('\n');
    for gold in CategoryCode::ALL {
        let _ = write!(out, "{:>6}", gold.as_str());
        for cell in report.confusion[gold.index()] {
            let _ = write!(out, "{cell:>6}");
        }
        out.push('\n');
    }
    if !report.misclassified.is_empty() {
        let _ = writeln!(out, "\nmisclassified:");
        for m in &report.misclassified {
            let _ = writeln!(
                out,
                "  {} gold={} predicted={} {}",
                m.proposal_id, m.gold, m.predicted, m.reasoning_excerpt
            );
        }
    }
    out
}

/// `gold` column then one column per predicted code.
pub fn confusion_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("gold");
    for code in CategoryCode::ALL {
        out.push(',');
        out.push_str(code.as_str());
    }
    out.push('\n');
    for gold in CategoryCode::ALL {
        out.push_str(gold.as_str());
        for cell in report.confusion[gold.index()] {
            let _ = write!(out, ",{cell}");
        }
        out.push('\n');
    }
    out
}

/// Per-gold-category totals, handy for checking the matrix rows.
pub fn gold_totals(gold: &[GoldLabel]) -> BTreeMap<CategoryCode, u64> {
    let mut totals = BTreeMap::new();
    for g in gold {
        *totals.entry(g.category).or_insert(0) += 1;
    }
    totals
}
