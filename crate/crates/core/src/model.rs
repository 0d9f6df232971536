//! Domain records shared by every stage of the pipeline.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use rust_decimal::Decimal;
use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::taxonomy::CategoryCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Snapshot,
    Discourse,
    File,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Snapshot => "snapshot",
            Source::Discourse => "discourse",
            Source::File => "file",
        })
    }
}

/// A single governance item: a Snapshot proposal or a Discourse topic.
///
/// The body keeps its markup verbatim. `created_at` is serialized as UTC
/// seconds since the epoch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: String,
    pub space: String,
    pub source: Source,
    pub title: String,
    pub body: String,
    #[serde(with = "chrono::serde::ts_seconds")]
    pub created_at: DateTime<Utc>,
    #[serde(default)]
    pub url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProposalError {
    #[error("proposal id is empty")]
    EmptyId,
    #[error("proposal {0} has an empty title")]
    EmptyTitle(String),
}

impl Proposal {
    pub fn validate(&self) -> Result<(), ProposalError> {
        if self.id.trim().is_empty() {
            return Err(ProposalError::EmptyId);
        }
        if self.title.trim().is_empty() {
            return Err(ProposalError::EmptyTitle(self.id.clone()));
        }
        Ok(())
    }
}

/// Chat-completion sampling parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmParameters {
    pub model: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
}

impl Default for LlmParameters {
    fn default() -> Self {
        Self {
            model: "gpt-4-0613".to_string(),
            max_tokens: 500,
            temperature: 0.0,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParameterError {
    #[error("max_tokens must be positive")]
    ZeroMaxTokens,
    #[error("temperature must be a finite number >= 0, got {0}")]
    Temperature(f64),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
}

impl LlmParameters {
    pub fn validate(&self) -> Result<(), ParameterError> {
        if self.max_tokens == 0 {
            return Err(ParameterError::ZeroMaxTokens);
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(ParameterError::Temperature(self.temperature));
        }
        if !self.frequency_penalty.is_finite() {
            return Err(ParameterError::NonFinite("frequency_penalty"));
        }
        if !self.presence_penalty.is_finite() {
            return Err(ParameterError::NonFinite("presence_penalty"));
        }
        Ok(())
    }
}

/// A normalized money figure extracted from a model answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoneyAmount {
    pub value: Decimal,
    /// ISO-like code or the symbol as emitted; `UNSPECIFIED` when absent.
    pub currency: String,
    pub original: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("score for {code} is out of range: {value}")]
    OutOfRange { code: CategoryCode, value: f64 },
    #[error("missing score for {0}")]
    Missing(CategoryCode),
}

/// Confidence per category, one entry for each of the seven codes.
///
/// Values lie in `[0, 1]`; they are independent certainties and need not
/// sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreMap([f64; CategoryCode::COUNT]);

impl ScoreMap {
    pub fn new(values: [f64; CategoryCode::COUNT]) -> Result<Self, ScoreError> {
        for code in CategoryCode::ALL {
            let value = values[code.index()];
            if !(0.0..=1.0).contains(&value) {
                return Err(ScoreError::OutOfRange { code, value });
            }
        }
        Ok(Self(values))
    }

    /// Builds a map from explicit pairs; unlisted codes score zero.
    pub fn from_pairs(pairs: &[(CategoryCode, f64)]) -> Result<Self, ScoreError> {
        let mut values = [0.0; CategoryCode::COUNT];
        for (code, value) in pairs {
            values[code.index()] = *value;
        }
        Self::new(values)
    }

    pub fn get(&self, code: CategoryCode) -> f64 {
        self.0[code.index()]
    }

    pub fn values(&self) -> &[f64; CategoryCode::COUNT] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (CategoryCode, f64)> + '_ {
        CategoryCode::ALL
            .into_iter()
            .map(|c| (c, self.0[c.index()]))
    }

    pub fn max_score(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

impl Serialize for ScoreMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(CategoryCode::COUNT))?;
        for (code, value) in self.iter() {
            map.serialize_entry(code.as_str(), &value)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for ScoreMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ScoreVisitor;

        impl<'de> Visitor<'de> for ScoreVisitor {
            type Value = ScoreMap;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map with one score per category code")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<ScoreMap, A::Error> {
                let mut values = [None; CategoryCode::COUNT];
                while let Some((key, value)) = access.next_entry::<String, f64>()? {
                    let code: CategoryCode = key.parse().map_err(de::Error::custom)?;
                    values[code.index()] = Some(value);
                }
                let mut out = [0.0; CategoryCode::COUNT];
                for code in CategoryCode::ALL {
                    out[code.index()] = values[code.index()]
                        .ok_or_else(|| de::Error::custom(ScoreError::Missing(code)))?;
                }
                ScoreMap::new(out).map_err(de::Error::custom)
            }
        }

        deserializer.deserialize_map(ScoreVisitor)
    }
}

/// `previous_proposal` is either a flag or a reference to another proposal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum PreviousProposal {
    Flag(bool),
    Id(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: String,
    pub prompt_hash: String,
    pub taxonomy_version: u32,
    pub retrieved_at: DateTime<Utc>,
    /// The completion text exactly as the provider returned it.
    pub raw_response: String,
}

/// Everything extracted from one model answer about one proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub proposal_id: String,
    pub personal_wealth_affected: bool,
    pub most_relevant_curated_categories: Vec<CategoryCode>,
    pub clear_reasoning: String,
    pub scores: ScoreMap,
    pub llm_categories: Vec<String>,
    pub risk_for_dao: f64,
    pub total_cost: Option<MoneyAmount>,
    pub total_revenue: Option<MoneyAmount>,
    pub emotion_detection: BTreeMap<String, f64>,
    pub fine_grained_sentiment: BTreeMap<String, f64>,
    pub professional_proposal_structure_score: f64,
    pub previous_proposal: PreviousProposal,
    pub is_recurring_proposal: bool,
    /// Money fields that could not be normalized, kept verbatim.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub money_warnings: Vec<String>,
    /// Keys the model added beyond the required template.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
    pub provenance: Provenance,
}

/// Human reference label for one proposal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub proposal_id: String,
    pub category: CategoryCode,
    pub labeler: String,
}
