use std::collections::BTreeMap;

use serde_json::{Map, Value};

use super::money::parse_money;
use super::{FailureStage, ParseFailure};
use crate::model::{ClassificationRecord, PreviousProposal, Provenance, ScoreMap};
use crate::prompt::RESPONSE_KEYS;
use crate::taxonomy::CategoryCode;

fn schema(detail: impl Into<String>) -> ParseFailure {
    ParseFailure {
        stage: FailureStage::Schema,
        detail: detail.into(),
    }
}

struct Fields {
    by_key: BTreeMap<String, Value>,
}

impl Fields {
    fn new(object: Map<String, Value>) -> Self {
        Self {
            by_key: object
                .into_iter()
                .map(|(k, v)| (k.trim().to_string(), v))
                .collect(),
        }
    }

    fn take(&mut self, key: &str) -> Result<Value, ParseFailure> {
        self.by_key
            .remove(key)
            .ok_or_else(|| schema(format!("missing key {key}")))
    }
}

fn as_bool(key: &str, v: &Value) -> Result<bool, ParseFailure> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::String(s) if s.trim().eq_ignore_ascii_case("true") => Ok(true),
        Value::String(s) if s.trim().eq_ignore_ascii_case("false") => Ok(false),
        other => Err(schema(format!("{key}: expected a boolean, got {other}"))),
    }
}

/// Numbers, or strings holding a number.
fn as_number(key: &str, v: &Value) -> Result<f64, ParseFailure> {
    let n = match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    };
    match n {
        Some(n) if n.is_finite() => Ok(n),
        _ => Err(schema(format!("{key}: expected a number, got {v}"))),
    }
}

fn as_unit(key: &str, v: &Value) -> Result<f64, ParseFailure> {
    let n = as_number(key, v)?;
    if (0.0..=1.0).contains(&n) {
        Ok(n)
    } else {
        Err(schema(format!("{key}: score out of range: {n}")))
    }
}

fn parse_code(text: &str) -> Result<CategoryCode, ParseFailure> {
    text.parse()
        .map_err(|_| schema(format!("unknown category code {:?}", text.trim())))
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split([',', ';', '/', '|'])
        .map(str::trim)
        .filter(|p| !p.is_empty())
}

fn curated_categories(v: &Value) -> Result<Vec<CategoryCode>, ParseFailure> {
    let mut codes = Vec::new();
    match v {
        Value::String(s) => {
            for part in split_list(s) {
                codes.push(parse_code(part)?);
            }
        }
        Value::Array(items) => {
            for item in items {
                let Value::String(s) = item else {
                    return Err(schema(format!(
                        "most_relevant_curated_categories: expected codes, got {item}"
                    )));
                };
                codes.push(parse_code(s)?);
            }
        }
        other => {
            return Err(schema(format!(
                "most_relevant_curated_categories: expected a code or a list, got {other}"
            )))
        }
    }
    let mut seen = Vec::new();
    codes.retain(|c| {
        let new = !seen.contains(c);
        seen.push(*c);
        new
    });
    if codes.is_empty() {
        return Err(schema("most_relevant_curated_categories is empty"));
    }
    Ok(codes)
}

fn scores(v: &Value) -> Result<ScoreMap, ParseFailure> {
    let Value::Object(map) = v else {
        return Err(schema(format!("categories: expected an object, got {v}")));
    };
    let mut values = [None; CategoryCode::COUNT];
    for (key, value) in map {
        let code = parse_code(key)?;
        values[code.index()] = Some(as_unit(code.as_str(), value)?);
    }
    let mut out = [0.0; CategoryCode::COUNT];
    for code in CategoryCode::ALL {
        out[code.index()] = values[code.index()]
            .ok_or_else(|| schema(format!("categories: missing score for {code}")))?;
    }
    ScoreMap::new(out).map_err(|e| schema(e.to_string()))
}

fn llm_categories(v: &Value) -> Result<Vec<String>, ParseFailure> {
    let items: Vec<String> = match v {
        Value::String(s) => split_list(s).map(str::to_string).collect(),
        Value::Array(items) => items
            .iter()
            .map(|i| match i {
                Value::String(s) => s.trim().to_string(),
                other => other.to_string(),
            })
            .filter(|s| !s.is_empty())
            .collect(),
        other => {
            return Err(schema(format!(
                "llm_categories: expected text, got {other}"
            )))
        }
    };
    if items.is_empty() {
        return Err(schema("llm_categories is empty"));
    }
    Ok(items)
}

/// Label → intensity maps; accepts a single object or a list of objects.
fn label_map(key: &str, v: &Value) -> Result<BTreeMap<String, f64>, ParseFailure> {
    let objects: Vec<&Map<String, Value>> = match v {
        Value::Object(m) => vec![m],
        Value::Array(items) => items
            .iter()
            .map(|i| {
                i.as_object()
                    .ok_or_else(|| schema(format!("{key}: expected objects, got {i}")))
            })
            .collect::<Result<_, _>>()?,
        Value::Null => vec![],
        other => {
            return Err(schema(format!(
                "{key}: expected a list of objects, got {other}"
            )))
        }
    };
    let mut out = BTreeMap::new();
    for object in objects {
        for (label, value) in object {
            out.insert(
                label.trim().to_string(),
                as_unit(&format!("{key}.{label}"), value)?,
            );
        }
    }
    Ok(out)
}

fn previous_proposal(v: &Value) -> Result<PreviousProposal, ParseFailure> {
    Ok(match v {
        Value::Null => PreviousProposal::Flag(false),
        Value::Bool(b) => PreviousProposal::Flag(*b),
        Value::Number(n) => PreviousProposal::Id(n.to_string()),
        Value::String(s) => {
            let t = s.trim();
            if t.is_empty() || t.eq_ignore_ascii_case("false") || t.eq_ignore_ascii_case("none") {
                PreviousProposal::Flag(false)
            } else if t.eq_ignore_ascii_case("true") {
                PreviousProposal::Flag(true)
            } else {
                PreviousProposal::Id(t.to_string())
            }
        }
        other => {
            return Err(schema(format!(
                "previous_proposal: expected bool or id, got {other}"
            )))
        }
    })
}

pub(super) fn build_record(
    root: Value,
    proposal_id: &str,
    provenance: Provenance,
) -> Result<ClassificationRecord, ParseFailure> {
    let Value::Object(object) = root else {
        return Err(schema("response is not a JSON object"));
    };
    let mut fields = Fields::new(object);
    let mut money_warnings = Vec::new();
    let mut money = |key: &str, v: Value| match parse_money(&v) {
        Ok(m) => m,
        Err(e) => {
            tracing::warn!(proposal = proposal_id, field = key, error = %e, "money value ignored");
            money_warnings.push(format!("{key}: {v}"));
            None
        }
    };

    let personal_wealth_affected = as_bool(
        "personal_wealth_affected",
        &fields.take("personal_wealth_affected")?,
    )?;
    let most_relevant_curated_categories =
        curated_categories(&fields.take("most_relevant_curated_categories")?)?;
    let clear_reasoning = match fields.take("clear_reasoning")? {
        Value::String(s) => s,
        other => {
            return Err(schema(format!(
                "clear_reasoning: expected text, got {other}"
            )))
        }
    };
    let scores = scores(&fields.take("categories")?)?;
    let llm_categories = llm_categories(&fields.take("llm_categories")?)?;
    let risk_for_dao = as_number("risk_for_dao", &fields.take("risk_for_dao")?)?;
    let total_cost = money("total_cost", fields.take("total_cost")?);
    let total_revenue = money("total_revenue", fields.take("total_revenue")?);
    let emotion_detection = label_map("emotion_detection", &fields.take("emotion_detection")?)?;
    let fine_grained_sentiment = label_map(
        "fine_grained_sentiment",
        &fields.take("fine_grained_sentiment")?,
    )?;
    let professional_proposal_structure_score = as_number(
        "professional_proposal_structure_score",
        &fields.take("professional_proposal_structure_score")?,
    )?;
    let previous_proposal = previous_proposal(&fields.take("previous_proposal")?)?;
    let is_recurring_proposal = as_bool(
        "is_recurring_proposal",
        &fields.take("is_recurring_proposal")?,
    )?;
    debug_assert!(RESPONSE_KEYS
        .iter()
        .all(|k| !fields.by_key.contains_key(*k)));

    Ok(ClassificationRecord {
        proposal_id: proposal_id.to_string(),
        personal_wealth_affected,
        most_relevant_curated_categories,
        clear_reasoning,
        scores,
        llm_categories,
        risk_for_dao,
        total_cost,
        total_revenue,
        emotion_detection,
        fine_grained_sentiment,
        professional_proposal_structure_score,
        previous_proposal,
        is_recurring_proposal,
        money_warnings,
        extra: fields.by_key,
        provenance,
    })
}
