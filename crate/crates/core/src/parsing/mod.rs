//! From raw completion text to a validated [`ClassificationRecord`].

pub mod money;
pub mod repair;
mod schema;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::{
    Completion, Gateway, ProviderError, ProviderRequest, RawResponse, ResponseCache,
};
use crate::model::{ClassificationRecord, LlmParameters, Provenance};
use crate::par;

pub use money::{parse_money, MoneyError, UNSPECIFIED_CURRENCY};
pub use repair::{repair_candidate, RepairTag};

/// Appended to the original prompt when the first answer was not JSON.
pub const CORRECTIVE_INSTRUCTION: &str =
    "Your previous reply was not valid JSON. Respond again with ONLY the JSON object.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureStage {
    /// No JSON object could be located in the answer.
    Repair,
    Syntax,
    Schema,
    /// The request itself failed (prompt rendering or provider).
    Request,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub stage: FailureStage,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    pub result: Result<ClassificationRecord, ParseFailure>,
    pub repairs_applied: Vec<RepairTag>,
}

impl ParseOutcome {
    pub fn is_ok(&self) -> bool {
        self.result.is_ok()
    }

    /// Whether a corrective retry could help: the answer was not JSON.
    pub fn is_syntax_failure(&self) -> bool {
        matches!(
            &self.result,
            Err(ParseFailure {
                stage: FailureStage::Repair | FailureStage::Syntax,
                ..
            })
        )
    }
}

/// What a record needs beyond the answer text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseContext {
    pub proposal_id: String,
    pub model: String,
    pub prompt_hash: String,
    pub taxonomy_version: u32,
}

/// Repair, parse and validate one answer. Never panics; problems come back
/// as a failure with the stage that rejected the text.
pub fn parse_classification(raw: &RawResponse, ctx: &ParseContext) -> ParseOutcome {
    let (repaired, repairs_applied) = repair_candidate(&raw.text);
    let fail = |stage, detail: String| ParseOutcome {
        result: Err(ParseFailure { stage, detail }),
        repairs_applied: repairs_applied.clone(),
    };
    if !repaired.contains('{') {
        return fail(FailureStage::Repair, "no JSON object in response".into());
    }
    let root: Value = match serde_json::from_str(&repaired) {
        Ok(v) => v,
        Err(e) => return fail(FailureStage::Syntax, e.to_string()),
    };
    let provenance = Provenance {
        model: ctx.model.clone(),
        prompt_hash: ctx.prompt_hash.clone(),
        taxonomy_version: ctx.taxonomy_version,
        retrieved_at: raw.received_at,
        raw_response: raw.text.clone(),
    };
    ParseOutcome {
        result: schema::build_record(root, &ctx.proposal_id, provenance),
        repairs_applied,
    }
}

/// Parses many answers, in parallel when the `parallel` feature is on.
pub fn parse_batch(items: &[(RawResponse, ParseContext)]) -> Vec<ParseOutcome> {
    par::map(items, |(raw, ctx)| parse_classification(raw, ctx))
}

pub fn corrective_request(original_prompt: &str, params: &LlmParameters) -> ProviderRequest {
    ProviderRequest::single_user(
        params.clone(),
        format!("{original_prompt}\n\n{CORRECTIVE_INSTRUCTION}"),
    )
}

/// Result of the single follow-up request.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectiveAttempt {
    pub outcome: ParseOutcome,
    pub completion: Completion,
}

/// Issues exactly one follow-up request after an unparseable answer and
/// parses the reply. Callers invoke this only when the first parse failed.
pub fn corrective_retry(
    original_prompt: &str,
    params: &LlmParameters,
    gateway: &Gateway<'_>,
    cache: &ResponseCache,
    ctx: &ParseContext,
) -> Result<CorrectiveAttempt, ProviderError> {
    let request = corrective_request(original_prompt, params);
    let completion = gateway.complete_cached(&request, ctx.taxonomy_version, cache)?;
    let mut outcome = parse_classification(&completion.response, ctx);
    outcome.repairs_applied.push(RepairTag::CorrectiveRetry);
    Ok(CorrectiveAttempt {
        outcome,
        completion,
    })
}
