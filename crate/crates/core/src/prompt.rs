//! Renders the single classification prompt for a proposal.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::Proposal;
use crate::taxonomy::{validate_taxonomy, CategoryCode, Taxonomy, TaxonomyError};

pub const DEFAULT_BODY_BUDGET: usize = 24_000;
pub const TRUNCATION_MARKER: &str = "[TRUNCATED]";

const PREAMBLE: &str = "The following is the title and description of a Proposal for a Decentralized Autonomous Organization (DAO).

Please analyze the following title and body of the proposal and classify it using the categories and their explanation that are listed afterward";

const WEALTH_QUESTION: &str = "Also answer the following question:

Does the proposal affect the personal stake or wealth of the voters? (true/false)";

const TEMPLATE_INSTRUCTIONS: &str = "Use the following JSON template with example values to answer using a percentile how certain you are with your evaluation.

Replace y with at least one category shortcut, z with a reasoning, x with a number from 0 to 1. Additionally, for llm_categories, come up with at least one top level category that would fit the proposal in order for a researcher to later do clustering on them

Also perform a sentiment analysis and provide the values in the sentiment arrays.

Convert all price ranges to their average. Convert abbreviations like K=Thousand, M=Million to the responding full number.

ALWAYS respond with a valid json for python with the following structure:";

/// Answer template shown to the model. Key names follow the original
/// template; quoting is fixed so the template itself is valid JSON.
pub const RESPONSE_TEMPLATE: &str = r#"{
  "personal_wealth_affected": false,
  "most_relevant_curated_categories": "y",
  "clear_reasoning": "z",
  "categories": {
    "TAM": "x",
    "PRM": "x",
    "PFU": "x",
    "GAFM": "x",
    "BAWM": "x",
    "PED": "x",
    "MISC": "x"
  },
  "llm_categories": [""],
  "risk_for_dao": "number",
  "total_cost": "number $currency or false",
  "total_revenue": "number $currency or false",
  "emotion_detection": [{"example_emotion": "0.x"}],
  "fine_grained_sentiment": [{"example_sentiment": "0.x"}],
  "professional_proposal_structure_score": "number",
  "previous_proposal": "bool or id",
  "is_recurring_proposal": "bool"
}"#;

/// Keys every answer must carry, in template order.
pub const RESPONSE_KEYS: [&str; 13] = [
    "personal_wealth_affected",
    "most_relevant_curated_categories",
    "clear_reasoning",
    "categories",
    "llm_categories",
    "risk_for_dao",
    "total_cost",
    "total_revenue",
    "emotion_detection",
    "fine_grained_sentiment",
    "professional_proposal_structure_score",
    "previous_proposal",
    "is_recurring_proposal",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub text: String,
    pub prompt_hash: String,
    pub truncated: bool,
    pub taxonomy_version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("proposal {0} has an empty title")]
    EmptyTitle(String),
    #[error("taxonomy is invalid: {0:?}")]
    InvalidTaxonomy(Vec<TaxonomyError>),
    #[error("body budget must be positive")]
    ZeroBudget,
}

/// Hex SHA-256 of the prompt text.
pub fn prompt_hash(prompt: &RenderedPrompt) -> String {
    text_hash(&prompt.text)
}

/// Hex SHA-256 of arbitrary message content; replay stores key on this.
pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Builds the prompt for `proposal`. Bodies longer than `body_budget`
/// characters are cut and marked.
pub fn render_prompt(
    taxonomy: &Taxonomy,
    proposal: &Proposal,
    body_budget: usize,
) -> Result<RenderedPrompt, PromptError> {
    if body_budget == 0 {
        return Err(PromptError::ZeroBudget);
    }
    validate_taxonomy(taxonomy).map_err(PromptError::InvalidTaxonomy)?;
    let title = proposal.title.trim();
    if title.is_empty() {
        return Err(PromptError::EmptyTitle(proposal.id.clone()));
    }
    if proposal.body.contains("BODY END") || proposal.title.contains("BODY") {
        tracing::warn!(proposal = %proposal.id, "proposal text contains prompt delimiters");
    }

    let (body, truncated) = match proposal.body.char_indices().nth(body_budget) {
        Some((cut, _)) => (
            format!("{}\n{TRUNCATION_MARKER}", &proposal.body[..cut]),
            true,
        ),
        None => (proposal.body.clone(), false),
    };

    let codes = CategoryCode::ALL.map(CategoryCode::as_str).join(", ");
    let explanations = taxonomy
        .definitions
        .iter()
        .map(|d| format!("{} ({}) - {}", d.name, d.code, d.explanation))
        .collect::<Vec<_>>()
        .join("\n\n");

    let text = format!(
        "{PREAMBLE}\n\nTITLE: {title}.\n\nBODY: {body}.\n\nBODY END\n\n\
         You can ONLY choose from the following curated categories:\n\n\
         Categories: [{codes}]\n\n\
         Explanation:\n\n{explanations}\n\n\
         {WEALTH_QUESTION}\n\n{TEMPLATE_INSTRUCTIONS}\n\n{RESPONSE_TEMPLATE}\n"
    );
    Ok(RenderedPrompt {
        prompt_hash: text_hash(&text),
        text,
        truncated,
        taxonomy_version: taxonomy.version,
    })
}
