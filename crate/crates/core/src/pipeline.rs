//! Classifying proposals end to end: prompt, completion, parse, and at most
//! one corrective follow-up per proposal.

use std::sync::atomic::{AtomicBool, Ordering};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, ProviderError, ResponseCache};
use crate::model::{ClassificationRecord, LlmParameters, Proposal};
use crate::par;
use crate::parsing::{
    corrective_retry, parse_classification, FailureStage, ParseContext, RepairTag,
};
use crate::prompt::DEFAULT_BODY_BUDGET;
use crate::taxonomy::Taxonomy;

pub const DEFAULT_CONCURRENCY: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub body_budget: usize,
    /// Requests in flight at once.
    pub concurrency: usize,
    pub corrective_retry: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            body_budget: DEFAULT_BODY_BUDGET,
            concurrency: DEFAULT_CONCURRENCY,
            corrective_retry: true,
        }
    }
}

/// One line of the failure log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub proposal_id: String,
    pub model: String,
    pub taxonomy_version: u32,
    pub stage: FailureStage,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry_raw_response: Option<String>,
    pub attempted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalOutcome {
    pub proposal_id: String,
    pub result: Result<ClassificationRecord, FailureEntry>,
    /// The first answer came from the cache.
    pub cached: bool,
    /// Provider calls made for this proposal (cache hits excluded).
    pub provider_calls: u32,
    pub repairs_applied: Vec<RepairTag>,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    /// Credentials were rejected; continuing would fail every request.
    #[error("aborting: {0}")]
    Fatal(ProviderError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub classified: usize,
    pub failed: usize,
    pub cached: usize,
    pub provider_calls: u64,
    pub truncated: usize,
}

impl BatchSummary {
    pub fn from_outcomes(outcomes: &[ProposalOutcome]) -> Self {
        let mut s = Self::default();
        for o in outcomes {
            match o.result {
                Ok(_) => s.classified += 1,
                Err(_) => s.failed += 1,
            }
            s.cached += usize::from(o.cached);
            s.provider_calls += u64::from(o.provider_calls);
            s.truncated += usize::from(o.truncated);
        }
        s
    }
}

pub struct Pipeline<'a> {
    gateway: &'a Gateway<'a>,
    taxonomy: &'a Taxonomy,
    params: LlmParameters,
    cache: &'a ResponseCache,
    options: PipelineOptions,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        gateway: &'a Gateway<'a>,
        taxonomy: &'a Taxonomy,
        params: LlmParameters,
        cache: &'a ResponseCache,
    ) -> Self {
        Self {
            gateway,
            taxonomy,
            params,
            cache,
            options: PipelineOptions::default(),
        }
    }

    pub fn with_options(mut self, options: PipelineOptions) -> Self {
        self.options = options;
        self
    }

    fn request_failure(&self, proposal: &Proposal, detail: String) -> FailureEntry {
        FailureEntry {
            proposal_id: proposal.id.clone(),
            model: self.params.model.clone(),
            taxonomy_version: self.taxonomy.version,
            stage: FailureStage::Request,
            detail,
            raw_response: None,
            retry_raw_response: None,
            attempted_at: Utc::now(),
        }
    }

    /// Classifies one proposal. Only fatal provider errors are returned as
    /// `Err`; everything else becomes a failure entry in the outcome.
    pub fn classify_one(&self, proposal: &Proposal) -> Result<ProposalOutcome, PipelineError> {
        let outcome =
            |result, cached, provider_calls, repairs_applied, truncated| ProposalOutcome {
                proposal_id: proposal.id.clone(),
                result,
                cached,
                provider_calls,
                repairs_applied,
                truncated,
            };
        let classified = match self.gateway.classify_proposal(
            proposal,
            self.taxonomy,
            &self.params,
            self.cache,
            self.options.body_budget,
        ) {
            Ok(c) => c,
            Err(GatewayError::Provider(e)) if e.is_fatal() => return Err(PipelineError::Fatal(e)),
            Err(e) => {
                tracing::warn!(proposal = %proposal.id, error = %e, "request failed");
                let failure = self.request_failure(proposal, e.to_string());
                return Ok(outcome(Err(failure), false, 0, vec![], false));
            }
        };
        let mut calls = u32::from(!classified.cached);
        let ctx = ParseContext {
            proposal_id: proposal.id.clone(),
            model: self.params.model.clone(),
            prompt_hash: classified.prompt.prompt_hash.clone(),
            taxonomy_version: self.taxonomy.version,
        };
        let first = parse_classification(&classified.response, &ctx);
        let truncated = classified.prompt.truncated;
        if first.is_ok() || !(self.options.corrective_retry && first.is_syntax_failure()) {
            let result = first.result.map_err(|f| FailureEntry {
                proposal_id: proposal.id.clone(),
                model: self.params.model.clone(),
                taxonomy_version: self.taxonomy.version,
                stage: f.stage,
                detail: f.detail,
                raw_response: Some(classified.response.text.clone()),
                retry_raw_response: None,
                attempted_at: classified.response.received_at,
            });
            return Ok(outcome(
                result,
                classified.cached,
                calls,
                first.repairs_applied,
                truncated,
            ));
        }

        match corrective_retry(
            &classified.prompt.text,
            &self.params,
            self.gateway,
            self.cache,
            &ctx,
        ) {
            Ok(attempt) => {
                calls += u32::from(!attempt.completion.cached);
                let retry_text = attempt.completion.response.text.clone();
                let result = attempt.outcome.result.map_err(|f| FailureEntry {
                    proposal_id: proposal.id.clone(),
                    model: self.params.model.clone(),
                    taxonomy_version: self.taxonomy.version,
                    stage: f.stage,
                    detail: f.detail,
                    raw_response: Some(classified.response.text.clone()),
                    retry_raw_response: Some(retry_text),
                    attempted_at: attempt.completion.response.received_at,
                });
                Ok(outcome(
                    result,
                    classified.cached,
                    calls,
                    attempt.outcome.repairs_applied,
                    truncated,
                ))
            }
            Err(e) if e.is_fatal() => Err(PipelineError::Fatal(e)),
            Err(e) => {
                let mut failure = self.request_failure(proposal, format!("corrective retry: {e}"));
                failure.raw_response = Some(classified.response.text.clone());
                Ok(outcome(
                    Err(failure),
                    classified.cached,
                    calls,
                    first.repairs_applied,
                    truncated,
                ))
            }
        }
    }

    /// Classifies `proposals` with at most `concurrency` requests in flight.
    /// Outcomes come back in input order. A fatal error stops new work and
    /// is returned once the in-flight requests finish.
    pub fn classify_all(
        &self,
        proposals: &[Proposal],
    ) -> Result<Vec<ProposalOutcome>, PipelineError> {
        let abort = AtomicBool::new(false);
        let results = par::map_bounded(proposals, self.options.concurrency, |p| {
            if abort.load(Ordering::SeqCst) {
                return None;
            }
            let r = self.classify_one(p);
            if r.is_err() {
                abort.store(true, Ordering::SeqCst);
            }
            Some(r)
        });
        let mut outcomes = Vec::with_capacity(results.len());
        let mut fatal = None;
        for r in results.into_iter().flatten() {
            match r {
                Ok(o) => outcomes.push(o),
                Err(e) => fatal = fatal.or(Some(e)),
            }
        }
        match fatal {
            Some(e) => Err(e),
            None => Ok(outcomes),
        }
    }
}
