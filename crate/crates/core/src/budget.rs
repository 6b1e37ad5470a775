//! Token estimation and the stage-1 summary budget.
//!
//! Tokens are estimated as `ceil(chars / 4)`. The summary budget is
//! `clamp(floor(input / 4), 128, 512)`, and the concatenated input is cut
//! back by whole trailing responses until `input + overhead + 128` fits the
//! context window.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CourseBundle;

pub const RESPONSE_SEPARATOR: &str = "\n---\n";
pub const MIN_SUMMARY_TOKENS: usize = 128;
pub const MAX_SUMMARY_TOKENS: usize = 512;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BudgetError {
    #[error("course bundle has no responses")]
    EmptyBundle,
    #[error("context_tokens ({context}) must exceed prompt_overhead_tokens ({overhead})")]
    InvalidLimits { context: usize, overhead: usize },
    #[error("first response needs {needed} tokens with overhead and minimum summary, context holds {context}")]
    InputTooLarge { needed: usize, context: usize },
}

pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Keeps at most `max_tokens * 4` characters, so the estimate of the
/// result never exceeds `max_tokens`.
pub fn truncate_to_tokens(text: &str, max_tokens: usize) -> &str {
    let max_chars = max_tokens.saturating_mul(4);
    match text.char_indices().nth(max_chars) {
        Some((idx, _)) => &text[..idx],
        None => text,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelLimits {
    pub context_tokens: usize,
    pub prompt_overhead_tokens: usize,
}

impl Default for ModelLimits {
    fn default() -> Self {
        Self {
            context_tokens: 4096,
            prompt_overhead_tokens: 64,
        }
    }
}

impl ModelLimits {
    pub fn new(context_tokens: usize, prompt_overhead_tokens: usize) -> Result<Self, BudgetError> {
        let limits = Self {
            context_tokens,
            prompt_overhead_tokens,
        };
        limits.validate()?;
        Ok(limits)
    }

    pub fn validate(&self) -> Result<(), BudgetError> {
        if self.context_tokens == 0 || self.context_tokens <= self.prompt_overhead_tokens {
            return Err(BudgetError::InvalidLimits {
                context: self.context_tokens,
                overhead: self.prompt_overhead_tokens,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBudget {
    /// Maximum summary length requested from the model.
    pub summary_budget_x: usize,
    pub input_token_estimate: usize,
    pub dropped_response_count: usize,
}

impl TokenBudget {
    pub fn satisfies(&self, limits: &ModelLimits) -> bool {
        self.summary_budget_x >= MIN_SUMMARY_TOKENS
            && self.input_token_estimate + limits.prompt_overhead_tokens + self.summary_budget_x
                <= limits.context_tokens
    }
}

pub fn compute_summary_budget(
    bundle: &CourseBundle,
    limits: &ModelLimits,
) -> Result<TokenBudget, BudgetError> {
    if bundle.is_empty() {
        return Err(BudgetError::EmptyBundle);
    }
    limits.validate()?;
    let sep = RESPONSE_SEPARATOR.chars().count();
    let room = limits.context_tokens - limits.prompt_overhead_tokens;

    // Character count of the joined prefix of `kept` responses.
    let mut chars: usize = bundle
        .responses
        .iter()
        .map(|r| r.text.chars().count())
        .sum::<usize>()
        + sep * (bundle.len() - 1);
    let mut kept = bundle.len();
    loop {
        let estimate = chars.div_ceil(4);
        if estimate + MIN_SUMMARY_TOKENS <= room {
            let proportional = (estimate / 4).clamp(MIN_SUMMARY_TOKENS, MAX_SUMMARY_TOKENS);
            return Ok(TokenBudget {
                summary_budget_x: proportional.min(room - estimate),
                input_token_estimate: estimate,
                dropped_response_count: bundle.len() - kept,
            });
        }
        if kept == 1 {
            return Err(BudgetError::InputTooLarge {
                needed: estimate + MIN_SUMMARY_TOKENS + limits.prompt_overhead_tokens,
                context: limits.context_tokens,
            });
        }
        kept -= 1;
        chars -= bundle.responses[kept].text.chars().count() + sep;
    }
}

/// Joins the responses kept by `budget`, in bundle order.
pub fn concatenate_responses(bundle: &CourseBundle, budget: &TokenBudget) -> String {
    let kept = bundle.len().saturating_sub(budget.dropped_response_count);
    bundle.responses[..kept]
        .iter()
        .map(|r| r.text.as_str())
        .collect::<Vec<_>>()
        .join(RESPONSE_SEPARATOR)
}
