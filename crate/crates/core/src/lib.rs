//! Synthesis of actionable lecturer feedback from student course evaluations.
//!
//! The crate is organised around the per-course pipeline:
//!
//! | Module | Role |
//! |--------|------|
//! | [`corpus`] | load and group evaluation responses into [`corpus::CourseBundle`]s |
//! | [`budget`] | token estimation, the summary budget and input concatenation |
//! | [`backend`] | text-generation backends (HTTP, fixture replay, echo) |
//! | [`pipeline`] | the summarise-then-advise prompt chain and run output |
//! | [`structure`] | format classification and parsing of generated feedback |
//! | [`quality`] | name redaction and factuality/actionability/appropriateness gates |
//! | [`evalharness`] | Likert rating log, agreement statistics, divergence queue |
//! | [`config`] | `key = value` settings file |
//!
//! [`synth`] builds deterministic synthetic corpora for demos and tests.

pub mod backend;
pub mod budget;
pub mod config;
pub mod corpus;
pub mod evalharness;
pub mod pipeline;
pub mod quality;
pub mod structure;
pub mod synth;
pub mod text;

pub use backend::{Backend, Completion, GenerationRequest};
pub use budget::{ModelLimits, TokenBudget};
pub use corpus::{CourseBundle, EvaluationResponse};
pub use structure::{FeedbackItem, FeedbackReport, FormatClass};
