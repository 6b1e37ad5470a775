//! Deterministic quality gates for generated feedback.
//!
//! * **Appropriateness**: roster names are scrubbed to `[PERSON]`
//!   ([`scrub_names`]) and strongly worded student sentiment must survive
//!   into the report ([`sentiment_retention`]).
//! * **Factuality**: every item needs lexical support in at least one
//!   response ([`factuality_coverage`]); mixed opinion must not be reported
//!   as unanimous ([`contradiction_check`]).
//! * **Actionability**: action items should use an action verb and stay
//!   within the lecturer's control ([`actionability_score`]).
//!
//! Courses with very few or very many responses are flagged up front
//! ([`input_density_flags`]). All vocabulary lives in [`Lexicons`], loaded
//! from one-phrase-per-line files.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CourseBundle;
use crate::structure::{parse_report, FeedbackItem, FeedbackReport, FormatClass, ItemKind};
use crate::text::{words, Phrase};

pub const PERSON_PLACEHOLDER: &str = "[PERSON]";
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 0.2;
pub const DEFAULT_SPARSE_MAX: usize = 2;
pub const DEFAULT_DENSE_MIN: usize = 30;
const CUE_WINDOW: usize = 10;

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("sparse_max ({sparse_max}) must be below dense_min ({dense_min})")]
    InvalidThresholds { sparse_max: usize, dense_min: usize },
    #[error("support threshold must lie in [0, 1], got {0}")]
    InvalidSupportThreshold(f64),
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon {0} is empty")]
    EmptyLexicon(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FlagKind {
    NameLeak,
    SentimentDilution,
    SparseInput,
    DenseInput,
    ContradictionCollapse,
    UnsupportedItem,
    OutOfControlSuggestion,
}

impl FlagKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FlagKind::NameLeak => "NAME_LEAK",
            FlagKind::SentimentDilution => "SENTIMENT_DILUTION",
            FlagKind::SparseInput => "SPARSE_INPUT",
            FlagKind::DenseInput => "DENSE_INPUT",
            FlagKind::ContradictionCollapse => "CONTRADICTION_COLLAPSE",
            FlagKind::UnsupportedItem => "UNSUPPORTED_ITEM",
            FlagKind::OutOfControlSuggestion => "OUT_OF_CONTROL_SUGGESTION",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityFlag {
    pub kind: FlagKind,
    pub detail: String,
    pub item_ordinal: Option<usize>,
}

impl QualityFlag {
    fn new(kind: FlagKind, detail: impl Into<String>, item_ordinal: Option<usize>) -> Self {
        Self {
            kind,
            detail: detail.into(),
            item_ordinal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSupport {
    pub ordinal: usize,
    pub support: f64,
    pub best_response_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RedactionCoverage {
    /// Scrubbed against a non-empty roster.
    Verified,
    /// No roster was available, so leaks cannot be ruled out.
    Unverifiable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityAssessment {
    pub factuality_score: f64,
    pub unsupported_item_ordinals: Vec<usize>,
    pub actionability_score: f64,
    pub flags: Vec<QualityFlag>,
    pub per_item_support: Vec<ItemSupport>,
    pub redaction: RedactionCoverage,
}

impl QualityAssessment {
    pub fn has_flag(&self, kind: FlagKind) -> bool {
        self.flags.iter().any(|f| f.kind == kind)
    }

    pub fn count(&self, kind: FlagKind) -> usize {
        self.flags.iter().filter(|f| f.kind == kind).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityConfig {
    pub support_threshold: f64,
    pub sparse_max: usize,
    pub dense_min: usize,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self {
            support_threshold: DEFAULT_SUPPORT_THRESHOLD,
            sparse_max: DEFAULT_SPARSE_MAX,
            dense_min: DEFAULT_DENSE_MIN,
        }
    }
}

impl QualityConfig {
    pub fn validate(&self) -> Result<(), QualityError> {
        if !(0.0..=1.0).contains(&self.support_threshold) {
            return Err(QualityError::InvalidSupportThreshold(
                self.support_threshold,
            ));
        }
        if self.sparse_max >= self.dense_min {
            return Err(QualityError::InvalidThresholds {
                sparse_max: self.sparse_max,
                dense_min: self.dense_min,
            });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Lexicons
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    phrases: Vec<Phrase>,
}

impl Lexicon {
    /// One phrase per line; blank lines and `#` comments are skipped.
    pub fn parse(source: &str) -> Self {
        let phrases = source
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(Phrase::new)
            .collect();
        Self { phrases }
    }

    pub fn from_phrases<S: AsRef<str>>(phrases: &[S]) -> Self {
        Self {
            phrases: phrases
                .iter()
                .filter_map(|p| Phrase::new(p.as_ref()))
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, QualityError> {
        let source = std::fs::read_to_string(path).map_err(|source| QualityError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::parse(&source))
    }

    pub fn phrases(&self) -> &[Phrase] {
        &self.phrases
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn first_in(&self, tokens: &[String]) -> Option<&Phrase> {
        self.phrases.iter().find(|p| p.occurs_in(tokens))
    }

    pub fn any_in(&self, tokens: &[String]) -> bool {
        self.first_in(tokens).is_some()
    }
}

/// The full vocabulary the checks run on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicons {
    pub stopwords: HashSet<String>,
    pub action_verbs: Lexicon,
    pub out_of_control: Lexicon,
    pub aspects: Lexicon,
    pub positive_cues: Lexicon,
    pub negative_cues: Lexicon,
    pub hedge_cues: Lexicon,
    pub strong_positive: Lexicon,
    pub strong_negative: Lexicon,
    pub intensifiers: Lexicon,
}

const LEXICON_FILES: [&str; 11] = [
    "stopwords_en.txt",
    "stopwords_da.txt",
    "action_verbs.txt",
    "out_of_control.txt",
    "aspects.txt",
    "positive_cues.txt",
    "negative_cues.txt",
    "hedge_cues.txt",
    "strong_positive.txt",
    "strong_negative.txt",
    "intensifiers.txt",
];

fn stopword_set(sources: &[&str]) -> HashSet<String> {
    sources
        .iter()
        .flat_map(|s| s.lines())
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .flat_map(words)
        .collect()
}

fn default_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "stopwords_en.txt" => include_str!("../data/stopwords_en.txt"),
        "stopwords_da.txt" => include_str!("../data/stopwords_da.txt"),
        "action_verbs.txt" => include_str!("../data/action_verbs.txt"),
        "out_of_control.txt" => include_str!("../data/out_of_control.txt"),
        "aspects.txt" => include_str!("../data/aspects.txt"),
        "positive_cues.txt" => include_str!("../data/positive_cues.txt"),
        "negative_cues.txt" => include_str!("../data/negative_cues.txt"),
        "hedge_cues.txt" => include_str!("../data/hedge_cues.txt"),
        "strong_positive.txt" => include_str!("../data/strong_positive.txt"),
        "strong_negative.txt" => include_str!("../data/strong_negative.txt"),
        "intensifiers.txt" => include_str!("../data/intensifiers.txt"),
        _ => return None,
    })
}

impl Default for Lexicons {
    fn default() -> Self {
        Self::from_sources(|name| default_source(name).map(str::to_string))
            .expect("shipped lexicons are non-empty")
    }
}

impl Lexicons {
    fn from_sources(mut source: impl FnMut(&str) -> Option<String>) -> Result<Self, QualityError> {
        let mut get = |name: &str| source(name).unwrap_or_default();
        let stop_en = get("stopwords_en.txt");
        let stop_da = get("stopwords_da.txt");
        let mut lex = |name: &str| -> Result<Lexicon, QualityError> {
            let l = Lexicon::parse(&get(name));
            if l.is_empty() {
                return Err(QualityError::EmptyLexicon(name.to_string()));
            }
            Ok(l)
        };
        Ok(Self {
            action_verbs: lex("action_verbs.txt")?,
            out_of_control: lex("out_of_control.txt")?,
            aspects: lex("aspects.txt")?,
            positive_cues: lex("positive_cues.txt")?,
            negative_cues: lex("negative_cues.txt")?,
            hedge_cues: lex("hedge_cues.txt")?,
            strong_positive: lex("strong_positive.txt")?,
            strong_negative: lex("strong_negative.txt")?,
            intensifiers: lex("intensifiers.txt")?,
            stopwords: stopword_set(&[&stop_en, &stop_da]),
        })
    }

    /// Shipped lexicons, with any same-named file in `dir` taking precedence.
    pub fn load_dir(dir: &Path) -> Result<Self, QualityError> {
        let mut io_error = None;
        let lexicons = Self::from_sources(|name| {
            let path = dir.join(name);
            if !path.is_file() {
                return default_source(name).map(str::to_string);
            }
            std::fs::read_to_string(&path)
                .map_err(|source| {
                    io_error.get_or_insert(QualityError::Io {
                        path: path.display().to_string(),
                        source,
                    });
                })
                .ok()
        });
        match io_error {
            Some(e) => Err(e),
            None => lexicons,
        }
    }

    pub fn file_names() -> &'static [&'static str] {
        &LEXICON_FILES
    }
}

// ---------------------------------------------------------------------------
// Name scrubbing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactionResult {
    pub text: String,
    pub leak_count: usize,
    /// `(start, end, replacement)` byte ranges in the input text.
    pub redacted_spans: Vec<(usize, usize, String)>,
}

fn name_tokens(name: &str) -> Vec<&str> {
    name.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .collect()
}

/// Patterns derived from a roster: every full name, plus each of its name
/// tokens of at least three characters.
pub fn roster_patterns<S: AsRef<str>>(roster: impl IntoIterator<Item = S>) -> Vec<Vec<String>> {
    let mut patterns: BTreeSet<Vec<String>> = BTreeSet::new();
    for name in roster {
        let tokens = name_tokens(name.as_ref());
        if tokens.is_empty() {
            continue;
        }
        patterns.insert(tokens.iter().map(|t| t.to_string()).collect());
        for t in tokens.iter().filter(|t| t.chars().count() >= 3) {
            patterns.insert(vec![t.to_string()]);
        }
    }
    patterns.into_iter().collect()
}

fn roster_regex(patterns: &[Vec<String>]) -> Option<Regex> {
    if patterns.is_empty() {
        return None;
    }
    let mut alternatives: Vec<(usize, String)> = patterns
        .iter()
        .map(|tokens| {
            let len = tokens.iter().map(|t| t.chars().count()).sum::<usize>() + tokens.len();
            let alt = tokens
                .iter()
                .map(|t| regex::escape(t))
                .collect::<Vec<_>>()
                .join(r"\s+");
            (len, alt)
        })
        .collect();
    // Longer names first so a full name wins over its own tokens.
    alternatives.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let body = alternatives
        .into_iter()
        .map(|(_, a)| a)
        .collect::<Vec<_>>()
        .join("|");
    Some(Regex::new(&format!(r"(?i)\b(?:{body})\b")).expect("escaped alternation"))
}

/// Replaces roster names with [`PERSON_PLACEHOLDER`].
///
/// Matching is whole-word and case-insensitive. Existing placeholders are
/// left untouched, which keeps the function idempotent even for a roster
/// containing the word "person".
pub fn scrub_names<S: AsRef<str>>(
    text: &str,
    roster: impl IntoIterator<Item = S>,
) -> RedactionResult {
    let Some(re) = roster_regex(&roster_patterns(roster)) else {
        return RedactionResult {
            text: text.to_string(),
            leak_count: 0,
            redacted_spans: Vec::new(),
        };
    };
    let mut out = String::with_capacity(text.len());
    let mut spans = Vec::new();
    let mut segment_start = 0;
    let mut scrub_segment = |start: usize, end: usize, out: &mut String| {
        let segment = &text[start..end];
        let mut cursor = 0;
        for m in re.find_iter(segment) {
            out.push_str(&segment[cursor..m.start()]);
            out.push_str(PERSON_PLACEHOLDER);
            spans.push((
                start + m.start(),
                start + m.end(),
                PERSON_PLACEHOLDER.to_string(),
            ));
            cursor = m.end();
        }
        out.push_str(&segment[cursor..]);
    };
    for (idx, _) in text.match_indices(PERSON_PLACEHOLDER) {
        scrub_segment(segment_start, idx, &mut out);
        out.push_str(PERSON_PLACEHOLDER);
        segment_start = idx + PERSON_PLACEHOLDER.len();
    }
    scrub_segment(segment_start, text.len(), &mut out);
    RedactionResult {
        text: out,
        leak_count: spans.len(),
        redacted_spans: spans,
    }
}

// ---------------------------------------------------------------------------
// Factuality
// ---------------------------------------------------------------------------

/// Lowercased words of at least three characters that are not stopwords.
pub fn content_words(text: &str, stopwords: &HashSet<String>) -> BTreeSet<String> {
    words(text)
        .into_iter()
        .filter(|w| w.chars().count() >= 3 && !stopwords.contains(w))
        .collect()
}

/// Jaccard similarity; two empty sets score 0.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactualityCoverage {
    pub per_item: Vec<ItemSupport>,
    pub score: f64,
    pub unsupported: Vec<usize>,
    pub flags: Vec<QualityFlag>,
}

pub fn factuality_coverage(
    report: &FeedbackReport,
    bundle: &CourseBundle,
    stopwords: &HashSet<String>,
    threshold: f64,
) -> FactualityCoverage {
    let responses: Vec<(&str, BTreeSet<String>)> = bundle
        .responses
        .iter()
        .map(|r| (r.response_id.as_str(), content_words(&r.text, stopwords)))
        .collect();
    let mut per_item = Vec::with_capacity(report.items.len());
    let mut unsupported = Vec::new();
    let mut flags = Vec::new();
    for item in &report.items {
        let words = content_words(&item.full_text(), stopwords);
        let mut best: Option<(f64, &str)> = None;
        for (id, rw) in &responses {
            let s = jaccard(&words, rw);
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, id));
            }
        }
        let support = best.map_or(0.0, |b| b.0);
        if support < threshold {
            unsupported.push(item.ordinal);
            flags.push(QualityFlag::new(
                FlagKind::UnsupportedItem,
                format!(
                    "item {} has lexical support {support:.3} below {threshold}",
                    item.ordinal
                ),
                Some(item.ordinal),
            ));
        }
        per_item.push(ItemSupport {
            ordinal: item.ordinal,
            support,
            best_response_id: best.map(|b| b.1.to_string()),
        });
    }
    let score = if per_item.is_empty() {
        1.0
    } else {
        (per_item.len() - unsupported.len()) as f64 / per_item.len() as f64
    };
    FactualityCoverage {
        per_item,
        score,
        unsupported,
        flags,
    }
}

// ---------------------------------------------------------------------------
// Actionability
// ---------------------------------------------------------------------------

pub fn actionability_score(
    report: &FeedbackReport,
    action_verbs: &Lexicon,
    out_of_control: &Lexicon,
) -> (f64, Vec<QualityFlag>) {
    let mut total = 0usize;
    let mut actionable = 0usize;
    let mut flags = Vec::new();
    for item in report.actions() {
        total += 1;
        let tokens = words(&item.full_text());
        if action_verbs.any_in(&tokens) {
            actionable += 1;
        }
        if let Some(p) = out_of_control.first_in(&tokens) {
            flags.push(QualityFlag::new(
                FlagKind::OutOfControlSuggestion,
                format!(
                    "item {} suggests \"{}\", outside the lecturer's control",
                    item.ordinal,
                    p.as_str()
                ),
                Some(item.ordinal),
            ));
        }
    }
    let score = if total == 0 {
        0.0
    } else {
        actionable as f64 / total as f64
    };
    (score, flags)
}

// ---------------------------------------------------------------------------
// Input density
// ---------------------------------------------------------------------------

pub fn input_density_flags(
    bundle: &CourseBundle,
    sparse_max: usize,
    dense_min: usize,
) -> Result<Vec<QualityFlag>, QualityError> {
    if sparse_max >= dense_min {
        return Err(QualityError::InvalidThresholds {
            sparse_max,
            dense_min,
        });
    }
    Ok(density_flags(bundle.len(), sparse_max, dense_min))
}

fn density_flags(n: usize, sparse_max: usize, dense_min: usize) -> Vec<QualityFlag> {
    if n <= sparse_max {
        vec![QualityFlag::new(
            FlagKind::SparseInput,
            format!("{n} response(s); specifics may not come from students"),
            None,
        )]
    } else if n >= dense_min {
        vec![QualityFlag::new(
            FlagKind::DenseInput,
            format!("{n} responses; prioritisation of points may be unreliable"),
            None,
        )]
    } else {
        Vec::new()
    }
}

// ---------------------------------------------------------------------------
// Contradiction collapse
// ---------------------------------------------------------------------------

fn gap(a: usize, a_len: usize, b: usize, b_len: usize) -> usize {
    if b >= a {
        b.saturating_sub(a + a_len - 1)
    } else {
        a.saturating_sub(b + b_len - 1)
    }
}

fn cue_near(tokens: &[String], aspect: &Phrase, cues: &Lexicon) -> bool {
    let aspect_at = aspect.positions(tokens);
    cues.phrases().iter().any(|cue| {
        cue.positions(tokens).into_iter().any(|c| {
            aspect_at
                .iter()
                .any(|&a| gap(a, aspect.len(), c, cue.len()) <= CUE_WINDOW)
        })
    })
}

/// Flags aspects on which students disagree but the report speaks with one
/// polarity and no hedge.
pub fn contradiction_check(
    bundle: &CourseBundle,
    report: &FeedbackReport,
    lexicons: &Lexicons,
) -> Vec<QualityFlag> {
    let response_tokens: Vec<Vec<String>> =
        bundle.responses.iter().map(|r| words(&r.text)).collect();
    let item_tokens: Vec<(&FeedbackItem, Vec<String>)> = report
        .items
        .iter()
        .map(|i| (i, words(&i.full_text())))
        .collect();
    let mut flags = Vec::new();
    for aspect in lexicons.aspects.phrases() {
        let mentioning: Vec<&Vec<String>> = response_tokens
            .iter()
            .filter(|t| aspect.occurs_in(t))
            .collect();
        if mentioning.len() < 2 {
            continue;
        }
        let positive = mentioning
            .iter()
            .any(|t| cue_near(t, aspect, &lexicons.positive_cues));
        let negative = mentioning
            .iter()
            .any(|t| cue_near(t, aspect, &lexicons.negative_cues));
        if !(positive && negative) {
            continue;
        }
        let collapsed = item_tokens.iter().find(|(_, tokens)| {
            aspect.occurs_in(tokens)
                && (lexicons.positive_cues.any_in(tokens) != lexicons.negative_cues.any_in(tokens))
                && !lexicons.hedge_cues.any_in(tokens)
        });
        if let Some((item, _)) = collapsed {
            flags.push(QualityFlag::new(
                FlagKind::ContradictionCollapse,
                format!(
                    "students disagree on \"{}\" but item {} reports a single view",
                    aspect.as_str(),
                    item.ordinal
                ),
                Some(item.ordinal),
            ));
        }
    }
    flags
}

// ---------------------------------------------------------------------------
// Sentiment retention
// ---------------------------------------------------------------------------

fn intensified(tokens: &[String], intensifiers: &Lexicon, polarity: &Lexicon) -> bool {
    intensifiers.phrases().iter().any(|int| {
        int.positions(tokens).into_iter().any(|i| {
            let after = &tokens[i + int.len()..];
            polarity
                .phrases()
                .iter()
                .any(|p| p.positions(after).first() == Some(&0))
        })
    })
}

pub fn sentiment_retention(
    bundle: &CourseBundle,
    report: &FeedbackReport,
    lexicons: &Lexicons,
) -> Vec<QualityFlag> {
    let response_tokens: Vec<Vec<String>> =
        bundle.responses.iter().map(|r| words(&r.text)).collect();
    let report_tokens = words(&report.raw_text);
    let classes = [
        (
            "positive",
            &lexicons.strong_positive,
            &lexicons.positive_cues,
        ),
        (
            "negative",
            &lexicons.strong_negative,
            &lexicons.negative_cues,
        ),
    ];
    let mut flags = Vec::new();
    for (label, strong, polarity) in classes {
        let lost: Vec<&Phrase> = strong
            .phrases()
            .iter()
            .filter(|p| response_tokens.iter().any(|t| p.occurs_in(t)))
            .collect();
        if lost.is_empty() {
            continue;
        }
        let retained = strong.any_in(&report_tokens)
            || intensified(&report_tokens, &lexicons.intensifiers, polarity);
        if retained {
            continue;
        }
        for phrase in lost {
            flags.push(QualityFlag::new(
                FlagKind::SentimentDilution,
                format!(
                    "strong {label} sentiment \"{}\" not conveyed",
                    phrase.as_str()
                ),
                None,
            ));
        }
    }
    flags
}

// ---------------------------------------------------------------------------
// Assessment
// ---------------------------------------------------------------------------

/// Roster names plus the respondents' own names.
pub fn effective_roster(bundle: &CourseBundle) -> BTreeSet<String> {
    let mut roster = bundle.roster.clone();
    roster.extend(
        bundle
            .responses
            .iter()
            .filter_map(|r| r.respondent_name.clone()),
    );
    roster
}

/// Scrubs names from the report, runs every check and attaches the result.
///
/// `config` is expected to be valid (see [`QualityConfig::validate`]).
pub fn assess(
    report: &FeedbackReport,
    bundle: &CourseBundle,
    roster: &BTreeSet<String>,
    config: &QualityConfig,
    lexicons: &Lexicons,
) -> FeedbackReport {
    let mut flags = Vec::new();
    let redaction = scrub_names(&report.raw_text, roster);
    let mut report = if redaction.leak_count > 0 {
        for (start, end, _) in &redaction.redacted_spans {
            let ordinal = report
                .items
                .iter()
                .find(|i| i.source_span.0 <= *start && *end <= i.source_span.1)
                .map(|i| i.ordinal);
            let place =
                ordinal.map_or_else(|| "outside items".to_string(), |o| format!("in item {o}"));
            flags.push(QualityFlag::new(
                FlagKind::NameLeak,
                format!("roster name redacted {place} at bytes {start}..{end}"),
                ordinal,
            ));
        }
        parse_report(&redaction.text, &report.course_id)
    } else {
        FeedbackReport {
            quality: None,
            ..report.clone()
        }
    };
    if report.format == FormatClass::Unstructured && report.raw_text.trim().is_empty() {
        report.items.clear();
    }

    flags.extend(density_flags(
        bundle.len(),
        config.sparse_max,
        config.dense_min,
    ));
    let coverage = factuality_coverage(
        &report,
        bundle,
        &lexicons.stopwords,
        config.support_threshold,
    );
    flags.extend(coverage.flags.iter().cloned());
    let (actionability, action_flags) =
        actionability_score(&report, &lexicons.action_verbs, &lexicons.out_of_control);
    flags.extend(action_flags);
    flags.extend(contradiction_check(bundle, &report, lexicons));
    flags.extend(sentiment_retention(bundle, &report, lexicons));

    report.quality = Some(QualityAssessment {
        factuality_score: coverage.score,
        unsupported_item_ordinals: coverage.unsupported,
        actionability_score: actionability,
        flags,
        per_item_support: coverage.per_item,
        redaction: if roster.is_empty() {
            RedactionCoverage::Unverifiable
        } else {
            RedactionCoverage::Verified
        },
    });
    report
}

fn item_kind_label(kind: ItemKind) -> &'static str {
    match kind {
        ItemKind::Observation => "observation",
        ItemKind::Action => "action",
    }
}

/// One-line human summary of an assessed report.
pub fn summary_line(report: &FeedbackReport) -> String {
    let Some(q) = &report.quality else {
        return format!("{}: not assessed", report.course_id);
    };
    let actions = report.actions().count();
    let kinds: BTreeSet<FlagKind> = q.flags.iter().map(|f| f.kind).collect();
    let kinds: Vec<&str> = kinds.into_iter().map(FlagKind::as_str).collect();
    format!(
        "{}: {} items ({} {}), factuality {:.3}, actionability {:.3}, flags [{}]",
        report.course_id,
        report.items.len(),
        actions,
        item_kind_label(ItemKind::Action),
        q.factuality_score,
        q.actionability_score,
        kinds.join(", ")
    )
}
