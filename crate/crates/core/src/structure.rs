//! Parsing of generated feedback into structured items.
//!
//! Model output falls into one of three emergent layouts:
//!
//! * **enumerated points**: one numbered list of suggestions, possibly with
//!   a lead-in sentence and a closing remark;
//! * **letter sections**: a direct letter to the instructor partitioned by
//!   headings such as "Strengths", "Areas for Improvement",
//!   "Positive Feedback" and "Recommendations";
//! * **summary then actions**: a list of observations followed by a second
//!   list introduced by a heading mentioning actions, recommendations or
//!   suggestions.
//!
//! Anything else is [`FormatClass::Unstructured`]. The parser is total: any
//! string yields a report, and every item carries the byte span it was cut
//! from.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::quality::QualityAssessment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FormatClass {
    EnumeratedPoints,
    LetterSections,
    SummaryThenActions,
    Unstructured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ItemKind {
    Observation,
    Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackItem {
    pub ordinal: usize,
    pub kind: ItemKind,
    pub title: Option<String>,
    pub body: String,
    /// `[start, end)` byte offsets into the report's raw text.
    pub source_span: (usize, usize),
}

impl FeedbackItem {
    /// Title and body joined, as used by the lexical checks.
    pub fn full_text(&self) -> String {
        match &self.title {
            Some(t) => format!("{t} {}", self.body),
            None => self.body.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub course_id: String,
    pub format: FormatClass,
    pub items: Vec<FeedbackItem>,
    pub raw_text: String,
    pub preamble: Option<String>,
    pub closing: Option<String>,
    pub quality: Option<QualityAssessment>,
}

impl FeedbackReport {
    pub fn actions(&self) -> impl Iterator<Item = &FeedbackItem> {
        self.items.iter().filter(|i| i.kind == ItemKind::Action)
    }

    /// Preamble, item spans and closing stitched back together with the raw
    /// characters between them.
    pub fn reconstruct(&self) -> String {
        let mut out = String::new();
        let mut cursor = 0;
        for item in &self.items {
            let (start, end) = item.source_span;
            out.push_str(&self.raw_text[cursor..start]);
            out.push_str(&self.raw_text[start..end]);
            cursor = end;
        }
        out.push_str(&self.raw_text[cursor..]);
        out
    }
}

fn item_line() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(\d+\.|[-*•])\s+\S").expect("static regex"))
}

const SECTION_KEYWORDS: [(&str, ItemKind); 4] = [
    ("strengths", ItemKind::Observation),
    ("positive feedback", ItemKind::Observation),
    ("areas for improvement", ItemKind::Action),
    ("recommendations", ItemKind::Action),
];

const ACTION_HEADING_CUES: [&str; 3] = ["actionable", "recommend", "suggestion"];

#[derive(Debug)]
struct RawItem {
    start: usize,
    end: usize,
    /// Offset of the text after the list marker.
    content_start: usize,
    numbered: bool,
    block: usize,
}

#[derive(Debug)]
struct TextLine {
    start: usize,
    end: usize,
    /// Index of the first item after this line, i.e. `items.len()` at the time.
    before_item: usize,
}

#[derive(Debug, Default)]
struct Layout {
    items: Vec<RawItem>,
    lines: Vec<TextLine>,
}

fn normalize_heading(line: &str) -> String {
    line.trim()
        .trim_start_matches('#')
        .trim_matches(|c: char| c == '*' || c == ':' || c.is_whitespace())
        .to_lowercase()
}

fn looks_like_heading(line: &str) -> bool {
    let t = line.trim();
    t.starts_with('#')
        || (t.starts_with("**") && (t.ends_with("**") || t.ends_with("**:")))
        || (t.ends_with(':') && t.split_whitespace().count() <= 8)
}

fn section_kind(line: &str) -> Option<(&'static str, ItemKind)> {
    let norm = normalize_heading(line);
    if norm.split_whitespace().count() > 6 {
        return None;
    }
    SECTION_KEYWORDS
        .iter()
        .find(|(kw, _)| norm.starts_with(kw))
        .copied()
}

fn scan(raw: &str) -> Layout {
    let mut layout = Layout::default();
    let mut block = 0usize;
    // Set while the previous line belongs to an item and could be continued.
    let mut open_item = false;
    // Set once a blank line follows an item; the block survives blank lines
    // but not prose.
    let mut in_block = false;
    let mut offset = 0;
    for piece in raw.split_inclusive('\n') {
        let start = offset;
        offset += piece.len();
        let line = piece.trim_end_matches(['\n', '\r']);
        let end = start + line.len();
        if line.trim().is_empty() {
            open_item = false;
            continue;
        }
        if let Some(m) = item_line().captures(line) {
            let marker = m.get(1).expect("group 1");
            if !in_block && !layout.items.is_empty() {
                block += 1;
            }
            let after_marker =
                marker.end() + line[marker.end()..].len() - line[marker.end()..].trim_start().len();
            layout.items.push(RawItem {
                start: start + marker.start(),
                end,
                content_start: start + after_marker,
                numbered: marker.as_str().ends_with('.'),
                block,
            });
            open_item = true;
            in_block = true;
            continue;
        }
        if open_item && !looks_like_heading(line) {
            if let Some(last) = layout.items.last_mut() {
                last.end = end;
            }
            continue;
        }
        open_item = false;
        in_block = false;
        layout.lines.push(TextLine {
            start,
            end,
            before_item: layout.items.len(),
        });
    }
    layout
}

struct Classified {
    format: FormatClass,
    kinds: Vec<ItemKind>,
}

fn classify_layout(raw: &str, layout: &Layout) -> Classified {
    let n = layout.items.len();

    // Letter sections: at least two section headings partitioning the items.
    let sections: Vec<(usize, &'static str, ItemKind)> = layout
        .lines
        .iter()
        .filter_map(|l| section_kind(&raw[l.start..l.end]).map(|(kw, k)| (l.before_item, kw, k)))
        .collect();
    let mut distinct: Vec<&str> = sections.iter().map(|s| s.1).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let items_under_sections = sections.first().is_some_and(|s| s.0 < n);

    if distinct.len() >= 2 && items_under_sections {
        let kinds = (0..n)
            .map(|i| {
                sections
                    .iter()
                    .rev()
                    .find(|s| s.0 <= i)
                    .map_or(ItemKind::Observation, |s| s.2)
            })
            .collect();
        return Classified {
            format: FormatClass::LetterSections,
            kinds,
        };
    }

    // Summary then actions: a later block introduced by an action heading.
    let action_block = layout
        .items
        .iter()
        .enumerate()
        .filter(|(i, item)| item.block > 0 && (*i == 0 || layout.items[i - 1].block != item.block))
        .find_map(|(i, item)| {
            let intro = layout.lines.iter().rev().find(|l| l.before_item == i)?;
            let heading = raw[intro.start..intro.end].to_lowercase();
            ACTION_HEADING_CUES
                .iter()
                .any(|cue| heading.contains(cue))
                .then_some(item.block)
        });
    if let Some(first_action_block) = action_block {
        let kinds = layout
            .items
            .iter()
            .map(|item| {
                if item.block >= first_action_block {
                    ItemKind::Action
                } else {
                    ItemKind::Observation
                }
            })
            .collect();
        return Classified {
            format: FormatClass::SummaryThenActions,
            kinds,
        };
    }

    if layout.items.iter().filter(|i| i.numbered).count() >= 2 {
        return Classified {
            format: FormatClass::EnumeratedPoints,
            kinds: vec![ItemKind::Action; n],
        };
    }

    Classified {
        format: FormatClass::Unstructured,
        kinds: Vec::new(),
    }
}

pub fn classify_format(raw: &str) -> FormatClass {
    classify_layout(raw, &scan(raw)).format
}

/// Splits a leading `**Title:**` / `**Title**:` off an item's content.
fn split_title(content: &str) -> (Option<String>, &str) {
    let Some(rest) = content.strip_prefix("**") else {
        return (None, content);
    };
    let Some(close) = rest.find("**") else {
        return (None, content);
    };
    let title = rest[..close].trim().trim_end_matches(':').trim();
    let after = &rest[close + 2..];
    let after = after.strip_prefix(':').unwrap_or(after);
    if title.is_empty() {
        return (None, content);
    }
    (Some(title.to_string()), after)
}

fn non_empty(s: &str) -> Option<String> {
    let t = s.trim();
    (!t.is_empty()).then(|| t.to_string())
}

pub fn parse_report(raw: &str, course_id: &str) -> FeedbackReport {
    let layout = scan(raw);
    let classified = classify_layout(raw, &layout);

    if classified.format == FormatClass::Unstructured {
        let trimmed = raw.trim();
        let items = if trimmed.is_empty() {
            Vec::new()
        } else {
            let start = raw.len() - raw.trim_start().len();
            vec![FeedbackItem {
                ordinal: 1,
                kind: ItemKind::Observation,
                title: None,
                body: trimmed.to_string(),
                source_span: (start, start + trimmed.len()),
            }]
        };
        return FeedbackReport {
            course_id: course_id.to_string(),
            format: FormatClass::Unstructured,
            items,
            raw_text: raw.to_string(),
            preamble: None,
            closing: None,
            quality: None,
        };
    }

    let items: Vec<FeedbackItem> = layout
        .items
        .iter()
        .zip(&classified.kinds)
        .enumerate()
        .map(|(i, (raw_item, &kind))| {
            let content = &raw[raw_item.content_start..raw_item.end];
            let (title, rest) = split_title(content);
            let body = non_empty(rest)
                .or_else(|| title.clone())
                .unwrap_or_else(|| content.trim().to_string());
            FeedbackItem {
                ordinal: i + 1,
                kind,
                title,
                body,
                source_span: (raw_item.start, raw_item.end),
            }
        })
        .collect();

    let preamble = items
        .first()
        .and_then(|f| non_empty(&raw[..f.source_span.0]));
    let closing = items
        .last()
        .and_then(|l| non_empty(&raw[l.source_span.1..]));
    FeedbackReport {
        course_id: course_id.to_string(),
        format: classified.format,
        items,
        raw_text: raw.to_string(),
        preamble,
        closing,
        quality: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXCERPT_1: &str = include_str!("../fixtures/excerpt_enumerated.txt");
    const EXCERPT_3: &str = include_str!("../fixtures/excerpt_summary_then_actions.txt");

    fn titles(report: &FeedbackReport, kind: ItemKind) -> Vec<&str> {
        report
            .items
            .iter()
            .filter(|i| i.kind == kind)
            .map(|i| i.title.as_deref().unwrap())
            .collect()
    }

    #[test]
    fn enumerated_excerpt() {
        assert_eq!(classify_format(EXCERPT_1), FormatClass::EnumeratedPoints);
        let r = parse_report(EXCERPT_1, "C1");
        assert_eq!(r.items.len(), 6);
        assert_eq!(
            titles(&r, ItemKind::Action),
            vec![
                "Workload Management",
                "Adjusting Difficulty Levels",
                "Providing Additional Resources",
                "Peer Learning",
                "Exam Structure",
                "Code Review"
            ]
        );
        assert!(r.preamble.as_deref().unwrap().contains("flipped classroom"));
        assert!(r.closing.as_deref().unwrap().starts_with("Overall"));
        assert_eq!(
            r.items[3].body,
            "Encourage interaction through group work or peer-to-peer activities."
        );
        assert_eq!(r.reconstruct(), EXCERPT_1);
    }

    #[test]
    fn summary_then_actions_excerpt() {
        assert_eq!(classify_format(EXCERPT_3), FormatClass::SummaryThenActions);
        let r = parse_report(EXCERPT_3, "C2");
        assert_eq!(r.items.len(), 10);
        assert_eq!(
            titles(&r, ItemKind::Observation),
            vec![
                "Course Materials",
                "Exam Preparation",
                "Communication Style",
                "Instruction Clarity",
                "Project Feedback"
            ]
        );
        assert_eq!(
            titles(&r, ItemKind::Action),
            vec![
                "Enhance Communication Style",
                "Clarify Instructions",
                "Offer More Feedback",
                "Utilize Online Resources",
                "Adjust Seating Arrangements"
            ]
        );
        assert!(r
            .preamble
            .as_deref()
            .unwrap()
            .starts_with("Dear Instructor,"));
        assert!(r
            .closing
            .as_deref()
            .unwrap()
            .starts_with("Addressing these suggestions"));
        assert_eq!(r.reconstruct(), EXCERPT_3);
        let ordinals: Vec<usize> = r.items.iter().map(|i| i.ordinal).collect();
        assert_eq!(ordinals, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn letter_sections() {
        let raw = "Dear Instructor,\n\nStrengths:\n- Clear slides and examples.\n- Helpful TA sessions.\n\n\
                   Areas for Improvement:\n1. Pace of lectures was too fast.\n2. Exercises lacked solutions.\n\n\
                   Recommendations:\n1. Consider slowing down.\n2. Provide solution sketches.\n\nBest regards";
        assert_eq!(classify_format(raw), FormatClass::LetterSections);
        let r = parse_report(raw, "C");
        let kinds: Vec<ItemKind> = r.items.iter().map(|i| i.kind).collect();
        use ItemKind::*;
        assert_eq!(
            kinds,
            vec![Observation, Observation, Action, Action, Action, Action]
        );
        assert_eq!(r.closing.as_deref(), Some("Best regards"));
        assert_eq!(r.reconstruct(), raw);
    }

    #[test]
    fn salutation_alone_does_not_make_letter() {
        let raw = "Dear Instructor,\n\n1. Slow down.\n2. Post slides earlier.";
        assert_eq!(classify_format(raw), FormatClass::EnumeratedPoints);
    }

    #[test]
    fn prose_is_unstructured() {
        assert_eq!(classify_format(""), FormatClass::Unstructured);
        let r = parse_report("no list here, just prose.", "C");
        assert_eq!(r.format, FormatClass::Unstructured);
        assert_eq!(r.items.len(), 1);
        assert_eq!(r.items[0].kind, ItemKind::Observation);
        assert_eq!(r.items[0].body, "no list here, just prose.");
        assert!(parse_report("  \n ", "C").items.is_empty());
        // one numbered point is not a list
        assert_eq!(
            classify_format("1. only one point"),
            FormatClass::Unstructured
        );
    }

    #[test]
    fn continuation_lines_join_item() {
        let raw = "1. **Pacing:** Slow down\n   in the second half.\n2. More examples.";
        let r = parse_report(raw, "C");
        assert_eq!(r.items.len(), 2);
        assert_eq!(r.items[0].title.as_deref(), Some("Pacing"));
        assert_eq!(r.items[0].body, "Slow down\n   in the second half.");
        assert_eq!(r.items[1].title, None);
    }

    #[test]
    fn title_variants() {
        assert_eq!(split_title("**A**: b"), (Some("A".into()), " b"));
        assert_eq!(split_title("**A:** b"), (Some("A".into()), " b"));
        assert_eq!(split_title("**unclosed b").0, None);
        assert_eq!(split_title("plain").0, None);
        let r = parse_report("1. **Only Title**\n2. **Two:** body", "C");
        assert_eq!(r.items[0].body, "Only Title");
    }

    #[test]
    fn crlf_input() {
        let raw = EXCERPT_1.replace('\n', "\r\n");
        let r = parse_report(&raw, "C");
        assert_eq!(r.items.len(), 6);
        assert!(!r.items[0].body.ends_with('\r'));
        assert_eq!(r.reconstruct(), raw);
    }
}
