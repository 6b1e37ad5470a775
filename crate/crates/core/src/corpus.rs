//! Student evaluation corpus: CSV ingestion, per-course grouping and statistics.
//!
//! Corpus files carry the header `course_id,response_id,text,respondent_name`;
//! optional roster files carry `course_id,person_name`. Responses keep their
//! file order inside each bundle and bundles are ordered by first appearance
//! of their course id.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::words;

pub const CORPUS_HEADER: [&str; 4] = ["course_id", "response_id", "text", "respondent_name"];
pub const ROSTER_HEADER: [&str; 2] = ["course_id", "person_name"];

const DANISH_MARKERS: [&str; 5] = ["og", "ikke", "det", "er", "at"];
const ENGLISH_MARKERS: [&str; 5] = ["the", "and", "is", "of", "to"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: expected header `{expected}`, found `{found}`", path.display())]
    BadHeader {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{}: malformed row {row}: {reason}", path.display())]
    MalformedRow {
        path: PathBuf,
        row: usize,
        reason: String,
    },
    #[error("corpus contains no responses")]
    EmptyCorpus,
    #[error("duplicate response_id `{id}` at row {row}")]
    DuplicateResponseId { id: String, row: usize },
    #[error("no course bundles given")]
    NoBundles,
}

/// Closed-word-list language tag for a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LanguageHint {
    En,
    Da,
    Mixed,
    Unknown,
}

impl LanguageHint {
    /// Counts Danish and English function words. Both ≥ 2 is `Mixed`,
    /// neither is `Unknown`, otherwise the majority wins (a tie is `Mixed`).
    pub fn detect(text: &str) -> Self {
        let (mut da, mut en) = (0usize, 0usize);
        for w in words(text) {
            if DANISH_MARKERS.contains(&w.as_str()) {
                da += 1;
            }
            if ENGLISH_MARKERS.contains(&w.as_str()) {
                en += 1;
            }
        }
        match (da, en) {
            (0, 0) => Self::Unknown,
            (d, e) if d >= 2 && e >= 2 => Self::Mixed,
            (d, e) if d > e => Self::Da,
            (d, e) if e > d => Self::En,
            _ => Self::Mixed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationResponse {
    pub response_id: String,
    pub course_id: String,
    pub text: String,
    pub language_hint: LanguageHint,
    /// Only feeds roster redaction; never serialized.
    #[serde(skip_serializing, default)]
    pub respondent_name: Option<String>,
}

impl EvaluationResponse {
    pub fn new(
        response_id: impl Into<String>,
        course_id: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        let text = text.into();
        Self {
            response_id: response_id.into(),
            course_id: course_id.into(),
            language_hint: LanguageHint::detect(&text),
            text,
            respondent_name: None,
        }
    }
}

/// All responses for one course, in ingestion order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CourseBundle {
    pub course_id: String,
    pub responses: Vec<EvaluationResponse>,
    pub roster: BTreeSet<String>,
    pub term_label: Option<String>,
}

impl CourseBundle {
    pub fn new(course_id: impl Into<String>) -> Self {
        Self {
            course_id: course_id.into(),
            responses: Vec::new(),
            roster: BTreeSet::new(),
            term_label: None,
        }
    }

    /// Builds a bundle from plain texts with response ids `<course>-<n>`.
    pub fn from_texts<S: AsRef<str>>(course_id: &str, texts: &[S]) -> Self {
        let mut bundle = Self::new(course_id);
        for (i, t) in texts.iter().enumerate() {
            bundle.responses.push(EvaluationResponse::new(
                format!("{course_id}-{}", i + 1),
                course_id,
                t.as_ref(),
            ));
        }
        bundle
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub course_count: usize,
    pub response_count: usize,
    pub min_responses_per_course: usize,
    pub max_responses_per_course: usize,
    pub singleton_course_count: usize,
}

fn open(path: &Path) -> Result<File, CorpusError> {
    File::open(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            CorpusError::MissingFile(path.to_path_buf())
        } else {
            CorpusError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(open(path)?);
    let found = reader.headers().map_err(|e| CorpusError::MalformedRow {
        path: path.to_path_buf(),
        row: 0,
        reason: e.to_string(),
    })?;
    let found_fields: Vec<&str> = found.iter().map(str::trim).collect();
    if found_fields != header {
        return Err(CorpusError::BadHeader {
            path: path.to_path_buf(),
            expected: header.join(","),
            found: found_fields.join(","),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CorpusError::MalformedRow {
            path: path.to_path_buf(),
            row,
            reason: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(CorpusError::MalformedRow {
                path: path.to_path_buf(),
                row,
                reason: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        rows.push((row, record));
    }
    Ok(rows)
}

/// Loads a corpus CSV and groups it into one bundle per course.
///
/// When `roster_path` is given, each bundle's roster is filled from it;
/// roster entries for courses absent from the corpus are ignored.
pub fn load_corpus(
    path: &Path,
    roster_path: Option<&Path>,
) -> Result<Vec<CourseBundle>, CorpusError> {
    let rows = read_rows(path, &CORPUS_HEADER)?;
    if rows.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let malformed = |row: usize, reason: &str| CorpusError::MalformedRow {
        path: path.to_path_buf(),
        row,
        reason: reason.to_string(),
    };

    let mut bundles: Vec<CourseBundle> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for (row, record) in rows {
        let course_id = record[0].trim();
        let response_id = record[1].trim();
        let text = &record[2];
        let name = record[3].trim();
        if course_id.is_empty() {
            return Err(malformed(row, "empty course_id"));
        }
        if response_id.is_empty() {
            return Err(malformed(row, "empty response_id"));
        }
        if text.trim().is_empty() {
            return Err(malformed(row, "empty text"));
        }
        if !seen_ids.insert(response_id.to_string()) {
            return Err(CorpusError::DuplicateResponseId {
                id: response_id.to_string(),
                row,
            });
        }
        let mut response = EvaluationResponse::new(response_id, course_id, text);
        response.respondent_name = (!name.is_empty()).then(|| name.to_string());
        let slot = *index.entry(course_id.to_string()).or_insert_with(|| {
            bundles.push(CourseBundle::new(course_id));
            bundles.len() - 1
        });
        bundles[slot].responses.push(response);
    }

    if let Some(roster_path) = roster_path {
        for (row, record) in read_rows(roster_path, &ROSTER_HEADER)? {
            let course_id = record[0].trim();
            let person = record[1].trim();
            if course_id.is_empty() || person.is_empty() {
                return Err(CorpusError::MalformedRow {
                    path: roster_path.to_path_buf(),
                    row,
                    reason: "empty course_id or person_name".into(),
                });
            }
            if let Some(&slot) = index.get(course_id) {
                bundles[slot].roster.insert(person.to_string());
            }
        }
    }
    Ok(bundles)
}

pub fn corpus_stats(bundles: &[CourseBundle]) -> Result<CorpusStats, CorpusError> {
    if bundles.is_empty() {
        return Err(CorpusError::NoBundles);
    }
    let sizes = bundles.iter().map(CourseBundle::len);
    Ok(CorpusStats {
        course_count: bundles.len(),
        response_count: sizes.clone().sum(),
        min_responses_per_course: sizes.clone().min().unwrap_or(0),
        max_responses_per_course: sizes.clone().max().unwrap_or(0),
        singleton_course_count: sizes.filter(|&n| n == 1).count(),
    })
}

/// Writes bundles back out in the corpus CSV schema.
pub fn write_corpus(path: &Path, bundles: &[CourseBundle]) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(CORPUS_HEADER)?;
    for r in bundles.iter().flat_map(|b| &b.responses) {
        writer.write_record([
            r.course_id.as_str(),
            r.response_id.as_str(),
            r.text.as_str(),
            r.respondent_name.as_deref().unwrap_or(""),
        ])?;
    }
    writer.flush()
}

/// Writes the rosters of `bundles` in the roster CSV schema.
pub fn write_roster(path: &Path, bundles: &[CourseBundle]) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(ROSTER_HEADER)?;
    for b in bundles {
        for name in &b.roster {
            writer.write_record([b.course_id.as_str(), name.as_str()])?;
        }
    }
    writer.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let path = dir.path().join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn groups_by_course_in_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "c.csv",
            "course_id,response_id,text,respondent_name\nC1,r1,first,\nC2,r2,other,\nC1,r3,\"second, quoted\",Bo\n",
        );
        let bundles = load_corpus(&path, None).unwrap();
        assert_eq!(bundles.len(), 2);
        assert_eq!(bundles[0].course_id, "C1");
        assert_eq!(bundles[0].len(), 2);
        assert_eq!(bundles[1].len(), 1);
        assert_eq!(bundles[0].responses[1].text, "second, quoted");
        assert_eq!(
            bundles[0].responses[1].respondent_name.as_deref(),
            Some("Bo")
        );
    }

    #[test]
    fn header_only_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "c.csv",
            "course_id,response_id,text,respondent_name\n",
        );
        assert!(matches!(
            load_corpus(&path, None),
            Err(CorpusError::EmptyCorpus)
        ));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_corpus(Path::new("/nonexistent/missing.csv"), None).unwrap_err();
        assert!(matches!(err, CorpusError::MissingFile(_)));
        assert!(err.to_string().contains("missing.csv"));
    }

    #[test]
    fn malformed_row_reports_row_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "c.csv",
            "course_id,response_id,text,respondent_name\nC1,r1,ok,\nC1,r2,   ,\n",
        );
        match load_corpus(&path, None) {
            Err(CorpusError::MalformedRow { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
        let path = write(
            &dir,
            "d.csv",
            "course_id,response_id,text,respondent_name\nC1,r1\n",
        );
        assert!(matches!(
            load_corpus(&path, None),
            Err(CorpusError::MalformedRow { row: 1, .. })
        ));
    }

    #[test]
    fn duplicate_response_id_rejected_but_duplicate_text_kept() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "c.csv",
            "course_id,response_id,text,respondent_name\nC1,r1,same,\nC1,r2,same,\n",
        );
        assert_eq!(load_corpus(&path, None).unwrap()[0].len(), 2);
        let path = write(
            &dir,
            "d.csv",
            "course_id,response_id,text,respondent_name\nC1,r1,a,\nC2,r1,b,\n",
        );
        assert!(matches!(
            load_corpus(&path, None),
            Err(CorpusError::DuplicateResponseId { row: 2, .. })
        ));
    }

    #[test]
    fn bad_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(&dir, "c.csv", "course,id,text\nC1,r1,a\n");
        assert!(matches!(
            load_corpus(&path, None),
            Err(CorpusError::BadHeader { .. })
        ));
    }

    #[test]
    fn roster_attached_per_course() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = write(
            &dir,
            "c.csv",
            "course_id,response_id,text,respondent_name\nC1,r1,a,\nC2,r2,b,\n",
        );
        let roster = write(
            &dir,
            "r.csv",
            "course_id,person_name\nC1,Anna Hansen\nC1,Bo Berg\nC9,Nobody\n",
        );
        let bundles = load_corpus(&corpus, Some(&roster)).unwrap();
        assert_eq!(bundles[0].roster.len(), 2);
        assert!(bundles[1].roster.is_empty());
    }

    #[test]
    fn stats_single_bundle() {
        let b = CourseBundle::from_texts("C", &["x"]);
        let s = corpus_stats(&[b]).unwrap();
        assert_eq!(
            (
                s.course_count,
                s.response_count,
                s.min_responses_per_course,
                s.max_responses_per_course,
                s.singleton_course_count
            ),
            (1, 1, 1, 1, 1)
        );
        assert!(matches!(corpus_stats(&[]), Err(CorpusError::NoBundles)));
    }

    #[test]
    fn language_hint_heuristic() {
        assert_eq!(
            LanguageHint::detect("The course is one of the best"),
            LanguageHint::En
        );
        assert_eq!(
            LanguageHint::detect("Det er ikke godt og det er svært"),
            LanguageHint::Da
        );
        assert_eq!(
            LanguageHint::detect("Det er fint og the slides are the best of all"),
            LanguageHint::Mixed
        );
        assert_eq!(
            LanguageHint::detect("Fantastisk kursus!"),
            LanguageHint::Unknown
        );
    }

    #[test]
    fn respondent_name_never_serialized() {
        let mut r = EvaluationResponse::new("r1", "C1", "text");
        r.respondent_name = Some("Anna".into());
        let json = serde_json::to_string(&r).unwrap();
        assert!(!json.contains("Anna"));
    }
}
