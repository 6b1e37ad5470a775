//! Human Likert ratings: an append-only log, agreement statistics and the
//! divergence queue.
//!
//! Each record is one JSON line:
//!
//! ```text
//! {"seq":1,"rater":"r1","report":"run:CS001","dim":"FACTUALITY","score":4,"comment":"…","at":"2026-01-01T00:00:00Z"}
//! ```
//!
//! The effective rating for a `(rater, report, dimension)` triple is the
//! record with the highest `seq`; earlier records stay in the log.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RatingError {
    #[error("score {0} is outside 1..=5")]
    InvalidScore(i64),
    #[error("unknown report `{0}`")]
    UnknownReport(String),
    #[error("rater id must be non-empty")]
    EmptyRater,
    #[error("need at least two raters on a common report, found none for {0:?}")]
    InsufficientRaters(Dimension),
    #[error("rating log line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("rating log I/O on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Dimension {
    Factuality,
    Actionability,
    Appropriateness,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [
        Dimension::Factuality,
        Dimension::Actionability,
        Dimension::Appropriateness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Factuality => "FACTUALITY",
            Dimension::Actionability => "ACTIONABILITY",
            Dimension::Appropriateness => "APPROPRIATENESS",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

/// A rating as submitted, before the store assigns sequence and time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingInput {
    pub rater: String,
    pub report: String,
    pub dim: Dimension,
    pub score: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertRating {
    #[serde(rename = "seq")]
    pub sequence: u64,
    #[serde(rename = "rater")]
    pub rater_id: String,
    #[serde(rename = "report")]
    pub report_id: String,
    #[serde(rename = "dim")]
    pub dimension: Dimension,
    pub score: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    #[serde(rename = "at", with = "rfc3339")]
    pub recorded_at: DateTime<Utc>,
}

mod rfc3339 {
    use chrono::{DateTime, SecondsFormat, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(at: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&at.to_rfc3339_opts(SecondsFormat::Millis, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let s = String::deserialize(d)?;
        DateTime::parse_from_rfc3339(&s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub sequence: u64,
}

/// Append-only rating log with an in-memory index.
///
/// The store is the single writer for its file; share it behind a mutex and
/// hand readers [`RatingStore::effective`] snapshots.
#[derive(Debug)]
pub struct RatingStore {
    path: Option<PathBuf>,
    records: Vec<LikertRating>,
    lines: Vec<String>,
    known_reports: Option<HashSet<String>>,
}

fn validate_score(score: i64) -> Result<u8, RatingError> {
    if (1..=5).contains(&score) {
        Ok(score as u8)
    } else {
        Err(RatingError::InvalidScore(score))
    }
}

fn read_log(path: &Path) -> Result<(Vec<LikertRating>, Vec<String>), RatingError> {
    let io = |source| RatingError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), Vec::new())),
        Err(e) => return Err(io(e)),
    };
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LikertRating =
            serde_json::from_str(&line).map_err(|e| RatingError::MalformedRecord {
                line: i + 1,
                reason: e.to_string(),
            })?;
        validate_score(record.score as i64).map_err(|e| RatingError::MalformedRecord {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if records
            .last()
            .is_some_and(|prev: &LikertRating| prev.sequence >= record.sequence)
        {
            return Err(RatingError::MalformedRecord {
                line: i + 1,
                reason: "sequence numbers must increase".into(),
            });
        }
        records.push(record);
        lines.push(line);
    }
    Ok((records, lines))
}

impl RatingStore {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            records: Vec::new(),
            lines: Vec::new(),
            known_reports: None,
        }
    }

    /// Opens (or starts) the log at `path`, replaying existing records.
    pub fn open(path: &Path) -> Result<Self, RatingError> {
        let (records, lines) = read_log(path)?;
        Ok(Self {
            path: Some(path.to_path_buf()),
            records,
            lines,
            known_reports: None,
        })
    }

    /// Restricts new ratings to these report ids.
    pub fn with_known_reports(mut self, reports: impl IntoIterator<Item = String>) -> Self {
        self.known_reports = Some(reports.into_iter().collect());
        self
    }

    pub fn knows_report(&self, report_id: &str) -> bool {
        self.known_reports
            .as_ref()
            .is_none_or(|k| k.contains(report_id))
    }

    pub fn records(&self) -> &[LikertRating] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&mut self, input: RatingInput) -> Result<Receipt, RatingError> {
        self.record_at(input, Utc::now())
    }

    pub fn record_at(
        &mut self,
        input: RatingInput,
        at: DateTime<Utc>,
    ) -> Result<Receipt, RatingError> {
        let score = validate_score(input.score)?;
        if input.rater.trim().is_empty() {
            return Err(RatingError::EmptyRater);
        }
        if !self.knows_report(&input.report) {
            return Err(RatingError::UnknownReport(input.report));
        }
        let sequence = self.records.last().map_or(1, |r| r.sequence + 1);
        let rating = LikertRating {
            sequence,
            rater_id: input.rater,
            report_id: input.report,
            dimension: input.dim,
            score,
            comment: input.comment,
            recorded_at: at.trunc_subsecs(3),
        };
        let line = serde_json::to_string(&rating).expect("rating serializes");
        if let Some(path) = &self.path {
            let io = |source| RatingError::Io {
                path: path.clone(),
                source,
            };
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(io)?;
            file.write_all(format!("{line}\n").as_bytes()).map_err(io)?;
            file.sync_data().map_err(io)?;
        }
        self.records.push(rating);
        self.lines.push(line);
        Ok(Receipt { sequence })
    }

    /// Latest-wins view keyed by `(report, dimension, rater)`.
    pub fn effective(&self) -> BTreeMap<(String, Dimension, String), LikertRating> {
        let mut out: BTreeMap<(String, Dimension, String), LikertRating> = BTreeMap::new();
        for r in &self.records {
            let key = (r.report_id.clone(), r.dimension, r.rater_id.clone());
            match out.get(&key) {
                Some(prev) if prev.sequence > r.sequence => {}
                _ => {
                    out.insert(key, r.clone());
                }
            }
        }
        out
    }

    /// Effective scores per report for one dimension, as `(rater, score)`.
    pub fn scores_by_report(&self, dimension: Dimension) -> BTreeMap<String, Vec<(String, u8)>> {
        let mut out: BTreeMap<String, Vec<(String, u8)>> = BTreeMap::new();
        for ((report, dim, rater), r) in self.effective() {
            if dim == dimension {
                out.entry(report).or_default().push((rater, r.score));
            }
        }
        out
    }

    /// Writes the log verbatim, one record per line.
    pub fn export(&self, path: &Path) -> Result<usize, RatingError> {
        let body: String = self.lines.iter().map(|l| format!("{l}\n")).collect();
        std::fs::write(path, body).map_err(|source| RatingError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(self.lines.len())
    }

    /// Reads an exported log as an in-memory store.
    pub fn import(path: &Path) -> Result<Self, RatingError> {
        let (records, lines) = read_log(path)?;
        Ok(Self {
            path: None,
            records,
            lines,
            known_reports: None,
        })
    }
}

pub fn record_rating(store: &mut RatingStore, input: RatingInput) -> Result<Receipt, RatingError> {
    store.record(input)
}

pub fn export_ratings(store: &RatingStore, path: &Path) -> Result<usize, RatingError> {
    store.export(path)
}

// ---------------------------------------------------------------------------
// Agreement
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    pub dimension: Dimension,
    pub n_reports: usize,
    pub n_raters: usize,
    pub exact_agreement_rate: f64,
    pub mean_abs_diff: f64,
    pub krippendorff_alpha_ordinal: f64,
}

/// Krippendorff's alpha with the ordinal difference function, computed from
/// the coincidence matrix over values 1..=5. Units with fewer than two
/// values are not pairable and are ignored.
pub fn ordinal_alpha(units: &[Vec<u8>]) -> Option<f64> {
    const K: usize = 5;
    let mut coincidence = [[0.0f64; K]; K];
    for unit in units.iter().filter(|u| u.len() >= 2) {
        let weight = 1.0 / (unit.len() - 1) as f64;
        for (i, &a) in unit.iter().enumerate() {
            for (j, &b) in unit.iter().enumerate() {
                if i != j {
                    coincidence[a as usize - 1][b as usize - 1] += weight;
                }
            }
        }
    }
    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    if n <= 1.0 {
        return None;
    }
    let delta2 = |c: usize, k: usize| -> f64 {
        let (lo, hi) = if c <= k { (c, k) } else { (k, c) };
        let between: f64 = marginals[lo..=hi].iter().sum();
        let d = between - (marginals[lo] + marginals[hi]) / 2.0;
        d * d
    };
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..K {
        for k in 0..K {
            let d = delta2(c, k);
            observed += coincidence[c][k] * d;
            expected += marginals[c] * marginals[k] * d;
        }
    }
    if expected == 0.0 {
        // A single value used throughout: no disagreement is possible.
        return Some(1.0);
    }
    Some(1.0 - (n - 1.0) * observed / expected)
}

pub fn agreement_stats(
    store: &RatingStore,
    dimension: Dimension,
) -> Result<AgreementStats, RatingError> {
    let by_report = store.scores_by_report(dimension);
    let units: Vec<&Vec<(String, u8)>> = by_report.values().filter(|s| s.len() >= 2).collect();
    if units.is_empty() {
        return Err(RatingError::InsufficientRaters(dimension));
    }
    let raters: BTreeSet<&str> = units
        .iter()
        .flat_map(|u| u.iter().map(|(r, _)| r.as_str()))
        .collect();
    let mut agreement_sum = 0.0;
    let mut diff_sum = 0.0;
    for unit in &units {
        let mut pairs = 0usize;
        let mut equal = 0usize;
        let mut diff = 0usize;
        for (i, (_, a)) in unit.iter().enumerate() {
            for (_, b) in &unit[i + 1..] {
                pairs += 1;
                equal += usize::from(a == b);
                diff += a.abs_diff(*b) as usize;
            }
        }
        agreement_sum += equal as f64 / pairs as f64;
        diff_sum += diff as f64 / pairs as f64;
    }
    let values: Vec<Vec<u8>> = units
        .iter()
        .map(|u| u.iter().map(|(_, s)| *s).collect())
        .collect();
    Ok(AgreementStats {
        dimension,
        n_reports: units.len(),
        n_raters: raters.len(),
        exact_agreement_rate: agreement_sum / units.len() as f64,
        mean_abs_diff: diff_sum / units.len() as f64,
        krippendorff_alpha_ordinal: ordinal_alpha(&values).expect("at least one pairable unit"),
    })
}

// ---------------------------------------------------------------------------
// Divergence
// ---------------------------------------------------------------------------

pub const DEFAULT_MIN_RANGE: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergenceEntry {
    pub report_id: String,
    pub dimension: Dimension,
    pub scores: Vec<(String, u8)>,
    pub range: u8,
}

pub fn divergence_queue(store: &RatingStore, min_range: u8) -> Vec<DivergenceEntry> {
    let mut entries: Vec<DivergenceEntry> = Vec::new();
    for dimension in Dimension::ALL {
        for (report_id, scores) in store.scores_by_report(dimension) {
            let max = scores.iter().map(|s| s.1).max().unwrap_or(0);
            let min = scores.iter().map(|s| s.1).min().unwrap_or(0);
            let range = max - min;
            if scores.len() >= 2 && range >= min_range {
                entries.push(DivergenceEntry {
                    report_id,
                    dimension,
                    scores,
                    range,
                });
            }
        }
    }
    entries.sort_by(|a, b| {
        b.range
            .cmp(&a.range)
            .then_with(|| a.report_id.cmp(&b.report_id))
            .then_with(|| a.dimension.cmp(&b.dimension))
    });
    entries
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(rater: &str, report: &str, dim: Dimension, score: i64) -> RatingInput {
        RatingInput {
            rater: rater.into(),
            report: report.into(),
            dim,
            score,
            comment: None,
        }
    }

    #[test]
    fn first_rating_gets_sequence_one() {
        let mut store = RatingStore::in_memory();
        let r = store
            .record(input("a", "run:C1", Dimension::Factuality, 4))
            .unwrap();
        assert_eq!(r.sequence, 1);
        let r = store
            .record(input("b", "run:C1", Dimension::Factuality, 4))
            .unwrap();
        assert_eq!(r.sequence, 2);
    }

    #[test]
    fn invalid_score_and_unknown_report() {
        let mut store = RatingStore::in_memory().with_known_reports(["run:C1".to_string()]);
        assert!(matches!(
            store.record(input("a", "run:C1", Dimension::Factuality, 6)),
            Err(RatingError::InvalidScore(6))
        ));
        assert!(matches!(
            store.record(input("a", "run:C1", Dimension::Factuality, 0)),
            Err(RatingError::InvalidScore(0))
        ));
        assert!(matches!(
            store.record(input("a", "run:C9", Dimension::Factuality, 3)),
            Err(RatingError::UnknownReport(_))
        ));
        assert!(store.is_empty());
    }

    #[test]
    fn latest_wins_keeps_history() {
        let mut store = RatingStore::in_memory();
        store
            .record(input("a", "run:C1", Dimension::Factuality, 3))
            .unwrap();
        store
            .record(input("a", "run:C1", Dimension::Factuality, 4))
            .unwrap();
        assert_eq!(store.len(), 2);
        let eff = store.effective();
        assert_eq!(eff.len(), 1);
        assert_eq!(eff.values().next().unwrap().score, 4);
    }

    #[test]
    fn durable_log_replays() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ratings.jsonl");
        {
            let mut store = RatingStore::open(&path).unwrap();
            store
                .record(input("a", "run:C1", Dimension::Actionability, 2))
                .unwrap();
            store
                .record(input("a", "run:C1", Dimension::Actionability, 5))
                .unwrap();
        }
        let mut store = RatingStore::open(&path).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(
            store
                .record(input("b", "run:C1", Dimension::Actionability, 5))
                .unwrap()
                .sequence,
            3
        );
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["seq"], 1);
        assert_eq!(first["dim"], "ACTIONABILITY");
        assert_eq!(first["rater"], "a");
        assert!(first["at"].as_str().unwrap().ends_with('Z'));
    }

    #[test]
    fn malformed_log_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ratings.jsonl");
        std::fs::write(&path, "{\"seq\":1,\"rater\":\"a\",\"report\":\"r:c\",\"dim\":\"FACTUALITY\",\"score\":9,\"at\":\"2026-01-01T00:00:00Z\"}\n").unwrap();
        assert!(matches!(
            RatingStore::open(&path),
            Err(RatingError::MalformedRecord { line: 1, .. })
        ));
    }

    #[test]
    fn unanimous_store() {
        let mut store = RatingStore::in_memory();
        for report in 0..10 {
            for rater in ["a", "b", "c"] {
                store
                    .record(input(
                        rater,
                        &format!("run:C{report}"),
                        Dimension::Factuality,
                        1 + report % 5,
                    ))
                    .unwrap();
            }
        }
        let stats = agreement_stats(&store, Dimension::Factuality).unwrap();
        assert_eq!(stats.n_reports, 10);
        assert_eq!(stats.n_raters, 3);
        assert_eq!(stats.exact_agreement_rate, 1.0);
        assert_eq!(stats.mean_abs_diff, 0.0);
        assert_eq!(stats.krippendorff_alpha_ordinal, 1.0);
    }

    #[test]
    fn single_rater_is_insufficient() {
        let mut store = RatingStore::in_memory();
        store
            .record(input("a", "run:C1", Dimension::Factuality, 3))
            .unwrap();
        store
            .record(input("a", "run:C2", Dimension::Factuality, 4))
            .unwrap();
        store
            .record(input("b", "run:C1", Dimension::Actionability, 4))
            .unwrap();
        assert!(matches!(
            agreement_stats(&store, Dimension::Factuality),
            Err(RatingError::InsufficientRaters(_))
        ));
    }

    #[test]
    fn divergence_rules() {
        let mut store = RatingStore::in_memory();
        for (rater, s) in [("a", 3), ("b", 3), ("c", 4)] {
            store
                .record(input(rater, "run:C1", Dimension::Factuality, s))
                .unwrap();
        }
        for (rater, s) in [("a", 2), ("b", 4), ("c", 4)] {
            store
                .record(input(rater, "run:C2", Dimension::Factuality, s))
                .unwrap();
        }
        for (rater, s) in [("a", 1), ("b", 5)] {
            store
                .record(input(rater, "run:C3", Dimension::Appropriateness, s))
                .unwrap();
        }
        let q = divergence_queue(&store, DEFAULT_MIN_RANGE);
        assert_eq!(q.len(), 2);
        assert_eq!((q[0].report_id.as_str(), q[0].range), ("run:C3", 4));
        assert_eq!((q[1].report_id.as_str(), q[1].range), ("run:C2", 2));
        assert!(divergence_queue(&RatingStore::in_memory(), 2).is_empty());
    }

    #[test]
    fn export_counts_lines() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RatingStore::in_memory();
        let empty = dir.path().join("empty.jsonl");
        assert_eq!(store.export(&empty).unwrap(), 0);
        assert_eq!(std::fs::read_to_string(&empty).unwrap(), "");
        for i in 0..9 {
            store
                .record(input(
                    &format!("r{}", i % 3),
                    &format!("run:C{}", i / 3),
                    Dimension::Factuality,
                    3,
                ))
                .unwrap();
        }
        let out = dir.path().join("out.jsonl");
        assert_eq!(export_ratings(&store, &out).unwrap(), 9);
        assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 9);
        assert_eq!(
            RatingStore::import(&out).unwrap().effective(),
            store.effective()
        );
        assert!(store.export(Path::new("/nonexistent-dir/x.jsonl")).is_err());
    }

    #[test]
    fn dimension_names() {
        assert_eq!(Dimension::parse("factuality"), Some(Dimension::Factuality));
        assert_eq!(
            Dimension::parse("APPROPRIATENESS"),
            Some(Dimension::Appropriateness)
        );
        assert_eq!(Dimension::parse("tone"), None);
    }

    /// Pairwise definition: alpha = 1 - D_o / D_e, where D_o averages the
    /// squared ordinal distance over within-unit pairs and D_e over all
    /// pairs of pairable values.
    fn alpha_by_pairs(units: &[Vec<u8>]) -> Option<f64> {
        let units: Vec<&Vec<u8>> = units.iter().filter(|u| u.len() >= 2).collect();
        let all: Vec<u8> = units.iter().flat_map(|u| u.iter().copied()).collect();
        let n = all.len() as f64;
        if all.len() < 2 {
            return None;
        }
        let freq = |v: u8| all.iter().filter(|&&x| x == v).count() as f64;
        let dist = |a: u8, b: u8| {
            let (lo, hi) = (a.min(b), a.max(b));
            let s: f64 = (lo..=hi).map(freq).sum::<f64>() - (freq(lo) + freq(hi)) / 2.0;
            s * s
        };
        let mut d_o = 0.0;
        for u in &units {
            let m = u.len() as f64;
            let mut within = 0.0;
            for i in 0..u.len() {
                for j in 0..u.len() {
                    if i != j {
                        within += dist(u[i], u[j]);
                    }
                }
            }
            d_o += within / (m - 1.0);
        }
        d_o /= n;
        let mut d_e = 0.0;
        for i in 0..all.len() {
            for j in 0..all.len() {
                if i != j {
                    d_e += dist(all[i], all[j]);
                }
            }
        }
        d_e /= n * (n - 1.0);
        if d_e == 0.0 {
            return Some(1.0);
        }
        Some(1.0 - d_o / d_e)
    }

    #[test]
    fn alpha_frozen_example() {
        let units = vec![vec![3, 3], vec![3, 4], vec![2, 4], vec![5, 5]];
        let got = ordinal_alpha(&units).unwrap();
        let want = alpha_by_pairs(&units).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        // n = 8, value counts 2:1 3:3 4:3 5:1; delta(3,4) = 3, delta(2,4) = 5
        // so D_o = (2*9 + 2*25) / 8 = 8.5
        assert!((got - 0.40544871794871795).abs() < 1e-9, "{got}");
    }

    #[test]
    fn alpha_matches_pairwise_definition() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n_units = rng.random_range(1..12);
            let units: Vec<Vec<u8>> = (0..n_units)
                .map(|_| {
                    (0..rng.random_range(1..5))
                        .map(|_| rng.random_range(1..=5u8))
                        .collect()
                })
                .collect();
            match (ordinal_alpha(&units), alpha_by_pairs(&units)) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-9, "{units:?}: {a} vs {b}"),
                (a, b) => assert_eq!(a.is_some(), b.is_some(), "{units:?}"),
            }
        }
    }

    #[test]
    fn alpha_perfect_disagreement_is_negative() {
        let units = vec![vec![1, 5], vec![5, 1], vec![1, 5]];
        assert!(ordinal_alpha(&units).unwrap() < 0.0);
        assert_eq!(ordinal_alpha(&[vec![4, 4], vec![4, 4]]), Some(1.0));
        assert_eq!(ordinal_alpha(&[vec![4]]), None);
    }
}
