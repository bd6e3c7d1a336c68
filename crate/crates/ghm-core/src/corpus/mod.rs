//! Ingestion of geotagged, tagged records into a sparse count matrix.
//!
//! The pipeline, in order:
//!
//! 1. drop records whose location accuracy is below the configured
//!    threshold;
//! 2. resolve each record to a leaf region (explicit leaf id, or
//!    point-in-polygon lookup); unresolvable records are skipped and
//!    counted, not fatal;
//! 3. normalize tags (default: trim, lowercase, Unicode NFC, stoplist);
//! 4. deduplicate by (user, tag, leaf, UTC calendar day) so one user can
//!    contribute a tag to a region at most once per day;
//! 5. drop tags used by fewer than a configured number of distinct users
//!    across the whole corpus.
//!
//! The vocabulary is built from surviving tags only, sorted
//! lexicographically, which together with set-based dedup makes ingestion
//! insensitive to record order.

pub mod geo;
pub mod normalize;

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

pub use geo::{assign_region, Polygon, RegionPolygons};
pub use normalize::{DefaultNormalizer, TagNormalizer};

use crate::counts::{CountMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::geotree::GeoTree;

/// Where a record happened.
#[derive(Clone, Debug, PartialEq)]
pub enum Location {
    Point { lon: f64, lat: f64 },
    /// Pre-resolved leaf id.
    Leaf(String),
}

/// One ingested record.
#[derive(Clone, Debug, PartialEq)]
pub struct GeoRecord {
    pub id: String,
    pub user: String,
    pub timestamp: DateTime<Utc>,
    pub location: Location,
    /// Service-specific location accuracy level; larger is more precise.
    pub accuracy: i32,
    pub tags: Vec<String>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    user: String,
    ts: RawTimestamp,
    #[serde(default)]
    lon: Option<f64>,
    #[serde(default)]
    lat: Option<f64>,
    #[serde(default)]
    leaf: Option<String>,
    accuracy: i32,
    #[serde(default)]
    tags: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawTimestamp {
    Epoch(i64),
    Text(String),
}

impl GeoRecord {
    /// Parses one JSON line: `{"id","user","ts","lon","lat","accuracy",
    /// "tags"}`, with an optional `"leaf"` overriding the coordinates.
    /// `ts` is either epoch seconds or an RFC 3339 string.
    pub fn from_json(line: &str) -> Result<GeoRecord> {
        let raw: RawRecord =
            serde_json::from_str(line).map_err(|e| Error::MalformedRecord(e.to_string()))?;
        let timestamp = match raw.ts {
            RawTimestamp::Epoch(secs) => DateTime::<Utc>::from_timestamp(secs, 0)
                .ok_or_else(|| Error::MalformedRecord(format!("bad epoch {secs}")))?,
            RawTimestamp::Text(text) => DateTime::parse_from_rfc3339(&text)
                .map_err(|e| Error::MalformedRecord(format!("bad timestamp `{text}`: {e}")))?
                .with_timezone(&Utc),
        };
        let location = match (raw.leaf, raw.lon, raw.lat) {
            (Some(leaf), _, _) => Location::Leaf(leaf),
            (None, Some(lon), Some(lat)) => {
                if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
                    return Err(Error::MalformedRecord(format!(
                        "coordinates ({lon}, {lat}) out of range"
                    )));
                }
                Location::Point { lon, lat }
            }
            _ => {
                return Err(Error::MalformedRecord(format!(
                    "record `{}` has neither leaf nor coordinates",
                    raw.id
                )))
            }
        };
        Ok(GeoRecord {
            id: raw.id,
            user: raw.user,
            timestamp,
            location,
            accuracy: raw.accuracy,
            tags: raw.tags,
        })
    }
}

/// Streaming reader over a JSON-lines record file.
pub struct RecordReader<R> {
    lines: std::io::Lines<R>,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(reader: R) -> Self {
        RecordReader {
            lines: reader.lines(),
        }
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<GeoRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            match self.lines.next()? {
                Err(e) => return Some(Err(e.into())),
                Ok(line) if line.trim().is_empty() => continue,
                Ok(line) => return Some(GeoRecord::from_json(&line)),
            }
        }
    }
}

/// Ingestion thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Records below this accuracy level are dropped.
    pub min_accuracy: i32,
    /// Tags used by fewer distinct users than this are dropped.
    pub min_distinct_users: u32,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            min_accuracy: 13,
            min_distinct_users: 10,
        }
    }
}

/// Per-stage drop accounting. Record-level counters partition the input;
/// tag-level counters partition the tag instances of kept records.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestStats {
    pub records_in: u64,
    pub records_low_accuracy: u64,
    pub records_unresolvable: u64,
    pub records_kept: u64,
    pub tags_seen: u64,
    /// Dropped by the normalizer (stoplist or empty after cleanup).
    pub tags_filtered: u64,
    /// Dropped as (user, tag, leaf, day) repeats.
    pub tags_deduplicated: u64,
    /// Dropped because too few distinct users used the tag.
    pub tags_rare: u64,
    pub tags_kept: u64,
    /// Distinct terms removed by the rare-tag filter.
    pub rare_terms: u64,
}

/// Runs the full pipeline over a record stream.
pub fn ingest<I>(
    records: I,
    tree: &GeoTree,
    polygons: Option<&RegionPolygons>,
    normalizer: &dyn TagNormalizer,
    cfg: &IngestConfig,
) -> Result<(Vocabulary, CountMatrix, IngestStats)>
where
    I: IntoIterator<Item = Result<GeoRecord>>,
{
    if let Some(p) = polygons {
        p.validate_against(tree)?;
    }
    let mut stats = IngestStats::default();
    let mut dedup: HashSet<(String, String, usize, NaiveDate)> = HashSet::new();
    let mut occurrences: HashMap<(usize, String), u32> = HashMap::new();
    let mut users_per_term: HashMap<String, HashSet<String>> = HashMap::new();

    for record in records {
        let record = record?;
        stats.records_in += 1;
        if record.accuracy < cfg.min_accuracy {
            stats.records_low_accuracy += 1;
            continue;
        }
        let row = match &record.location {
            Location::Leaf(id) => tree.leaf_row(id).ok(),
            Location::Point { lon, lat } => {
                let polygons = polygons.ok_or_else(|| {
                    Error::MalformedInput(
                        "records carry coordinates but no polygons were provided".into(),
                    )
                })?;
                assign_region(*lon, *lat, polygons).and_then(|id| tree.leaf_row(id).ok())
            }
        };
        let Some(row) = row else {
            stats.records_unresolvable += 1;
            continue;
        };
        stats.records_kept += 1;
        let day = record.timestamp.date_naive();
        for raw in &record.tags {
            stats.tags_seen += 1;
            let Some(term) = normalizer.normalize(raw) else {
                stats.tags_filtered += 1;
                continue;
            };
            if !dedup.insert((record.user.clone(), term.clone(), row, day)) {
                stats.tags_deduplicated += 1;
                continue;
            }
            *occurrences.entry((row, term.clone())).or_insert(0) += 1;
            users_per_term
                .entry(term)
                .or_default()
                .insert(record.user.clone());
        }
    }

    let mut surviving: Vec<String> = users_per_term
        .iter()
        .filter(|(_, users)| users.len() as u32 >= cfg.min_distinct_users)
        .map(|(term, _)| term.clone())
        .collect();
    surviving.sort();
    stats.rare_terms = (users_per_term.len() - surviving.len()) as u64;
    let vocab = Vocabulary::from_terms(surviving)?;

    let mut rows: Vec<Vec<(u32, u32)>> = vec![Vec::new(); tree.num_leaves()];
    for ((row, term), count) in &occurrences {
        match vocab.index(term) {
            Some(tag) => {
                rows[*row].push((tag, *count));
                stats.tags_kept += *count as u64;
            }
            None => stats.tags_rare += *count as u64,
        }
    }
    let counts = CountMatrix::from_rows(vocab.len(), rows)?;
    Ok((vocab, counts, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geotree::NodeSpec;

    fn tree() -> GeoTree {
        let specs = vec![
            NodeSpec {
                id: "usa".into(),
                name: "usa".into(),
                parent: None,
            },
            NodeSpec {
                id: "sfo".into(),
                name: "sfo".into(),
                parent: Some("usa".into()),
            },
            NodeSpec {
                id: "mission".into(),
                name: "mission".into(),
                parent: Some("sfo".into()),
            },
            NodeSpec {
                id: "soma".into(),
                name: "soma".into(),
                parent: Some("sfo".into()),
            },
        ];
        GeoTree::build(&specs).unwrap()
    }

    fn record(id: &str, user: &str, day: u32, leaf: &str, accuracy: i32, tags: &[&str]) -> GeoRecord {
        GeoRecord {
            id: id.into(),
            user: user.into(),
            timestamp: DateTime::parse_from_rfc3339(&format!("2014-03-{day:02}T10:00:00Z"))
                .unwrap()
                .with_timezone(&Utc),
            location: Location::Leaf(leaf.into()),
            accuracy,
            tags: tags.iter().map(|t| (*t).to_owned()).collect(),
        }
    }

    fn run(records: Vec<GeoRecord>, min_users: u32) -> (Vocabulary, CountMatrix, IngestStats) {
        let tree = tree();
        let normalizer = DefaultNormalizer::from_stoplist_text("flickr");
        let cfg = IngestConfig {
            min_accuracy: 13,
            min_distinct_users: min_users,
        };
        ingest(
            records.into_iter().map(Ok),
            &tree,
            None,
            &normalizer,
            &cfg,
        )
        .unwrap()
    }

    #[test]
    fn same_user_same_day_counts_once() {
        let records = (0..5)
            .map(|i| record(&format!("r{i}"), "u1", 1, "mission", 16, &["graffiti"]))
            .collect();
        let (vocab, counts, stats) = run(records, 1);
        let t = vocab.index("graffiti").unwrap();
        let row = tree().leaf_row("mission").unwrap();
        assert_eq!(counts.get(row, t), 1);
        assert_eq!(stats.tags_deduplicated, 4);
        assert_eq!(stats.tags_kept, 1);
    }

    #[test]
    fn next_day_counts_again() {
        let records = vec![
            record("r1", "u1", 1, "mission", 16, &["graffiti"]),
            record("r2", "u1", 2, "mission", 16, &["graffiti"]),
        ];
        let (vocab, counts, _) = run(records, 1);
        let row = tree().leaf_row("mission").unwrap();
        assert_eq!(counts.get(row, vocab.index("graffiti").unwrap()), 2);
    }

    #[test]
    fn tags_below_the_user_threshold_are_excluded() {
        // Nine distinct users with threshold ten: the tag disappears.
        let records: Vec<GeoRecord> = (0..9)
            .map(|i| record(&format!("r{i}"), &format!("u{i}"), 1, "mission", 16, &["rare"]))
            .collect();
        let (vocab, counts, stats) = run(records, 10);
        assert_eq!(vocab.len(), 0);
        assert_eq!(counts.total(), 0);
        assert_eq!(stats.tags_rare, 9);
        assert_eq!(stats.rare_terms, 1);
    }

    #[test]
    fn empty_stream_yields_empty_everything() {
        let (vocab, counts, stats) = run(Vec::new(), 10);
        assert!(vocab.is_empty());
        assert_eq!(counts.total(), 0);
        assert_eq!(stats, IngestStats::default());
    }

    #[test]
    fn low_accuracy_and_unresolvable_records_are_counted() {
        let records = vec![
            record("r1", "u1", 1, "mission", 5, &["graffiti"]),
            record("r2", "u1", 1, "nowhere", 16, &["graffiti"]),
            record("r3", "u1", 1, "mission", 16, &["graffiti"]),
        ];
        let (_, _, stats) = run(records, 1);
        assert_eq!(stats.records_in, 3);
        assert_eq!(stats.records_low_accuracy, 1);
        assert_eq!(stats.records_unresolvable, 1);
        assert_eq!(stats.records_kept, 1);
        assert_eq!(
            stats.records_kept + stats.records_low_accuracy + stats.records_unresolvable,
            stats.records_in
        );
    }

    #[test]
    fn ingestion_is_order_insensitive() {
        let base = vec![
            record("r1", "u1", 1, "mission", 16, &["graffiti", "art"]),
            record("r2", "u2", 1, "mission", 16, &["graffiti"]),
            record("r3", "u1", 2, "soma", 16, &["art", "flickr"]),
            record("r4", "u2", 1, "soma", 16, &["art"]),
            record("r5", "u1", 1, "mission", 16, &["graffiti"]),
        ];
        let (v1, c1, s1) = run(base.clone(), 2);
        let mut reversed = base;
        reversed.reverse();
        let (v2, c2, s2) = run(reversed, 2);
        assert_eq!(v1, v2);
        assert_eq!(c1, c2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn reingesting_a_dedup_clean_stream_is_idempotent() {
        // Every (user, tag, leaf, day) key is unique, so counts equal raw
        // occurrences and a second pass reproduces them.
        let records = vec![
            record("r1", "u1", 1, "mission", 16, &["graffiti"]),
            record("r2", "u2", 1, "mission", 16, &["graffiti"]),
            record("r3", "u1", 2, "mission", 16, &["graffiti"]),
        ];
        let (v1, c1, s1) = run(records.clone(), 1);
        assert_eq!(s1.tags_deduplicated, 0);
        assert_eq!(c1.total(), 3);
        let (v2, c2, _) = run(records, 1);
        assert_eq!(v1, v2);
        assert_eq!(c1, c2);
    }

    #[test]
    fn point_records_need_polygons() {
        let tree = tree();
        let rec = GeoRecord {
            location: Location::Point { lon: 0.5, lat: 0.5 },
            ..record("r1", "u1", 1, "mission", 16, &["graffiti"])
        };
        let err = ingest(
            vec![Ok(rec)],
            &tree,
            None,
            &DefaultNormalizer::default(),
            &IngestConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MalformedInput(_)));
    }

    #[test]
    fn record_json_parsing() {
        let rec = GeoRecord::from_json(
            r#"{"id":"a","user":"u","ts":"2014-03-01T12:30:00Z","lon":-122.4,"lat":37.76,"accuracy":16,"tags":["Graffiti"]}"#,
        )
        .unwrap();
        assert_eq!(
            rec.location,
            Location::Point {
                lon: -122.4,
                lat: 37.76
            }
        );
        let rec = GeoRecord::from_json(
            r#"{"id":"a","user":"u","ts":1393677000,"leaf":"mission","accuracy":16,"tags":[]}"#,
        )
        .unwrap();
        assert_eq!(rec.location, Location::Leaf("mission".into()));
        assert!(rec.tags.is_empty());

        for bad in [
            r#"{"id":"a","user":"u","ts":"2014-03-01T12:30:00Z","accuracy":16,"tags":[]}"#,
            r#"{"id":"a","user":"u","ts":"2014-03-01T12:30:00Z","lon":200.0,"lat":0.0,"accuracy":16,"tags":[]}"#,
            r#"{"id":"a","user":"u","ts":"not a time","lon":0.0,"lat":0.0,"accuracy":16,"tags":[]}"#,
            "not json",
        ] {
            assert!(matches!(
                GeoRecord::from_json(bad),
                Err(Error::MalformedRecord(_))
            ));
        }
    }
}
