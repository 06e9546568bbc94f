//! Post records: parsing, validation, deduplication, relevance filtering and
//! calendar bucketing.
//!
//! Records are line-delimited JSON objects. Every timestamp is normalized to
//! UTC on ingest and truncated to whole seconds.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, SubsecRound, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("relevance config needs at least one target geo code or hashtag")]
    EmptyRelevance,
    #[error("time bucket {label:?} has start year {start} after end year {end}")]
    InvertedBucket { label: String, start: i32, end: i32 },
    #[error("time buckets {first:?} and {second:?} overlap")]
    OverlappingBuckets { first: String, second: String },
    #[error("invalid bucket spec {0:?}, expected e.g. 2014-2017,2018-2020")]
    BadBucketSpec(String),
}

/// Source platform of a post.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Platform {
    X,
    TikTok,
    Instagram,
    Facebook,
    Other(String),
}

impl Platform {
    pub fn as_str(&self) -> &str {
        match self {
            Platform::X => "x",
            Platform::TikTok => "tiktok",
            Platform::Instagram => "instagram",
            Platform::Facebook => "facebook",
            Platform::Other(name) => name,
        }
    }
}

impl FromStr for Platform {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lowered = s.trim().to_lowercase();
        Ok(match lowered.as_str() {
            "x" | "twitter" => Platform::X,
            "tiktok" => Platform::TikTok,
            "instagram" => Platform::Instagram,
            "facebook" => Platform::Facebook,
            _ => Platform::Other(lowered),
        })
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Platform {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Platform {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Ok(raw.parse().unwrap_or_else(|never| match never {}))
    }
}

/// One social-media record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Post {
    pub id: String,
    pub platform: Platform,
    #[serde(serialize_with = "serialize_timestamp")]
    pub timestamp: DateTime<Utc>,
    pub text: String,
    #[serde(rename = "lang", skip_serializing_if = "Option::is_none")]
    pub lang_hint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geo: Option<String>,
    pub hashtags: BTreeSet<String>,
    pub likes: u64,
    pub shares: u64,
    pub comments: u64,
    pub saves: u64,
}

fn serialize_timestamp<S: Serializer>(ts: &DateTime<Utc>, serializer: S) -> Result<S::Ok, S::Error> {
    serializer.serialize_str(&ts.format("%Y-%m-%dT%H:%M:%SZ").to_string())
}

/// Wire shape of an input record; optional fields default as documented.
#[derive(Deserialize)]
struct RawRecord {
    id: String,
    platform: Platform,
    timestamp: String,
    text: String,
    #[serde(default)]
    lang: Option<String>,
    #[serde(default)]
    geo: Option<String>,
    #[serde(default)]
    hashtags: Option<Vec<String>>,
    #[serde(default)]
    likes: Option<u64>,
    #[serde(default)]
    shares: Option<u64>,
    #[serde(default)]
    comments: Option<u64>,
    #[serde(default)]
    saves: Option<u64>,
}

/// Lowercases a tag and strips any leading '#'.
pub fn normalize_hashtag(tag: &str) -> String {
    tag.trim().trim_start_matches('#').to_lowercase()
}

/// Hashtags embedded in free text: whitespace tokens starting with '#',
/// cut at the first character that is neither alphanumeric nor '_'.
pub fn extract_hashtags(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().filter_map(|token| {
        let body = token.strip_prefix('#')?;
        let tag: String = body
            .chars()
            .take_while(|c| c.is_alphanumeric() || *c == '_')
            .collect();
        (!tag.is_empty()).then(|| tag.to_lowercase())
    })
}

pub fn parse_timestamp(raw: &str) -> Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(raw.trim())
        .map(|ts| ts.with_timezone(&Utc).trunc_subsecs(0))
        .map_err(|e| format!("invalid timestamp {raw:?}: {e}"))
}

/// Parses one input record. `line_no` is 1-based and only used for errors.
pub fn parse_post_record(line: &str, line_no: usize) -> Result<Post, ParseError> {
    let err = |reason: String| ParseError {
        line: line_no,
        reason,
    };
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
    let id = raw.id.trim().to_string();
    if id.is_empty() {
        return Err(err("empty id".into()));
    }
    let timestamp = parse_timestamp(&raw.timestamp).map_err(err)?;

    let mut hashtags: BTreeSet<String> = raw
        .hashtags
        .unwrap_or_default()
        .iter()
        .map(|t| normalize_hashtag(t))
        .filter(|t| !t.is_empty())
        .collect();
    hashtags.extend(extract_hashtags(&raw.text));

    let non_empty = |v: Option<String>| v.map(|s| s.trim().to_string()).filter(|s| !s.is_empty());
    Ok(Post {
        id,
        platform: raw.platform,
        timestamp,
        text: raw.text,
        lang_hint: non_empty(raw.lang).map(|s| s.to_lowercase()),
        geo: non_empty(raw.geo).map(|s| s.to_uppercase()),
        hashtags,
        likes: raw.likes.unwrap_or(0),
        shares: raw.shares.unwrap_or(0),
        comments: raw.comments.unwrap_or(0),
        saves: raw.saves.unwrap_or(0),
    })
}

impl Post {
    pub fn to_record(&self) -> String {
        serde_json::to_string(self).expect("post serializes")
    }
}

/// Outcome of reading a whole record stream.
#[derive(Debug, Default)]
pub struct ParsedRecords {
    pub posts: Vec<Post>,
    pub rejects: Vec<ParseError>,
    /// Non-blank lines seen.
    pub total: usize,
}

/// Parses raw bytes line by line. Blank lines are skipped; lines that are not
/// valid UTF-8 are rejected like any other malformed record.
pub fn parse_records(bytes: &[u8]) -> ParsedRecords {
    let mut out = ParsedRecords::default();
    for (idx, raw_line) in bytes.split(|b| *b == b'\n').enumerate() {
        let line_no = idx + 1;
        let raw_line = raw_line.strip_suffix(b"\r").unwrap_or(raw_line);
        if raw_line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        out.total += 1;
        let parsed = std::str::from_utf8(raw_line)
            .map_err(|_| ParseError {
                line: line_no,
                reason: "line is not valid UTF-8".into(),
            })
            .and_then(|line| parse_post_record(line, line_no));
        match parsed {
            Ok(post) => out.posts.push(post),
            Err(e) => out.rejects.push(e),
        }
    }
    out
}

/// Drops repeated ids, keeping the first occurrence. Returns the number dropped.
pub fn dedup(posts: Vec<Post>) -> (Vec<Post>, usize) {
    let mut seen = HashSet::with_capacity(posts.len());
    let before = posts.len();
    let kept: Vec<Post> = posts
        .into_iter()
        .filter(|p| seen.insert(p.id.clone()))
        .collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceConfig {
    target_geo: BTreeSet<String>,
    target_hashtags: BTreeSet<String>,
}

impl RelevanceConfig {
    pub fn new<G, H>(geo: G, hashtags: H) -> Result<Self, ConfigError>
    where
        G: IntoIterator,
        G::Item: AsRef<str>,
        H: IntoIterator,
        H::Item: AsRef<str>,
    {
        let target_geo: BTreeSet<String> = geo
            .into_iter()
            .map(|g| g.as_ref().trim().to_uppercase())
            .filter(|g| !g.is_empty())
            .collect();
        let target_hashtags: BTreeSet<String> = hashtags
            .into_iter()
            .map(|h| normalize_hashtag(h.as_ref()))
            .filter(|h| !h.is_empty())
            .collect();
        if target_geo.is_empty() && target_hashtags.is_empty() {
            return Err(ConfigError::EmptyRelevance);
        }
        Ok(Self {
            target_geo,
            target_hashtags,
        })
    }

    pub fn target_geo(&self) -> &BTreeSet<String> {
        &self.target_geo
    }

    pub fn target_hashtags(&self) -> &BTreeSet<String> {
        &self.target_hashtags
    }
}

pub fn filter_relevant(post: &Post, cfg: &RelevanceConfig) -> bool {
    let geo_hit = post
        .geo
        .as_ref()
        .is_some_and(|g| cfg.target_geo.contains(g));
    geo_hit || post.hashtags.iter().any(|t| cfg.target_hashtags.contains(t))
}

/// Inclusive range of calendar years.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeBucket {
    pub label: String,
    pub start_year: i32,
    pub end_year: i32,
}

impl TimeBucket {
    pub fn new(start_year: i32, end_year: i32) -> Self {
        Self {
            label: format!("{start_year}-{end_year}"),
            start_year,
            end_year,
        }
    }

    pub fn contains_year(&self, year: i32) -> bool {
        (self.start_year..=self.end_year).contains(&year)
    }
}

/// A validated, non-overlapping set of buckets sorted by start year.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketSet(Vec<TimeBucket>);

impl BucketSet {
    pub fn new(mut buckets: Vec<TimeBucket>) -> Result<Self, ConfigError> {
        for b in &buckets {
            if b.start_year > b.end_year {
                return Err(ConfigError::InvertedBucket {
                    label: b.label.clone(),
                    start: b.start_year,
                    end: b.end_year,
                });
            }
        }
        buckets.sort_by_key(|b| (b.start_year, b.end_year));
        for pair in buckets.windows(2) {
            if pair[1].start_year <= pair[0].end_year {
                return Err(ConfigError::OverlappingBuckets {
                    first: pair[0].label.clone(),
                    second: pair[1].label.clone(),
                });
            }
        }
        Ok(Self(buckets))
    }

    /// Parses `"2014-2017,2018-2020"`; a single year such as `"2023"` is a
    /// one-year bucket.
    pub fn parse(spec: &str) -> Result<Self, ConfigError> {
        let bad = || ConfigError::BadBucketSpec(spec.to_string());
        let mut buckets = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (start, end) = match part.split_once('-') {
                Some((s, e)) => (s.trim(), e.trim()),
                None => (part, part),
            };
            let start: i32 = start.parse().map_err(|_| bad())?;
            let end: i32 = end.parse().map_err(|_| bad())?;
            buckets.push(TimeBucket::new(start, end));
        }
        if buckets.is_empty() {
            return Err(bad());
        }
        Self::new(buckets)
    }

    pub fn buckets(&self) -> &[TimeBucket] {
        &self.0
    }
}

impl Default for BucketSet {
    /// The three collection periods 2014-2017, 2018-2020 and 2021-2022.
    fn default() -> Self {
        Self(vec![
            TimeBucket::new(2014, 2017),
            TimeBucket::new(2018, 2020),
            TimeBucket::new(2021, 2022),
        ])
    }
}

pub fn bucketize<'a>(ts: &DateTime<Utc>, buckets: &'a BucketSet) -> Option<&'a str> {
    let year = ts.year();
    buckets
        .0
        .iter()
        .find(|b| b.contains_year(year))
        .map(|b| b.label.as_str())
}

/// A calendar month in UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    pub fn succ(self) -> Self {
        self.add_months(1)
    }

    pub fn add_months(self, n: i64) -> Self {
        let idx = self.index() + n;
        Self {
            year: idx.div_euclid(12) as i32,
            month: idx.rem_euclid(12) as u32 + 1,
        }
    }

    /// Months elapsed since year 0.
    fn index(self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    /// Number of months from `self` to `later`, negative if `later` is earlier.
    pub fn months_until(self, later: YearMonth) -> i64 {
        later.index() - self.index()
    }

    /// Inclusive month range.
    pub fn range_inclusive(first: YearMonth, last: YearMonth) -> impl Iterator<Item = YearMonth> {
        let len = first.months_until(last) + 1;
        (0..len.max(0)).map(move |i| first.add_months(i))
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s
            .trim()
            .split_once('-')
            .ok_or_else(|| format!("expected YYYY-MM, got {s:?}"))?;
        let year = y.parse().map_err(|_| format!("bad year in {s:?}"))?;
        let month = m.parse().map_err(|_| format!("bad month in {s:?}"))?;
        YearMonth::new(year, month).ok_or_else(|| format!("month out of range in {s:?}"))
    }
}

pub fn monthly_key(ts: &DateTime<Utc>) -> YearMonth {
    YearMonth {
        year: ts.year(),
        month: ts.month(),
    }
}
