//! Pulse Potential: per topic and month, the sum over posts of sentiment
//! times engagement.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{monthly_key, Post, YearMonth};
use crate::fmt_real;
use crate::topics::TopicAssignment;

#[derive(Debug, Error, PartialEq)]
pub enum PulseError {
    #[error("post {0:?} has a topic assignment but no sentiment")]
    MissingSentiment(String),
    #[error("post {post:?} is assigned to unknown topic {topic}")]
    UnknownTopic { post: String, topic: usize },
    #[error("empty month range {first}..{last}")]
    EmptyRange { first: YearMonth, last: YearMonth },
}

/// Likes + shares + comments. Saves are not engagement here.
pub fn engagement(post: &Post) -> u64 {
    post.likes
        .saturating_add(post.shares)
        .saturating_add(post.comments)
}

/// Σ S·E over `(sentiment, engagement)` pairs, summed in slice order.
pub fn pulse_potential(items: &[(f64, u64)]) -> f64 {
    items.iter().map(|(s, e)| s * *e as f64).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyTrendPoint {
    pub topic: usize,
    pub month: YearMonth,
    pub pp: f64,
    pub n_posts: u64,
    pub engagement_sum: u64,
}

/// Contiguous monthly series for one topic; empty months are zero points.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendSeries {
    pub topic: usize,
    pub label: String,
    pub points: Vec<MonthlyTrendPoint>,
}

/// Which quantity a series feeds to the forecaster.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SeriesKind {
    #[default]
    Pp,
    /// Post count per month.
    Volume,
}

impl FromStr for SeriesKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pp" => Ok(Self::Pp),
            "volume" => Ok(Self::Volume),
            other => Err(format!("unknown series kind {other:?}")),
        }
    }
}

impl TrendSeries {
    pub fn values(&self, kind: SeriesKind) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| match kind {
                SeriesKind::Pp => p.pp,
                SeriesKind::Volume => p.n_posts as f64,
            })
            .collect()
    }

    pub fn months(&self) -> Vec<YearMonth> {
        self.points.iter().map(|p| p.month).collect()
    }
}

/// First and last month touched by `posts`, if any.
pub fn month_span<'a>(posts: impl IntoIterator<Item = &'a Post>) -> Option<(YearMonth, YearMonth)> {
    posts.into_iter().fold(None, |acc, p| {
        let m = monthly_key(&p.timestamp);
        Some(match acc {
            None => (m, m),
            Some((lo, hi)) => (lo.min(m), hi.max(m)),
        })
    })
}

/// One series per topic over `first..=last`; topic `i` is labeled
/// `labels[i]`.
///
/// `sentiment` maps post id to the numeric factor S. Posts outside the month
/// range are ignored. A post assigned to several topics adds its full S·E to
/// each of them.
pub fn build_series(
    posts: &[Post],
    assignments: &TopicAssignment,
    sentiment: &BTreeMap<String, f64>,
    labels: &[String],
    first: YearMonth,
    last: YearMonth,
) -> Result<Vec<TrendSeries>, PulseError> {
    if first.months_until(last) < 0 {
        return Err(PulseError::EmptyRange { first, last });
    }
    let n_topics = labels.len();

    // per-post contributions, computed in parallel but kept in post order
    let contributions: Vec<Vec<(usize, YearMonth, f64, u64)>> = posts
        .par_iter()
        .map(|post| {
            let Some(topics) = assignments.get(&post.id) else {
                return Ok(Vec::new());
            };
            if topics.is_empty() {
                return Ok(Vec::new());
            }
            let s = *sentiment
                .get(&post.id)
                .ok_or_else(|| PulseError::MissingSentiment(post.id.clone()))?;
            let month = monthly_key(&post.timestamp);
            if month < first || month > last {
                return Ok(Vec::new());
            }
            let e = engagement(post);
            topics
                .iter()
                .map(|&t| {
                    if t >= n_topics {
                        Err(PulseError::UnknownTopic {
                            post: post.id.clone(),
                            topic: t,
                        })
                    } else {
                        Ok((t, month, s, e))
                    }
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;

    let mut cells: BTreeMap<(usize, YearMonth), Vec<(f64, u64)>> = BTreeMap::new();
    for (topic, month, s, e) in contributions.into_iter().flatten() {
        cells.entry((topic, month)).or_default().push((s, e));
    }

    let series = labels
        .iter()
        .enumerate()
        .map(|(topic, label)| {
            let points = YearMonth::range_inclusive(first, last)
                .map(|month| {
                    let items = cells.get(&(topic, month)).map(Vec::as_slice).unwrap_or(&[]);
                    MonthlyTrendPoint {
                        topic,
                        month,
                        pp: pulse_potential(items),
                        n_posts: items.len() as u64,
                        engagement_sum: items.iter().map(|(_, e)| *e).sum(),
                    }
                })
                .collect();
            TrendSeries {
                topic,
                label: label.clone(),
                points,
            }
        })
        .collect();
    Ok(series)
}

pub fn series_tsv(series: &[TrendSeries]) -> String {
    let mut out = String::from("topic_id\ttopic_label\tmonth\tn_posts\tengagement_sum\tpp\n");
    for s in series {
        for p in &s.points {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                s.topic,
                s.label,
                p.month,
                p.n_posts,
                p.engagement_sum,
                fmt_real(p.pp)
            );
        }
    }
    out
}
