//! Post sentiment from a polarity lexicon with one-token negation, or from
//! externally produced labels.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::textprep::{normalize, stem_token, NormalizationConfig};

#[derive(Debug, Error, PartialEq)]
pub enum SentimentError {
    #[error("lexicon line {line}: {reason}")]
    BadLexiconLine { line: usize, reason: String },
    #[error("lexicon term {0:?} is both a polarity term and a negator")]
    NegatorConflict(String),
    #[error("row {row}: {reason}")]
    BadRow { row: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SentimentLabel {
    Positive,
    Neutral,
    Negative,
}

impl SentimentLabel {
    pub const ALL: [SentimentLabel; 3] = [Self::Positive, Self::Neutral, Self::Negative];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Positive => "positive",
            Self::Neutral => "neutral",
            Self::Negative => "negative",
        }
    }

    /// +1, 0 or −1.
    pub fn signed(self) -> f64 {
        match self {
            Self::Positive => 1.0,
            Self::Neutral => 0.0,
            Self::Negative => -1.0,
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentimentLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" | "pos" => Ok(Self::Positive),
            "neutral" | "neu" => Ok(Self::Neutral),
            "negative" | "neg" => Ok(Self::Negative),
            other => Err(format!("unknown sentiment label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SentimentSource {
    Lexicon,
    /// External label; `with_score` when the file carried a continuous score.
    Precomputed { with_score: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentimentResult {
    pub score: f64,
    pub label: SentimentLabel,
    pub source: SentimentSource,
}

/// Neutral dead-band around zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub positive: f64,
    pub negative: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            positive: 0.05,
            negative: -0.05,
        }
    }
}

impl Thresholds {
    pub fn label(&self, score: f64) -> SentimentLabel {
        if score > self.positive {
            SentimentLabel::Positive
        } else if score < self.negative {
            SentimentLabel::Negative
        } else {
            SentimentLabel::Neutral
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    polarity: HashMap<String, i8>,
    stemmed: HashMap<String, i8>,
    negators: HashSet<String>,
}

impl Lexicon {
    pub fn new<P, N>(polarity: P, negators: N, cfg: &NormalizationConfig) -> Result<Self, SentimentError>
    where
        P: IntoIterator<Item = (String, i8)>,
        N: IntoIterator<Item = String>,
    {
        let polarity: HashMap<String, i8> = polarity
            .into_iter()
            .map(|(t, p)| (normalize(&t, cfg), p.signum()))
            .filter(|(t, p)| !t.is_empty() && *p != 0)
            .collect();
        let negators: HashSet<String> = negators
            .into_iter()
            .map(|t| normalize(&t, cfg))
            .filter(|t| !t.is_empty())
            .collect();
        let mut conflicts: Vec<&String> = negators.iter().filter(|n| polarity.contains_key(*n)).collect();
        conflicts.sort();
        if let Some(term) = conflicts.first() {
            return Err(SentimentError::NegatorConflict((*term).clone()));
        }
        let mut stemmed = HashMap::new();
        let mut keys: Vec<(&String, &i8)> = polarity.iter().collect();
        keys.sort();
        for (term, p) in keys {
            stemmed.entry(stem_token(term)).or_insert(*p);
        }
        Ok(Self {
            polarity,
            stemmed,
            negators,
        })
    }

    /// `term<TAB>+1|-1` lines, `#` comments, and a `[negators]` section with
    /// one negator per line.
    pub fn parse(text: &str, cfg: &NormalizationConfig) -> Result<Self, SentimentError> {
        let mut polarity = Vec::new();
        let mut negators = Vec::new();
        let mut in_negators = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') {
                in_negators = line.eq_ignore_ascii_case("[negators]");
                if !in_negators {
                    return Err(SentimentError::BadLexiconLine {
                        line: idx + 1,
                        reason: format!("unknown section {line}"),
                    });
                }
                continue;
            }
            if in_negators {
                negators.push(line.to_string());
                continue;
            }
            let bad = |reason: &str| SentimentError::BadLexiconLine {
                line: idx + 1,
                reason: reason.to_string(),
            };
            let (term, value) = line.split_once('\t').ok_or_else(|| bad("expected term<TAB>polarity"))?;
            let p = match value.trim() {
                "+1" | "1" => 1,
                "-1" | "\u{2212}1" => -1,
                other => return Err(bad(&format!("polarity must be +1 or -1, got {other:?}"))),
            };
            polarity.push((term.trim().to_string(), p));
        }
        Self::new(polarity, negators, cfg)
    }

    pub fn default_lexicon(cfg: &NormalizationConfig) -> Self {
        Self::parse(include_str!("../data/lexicon.tsv"), cfg).expect("bundled lexicon parses")
    }

    pub fn polarity(&self, token: &str) -> Option<i8> {
        self.polarity
            .get(token)
            .or_else(|| self.stemmed.get(&stem_token(token)))
            .copied()
    }

    pub fn is_negator(&self, token: &str) -> bool {
        self.negators.contains(token)
    }

    /// Same lexicon with every polarity flipped.
    pub fn inverted(&self) -> Self {
        let flip = |m: &HashMap<String, i8>| m.iter().map(|(k, v)| (k.clone(), -v)).collect();
        Self {
            polarity: flip(&self.polarity),
            stemmed: flip(&self.stemmed),
            negators: self.negators.clone(),
        }
    }
}

/// Signed lexicon hits over the token count. A negator flips the hit on the
/// token right after it.
pub fn score_lexicon(tokens: &[String], lexicon: &Lexicon, thresholds: &Thresholds) -> SentimentResult {
    let mut hits: i64 = 0;
    for (i, token) in tokens.iter().enumerate() {
        let Some(p) = lexicon.polarity(token) else {
            continue;
        };
        let negated = i > 0 && lexicon.is_negator(&tokens[i - 1]);
        hits += if negated { -i64::from(p) } else { i64::from(p) };
    }
    let score = hits as f64 / tokens.len().max(1) as f64;
    SentimentResult {
        score,
        label: thresholds.label(score),
        source: SentimentSource::Lexicon,
    }
}

/// Rows `id<TAB>label[<TAB>score]`; whitespace-separated rows are accepted
/// when the line has no tab. Rows without a score get +1/0/−1 by label.
pub fn load_precomputed_sentiment(text: &str) -> Result<BTreeMap<String, SentimentResult>, SentimentError> {
    let mut out = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let bad = |reason: String| SentimentError::BadRow { row, reason };
        let fields: Vec<&str> = if line.contains('\t') {
            line.split('\t').map(str::trim).collect()
        } else {
            line.split_whitespace().collect()
        };
        let (id, label, score) = match fields.as_slice() {
            [id, label] => (*id, *label, None),
            [id, label, score] => (*id, *label, Some(*score)),
            _ => return Err(bad("expected id, label and optional score".into())),
        };
        if id.is_empty() {
            return Err(bad("empty id".into()));
        }
        let label: SentimentLabel = label.parse().map_err(bad)?;
        let result = match score {
            Some(raw) => {
                let score: f64 = raw.parse().map_err(|_| bad(format!("bad score {raw:?}")))?;
                if !(-1.0..=1.0).contains(&score) {
                    return Err(bad(format!("score {score} outside [-1, 1]")));
                }
                SentimentResult {
                    score,
                    label,
                    source: SentimentSource::Precomputed { with_score: true },
                }
            }
            None => SentimentResult {
                score: label.signed(),
                label,
                source: SentimentSource::Precomputed { with_score: false },
            },
        };
        if out.insert(id.to_string(), result).is_some() {
            return Err(bad(format!("duplicate id {id:?}")));
        }
    }
    Ok(out)
}

/// How a sentiment result becomes the per-post factor of Pulse Potential.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PpScale {
    /// Continuous score when an external provider supplied one, otherwise
    /// the class value.
    #[default]
    Auto,
    /// Always +1/0/−1 from the label.
    Class,
    /// Always the raw score.
    Continuous,
}

impl FromStr for PpScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "class" => Ok(Self::Class),
            "continuous" => Ok(Self::Continuous),
            other => Err(format!("unknown sentiment scale {other:?}")),
        }
    }
}

pub fn numeric_for_pp(result: &SentimentResult) -> f64 {
    numeric_for_pp_with(result, PpScale::Auto)
}

pub fn numeric_for_pp_with(result: &SentimentResult, scale: PpScale) -> f64 {
    match (scale, result.source) {
        (PpScale::Continuous, _) => result.score,
        (PpScale::Auto, SentimentSource::Precomputed { with_score: true }) => result.score,
        _ => result.label.signed(),
    }
}
