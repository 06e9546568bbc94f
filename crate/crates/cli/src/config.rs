//! TOML pipeline configuration. Relative paths resolve against the config
//! file's directory; command-line flags override file values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use trendpulse::cluster::ClusterParams;
use trendpulse::corpus::{BucketSet, RelevanceConfig};
use trendpulse::embed::DEFAULT_DIM;
use trendpulse::forecast::{ForecastParams, VerdictParams};
use trendpulse::pulse::SeriesKind;
use trendpulse::sentiment::{PpScale, Thresholds};
use trendpulse::topics::TopicConfig;

use crate::error::{CliError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    input: RawInput,
    relevance: RawRelevance,
    buckets: Option<String>,
    #[serde(default)]
    cluster: RawCluster,
    #[serde(default)]
    embedding: RawEmbedding,
    #[serde(default)]
    topics: RawTopics,
    #[serde(default)]
    sentiment: RawSentiment,
    #[serde(default)]
    forecast: RawForecast,
    out: Option<PathBuf>,
    workers: Option<usize>,
    #[serde(default)]
    debug_dump: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    corpus: PathBuf,
    #[serde(default)]
    stopwords: Vec<PathBuf>,
    lexicon: Option<PathBuf>,
    fold_table: Option<PathBuf>,
    embeddings: Option<PathBuf>,
    sentiment: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRelevance {
    #[serde(default)]
    geo: Vec<String>,
    #[serde(default)]
    hashtags: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCluster {
    min_cluster_size: Option<usize>,
    min_samples: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmbedding {
    dim: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopics {
    top_k: Option<usize>,
    assign_threshold: Option<f64>,
    assign_band: Option<f64>,
    merge_threshold: Option<f64>,
    #[serde(default)]
    discard: Vec<String>,
    min_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSentiment {
    positive: Option<f64>,
    negative: Option<f64>,
    scale: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForecast {
    n_changepoints: Option<usize>,
    changepoint_range: Option<f64>,
    fourier_order: Option<usize>,
    seasonal_period: Option<f64>,
    ridge_delta: Option<f64>,
    ridge_seasonal: Option<f64>,
    horizon: Option<usize>,
    series: Option<String>,
    window: Option<usize>,
    band: Option<f64>,
}

/// Flag values that win over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub buckets: Option<String>,
    pub forecast_horizon: Option<usize>,
    pub series: Option<String>,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub stopwords: Vec<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub fold_table: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub sentiment_file: Option<PathBuf>,
    pub relevance: RelevanceConfig,
    pub buckets: BucketSet,
    pub cluster: ClusterParams,
    pub dim: usize,
    pub topics: TopicConfig,
    pub thresholds: Thresholds,
    pub pp_scale: PpScale,
    pub forecast: ForecastParams,
    pub verdict: VerdictParams,
    pub series: SeriesKind,
    pub out: PathBuf,
    pub workers: usize,
    pub debug_dump: bool,
}

fn bad(msg: impl std::fmt::Display) -> CliError {
    CliError::Config(msg.to_string())
}

impl PipelineConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base, overrides)
    }

    pub fn from_toml(text: &str, base: &Path, overrides: &Overrides) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(bad)?;
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

        let relevance = RelevanceConfig::new(&raw.relevance.geo, &raw.relevance.hashtags).map_err(bad)?;
        let buckets = match overrides.buckets.as_deref().or(raw.buckets.as_deref()) {
            Some(spec) => BucketSet::parse(spec).map_err(bad)?,
            None => BucketSet::default(),
        };
        let cluster = ClusterParams::new(raw.cluster.min_cluster_size.unwrap_or(10), raw.cluster.min_samples)
            .map_err(bad)?;
        let dim = raw.embedding.dim.unwrap_or(DEFAULT_DIM);
        if dim < 2 {
            return Err(bad("embedding.dim must be at least 2"));
        }

        let defaults = TopicConfig::default();
        let topics = TopicConfig {
            top_k: raw.topics.top_k.unwrap_or(defaults.top_k),
            assign_threshold: raw.topics.assign_threshold.unwrap_or(defaults.assign_threshold),
            assign_band: raw.topics.assign_band.unwrap_or(defaults.assign_band),
            merge_threshold: raw.topics.merge_threshold.unwrap_or(defaults.merge_threshold),
            discard: raw.topics.discard,
            min_size: raw.topics.min_size.unwrap_or(defaults.min_size),
        };
        if topics.top_k == 0 || topics.assign_band < 0.0 {
            return Err(bad("topics.top_k must be positive and topics.assign_band non-negative"));
        }

        let td = Thresholds::default();
        let thresholds = Thresholds {
            positive: raw.sentiment.positive.unwrap_or(td.positive),
            negative: raw.sentiment.negative.unwrap_or(td.negative),
        };
        if thresholds.negative > thresholds.positive {
            return Err(bad("sentiment.negative must not exceed sentiment.positive"));
        }
        let pp_scale = match raw.sentiment.scale {
            Some(s) => s.parse().map_err(bad)?,
            None => PpScale::default(),
        };

        let fd = ForecastParams::default();
        let f = raw.forecast;
        let forecast = ForecastParams {
            n_changepoints: f.n_changepoints.unwrap_or(fd.n_changepoints),
            changepoint_range: f.changepoint_range.unwrap_or(fd.changepoint_range),
            fourier_order: f.fourier_order.unwrap_or(fd.fourier_order),
            seasonal_period: f.seasonal_period.unwrap_or(fd.seasonal_period),
            ridge_delta: f.ridge_delta.unwrap_or(fd.ridge_delta),
            ridge_seasonal: f.ridge_seasonal.unwrap_or(fd.ridge_seasonal),
            horizon: overrides.forecast_horizon.or(f.horizon).unwrap_or(fd.horizon),
        };
        forecast.validate().map_err(bad)?;
        let vd = VerdictParams::default();
        let verdict = VerdictParams {
            window: f.window.unwrap_or(vd.window),
            band: f.band.unwrap_or(vd.band),
            eps: vd.eps,
        };
        if verdict.window == 0 || !(verdict.band >= 0.0 && verdict.band < 1.0) {
            return Err(bad("forecast.window must be positive and forecast.band in [0, 1)"));
        }
        let series = match overrides.series.as_deref().or(f.series.as_deref()) {
            Some(s) => s.parse().map_err(bad)?,
            None => SeriesKind::default(),
        };

        let workers = overrides.workers.or(raw.workers).unwrap_or(1);
        if workers == 0 {
            return Err(bad("workers must be at least 1"));
        }
        let out = match &overrides.out {
            Some(p) => p.clone(),
            None => resolve(raw.out.as_deref().unwrap_or(Path::new("out"))),
        };

        let cfg = Self {
            corpus: resolve(&raw.input.corpus),
            stopwords: raw.input.stopwords.iter().map(|p| resolve(p)).collect(),
            lexicon: raw.input.lexicon.as_deref().map(resolve),
            fold_table: raw.input.fold_table.as_deref().map(resolve),
            embeddings: raw.input.embeddings.as_deref().map(resolve),
            sentiment_file: raw.input.sentiment.as_deref().map(resolve),
            relevance,
            buckets,
            cluster,
            dim,
            topics,
            thresholds,
            pp_scale,
            forecast,
            verdict,
            series,
            out,
            workers,
            debug_dump: raw.debug_dump,
        };
        cfg.check_aux_paths()?;
        Ok(cfg)
    }

    /// Auxiliary inputs must exist up front; the corpus is checked when
    /// ingest reads it.
    fn check_aux_paths(&self) -> Result<()> {
        let aux = self
            .stopwords
            .iter()
            .chain(&self.lexicon)
            .chain(&self.fold_table)
            .chain(&self.embeddings)
            .chain(&self.sentiment_file);
        for path in aux {
            if !path.is_file() {
                return Err(bad(format!("{} does not exist", path.display())));
            }
        }
        Ok(())
    }
}
