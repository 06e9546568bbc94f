//! The five subcommands. Every stage reads its inputs from files and writes
//! its outputs to the output directory, so stages can be rerun one at a time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use trendpulse::cluster::{hdbscan, Points};
use trendpulse::corpus::{bucketize, dedup, filter_relevant, parse_records, Post, YearMonth};
use trendpulse::embed::{embed_hashed, load_precomputed, DocVector};
use trendpulse::fmt_real;
use trendpulse::forecast::{classify_trend, fit, Trend, TrendVerdict};
use trendpulse::pulse::{build_series, month_span, series_tsv, MonthlyTrendPoint, TrendSeries};
use trendpulse::sentiment::{
    load_precomputed_sentiment, numeric_for_pp_with, score_lexicon, Lexicon, SentimentLabel, SentimentResult,
    SentimentSource,
};
use trendpulse::textprep::{NormalizationConfig, Preprocessor, StopwordSet, TokenStream};
use trendpulse::topics::{assign_topics, TopicAssignment, TopicModel};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::svg;

pub const CORPUS: &str = "corpus.jsonl";
pub const REJECTS: &str = "rejects.tsv";
pub const TOPICS: &str = "topics.tsv";
pub const ASSIGNMENTS: &str = "assignments.tsv";
pub const TOPIC_BUCKETS: &str = "topic_buckets.tsv";
pub const CONDENSED_TREE: &str = "condensed_tree.txt";
pub const SENTIMENT: &str = "sentiment.tsv";
pub const SENTIMENT_DISTRIBUTION: &str = "sentiment_distribution.tsv";
pub const TOPIC_ENGAGEMENT: &str = "topic_engagement.tsv";
pub const SERIES: &str = "series.tsv";
pub const SENTIMENT_PLOT: &str = "sentiment.svg";
pub const FORECAST: &str = "forecast.tsv";
pub const VERDICTS: &str = "verdicts.tsv";
pub const PLOTS: &str = "plots";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Topics,
    Score,
    Forecast,
    Run,
}

/// Runs `stage` on a thread pool sized by `cfg.workers`.
pub fn execute(stage: Stage, cfg: &PipelineConfig) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    pool.install(|| match stage {
        Stage::Ingest => cmd_ingest(cfg).map(drop),
        Stage::Topics => cmd_topics(cfg).map(drop),
        Stage::Score => cmd_score(cfg).map(drop),
        Stage::Forecast => cmd_forecast(cfg).map(drop),
        Stage::Run => cmd_run(cfg).map(drop),
    })
}

fn out_path(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Reads an earlier stage's output; absence means that stage has not run.
fn read_stage_file(path: &Path, stage: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => CliError::Missing(format!("{} not found, run `{stage}` first", path.display())),
        _ => CliError::io(path, e),
    })
}

fn read_aux(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn build_preprocessor(cfg: &PipelineConfig) -> Result<Preprocessor> {
    let normalization = match &cfg.fold_table {
        Some(path) => {
            let table = NormalizationConfig::parse_fold_table(&read_aux(path)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            NormalizationConfig::with_fold_table(table)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => NormalizationConfig::default(),
    };
    let stopwords = if cfg.stopwords.is_empty() {
        StopwordSet::default_arabic(&normalization).union(StopwordSet::default_english(&normalization))
    } else {
        let mut set = StopwordSet::default();
        for path in &cfg.stopwords {
            set = set.union(StopwordSet::parse(&read_aux(path)?, &normalization));
        }
        set
    };
    Ok(Preprocessor {
        normalization,
        stopwords,
        ..Preprocessor::default()
    })
}

fn load_lexicon(cfg: &PipelineConfig, pre: &Preprocessor) -> Result<Lexicon> {
    match &cfg.lexicon {
        Some(path) => Lexicon::parse(&read_aux(path)?, &pre.normalization)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
        None => Ok(Lexicon::default_lexicon(&pre.normalization)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestSummary {
    pub total: usize,
    pub rejected: usize,
    pub duplicates: usize,
    pub kept: usize,
}

pub fn cmd_ingest(cfg: &PipelineConfig) -> Result<IngestSummary> {
    let bytes = fs::read(&cfg.corpus).map_err(|e| CliError::io(&cfg.corpus, e))?;
    let parsed = parse_records(&bytes);
    let mut rejects = String::from("line\treason\n");
    for r in &parsed.rejects {
        let _ = writeln!(rejects, "{}\t{}", r.line, r.reason.replace(['\t', '\n'], " "));
    }
    write_file(&out_path(cfg, REJECTS), &rejects)?;
    if parsed.total > 0 && parsed.rejects.len() * 2 > parsed.total {
        return Err(CliError::Format(format!(
            "{} of {} records failed to parse; is {} in the record format?",
            parsed.rejects.len(),
            parsed.total,
            cfg.corpus.display()
        )));
    }
    let (unique, duplicates) = dedup(parsed.posts);
    let kept: Vec<Post> = unique.into_iter().filter(|p| filter_relevant(p, &cfg.relevance)).collect();
    let mut corpus = String::new();
    for post in &kept {
        corpus.push_str(&post.to_record());
        corpus.push('\n');
    }
    write_file(&out_path(cfg, CORPUS), &corpus)?;

    let summary = IngestSummary {
        total: parsed.total,
        rejected: parsed.rejects.len(),
        duplicates,
        kept: kept.len(),
    };
    if summary.total == 0 {
        warn!("{} holds no records", cfg.corpus.display());
    }
    info!(
        "kept {}/{} (rejected {}, duplicates {})",
        summary.kept, summary.total, summary.rejected, summary.duplicates
    );
    Ok(summary)
}

fn read_corpus(cfg: &PipelineConfig) -> Result<Vec<Post>> {
    let path = out_path(cfg, CORPUS);
    let text = read_stage_file(&path, "ingest")?;
    let parsed = parse_records(text.as_bytes());
    if let Some(r) = parsed.rejects.first() {
        return Err(CliError::Format(format!("{}: {r}", path.display())));
    }
    if parsed.posts.is_empty() {
        return Err(CliError::Missing("ingested corpus is empty".into()));
    }
    Ok(parsed.posts)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicsSummary {
    pub n_topics: usize,
    pub n_clusters: usize,
    pub noise: usize,
    pub unassigned: usize,
}

fn embed_posts(cfg: &PipelineConfig, posts: &[Post], streams: &[TokenStream]) -> Result<Vec<DocVector>> {
    let Some(path) = &cfg.embeddings else {
        return Ok(streams.par_iter().map(|s| embed_hashed(s.terms(), cfg.dim)).collect());
    };
    let mut table = load_precomputed(&read_aux(path)?, None)
        .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
    posts
        .iter()
        .map(|p| {
            table
                .remove(&p.id)
                .ok_or_else(|| CliError::Missing(format!("{} has no vector for post {:?}", path.display(), p.id)))
        })
        .collect()
}

pub fn cmd_topics(cfg: &PipelineConfig) -> Result<TopicsSummary> {
    let posts = read_corpus(cfg)?;
    let pre = build_preprocessor(cfg)?;
    let streams: Vec<TokenStream> = posts
        .par_iter()
        .map(|p| pre.process(&p.id, &p.text, p.lang_hint.as_deref()))
        .collect();
    let vectors = embed_posts(cfg, &posts, &streams)?;
    let points = Points::from_docs(&vectors).map_err(|e| CliError::Format(e.to_string()))?;
    let clustering = hdbscan(&points, &cfg.cluster);
    let labels = &clustering.labels;
    let (model, warnings) = TopicModel::build(labels, &streams, &vectors, &cfg.topics);
    for w in warnings {
        warn!("{w}");
    }

    let assignments: Vec<BTreeSet<usize>> = vectors
        .par_iter()
        .zip(&labels.labels)
        .map(|(v, c)| assign_topics(v, *c, &model))
        .collect();

    let mut assign_tsv = String::from("post_id\tcluster\ttopics\n");
    for ((post, cluster), topics) in posts.iter().zip(&labels.labels).zip(&assignments) {
        let ids = if topics.is_empty() {
            "-".to_string()
        } else {
            topics.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
        };
        let _ = writeln!(assign_tsv, "{}\t{}\t{}", post.id, cluster, ids);
    }

    let mut per_bucket: BTreeMap<(&str, usize), u64> = BTreeMap::new();
    for (post, topics) in posts.iter().zip(&assignments) {
        if let Some(bucket) = bucketize(&post.timestamp, &cfg.buckets) {
            for t in topics {
                *per_bucket.entry((bucket, *t)).or_default() += 1;
            }
        }
    }
    let mut bucket_tsv = String::from("bucket\ttopic_id\ttopic_label\tn_posts\n");
    for bucket in cfg.buckets.buckets() {
        for topic in &model.topics {
            let n = per_bucket.get(&(bucket.label.as_str(), topic.id)).copied().unwrap_or(0);
            let _ = writeln!(bucket_tsv, "{}\t{}\t{}\t{}", bucket.label, topic.id, topic.label, n);
        }
    }

    write_file(&out_path(cfg, TOPICS), &model.report_tsv())?;
    write_file(&out_path(cfg, ASSIGNMENTS), &assign_tsv)?;
    write_file(&out_path(cfg, TOPIC_BUCKETS), &bucket_tsv)?;
    if cfg.debug_dump {
        write_file(&out_path(cfg, CONDENSED_TREE), &clustering.tree.dump())?;
    }

    let summary = TopicsSummary {
        n_topics: model.topics.len(),
        n_clusters: labels.n_clusters(),
        noise: labels.noise_count(),
        unassigned: assignments.iter().filter(|a| a.is_empty()).count(),
    };
    info!(
        "{} clusters, {} noise posts, {} topics, {} posts without a topic",
        summary.n_clusters, summary.noise, summary.n_topics, summary.unassigned
    );
    Ok(summary)
}

fn read_topic_labels(cfg: &PipelineConfig) -> Result<Vec<String>> {
    let path = out_path(cfg, TOPICS);
    let text = read_stage_file(&path, "topics")?;
    let mut labels = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let mut fields = line.split('\t');
        let id = fields.next().and_then(|f| f.parse::<usize>().ok());
        let label = fields.next();
        match (id, label) {
            (Some(id), Some(label)) if id == labels.len() => labels.push(label.to_string()),
            _ => return Err(CliError::Format(format!("{} line {}: bad topic row", path.display(), idx + 1))),
        }
    }
    Ok(labels)
}

fn read_assignments(cfg: &PipelineConfig) -> Result<TopicAssignment> {
    let path = out_path(cfg, ASSIGNMENTS);
    let text = read_stage_file(&path, "topics")?;
    let mut out = TopicAssignment::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let bad = || CliError::Format(format!("{} line {}: bad assignment row", path.display(), idx + 1));
        let fields: Vec<&str> = line.split('\t').collect();
        let [id, _cluster, topics] = fields.as_slice() else {
            return Err(bad());
        };
        let set = if *topics == "-" {
            BTreeSet::new()
        } else {
            topics
                .split(',')
                .map(|t| t.parse::<usize>().map_err(|_| bad()))
                .collect::<Result<_>>()?
        };
        out.insert(id.to_string(), set);
    }
    Ok(out)
}

fn source_name(source: SentimentSource) -> &'static str {
    match source {
        SentimentSource::Lexicon => "lexicon",
        SentimentSource::Precomputed { .. } => "precomputed",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSummary {
    pub distribution: BTreeMap<SentimentLabel, usize>,
    pub precomputed: usize,
    pub series: Vec<TrendSeries>,
}

pub fn cmd_score(cfg: &PipelineConfig) -> Result<ScoreSummary> {
    let posts = read_corpus(cfg)?;
    let assignments = read_assignments(cfg)?;
    let labels = read_topic_labels(cfg)?;
    let pre = build_preprocessor(cfg)?;
    let lexicon = load_lexicon(cfg, &pre)?;
    let precomputed = match &cfg.sentiment_file {
        Some(path) => load_precomputed_sentiment(&read_aux(path)?)
            .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?,
        None => BTreeMap::new(),
    };

    let results: Vec<SentimentResult> = posts
        .par_iter()
        .map(|p| {
            precomputed
                .get(&p.id)
                .copied()
                .unwrap_or_else(|| score_lexicon(&pre.surface_tokens(&p.text), &lexicon, &cfg.thresholds))
        })
        .collect();
    let n_precomputed = posts.iter().filter(|p| precomputed.contains_key(&p.id)).count();
    if cfg.sentiment_file.is_some() {
        info!("{n_precomputed} posts scored from the precomputed sentiment file, the rest by lexicon");
    }

    let mut per_post = String::from("post_id\tlabel\tscore\tsource\n");
    let mut distribution: BTreeMap<SentimentLabel, usize> = SentimentLabel::ALL.iter().map(|l| (*l, 0)).collect();
    for (post, r) in posts.iter().zip(&results) {
        let _ = writeln!(per_post, "{}\t{}\t{}\t{}", post.id, r.label, fmt_real(r.score), source_name(r.source));
        *distribution.entry(r.label).or_default() += 1;
    }
    let n = posts.len() as f64;
    let mut dist_tsv = String::from("label\tcount\tproportion\n");
    let mut bars = Vec::new();
    for label in SentimentLabel::ALL {
        let count = distribution[&label];
        let share = count as f64 / n;
        let _ = writeln!(dist_tsv, "{label}\t{count}\t{}", fmt_real(share));
        bars.push((label.to_string(), share));
    }

    let numeric: BTreeMap<String, f64> = posts
        .iter()
        .zip(&results)
        .map(|(p, r)| (p.id.clone(), numeric_for_pp_with(r, cfg.pp_scale)))
        .collect();
    let (first, last) = month_span(&posts).expect("corpus is non-empty");
    let series = build_series(&posts, &assignments, &numeric, &labels, first, last)
        .map_err(|e| CliError::Missing(e.to_string()))?;

    // per-topic totals over the whole corpus
    let mut engagement_tsv =
        String::from("topic_id\ttopic_label\tn_posts\tengagement_sum\tpositive\tneutral\tnegative\tpp_total\n");
    let mut tallies = vec![[0usize; 3]; labels.len()];
    for (post, r) in posts.iter().zip(&results) {
        for t in assignments.get(&post.id).into_iter().flatten() {
            if let Some(row) = tallies.get_mut(*t) {
                let slot = SentimentLabel::ALL.iter().position(|l| *l == r.label).unwrap();
                row[slot] += 1;
            }
        }
    }
    for (s, tally) in series.iter().zip(&tallies) {
        let n_posts: u64 = s.points.iter().map(|p| p.n_posts).sum();
        let eng: u64 = s.points.iter().map(|p| p.engagement_sum).sum();
        let pp: f64 = s.points.iter().map(|p| p.pp).sum();
        let _ = writeln!(
            engagement_tsv,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            s.topic,
            s.label,
            n_posts,
            eng,
            tally[0],
            tally[1],
            tally[2],
            fmt_real(pp)
        );
    }

    write_file(&out_path(cfg, SENTIMENT), &per_post)?;
    write_file(&out_path(cfg, SENTIMENT_DISTRIBUTION), &dist_tsv)?;
    write_file(&out_path(cfg, TOPIC_ENGAGEMENT), &engagement_tsv)?;
    write_file(&out_path(cfg, SERIES), &series_tsv(&series))?;
    write_file(&out_path(cfg, SENTIMENT_PLOT), &svg::bar_chart("Sentiment distribution", &bars))?;
    info!(
        "sentiment over {} posts: {} positive, {} neutral, {} negative",
        posts.len(),
        distribution[&SentimentLabel::Positive],
        distribution[&SentimentLabel::Neutral],
        distribution[&SentimentLabel::Negative]
    );
    Ok(ScoreSummary {
        distribution,
        precomputed: n_precomputed,
        series,
    })
}

/// Parses the series export back into per-topic series.
pub fn parse_series(text: &str) -> std::result::Result<Vec<TrendSeries>, String> {
    let mut by_topic: BTreeMap<usize, TrendSeries> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let bad = |what: &str| format!("line {}: bad {what}", idx + 1);
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(bad("row"));
        }
        let topic: usize = f[0].parse().map_err(|_| bad("topic id"))?;
        let month: YearMonth = f[2].parse().map_err(|_| bad("month"))?;
        let point = MonthlyTrendPoint {
            topic,
            month,
            n_posts: f[3].parse().map_err(|_| bad("post count"))?,
            engagement_sum: f[4].parse().map_err(|_| bad("engagement"))?,
            pp: f[5].parse().map_err(|_| bad("pp"))?,
        };
        let series = by_topic.entry(topic).or_insert_with(|| TrendSeries {
            topic,
            label: f[1].to_string(),
            points: Vec::new(),
        });
        if let Some(prev) = series.points.last() {
            if prev.month.succ() != month {
                return Err(format!("line {}: months of topic {topic} are not contiguous", idx + 1));
            }
        }
        series.points.push(point);
    }
    Ok(by_topic.into_values().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicForecast {
    pub topic: usize,
    pub label: String,
    pub months: Vec<YearMonth>,
    pub observed: Vec<f64>,
    pub forecast: Vec<f64>,
    pub verdict: TrendVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSummary {
    pub topics: Vec<TopicForecast>,
    pub skipped: Vec<usize>,
}

impl ForecastSummary {
    pub fn verdict_of(&self, topic: usize) -> Option<Trend> {
        self.topics.iter().find(|t| t.topic == topic).map(|t| t.verdict.trend)
    }
}

fn forecast_one(series: &TrendSeries, cfg: &PipelineConfig) -> std::result::Result<TopicForecast, String> {
    let observed = series.values(cfg.series);
    let model = fit(&observed, &cfg.forecast).map_err(|e| e.to_string())?;
    let forecast = model.predict(cfg.forecast.horizon);
    let verdict = classify_trend(&observed, &forecast, &cfg.verdict).map_err(|e| e.to_string())?;
    Ok(TopicForecast {
        topic: series.topic,
        label: series.label.clone(),
        months: series.months(),
        observed,
        forecast,
        verdict,
    })
}

pub fn cmd_forecast(cfg: &PipelineConfig) -> Result<ForecastSummary> {
    let path = out_path(cfg, SERIES);
    let text = read_stage_file(&path, "score")?;
    let all = parse_series(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;

    let outcomes: Vec<_> = all.par_iter().map(|s| forecast_one(s, cfg)).collect();
    let mut summary = ForecastSummary {
        topics: Vec::new(),
        skipped: Vec::new(),
    };
    for (series, outcome) in all.iter().zip(outcomes) {
        match outcome {
            Ok(f) => summary.topics.push(f),
            Err(reason) => {
                warn!("skipping topic {}: {reason}", series.topic);
                summary.skipped.push(series.topic);
            }
        }
    }

    let mut forecast_tsv = String::from("topic_id\tmonth\tkind\tvalue\n");
    let mut verdict_tsv = String::from("topic_id\ttopic_label\tverdict\tratio\tbase\tforecast_mean\n");
    for f in &summary.topics {
        let last = *f.months.last().expect("fitted series is non-empty");
        let future: Vec<YearMonth> = (1..=f.forecast.len() as i64).map(|k| last.add_months(k)).collect();
        for (m, v) in f.months.iter().zip(&f.observed) {
            let _ = writeln!(forecast_tsv, "{}\t{m}\tobserved\t{}", f.topic, fmt_real(*v));
        }
        for (m, v) in future.iter().zip(&f.forecast) {
            let _ = writeln!(forecast_tsv, "{}\t{m}\tforecast\t{}", f.topic, fmt_real(*v));
        }
        let ratio = f.verdict.ratio.map_or_else(|| "NA".to_string(), fmt_real);
        let _ = writeln!(
            verdict_tsv,
            "{}\t{}\t{}\t{}\t{}\t{}",
            f.topic,
            f.label,
            f.verdict.trend,
            ratio,
            fmt_real(f.verdict.base),
            fmt_real(f.verdict.fut)
        );
        let labels: Vec<String> = f.months.iter().chain(&future).map(YearMonth::to_string).collect();
        let title = format!("Topic {}: {} ({})", f.topic, f.label, f.verdict.trend);
        let plot = svg::line_chart(&title, &labels, &f.observed, &f.forecast);
        write_file(&cfg.out.join(PLOTS).join(format!("topic_{}.svg", f.topic)), &plot)?;
    }
    write_file(&out_path(cfg, FORECAST), &forecast_tsv)?;
    write_file(&out_path(cfg, VERDICTS), &verdict_tsv)?;
    for f in &summary.topics {
        info!("topic {} ({}): {}", f.topic, f.label, f.verdict.trend);
    }
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub ingest: IngestSummary,
    pub topics: TopicsSummary,
    pub score: ScoreSummary,
    pub forecast: ForecastSummary,
}

pub fn cmd_run(cfg: &PipelineConfig) -> Result<RunSummary> {
    Ok(RunSummary {
        ingest: cmd_ingest(cfg)?,
        topics: cmd_topics(cfg)?,
        score: cmd_score(cfg)?,
        forecast: cmd_forecast(cfg)?,
    })
}
