//! Synthetic corpora and config files for CLI-level tests.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GROWTH_VOCAB: &[&str] = &[
    "مهرجان", "موسم", "سياحة", "ترفيه", "فعاليات", "رحلة", "شاطئ", "متحف", "ثقافة", "مسرح", "حفلة", "جولة",
];
pub const GROWTH_SENTIMENT: &[&str] = &["رائع", "ممتاز", "جميل", "نجاح", "سعيد", "مذهل"];
pub const DECAY_VOCAB: &[&str] = &[
    "traffic", "congestion", "highway", "commute", "roadwork", "detour", "gridlock", "parking", "lanes", "exit",
    "ramp", "tolls",
];
pub const DECAY_SENTIMENT: &[&str] = &["terrible", "awful", "worst", "angry", "bad", "slow"];

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub jsonl: String,
    /// Ids of posts planted in each topic (growth, decay).
    pub growth_ids: Vec<String>,
    pub decay_ids: Vec<String>,
}

fn post_text(rng: &mut ChaCha8Rng, vocab: &[&str], sentiment: &[&str]) -> String {
    let n_topic = rng.random_range(5..=7);
    let mut words: Vec<&str> = vocab.choose_multiple(rng, n_topic).copied().collect();
    words.extend(sentiment.choose_multiple(rng, 2).copied());
    words.join(" ")
}

#[allow(clippy::too_many_arguments)]
fn record(id: &str, year: i32, month: u32, day: u32, text: &str, lang: &str, likes: u64, shares: u64, comments: u64) -> String {
    format!(
        r#"{{"id":"{id}","platform":"x","timestamp":"{year:04}-{month:02}-{day:02}T12:00:00Z","text":"{text}","lang":"{lang}","geo":"SA","likes":{likes},"shares":{shares},"comments":{comments},"saves":3}}"#
    )
}

/// Two vocabulary-disjoint topics over `months` months from January 2020:
/// an Arabic positive topic growing 10% per month in volume and engagement,
/// and an English negative topic decaying 10% per month. A few irrelevant,
/// duplicate and malformed lines are mixed in.
pub fn synthetic_corpus(seed: u64, months: usize) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let mut growth_ids = Vec::new();
    let mut decay_ids = Vec::new();
    for m in 0..months {
        let year = 2020 + (m / 12) as i32;
        let month = (m % 12) as u32 + 1;
        let up = 1.1f64.powi(m as i32);
        let down = 0.9f64.powi(m as i32);

        for k in 0..(4.0 * up).round() as usize {
            let id = format!("g{m:02}_{k:03}");
            let text = post_text(&mut rng, GROWTH_VOCAB, GROWTH_SENTIMENT);
            let likes = (6.0 * up).round() as u64 + rng.random_range(0..3);
            let day = rng.random_range(1..=28);
            lines.push(record(&id, year, month, day, &text, "ar", likes, 2, 1));
            growth_ids.push(id);
        }
        for k in 0..((50.0 * down).round() as usize).max(1) {
            let id = format!("d{m:02}_{k:03}");
            let text = post_text(&mut rng, DECAY_VOCAB, DECAY_SENTIMENT);
            let likes = (20.0 * down).round() as u64 + rng.random_range(0..3);
            let day = rng.random_range(1..=28);
            lines.push(record(&id, year, month, day, &text, "en", likes, 1, 1));
            decay_ids.push(id);
        }
        if m % 6 == 0 {
            // irrelevant: wrong geo, no target hashtag
            lines.push(
                record(&format!("x{m:02}"), year, month, 5, "paris weekend", "en", 1, 0, 0).replace("\"SA\"", "\"FR\""),
            );
        }
    }
    // duplicates keep the first occurrence; malformed lines are rejected
    let dup = lines[0].clone();
    lines.push(dup);
    lines.push("{not json".to_string());
    lines.push(r#"{"id":"bad","platform":"x","timestamp":"2020-13-01T00:00:00Z","text":"x"}"#.to_string());
    let mut jsonl = String::new();
    for l in lines {
        let _ = writeln!(jsonl, "{l}");
    }
    SyntheticCorpus {
        jsonl,
        growth_ids,
        decay_ids,
    }
}

/// Writes `raw.jsonl` and `config.toml` into `dir` and returns the config path.
pub fn write_workspace(dir: &Path, corpus: &str, extra_config: &str) -> PathBuf {
    fs::write(dir.join("raw.jsonl"), corpus).unwrap();
    let config = format!(
        r#"out = "out"
workers = 1
debug_dump = true
{extra_config}

[input]
corpus = "raw.jsonl"

[relevance]
geo = ["SA"]
hashtags = ["saudi"]

[cluster]
min_cluster_size = 10
"#
    );
    let path = dir.join("config.toml");
    fs::write(&path, config).unwrap();
    path
}

/// Every file under `dir`, relative path to contents, sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}
