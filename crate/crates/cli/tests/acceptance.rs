//! Acceptance gate. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use trendpulse::cluster::{build_mst, core_distances, hdbscan, mutual_reachability, ClusterParams, Metric, Points};
use trendpulse::corpus::{Platform, Post, YearMonth};
use trendpulse::forecast::{fit, ForecastParams, Trend};
use trendpulse::pulse::{build_series, pulse_potential};
use trendpulse::textprep::{clean_text, normalize, tokenize, NormalizationConfig, Preprocessor};
use trendpulse::topics::{ctfidf, top_terms, TermCounts, TopicAssignment};
use trendpulse_cli::pipeline::ASSIGNMENTS;
use trendpulse_cli::{cmd_run, execute, Overrides, PipelineConfig, Stage};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------- 1. MST oracle ----------

/// Minimum spanning tree weight by decoding every Prüfer sequence.
fn exhaustive_mst_weight(n: usize, w: &dyn Fn(usize, usize) -> f64) -> f64 {
    if n == 2 {
        return w(0, 1);
    }
    let len = n - 2;
    let mut seq = vec![0usize; len];
    let mut best = f64::INFINITY;
    loop {
        let mut degree = vec![1usize; n];
        for &s in &seq {
            degree[s] += 1;
        }
        let mut total = 0.0;
        for &s in &seq {
            let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
            total += w(leaf, s);
            degree[leaf] -= 1;
            degree[s] -= 1;
        }
        let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
        total += w(rest[0], rest[1]);
        best = best.min(total);
        let mut i = 0;
        while i < len {
            seq[i] += 1;
            if seq[i] < n {
                break;
            }
            seq[i] = 0;
            i += 1;
        }
        if i == len {
            return best;
        }
    }
}

fn unit_vectors(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
            let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / len).collect()
        })
        .collect()
}

fn criterion_mst() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let n = rng.random_range(2..=8);
        let ms = rng.random_range(1..=3);
        let data = unit_vectors(&mut rng, n, 3);
        let pts = Points::from_vectors(&data, Metric::Euclidean).unwrap();
        let core = core_distances(&pts, ms);
        let mst = build_mst(&pts, &core);
        check(mst.len() == n - 1, format!("case {case}: {} edges for n={n}", mst.len()))?;
        let ours: f64 = mst.iter().map(|e| e.weight).sum();
        let oracle = exhaustive_mst_weight(n, &|i, j| mutual_reachability(core[i], core[j], pts.distance(i, j)));
        if oracle.is_infinite() && ours.is_infinite() {
            continue;
        }
        let diff = (ours - oracle).abs();
        worst = worst.max(diff);
        check(diff <= 1e-9, format!("case {case}: n={n} ms={ms} ours={ours} oracle={oracle}"))?;
    }
    Ok(format!("200 sets, max |diff| = {worst:.2e}"))
}

// ---------- 2. HDBSCAN recovery ----------

fn adjusted_rand_index(a: &[i64], b: &[i64]) -> f64 {
    let mut table: HashMap<(i64, i64), u64> = HashMap::new();
    let mut rows: HashMap<i64, u64> = HashMap::new();
    let mut cols: HashMap<i64, u64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((*x, *y)).or_default() += 1;
        *rows.entry(*x).or_default() += 1;
        *cols.entry(*y).or_default() += 1;
    }
    let c2 = |v: u64| (v * v.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.values().map(|v| c2(*v)).sum();
    let sa: f64 = rows.values().map(|v| c2(*v)).sum();
    let sb: f64 = cols.values().map(|v| c2(*v)).sum();
    let expected = sa * sb / c2(a.len() as u64);
    let max = (sa + sb) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

const NOISE_PAD: f64 = 3.0;

fn criterion_hdbscan() -> Outcome {
    let centers = [[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]];
    let mut good = 0;
    let mut noise_hits = 0;
    let mut aris = Vec::new();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.05).unwrap();
        let mut data = Vec::new();
        let mut truth = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..50 {
                data.push(vec![center[0] + normal.sample(&mut rng), center[1] + normal.sample(&mut rng)]);
                truth.push(c as i64);
            }
        }
        // background noise over the blobs' bounding box widened by NOISE_PAD
        for _ in 0..10 {
            data.push(vec![
                rng.random_range(-NOISE_PAD..1.0 + NOISE_PAD),
                rng.random_range(-NOISE_PAD..centers[2][1] + NOISE_PAD),
            ]);
            truth.push(-1);
        }
        let pts = Points::from_vectors(&data, Metric::Euclidean).unwrap();
        let labels = hdbscan(&pts, &ClusterParams::new(10, None).unwrap()).labels.labels;
        let ari = adjusted_rand_index(&truth, &labels);
        if ari >= 0.95 {
            good += 1;
        }
        noise_hits += labels[150..].iter().filter(|l| **l == -1).count();
        aris.push(ari);
    }
    let mean_noise = noise_hits as f64 / 20.0;
    let min_ari = aris.iter().copied().fold(f64::INFINITY, f64::min);
    let detail = format!("ARI >= 0.95 on {good}/20 seeds (min {min_ari:.3}), mean noise recovered {mean_noise:.1}/10");
    check(good >= 18 && mean_noise >= 8.0, detail.clone())?;
    Ok(detail)
}

// ---------- 3. c-TF-IDF fixture ----------

fn criterion_ctfidf() -> Outcome {
    let counts = |pairs: &[(&str, u64)]| -> TermCounts { pairs.iter().map(|(t, c)| (t.to_string(), *c)).collect() };
    let classes = vec![counts(&[("a", 2), ("b", 1)]), counts(&[("b", 2), ("c", 2)])];
    let w = ctfidf(&classes);
    let expected = 2.0 * 2.75f64.ln();
    check((w[0]["a"] - expected).abs() <= 1e-9, format!("W(a,c1) = {} vs {expected}", w[0]["a"]))?;

    let scaled: Vec<TermCounts> = classes
        .iter()
        .map(|m| m.iter().map(|(k, v)| (k.clone(), v * 7)).collect())
        .collect();
    let ws = ctfidf(&scaled);
    for (c, (a, b)) in w.iter().zip(&ws).enumerate() {
        for (term, v) in a {
            check(b[term] == 7.0 * v, format!("class {c} term {term}: {} != 7 * {v}", b[term]))?;
        }
        check(top_terms(a, 10).iter().map(|t| &t.0).eq(top_terms(b, 10).iter().map(|t| &t.0)), "ranking changed")?;
    }
    Ok(format!("W(a,c1) = {:.12}, x7 scaling exact", w[0]["a"]))
}

// ---------- 4. Pulse Potential ----------

fn criterion_pulse() -> Outcome {
    check(pulse_potential(&[(1.0, 10), (-1.0, 4), (0.0, 100)]) == 6.0, "hand fixture != 6")?;
    check(pulse_potential(&[]) == 0.0, "empty sum != 0")?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let levels = [-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0];
    let draw = |rng: &mut ChaCha8Rng| -> Vec<(f64, u64)> {
        let n = rng.random_range(0..50);
        (0..n)
            .map(|_| (levels[rng.random_range(0..levels.len())], rng.random_range(0..100_000)))
            .collect()
    };
    for case in 0..1000 {
        let a = draw(&mut rng);
        let b = draw(&mut rng);
        let flipped: Vec<_> = a.iter().map(|(s, e)| (-s, *e)).collect();
        check(pulse_potential(&flipped) == -pulse_potential(&a), format!("case {case}: antisymmetry"))?;
        let union: Vec<_> = a.iter().chain(&b).copied().collect();
        check(
            pulse_potential(&union) == pulse_potential(&a) + pulse_potential(&b),
            format!("case {case}: additivity"),
        )?;
        let total: u64 = a.iter().map(|(_, e)| e).sum();
        check(pulse_potential(&a).abs() <= total as f64, format!("case {case}: bound"))?;
    }

    // through the series builder: a two-topic post counts fully in both
    let post = |id: &str, likes: u64| Post {
        id: id.into(),
        platform: Platform::X,
        timestamp: "2021-05-02T00:00:00Z".parse().unwrap(),
        text: String::new(),
        lang_hint: None,
        geo: None,
        hashtags: BTreeSet::new(),
        likes,
        shares: 0,
        comments: 0,
        saves: 50,
    };
    let posts = vec![post("p", 10), post("q", 4), post("r", 100)];
    let assignments: TopicAssignment = [
        ("p".to_string(), BTreeSet::from([0, 1])),
        ("q".to_string(), BTreeSet::from([0])),
        ("r".to_string(), BTreeSet::from([0])),
    ]
    .into();
    let sentiment: BTreeMap<String, f64> = [("p".into(), 1.0), ("q".into(), -1.0), ("r".into(), 0.0)].into();
    let month = YearMonth::new(2021, 5).unwrap();
    let series = build_series(&posts, &assignments, &sentiment, &["t0".into(), "t1".into()], month, month)
        .map_err(|e| e.to_string())?;
    check(series[0].points[0].pp == 6.0 && series[1].points[0].pp == 10.0, "series builder fixture")?;
    Ok("hand fixture 6, 1000 random antisymmetry/additivity/bound cases exact".into())
}

// ---------- 5. Forecaster ----------

fn criterion_forecast() -> Outcome {
    let params = ForecastParams::default();
    let n = 36;
    let truth = |i: usize| 3.0 + 2.0 * i as f64 / (n - 1) as f64;
    let y: Vec<f64> = (0..n).map(truth).collect();
    let model = fit(&y, &params).map_err(|e| e.to_string())?;
    let mut line_err: f64 = 0.0;
    for (i, v) in model.fitted().iter().chain(&model.predict(12)).enumerate() {
        line_err = line_err.max((v - truth(i)).abs());
    }
    check(line_err <= 1e-6, format!("line max error {line_err:e}"))?;

    let y: Vec<f64> = (0..48)
        .map(|i| 10.0 + 5.0 * (std::f64::consts::TAU * i as f64 / 12.0).sin())
        .collect();
    let model = fit(&y, &params).map_err(|e| e.to_string())?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(model.fitted()).map(|(a, f)| (a - f).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    check(r2 >= 0.99, format!("sinusoid R^2 {r2}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cont: f64 = 0.0;
    let mut shift: f64 = 0.0;
    for _ in 0..200 {
        let len = rng.random_range(3..=60);
        let y: Vec<f64> = (0..len).map(|_| rng.random_range(-100.0..100.0)).collect();
        let a = fit(&y, &params).map_err(|e| e.to_string())?;
        for (j, s) in a.changepoints.iter().enumerate() {
            cont = cont.max((a.segment_trend(*s, j) - a.segment_trend(*s, j + 1)).abs());
        }
        let c = rng.random_range(-100.0..100.0);
        let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
        let b = fit(&shifted, &params).map_err(|e| e.to_string())?;
        for (pa, pb) in a.predict(12).iter().zip(b.predict(12)) {
            shift = shift.max((pa + c - pb).abs());
        }
    }
    check(cont <= 1e-9, format!("continuity gap {cont:e}"))?;
    check(shift <= 1e-9, format!("shift invariance error {shift:e}"))?;
    Ok(format!(
        "line err {line_err:.1e}, sinusoid R^2 {r2:.5}, continuity {cont:.1e}, shift {shift:.1e}"
    ))
}

// ---------- 6. End to end ----------

/// Most common topic among the planted ids.
fn majority_topic(assignments: &str, ids: &[String]) -> Option<usize> {
    let wanted: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for line in assignments.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        if wanted.contains(f[0]) {
            for t in f[2].split(',').filter_map(|t| t.parse().ok()) {
                *votes.entry(t).or_default() += 1;
            }
        }
    }
    votes.into_iter().max_by_key(|(t, v)| (*v, std::cmp::Reverse(*t))).map(|(t, _)| t)
}

fn criterion_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = common::synthetic_corpus(36, 36);
    let config = common::write_workspace(dir.path(), &corpus.jsonl, "");
    let cfg = PipelineConfig::load(&config, &Overrides::default()).map_err(|e| e.to_string())?;
    let summary = cmd_run(&cfg).map_err(|e| e.to_string())?;
    let n_topics = summary.topics.n_topics;
    check(n_topics >= 2, format!("only {n_topics} topics"))?;
    let assignments = fs::read_to_string(cfg.out.join(ASSIGNMENTS)).map_err(|e| e.to_string())?;
    let growth = majority_topic(&assignments, &corpus.growth_ids).ok_or("growth posts have no topic")?;
    let decay = majority_topic(&assignments, &corpus.decay_ids).ok_or("decay posts have no topic")?;
    check(growth != decay, "both planted topics map to one topic")?;
    let g = summary.forecast.verdict_of(growth);
    let d = summary.forecast.verdict_of(decay);
    let detail = format!(
        "{n_topics} topics over {} posts; growth topic {growth}: {g:?}, decay topic {decay}: {d:?}",
        summary.ingest.kept
    );
    check(g == Some(Trend::Growing) && d == Some(Trend::Diminishing), detail.clone())?;
    Ok(detail)
}

// ---------- 7. Text preprocessing ----------

fn fuzz_string(rng: &mut ChaCha8Rng) -> String {
    const POOLS: &[(u32, u32)] = &[
        (0x20, 0x7e),
        (0x0600, 0x06ff),
        (0x064b, 0x065f),
        (0x0750, 0x077f),
        (0xfb50, 0xfdff),
        (0xfe70, 0xfeff),
        (0x0300, 0x036f),
        (0x00c0, 0x024f),
        (0x1f300, 0x1faff),
        (0x1f1e6, 0x1f1ff),
        (0x2000, 0x206f),
        (0x0400, 0x04ff),
        (0x4e00, 0x4e80),
        (0xac00, 0xac40),
    ];
    let len = rng.random_range(0..40);
    let mut s = String::new();
    for _ in 0..len {
        let c = if rng.random_bool(0.1) {
            // anything at all
            loop {
                if let Some(c) = char::from_u32(rng.random_range(0..0x110000)) {
                    break c;
                }
            }
        } else {
            let (lo, hi) = POOLS[rng.random_range(0..POOLS.len())];
            char::from_u32(rng.random_range(lo..=hi)).unwrap_or(' ')
        };
        s.push(c);
        if rng.random_bool(0.05) {
            s.push_str(["http://x.co/a", " @who ", " #Tag ", "\u{200d}", "\u{fe0f}", "ـ"][rng.random_range(0..6)]);
        }
    }
    s
}

fn criterion_textprep() -> Outcome {
    let cfg = NormalizationConfig::default();
    let pre = Preprocessor::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut tokens_seen = 0usize;
    for case in 0..10_000 {
        let s = fuzz_string(&mut rng);
        let once = normalize(&s, &cfg);
        check(normalize(&once, &cfg) == once, format!("case {case}: normalize not idempotent on {s:?}"))?;
        let cleaned = clean_text(&s, &cfg);
        check(clean_text(&cleaned, &cfg) == cleaned, format!("case {case}: clean_text not idempotent on {s:?}"))?;
        let a = pre.process("id", &s, None);
        let b = pre.clone().process("id", &s, None);
        check(a == b, format!("case {case}: chain not deterministic on {s:?}"))?;
        check(a.terms().all(|t| !t.is_empty()), format!("case {case}: empty token from {s:?}"))?;
        check(tokenize(&cleaned).iter().all(|t| !t.is_empty()), format!("case {case}: empty raw token"))?;
        tokens_seen += a.unigrams.len();
    }
    Ok(format!("10000 fuzzed strings, {tokens_seen} tokens, none empty"))
}

// ---------- 8. Determinism across workers ----------

fn criterion_determinism() -> Outcome {
    let corpus = common::synthetic_corpus(8, 36);
    let mut snapshots = Vec::new();
    for workers in [1usize, 2, 8] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let config = common::write_workspace(dir.path(), &corpus.jsonl, "");
        let overrides = Overrides {
            workers: Some(workers),
            ..Overrides::default()
        };
        let cfg = PipelineConfig::load(&config, &overrides).map_err(|e| e.to_string())?;
        execute(Stage::Run, &cfg).map_err(|e| e.to_string())?;
        snapshots.push((workers, common::snapshot(&cfg.out)));
    }
    let (_, reference) = &snapshots[0];
    for (workers, snap) in &snapshots[1..] {
        let names = |s: &Vec<(String, Vec<u8>)>| s.iter().map(|f| f.0.clone()).collect::<Vec<_>>();
        check(names(snap) == names(reference), format!("{workers} workers wrote a different file set"))?;
        for ((name, a), (_, b)) in reference.iter().zip(snap) {
            check(a == b, format!("{name} differs between 1 and {workers} workers"))?;
        }
    }
    Ok(format!("{} files byte-identical for 1, 2 and 8 workers", reference.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 MST oracle", criterion_mst),
        ("2 HDBSCAN recovery", criterion_hdbscan),
        ("3 c-TF-IDF fixture", criterion_ctfidf),
        ("4 Pulse Potential", criterion_pulse),
        ("5 Forecaster", criterion_forecast),
        ("6 End-to-end trends", criterion_end_to_end),
        ("7 Text preprocessing", criterion_textprep),
        ("8 Worker determinism", criterion_determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} ({secs:.1}s)");
            }
        }
    }
    println!("acceptance: {}/8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
