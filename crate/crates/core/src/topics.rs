//! Topics from clusters: class-based TF-IDF term weighting, centroid-based
//! topic merging, discarding, and topic assignment for posts.
//!
//! Term weights use the reduced class-based TF-IDF form
//!
//! ```text
//! W(t, c) = tf(t, c) * ln(1 + A / f(t))
//! ```
//!
//! where `f(t)` is the frequency of `t` across all classes and `A` the
//! average number of terms per class. Weights are non-negative.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::cluster::ClusterLabels;
use crate::embed::{cosine_similarity, DocVector};
use crate::textprep::TokenStream;

pub type TermCounts = BTreeMap<String, u64>;
pub type TermWeights = BTreeMap<String, f64>;

/// Slack for floating comparisons against similarity thresholds.
const SIM_EPS: f64 = 1e-12;

/// Per-class term counts over unigrams and n-grams; noise (−1) is skipped.
/// Index `c` holds the counts of cluster `c`.
pub fn class_term_frequencies(labels: &ClusterLabels, docs: &[TokenStream]) -> Vec<TermCounts> {
    assert_eq!(labels.labels.len(), docs.len(), "labels and docs must align");
    let mut classes = vec![TermCounts::new(); labels.n_clusters()];
    for (label, doc) in labels.labels.iter().zip(docs) {
        if *label < 0 {
            continue;
        }
        let counts = &mut classes[*label as usize];
        for term in doc.terms() {
            *counts.entry(term.to_string()).or_default() += 1;
        }
    }
    classes
}

/// `ln(1 + A / f(t))` per term. `A / f(t)` is evaluated as one division of
/// exact integers, so scaling every count by the same factor leaves each
/// value bit-identical.
pub fn idf_factors(classes: &[TermCounts]) -> TermWeights {
    let mut frequency: BTreeMap<&str, u64> = BTreeMap::new();
    let mut total: u64 = 0;
    for counts in classes {
        for (term, tf) in counts {
            *frequency.entry(term.as_str()).or_default() += tf;
            total += tf;
        }
    }
    let n_classes = classes.len() as u64;
    frequency
        .into_iter()
        .map(|(term, f)| {
            let ratio = total as f64 / (n_classes * f) as f64;
            (term.to_string(), ratio.ln_1p())
        })
        .collect()
}

/// Class-based TF-IDF weights, one map per class.
pub fn ctfidf(classes: &[TermCounts]) -> Vec<TermWeights> {
    let factors = idf_factors(classes);
    classes
        .iter()
        .map(|counts| {
            counts
                .iter()
                .map(|(term, tf)| (term.clone(), *tf as f64 * factors[term]))
                .collect()
        })
        .collect()
}

/// The `k` heaviest terms, ties broken lexicographically.
pub fn top_terms(weights: &TermWeights, k: usize) -> Vec<(String, f64)> {
    let mut ranked: Vec<(String, f64)> = weights.iter().map(|(t, w)| (t.clone(), *w)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicConfig {
    pub top_k: usize,
    /// Minimum centroid similarity for assigning a noise post.
    pub assign_threshold: f64,
    /// Width of the multi-topic band below the best similarity.
    pub assign_band: f64,
    pub merge_threshold: f64,
    /// Topic labels to drop along with their posts.
    pub discard: Vec<String>,
    pub min_size: usize,
}

impl Default for TopicConfig {
    fn default() -> Self {
        Self {
            top_k: 10,
            assign_threshold: 0.3,
            assign_band: 0.05,
            merge_threshold: 0.7,
            discard: Vec::new(),
            min_size: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topic {
    pub id: usize,
    pub top_terms: Vec<(String, f64)>,
    /// Top three terms joined by '_'.
    pub label: String,
    pub centroid: Vec<f64>,
    pub member_count: usize,
    /// Source clusters folded into this topic.
    pub clusters: Vec<usize>,
    term_counts: TermCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub topics: Vec<Topic>,
    pub assign_threshold: f64,
    pub assign_band: f64,
    pub merge_threshold: f64,
    top_k: usize,
    /// Cluster id -> topic id; `None` once the topic was discarded.
    cluster_topic: Vec<Option<usize>>,
}

fn unit_mean<'a>(vectors: impl Iterator<Item = (&'a [f64], f64)>, dim: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dim];
    for (v, weight) in vectors {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += weight * x;
        }
    }
    DocVector::normalized(sum).values().to_vec()
}

impl TopicModel {
    /// One topic per cluster, weighted and labeled but not yet merged or
    /// filtered.
    pub fn from_clusters(
        labels: &ClusterLabels,
        docs: &[TokenStream],
        vectors: &[DocVector],
        cfg: &TopicConfig,
    ) -> Self {
        assert_eq!(labels.labels.len(), vectors.len(), "labels and vectors must align");
        let dim = vectors.first().map_or(0, DocVector::dim);
        let classes = class_term_frequencies(labels, docs);
        let topics = classes
            .into_iter()
            .enumerate()
            .map(|(c, term_counts)| {
                let members: Vec<usize> = labels.members(c);
                let centroid = unit_mean(
                    members.iter().map(|&i| (vectors[i].values(), 1.0)),
                    dim,
                );
                Topic {
                    id: c,
                    top_terms: Vec::new(),
                    label: String::new(),
                    centroid,
                    member_count: members.len(),
                    clusters: vec![c],
                    term_counts,
                }
            })
            .collect();
        let mut model = Self {
            topics,
            assign_threshold: cfg.assign_threshold,
            assign_band: cfg.assign_band,
            merge_threshold: cfg.merge_threshold,
            top_k: cfg.top_k,
            cluster_topic: (0..labels.n_clusters()).map(Some).collect(),
        };
        model.reweight();
        model
    }

    /// Full construction: per-cluster topics, merging, then discarding.
    /// Returns the model and any discard-list warnings.
    pub fn build(
        labels: &ClusterLabels,
        docs: &[TokenStream],
        vectors: &[DocVector],
        cfg: &TopicConfig,
    ) -> (Self, Vec<String>) {
        let model = Self::from_clusters(labels, docs, vectors, cfg);
        let model = merge_topics(model, cfg.merge_threshold);
        discard_topics(model, &cfg.discard, cfg.min_size)
    }

    /// Recomputes c-TF-IDF, top terms, labels and dense ids.
    fn reweight(&mut self) {
        let classes: Vec<TermCounts> = self.topics.iter().map(|t| t.term_counts.clone()).collect();
        let weights = ctfidf(&classes);
        for (topic, w) in self.topics.iter_mut().zip(&weights) {
            topic.top_terms = top_terms(w, self.top_k);
            topic.label = topic
                .top_terms
                .iter()
                .take(3)
                .map(|(t, _)| t.as_str())
                .collect::<Vec<_>>()
                .join("_");
        }
        self.renumber();
    }

    fn renumber(&mut self) {
        self.cluster_topic.iter_mut().for_each(|slot| *slot = None);
        for (id, topic) in self.topics.iter_mut().enumerate() {
            topic.id = id;
            for &c in &topic.clusters {
                self.cluster_topic[c] = Some(id);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    /// Topic that absorbed `cluster`, if it survived.
    pub fn topic_of_cluster(&self, cluster: usize) -> Option<usize> {
        self.cluster_topic.get(cluster).copied().flatten()
    }

    /// Whether posts of `cluster` were dropped with a discarded topic.
    pub fn is_discarded_cluster(&self, cluster: usize) -> bool {
        cluster < self.cluster_topic.len() && self.cluster_topic[cluster].is_none()
    }

    /// Tab-separated report: id, label, member count and up to ten
    /// `term:weight` pairs with six decimals.
    pub fn report_tsv(&self) -> String {
        let mut out = String::from("topic_id\tlabel\tmember_count\ttop_terms\n");
        for t in &self.topics {
            let terms = t
                .top_terms
                .iter()
                .take(10)
                .map(|(term, w)| format!("{term}:{}", crate::fmt_real(*w)))
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(out, "{}\t{}\t{}\t{}", t.id, t.label, t.member_count, terms);
        }
        out
    }
}

fn most_similar_pair(topics: &[Topic], threshold: f64) -> Option<(usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..topics.len() {
        for j in i + 1..topics.len() {
            let sim = cosine_similarity(&topics[i].centroid, &topics[j].centroid);
            if sim + SIM_EPS < threshold {
                continue;
            }
            // strict improvement only, so earlier (smaller) pairs win ties
            if best.is_none_or(|(s, _, _)| sim > s) {
                best = Some((sim, i, j));
            }
        }
    }
    best.map(|(_, i, j)| (i, j))
}

/// Greedily merges the most similar pair of centroids while its similarity
/// reaches `threshold`. Terminates because every merge removes a topic.
pub fn merge_topics(mut model: TopicModel, threshold: f64) -> TopicModel {
    while let Some((keep, absorb)) = most_similar_pair(&model.topics, threshold) {
        let gone = model.topics.remove(absorb);
        let kept = &mut model.topics[keep];
        let dim = kept.centroid.len();
        kept.centroid = unit_mean(
            [
                (kept.centroid.as_slice(), kept.member_count as f64),
                (gone.centroid.as_slice(), gone.member_count as f64),
            ]
            .into_iter(),
            dim,
        );
        kept.member_count += gone.member_count;
        kept.clusters.extend(gone.clusters);
        kept.clusters.sort_unstable();
        for (term, tf) in gone.term_counts {
            *kept.term_counts.entry(term).or_default() += tf;
        }
        model.reweight();
    }
    model.merge_threshold = threshold;
    model
}

/// Drops topics named in `discard` (by label) or smaller than `min_size`.
/// Unknown labels produce warnings rather than errors.
pub fn discard_topics(
    mut model: TopicModel,
    discard: &[String],
    min_size: usize,
) -> (TopicModel, Vec<String>) {
    let labels: BTreeSet<&str> = model.topics.iter().map(|t| t.label.as_str()).collect();
    let warnings = discard
        .iter()
        .filter(|name| !labels.contains(name.as_str()))
        .map(|name| format!("discard list names unknown topic {name:?}"))
        .collect();
    model
        .topics
        .retain(|t| t.member_count >= min_size && !discard.contains(&t.label));
    model.renumber();
    (model, warnings)
}

/// Topics for one post. Clustered posts inherit their cluster's topic; noise
/// posts take every topic whose centroid similarity reaches the assignment
/// threshold and lies within the band of the best similarity.
pub fn assign_topics(vector: &DocVector, cluster: i64, model: &TopicModel) -> BTreeSet<usize> {
    if cluster >= 0 {
        return model.topic_of_cluster(cluster as usize).into_iter().collect();
    }
    let sims: Vec<f64> = model
        .topics
        .iter()
        .map(|t| cosine_similarity(vector.values(), &t.centroid))
        .collect();
    let Some(best) = sims.iter().copied().max_by(f64::total_cmp) else {
        return BTreeSet::new();
    };
    sims.iter()
        .enumerate()
        .filter(|(_, s)| {
            **s + SIM_EPS >= model.assign_threshold && **s + model.assign_band + SIM_EPS >= best
        })
        .map(|(i, _)| i)
        .collect()
}

/// Post id -> topic ids.
pub type TopicAssignment = BTreeMap<String, BTreeSet<usize>>;
