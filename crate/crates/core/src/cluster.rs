//! HDBSCAN over dense vectors.
//!
//! The pipeline is: core distances -> mutual-reachability minimum spanning
//! tree -> single-linkage dendrogram -> condensed tree -> excess-of-mass
//! cluster selection. Distances are computed exactly (O(n²) time, O(n)
//! memory). Parallelism is limited to independent per-point distance work, so
//! results do not depend on the thread count.
//!
//! Ties are broken lexicographically on point indices everywhere: the MST is
//! the unique minimum under the total order `(weight, a, b)` on edges.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::embed::{dot, DocVector};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("min_cluster_size must be at least 2, got {0}")]
    MinClusterSize(usize),
    #[error("min_samples must be at least 1, got {0}")]
    MinSamples(usize),
    #[error("point {index} has dimension {found}, expected {expected}")]
    Dimension {
        index: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterParams {
    min_cluster_size: usize,
    min_samples: usize,
}

impl ClusterParams {
    /// `min_samples` defaults to `min_cluster_size`.
    pub fn new(min_cluster_size: usize, min_samples: Option<usize>) -> Result<Self, ClusterError> {
        if min_cluster_size < 2 {
            return Err(ClusterError::MinClusterSize(min_cluster_size));
        }
        let min_samples = min_samples.unwrap_or(min_cluster_size);
        if min_samples < 1 {
            return Err(ClusterError::MinSamples(min_samples));
        }
        Ok(Self {
            min_cluster_size,
            min_samples,
        })
    }

    pub fn min_cluster_size(&self) -> usize {
        self.min_cluster_size
    }

    pub fn min_samples(&self) -> usize {
        self.min_samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    /// `1 - cos`, clamped to `[0, 2]`; 1.0 against a zero vector.
    Cosine,
}

/// Borrowed rows plus a metric.
#[derive(Debug, Clone)]
pub struct Points<'a> {
    rows: Vec<&'a [f64]>,
    norms: Vec<f64>,
    metric: Metric,
}

impl<'a> Points<'a> {
    pub fn new(rows: Vec<&'a [f64]>, metric: Metric) -> Result<Self, ClusterError> {
        if let Some(first) = rows.first() {
            let expected = first.len();
            if let Some((index, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != expected) {
                return Err(ClusterError::Dimension {
                    index,
                    expected,
                    found: row.len(),
                });
            }
        }
        let norms = rows.iter().map(|r| dot(r, r).sqrt()).collect();
        Ok(Self {
            rows,
            norms,
            metric,
        })
    }

    pub fn from_vectors(vectors: &'a [Vec<f64>], metric: Metric) -> Result<Self, ClusterError> {
        Self::new(vectors.iter().map(Vec::as_slice).collect(), metric)
    }

    pub fn from_docs(docs: &'a [DocVector]) -> Result<Self, ClusterError> {
        Self::new(docs.iter().map(DocVector::values).collect(), Metric::Cosine)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (u, v) = (self.rows[i], self.rows[j]);
        match self.metric {
            Metric::Euclidean => u
                .iter()
                .zip(v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            Metric::Cosine => {
                let denom = self.norms[i] * self.norms[j];
                if denom == 0.0 {
                    1.0
                } else {
                    (1.0 - dot(u, v) / denom).clamp(0.0, 2.0)
                }
            }
        }
    }
}

/// Distance from each point to its `min_samples`-th nearest other point;
/// `+inf` when fewer than `min_samples` other points exist.
pub fn core_distances(points: &Points<'_>, min_samples: usize) -> Vec<f64> {
    let n = points.len();
    if min_samples == 0 {
        return vec![0.0; n];
    }
    if n.saturating_sub(1) < min_samples {
        return vec![f64::INFINITY; n];
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut dists: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| points.distance(i, j))
                .collect();
            let k = min_samples - 1;
            let (_, kth, _) = dists.select_nth_unstable_by(k, f64::total_cmp);
            *kth
        })
        .collect()
}

pub fn mutual_reachability(core_i: f64, core_j: f64, distance: f64) -> f64 {
    core_i.max(core_j).max(distance)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

impl MstEdge {
    fn new(i: usize, j: usize, weight: f64) -> Self {
        Self {
            a: i.min(j),
            b: i.max(j),
            weight,
        }
    }

    fn order(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

/// Prim's algorithm on the implicit complete mutual-reachability graph.
/// Returns the edges sorted ascending by `(weight, a, b)`.
pub fn build_mst(points: &Points<'_>, core: &[f64]) -> Vec<MstEdge> {
    let n = points.len();
    assert_eq!(core.len(), n, "one core distance per point");
    if n < 2 {
        return Vec::new();
    }
    let sentinel = MstEdge {
        a: usize::MAX,
        b: usize::MAX,
        weight: f64::INFINITY,
    };
    let mut in_tree = vec![false; n];
    let mut best = vec![sentinel; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let tree = &in_tree;
        best.par_iter_mut()
            .enumerate()
            .with_min_len(512)
            .for_each(|(v, slot)| {
                if tree[v] {
                    return;
                }
                let w = mutual_reachability(core[current], core[v], points.distance(current, v));
                let candidate = MstEdge::new(current, v, w);
                if candidate.order(slot) == Ordering::Less {
                    *slot = candidate;
                }
            });
        let next = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&x, &y| best[x].order(&best[y]))
            .expect("vertices remain outside the tree");
        edges.push(best[next]);
        in_tree[next] = true;
        current = next;
    }
    edges.sort_by(MstEdge::order);
    edges
}

/// Merge step of the single-linkage dendrogram. Ids below `n` are points,
/// `n + k` is the cluster formed by the k-th merge.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Merge {
    left: usize,
    right: usize,
    weight: f64,
    size: usize,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Kruskal merge order over `edges`, which must be sorted ascending.
fn single_linkage(n: usize, edges: &[MstEdge]) -> Vec<Merge> {
    // component roots point at dendrogram labels; `label[root]` names the
    // current dendrogram node of that component
    let mut uf = UnionFind::new(n);
    let mut label: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; 2 * n];
    let mut merges = Vec::with_capacity(edges.len());
    for (k, e) in edges.iter().enumerate() {
        let (ra, rb) = (uf.find(e.a), uf.find(e.b));
        debug_assert_ne!(ra, rb, "MST edges never close a cycle");
        let (left, right) = (label[ra], label[rb]);
        let node = n + k;
        let size = sizes[left] + sizes[right];
        sizes[node] = size;
        merges.push(Merge {
            left,
            right,
            weight: e.weight,
            size,
        });
        uf.parent[rb] = ra;
        label[ra] = node;
    }
    merges
}

fn weight_to_lambda(weight: f64) -> f64 {
    if weight > 0.0 {
        1.0 / weight
    } else {
        f64::INFINITY
    }
}

/// `a - b` for `a >= b` where both may be infinite.
fn lambda_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        a - b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondensedNode {
    pub id: usize,
    pub parent: Option<usize>,
    /// λ = 1/weight at which this cluster split from its parent; 0 for the root.
    pub lambda_birth: f64,
    /// Points that fell out of this cluster, with their λ.
    pub points: Vec<(usize, f64)>,
    pub children: Vec<usize>,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondensedTree {
    pub nodes: Vec<CondensedNode>,
    pub n_points: usize,
}

impl CondensedTree {
    pub fn root(&self) -> Option<&CondensedNode> {
        self.nodes.first()
    }

    /// Excess of mass: Σ over points leaving the cluster of (λ_p − λ_birth),
    /// with a child cluster counting all its points at the split λ.
    pub fn stability(&self, id: usize) -> f64 {
        let node = &self.nodes[id];
        let birth = node.lambda_birth;
        let from_points: f64 = node.points.iter().map(|(_, l)| lambda_gap(*l, birth)).sum();
        let from_children: f64 = node
            .children
            .iter()
            .map(|&c| {
                let child = &self.nodes[c];
                lambda_gap(child.lambda_birth, birth) * child.size as f64
            })
            .sum();
        from_points + from_children
    }

    /// Indented text dump: one line per node with id, parent, λ_birth, size.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut stack: Vec<(usize, usize)> = self.root().map(|r| (r.id, 0)).into_iter().collect();
        while let Some((id, depth)) = stack.pop() {
            let node = &self.nodes[id];
            let parent = node.parent.map_or_else(|| "-".to_string(), |p| p.to_string());
            let _ = writeln!(
                out,
                "{}node {} parent {} lambda_birth {} size {}",
                "  ".repeat(depth),
                node.id,
                parent,
                format_lambda(node.lambda_birth),
                node.size
            );
            stack.extend(node.children.iter().rev().map(|&c| (c, depth + 1)));
        }
        out
    }
}

fn format_lambda(lambda: f64) -> String {
    if lambda.is_infinite() {
        "inf".to_string()
    } else {
        format!("{lambda:.6}")
    }
}

/// Builds the condensed tree from MST edges sorted ascending.
pub fn condense_tree(n: usize, mst: &[MstEdge], min_cluster_size: usize) -> CondensedTree {
    if n == 0 {
        return CondensedTree {
            nodes: Vec::new(),
            n_points: 0,
        };
    }
    let merges = single_linkage(n, mst);
    let size_of = |node: usize| if node < n { 1 } else { merges[node - n].size };

    let mut nodes = vec![CondensedNode {
        id: 0,
        parent: None,
        lambda_birth: 0.0,
        points: Vec::new(),
        children: Vec::new(),
        size: n,
    }];
    if merges.len() + 1 < n {
        // disconnected input: every point leaves the root immediately
        nodes[0].points = (0..n).map(|p| (p, 0.0)).collect();
        return CondensedTree { nodes, n_points: n };
    }

    let emit_points = |nodes: &mut Vec<CondensedNode>, cluster: usize, from: usize, lambda: f64| {
        let mut stack = vec![from];
        while let Some(node) = stack.pop() {
            if node < n {
                nodes[cluster].points.push((node, lambda));
            } else {
                let m = merges[node - n];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
    };

    let top = if n == 1 { 0 } else { 2 * n - 2 };
    let mut work = vec![(top, 0usize)];
    while let Some((node, cluster)) = work.pop() {
        if node < n {
            nodes[cluster].points.push((node, f64::INFINITY));
            continue;
        }
        let m = merges[node - n];
        let lambda = weight_to_lambda(m.weight);
        let left_big = size_of(m.left) >= min_cluster_size;
        let right_big = size_of(m.right) >= min_cluster_size;
        match (left_big, right_big) {
            (true, true) => {
                let mut spawn = |child: usize| {
                    let id = nodes.len();
                    nodes.push(CondensedNode {
                        id,
                        parent: Some(cluster),
                        lambda_birth: lambda,
                        points: Vec::new(),
                        children: Vec::new(),
                        size: size_of(child),
                    });
                    nodes[cluster].children.push(id);
                    id
                };
                let left_id = spawn(m.left);
                let right_id = spawn(m.right);
                work.push((m.right, right_id));
                work.push((m.left, left_id));
            }
            (true, false) => {
                emit_points(&mut nodes, cluster, m.right, lambda);
                work.push((m.left, cluster));
            }
            (false, true) => {
                emit_points(&mut nodes, cluster, m.left, lambda);
                work.push((m.right, cluster));
            }
            (false, false) => {
                emit_points(&mut nodes, cluster, m.left, lambda);
                emit_points(&mut nodes, cluster, m.right, lambda);
            }
        }
    }
    for node in &mut nodes {
        node.points.sort_by_key(|(p, _)| *p);
    }
    CondensedTree { nodes, n_points: n }
}

/// Per-point labels, −1 for noise, clusters numbered `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    pub labels: Vec<i64>,
}

impl ClusterLabels {
    pub fn n_clusters(&self) -> usize {
        self.labels
            .iter()
            .copied()
            .max()
            .map_or(0, |m| (m + 1).max(0) as usize)
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == cluster as i64)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| **l < 0).count()
    }
}

/// Which condensed nodes excess-of-mass selection keeps. The root is never
/// selected; a node beats its descendants when its stability is at least
/// the sum of their best selections.
pub fn select_clusters(tree: &CondensedTree) -> Vec<usize> {
    let count = tree.nodes.len();
    let mut best = vec![0.0f64; count];
    let mut keep = vec![false; count];
    // children always carry larger ids than their parent
    for id in (1..count).rev() {
        let own = tree.stability(id);
        let node = &tree.nodes[id];
        let below: f64 = node.children.iter().map(|&c| best[c]).sum();
        if node.children.is_empty() || own >= below {
            keep[id] = true;
            best[id] = own;
        } else {
            best[id] = below;
        }
    }
    let mut chosen = Vec::new();
    let mut stack: Vec<usize> = tree
        .root()
        .map(|r| r.children.iter().rev().copied().collect())
        .unwrap_or_default();
    while let Some(id) = stack.pop() {
        if keep[id] {
            chosen.push(id);
        } else {
            stack.extend(tree.nodes[id].children.iter().rev());
        }
    }
    chosen
}

pub fn extract_clusters(tree: &CondensedTree) -> ClusterLabels {
    let n = tree.n_points;
    let chosen = select_clusters(tree);
    let mut owner: Vec<Option<usize>> = vec![None; tree.nodes.len()];
    for &c in &chosen {
        owner[c] = Some(c);
    }
    // parents precede children, so one forward pass propagates ownership
    for id in 1..tree.nodes.len() {
        if owner[id].is_none() {
            owner[id] = tree.nodes[id].parent.and_then(|p| owner[p]);
        }
    }
    let mut raw: Vec<Option<usize>> = vec![None; n];
    for node in &tree.nodes {
        for &(p, _) in &node.points {
            raw[p] = owner[node.id];
        }
    }

    // renumber by decreasing size, then smallest member index
    let mut stats: Vec<(usize, usize, usize)> = chosen
        .iter()
        .map(|&c| {
            let members = raw.iter().filter(|r| **r == Some(c));
            let size = members.count();
            let first = raw.iter().position(|r| *r == Some(c)).unwrap_or(usize::MAX);
            (c, size, first)
        })
        .collect();
    stats.sort_by(|x, y| y.1.cmp(&x.1).then(x.2.cmp(&y.2)));
    let mut rename = vec![-1i64; tree.nodes.len()];
    for (new_id, (c, _, _)) in stats.iter().enumerate() {
        rename[*c] = new_id as i64;
    }
    ClusterLabels {
        labels: raw.iter().map(|r| r.map_or(-1, |c| rename[c])).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct HdbscanOutput {
    pub labels: ClusterLabels,
    pub core_distances: Vec<f64>,
    pub mst: Vec<MstEdge>,
    pub tree: CondensedTree,
}

pub fn hdbscan(points: &Points<'_>, params: &ClusterParams) -> HdbscanOutput {
    let n = points.len();
    let core_distances = core_distances(points, params.min_samples());
    let mst = build_mst(points, &core_distances);
    let tree = condense_tree(n, &mst, params.min_cluster_size());
    let labels = if n < params.min_cluster_size() {
        ClusterLabels {
            labels: vec![-1; n],
        }
    } else {
        extract_clusters(&tree)
    };
    HdbscanOutput {
        labels,
        core_distances,
        mst,
        tree,
    }
}
