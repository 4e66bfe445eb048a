//! Grouping of binarized features into modules.
//!
//! Features are nodes; edges carry the Jaccard similarity of their minority
//! sample sets when it exceeds a threshold. Modules are communities found
//! by Louvain modularity optimization (default) or, alternatively, by
//! thresholding the topological overlap matrix at the most scale-free
//! cutoff and taking connected components.
//!
//! Everything here is deterministic for a fixed seed: adjacency lists are
//! sorted, community bookkeeping uses dense arrays instead of hash maps,
//! and node visit order comes from a seeded shuffle of a canonical order.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binarize::{BinarizedFeature, Direction};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionMode {
    /// Cluster up- and down-regulated features in two separate graphs.
    Separate,
    /// Cluster all features together; modules may mix directions.
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clustering {
    Louvain { resolution: f64 },
    Tom { cutoffs: Vec<f64> },
}

impl Clustering {
    pub fn default_louvain() -> Self {
        Clustering::Louvain { resolution: 1.0 }
    }

    /// Candidate TOM cutoffs 0.05..0.95 in steps of 0.05.
    pub fn default_tom() -> Self {
        Clustering::Tom { cutoffs: (1..=19).map(|i| i as f64 * 0.05).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModuleMode {
    Up,
    Down,
    Mixed,
}

/// A feature module: member rows of the matrix with per-member signs.
/// In a mixed module the majority direction carries sign +1.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureModule {
    pub members: Vec<usize>,
    pub signs: Vec<i8>,
    pub mode: ModuleMode,
}

/// Jaccard similarity of two sorted index sets.
pub fn jaccard(a: &[u32], b: &[u32]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let mut inter = 0usize;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Undirected weighted graph over `n` nodes with sorted adjacency lists.
#[derive(Debug, Clone)]
pub struct FeatureGraph {
    adj: Vec<Vec<(u32, f64)>>,
}

impl FeatureGraph {
    pub fn new(n: usize) -> Self {
        FeatureGraph { adj: vec![Vec::new(); n] }
    }

    pub fn from_edges(n: usize, edges: &[(u32, u32, f64)]) -> Self {
        let mut g = FeatureGraph::new(n);
        for &(a, b, w) in edges {
            assert!(a != b && (a as usize) < n && (b as usize) < n);
            g.adj[a as usize].push((b, w));
            g.adj[b as usize].push((a, w));
        }
        for list in &mut g.adj {
            list.sort_unstable_by_key(|&(nb, _)| nb);
        }
        g
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, node: usize) -> &[(u32, f64)] {
        &self.adj[node]
    }

    pub fn weighted_degree(&self, node: usize) -> f64 {
        self.adj[node].iter().map(|&(_, w)| w).sum()
    }
}

/// Builds the similarity graph over minority sets; an edge exists where
/// Jaccard similarity strictly exceeds `threshold`.
pub fn build_similarity_graph(sets: &[&[u32]], n_samples: usize, threshold: f64) -> FeatureGraph {
    let n = sets.len();
    let words = n_samples.div_ceil(64);
    let mut bits = vec![0u64; n * words];
    for (i, set) in sets.iter().enumerate() {
        for &s in set.iter() {
            debug_assert!((s as usize) < n_samples);
            bits[i * words + (s as usize) / 64] |= 1u64 << (s % 64);
        }
    }
    let rows: Vec<Vec<(u32, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            let wi = &bits[i * words..(i + 1) * words];
            for j in i + 1..n {
                let wj = &bits[j * words..(j + 1) * words];
                let inter: u32 = wi.iter().zip(wj).map(|(a, b)| (a & b).count_ones()).sum();
                if inter == 0 {
                    continue;
                }
                let union = sets[i].len() + sets[j].len() - inter as usize;
                let jac = f64::from(inter) / union as f64;
                if jac > threshold {
                    out.push((j as u32, jac));
                }
            }
            out
        })
        .collect();
    let mut edges = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        for (j, w) in row {
            edges.push((i as u32, j, w));
        }
    }
    FeatureGraph::from_edges(n, &edges)
}

const LOUVAIN_EPS: f64 = 1e-12;
const LOUVAIN_MIN_GAIN: f64 = 1e-7;
const LOUVAIN_MAX_PASSES: usize = 10;
const LOUVAIN_MAX_LEVELS: usize = 100;

/// Working graph for one Louvain level. Self-loop entries hold twice the
/// internal weight, matching the degree convention where a loop adds its
/// weight on both ends.
struct LevelGraph {
    adj: Vec<Vec<(u32, f64)>>,
    degree: Vec<f64>,
    total: f64, // 2m
}

impl LevelGraph {
    fn from_feature_graph(g: &FeatureGraph) -> Self {
        let degree: Vec<f64> = (0..g.n_nodes()).map(|i| g.weighted_degree(i)).collect();
        let total = degree.iter().sum();
        LevelGraph { adj: g.adj.clone(), degree, total }
    }
}

fn one_level(g: &LevelGraph, resolution: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    let n = g.adj.len();
    let mut comm: Vec<usize> = (0..n).collect();
    let mut tot = g.degree.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let m2 = g.total;
    let mut neigh = vec![0.0f64; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut any_moved = false;

    for _ in 0..LOUVAIN_MAX_PASSES {
        let mut moved = false;
        for &node in &order {
            let c_old = comm[node];
            touched.clear();
            for &(nb, w) in &g.adj[node] {
                let nb = nb as usize;
                if nb == node {
                    continue;
                }
                let c = comm[nb];
                if neigh[c] == 0.0 {
                    touched.push(c);
                }
                neigh[c] += w;
            }
            let k_i = g.degree[node];
            tot[c_old] -= k_i;
            // Gain of joining community c relative to standing alone.
            let gain_of = |c: usize, neigh: &[f64], tot: &[f64]| {
                neigh[c] / m2 - resolution * tot[c] * k_i / (m2 * m2)
            };
            let mut best_c = c_old;
            let mut best_gain = gain_of(c_old, &neigh, &tot);
            touched.sort_unstable();
            for &c in &touched {
                if c == c_old {
                    continue;
                }
                let gain = gain_of(c, &neigh, &tot);
                if gain > best_gain + LOUVAIN_EPS {
                    best_gain = gain;
                    best_c = c;
                }
            }
            tot[best_c] += k_i;
            comm[node] = best_c;
            if best_c != c_old {
                moved = true;
                any_moved = true;
            }
            for &c in &touched {
                neigh[c] = 0.0;
            }
        }
        if !moved {
            break;
        }
    }
    (comm, any_moved)
}

fn modularity(g: &LevelGraph, comm: &[usize], resolution: f64) -> f64 {
    let m2 = g.total;
    if m2 == 0.0 {
        return 0.0;
    }
    let n = g.adj.len();
    let mut internal = vec![0.0f64; n];
    let mut tot = vec![0.0f64; n];
    for i in 0..n {
        tot[comm[i]] += g.degree[i];
        for &(nb, w) in &g.adj[i] {
            if comm[nb as usize] == comm[i] {
                internal[comm[i]] += w;
            }
        }
    }
    (0..n)
        .map(|c| internal[c] / m2 - resolution * (tot[c] / m2) * (tot[c] / m2))
        .sum()
}

fn aggregate(g: &LevelGraph, comm: &[usize], members: Vec<Vec<usize>>) -> (LevelGraph, Vec<Vec<usize>>) {
    let mut labels: Vec<usize> = comm.to_vec();
    labels.sort_unstable();
    labels.dedup();
    let mut relabel = vec![usize::MAX; g.adj.len()];
    for (new, &old) in labels.iter().enumerate() {
        relabel[old] = new;
    }
    let k = labels.len();
    let mut new_members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (node, m) in members.into_iter().enumerate() {
        new_members[relabel[comm[node]]].extend(m);
    }
    for m in &mut new_members {
        m.sort_unstable();
    }
    // Accumulate in (node, neighbor) order so float sums are reproducible.
    let mut maps: Vec<std::collections::BTreeMap<u32, f64>> = vec![Default::default(); k];
    for (node, list) in g.adj.iter().enumerate() {
        let cn = relabel[comm[node]] as u32;
        for &(nb, w) in list {
            let cb = relabel[comm[nb as usize]] as u32;
            *maps[cn as usize].entry(cb).or_insert(0.0) += w;
        }
    }
    let adj: Vec<Vec<(u32, f64)>> = maps
        .into_iter()
        .map(|m| m.into_iter().collect::<Vec<_>>())
        .collect();
    let degree: Vec<f64> = adj
        .iter()
        .map(|list| list.iter().map(|&(_, w)| w).sum())
        .collect();
    let total = degree.iter().sum();
    (LevelGraph { adj, degree, total }, new_members)
}

/// Louvain community detection. Returns communities of original node
/// indices (each sorted), ordered by smallest member; singletons included.
pub fn louvain_communities(
    graph: &FeatureGraph,
    resolution: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let n = graph.n_nodes();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    if n == 0 || graph.n_edges() == 0 {
        return members;
    }
    let mut g = LevelGraph::from_feature_graph(graph);
    let mut q_prev = modularity(&g, &(0..n).collect::<Vec<_>>(), resolution);
    for _ in 0..LOUVAIN_MAX_LEVELS {
        let (comm, moved) = one_level(&g, resolution, rng);
        if !moved {
            break;
        }
        let q_new = modularity(&g, &comm, resolution);
        let (next, next_members) = aggregate(&g, &comm, members);
        g = next;
        members = next_members;
        if q_new - q_prev <= LOUVAIN_MIN_GAIN {
            break;
        }
        q_prev = q_new;
    }
    members.sort_by_key(|m| m[0]);
    members
}

/// Topological overlap of every node pair that shares an edge or at least
/// one neighbor: (shared weight + direct weight) over
/// (min degree + 1 - direct weight). Returned sorted by pair.
pub fn tom_pairs(graph: &FeatureGraph) -> Vec<(u32, u32, f64)> {
    use std::collections::HashMap;
    let n = graph.n_nodes();
    let mut shared: HashMap<(u32, u32), f64> = HashMap::new();
    for k in 0..n {
        let list = graph.neighbors(k);
        for (ai, &(a, wa)) in list.iter().enumerate() {
            for &(b, wb) in &list[ai + 1..] {
                *shared.entry((a, b)).or_insert(0.0) += wa * wb;
            }
        }
    }
    // Direct edges with no shared neighbors still get a TOM value.
    for a in 0..n {
        for &(b, _) in graph.neighbors(a) {
            if (a as u32) < b {
                shared.entry((a as u32, b)).or_insert(0.0);
            }
        }
    }
    let degree: Vec<f64> = (0..n).map(|i| graph.weighted_degree(i)).collect();
    let direct: HashMap<(u32, u32), f64> = (0..n)
        .flat_map(|a| {
            graph
                .neighbors(a)
                .iter()
                .filter(move |&&(b, _)| (a as u32) < b)
                .map(move |&(b, w)| ((a as u32, b), w))
        })
        .collect();
    let mut pairs: Vec<(u32, u32, f64)> = shared
        .into_iter()
        .map(|((a, b), s)| {
            let w = direct.get(&(a, b)).copied().unwrap_or(0.0);
            let denom = degree[a as usize].min(degree[b as usize]) + 1.0 - w;
            (a, b, (s + w) / denom)
        })
        .collect();
    pairs.sort_unstable_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    pairs
}

/// R-squared of the log-log fit of the degree histogram; the usual
/// scale-free topology score. Degenerate histograms (fewer than two
/// distinct positive degrees) count as a perfect fit.
pub fn scale_free_r2(degrees: &[usize]) -> f64 {
    use std::collections::BTreeMap;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &d in degrees.iter().filter(|&&d| d > 0) {
        *counts.entry(d).or_insert(0) += 1;
    }
    if counts.len() < 2 {
        return 1.0;
    }
    let pts: Vec<(f64, f64)> = counts
        .into_iter()
        .map(|(d, c)| ((d as f64).ln(), (c as f64).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return 1.0;
    }
    (sxy * sxy) / (sxx * syy)
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }
    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Anchor to the smaller root so component labels are stable.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

fn components_at_cutoff(n: usize, pairs: &[(u32, u32, f64)], cutoff: f64) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(n);
    for &(a, b, t) in pairs {
        if t >= cutoff {
            uf.union(a as usize, b as usize);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for node in 0..n {
        groups.entry(uf.find(node)).or_default().push(node);
    }
    groups.into_values().collect()
}

/// Thresholds the TOM at each candidate cutoff, scores the resulting graph
/// by scale-free fit, and returns the connected components of size >= 2 at
/// the best-scoring cutoff (ties prefer the smallest cutoff).
pub fn tom_modules(graph: &FeatureGraph, cutoffs: &[f64]) -> (Vec<Vec<usize>>, f64) {
    assert!(!cutoffs.is_empty(), "need at least one candidate cutoff");
    let n = graph.n_nodes();
    let pairs = tom_pairs(graph);
    let mut best_cutoff = cutoffs[0];
    let mut best_r2 = f64::NEG_INFINITY;
    for &cutoff in cutoffs {
        let mut degrees = vec![0usize; n];
        for &(a, b, t) in &pairs {
            if t >= cutoff {
                degrees[a as usize] += 1;
                degrees[b as usize] += 1;
            }
        }
        let r2 = scale_free_r2(&degrees);
        if r2 > best_r2 + 1e-12 {
            best_r2 = r2;
            best_cutoff = cutoff;
        }
    }
    let comps = components_at_cutoff(n, &pairs, best_cutoff)
        .into_iter()
        .filter(|c| c.len() >= 2)
        .collect();
    (comps, best_cutoff)
}

fn communities_of(
    graph: &FeatureGraph,
    clustering: &Clustering,
    seed: u64,
    graph_tag: u64,
) -> Vec<Vec<usize>> {
    match clustering {
        Clustering::Louvain { resolution } => {
            let mut rng = seed::rng(seed, seed::STREAM_MODULES, graph_tag);
            louvain_communities(graph, *resolution, &mut rng)
        }
        Clustering::Tom { cutoffs } => tom_modules(graph, cutoffs).0,
    }
}

/// Groups binarized features into modules. Node identity is keyed to
/// feature ids (canonical order before the seeded shuffle), so permuting
/// matrix rows permutes module membership without altering it.
pub fn detect_modules(
    features: &[BinarizedFeature],
    feature_ids: &[String],
    n_samples: usize,
    mode: DirectionMode,
    clustering: &Clustering,
    edge_threshold: f64,
    seed: u64,
) -> Vec<FeatureModule> {
    let canonical = |idxs: Vec<usize>| -> Vec<usize> {
        let mut v = idxs;
        v.sort_by(|&a, &b| feature_ids[features[a].feature].cmp(&feature_ids[features[b].feature]));
        v
    };
    let groups: Vec<(Vec<usize>, u64)> = match mode {
        DirectionMode::Joint => vec![(canonical((0..features.len()).collect()), 0)],
        DirectionMode::Separate => {
            let up = (0..features.len())
                .filter(|&i| features[i].direction == Direction::Up)
                .collect();
            let down = (0..features.len())
                .filter(|&i| features[i].direction == Direction::Down)
                .collect();
            vec![(canonical(up), 1), (canonical(down), 2)]
        }
    };

    let mut modules = Vec::new();
    for (candidates, tag) in groups {
        if candidates.len() < 2 {
            continue;
        }
        let sets: Vec<&[u32]> = candidates
            .iter()
            .map(|&i| features[i].minority.as_slice())
            .collect();
        let graph = build_similarity_graph(&sets, n_samples, edge_threshold);
        for community in communities_of(&graph, clustering, seed, tag) {
            if community.len() < 2 {
                continue;
            }
            let mut members: Vec<usize> = community
                .iter()
                .map(|&node| features[candidates[node]].feature)
                .collect();
            let dirs: std::collections::HashMap<usize, Direction> = community
                .iter()
                .map(|&node| {
                    let f = &features[candidates[node]];
                    (f.feature, f.direction)
                })
                .collect();
            members.sort_unstable();
            let n_up = members.iter().filter(|f| dirs[f] == Direction::Up).count();
            let n_down = members.len() - n_up;
            let (mode, majority) = if n_down == 0 {
                (ModuleMode::Up, Direction::Up)
            } else if n_up == 0 {
                (ModuleMode::Down, Direction::Down)
            } else if n_up >= n_down {
                (ModuleMode::Mixed, Direction::Up)
            } else {
                (ModuleMode::Mixed, Direction::Down)
            };
            let signs: Vec<i8> = members
                .iter()
                .map(|f| if dirs[f] == majority { 1 } else { -1 })
                .collect();
            modules.push(FeatureModule { members, signs, mode });
        }
    }
    modules.sort_by(|a, b| a.members.cmp(&b.members));
    modules
}
