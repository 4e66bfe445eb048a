//! Consensus biclusters from repeated seeded runs.
//!
//! Biclusters from all runs are matched pairwise by sample-set overlap,
//! grouped by Louvain on the resulting similarity matrix (thresholded at
//! an elbow-selected cutoff), and each group is collapsed to the features
//! that recur in enough runs; the group's samples are then re-derived by
//! the usual subspace split on the consensus feature set.

use rayon::prelude::*;
use serde::Serialize;

use crate::bicluster::{assemble_bicluster, Bicluster};
use crate::binarize::BinarizationMethod;
use crate::dataio::StandardizedMatrix;
use crate::error::{Result, UnpastError};
use crate::evaluate::{best_match_performance, GroundTruth};
use crate::modules::{jaccard, louvain_communities, FeatureGraph, FeatureModule, ModuleMode, UnionFind};
use crate::seed;

/// A significant best-match between bicluster `a` of one run and
/// bicluster `b` of another.
#[derive(Debug, Clone, Serialize)]
pub struct MatchedPair {
    pub a: usize,
    pub b: usize,
    /// Sample-set Jaccard similarity (of the sets as given; a pair matched
    /// through complementation scores near 0 here).
    pub jaccard: f64,
    pub adj_pvalue: f64,
    pub ari: f64,
}

/// Matches run B's biclusters against run A's by the significant
/// best-match procedure on sample sets (A playing the ground truth role).
pub fn match_bicluster_sets(
    run_a: &[Bicluster],
    run_b: &[Bicluster],
    n_samples: usize,
    alpha: f64,
) -> Result<Vec<MatchedPair>> {
    if run_a.is_empty() || run_b.is_empty() {
        return Ok(Vec::new());
    }
    let truth = GroundTruth::new(
        (0..run_a.len()).map(|i| format!("b{i}")).collect(),
        run_a.iter().map(|b| b.samples.clone()).collect(),
        n_samples,
    )?;
    let predicted: Vec<Vec<u32>> = run_b.iter().map(|b| b.samples.clone()).collect();
    let report = best_match_performance(&truth, &predicted, alpha)?;
    Ok(report
        .truths
        .iter()
        .enumerate()
        .filter_map(|(a, t)| {
            let b = t.best?;
            // An association through the complement (two sets avoiding
            // each other) is not a sample-set match.
            if report.pairs[a * run_b.len() + b].inverted {
                return None;
            }
            Some(MatchedPair {
                a,
                b,
                jaccard: jaccard(&run_a[a].samples, &run_b[b].samples),
                adj_pvalue: t.adj_pvalue.unwrap(),
                ari: t.ari,
            })
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsensusParams {
    pub method: BinarizationMethod,
    pub min_n_samples: usize,
    /// Similarity cutoff scan range and step for the elbow selection.
    pub j_min: f64,
    pub j_max: f64,
    pub j_step: f64,
    /// A feature is kept when it appears in at least this fraction of the
    /// runs (counted over the group's member biclusters).
    pub min_frequency: f64,
    /// Significance level of the pairwise matching.
    pub alpha: f64,
    pub seed: u64,
}

impl ConsensusParams {
    pub fn new(method: BinarizationMethod, min_n_samples: usize, seed: u64) -> Self {
        ConsensusParams {
            method,
            min_n_samples,
            j_min: 0.3,
            j_max: 0.9,
            j_step: 0.05,
            min_frequency: 1.0 / 3.0,
            alpha: 0.05,
            seed,
        }
    }
}

/// One group of matched run-biclusters and what became of it.
#[derive(Debug, Clone, Serialize)]
pub struct ConsensusGroup {
    /// Member biclusters as (run index, index within run).
    pub members: Vec<(usize, usize)>,
    /// Features passing the recurrence filter.
    pub features: Vec<usize>,
    /// Index into the output bicluster list; `None` when the group was
    /// dropped (singleton, too few recurrent features, or failed split).
    pub bicluster: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsensusResult {
    #[serde(skip)]
    pub biclusters: Vec<Bicluster>,
    pub cutoff: f64,
    pub groups: Vec<ConsensusGroup>,
}

/// The similarity cutoff where the group-count curve bends hardest: the
/// interior point with the largest discrete second difference. Fewer than
/// three scan points fall back to the smallest cutoff.
fn elbow_cutoff(counts: &[usize], cutoffs: &[f64]) -> f64 {
    debug_assert_eq!(counts.len(), cutoffs.len());
    if cutoffs.len() < 3 {
        return cutoffs[0];
    }
    let mut best_i = 1;
    let mut best = i64::MIN;
    for i in 1..counts.len() - 1 {
        let second = counts[i + 1] as i64 - 2 * counts[i] as i64 + counts[i - 1] as i64;
        if second > best {
            best = second;
            best_i = i;
        }
    }
    cutoffs[best_i]
}

const CUTOFF_SLACK: f64 = 1e-9;

fn count_groups(n_nodes: usize, edges: &[(u32, u32, f64)], cutoff: f64) -> usize {
    let mut uf = UnionFind::new(n_nodes);
    for &(a, b, w) in edges {
        if w >= cutoff - CUTOFF_SLACK {
            uf.union(a as usize, b as usize);
        }
    }
    let mut size = vec![0usize; n_nodes];
    for node in 0..n_nodes {
        size[uf.find(node)] += 1;
    }
    size.iter().filter(|&&s| s >= 2).count()
}

/// Builds consensus biclusters from n >= 2 runs over the same matrix.
pub fn consensus_biclusters(
    runs: &[Vec<Bicluster>],
    z: &StandardizedMatrix,
    params: &ConsensusParams,
) -> Result<ConsensusResult> {
    if runs.len() < 2 {
        return Err(UnpastError::invalid(format!(
            "consensus needs at least 2 runs, got {}",
            runs.len()
        )));
    }
    if params.j_step <= 0.0 || params.j_min > params.j_max {
        return Err(UnpastError::invalid("bad similarity cutoff range"));
    }
    let n_samples = z.n_samples();
    let n_runs = runs.len();

    // Node identity is content-based (run/index only break exact ties), so
    // permuting the run order cannot change the outcome.
    let mut nodes: Vec<(usize, usize)> = (0..n_runs)
        .flat_map(|r| (0..runs[r].len()).map(move |i| (r, i)))
        .collect();
    nodes.sort_by(|&(ra, ia), &(rb, ib)| {
        let x = &runs[ra][ia];
        let y = &runs[rb][ib];
        (&x.samples, &x.features, &x.signs, ra, ia).cmp(&(&y.samples, &y.features, &y.signs, rb, ib))
    });
    let mut node_of = vec![Vec::new(); n_runs];
    for (r, run) in runs.iter().enumerate() {
        node_of[r] = vec![usize::MAX; run.len()];
    }
    for (node, &(r, i)) in nodes.iter().enumerate() {
        node_of[r][i] = node;
    }

    let ordered_pairs: Vec<(usize, usize)> = (0..n_runs)
        .flat_map(|a| (0..n_runs).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let matches: Vec<Vec<MatchedPair>> = ordered_pairs
        .par_iter()
        .map(|&(a, b)| match_bicluster_sets(&runs[a], &runs[b], n_samples, params.alpha))
        .collect::<Result<_>>()?;

    let mut matched: std::collections::BTreeSet<(usize, usize)> = Default::default();
    for ((a, b), pairs) in ordered_pairs.iter().zip(&matches) {
        for p in pairs {
            let na = node_of[*a][p.a];
            let nb = node_of[*b][p.b];
            matched.insert((na.min(nb), na.max(nb)));
        }
    }
    let edges: Vec<(u32, u32, f64)> = matched
        .into_iter()
        .map(|(na, nb)| {
            let (ra, ia) = nodes[na];
            let (rb, ib) = nodes[nb];
            let w = jaccard(&runs[ra][ia].samples, &runs[rb][ib].samples);
            (na as u32, nb as u32, w)
        })
        .collect();

    let n_steps = ((params.j_max - params.j_min) / params.j_step).round() as usize;
    let cutoffs: Vec<f64> = (0..=n_steps).map(|k| params.j_min + k as f64 * params.j_step).collect();
    let counts: Vec<usize> = cutoffs
        .iter()
        .map(|&c| count_groups(nodes.len(), &edges, c))
        .collect();
    let cutoff = elbow_cutoff(&counts, &cutoffs);

    let kept: Vec<(u32, u32, f64)> = edges
        .iter()
        .copied()
        .filter(|&(_, _, w)| w >= cutoff - CUTOFF_SLACK)
        .collect();
    let graph = FeatureGraph::from_edges(nodes.len(), &kept);
    let mut rng = seed::rng(params.seed, seed::STREAM_CONSENSUS, 0);
    let communities = louvain_communities(&graph, 1.0, &mut rng);

    let mut groups = Vec::new();
    let mut assembled: Vec<(Bicluster, usize)> = Vec::new();
    for community in communities {
        let mut members: Vec<(usize, usize)> = community.iter().map(|&n| nodes[n]).collect();
        members.sort_unstable();
        let group_idx = groups.len();
        let mut group = ConsensusGroup { members, features: Vec::new(), bicluster: None };
        if group.members.len() < 2 {
            groups.push(group);
            continue;
        }

        // Per feature: how many member biclusters carry it, and the net
        // sign across those members.
        let mut feature_count: std::collections::BTreeMap<usize, (usize, i32)> =
            Default::default();
        for &(r, i) in &group.members {
            let b = &runs[r][i];
            for (&f, &sign) in b.features.iter().zip(&b.signs) {
                let e = feature_count.entry(f).or_insert((0, 0));
                e.0 += 1;
                e.1 += i32::from(sign);
            }
        }
        let mut features = Vec::new();
        let mut signs = Vec::new();
        for (&f, &(count, sign_sum)) in &feature_count {
            if count as f64 / n_runs as f64 >= params.min_frequency - 1e-12 {
                features.push(f);
                signs.push(if sign_sum >= 0 { 1i8 } else { -1 });
            }
        }
        group.features = features.clone();
        if features.len() < 2 {
            groups.push(group);
            continue;
        }
        let mode = if signs.iter().any(|&s| s < 0) {
            ModuleMode::Mixed
        } else {
            let up_votes = group
                .members
                .iter()
                .filter(|&&(r, i)| {
                    runs[r][i].direction != crate::bicluster::BiclusterDirection::Down
                })
                .count();
            if up_votes * 2 >= group.members.len() { ModuleMode::Up } else { ModuleMode::Down }
        };
        let module = FeatureModule { members: features, signs, mode };
        if let Some(b) = assemble_bicluster(z, &module, params.method, params.min_n_samples, params.seed) {
            assembled.push((b, group_idx));
        }
        groups.push(group);
    }

    assembled.sort_by(|(x, _), (y, _)| {
        y.snr.partial_cmp(&x.snr).unwrap().then_with(|| x.features.cmp(&y.features))
    });
    let mut biclusters = Vec::with_capacity(assembled.len());
    for (out_idx, (b, group_idx)) in assembled.into_iter().enumerate() {
        groups[group_idx].bicluster = Some(out_idx);
        biclusters.push(b);
    }
    Ok(ConsensusResult { biclusters, cutoff, groups })
}
