//! Comparing biclusterings with ground truth and with each other.
//!
//! Sample sets are treated as bipartitions (set vs complement), so every
//! metric here is invariant to complementing either side. Matching of
//! predicted to true clusters follows a three-step procedure: Fisher
//! exact association per pair, Bonferroni across all pairs, then each
//! predicted cluster may only match the truth it fits most specifically,
//! and each truth takes the highest-ARI significant candidate.

use rayon::prelude::*;
use serde::Serialize;

use crate::bicluster::Bicluster;
use crate::error::{Result, UnpastError};
use crate::stats::{chi2_2x2, Fisher2x2};

/// Labeled, possibly overlapping sample sets over a fixed universe.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    names: Vec<String>,
    sets: Vec<Vec<u32>>,
    n_samples: usize,
}

impl GroundTruth {
    pub fn new(names: Vec<String>, sets: Vec<Vec<u32>>, n_samples: usize) -> Result<Self> {
        if names.len() != sets.len() {
            return Err(UnpastError::invalid("cluster names and sets differ in length"));
        }
        if names.is_empty() {
            return Err(UnpastError::invalid("ground truth has no clusters"));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(UnpastError::invalid(format!("duplicate cluster name {name:?}")));
            }
        }
        let mut sets = sets;
        for (name, set) in names.iter().zip(&mut sets) {
            set.sort_unstable();
            set.dedup();
            if set.is_empty() || set.len() >= n_samples {
                return Err(UnpastError::invalid(format!(
                    "cluster {name:?} must be a nonempty proper subset of the {n_samples} samples"
                )));
            }
            if set.last().is_some_and(|&s| s as usize >= n_samples) {
                return Err(UnpastError::invalid(format!("cluster {name:?} has out-of-range sample")));
            }
        }
        Ok(GroundTruth { names, sets, n_samples })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn sets(&self) -> &[Vec<u32>] {
        &self.sets
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

fn intersection_size(a: &[u32], b: &[u32]) -> usize {
    debug_assert!(a.windows(2).all(|w| w[0] < w[1]));
    debug_assert!(b.windows(2).all(|w| w[0] < w[1]));
    let mut count = 0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

fn pairs2(x: f64) -> f64 {
    x * (x - 1.0) / 2.0
}

fn ari_from_contingency(n11: f64, n10: f64, n01: f64, n00: f64) -> f64 {
    let n = n11 + n10 + n01 + n00;
    let index = pairs2(n11) + pairs2(n10) + pairs2(n01) + pairs2(n00);
    let rows = pairs2(n11 + n10) + pairs2(n01 + n00);
    let cols = pairs2(n11 + n01) + pairs2(n10 + n00);
    let expected = rows * cols / pairs2(n);
    let max = 0.5 * (rows + cols);
    if max == expected {
        // Both bipartitions are information-free; identical by convention.
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Adjusted Rand index of the bipartitions {A, rest} and {B, rest} over a
/// universe of `n` samples. Sets must be sorted, nonempty and proper.
pub fn ari_bipartition(a: &[u32], b: &[u32], n: usize) -> Result<f64> {
    if a.is_empty() || b.is_empty() || a.len() >= n || b.len() >= n {
        return Err(UnpastError::invalid(
            "ARI needs nonempty proper subsets of the sample universe",
        ));
    }
    let inter = intersection_size(a, b);
    Ok(ari_from_contingency(
        inter as f64,
        (a.len() - inter) as f64,
        (b.len() - inter) as f64,
        (n + inter - a.len() - b.len()) as f64,
    ))
}

/// Association stats of one (truth, predicted) pair.
#[derive(Debug, Clone, Serialize)]
pub struct PairMatchStat {
    pub truth: usize,
    pub predicted: usize,
    /// The predicted set matched better after complementing (its samples
    /// were under-represented in the truth cluster).
    pub inverted: bool,
    pub pvalue: f64,
    pub adj_pvalue: f64,
    pub ari: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruthMatch {
    pub name: String,
    pub size: usize,
    pub weight: f64,
    /// Index of the best significantly matching predicted cluster.
    pub best: Option<usize>,
    pub adj_pvalue: Option<f64>,
    /// ARI with the best match; 0 when unmatched.
    pub ari: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerformanceReport {
    pub total: f64,
    pub alpha: f64,
    pub truths: Vec<TruthMatch>,
    pub pairs: Vec<PairMatchStat>,
}

/// Weighted best-match performance of predicted sample sets against
/// ground truth.
///
/// Step 1: per pair, Fisher exact on the 2x2 sample-membership table; a
/// predicted set whose right tail exceeds its left tail is flagged as
/// inverted (the metric itself is complement-invariant, so the flag only
/// affects reporting). Two-tailed p-values are Bonferroni-adjusted over
/// all pairs. Step 2: each predicted cluster is a candidate only for the
/// truth cluster(s) where its p-value is lowest. Step 3: every truth
/// takes the highest-ARI candidate with adjusted p below `alpha`; the
/// total is the size-weighted sum of matched ARIs.
pub fn best_match_performance(
    truth: &GroundTruth,
    predicted: &[Vec<u32>],
    alpha: f64,
) -> Result<PerformanceReport> {
    let n = truth.n_samples();
    for set in predicted {
        if set.is_empty() || set.len() >= n {
            return Err(UnpastError::invalid(
                "predicted sets must be nonempty proper subsets of the sample universe",
            ));
        }
    }
    let m_tests = truth.len() * predicted.len();
    let fisher = Fisher2x2::new(n);
    let mut pairs: Vec<PairMatchStat> = (0..truth.len())
        .into_par_iter()
        .flat_map_iter(|t| {
            let fisher = &fisher;
            let tset = &truth.sets()[t];
            predicted.iter().enumerate().map(move |(j, pset)| {
                let inter = intersection_size(tset, pset);
                let a = inter as u64;
                let b = (tset.len() - inter) as u64;
                let c = (pset.len() - inter) as u64;
                let d = (n + inter - tset.len() - pset.len()) as u64;
                let f = fisher.test(a, b, c, d);
                let ari = ari_from_contingency(a as f64, b as f64, c as f64, d as f64);
                PairMatchStat {
                    truth: t,
                    predicted: j,
                    inverted: f.right > f.left,
                    pvalue: f.two_tailed,
                    adj_pvalue: (f.two_tailed * m_tests as f64).min(1.0),
                    ari,
                }
            })
        })
        .collect();
    pairs.sort_by(|x, y| (x.truth, x.predicted).cmp(&(y.truth, y.predicted)));

    // A predicted cluster is only allowed to match the truth cluster(s)
    // where it attains its lowest p-value.
    let mut min_p = vec![f64::INFINITY; predicted.len()];
    for p in &pairs {
        if p.pvalue < min_p[p.predicted] {
            min_p[p.predicted] = p.pvalue;
        }
    }

    let total_size: usize = truth.sets().iter().map(Vec::len).sum();
    let mut truths = Vec::with_capacity(truth.len());
    let mut weighted_sum = 0.0;
    for (t, (name, tset)) in truth.names().iter().zip(truth.sets()).enumerate() {
        let mut best: Option<&PairMatchStat> = None;
        for p in pairs.iter().filter(|p| p.truth == t) {
            if p.adj_pvalue >= alpha || p.pvalue > min_p[p.predicted] {
                continue;
            }
            if best.is_none_or(|b| p.ari > b.ari) {
                best = Some(p);
            }
        }
        let ari = best.map_or(0.0, |b| b.ari);
        weighted_sum += ari * tset.len() as f64;
        truths.push(TruthMatch {
            name: name.clone(),
            size: tset.len(),
            weight: tset.len() as f64 / total_size as f64,
            best: best.map(|b| b.predicted),
            adj_pvalue: best.map(|b| b.adj_pvalue),
            ari,
        });
    }
    Ok(PerformanceReport {
        total: weighted_sum / total_size as f64,
        alpha,
        truths,
        pairs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PairRedundancy {
    pub a: usize,
    pub b: usize,
    /// Jaccard of the two (feature, sample) cell sets.
    pub jaccard: f64,
    pub pvalue: f64,
    pub adj_pvalue: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RedundancyReport {
    pub fsp: f64,
    pub alpha: f64,
    pub pairs: Vec<PairRedundancy>,
}

/// Fraction of Significant Pairs: the share of bicluster pairs whose
/// (feature, sample) cell sets overlap significantly more than expected
/// under independence within the full grid (chi-squared, Bonferroni over
/// all pairs). Pairs overlapping less than expected never count.
pub fn fsp(
    biclusters: &[Bicluster],
    n_features: usize,
    n_samples: usize,
    alpha: f64,
) -> Result<RedundancyReport> {
    if biclusters.len() < 2 {
        return Err(UnpastError::invalid("redundancy needs at least two biclusters"));
    }
    let grid = (n_features * n_samples) as f64;
    let n_pairs = biclusters.len() * (biclusters.len() - 1) / 2;
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut significant = 0usize;
    let features: Vec<Vec<u32>> = biclusters
        .iter()
        .map(|b| b.features.iter().map(|&f| f as u32).collect())
        .collect();
    for i in 0..biclusters.len() {
        let cells_i = (biclusters[i].features.len() * biclusters[i].samples.len()) as f64;
        for j in i + 1..biclusters.len() {
            let cells_j = (biclusters[j].features.len() * biclusters[j].samples.len()) as f64;
            let shared_f = intersection_size(&features[i], &features[j]);
            let shared_s = intersection_size(&biclusters[i].samples, &biclusters[j].samples);
            let overlap = (shared_f * shared_s) as f64;
            let chi = chi2_2x2(
                overlap,
                cells_i - overlap,
                cells_j - overlap,
                grid - cells_i - cells_j + overlap,
            );
            let adj = (chi.pvalue * n_pairs as f64).min(1.0);
            let over_represented = overlap * grid > cells_i * cells_j;
            let is_sig = adj < alpha && over_represented;
            significant += usize::from(is_sig);
            pairs.push(PairRedundancy {
                a: i,
                b: j,
                jaccard: overlap / (cells_i + cells_j - overlap),
                pvalue: chi.pvalue,
                adj_pvalue: adj,
                significant: is_sig,
            });
        }
    }
    Ok(RedundancyReport {
        fsp: significant as f64 / n_pairs as f64,
        alpha,
        pairs,
    })
}
