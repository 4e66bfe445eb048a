//! One-dimensional two-group splits used for binarization and for the
//! sample-axis split during bicluster assembly.
//!
//! Every method operates on values in ascending order, so outcomes are a
//! function of the multiset of values alone, never of input order. For the
//! threshold-based methods the cut always falls between distinct values;
//! the mixture model assigns by posterior, which is likewise a function of
//! the value.

/// Two-group assignment over sorted positions; `true` marks the group with
/// the higher mean.
pub(crate) type HighMask = Vec<bool>;

fn mask_from_cut(n: usize, cut: usize) -> HighMask {
    let mut mask = vec![false; n];
    for m in mask.iter_mut().skip(cut) {
        *m = true;
    }
    mask
}

/// Exact 1-D 2-means: scans every threshold between distinct adjacent
/// values and keeps the one minimizing within-group sum of squares.
/// Returns `None` when all values are equal. Ties prefer the smallest cut.
pub(crate) fn split_two_means(sorted: &[f64]) -> Option<HighMask> {
    let n = sorted.len();
    if n < 2 || sorted[0] == sorted[n - 1] {
        return None;
    }
    // Prefix sums let each candidate cut be scored in O(1).
    let mut sum = vec![0.0; n + 1];
    let mut sumsq = vec![0.0; n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        sum[i + 1] = sum[i] + v;
        sumsq[i + 1] = sumsq[i] + v * v;
    }
    let within = |lo: usize, hi: usize| -> f64 {
        let k = (hi - lo) as f64;
        let s = sum[hi] - sum[lo];
        (sumsq[hi] - sumsq[lo]) - s * s / k
    };
    let mut best_cut = None;
    let mut best_ss = f64::INFINITY;
    for cut in 1..n {
        if sorted[cut - 1] == sorted[cut] {
            continue;
        }
        let ss = within(0, cut) + within(cut, n);
        if ss < best_ss {
            best_ss = ss;
            best_cut = Some(cut);
        }
    }
    best_cut.map(|cut| mask_from_cut(n, cut))
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    dist: f64,
    left: usize,
    version: u64,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.dist == other.dist && self.left == other.left
    }
}
impl Eq for HeapEntry {}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Min-heap on (distance, position): BinaryHeap is a max-heap, so
        // reverse. Position ties make merge order deterministic.
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap()
            .then_with(|| other.left.cmp(&self.left))
    }
}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Agglomerative Ward linkage cut at two clusters. In one dimension the
/// closest pair under Ward's criterion is always adjacent in sorted order,
/// so only neighbor merges are considered and the final two clusters are
/// contiguous; the cut position is the boundary between them. Runs of
/// equal values merge at distance zero before any real merge, keeping the
/// cut between distinct values.
pub(crate) fn split_ward(sorted: &[f64]) -> Option<HighMask> {
    let n = sorted.len();
    if n < 2 || sorted[0] == sorted[n - 1] {
        return None;
    }
    // Cluster state indexed by start position; merged-away slots go stale.
    let mut count = vec![0usize; n];
    let mut sum = vec![0.0f64; n];
    let mut right = vec![usize::MAX; n]; // start of right neighbor
    let mut left = vec![usize::MAX; n];
    let mut version = vec![0u64; n];
    for i in 0..n {
        count[i] = 1;
        sum[i] = sorted[i];
        right[i] = if i + 1 < n { i + 1 } else { usize::MAX };
        left[i] = if i > 0 { i - 1 } else { usize::MAX };
    }
    let ward = |ca: usize, cb: usize, count: &[usize], sum: &[f64]| -> f64 {
        let (na, nb) = (count[ca] as f64, count[cb] as f64);
        let d = sum[ca] / na - sum[cb] / nb;
        na * nb / (na + nb) * d * d
    };

    let mut heap = std::collections::BinaryHeap::with_capacity(2 * n);
    for i in 0..n - 1 {
        heap.push(HeapEntry { dist: ward(i, i + 1, &count, &sum), left: i, version: 0 });
    }
    let mut remaining = n;
    while remaining > 2 {
        let entry = heap.pop().expect("heap exhausted before reaching two clusters");
        let a = entry.left;
        if count[a] == 0 || entry.version != version[a] {
            continue; // stale: cluster merged away or its stats changed
        }
        let b = right[a];
        debug_assert_ne!(b, usize::MAX);
        // Merge b into a.
        count[a] += count[b];
        sum[a] += sum[b];
        count[b] = 0;
        version[a] += 1;
        let r = right[b];
        right[a] = r;
        if r != usize::MAX {
            left[r] = a;
        }
        remaining -= 1;
        if r != usize::MAX {
            heap.push(HeapEntry { dist: ward(a, r, &count, &sum), left: a, version: version[a] });
        }
        let l = left[a];
        if l != usize::MAX {
            version[l] += 1;
            heap.push(HeapEntry { dist: ward(l, a, &count, &sum), left: l, version: version[l] });
        }
    }
    // Two contiguous clusters remain; the second starts at right[0-cluster].
    let cut = right[0];
    debug_assert!(cut != usize::MAX && cut > 0 && cut < n);
    debug_assert!(sorted[cut - 1] < sorted[cut]);
    Some(mask_from_cut(n, cut))
}

const GMM_MAX_ITER: usize = 300;
const GMM_LL_TOL: f64 = 1e-6;

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// One EM run from the given means and upper-component weight. Iteration
/// stops when the log-likelihood improves by less than `GMM_LL_TOL` or
/// after `GMM_MAX_ITER` rounds. Returns the final log-likelihood, means
/// and per-sample posteriors of the upper-indexed component.
fn gmm_em(
    sorted: &[f64],
    std_floor: f64,
    init_mean: [f64; 2],
    init_w1: f64,
) -> (f64, [f64; 2], Vec<f64>) {
    let n = sorted.len();
    let nf = n as f64;
    let mut mean = init_mean;
    if mean[0] == mean[1] {
        // Degenerate start; nudge apart so EM can separate the components.
        mean = [sorted[0], sorted[n - 1]];
    }
    let spread = sorted
        .iter()
        .map(|&x| {
            let d0 = (x - mean[0]).abs();
            let d1 = (x - mean[1]).abs();
            let d = d0.min(d1);
            d * d
        })
        .sum::<f64>()
        / nf;
    let init_std = spread.sqrt().max(std_floor);
    let mut std = [init_std, init_std];
    let mut weight = [1.0 - init_w1, init_w1];

    let sum_all: f64 = sorted.iter().sum();
    let sumsq_all: f64 = sorted.iter().map(|x| x * x).sum();
    let mut resp = vec![0.0f64; n]; // posterior of the higher-indexed component
    let mut prev_ll = f64::NEG_INFINITY;
    let mut ll = f64::NEG_INFINITY;
    for _ in 0..GMM_MAX_ITER {
        let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        let c0 = weight[0].ln() - std[0].ln() - half_ln_2pi;
        let c1 = weight[1].ln() - std[1].ln() - half_ln_2pi;
        let inv0 = 1.0 / std[0];
        let inv1 = 1.0 / std[1];
        ll = 0.0;
        let (mut r1, mut s1, mut q1) = (0.0f64, 0.0f64, 0.0f64);
        for (i, &x) in sorted.iter().enumerate() {
            let z0 = (x - mean[0]) * inv0;
            let z1 = (x - mean[1]) * inv1;
            let l0 = c0 - 0.5 * z0 * z0;
            let l1 = c1 - 0.5 * z1 * z1;
            // One exp suffices: the larger component contributes exp(0) = 1.
            let r = if l1 >= l0 {
                let e = (l0 - l1).exp();
                ll += l1 + e.ln_1p();
                1.0 / (1.0 + e)
            } else {
                let e = (l1 - l0).exp();
                ll += l0 + e.ln_1p();
                e / (1.0 + e)
            };
            resp[i] = r;
            r1 += r;
            s1 += r * x;
            q1 += r * x * x;
        }
        let r0 = nf - r1;
        if r0 <= 0.0 || r1 <= 0.0 {
            break;
        }
        let m1 = s1 / r1;
        let m0 = (sum_all - s1) / r0;
        let v1 = (q1 / r1 - m1 * m1).max(0.0);
        let v0 = ((sumsq_all - q1) / r0 - m0 * m0).max(0.0);
        mean = [m0, m1];
        std = [v0.sqrt().max(std_floor), v1.sqrt().max(std_floor)];
        weight = [r0 / nf, r1 / nf];
        if (ll - prev_ll).abs() < GMM_LL_TOL {
            break;
        }
        prev_ll = ll;
    }
    (ll, mean, resp)
}

/// EM starts that seed either a balanced split or a small component on one
/// flank: (lower-mean quantile, upper-mean quantile, upper weight).
const GMM_INITS: [(f64, f64, f64); 4] = [
    (0.25, 0.75, 0.5),
    (0.05, 0.95, 0.5),
    (0.5, 0.975, 0.05),
    (0.025, 0.5, 0.95),
];

/// Two-component univariate Gaussian mixture fit by EM. Because EM only
/// reaches a local optimum, it is restarted from the fixed grid of
/// `GMM_INITS` and the fit with the highest final log-likelihood that
/// leaves neither side empty wins. The variance floor of 1e-6 times the
/// overall variance keeps single-point spikes from dominating that
/// contest. Samples go to the component with posterior >= 0.5. Returns
/// `None` when every fit ends up one-sided.
pub(crate) fn split_gmm(sorted: &[f64]) -> Option<HighMask> {
    let n = sorted.len();
    if n < 2 || sorted[0] == sorted[n - 1] {
        return None;
    }
    let nf = n as f64;
    let overall_mean = sorted.iter().sum::<f64>() / nf;
    let overall_var = sorted.iter().map(|v| (v - overall_mean) * (v - overall_mean)).sum::<f64>() / nf;
    let std_floor = (overall_var.sqrt() * 1e-3).max(1e-300);

    let mut best: Option<(f64, HighMask)> = None;
    for &(q_lo, q_hi, w1) in &GMM_INITS {
        let init_mean = [quantile(sorted, q_lo), quantile(sorted, q_hi)];
        let (ll, mean, resp) = gmm_em(sorted, std_floor, init_mean, w1);
        if !ll.is_finite() {
            continue;
        }
        // Orient so `true` is the higher-mean component.
        let hi_is_one = mean[1] >= mean[0];
        let mask: HighMask = resp
            .iter()
            .map(|&r| if hi_is_one { r >= 0.5 } else { r < 0.5 })
            .collect();
        let k = mask.iter().filter(|&&m| m).count();
        if k == 0 || k == n {
            continue;
        }
        if best.as_ref().is_none_or(|(b, _)| ll > *b) {
            best = Some((ll, mask));
        }
    }
    best.map(|(_, mask)| mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cut_of(mask: &HighMask) -> usize {
        mask.iter().position(|&m| m).unwrap()
    }

    /// Direct within-group sum of squares, no prefix sums.
    fn ss_of_cut(sorted: &[f64], cut: usize) -> f64 {
        let group = |vals: &[f64]| {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        };
        group(&sorted[..cut]) + group(&sorted[cut..])
    }

    #[test]
    fn two_means_matches_exhaustive_oracle() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.random_range(2..40);
            let mut vals: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(-10..10) as f64) / 2.0)
                .collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let got = split_two_means(&vals);
            if vals[0] == vals[n - 1] {
                assert!(got.is_none());
                continue;
            }
            let got = cut_of(&got.unwrap());
            let best = (1..n)
                .filter(|&c| vals[c - 1] < vals[c])
                .min_by(|&a, &b| {
                    ss_of_cut(&vals, a)
                        .partial_cmp(&ss_of_cut(&vals, b))
                        .unwrap()
                        .then(a.cmp(&b))
                })
                .unwrap();
            assert!(
                (ss_of_cut(&vals, got) - ss_of_cut(&vals, best)).abs() < 1e-9,
                "{vals:?}: got {got}, oracle {best}"
            );
        }
    }

    #[test]
    fn two_means_separates_clear_groups() {
        let vals = [1.0, 1.1, 1.2, 9.0, 9.1];
        let mask = split_two_means(&vals).unwrap();
        assert_eq!(mask, vec![false, false, false, true, true]);
    }

    #[test]
    fn ward_small_hand_case() {
        // Merges: (1.0,1.1) d=.005, (8.9,9.0) d=.005->left first, then the
        // final boundary separates the low three from the high two.
        let vals = [1.0, 1.1, 1.5, 8.9, 9.0];
        let mask = split_ward(&vals).unwrap();
        assert_eq!(mask, vec![false, false, false, true, true]);
    }

    #[test]
    fn ward_cut_never_splits_equal_values() {
        let vals = [1.0, 2.0, 2.0, 2.0, 2.0, 3.0, 3.0];
        let mask = split_ward(&vals).unwrap();
        let cut = cut_of(&mask);
        assert!(vals[cut - 1] < vals[cut], "{vals:?} cut {cut}");
    }

    #[test]
    fn ward_matches_naive_agglomeration() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        // Naive O(n^2) adjacent-merge Ward as the oracle.
        fn naive_ward_cut(sorted: &[f64]) -> usize {
            let mut clusters: Vec<Vec<f64>> = sorted.iter().map(|&v| vec![v]).collect();
            while clusters.len() > 2 {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for i in 0..clusters.len() - 1 {
                    let (a, b) = (&clusters[i], &clusters[i + 1]);
                    let (na, nb) = (a.len() as f64, b.len() as f64);
                    let ma = a.iter().sum::<f64>() / na;
                    let mb = b.iter().sum::<f64>() / nb;
                    let d = na * nb / (na + nb) * (ma - mb) * (ma - mb);
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                let merged = clusters.remove(best + 1);
                clusters[best].extend(merged);
            }
            clusters[0].len()
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(2..30);
            let mut vals: Vec<f64> = (0..n).map(|_| rng.random_range(0..12) as f64).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if vals[0] == vals[n - 1] {
                assert!(split_ward(&vals).is_none());
                continue;
            }
            let got = cut_of(&split_ward(&vals).unwrap());
            assert_eq!(got, naive_ward_cut(&vals), "{vals:?}");
        }
    }

    #[test]
    fn gmm_recovers_well_separated_components() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        use rand_distr::Normal;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lo = Normal::new(0.0, 1.0).unwrap();
        let hi = Normal::new(8.0, 1.0).unwrap();
        let mut vals: Vec<f64> = (0..150).map(|_| lo.sample(&mut rng)).collect();
        vals.extend((0..50).map(|_| hi.sample(&mut rng)));
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mask = split_gmm(&vals).unwrap();
        let k = mask.iter().filter(|&&m| m).count();
        assert!((40..=60).contains(&k), "high group size {k}");
        // Posterior assignment must be monotone here: one boundary.
        let first_hi = mask.iter().position(|&m| m).unwrap();
        assert!(mask[first_hi..].iter().all(|&m| m));
    }

    #[test]
    fn all_methods_reject_constant_input() {
        let vals = [2.0; 10];
        assert!(split_two_means(&vals).is_none());
        assert!(split_ward(&vals).is_none());
        assert!(split_gmm(&vals).is_none());
    }
}
