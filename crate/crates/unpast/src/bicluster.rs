//! Bicluster assembly: turning a feature module into a sample split.
//!
//! Each module's features are collapsed into a single per-sample score,
//! the mean of the members' signed z-scores. The score vector is split by
//! the same 1-D clustering method used for binarization; the minority
//! side becomes the bicluster's sample set. The bicluster SNR averages
//! the members' individual SNRs with respect to that final sample set.

use serde::Serialize;

use crate::binarize::{binarize_feature, snr, BinarizationMethod, Direction};
use crate::dataio::{ExpressionMatrix, StandardizedMatrix};
use crate::error::{Result, UnpastError};
use crate::modules::FeatureModule;
use crate::seed;
use crate::stats::{adjust, welch_t_test, Adjust};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BiclusterDirection {
    Up,
    Down,
    Mixed,
}

/// Differential-expression statistics of one member feature, computed on
/// the original (pre-standardization) values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureStat {
    pub feature: usize,
    pub log_fold_change: f64,
    pub pvalue: f64,
    pub adj_pvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bicluster {
    /// Member feature indices, sorted ascending.
    pub features: Vec<usize>,
    /// Per-member sign, aligned with `features`; -1 marks members that run
    /// against the module majority (mixed biclusters only).
    pub signs: Vec<i8>,
    /// Sample indices of the minority side, sorted ascending.
    pub samples: Vec<u32>,
    pub direction: BiclusterDirection,
    pub snr: f64,
    pub feature_stats: Option<Vec<FeatureStat>>,
}

fn classify(signs: &[i8], minority_above: bool) -> BiclusterDirection {
    if signs.iter().any(|&s| s < 0) {
        BiclusterDirection::Mixed
    } else if minority_above {
        BiclusterDirection::Up
    } else {
        BiclusterDirection::Down
    }
}

/// Mean SNR of the member features against a fixed sample set. Sign flips
/// do not matter: SNR is invariant under negation.
fn mean_feature_snr(values: &StandardizedMatrix, features: &[usize], samples: &[u32]) -> f64 {
    let total: f64 = features.iter().map(|&f| snr(values.row(f), samples)).sum();
    total / features.len() as f64
}

/// Per-sample mean of the members' signed z-scores.
pub fn module_scores(z: &StandardizedMatrix, module: &FeatureModule) -> Vec<f64> {
    let n = z.n_samples();
    let mut scores = vec![0.0f64; n];
    for (&f, &sign) in module.members.iter().zip(&module.signs) {
        let row = z.row(f);
        let sign = f64::from(sign);
        for (acc, &v) in scores.iter_mut().zip(row) {
            *acc += sign * v;
        }
    }
    let scale = 1.0 / module.members.len() as f64;
    for s in &mut scores {
        *s *= scale;
    }
    scores
}

/// Splits all samples in the module's feature subspace. Returns `None`
/// when the score vector cannot be split or the minority side is smaller
/// than `min_n_samples`. The split's tie-break RNG is keyed to the sorted
/// member feature ids, so results do not depend on row order.
pub fn assemble_bicluster(
    z: &StandardizedMatrix,
    module: &FeatureModule,
    method: BinarizationMethod,
    min_n_samples: usize,
    master_seed: u64,
) -> Option<Bicluster> {
    let scores = module_scores(z, module);
    let mut ids: Vec<&str> = module.members.iter().map(|&f| z.feature_ids()[f].as_str()).collect();
    ids.sort_unstable();
    let mut rng = seed::rng(master_seed, seed::STREAM_ASSEMBLE, seed::hash_strs(&ids));
    let split = binarize_feature(&scores, method, &mut rng)?;
    if split.minority.len() < min_n_samples {
        return None;
    }
    let snr = mean_feature_snr(z, &module.members, &split.minority);
    Some(Bicluster {
        features: module.members.clone(),
        signs: module.signs.clone(),
        direction: classify(&module.signs, split.direction == Direction::Up),
        samples: split.minority,
        snr,
        feature_stats: None,
    })
}

/// Differential-expression verification on the original values: Welch
/// t-test per member feature (bicluster vs background), BH correction
/// across the members, then the fold-change and p-value thresholds.
/// Returns `None` when fewer than two features survive. Never adds
/// features and never changes the sample set.
pub fn de_verify(
    m: &ExpressionMatrix,
    z: &StandardizedMatrix,
    b: &Bicluster,
    lfc_min: f64,
    p_max: f64,
) -> Option<Bicluster> {
    let n = m.n_samples();
    let mut inside = vec![false; n];
    for &s in &b.samples {
        inside[s as usize] = true;
    }
    let mut group_in = Vec::with_capacity(b.samples.len());
    let mut group_out = Vec::with_capacity(n - b.samples.len());
    let mut stats = Vec::with_capacity(b.features.len());
    for &f in &b.features {
        group_in.clear();
        group_out.clear();
        for (s, &v) in m.row(f).iter().enumerate() {
            if inside[s] {
                group_in.push(v);
            } else {
                group_out.push(v);
            }
        }
        let w = welch_t_test(&group_in, &group_out);
        stats.push((w.mean_diff, w.pvalue));
    }
    let adj = adjust(
        &stats.iter().map(|&(_, p)| p).collect::<Vec<_>>(),
        Adjust::BenjaminiHochberg,
    );

    let mut features = Vec::new();
    let mut signs = Vec::new();
    let mut feature_stats = Vec::new();
    let mut signed_lfc_sum = 0.0;
    for (i, (&f, &sign)) in b.features.iter().zip(&b.signs).enumerate() {
        let (lfc, p) = stats[i];
        if lfc.abs() >= lfc_min && adj[i] <= p_max {
            features.push(f);
            signs.push(sign);
            feature_stats.push(FeatureStat {
                feature: f,
                log_fold_change: lfc,
                pvalue: p,
                adj_pvalue: adj[i],
            });
            signed_lfc_sum += f64::from(sign) * lfc;
        }
    }
    if features.len() < 2 {
        return None;
    }
    let snr = mean_feature_snr(z, &features, &b.samples);
    let direction = classify(&signs, signed_lfc_sum > 0.0);
    Some(Bicluster {
        features,
        signs,
        samples: b.samples.clone(),
        direction,
        snr,
        feature_stats: Some(feature_stats),
    })
}

impl Bicluster {
    /// Structural checks used by the test harness on every produced
    /// bicluster: membership bounds, sortedness, the SNR aggregation rule
    /// (within 1e-9) and sign/direction consistency.
    pub fn check_invariants(
        &self,
        z: &StandardizedMatrix,
        min_n_samples: usize,
    ) -> Result<()> {
        let fail = |msg: String| Err(UnpastError::invalid(msg));
        if self.features.len() < 2 {
            return fail(format!("bicluster has {} features", self.features.len()));
        }
        if self.signs.len() != self.features.len() {
            return fail("signs and features differ in length".into());
        }
        if self.features.windows(2).any(|w| w[0] >= w[1]) {
            return fail("features not sorted/unique".into());
        }
        if self.features.iter().any(|&f| f >= z.n_features()) {
            return fail("feature index out of range".into());
        }
        if self.samples.windows(2).any(|w| w[0] >= w[1]) {
            return fail("samples not sorted/unique".into());
        }
        if self.samples.iter().any(|&s| s as usize >= z.n_samples()) {
            return fail("sample index out of range".into());
        }
        if self.samples.len() < min_n_samples || self.samples.len() > z.n_samples() / 2 {
            return fail(format!("sample set size {} outside bounds", self.samples.len()));
        }
        if self.signs.iter().any(|&s| s != 1 && s != -1) {
            return fail("sign outside {-1, 1}".into());
        }
        if self.direction != BiclusterDirection::Mixed && self.signs.iter().any(|&s| s < 0) {
            return fail("negative sign in a non-mixed bicluster".into());
        }
        let expect = mean_feature_snr(z, &self.features, &self.samples);
        if (self.snr - expect).abs() > 1e-9 {
            return fail(format!("snr {} != recomputed {expect}", self.snr));
        }
        Ok(())
    }
}
