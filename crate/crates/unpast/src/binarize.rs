//! Per-feature binarization.
//!
//! Each feature's standardized values are split into a minority subset and
//! the background by 1-D clustering. The split is scored by signal-to-noise
//! ratio and kept only when that score is improbable under a matched null
//! model of pure noise vectors split at the same group size.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster1d;
use crate::dataio::StandardizedMatrix;
use crate::error::{Result, UnpastError};
use crate::seed;

/// Cap applied when both group standard deviations vanish but the means
/// differ; keeps perfectly separated splits finite and sortable.
pub const SNR_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinarizationMethod {
    KMeans,
    Ward,
    Gmm,
}

impl BinarizationMethod {
    pub(crate) fn tag(self) -> u64 {
        match self {
            BinarizationMethod::KMeans => 0,
            BinarizationMethod::Ward => 1,
            BinarizationMethod::Gmm => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

/// Signal-to-noise ratio of a sample subset against its complement:
/// |mean_in - mean_out| / (std_in + std_out) with population deviations.
/// `subset` holds sorted sample indices.
pub fn snr(values: &[f64], subset: &[u32]) -> f64 {
    let n = values.len();
    let k = subset.len();
    assert!(k > 0 && k < n, "subset must be a proper non-empty subset");
    let mut sum_in = 0.0;
    let mut sumsq_in = 0.0;
    for &s in subset {
        let v = values[s as usize];
        sum_in += v;
        sumsq_in += v * v;
    }
    let sum_all: f64 = values.iter().sum();
    let sumsq_all: f64 = values.iter().map(|v| v * v).sum();
    let (kf, nf) = (k as f64, n as f64);
    let mean_in = sum_in / kf;
    let mean_out = (sum_all - sum_in) / (nf - kf);
    let var_in = (sumsq_in / kf - mean_in * mean_in).max(0.0);
    let var_out = (((sumsq_all - sumsq_in) / (nf - kf)) - mean_out * mean_out).max(0.0);
    let denom = var_in.sqrt() + var_out.sqrt();
    let num = (mean_in - mean_out).abs();
    if denom == 0.0 {
        return if num == 0.0 { 0.0 } else { SNR_CAP };
    }
    num / denom
}

/// A feature's minority split before null-model filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSplit {
    pub minority: Vec<u32>,
    pub direction: Direction,
    pub snr: f64,
}

/// A retained binarized feature.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarizedFeature {
    pub feature: usize,
    pub minority: Vec<u32>,
    pub direction: Direction,
    pub snr: f64,
    pub pvalue: f64,
}

/// Splits one feature's values into minority and background. Returns
/// `None` for constant features or when the method cannot separate two
/// groups. When both groups have equal size the minority side is chosen
/// by one draw from `rng`; otherwise `rng` is untouched.
pub fn binarize_feature(
    values: &[f64],
    method: BinarizationMethod,
    rng: &mut ChaCha8Rng,
) -> Option<FeatureSplit> {
    let n = values.len();
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by(|&a, &b| {
        values[a as usize]
            .partial_cmp(&values[b as usize])
            .unwrap()
            .then(a.cmp(&b))
    });
    let sorted: Vec<f64> = order.iter().map(|&i| values[i as usize]).collect();
    let mask = match method {
        BinarizationMethod::KMeans => cluster1d::split_two_means(&sorted),
        BinarizationMethod::Ward => cluster1d::split_ward(&sorted),
        BinarizationMethod::Gmm => cluster1d::split_gmm(&sorted),
    }?;
    let k_hi = mask.iter().filter(|&&m| m).count();
    let k_lo = n - k_hi;
    let minority_is_high = match k_hi.cmp(&k_lo) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => rng.random::<bool>(),
    };
    let mut minority: Vec<u32> = order
        .iter()
        .zip(&mask)
        .filter(|&(_, &m)| m == minority_is_high)
        .map(|(&i, _)| i)
        .collect();
    minority.sort_unstable();

    let sum_min: f64 = minority.iter().map(|&i| values[i as usize]).sum();
    let sum_all: f64 = values.iter().sum();
    let mean_min = sum_min / minority.len() as f64;
    let mean_rest = (sum_all - sum_min) / (n - minority.len()) as f64;
    let direction = if mean_min > mean_rest { Direction::Up } else { Direction::Down };
    let split_snr = snr(values, &minority);
    Some(FeatureSplit { minority, direction, snr: split_snr })
}

const CACHE_MAGIC: &[u8; 8] = b"UNPNUL01";

/// Null distribution of SNR values for noise vectors.
///
/// For every group size k the model holds `n_draws` SNR values, each from
/// an independent standard-normal vector of length `n_samples` whose k
/// largest entries form the minority group. Draw d is generated from a
/// seed derived from (seed, d), so the values for a given k do not depend
/// on which other sizes were requested.
#[derive(Debug, Clone)]
pub struct NullSnrModel {
    n_samples: usize,
    method: BinarizationMethod,
    seed: u64,
    n_draws: usize,
    draws: BTreeMap<usize, Vec<f64>>,
}

impl NullSnrModel {
    /// Number of draws needed for a p-value resolution of `p_threshold`.
    pub fn required_draws(p_threshold: f64) -> usize {
        assert!(p_threshold > 0.0 && p_threshold <= 1.0);
        10_000usize.max((10.0 / p_threshold).ceil() as usize)
    }

    pub fn build(
        n_samples: usize,
        sizes: &BTreeSet<usize>,
        n_draws: usize,
        method: BinarizationMethod,
        seed: u64,
    ) -> Self {
        assert!(sizes.iter().all(|&k| k >= 1 && k <= n_samples / 2));
        let size_list: Vec<usize> = sizes.iter().copied().collect();
        let per_draw: Vec<Vec<f64>> = (0..n_draws)
            .into_par_iter()
            .map(|d| {
                let mut rng = seed::rng(seed, seed::STREAM_NULL_MODEL, d as u64);
                let mut vals: Vec<f64> =
                    (0..n_samples).map(|_| rng.sample(StandardNormal)).collect();
                vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
                let mut sum = vec![0.0; n_samples + 1];
                let mut sumsq = vec![0.0; n_samples + 1];
                for (i, &v) in vals.iter().enumerate() {
                    sum[i + 1] = sum[i] + v;
                    sumsq[i + 1] = sumsq[i] + v * v;
                }
                let nf = n_samples as f64;
                size_list
                    .iter()
                    .map(|&k| {
                        let kf = k as f64;
                        let mean_in = sum[k] / kf;
                        let mean_out = (sum[n_samples] - sum[k]) / (nf - kf);
                        let var_in = (sumsq[k] / kf - mean_in * mean_in).max(0.0);
                        let var_out = ((sumsq[n_samples] - sumsq[k]) / (nf - kf)
                            - mean_out * mean_out)
                            .max(0.0);
                        let denom = var_in.sqrt() + var_out.sqrt();
                        let num = (mean_in - mean_out).abs();
                        if denom == 0.0 {
                            if num == 0.0 { 0.0 } else { SNR_CAP }
                        } else {
                            num / denom
                        }
                    })
                    .collect::<Vec<f64>>()
            })
            .collect();
        let mut draws = BTreeMap::new();
        for (ki, &k) in size_list.iter().enumerate() {
            let mut column: Vec<f64> = per_draw.iter().map(|row| row[ki]).collect();
            column.sort_by(|a, b| a.partial_cmp(b).unwrap());
            draws.insert(k, column);
        }
        NullSnrModel { n_samples, method, seed, n_draws, draws }
    }

    /// Empirical upper-tail p-value with the add-one correction:
    /// (count of null draws >= observed + 1) / (n_draws + 1).
    pub fn pvalue(&self, k: usize, observed_snr: f64) -> Option<f64> {
        let column = self.draws.get(&k)?;
        let below = column.partition_point(|&d| d < observed_snr);
        let count_ge = column.len() - below;
        Some((count_ge + 1) as f64 / (self.n_draws + 1) as f64)
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn covers(
        &self,
        n_samples: usize,
        method: BinarizationMethod,
        n_draws: usize,
        seed: u64,
        sizes: &BTreeSet<usize>,
    ) -> bool {
        self.n_samples == n_samples
            && self.method == method
            && self.n_draws == n_draws
            && self.seed == seed
            && sizes.iter().all(|k| self.draws.contains_key(k))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| UnpastError::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut inner = || -> std::io::Result<()> {
            w.write_all(CACHE_MAGIC)?;
            for v in [
                self.n_samples as u64,
                self.method.tag(),
                self.seed,
                self.n_draws as u64,
                self.draws.len() as u64,
            ] {
                w.write_all(&v.to_le_bytes())?;
            }
            for (&k, column) in &self.draws {
                w.write_all(&(k as u64).to_le_bytes())?;
                for v in column {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            w.flush()
        };
        inner().map_err(|e| UnpastError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| UnpastError::io(path, e))?;
        let mut r = std::io::BufReader::new(file);
        let bad = |msg: &str| UnpastError::parse(path, 0, msg);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|e| UnpastError::io(path, e))?;
        if &magic != CACHE_MAGIC {
            return Err(bad("not a null-model cache or unsupported version"));
        }
        let read_u64 = |r: &mut dyn Read| -> Result<u64> {
            let mut buf = [0u8; 8];
            r.read_exact(&mut buf).map_err(|e| UnpastError::io(path, e))?;
            Ok(u64::from_le_bytes(buf))
        };
        let n_samples = read_u64(&mut r)? as usize;
        let method = match read_u64(&mut r)? {
            0 => BinarizationMethod::KMeans,
            1 => BinarizationMethod::Ward,
            2 => BinarizationMethod::Gmm,
            t => return Err(bad(&format!("unknown method tag {t}"))),
        };
        let seed = read_u64(&mut r)?;
        let n_draws = read_u64(&mut r)? as usize;
        let n_sizes = read_u64(&mut r)? as usize;
        let mut draws = BTreeMap::new();
        let mut buf = vec![0u8; n_draws * 8];
        for _ in 0..n_sizes {
            let k = read_u64(&mut r)? as usize;
            r.read_exact(&mut buf).map_err(|e| UnpastError::io(path, e))?;
            let column: Vec<f64> = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if column.windows(2).any(|w| w[0] > w[1]) {
                return Err(bad("draws not sorted; cache corrupted"));
            }
            draws.insert(k, column);
        }
        Ok(NullSnrModel { n_samples, method, seed, n_draws, draws })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinarizeParams {
    pub method: BinarizationMethod,
    /// Features are retained when their empirical p-value is at or below
    /// this threshold.
    pub p_threshold: f64,
    /// Minimum minority size; smaller splits are discarded.
    pub min_group_size: usize,
    pub seed: u64,
    #[serde(skip)]
    pub null_cache: Option<PathBuf>,
}

impl Default for BinarizeParams {
    fn default() -> Self {
        BinarizeParams {
            method: BinarizationMethod::KMeans,
            p_threshold: 0.01,
            min_group_size: 5,
            seed: 0,
            null_cache: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BinarizeSummary {
    pub n_features: usize,
    /// Features that produced a valid split of at least `min_group_size`.
    pub n_split: usize,
    /// Features retained after null-model filtering.
    pub n_passed: usize,
    pub null_draws: usize,
}

/// Binarizes every feature and keeps those whose SNR beats the noise null
/// at the same minority size. Each feature's RNG is derived from the seed
/// and the feature id, so row order and thread count cannot change results.
pub fn binarize_all(
    z: &StandardizedMatrix,
    params: &BinarizeParams,
) -> Result<(Vec<BinarizedFeature>, BinarizeSummary)> {
    let n = z.n_samples();
    if params.min_group_size < 2 {
        return Err(UnpastError::invalid("min_group_size must be at least 2"));
    }
    if n < 2 * params.min_group_size {
        return Err(UnpastError::invalid(format!(
            "need at least {} samples for min_group_size {}, found {n}",
            2 * params.min_group_size,
            params.min_group_size
        )));
    }
    if !(params.p_threshold > 0.0 && params.p_threshold <= 1.0) {
        return Err(UnpastError::invalid("p_threshold must be in (0, 1]"));
    }

    let candidates: Vec<Option<FeatureSplit>> = (0..z.n_features())
        .into_par_iter()
        .map(|f| {
            let mut rng = seed::rng(
                params.seed,
                seed::STREAM_BINARIZE,
                seed::hash_str(&z.feature_ids()[f]),
            );
            binarize_feature(z.row(f), params.method, &mut rng)
                .filter(|split| split.minority.len() >= params.min_group_size)
        })
        .collect();

    let sizes: BTreeSet<usize> = candidates
        .iter()
        .flatten()
        .map(|s| s.minority.len())
        .collect();
    let n_split = candidates.iter().flatten().count();
    let n_draws = NullSnrModel::required_draws(params.p_threshold);

    let model = if sizes.is_empty() {
        None
    } else {
        let cached = params
            .null_cache
            .as_ref()
            .filter(|p| p.exists())
            .and_then(|p| NullSnrModel::load(p).ok())
            .filter(|m| m.covers(n, params.method, n_draws, params.seed, &sizes));
        let model = match cached {
            Some(m) => m,
            None => {
                let m = NullSnrModel::build(n, &sizes, n_draws, params.method, params.seed);
                if let Some(p) = &params.null_cache {
                    m.save(p)?;
                }
                m
            }
        };
        Some(model)
    };

    let mut retained = Vec::new();
    for (f, cand) in candidates.into_iter().enumerate() {
        let Some(split) = cand else { continue };
        let model = model.as_ref().expect("model exists when candidates exist");
        let p = model
            .pvalue(split.minority.len(), split.snr)
            .expect("size was registered");
        if p <= params.p_threshold {
            retained.push(BinarizedFeature {
                feature: f,
                minority: split.minority,
                direction: split.direction,
                snr: split.snr,
                pvalue: p,
            });
        }
    }
    let summary = BinarizeSummary {
        n_features: z.n_features(),
        n_split,
        n_passed: retained.len(),
        null_draws: n_draws,
    };
    Ok((retained, summary))
}
