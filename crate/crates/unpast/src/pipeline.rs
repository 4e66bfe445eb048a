//! The full pipeline: standardize, binarize, group features, assemble
//! biclusters, verify differential expression; optionally repeat with
//! stepped seeds and reduce to consensus biclusters.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bicluster::{assemble_bicluster, de_verify, Bicluster};
use crate::binarize::{binarize_all, BinarizationMethod, BinarizeParams, BinarizeSummary};
use crate::consensus::{consensus_biclusters, ConsensusParams, ConsensusResult};
use crate::dataio::{zscore_rows, ExpressionMatrix, StandardizedMatrix};
use crate::error::{Result, UnpastError};
use crate::modules::{detect_modules, Clustering, DirectionMode, FeatureModule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeParams {
    /// Minimum absolute group-mean difference of the (log-scale) input.
    pub lfc_min: f64,
    /// Maximum BH-adjusted p-value.
    pub p_max: f64,
}

impl Default for DeParams {
    fn default() -> Self {
        DeParams { lfc_min: 1.0, p_max: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnpastParams {
    pub method: BinarizationMethod,
    pub p_threshold: f64,
    pub min_n_samples: usize,
    pub direction_mode: DirectionMode,
    pub clustering: Clustering,
    pub edge_threshold: f64,
    /// `None` disables the differential-expression verification pass.
    pub de: Option<DeParams>,
    pub seed: u64,
    #[serde(skip)]
    pub null_cache: Option<PathBuf>,
}

impl Default for UnpastParams {
    fn default() -> Self {
        UnpastParams {
            method: BinarizationMethod::KMeans,
            p_threshold: 0.01,
            min_n_samples: 5,
            direction_mode: DirectionMode::Separate,
            clustering: Clustering::default_louvain(),
            edge_threshold: 1.0 / 3.0,
            de: Some(DeParams::default()),
            seed: 0,
            null_cache: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub n_features: usize,
    pub n_samples: usize,
    pub binarization: BinarizeSummary,
    pub n_modules: usize,
    pub n_assembled: usize,
    pub n_dropped_by_de: usize,
    pub n_biclusters: usize,
}

fn sort_output(biclusters: &mut [Bicluster]) {
    biclusters.sort_by(|a, b| {
        b.snr
            .partial_cmp(&a.snr)
            .unwrap()
            .then_with(|| a.features.cmp(&b.features))
    });
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub biclusters: Vec<Bicluster>,
    /// Feature modules the biclusters were assembled from.
    pub modules: Vec<FeatureModule>,
    pub report: RunReport,
}

/// One pipeline pass over an already standardized matrix.
pub fn run_unpast_standardized(
    m: &ExpressionMatrix,
    z: &StandardizedMatrix,
    params: &UnpastParams,
) -> Result<RunOutput> {
    let bin_params = BinarizeParams {
        method: params.method,
        p_threshold: params.p_threshold,
        min_group_size: params.min_n_samples,
        seed: params.seed,
        null_cache: params.null_cache.clone(),
    };
    let (features, summary) = binarize_all(z, &bin_params)?;
    let modules = detect_modules(
        &features,
        z.feature_ids(),
        z.n_samples(),
        params.direction_mode,
        &params.clustering,
        params.edge_threshold,
        params.seed,
    );
    let assembled: Vec<Bicluster> = modules
        .par_iter()
        .filter_map(|module| {
            assemble_bicluster(z, module, params.method, params.min_n_samples, params.seed)
        })
        .collect();
    let n_assembled = assembled.len();
    let mut biclusters: Vec<Bicluster> = match &params.de {
        Some(de) => assembled
            .par_iter()
            .filter_map(|b| de_verify(m, z, b, de.lfc_min, de.p_max))
            .collect(),
        None => assembled,
    };
    sort_output(&mut biclusters);
    let report = RunReport {
        seed: params.seed,
        n_features: z.n_features(),
        n_samples: z.n_samples(),
        binarization: summary,
        n_modules: modules.len(),
        n_assembled,
        n_dropped_by_de: n_assembled - biclusters.len(),
        n_biclusters: biclusters.len(),
    };
    Ok(RunOutput { biclusters, modules, report })
}

/// One pipeline pass: standardize and run.
pub fn run_unpast(m: &ExpressionMatrix, params: &UnpastParams) -> Result<RunOutput> {
    let z = zscore_rows(m);
    run_unpast_standardized(m, &z, params)
}

#[derive(Debug)]
pub struct MultiRunResult {
    pub runs: Vec<RunOutput>,
    /// Present when more than one run was requested.
    pub consensus: Option<ConsensusResult>,
}

/// Runs the pipeline `n_runs` times with seeds `seed, seed+1, ...` and,
/// for more than one run, reduces the results to consensus biclusters.
pub fn run_unpast_multi(
    m: &ExpressionMatrix,
    params: &UnpastParams,
    n_runs: usize,
) -> Result<MultiRunResult> {
    if n_runs == 0 {
        return Err(UnpastError::invalid("need at least one run"));
    }
    let z = zscore_rows(m);
    let mut runs = Vec::with_capacity(n_runs);
    for i in 0..n_runs {
        let mut run_params = params.clone();
        run_params.seed = params.seed.wrapping_add(i as u64);
        runs.push(run_unpast_standardized(m, &z, &run_params)?);
    }
    let consensus = if n_runs > 1 {
        let lists: Vec<Vec<Bicluster>> = runs.iter().map(|r| r.biclusters.clone()).collect();
        Some(consensus_biclusters(
            &lists,
            &z,
            &ConsensusParams::new(params.method, params.min_n_samples, params.seed),
        )?)
    } else {
        None
    };
    Ok(MultiRunResult { runs, consensus })
}
