//! Synthetic benchmark generator: planted differential-expression blocks
//! in standard-normal background noise.
//!
//! Four subtypes with fixed sample counts each receive a private set of
//! biomarker features whose values inside the subtype are redrawn from
//! N(signal_mean, signal_std). Scenario A draws the subtype sample sets
//! disjointly, B draws them independently (overlaps allowed), and C adds
//! confounding co-expression modules blended from a shared seed feature.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataio::ExpressionMatrix;
use crate::error::{Result, UnpastError};
use crate::evaluate::GroundTruth;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    A,
    B,
    C,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::A => "A",
            Scenario::B => "B",
            Scenario::C => "C",
        })
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "A" | "a" => Ok(Scenario::A),
            "B" | "b" => Ok(Scenario::B),
            "C" | "c" => Ok(Scenario::C),
            other => Err(format!("unknown scenario {other:?} (expected A, B or C)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub scenario: Scenario,
    pub n_features: usize,
    pub n_samples: usize,
    /// Sample count of each subtype; one biomarker set per subtype.
    pub subtype_sizes: Vec<usize>,
    /// Biomarker features per subtype.
    pub n_biomarkers: usize,
    pub signal_mean: f64,
    pub signal_std: f64,
    /// Confounding co-expression modules (scenario C).
    pub coexpr_modules: usize,
    pub coexpr_size: usize,
    pub coexpr_r: f64,
}

impl SimulationSpec {
    /// The benchmark defaults: 10000 x 200, subtypes of 10/20/50/100
    /// samples, N(4,1) signal, and in scenario C four 500-feature
    /// co-expression modules at r = 0.5.
    pub fn new(scenario: Scenario, n_biomarkers: usize) -> Self {
        SimulationSpec {
            scenario,
            n_features: 10_000,
            n_samples: 200,
            subtype_sizes: vec![10, 20, 50, 100],
            n_biomarkers,
            signal_mean: 4.0,
            signal_std: 1.0,
            coexpr_modules: if scenario == Scenario::C { 4 } else { 0 },
            coexpr_size: 500,
            coexpr_r: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        let err = |m: String| Err(UnpastError::invalid(m));
        if self.n_features == 0 || self.n_samples == 0 {
            return err("matrix dimensions must be positive".into());
        }
        if self.subtype_sizes.is_empty() || self.n_biomarkers == 0 {
            return err("need at least one subtype and one biomarker per subtype".into());
        }
        if self.subtype_sizes.iter().any(|&s| s == 0 || s >= self.n_samples) {
            return err("subtype sizes must be nonzero proper fractions of the cohort".into());
        }
        let planted = self.subtype_sizes.len() * self.n_biomarkers
            + self.coexpr_modules * self.coexpr_size;
        if planted > self.n_features {
            return err(format!(
                "{planted} planted features exceed the {} available",
                self.n_features
            ));
        }
        if self.scenario == Scenario::A {
            let total: usize = self.subtype_sizes.iter().sum();
            if total > self.n_samples {
                return err(format!(
                    "disjoint subtypes need {total} samples, only {} available",
                    self.n_samples
                ));
            }
        }
        if self.coexpr_modules > 0 && self.coexpr_size < 2 {
            return err("co-expression modules need at least two features".into());
        }
        if !(-1.0..=1.0).contains(&self.coexpr_r) {
            return err(format!("co-expression r {} outside [-1, 1]", self.coexpr_r));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDataset {
    pub matrix: ExpressionMatrix,
    pub truth: GroundTruth,
    /// Planted biomarker features per subtype, sorted.
    pub biomarkers: Vec<Vec<u32>>,
    /// Co-expression module features; the first entry of each module is
    /// the seed feature the others were blended from.
    pub coexpr: Vec<Vec<u32>>,
}

/// First `k` elements of a seeded permutation of `0..n`.
fn draw_distinct(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<u32> {
    debug_assert!(k <= n);
    let mut all: Vec<u32> = (0..n as u32).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        all.swap(i, j);
    }
    all.truncate(k);
    all
}

/// Generates one benchmark dataset with its ground truth and planted
/// layout.
pub fn generate(spec: &SimulationSpec, seed_value: u64) -> Result<SimulatedDataset> {
    spec.validate()?;
    let mut rng = seed::rng(seed_value, seed::STREAM_SIMULATE, 0);
    let (nf, ns) = (spec.n_features, spec.n_samples);

    let mut values: Vec<f64> = (0..nf * ns).map(|_| rng.sample(StandardNormal)).collect();

    // All planted feature sets come from one draw, so biomarker sets and
    // co-expression modules are mutually disjoint.
    let n_subtypes = spec.subtype_sizes.len();
    let planted = draw_distinct(
        &mut rng,
        nf,
        n_subtypes * spec.n_biomarkers + spec.coexpr_modules * spec.coexpr_size,
    );
    let biomarkers: Vec<Vec<u32>> = (0..n_subtypes)
        .map(|i| {
            let mut set = planted[i * spec.n_biomarkers..(i + 1) * spec.n_biomarkers].to_vec();
            set.sort_unstable();
            set
        })
        .collect();
    let coexpr_base = n_subtypes * spec.n_biomarkers;
    let coexpr: Vec<Vec<u32>> = (0..spec.coexpr_modules)
        .map(|i| {
            planted[coexpr_base + i * spec.coexpr_size..coexpr_base + (i + 1) * spec.coexpr_size]
                .to_vec()
        })
        .collect();

    let subtype_samples: Vec<Vec<u32>> = match spec.scenario {
        Scenario::A => {
            let total: usize = spec.subtype_sizes.iter().sum();
            let pool = draw_distinct(&mut rng, ns, total);
            let mut offset = 0;
            spec.subtype_sizes
                .iter()
                .map(|&size| {
                    let set = pool[offset..offset + size].to_vec();
                    offset += size;
                    set
                })
                .collect()
        }
        Scenario::B | Scenario::C => spec
            .subtype_sizes
            .iter()
            .map(|&size| draw_distinct(&mut rng, ns, size))
            .collect(),
    };

    let signal = Normal::new(spec.signal_mean, spec.signal_std)
        .map_err(|e| UnpastError::invalid(format!("bad signal distribution: {e}")))?;
    for (features, samples) in biomarkers.iter().zip(&subtype_samples) {
        for &f in features.iter() {
            let row = &mut values[f as usize * ns..(f as usize + 1) * ns];
            for &s in samples {
                row[s as usize] = signal.sample(&mut rng);
            }
        }
    }

    // Co-expression: every module feature becomes a blend of the module's
    // first feature and its own noise, giving correlation r with the seed
    // feature while staying marginally standard normal.
    let blend = (1.0 - spec.coexpr_r * spec.coexpr_r).sqrt();
    for module in &coexpr {
        let f0 = module[0] as usize;
        let base: Vec<f64> = values[f0 * ns..(f0 + 1) * ns].to_vec();
        for &f in &module[1..] {
            let row = &mut values[f as usize * ns..(f as usize + 1) * ns];
            for (v, &b) in row.iter_mut().zip(&base) {
                *v = spec.coexpr_r * b + blend * *v;
            }
        }
    }

    let matrix = ExpressionMatrix::new(
        (0..nf).map(|i| format!("g{i}")).collect(),
        (0..ns).map(|j| format!("s{j}")).collect(),
        values,
    )?;
    let truth = GroundTruth::new(
        (0..n_subtypes)
            .map(|i| format!("subtype{}_{}", i + 1, spec.subtype_sizes[i]))
            .collect(),
        subtype_samples,
        ns,
    )?;
    Ok(SimulatedDataset { matrix, truth, biomarkers, coexpr })
}

/// The nine-dataset benchmark grid: scenarios A/B/C crossed with 5, 50
/// and 500 biomarkers per subtype, each from a seed derived from
/// `base_seed` and the grid cell.
pub fn generate_suite(base_seed: u64) -> Result<Vec<(SimulationSpec, SimulatedDataset)>> {
    use rayon::prelude::*;
    let cells: Vec<(Scenario, usize)> = [Scenario::A, Scenario::B, Scenario::C]
        .into_iter()
        .flat_map(|sc| [5usize, 50, 500].into_iter().map(move |nb| (sc, nb)))
        .collect();
    cells
        .into_par_iter()
        .map(|(scenario, nb)| {
            let spec = SimulationSpec::new(scenario, nb);
            let cell_seed = seed::derive(
                base_seed,
                seed::STREAM_SIMULATE,
                seed::hash_str(&format!("{scenario}/{nb}")),
            );
            let data = generate(&spec, cell_seed)?;
            Ok((spec, data))
        })
        .collect()
}
