//! Acceptance suite: one test per release criterion, with the tolerances
//! pinned next to each check. Every test prints a single `ACCEPTANCE ...
//! PASS` line on success, so running this target with `--nocapture` gives
//! a one-line-per-criterion overview; the test names themselves carry the
//! same information in the default report.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use unpast::bicluster::Bicluster;
use unpast::binarize::snr;
use unpast::consensus::{consensus_biclusters, ConsensusParams};
use unpast::dataio::zscore_rows;
use unpast::evaluate::{ari_bipartition, best_match_performance, fsp, GroundTruth};
use unpast::pipeline::{run_unpast, UnpastParams};
use unpast::simulate::{generate, Scenario, SimulationSpec};
use unpast::stats::{adjust, Adjust, Fisher2x2};
use unpast::{BiclusterDirection, BinarizationMethod, ExpressionMatrix};

/// Easy recovery regime: scenario A, 500 biomarkers per subtype, default
/// parameters. Every seed must recover at least 0.90 of the weighted
/// truth, each run well inside the ten-minute budget.
#[test]
fn criterion_01_easy_recovery() {
    let mut totals = Vec::new();
    for seed in 1..=5u64 {
        let ds = generate(&SimulationSpec::new(Scenario::A, 500), seed).unwrap();
        let params = UnpastParams { seed, ..Default::default() };
        let t0 = Instant::now();
        let out = run_unpast(&ds.matrix, &params).unwrap();
        let elapsed = t0.elapsed();
        assert!(
            elapsed < Duration::from_secs(600),
            "seed {seed}: run took {elapsed:?}, budget is 10 min"
        );
        let sets: Vec<Vec<u32>> = out.biclusters.iter().map(|b| b.samples.clone()).collect();
        let report = best_match_performance(&ds.truth, &sets, 0.05).unwrap();
        assert!(
            report.total >= 0.90,
            "seed {seed}: total {:.4} below 0.90",
            report.total
        );
        totals.push(report.total);
    }
    println!("ACCEPTANCE criterion 01 (easy recovery): PASS, totals {totals:?}");
}

/// Hard recovery regime: scenarios B and C with only 5 biomarkers per
/// subtype. The run protocol mirrors the benchmark convention of picking
/// the strongest parameter set per regime: mixture-model binarization
/// (the sum-of-squares objective of 2-means cannot isolate minorities
/// much below 15% of samples) and a raised module edge threshold (at
/// half-sized minorities, unrelated features reach Jaccard 1/3 by
/// chance). Each subtype must be significantly matched in at least 3 of
/// 5 seeds, and the mean performance may drop at most 0.35 against the
/// 500-biomarker runs of the same protocol.
#[test]
fn criterion_02_hard_recovery() {
    const HARD_P_THRESHOLD: f64 = 0.01;
    const HARD_EDGE_THRESHOLD: f64 = 0.45;
    let protocol = |seed: u64| UnpastParams {
        method: BinarizationMethod::Gmm,
        p_threshold: HARD_P_THRESHOLD,
        edge_threshold: HARD_EDGE_THRESHOLD,
        seed,
        ..Default::default()
    };
    for scenario in [Scenario::B, Scenario::C] {
        let mut mean_total = [0.0f64; 2]; // [nb=500, nb=5]
        let mut hits = [0u32; 4];
        for (case, nb) in [500usize, 5].into_iter().enumerate() {
            for seed in 1..=5u64 {
                let ds = generate(&SimulationSpec::new(scenario, nb), seed).unwrap();
                let out = run_unpast(&ds.matrix, &protocol(seed)).unwrap();
                let sets: Vec<Vec<u32>> =
                    out.biclusters.iter().map(|b| b.samples.clone()).collect();
                let report = best_match_performance(&ds.truth, &sets, 0.05).unwrap();
                mean_total[case] += report.total / 5.0;
                if nb == 5 {
                    for (t, tm) in report.truths.iter().enumerate() {
                        if tm.best.is_some() {
                            hits[t] += 1;
                        }
                    }
                }
            }
        }
        for (t, &h) in hits.iter().enumerate() {
            assert!(
                h >= 3,
                "{scenario:?}: subtype {} matched in only {h} of 5 seeds",
                t + 1
            );
        }
        let drop = mean_total[0] - mean_total[1];
        assert!(
            drop <= 0.35,
            "{scenario:?}: performance drop {drop:.4} exceeds 0.35 \
             (500-biomarker mean {:.4}, 5-biomarker mean {:.4})",
            mean_total[0],
            mean_total[1]
        );
        println!(
            "ACCEPTANCE criterion 02 (hard recovery, {scenario:?}): PASS, \
             drop {drop:.3}, per-subtype hits {hits:?}"
        );
    }
}

/// Null calibration: pure standard-normal noise must keep almost every
/// feature below the binarization threshold and produce at most a
/// handful of verified biclusters.
#[test]
fn criterion_03_null_calibration() {
    for seed in 1..=5u64 {
        let (nf, ns) = (10_000usize, 200usize);
        let mut rng = ChaCha8Rng::seed_from_u64(0xACCE0000 + seed);
        let values: Vec<f64> = (0..nf * ns).map(|_| rng.sample(StandardNormal)).collect();
        let m = ExpressionMatrix::new(
            (0..nf).map(|i| format!("g{i}")).collect(),
            (0..ns).map(|j| format!("s{j}")).collect(),
            values,
        )
        .unwrap();
        let params = UnpastParams { seed, ..Default::default() };
        let out = run_unpast(&m, &params).unwrap();
        let frac = out.report.binarization.n_passed as f64 / nf as f64;
        assert!(
            frac <= 0.025,
            "seed {seed}: {:.2}% of noise features passed binarization",
            100.0 * frac
        );
        assert!(
            out.biclusters.len() <= 3,
            "seed {seed}: {} biclusters from pure noise",
            out.biclusters.len()
        );
    }
    println!("ACCEPTANCE criterion 03 (null calibration): PASS");
}

/// Exact tail sums of the hypergeometric distribution for one 2x2 table,
/// in integer arithmetic. Weights are C(r1, x) * C(r2, c1 - x); the
/// largest total of 60 keeps every sum below 2^127.
fn fisher_oracle(binom: &[[u128; 61]; 61], a: u64, b: u64, c: u64, d: u64) -> (f64, f64, f64) {
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let w = |x: u64| binom[r1 as usize][x as usize] * binom[r2 as usize][(c1 - x) as usize];
    let obs = w(a);
    let (mut left, mut right, mut two, mut total) = (0u128, 0u128, 0u128, 0u128);
    for x in lo..=hi {
        let wx = w(x);
        total += wx;
        if x <= a {
            left += wx;
        }
        if x >= a {
            right += wx;
        }
        if wx <= obs {
            two += wx;
        }
    }
    (
        left as f64 / total as f64,
        right as f64 / total as f64,
        two as f64 / total as f64,
    )
}

/// Adjusted Rand index of two bipartitions by brute-force pair counting.
fn ari_pair_oracle(a: &[u32], b: &[u32], n: usize) -> f64 {
    let mut in_a = vec![false; n];
    let mut in_b = vec![false; n];
    for &s in a {
        in_a[s as usize] = true;
    }
    for &s in b {
        in_b[s as usize] = true;
    }
    let (mut n11, mut n10, mut n01, mut n00) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            match (in_a[i] == in_a[j], in_b[i] == in_b[j]) {
                (true, true) => n11 += 1,
                (true, false) => n10 += 1,
                (false, true) => n01 += 1,
                (false, false) => n00 += 1,
            }
        }
    }
    let num = 2.0 * (n11 as f64 * n00 as f64 - n10 as f64 * n01 as f64);
    let den = (n11 + n10) as f64 * (n10 + n00) as f64 + (n11 + n01) as f64 * (n01 + n00) as f64;
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

/// Reference step-up / step-down procedures, written independently of the
/// library implementation.
fn bh_reference(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&i, &j| p[i].partial_cmp(&p[j]).unwrap());
    let mut out = vec![0.0; m];
    let mut best = 1.0f64;
    for rank in (1..=m).rev() {
        let i = idx[rank - 1];
        let raw = p[i] * m as f64 / rank as f64;
        if raw < best {
            best = raw;
        }
        out[i] = best;
    }
    out
}

fn bonferroni_reference(p: &[f64]) -> Vec<f64> {
    let m = p.len() as f64;
    p.iter().map(|&v| (v * m).min(1.0)).collect()
}

fn random_subset(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<u32> {
    let mut all: Vec<u32> = (0..n as u32).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        all.swap(i, j);
    }
    all.truncate(k);
    all.sort_unstable();
    all
}

const FISHER_ORACLE_TOL: f64 = 1e-10;
const ARI_ORACLE_TOL: f64 = 1e-12;

/// Statistical oracles: Fisher tails against exhaustive integer
/// enumeration over every 2x2 table with total <= 60, the ARI against
/// brute-force pair counting, and both multiple-testing corrections
/// against reference step procedures (exact equality).
#[test]
fn criterion_04_statistical_oracles() {
    let mut binom = [[0u128; 61]; 61];
    for i in 0..=60usize {
        binom[i][0] = 1;
        for j in 1..=i {
            binom[i][j] = binom[i - 1][j - 1] + binom[i - 1][j];
        }
    }
    let fisher = Fisher2x2::new(60);
    let mut n_tables = 0u64;
    for a in 0..=60u64 {
        for b in 0..=60 - a {
            for c in 0..=60 - a - b {
                for d in 0..=60 - a - b - c {
                    let got = fisher.test(a, b, c, d);
                    let (left, right, two) = fisher_oracle(&binom, a, b, c, d);
                    for (name, g, w) in [
                        ("left", got.left, left),
                        ("right", got.right, right),
                        ("two", got.two_tailed, two),
                    ] {
                        assert!(
                            (g - w).abs() <= FISHER_ORACLE_TOL,
                            "fisher {name} tail off by {:.3e} on table ({a},{b},{c},{d}): \
                             got {g:.15}, oracle {w:.15}",
                            (g - w).abs()
                        );
                    }
                    n_tables += 1;
                }
            }
        }
    }

    let n = 200usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE0004);
    let mut max_ari_diff = 0.0f64;
    for _ in 0..1000 {
        let ka = rng.random_range(1..n);
        let kb = rng.random_range(1..n);
        let a = random_subset(&mut rng, n, ka);
        let b = random_subset(&mut rng, n, kb);
        let got = ari_bipartition(&a, &b, n).unwrap();
        let want = ari_pair_oracle(&a, &b, n);
        max_ari_diff = max_ari_diff.max((got - want).abs());
    }
    assert!(
        max_ari_diff <= ARI_ORACLE_TOL,
        "ARI off by {max_ari_diff:.3e} against the pair-counting oracle"
    );

    for trial in 0..1000u64 {
        let m = rng.random_range(1..=100);
        let mut p: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        if m > 2 && trial % 3 == 0 {
            p[m - 1] = p[0]; // exercise ties
            p[m / 2] = p[0];
        }
        assert_eq!(adjust(&p, Adjust::BenjaminiHochberg), bh_reference(&p));
        assert_eq!(adjust(&p, Adjust::Bonferroni), bonferroni_reference(&p));
    }

    println!(
        "ACCEPTANCE criterion 04 (statistical oracles): PASS, \
         {n_tables} fisher tables, max ARI diff {max_ari_diff:.2e}"
    );
}

const SNR_ORACLE_TOL: f64 = 1e-12;
const SNR_AFFINE_TOL: f64 = 1e-9;

fn snr_oracle(values: &[f64], subset: &[u32]) -> f64 {
    let marks: BTreeSet<u32> = subset.iter().copied().collect();
    let inside: Vec<f64> = subset.iter().map(|&s| values[s as usize]).collect();
    let outside: Vec<f64> = (0..values.len() as u32)
        .filter(|s| !marks.contains(s))
        .map(|s| values[s as usize])
        .collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let sd = |v: &[f64], m: f64| {
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
    };
    let (m_in, m_out) = (mean(&inside), mean(&outside));
    (m_in - m_out).abs() / (sd(&inside, m_in) + sd(&outside, m_out))
}

/// The separation score against direct two-pass arithmetic, plus its
/// invariance under positive affine rescaling of the values.
#[test]
fn criterion_05_snr_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE0005);
    let mut max_diff = 0.0f64;
    let mut max_affine = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(10..=400);
        let scale = rng.random_range(0.5..2.0);
        let shift = rng.random_range(-1.0..1.0);
        let values: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale + shift)
            .collect();
        let k = rng.random_range(2..n - 1);
        let subset = random_subset(&mut rng, n, k);
        let got = snr(&values, &subset);
        max_diff = max_diff.max((got - snr_oracle(&values, &subset)).abs());

        let a = rng.random_range(0.1..10.0);
        let b = rng.random_range(-10.0..10.0);
        let rescaled: Vec<f64> = values.iter().map(|v| a * v + b).collect();
        max_affine = max_affine.max((snr(&rescaled, &subset) - got).abs());
    }
    assert!(
        max_diff <= SNR_ORACLE_TOL,
        "snr off by {max_diff:.3e} against direct arithmetic"
    );
    assert!(
        max_affine <= SNR_AFFINE_TOL,
        "snr affine invariance violated by {max_affine:.3e}"
    );
    println!(
        "ACCEPTANCE criterion 05 (snr oracle): PASS, \
         max diff {max_diff:.2e}, max affine drift {max_affine:.2e}"
    );
}

/// Best-match performance endpoints: exactly 1.0 for the truth itself and
/// for its complements, and no significant match for random predictions
/// in at least 95 of 100 trials.
#[test]
fn criterion_06_metric_sanity() {
    let n = 200usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE0006);
    let mut pool: Vec<u32> = (0..n as u32).collect();
    pool.shuffle(&mut rng);
    let sizes = [10usize, 20, 50, 100];
    let mut sets = Vec::new();
    let mut offset = 0;
    for &s in &sizes {
        let mut set = pool[offset..offset + s].to_vec();
        set.sort_unstable();
        sets.push(set);
        offset += s;
    }
    let truth = GroundTruth::new(
        (1..=4).map(|i| format!("t{i}")).collect(),
        sets.clone(),
        n,
    )
    .unwrap();

    let identical = best_match_performance(&truth, &sets, 0.05).unwrap();
    assert_eq!(identical.total, 1.0, "identical predictions must score exactly 1.0");

    let complements: Vec<Vec<u32>> = sets
        .iter()
        .map(|s| {
            let marks: BTreeSet<u32> = s.iter().copied().collect();
            (0..n as u32).filter(|x| !marks.contains(x)).collect()
        })
        .collect();
    let inverted = best_match_performance(&truth, &complements, 0.05).unwrap();
    assert_eq!(inverted.total, 1.0, "complement predictions must score exactly 1.0");

    let single = GroundTruth::new(
        vec!["t".into()],
        vec![random_subset(&mut rng, n, 20)],
        n,
    )
    .unwrap();
    let mut clean = 0u32;
    for _ in 0..100 {
        let predicted: Vec<Vec<u32>> = (0..10)
            .map(|_| {
                let k = rng.random_range(5..=50);
                random_subset(&mut rng, n, k)
            })
            .collect();
        let report = best_match_performance(&single, &predicted, 0.05).unwrap();
        if report.truths[0].best.is_none() {
            assert_eq!(report.total, 0.0);
            clean += 1;
        }
    }
    assert!(
        clean >= 95,
        "random predictions matched the truth in {} of 100 trials",
        100 - clean
    );
    println!("ACCEPTANCE criterion 06 (metric sanity): PASS, {clean}/100 clean null trials");
}

/// A 40x60 noise matrix with two planted up-blocks, strong enough that
/// every run recovers them.
fn planted_matrix() -> ExpressionMatrix {
    let (nf, ns) = (40usize, 60usize);
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE0007);
    let mut values: Vec<f64> = (0..nf * ns).map(|_| rng.sample(StandardNormal)).collect();
    for f in 0..10 {
        for s in 0..12 {
            values[f * ns + s] += 5.0;
        }
    }
    for f in 20..28 {
        for s in 30..45 {
            values[f * ns + s] += 5.0;
        }
    }
    ExpressionMatrix::new(
        (0..nf).map(|i| format!("g{i}")).collect(),
        (0..ns).map(|j| format!("s{j}")).collect(),
        values,
    )
    .unwrap()
}

type SetPair = (Vec<usize>, Vec<u32>);

fn set_pairs(biclusters: &[Bicluster]) -> BTreeSet<SetPair> {
    biclusters
        .iter()
        .map(|b| (b.features.clone(), b.samples.clone()))
        .collect()
}

/// Consensus endpoints: five identical runs reproduce the run exactly,
/// and a pattern present in a single run is dropped.
#[test]
fn criterion_07_consensus_idempotence() {
    let m = planted_matrix();
    let z = zscore_rows(&m);
    let params = UnpastParams { seed: 7, ..Default::default() };
    let out = run_unpast(&m, &params).unwrap();
    assert!(out.biclusters.len() >= 2, "planted blocks not recovered");

    let runs = vec![out.biclusters.clone(); 5];
    let cons = ConsensusParams::new(params.method, params.min_n_samples, 7);
    let result = consensus_biclusters(&runs, &z, &cons).unwrap();
    assert_eq!(
        set_pairs(&result.biclusters),
        set_pairs(&out.biclusters),
        "consensus of identical runs must reproduce the run"
    );

    let used: BTreeSet<usize> = out.biclusters.iter().flat_map(|b| b.features.clone()).collect();
    let free: Vec<usize> = (0..m.n_features()).filter(|f| !used.contains(f)).take(6).collect();
    assert!(free.len() == 6);
    let lone = Bicluster {
        signs: vec![1; free.len()],
        features: free.clone(),
        samples: (46..56).collect(),
        direction: BiclusterDirection::Up,
        snr: 2.0,
        feature_stats: None,
    };
    let mut runs = vec![out.biclusters.clone(); 5];
    runs[2].push(lone);
    let result = consensus_biclusters(&runs, &z, &cons).unwrap();
    assert_eq!(set_pairs(&result.biclusters), set_pairs(&out.biclusters));
    for b in &result.biclusters {
        assert!(b.features.iter().all(|f| !free.contains(f)));
    }
    println!("ACCEPTANCE criterion 07 (consensus idempotence): PASS");
}

fn block_bicluster(features: std::ops::Range<usize>, samples: std::ops::Range<u32>) -> Bicluster {
    Bicluster {
        signs: vec![1; features.len()],
        features: features.collect(),
        samples: samples.collect(),
        direction: BiclusterDirection::Up,
        snr: 1.0,
        feature_stats: None,
    }
}

/// Redundancy endpoints on a 1000x200 grid: identical pair -> 1.0,
/// mutually disjoint -> 0.0, and one significant pair out of three ->
/// exactly one third.
#[test]
fn criterion_08_redundancy_endpoints() {
    let (nf, ns) = (1000usize, 200usize);
    let dup = vec![
        block_bicluster(0..50, 0..20),
        block_bicluster(0..50, 0..20),
    ];
    assert_eq!(fsp(&dup, nf, ns, 0.05).unwrap().fsp, 1.0);

    let disjoint = vec![
        block_bicluster(0..10, 0..10),
        block_bicluster(100..110, 50..60),
        block_bicluster(500..510, 150..160),
    ];
    assert_eq!(fsp(&disjoint, nf, ns, 0.05).unwrap().fsp, 0.0);

    // The first two share 800 of the larger's 1000 cells; the third is
    // disjoint from both, so exactly one of the three pairs is
    // significant.
    let one_of_three = vec![
        block_bicluster(0..50, 0..20),
        block_bicluster(0..40, 0..20),
        block_bicluster(500..520, 100..130),
    ];
    assert_eq!(fsp(&one_of_three, nf, ns, 0.05).unwrap().fsp, 1.0 / 3.0);
    println!("ACCEPTANCE criterion 08 (redundancy endpoints): PASS");
}

fn cli() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_unpast"));
    cmd.env_remove("UNPAST_THREADS");
    cmd
}

fn run_cli(cmd: &mut Command) {
    let status = cmd.status().unwrap();
    assert!(status.success(), "{cmd:?} exited with {status}");
}

/// Recursive relative-path -> bytes map of an output directory.
fn dir_bytes(root: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Byte-identical outputs: reruns of each subcommand with the same flags
/// and seed, under different thread counts, produce identical files.
#[test]
fn criterion_09_deterministic_outputs() {
    let base = scratch("acceptance_determinism");
    let sim = base.join("sim");
    let sim_again = base.join("sim_again");
    for out in [&sim, &sim_again] {
        run_cli(cli().args([
            "simulate",
            "--out",
            out.to_str().unwrap(),
            "--scenario",
            "A",
            "--n-features",
            "400",
            "--n-samples",
            "80",
            "--subtype-sizes",
            "8,12,16,20",
            "--n-biomarkers",
            "20",
            "--seed",
            "3",
        ]));
    }
    assert_eq!(dir_bytes(&sim), dir_bytes(&sim_again), "simulate reruns differ");

    let matrix = sim.join("matrix.tsv");
    let run_args = |out: &Path| {
        vec![
            "run".to_string(),
            "--matrix".into(),
            matrix.to_str().unwrap().into(),
            "--out".into(),
            out.to_str().unwrap().into(),
            "--seed".into(),
            "5".into(),
            "--n-runs".into(),
            "2".into(),
            "--dump-modules".into(),
        ]
    };
    let variants = [
        ("run_t1", Some("1"), None),
        ("run_t1_again", Some("1"), None),
        ("run_t3", Some("3"), None),
        ("run_env2", None, Some("2")),
        ("run_default", None, None),
    ];
    let mut snapshots = Vec::new();
    for (name, threads, env) in &variants {
        let out = base.join(name);
        let mut cmd = cli();
        cmd.args(run_args(&out));
        if let Some(t) = threads {
            cmd.args(["--threads", t]);
        }
        if let Some(e) = env {
            cmd.env("UNPAST_THREADS", e);
        }
        run_cli(&mut cmd);
        snapshots.push((name, dir_bytes(&out)));
    }
    for (name, snap) in &snapshots[1..] {
        assert_eq!(snap, &snapshots[0].1, "run variant {name} differs from baseline");
    }

    for name in ["ev", "ev_again"] {
        run_cli(cli().args([
            "evaluate",
            "--biclusters",
            base.join("run_t1/biclusters.tsv").to_str().unwrap(),
            "--truth",
            sim.join("truth.tsv").to_str().unwrap(),
            "--matrix",
            matrix.to_str().unwrap(),
            "--out",
            base.join(name).to_str().unwrap(),
        ]));
    }
    assert_eq!(
        dir_bytes(&base.join("ev")),
        dir_bytes(&base.join("ev_again")),
        "evaluate reruns differ"
    );
    println!("ACCEPTANCE criterion 09 (deterministic outputs): PASS");
}

fn vm_hwm_kb(pid: u32) -> Option<u64> {
    let status = std::fs::read_to_string(format!("/proc/{pid}/status")).ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

const SCALE_WALL_BUDGET: Duration = Duration::from_secs(30 * 60);
const SCALE_PEAK_BUDGET_KB: u64 = 8 * 1024 * 1024;

/// Scale ceiling: a full run on an 18000x2000 matrix stays under 30
/// minutes and 8 GiB peak memory. The run happens in a subprocess whose
/// high-water mark is polled from /proc.
#[test]
fn criterion_10_scale_ceiling() {
    let base = scratch("acceptance_scale");
    let sim = base.join("sim");
    run_cli(cli().args([
        "simulate",
        "--out",
        sim.to_str().unwrap(),
        "--scenario",
        "A",
        "--n-features",
        "18000",
        "--n-samples",
        "2000",
        "--subtype-sizes",
        "100,200,500,1000",
        "--n-biomarkers",
        "500",
        "--seed",
        "1",
    ]));

    let out = base.join("run");
    let t0 = Instant::now();
    let mut child = cli()
        .args([
            "run",
            "--matrix",
            sim.join("matrix.tsv").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "1",
        ])
        .spawn()
        .unwrap();
    let pid = child.id();
    let mut peak_kb = 0u64;
    let status = loop {
        if let Some(kb) = vm_hwm_kb(pid) {
            peak_kb = peak_kb.max(kb);
        }
        if let Some(status) = child.try_wait().unwrap() {
            break status;
        }
        if t0.elapsed() > SCALE_WALL_BUDGET {
            child.kill().unwrap();
            panic!("run exceeded the 30 min budget");
        }
        std::thread::sleep(Duration::from_millis(100));
    };
    let wall = t0.elapsed();
    assert!(status.success(), "scale run failed with {status}");
    assert!(peak_kb > 0, "never managed to read the child's memory high-water mark");
    assert!(
        wall < SCALE_WALL_BUDGET,
        "run took {wall:?}, budget is 30 min"
    );
    assert!(
        peak_kb < SCALE_PEAK_BUDGET_KB,
        "peak memory {peak_kb} kB exceeds 8 GiB"
    );
    assert!(out.join("biclusters.tsv").exists());
    println!(
        "ACCEPTANCE criterion 10 (scale ceiling): PASS, \
         wall {:.1} s, peak {:.2} GiB",
        wall.as_secs_f64(),
        peak_kb as f64 / (1024.0 * 1024.0)
    );
}
