//! Command-line interface: run the pipeline, simulate benchmark data,
//! evaluate predictions, measure redundancy, reconcile runs.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or I/O error. Every
//! subcommand echoes its effective parameters as config.json next to its
//! outputs, so a run can be reproduced from the output directory alone.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use unpast::binarize::BinarizationMethod;
use unpast::consensus::{consensus_biclusters, ConsensusParams, ConsensusResult};
use unpast::dataio::{
    read_biclusters, read_ground_truth, read_matrix, sig6, write_biclusters, write_ground_truth,
    write_matrix, zscore_rows,
};
use unpast::evaluate::{best_match_performance, fsp, PerformanceReport, RedundancyReport};
use unpast::modules::{Clustering, FeatureModule, ModuleMode};
use unpast::pipeline::{run_unpast, run_unpast_multi, DeParams, RunReport, UnpastParams};
use unpast::simulate::{generate, Scenario, SimulationSpec};

#[derive(Parser)]
#[command(name = "unpast", version, about = "Differential-expression biclustering")]
struct Cli {
    /// Worker threads; defaults to UNPAST_THREADS or all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find biclusters in an expression matrix.
    Run(RunArgs),
    /// Generate a synthetic benchmark dataset.
    Simulate(SimulateArgs),
    /// Score predicted biclusters against ground-truth sample sets.
    Evaluate(EvaluateArgs),
    /// Measure overlap redundancy within one bicluster set.
    Redundancy(RedundancyArgs),
    /// Reconcile bicluster sets from independent runs.
    Consensus(ConsensusArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Kmeans,
    Ward,
    Gmm,
}

impl From<MethodArg> for BinarizationMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Kmeans => BinarizationMethod::KMeans,
            MethodArg::Ward => BinarizationMethod::Ward,
            MethodArg::Gmm => BinarizationMethod::Gmm,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClusteringArg {
    Louvain,
    Tom,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DirectionsArg {
    Separate,
    Joint,
}

impl From<DirectionsArg> for unpast::DirectionMode {
    fn from(d: DirectionsArg) -> Self {
        match d {
            DirectionsArg::Separate => unpast::DirectionMode::Separate,
            DirectionsArg::Joint => unpast::DirectionMode::Joint,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Input expression matrix (features x samples TSV).
    #[arg(long)]
    matrix: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// 1-D split method used for features and for sample selection.
    #[arg(long, value_enum, default_value_t = MethodArg::Kmeans)]
    binarization: MethodArg,
    /// Feature grouping algorithm.
    #[arg(long, value_enum, default_value_t = ClusteringArg::Louvain)]
    clustering: ClusteringArg,
    /// Group up- and down-regulated features separately or together.
    #[arg(long, value_enum, default_value_t = DirectionsArg::Separate)]
    directions: DirectionsArg,
    /// Empirical null p-value cutoff for binarized features.
    #[arg(long, default_value_t = 0.01)]
    pval: f64,
    /// Smallest admissible sample group.
    #[arg(long, default_value_t = 5)]
    min_n_samples: usize,
    /// Jaccard threshold for feature-graph edges.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    edge_threshold: f64,
    /// Louvain resolution.
    #[arg(long, default_value_t = 1.0)]
    resolution: f64,
    /// Candidate cutoffs for TOM module detection (comma-separated).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    tom_cutoffs: Option<Vec<f64>>,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent runs with stepped seeds; more than one run ends in a
    /// consensus pass.
    #[arg(long, default_value_t = 1)]
    n_runs: usize,
    /// Minimum absolute group-mean difference in the verification pass.
    #[arg(long, default_value_t = 1.0)]
    de_lfc: f64,
    /// Maximum BH-adjusted p-value in the verification pass.
    #[arg(long, default_value_t = 0.05)]
    de_pval: f64,
    /// Skip the differential-expression verification pass.
    #[arg(long)]
    no_de: bool,
    /// Also write the feature modules behind each run (modules.tsv).
    #[arg(long)]
    dump_modules: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// A: disjoint subtypes; B: overlapping subtypes; C: overlapping
    /// subtypes plus co-expressed confounder modules.
    #[arg(long)]
    scenario: Scenario,
    /// Biomarker features per subtype.
    #[arg(long, default_value_t = 500)]
    n_biomarkers: usize,
    #[arg(long, default_value_t = 10000)]
    n_features: usize,
    #[arg(long, default_value_t = 200)]
    n_samples: usize,
    /// Sample count per subtype (comma-separated).
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [10, 20, 50, 100])]
    subtype_sizes: Vec<usize>,
    #[arg(long, default_value_t = 4.0)]
    signal_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    signal_std: f64,
    /// Co-expression module count; defaults to 4 in scenario C, else 0.
    #[arg(long)]
    coexpr_modules: Option<usize>,
    /// Features per co-expression module.
    #[arg(long, default_value_t = 500)]
    coexpr_size: usize,
    /// Correlation of module members with their seed feature.
    #[arg(long, default_value_t = 0.5)]
    coexpr_r: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predicted biclusters TSV.
    #[arg(long)]
    biclusters: PathBuf,
    /// Ground-truth sample sets (name, tab, space-separated sample ids).
    #[arg(long)]
    truth: PathBuf,
    /// Matrix the biclusters refer to; defines the sample universe.
    #[arg(long)]
    matrix: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Significance level for best-match assignment.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args)]
struct RedundancyArgs {
    /// Biclusters TSV.
    #[arg(long)]
    biclusters: PathBuf,
    /// Matrix the biclusters refer to; defines the cell grid.
    #[arg(long)]
    matrix: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Significance level for pair overlap.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args)]
struct ConsensusArgs {
    /// Bicluster TSVs of the runs to reconcile (at least two).
    #[arg(long, num_args = 2..)]
    runs: Vec<PathBuf>,
    /// Matrix all runs were produced from.
    #[arg(long)]
    matrix: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// 1-D split method for re-deriving consensus sample sets.
    #[arg(long, value_enum, default_value_t = MethodArg::Kmeans)]
    binarization: MethodArg,
    /// Smallest admissible sample group.
    #[arg(long, default_value_t = 5)]
    min_n_samples: usize,
    /// Significance level of the pairwise matching.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Fraction of a group's runs a feature must recur in.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    min_frequency: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_threads(cli.threads);
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Redundancy(args) => cmd_redundancy(args),
        Command::Consensus(args) => cmd_consensus(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn init_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("UNPAST_THREADS").ok().and_then(|s| s.parse().ok())
    });
    if let Some(n) = n {
        // 0 falls back to rayon's own default (all cores).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

#[derive(Serialize)]
struct RunConfig<'a> {
    command: &'static str,
    matrix: String,
    n_runs: usize,
    #[serde(flatten)]
    params: &'a UnpastParams,
}

#[derive(Serialize)]
struct MultiReport<'a> {
    runs: Vec<&'a RunReport>,
    consensus_cutoff: f64,
    n_consensus_biclusters: usize,
}

fn cmd_run(args: &RunArgs) -> anyhow::Result<()> {
    let params = UnpastParams {
        method: args.binarization.into(),
        p_threshold: args.pval,
        min_n_samples: args.min_n_samples,
        direction_mode: args.directions.into(),
        clustering: match args.clustering {
            ClusteringArg::Louvain => Clustering::Louvain { resolution: args.resolution },
            ClusteringArg::Tom => match &args.tom_cutoffs {
                Some(cutoffs) => Clustering::Tom { cutoffs: cutoffs.clone() },
                None => Clustering::default_tom(),
            },
        },
        edge_threshold: args.edge_threshold,
        de: (!args.no_de).then(|| DeParams { lfc_min: args.de_lfc, p_max: args.de_pval }),
        seed: args.seed,
        null_cache: None,
    };
    let m = read_matrix(&args.matrix)?;
    fs::create_dir_all(&args.out).with_context(|| dir_err(&args.out))?;
    let config = RunConfig {
        command: "run",
        matrix: args.matrix.display().to_string(),
        n_runs: args.n_runs,
        params: &params,
    };
    write_json(&args.out.join("config.json"), &config)?;
    if args.n_runs <= 1 {
        let run = run_unpast(&m, &params)?;
        write_biclusters(
            args.out.join("biclusters.tsv"),
            &run.biclusters,
            m.feature_ids(),
            m.sample_ids(),
        )?;
        write_json(&args.out.join("report.json"), &run.report)?;
        if args.dump_modules {
            write_modules(&args.out.join("modules.tsv"), &run.modules, m.feature_ids())?;
        }
        println!("{} biclusters -> {}", run.biclusters.len(), args.out.display());
    } else {
        let multi = run_unpast_multi(&m, &params, args.n_runs)?;
        for (i, run) in multi.runs.iter().enumerate() {
            let dir = args.out.join(format!("run_{i}"));
            fs::create_dir_all(&dir).with_context(|| dir_err(&dir))?;
            write_biclusters(
                dir.join("biclusters.tsv"),
                &run.biclusters,
                m.feature_ids(),
                m.sample_ids(),
            )?;
            write_json(&dir.join("report.json"), &run.report)?;
            if args.dump_modules {
                write_modules(&dir.join("modules.tsv"), &run.modules, m.feature_ids())?;
            }
        }
        let consensus = multi.consensus.expect("consensus of more than one run");
        write_biclusters(
            args.out.join("biclusters.tsv"),
            &consensus.biclusters,
            m.feature_ids(),
            m.sample_ids(),
        )?;
        write_json(
            &args.out.join("consensus_provenance.json"),
            &provenance(&consensus, m.feature_ids()),
        )?;
        let report = MultiReport {
            runs: multi.runs.iter().map(|r| &r.report).collect(),
            consensus_cutoff: consensus.cutoff,
            n_consensus_biclusters: consensus.biclusters.len(),
        };
        write_json(&args.out.join("report.json"), &report)?;
        println!(
            "{} consensus biclusters from {} runs -> {}",
            consensus.biclusters.len(),
            args.n_runs,
            args.out.display()
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulateConfig<'a> {
    command: &'static str,
    seed: u64,
    #[serde(flatten)]
    spec: &'a SimulationSpec,
}

#[derive(Serialize)]
struct PlantedSet<'a> {
    subtype: &'a str,
    features: Vec<&'a str>,
}

#[derive(Serialize)]
struct PlantedLayout<'a> {
    biomarkers: Vec<PlantedSet<'a>>,
    /// Seed feature first in each module.
    coexpr_modules: Vec<Vec<&'a str>>,
}

fn cmd_simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let mut spec = SimulationSpec::new(args.scenario, args.n_biomarkers);
    spec.n_features = args.n_features;
    spec.n_samples = args.n_samples;
    spec.subtype_sizes = args.subtype_sizes.clone();
    spec.signal_mean = args.signal_mean;
    spec.signal_std = args.signal_std;
    if let Some(k) = args.coexpr_modules {
        spec.coexpr_modules = k;
    }
    spec.coexpr_size = args.coexpr_size;
    spec.coexpr_r = args.coexpr_r;

    let dataset = generate(&spec, args.seed)?;
    fs::create_dir_all(&args.out).with_context(|| dir_err(&args.out))?;
    let config = SimulateConfig { command: "simulate", seed: args.seed, spec: &spec };
    write_json(&args.out.join("config.json"), &config)?;
    write_matrix(args.out.join("matrix.tsv"), &dataset.matrix)?;
    write_ground_truth(args.out.join("truth.tsv"), &dataset.truth, dataset.matrix.sample_ids())?;

    let ids = dataset.matrix.feature_ids();
    let as_ids = |set: &[u32]| -> Vec<&str> {
        set.iter().map(|&f| ids[f as usize].as_str()).collect()
    };
    let layout = PlantedLayout {
        biomarkers: dataset
            .truth
            .names()
            .iter()
            .zip(&dataset.biomarkers)
            .map(|(name, set)| PlantedSet { subtype: name, features: as_ids(set) })
            .collect(),
        coexpr_modules: dataset.coexpr.iter().map(|set| as_ids(set)).collect(),
    };
    write_json(&args.out.join("layout.json"), &layout)?;
    println!(
        "scenario {} matrix {}x{} -> {}",
        spec.scenario,
        spec.n_features,
        spec.n_samples,
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvaluateConfig {
    command: &'static str,
    biclusters: String,
    truth: String,
    matrix: String,
    alpha: f64,
}

fn cmd_evaluate(args: &EvaluateArgs) -> anyhow::Result<()> {
    let m = read_matrix(&args.matrix)?;
    let truth = read_ground_truth(&args.truth, &m)?;
    let biclusters = read_biclusters(&args.biclusters, &m)?;
    let predicted: Vec<Vec<u32>> = biclusters.iter().map(|b| b.samples.clone()).collect();
    let report = best_match_performance(&truth, &predicted, args.alpha)?;
    fs::create_dir_all(&args.out).with_context(|| dir_err(&args.out))?;
    let config = EvaluateConfig {
        command: "evaluate",
        biclusters: args.biclusters.display().to_string(),
        truth: args.truth.display().to_string(),
        matrix: args.matrix.display().to_string(),
        alpha: args.alpha,
    };
    write_json(&args.out.join("config.json"), &config)?;
    write_json(&args.out.join("report.json"), &report)?;
    write_match_pairs(&args.out.join("pairs.tsv"), &report, truth.names())?;
    println!("performance {}", sig6(report.total));
    Ok(())
}

#[derive(Serialize)]
struct RedundancyConfig {
    command: &'static str,
    biclusters: String,
    matrix: String,
    alpha: f64,
}

fn cmd_redundancy(args: &RedundancyArgs) -> anyhow::Result<()> {
    let m = read_matrix(&args.matrix)?;
    let biclusters = read_biclusters(&args.biclusters, &m)?;
    let report = fsp(&biclusters, m.n_features(), m.n_samples(), args.alpha)?;
    fs::create_dir_all(&args.out).with_context(|| dir_err(&args.out))?;
    let config = RedundancyConfig {
        command: "redundancy",
        biclusters: args.biclusters.display().to_string(),
        matrix: args.matrix.display().to_string(),
        alpha: args.alpha,
    };
    write_json(&args.out.join("config.json"), &config)?;
    write_json(&args.out.join("report.json"), &report)?;
    write_redundancy_pairs(&args.out.join("pairs.tsv"), &report)?;
    println!("fsp {}", sig6(report.fsp));
    Ok(())
}

#[derive(Serialize)]
struct ConsensusConfig<'a> {
    command: &'static str,
    matrix: String,
    runs: Vec<String>,
    #[serde(flatten)]
    params: &'a ConsensusParams,
}

fn cmd_consensus(args: &ConsensusArgs) -> anyhow::Result<()> {
    let m = read_matrix(&args.matrix)?;
    let z = zscore_rows(&m);
    let runs = args
        .runs
        .iter()
        .map(|path| read_biclusters(path, &m))
        .collect::<Result<Vec<_>, _>>()?;
    let mut params =
        ConsensusParams::new(args.binarization.into(), args.min_n_samples, args.seed);
    params.alpha = args.alpha;
    params.min_frequency = args.min_frequency;
    let result = consensus_biclusters(&runs, &z, &params)?;
    fs::create_dir_all(&args.out).with_context(|| dir_err(&args.out))?;
    let config = ConsensusConfig {
        command: "consensus",
        matrix: args.matrix.display().to_string(),
        runs: args.runs.iter().map(|p| p.display().to_string()).collect(),
        params: &params,
    };
    write_json(&args.out.join("config.json"), &config)?;
    write_biclusters(
        args.out.join("biclusters.tsv"),
        &result.biclusters,
        m.feature_ids(),
        m.sample_ids(),
    )?;
    write_json(
        &args.out.join("consensus_provenance.json"),
        &provenance(&result, m.feature_ids()),
    )?;
    println!(
        "{} consensus biclusters from {} runs -> {}",
        result.biclusters.len(),
        runs.len(),
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct MemberRef {
    run: usize,
    index: usize,
}

#[derive(Serialize)]
struct GroupProvenance<'a> {
    members: Vec<MemberRef>,
    features: Vec<&'a str>,
    bicluster: Option<usize>,
}

#[derive(Serialize)]
struct ConsensusProvenance<'a> {
    cutoff: f64,
    n_biclusters: usize,
    groups: Vec<GroupProvenance<'a>>,
}

/// Which run-biclusters formed each consensus group, with feature ids
/// resolved against the matrix.
fn provenance<'a>(result: &ConsensusResult, feature_ids: &'a [String]) -> ConsensusProvenance<'a> {
    ConsensusProvenance {
        cutoff: result.cutoff,
        n_biclusters: result.biclusters.len(),
        groups: result
            .groups
            .iter()
            .map(|g| GroupProvenance {
                members: g.members.iter().map(|&(run, index)| MemberRef { run, index }).collect(),
                features: g.features.iter().map(|&f| feature_ids[f].as_str()).collect(),
                bicluster: g.bicluster,
            })
            .collect(),
    }
}

fn dir_err(path: &Path) -> String {
    format!("creating output directory {}", path.display())
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_modules(
    path: &Path,
    modules: &[FeatureModule],
    feature_ids: &[String],
) -> anyhow::Result<()> {
    let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "id\tmode\tn_features\tfeatures")?;
    for (i, module) in modules.iter().enumerate() {
        let features: Vec<String> = module
            .members
            .iter()
            .zip(&module.signs)
            .map(|(&f, &sign)| {
                if sign < 0 {
                    format!("-{}", feature_ids[f])
                } else {
                    feature_ids[f].clone()
                }
            })
            .collect();
        let mode = match module.mode {
            ModuleMode::Up => "up",
            ModuleMode::Down => "down",
            ModuleMode::Mixed => "mixed",
        };
        writeln!(w, "{i}\t{mode}\t{}\t{}", module.members.len(), features.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

fn write_match_pairs(
    path: &Path,
    report: &PerformanceReport,
    truth_names: &[String],
) -> anyhow::Result<()> {
    let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "truth\tpredicted\tinverted\tpvalue\tadj_pvalue\tari")?;
    for p in &report.pairs {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            truth_names[p.truth],
            p.predicted,
            p.inverted,
            sig6(p.pvalue),
            sig6(p.adj_pvalue),
            sig6(p.ari)
        )?;
    }
    w.flush()?;
    Ok(())
}

fn write_redundancy_pairs(path: &Path, report: &RedundancyReport) -> anyhow::Result<()> {
    let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "a\tb\tjaccard\tpvalue\tadj_pvalue\tsignificant")?;
    for p in &report.pairs {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            p.a,
            p.b,
            sig6(p.jaccard),
            sig6(p.pvalue),
            sig6(p.adj_pvalue),
            p.significant
        )?;
    }
    w.flush()?;
    Ok(())
}
