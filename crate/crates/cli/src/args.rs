//! Command-line grammar. Angles are given in degrees and converted to radians
//! before reaching the library.

use std::path::PathBuf;

use cara::so3::deg;
use cara::synth::{ConfidenceModel, Topology};
use cara::{Anchor, KernelKind};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cara", version, about = "Confidence-aware rotation averaging")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene: a graph file plus a `<out>.labels` sidecar.
    Generate(GenerateArgs),
    /// Estimate absolute rotations from a graph file.
    Solve(SolveArgs),
    /// Compare estimated rotations with ground truth after gauge alignment.
    Eval(EvalArgs),
    /// Run a scripted experiment grid and write one CSV row per run.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    /// Number of cameras.
    #[arg(long, default_value_t = 7)]
    pub n: usize,
    /// complete | erdos:<p> | chain:<w>
    #[arg(long, default_value = "complete", value_parser = parse_topology)]
    pub topology: Topology,
    /// Relative-rotation noise, degrees.
    #[arg(long, default_value_t = 5.0)]
    pub sigma_deg: f64,
    /// Fraction of edges replaced by random rotations.
    #[arg(long, default_value_t = 0.0)]
    pub outlier_frac: f64,
    /// informative[:<scale_deg>] | oracle[:<eps>] | constant:<c> | adversarial
    #[arg(long, default_value = "informative", value_parser = parse_confidence_model)]
    pub confidence_model: ConfidenceModel,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Append this many unrelated cameras joined to every existing camera.
    #[arg(long, default_value_t = 0)]
    pub outlier_vertices: usize,
    /// Graph file to write; labels go to `<out>.labels`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Confidence,
    L2,
    LHalf,
    Cauchy,
    GemanMcclure,
}

impl From<KernelArg> for KernelKind {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Confidence => KernelKind::Confidence,
            KernelArg::L2 => KernelKind::L2,
            KernelArg::LHalf => KernelKind::LHalf,
            KernelArg::Cauchy => KernelKind::Cauchy,
            KernelArg::GemanMcclure => KernelKind::GemanMcClure,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Graph file to solve.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Where to write `VERTEX_EST` records.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = KernelArg::Confidence)]
    pub kernel: KernelArg,
    /// Robust-kernel scale, degrees.
    #[arg(long, default_value_t = 5.0)]
    pub alpha_deg: f64,
    /// Weighted least-squares iterations T for the confidence kernel.
    #[arg(long, default_value_t = 3)]
    pub iters: usize,
    /// Outer reweighting iterations for the robust kernels.
    #[arg(long, default_value_t = 20)]
    pub irls_iters: usize,
    /// root | vertex:<id> | tikhonov:<lambda>
    #[arg(long, default_value = "root", value_parser = parse_anchor)]
    pub anchor: Anchor,
    /// Re-read edges from the file on every pass instead of loading them.
    #[arg(long)]
    pub stream: bool,
    /// Print the initialization spanning tree.
    #[arg(long)]
    pub dump_tree: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Estimate file (`VERTEX_EST` records).
    #[arg(long)]
    pub est: PathBuf,
    /// Graph file carrying `VERTEX_GT` records.
    #[arg(long)]
    pub gt: PathBuf,
    /// Accuracy thresholds, degrees, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![3.0, 5.0, 10.0])]
    pub thresholds: Vec<f64>,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Outlier cameras appended to a 7-camera scene, confidence vs constant weights.
    Outliers,
    /// Robust kernels on graphs with 30% outlier edges.
    Kernels,
    /// Sparse sequential graphs of growing size.
    Scale,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    /// Seed list: `a..b` (half-open) or comma separated values.
    #[arg(long, default_value = "0..10", value_parser = parse_seeds)]
    pub seeds: Seeds,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seeds(pub Vec<u64>);

fn parse_number<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String> {
    s.trim().parse().map_err(|_| format!("invalid {what} '{s}'"))
}

pub fn parse_topology(s: &str) -> Result<Topology, String> {
    match s.split_once(':') {
        None if s == "complete" => Ok(Topology::Complete),
        Some(("erdos", p)) => Ok(Topology::Erdos(parse_number(p, "edge probability")?)),
        Some(("chain", w)) => Ok(Topology::ChainWindow(parse_number(w, "chain window")?)),
        _ => Err(format!("unknown topology '{s}' (expected complete, erdos:<p> or chain:<w>)")),
    }
}

pub fn parse_confidence_model(s: &str) -> Result<ConfidenceModel, String> {
    let (name, param) = match s.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (s, None),
    };
    match (name, param) {
        ("informative", None) => Ok(ConfidenceModel::informative()),
        ("informative", Some(p)) => {
            let ConfidenceModel::Informative { jitter, .. } = ConfidenceModel::informative() else {
                unreachable!()
            };
            Ok(ConfidenceModel::Informative {
                scale: deg(parse_number(p, "confidence scale")?),
                jitter,
            })
        }
        ("oracle", None) => Ok(ConfidenceModel::oracle()),
        ("oracle", Some(p)) => Ok(ConfidenceModel::Oracle {
            eps: parse_number(p, "outlier confidence")?,
        }),
        ("constant", Some(p)) => Ok(ConfidenceModel::Constant(parse_number(p, "confidence")?)),
        ("adversarial", None) => Ok(ConfidenceModel::Adversarial),
        _ => Err(format!(
            "unknown confidence model '{s}' (expected informative[:scale_deg], oracle[:eps], constant:<c> or adversarial)"
        )),
    }
}

pub fn parse_anchor(s: &str) -> Result<Anchor, String> {
    match s.split_once(':') {
        None if s == "root" => Ok(Anchor::FixRoot),
        Some(("vertex", v)) => Ok(Anchor::FixVertex(parse_number(v, "vertex id")?)),
        Some(("tikhonov", l)) => Ok(Anchor::Tikhonov(parse_number(l, "regularization weight")?)),
        _ => Err(format!("unknown anchor '{s}' (expected root, vertex:<id> or tikhonov:<lambda>)")),
    }
}

pub fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (parse_number(a, "seed")?, parse_number(b, "seed")?);
        (a..b).collect()
    } else {
        s.split(',').map(|x| parse_number(x, "seed")).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(format!("seed list '{s}' is empty"));
    }
    Ok(Seeds(seeds))
}
