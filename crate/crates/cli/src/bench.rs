//! Scripted experiment grids. Every (scenario, seed) pair is one independent
//! run; runs execute in parallel and rows are emitted in grid order.

use std::fmt::Write as _;
use std::time::Instant;

use cara::eval::{error_stats, median};
use cara::init::confidence_aware_initialization;
use cara::so3::{deg, to_deg};
use cara::solver::irls_solve;
use cara::synth::{corrupt_with_outlier_vertices, generate, ConfidenceModel, SyntheticSceneSpec, Topology};
use cara::{Edge, EpipolarConfidenceGraph, KernelKind, RobustKernel, SolveConfig};
use rayon::prelude::*;

use crate::args::Suite;
use crate::commands::OUTLIER_VERTEX_SEED_OFFSET;
use crate::error::{CliError, CliResult};

pub const CSV_HEADER: &str = "# cara-bench v1\n\
scenario,kernel,confidence_model,n,k_outliers,sigma_deg,mean_err_deg,median_err_deg,acc3,acc5,acc10,wall_ms,seed\n";

/// Outlier-camera counts of the outlier-robustness grid.
pub const OUTLIER_COUNTS: [usize; 6] = [0, 2, 4, 6, 8, 10];
/// Kernels compared by the kernel grid.
pub const BENCH_KERNELS: [KernelKind; 4] =
    [KernelKind::L2, KernelKind::Cauchy, KernelKind::GemanMcClure, KernelKind::Confidence];
/// Camera counts of the scale grid.
pub const SCALE_SIZES: [usize; 4] = [250, 500, 1000, 2000];

#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub kernel: KernelKind,
    /// Scene template; the seed is filled in per run.
    pub spec: SyntheticSceneSpec,
    /// Unrelated cameras appended after generation; only the original
    /// cameras are evaluated.
    pub outlier_vertices: usize,
    /// Replace every confidence by 1 before solving.
    pub constant_weights: bool,
}

impl Scenario {
    fn confidence_label(&self) -> &'static str {
        if self.constant_weights {
            "constant"
        } else {
            self.spec.confidence_model.name()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub scenario: String,
    pub kernel: &'static str,
    pub confidence_model: &'static str,
    pub n: usize,
    pub k_outliers: usize,
    pub sigma_deg: f64,
    pub mean_err_deg: f64,
    pub median_err_deg: f64,
    pub acc3: f64,
    pub acc5: f64,
    pub acc10: f64,
    pub wall_ms: f64,
    pub seed: u64,
}

impl BenchmarkRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3},{}",
            self.scenario,
            self.kernel,
            self.confidence_model,
            self.n,
            self.k_outliers,
            self.sigma_deg,
            self.mean_err_deg,
            self.median_err_deg,
            self.acc3,
            self.acc5,
            self.acc10,
            self.wall_ms,
            self.seed
        )
    }
}

pub fn scenarios(suite: Suite) -> Vec<Scenario> {
    match suite {
        Suite::Outliers => {
            let spec = SyntheticSceneSpec {
                n: 7,
                topology: Topology::Complete,
                noise_sigma: deg(5.0),
                outlier_edge_fraction: 0.0,
                confidence_model: ConfidenceModel::oracle(),
                seed: 0,
            };
            OUTLIER_COUNTS
                .iter()
                .flat_map(|&k| {
                    [false, true].map(|constant_weights| Scenario {
                        id: format!("outliers-k{k}"),
                        kernel: KernelKind::Confidence,
                        spec: spec.clone(),
                        outlier_vertices: k,
                        constant_weights,
                    })
                })
                .collect()
        }
        Suite::Kernels => {
            let spec = SyntheticSceneSpec {
                n: 20,
                topology: Topology::Complete,
                noise_sigma: deg(5.0),
                outlier_edge_fraction: 0.3,
                confidence_model: ConfidenceModel::informative(),
                seed: 0,
            };
            BENCH_KERNELS
                .iter()
                .map(|&kernel| Scenario {
                    id: "kernels-n20-out30".to_string(),
                    kernel,
                    spec: spec.clone(),
                    outlier_vertices: 0,
                    constant_weights: false,
                })
                .collect()
        }
        Suite::Scale => SCALE_SIZES
            .iter()
            .map(|&n| Scenario {
                id: format!("scale-n{n}"),
                kernel: KernelKind::Confidence,
                spec: SyntheticSceneSpec {
                    n,
                    topology: Topology::ChainWindow(10),
                    noise_sigma: deg(5.0),
                    outlier_edge_fraction: 0.0,
                    confidence_model: ConfidenceModel::informative(),
                    seed: 0,
                },
                outlier_vertices: 0,
                constant_weights: false,
            })
            .collect(),
    }
}

fn with_unit_confidence(g: &EpipolarConfidenceGraph) -> cara::Result<EpipolarConfidenceGraph> {
    let edges = g.edges().iter().map(|e| Edge { confidence: 1.0, ..*e });
    EpipolarConfidenceGraph::build(g.n_vertices(), edges)
}

pub fn run_one(scenario: &Scenario, seed: u64) -> cara::Result<BenchmarkRow> {
    let spec = SyntheticSceneSpec {
        seed,
        ..scenario.spec.clone()
    };
    let base = generate(&spec)?;
    let scene = corrupt_with_outlier_vertices(&base, scenario.outlier_vertices, seed ^ OUTLIER_VERTEX_SEED_OFFSET)?;
    let graph = if scenario.constant_weights {
        with_unit_confidence(&scene.graph)?
    } else {
        scene.graph.clone()
    };

    let start = Instant::now();
    let (_, initial) = confidence_aware_initialization(&graph)?;
    let report = irls_solve(&graph, &initial, &RobustKernel::new(scenario.kernel), &SolveConfig::default())?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;

    let n = spec.n;
    let stats = error_stats(&report.rotations[..n], base.ground_truth(), &[3.0, 5.0, 10.0])?;
    let acc = |t: f64| stats.accuracy_at(t).unwrap_or(f64::NAN);
    Ok(BenchmarkRow {
        scenario: scenario.id.clone(),
        kernel: scenario.kernel.name(),
        confidence_model: scenario.confidence_label(),
        n,
        k_outliers: scenario.outlier_vertices,
        sigma_deg: to_deg(spec.noise_sigma),
        mean_err_deg: to_deg(stats.mean),
        median_err_deg: to_deg(stats.median),
        acc3: acc(3.0),
        acc5: acc(5.0),
        acc10: acc(10.0),
        wall_ms,
        seed,
    })
}

/// Runs the whole grid; rows are ordered by scenario, then by position in `seeds`.
pub fn run_suite(suite: Suite, seeds: &[u64]) -> CliResult<Vec<BenchmarkRow>> {
    let grid = scenarios(suite);
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|s| (0..seeds.len()).map(move |k| (s, k)))
        .collect();
    let mut rows: Vec<((usize, usize), BenchmarkRow)> = jobs
        .par_iter()
        .map(|&(s, k)| {
            run_one(&grid[s], seeds[k])
                .map(|row| ((s, k), row))
                .map_err(|e| CliError::Unsolvable(format!("{} seed {}: {e}", grid[s].id, seeds[k])))
        })
        .collect::<CliResult<_>>()?;
    rows.sort_by_key(|(key, _)| *key);
    Ok(rows.into_iter().map(|(_, row)| row).collect())
}

pub fn to_csv(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

/// Median over seeds of the per-run mean and median errors, one line per
/// (scenario, kernel, confidence model).
pub fn summary(rows: &[BenchmarkRow]) -> String {
    let mut groups: Vec<(String, Vec<&BenchmarkRow>)> = Vec::new();
    for row in rows {
        let key = format!("{} {} {}", row.scenario, row.kernel, row.confidence_model);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    let mut out = String::new();
    writeln!(
        out,
        "{:<44} {:>6} {:>14} {:>16}",
        "scenario kernel confidence", "runs", "mean err (°)", "median err (°)"
    )
    .unwrap();
    for (key, members) in groups {
        let means: Vec<f64> = members.iter().map(|r| r.mean_err_deg).collect();
        let medians: Vec<f64> = members.iter().map(|r| r.median_err_deg).collect();
        writeln!(
            out,
            "{key:<44} {:>6} {:>14.3} {:>16.3}",
            members.len(),
            median(&means),
            median(&medians)
        )
        .unwrap();
    }
    out
}
