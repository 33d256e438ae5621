//! `generate`, `solve` and `eval`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cara::eval::error_stats;
use cara::format::{parse_estimates, read_graph, serialize_estimates, serialize_graph, StreamingGraphFile};
use cara::init::{confidence_aware_initialization, SpanningTree};
use cara::so3::{deg, to_deg};
use cara::solver::{cal_loss, irls_solve};
use cara::synth::{corrupt_with_outlier_vertices, generate, serialize_labels, SyntheticSceneSpec};
use cara::{Anchor, EdgeSource, RobustKernel, SolveConfig, SolveReport};

use crate::args::{EvalArgs, GenerateArgs, SceneArgs, SolveArgs};
use crate::error::{CliError, CliResult};

/// Mixed into the scene seed so appended outlier cameras are drawn from a
/// stream independent of the scene itself.
pub const OUTLIER_VERTEX_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn scene_spec(args: &SceneArgs) -> CliResult<SyntheticSceneSpec> {
    let spec = SyntheticSceneSpec {
        n: args.n,
        topology: args.topology,
        noise_sigma: deg(args.sigma_deg),
        outlier_edge_fraction: args.outlier_frac,
        confidence_model: args.confidence_model,
        seed: args.seed,
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

pub fn write_file(path: &Path, contents: &str) -> CliResult {
    std::fs::write(path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn labels_path(graph_path: &Path) -> PathBuf {
    let mut name = graph_path.as_os_str().to_owned();
    name.push(".labels");
    PathBuf::from(name)
}

pub fn cmd_generate(args: &GenerateArgs) -> CliResult {
    let spec = scene_spec(&args.scene)?;
    let mut scene = generate(&spec).map_err(CliError::solve)?;
    if args.outlier_vertices > 0 {
        let seed = spec.seed ^ OUTLIER_VERTEX_SEED_OFFSET;
        scene = corrupt_with_outlier_vertices(&scene, args.outlier_vertices, seed).map_err(CliError::solve)?;
    }
    write_file(&args.out, &serialize_graph(&scene.graph))?;
    write_file(&labels_path(&args.out), &serialize_labels(&scene))?;
    println!(
        "N {} edges {} outliers {}",
        scene.graph.n_vertices(),
        scene.graph.edges().len(),
        scene.outlier_count()
    );
    Ok(())
}

fn solve_config(args: &SolveArgs) -> CliResult<(SolveConfig, RobustKernel)> {
    let config = SolveConfig {
        max_iterations: args.iters,
        anchor: args.anchor,
        irls_max_iterations: args.irls_iters,
        ..SolveConfig::default()
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let kernel = RobustKernel::with_alpha(args.kernel.into(), deg(args.alpha_deg))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((config, kernel))
}

/// Initialization, optimization and final confidence-aware loss.
fn run_solver<S: EdgeSource + ?Sized>(
    src: &S,
    config: &SolveConfig,
    kernel: &RobustKernel,
) -> CliResult<(SpanningTree, SolveReport, f64)> {
    if let Anchor::FixVertex(v) = config.anchor {
        if v >= src.vertex_count() {
            return Err(CliError::Usage(format!(
                "anchor vertex {v} out of range for {} vertices",
                src.vertex_count()
            )));
        }
    }
    let (tree, initial) = confidence_aware_initialization(src).map_err(CliError::solve)?;
    let report = irls_solve(src, &initial, kernel, config).map_err(CliError::solve)?;
    let loss = cal_loss(src, &report.rotations).map_err(CliError::solve)?;
    Ok((tree, report, loss))
}

pub fn format_tree(tree: &SpanningTree) -> String {
    let mut out = String::new();
    writeln!(out, "tree root {} total_confidence {:.6}", tree.root, tree.total_confidence()).unwrap();
    for e in &tree.parent_edges {
        writeln!(out, "TREE {} {} {:.6}", e.parent, e.child, e.confidence).unwrap();
    }
    out
}

pub fn cmd_solve(args: &SolveArgs) -> CliResult {
    let (config, kernel) = solve_config(args)?;
    let (edges, (tree, report, loss)) = if args.stream {
        let file = StreamingGraphFile::open(&args.input).map_err(|e| CliError::input(&args.input, e))?;
        (file.edge_count(), run_solver(&file, &config, &kernel)?)
    } else {
        let graph = read_graph(&args.input).map_err(|e| CliError::input(&args.input, e))?;
        (graph.edges().len(), run_solver(&graph, &config, &kernel)?)
    };
    write_file(&args.out, &serialize_estimates(&report.rotations))?;

    let mut out = String::new();
    writeln!(
        out,
        "vertices {} edges {} kernel {}{}",
        report.rotations.len(),
        edges,
        kernel.kind.name(),
        if args.stream { " (streamed)" } else { "" }
    )
    .unwrap();
    if args.dump_tree {
        out.push_str(&format_tree(&tree));
    }
    for d in tree.diagnostics.iter().chain(&report.diagnostics) {
        writeln!(out, "warning: {d}").unwrap();
    }
    for (k, (l, r)) in report.loss_history.iter().zip(&report.max_residual_history).enumerate() {
        writeln!(out, "iteration {k} loss {l:.6e} max_residual_deg {:.6e}", to_deg(*r)).unwrap();
    }
    writeln!(out, "final_loss {loss:.6e}").unwrap();
    print!("{out}");
    Ok(())
}

pub fn eval_csv(stats: &cara::eval::AlignedErrorStats) -> String {
    let mut out = String::from("# cara-eval v1\nkey,value\n");
    for (v, e) in stats.per_camera_errors.iter().enumerate() {
        writeln!(out, "error_deg_{v},{:.9}", to_deg(*e)).unwrap();
    }
    writeln!(out, "mean_deg,{:.9}", to_deg(stats.mean)).unwrap();
    writeln!(out, "median_deg,{:.9}", to_deg(stats.median)).unwrap();
    for (t, a) in &stats.accuracy {
        writeln!(out, "acc@{t},{a:.6}").unwrap();
    }
    out
}

fn eval_table(stats: &cara::eval::AlignedErrorStats) -> String {
    let mut out = String::new();
    writeln!(out, "{:>8}  {:>12}", "camera", "error (deg)").unwrap();
    for (v, e) in stats.per_camera_errors.iter().enumerate() {
        writeln!(out, "{v:>8}  {:>12.4}", to_deg(*e)).unwrap();
    }
    writeln!(out, "{:>8}  {:>12.4}", "mean", to_deg(stats.mean)).unwrap();
    writeln!(out, "{:>8}  {:>12.4}", "median", to_deg(stats.median)).unwrap();
    for (t, a) in &stats.accuracy {
        writeln!(out, "{:>8}  {:>11.1}%", format!("acc@{t}"), 100.0 * a).unwrap();
    }
    out
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult {
    if let Some(t) = args.thresholds.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(CliError::Usage(format!("invalid threshold {t}")));
    }
    let estimates =
        parse_estimates(&read_file(&args.est)?).map_err(|e| CliError::Input(format!("{}: {e}", args.est.display())))?;
    let graph = read_graph(&args.gt).map_err(|e| CliError::input(&args.gt, e))?;
    let truth = graph
        .ground_truth()
        .ok_or_else(|| CliError::Input(format!("{}: no VERTEX_GT records", args.gt.display())))?;
    if truth.len() != estimates.len() {
        return Err(CliError::Input(format!(
            "{} estimates but {} ground-truth vertices",
            estimates.len(),
            truth.len()
        )));
    }
    let stats = error_stats(&estimates, truth, &args.thresholds).map_err(|e| CliError::Input(e.to_string()))?;
    let csv = eval_csv(&stats);
    let table = eval_table(&stats);
    match &args.out {
        Some(path) => {
            write_file(path, &csv)?;
            print!("{table}");
        }
        None => {
            print!("{csv}");
            eprint!("{table}");
        }
    }
    Ok(())
}
