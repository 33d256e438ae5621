//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

use std::io::Write as _;
use std::time::{Duration, Instant};

use cara::eval::{alignment_objective, error_stats, mean, median};
use cara::format::{write_graph, StreamingGraphFile};
use cara::init::{confidence_aware_initialization, maximum_spanning_tree};
use cara::so3::{deg, exp_map, log_map, random_rotation, riemannian_distance, to_deg, Rotation};
use cara::synth::{
    confidence_error_table, corrupt_with_outlier_vertices, generate, ConfidenceModel, SyntheticScene,
    SyntheticSceneSpec, Topology,
};
use cara::solver::{cal_loss, cao_solve, irls_solve, ScaledConfidences};
use cara::{Edge, EpipolarConfidenceGraph, KernelKind, RobustKernel, SolveConfig};
use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes straight to the process stdout so the verdict shows up even when
/// the test harness captures `println!` output.
fn report(criterion: u32, ok: bool, detail: String) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let line = format!("[{verdict}] criterion {criterion:>2}: {detail}\n");
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
}

fn max_rotation_change(a: &[Rotation], b: &[Rotation]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.matrix() - y.matrix()).norm())
        .fold(0.0, f64::max)
}

fn solve_default(graph: &EpipolarConfidenceGraph) -> Vec<Rotation> {
    let (_, init) = confidence_aware_initialization(graph).unwrap();
    cao_solve(graph, &init, &SolveConfig::default()).unwrap().rotations
}

fn scene(n: usize, sigma_deg: f64, outliers: f64, model: ConfidenceModel, seed: u64) -> SyntheticScene {
    generate(&SyntheticSceneSpec {
        n,
        topology: Topology::Complete,
        noise_sigma: deg(sigma_deg),
        outlier_edge_fraction: outliers,
        confidence_model: model,
        seed,
    })
    .unwrap()
}

fn with_constant_confidence(g: &EpipolarConfidenceGraph, c: f64) -> EpipolarConfidenceGraph {
    let edges = g.edges().iter().map(|e| Edge { confidence: c, ..*e });
    EpipolarConfidenceGraph::build(g.n_vertices(), edges).unwrap()
}

#[test]
fn criterion_01_lie_group_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_log_exp = 0.0f64;
    let mut worst_exp_log = 0.0f64;
    let mut worst_angle = 0.0f64;
    for _ in 0..1000 {
        // Tangent vectors strictly inside the injectivity radius.
        let dir = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let v = if dir.norm() > 1e-12 { dir.normalize() * rng.random_range(0.0..3.1) } else { dir };
        let back = log_map(&exp_map(&v).unwrap());
        worst_log_exp = worst_log_exp.max((back - v).norm());

        let r = Rotation::random(&mut rng);
        let again = exp_map(&log_map(&r)).unwrap();
        worst_exp_log = worst_exp_log.max((again.matrix() - r.matrix()).norm());
        worst_angle = worst_angle.max((riemannian_distance(&r, &Rotation::identity()) - r.angle()).abs());
    }
    let elapsed = start.elapsed();
    let ok = worst_log_exp < 1e-9 && worst_exp_log < 1e-9 && worst_angle < 1e-9 && elapsed < Duration::from_secs(1);
    report(
        1,
        ok,
        format!("log∘exp {worst_log_exp:.1e}, exp∘log {worst_exp_log:.1e}, angle {worst_angle:.1e}, {elapsed:?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_02_noise_free_recovery() {
    let start = Instant::now();
    let mut details = Vec::new();
    let mut ok = true;
    for (n, seed) in [(3, 11), (7, 12), (20, 13)] {
        let s = scene(n, 0.0, 0.0, ConfidenceModel::informative(), seed);
        let gt = s.ground_truth();
        let (_, init) = confidence_aware_initialization(&s.graph).unwrap();
        let cai = error_stats(&init, gt, &[]).unwrap().mean;
        let solved = cao_solve(&s.graph, &init, &SolveConfig::default()).unwrap();
        let cao = error_stats(&solved.rotations, gt, &[]).unwrap().mean;
        ok &= cai < 1e-9 && cao < 1e-6;
        details.push(format!("N={n}: CAI {cai:.1e}, CAO {cao:.1e}"));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(1);
    report(2, ok, format!("{}; {elapsed:?}", details.join(", ")));
    assert!(ok);
}

#[test]
fn criterion_03_confidence_scale_invariance() {
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let s = scene(20, 5.0, 0.2, ConfidenceModel::informative(), 300 + seed);
        let run = |factor: f64| {
            let src = ScaledConfidences { inner: &s.graph, factor };
            let (_, init) = confidence_aware_initialization(&src).unwrap();
            cao_solve(&src, &init, &SolveConfig::default()).unwrap().rotations
        };
        let base = run(1.0);
        for lambda in [0.1, 7.3] {
            worst = worst.max(max_rotation_change(&base, &run(lambda)));
        }
    }
    let ok = worst <= 1e-9;
    report(3, ok, format!("max change over λ ∈ {{0.1, 1, 7.3}}: {worst:.1e}"));
    assert!(ok);
}

#[test]
fn criterion_04_zero_weight_edge_invariance() {
    let mut worst = 0.0f64;
    let mut appended = 0;
    for seed in 0..10 {
        let s = generate(&SyntheticSceneSpec {
            n: 15,
            topology: Topology::ChainWindow(3),
            outlier_edge_fraction: 0.2,
            seed: 400 + seed,
            ..Default::default()
        })
        .unwrap();
        let base = solve_default(&s.graph);
        // Connect the two chain ends with an arbitrary rotation and zero confidence.
        let n = s.graph.n_vertices();
        let mut edges = s.graph.edges().to_vec();
        edges.push(Edge::new(0, n - 1, random_rotation(seed), 0.0));
        let g = EpipolarConfidenceGraph::build(n, edges).unwrap();
        worst = worst.max(max_rotation_change(&base, &solve_default(&g)));
        appended += 1;
    }
    let ok = worst <= 1e-9;
    report(4, ok, format!("{appended} graphs, max change {worst:.1e}"));
    assert!(ok);
}

/// Sum in ascending order so trees with the same multiset of confidences
/// compare bit-for-bit regardless of edge order.
fn canonical_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.into_iter().sum()
}

fn exhaustive_max_tree(n: usize, edges: &[Edge]) -> Option<f64> {
    let m = edges.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            if p[x] == x { x } else { let r = find(p, p[x]); p[x] = r; r }
        }
        let mut acyclic = true;
        let mut weights = Vec::new();
        for (k, e) in edges.iter().enumerate() {
            if mask & (1 << k) == 0 {
                continue;
            }
            let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
            if a == b {
                acyclic = false;
                break;
            }
            parent[a] = b;
            weights.push(e.confidence);
        }
        if acyclic {
            let total = canonical_sum(weights);
            best = Some(best.map_or(total, |b: f64| b.max(total)));
        }
    }
    best
}

#[test]
fn criterion_05_mst_optimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    let mut mismatches = 0;
    while checked < 100 {
        let n = rng.random_range(2..=6);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.7) {
                    // Every other graph draws from a coarse grid to provoke ties.
                    let c = if checked % 2 == 0 {
                        rng.random_range(0.0..1.0)
                    } else {
                        rng.random_range(0..4) as f64 / 4.0
                    };
                    edges.push(Edge::new(i, j, random_rotation(rng.random()), c));
                }
            }
        }
        let g = EpipolarConfidenceGraph::build(n, edges.clone()).unwrap();
        if !g.is_connected(f64::NEG_INFINITY) {
            continue;
        }
        let tree = maximum_spanning_tree(&g).unwrap();
        let ours = canonical_sum(tree.parent_edges.iter().map(|e| e.confidence).collect());
        let oracle = exhaustive_max_tree(n, &edges).unwrap();
        if ours != oracle {
            mismatches += 1;
        }
        checked += 1;
    }
    let ok = mismatches == 0;
    report(5, ok, format!("{checked} graphs, {mismatches} mismatches"));
    assert!(ok);
}

/// Unit quaternions on the four faces of the hypercube `max|q_k| = 1` with the
/// free coordinates on a regular grid (q and −q are the same rotation, so one
/// sign of the dominant coordinate suffices).
fn quaternion_grid(per_axis: usize) -> Vec<Rotation> {
    let ticks: Vec<f64> = (0..per_axis).map(|k| -1.0 + 2.0 * k as f64 / (per_axis - 1) as f64).collect();
    let mut out = Vec::with_capacity(4 * per_axis.pow(3));
    for face in 0..4 {
        for &a in &ticks {
            for &b in &ticks {
                for &c in &ticks {
                    let mut q = [a, b, c];
                    let mut coords = [0.0; 4];
                    let mut it = q.iter_mut();
                    for (k, slot) in coords.iter_mut().enumerate() {
                        *slot = if k == face { 1.0 } else { *it.next().unwrap() };
                    }
                    let uq = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
                        coords[0], coords[1], coords[2], coords[3],
                    ));
                    out.push(Rotation::from_matrix(uq.to_rotation_matrix().into_inner()).unwrap());
                }
            }
        }
    }
    out
}

/// Coordinate descent over small rotations around `start`.
fn refine(start: Rotation, f: &dyn Fn(&Rotation) -> f64) -> f64 {
    let mut best = start;
    let mut value = f(&best);
    let mut step = 0.05;
    while step > 1e-9 {
        let mut improved = false;
        for axis in 0..3 {
            for sign in [-1.0, 1.0] {
                let mut v = Vector3::zeros();
                v[axis] = sign * step;
                let cand = best * exp_map(&v).unwrap();
                let fv = f(&cand);
                if fv < value {
                    best = cand;
                    value = fv;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    value
}

#[test]
fn criterion_06_alignment_oracle() {
    let grid = quaternion_grid(63); // 4 · 63³ ≈ 1.0e6 points
    let mut worst_vs_grid = f64::NEG_INFINITY;
    let mut worst_vs_refined = 0.0f64;
    for case in 0..20u64 {
        let gt: Vec<Rotation> = (0..5).map(|k| random_rotation(1000 * case + k)).collect();
        let gauge = random_rotation(90_000 + case);
        let est: Vec<Rotation> = gt
            .iter()
            .enumerate()
            .map(|(k, r)| *r * gauge * cara::so3::perturb(&Rotation::identity(), deg(20.0), case * 7 + k as u64).unwrap())
            .collect();
        let objective = |s: &Rotation| alignment_objective(s, &est, &gt);
        let svd = cara::eval::align(&est, &gt).unwrap();
        let svd_value = objective(&svd);
        // The objective is affine in S: constant − 2 tr(Sᵀ M).
        let m: Matrix3<f64> = est.iter().zip(&gt).map(|(r, g)| r.matrix().transpose() * g.matrix()).sum();
        let constant: f64 = 3.0 * est.len() as f64 + est.iter().zip(&gt).map(|(r, g)| (r.matrix().transpose() * g.matrix()).norm_squared()).sum::<f64>();
        let (grid_best, grid_value) = grid
            .iter()
            .map(|s| (s, constant - 2.0 * (s.matrix().transpose() * m).trace()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let refined = refine(*grid_best, &objective);
        worst_vs_grid = worst_vs_grid.max(svd_value - grid_value);
        worst_vs_refined = worst_vs_refined.max((svd_value - refined).abs());
    }
    let ok = worst_vs_grid <= 1e-4 && worst_vs_refined <= 1e-4;
    report(
        6,
        ok,
        format!("max(SVD − grid) {worst_vs_grid:.2e}, max |SVD − refined grid| {worst_vs_refined:.2e}"),
    );
    assert!(ok);
}

/// Median over seeds of the mean aligned error of the original cameras.
fn outlier_vertex_trend(k: usize, constant: bool, seeds: u64) -> f64 {
    let per_seed: Vec<f64> = (0..seeds)
        .map(|seed| {
            let base = scene(7, 5.0, 0.0, ConfidenceModel::oracle(), 700 + seed);
            let corrupted = corrupt_with_outlier_vertices(&base, k, 7_000 + seed).unwrap();
            let graph = if constant {
                with_constant_confidence(&corrupted.graph, 1.0)
            } else {
                corrupted.graph.clone()
            };
            let est = solve_default(&graph);
            error_stats(&est[..7], base.ground_truth(), &[]).unwrap().mean
        })
        .collect();
    median(&per_seed)
}

#[test]
fn criterion_07_outlier_vertex_trend() {
    let start = Instant::now();
    let seeds = 50;
    let conf: Vec<f64> = (0..=10).map(|k| outlier_vertex_trend(k, false, seeds)).collect();
    let flat: Vec<f64> = (0..=10).map(|k| outlier_vertex_trend(k, true, seeds)).collect();
    let elapsed = start.elapsed();
    let conf_ratio = conf[10] / conf[0];
    let flat_ratio = flat[10] / flat[0];
    for k in 0..=10 {
        println!(
            "    k={k:>2}: confidence {:.3}°, constant {:.3}°",
            to_deg(conf[k]),
            to_deg(flat[k])
        );
    }
    let ok = conf_ratio < 2.0 && flat_ratio > 5.0 && elapsed < Duration::from_secs(60);
    report(
        7,
        ok,
        format!("k=10/k=0 ratio: confidence {conf_ratio:.2}, constant {flat_ratio:.2}; {elapsed:?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_08_loss_function_ordering() {
    let start = Instant::now();
    let seeds = 50;
    let kinds = [KernelKind::Confidence, KernelKind::Cauchy, KernelKind::GemanMcClure, KernelKind::L2];
    let mut errors = vec![Vec::new(); kinds.len()];
    for seed in 0..seeds {
        let s = scene(20, 5.0, 0.3, ConfidenceModel::informative(), 800 + seed);
        let (_, init) = confidence_aware_initialization(&s.graph).unwrap();
        for (slot, kind) in errors.iter_mut().zip(kinds) {
            let est = irls_solve(&s.graph, &init, &RobustKernel::new(kind), &SolveConfig::default())
                .unwrap()
                .rotations;
            slot.push(error_stats(&est, s.ground_truth(), &[]).unwrap().mean);
        }
    }
    let elapsed = start.elapsed();
    let med: Vec<f64> = errors.iter().map(|e| median(e)).collect();
    let (cal, cauchy, gm, l2) = (med[0], med[1], med[2], med[3]);
    let ok = cal < cauchy && cauchy < l2 && cal < gm && gm < l2 && elapsed < Duration::from_secs(120);
    report(
        8,
        ok,
        format!(
            "median mean error: confidence {:.3}°, Cauchy {:.3}°, Geman-McClure {:.3}°, ℓ2 {:.3}°; {elapsed:?}",
            to_deg(cal),
            to_deg(cauchy),
            to_deg(gm),
            to_deg(l2)
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_09_error_decreases_with_confidence() {
    // 142 cameras, complete: 10 011 edges.
    let s = scene(142, 5.0, 0.3, ConfidenceModel::informative(), 900);
    let table = confidence_error_table(&s, 20).unwrap();
    let means: Vec<f64> = table.iter().filter_map(|b| b.mean_error).collect();
    let inversions = means.windows(2).filter(|w| w[1] > w[0]).count();
    let rendered: Vec<String> = means.iter().map(|m| format!("{:.1}", to_deg(*m))).collect();
    let ok = s.graph.edges().len() >= 10_000 && inversions <= 1;
    report(
        9,
        ok,
        format!(
            "{} edges, {} non-empty bins, {inversions} inversions; per-bin mean error (°): [{}]",
            s.graph.edges().len(),
            means.len(),
            rendered.join(", ")
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_10_statistical_descent() {
    let mut details = Vec::new();
    let mut ok = true;
    for sigma in [2.0, 5.0, 10.0] {
        let runs = 100;
        let descended = (0..runs)
            .filter(|&seed| {
                let s = scene(7, sigma, 0.0, ConfidenceModel::informative(), 1000 + seed);
                let (_, init) = confidence_aware_initialization(&s.graph).unwrap();
                let before = cal_loss(&s.graph, &init).unwrap();
                let report = cao_solve(&s.graph, &init, &SolveConfig::default()).unwrap();
                cal_loss(&s.graph, &report.rotations).unwrap() <= before
            })
            .count();
        ok &= descended * 100 >= 95 * runs as usize;
        details.push(format!("σ={sigma}°: {descended}/{runs}"));
    }
    report(10, ok, format!("final ≤ initial CAL in {}", details.join(", ")));
    assert!(ok);
}

#[test]
fn criterion_11_streaming_scale() {
    let s = generate(&SyntheticSceneSpec {
        n: 2000,
        topology: Topology::ChainWindow(10),
        seed: 1100,
        ..Default::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.txt");
    write_graph(&s.graph, &path).unwrap();

    let start = Instant::now();
    let file = StreamingGraphFile::open(&path).unwrap();
    let (_, init) = confidence_aware_initialization(&file).unwrap();
    let streamed = cao_solve(&file, &init, &SolveConfig::default()).unwrap();
    let elapsed = start.elapsed();

    let in_memory = solve_default(&s.graph);
    let diff = max_rotation_change(&streamed.rotations, &in_memory);
    let err = error_stats(&streamed.rotations, s.ground_truth(), &[]).unwrap();
    let ok = elapsed < Duration::from_secs(10) && diff <= 1e-12;
    report(
        11,
        ok,
        format!(
            "N=2000, {} edges streamed in {elapsed:?}; max diff vs in-memory {diff:.1e}; mean error {:.2}°",
            file.edge_count(),
            to_deg(mean(&err.per_camera_errors))
        ),
    );
    assert!(ok);
}
