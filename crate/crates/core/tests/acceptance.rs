//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Tolerances and time budgets are pinned below.

mod common;

use std::time::{Duration, Instant};

use cellgraph::baselines::{
    predict_tabular, train_gradient_boosting, train_random_forest, BoostConfig, ForestConfig, TabularModel,
};
use cellgraph::dimred::{knn_purity, tsne, umap, Method};
use cellgraph::features::radiomics::{
    glcm, glcm_counts, glcm_features, glrlm, glrlm_features, QuantizedRegion, DEFAULT_OFFSETS,
};
use cellgraph::features::FeatureKind;
use cellgraph::grand::{apply_drop_node, drop_node, drop_node_mask, propagate, MlpParams};
use cellgraph::graph::{knn_feature_graph, normalize_adjacency, CellGraph, Edge, Metric};
use cellgraph::harness::{run_experiment, stratified_split, write_experiment, ExperimentConfig, ModelKind};
use cellgraph::rng;
use cellgraph::synth::SynthConfig;
use common::*;
use ndarray::Array2;
use rand::Rng;

const GLCM_FEATURE_RTOL: f64 = 1e-12;
const GRADIENT_RTOL: f64 = 1e-5;
const PROPAGATION_ATOL: f64 = 1e-10;
const EDGE_NODES: usize = 40_500;
const EDGE_TARGET: usize = 202_500;
const F1_MIN: f64 = 0.85;
const DROPNODE_DRAWS: usize = 10_000;
const DROPNODE_SE: f64 = 3.0;
const PURITY_MIN: f64 = 0.9;
const PERPLEXITY_TOL: f64 = 1e-3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn radiomics_oracles() -> Outcome {
    let mut g = rng::from_seed(101);
    let mut matrix_mismatch = 0;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let levels = g.random_range(2..=16);
        let rows = random_region(&mut g, 8, levels, 0.8);
        let q = QuantizedRegion::from_rows(levels, &rows).unwrap();
        let counts = glcm_oracle(&rows, levels, &DEFAULT_OFFSETS, true);
        if glcm_counts(&q, &DEFAULT_OFFSETS, true) != counts {
            matrix_mismatch += 1;
        }
        let runs = glrlm_oracle(&rows, &DEFAULT_OFFSETS);
        let m = glrlm(&q, &DEFAULT_OFFSETS);
        let mut expected = vec![0u64; m.r.len()];
        for &(gray, len) in &runs {
            expected[gray as usize * m.max_run + len - 1] += 1;
        }
        if m.r != expected {
            matrix_mismatch += 1;
        }
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
        if let Ok(mat) = glcm(&q, &DEFAULT_OFFSETS, true) {
            for (a, b) in glcm_features(&mat).to_vec().iter().zip(glcm_features_oracle(&counts, levels)) {
                worst = worst.max(rel(*a, b));
            }
        }
        let got = glrlm_features(&m, q.n_pixels()).unwrap().to_vec();
        for (a, b) in got.iter().zip(glrlm_features_oracle(&runs, q.n_pixels())) {
            worst = worst.max(rel(*a, b));
        }
    }
    outcome(
        matrix_mismatch == 0 && worst <= GLCM_FEATURE_RTOL,
        format!("200 regions, {matrix_mismatch} matrix mismatches, max feature rel err {worst:.1e} (<= {GLCM_FEATURE_RTOL:.0e})"),
    )
}

fn random_graph(n: usize, n_edges: usize, g: &mut rng::Rng) -> CellGraph {
    let mut edges = Vec::new();
    while edges.len() < n_edges {
        let (a, b) = (g.random_range(0..n), g.random_range(0..n));
        if a != b {
            edges.push(Edge { src: a, dst: b, weight: 1.0 });
        }
    }
    CellGraph::new(n, edges).unwrap()
}

fn gradient_correctness() -> Outcome {
    let mut g = rng::from_seed(202);
    let graph = random_graph(10, 18, &mut g);
    let adj = normalize_adjacency(&graph);
    let x = Array2::from_shape_fn((10, 3), |_| g.random_range(-1.0..1.0));
    let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
    // DropNode masks drawn once; the loss is then a deterministic function.
    let inputs: Vec<Array2<f64>> = (0..4)
        .map(|_| {
            let keep = drop_node_mask(10, 0.5, &mut g);
            propagate(&adj, &apply_drop_node(&x, &keep, 0.5), 4)
        })
        .collect();
    let params = MlpParams::glorot(3, 8, 2, &mut g);
    let err = gradient_check(&params, &inputs, &labels, &[0, 1, 2, 3, 4, 5], 1.0, 0.5, 1e-5, 1e-8);
    outcome(err < GRADIENT_RTOL, format!("max rel err {err:.2e} (< {GRADIENT_RTOL:.0e})"))
}

fn propagation_oracle() -> Outcome {
    let mut g = rng::from_seed(303);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n_edges = g.random_range(10..90);
        let graph = random_graph(30, n_edges, &mut g);
        let adj = normalize_adjacency(&graph);
        let x = Array2::from_shape_fn((30, 4), |_| g.random_range(-1.0..1.0));
        let a = propagate(&adj, &x, 8);
        let b = dense_propagate(&adj.to_dense(), &x, 8);
        worst = worst.max((&a - &b).mapv(f64::abs).fold(0.0, |m: f64, &v| m.max(v)));
    }
    outcome(worst <= PROPAGATION_ATOL, format!("20 graphs, max abs diff {worst:.1e} (<= {PROPAGATION_ATOL:.0e})"))
}

fn edge_budget() -> Outcome {
    let mut g = rng::from_seed(404);
    let x = Array2::from_shape_fn((EDGE_NODES, 2), |_| g.random_range(0.0..1000.0));
    let graph = knn_feature_graph(x.view(), 5, Metric::Euclidean).unwrap();
    let degrees_ok = graph.out_degrees().iter().all(|&d| d == 5);
    outcome(
        graph.edges.len() == EDGE_TARGET && degrees_ok,
        format!("{} nodes, k=5 -> {} directed edges (want {EDGE_TARGET})", graph.n_nodes, graph.edges.len()),
    )
}

fn end_to_end() -> Outcome {
    let base = ExperimentConfig { synth: Some(SynthConfig::default()), seed: 0, ..Default::default() };
    let radiomics = ExperimentConfig {
        feature_types: vec![FeatureKind::Radiomics],
        reductions: vec![Method::Umap],
        models: vec![ModelKind::GrandFeatureGraph, ModelKind::GrandSpatialGraph],
        ..base.clone()
    };
    let expression = ExperimentConfig {
        feature_types: vec![FeatureKind::Expression],
        reductions: vec![Method::None],
        models: vec![ModelKind::RandomForest],
        ..base
    };
    let mut cells = Vec::new();
    for cfg in [radiomics, expression] {
        match run_experiment(&cfg) {
            Ok(out) => cells.extend(out.report.cells),
            Err(e) => return outcome(false, format!("experiment failed: {e}")),
        }
    }
    let mut pass = true;
    let parts: Vec<String> = cells
        .iter()
        .map(|c| {
            let f1 = c.metrics.as_ref().map_or(f64::NAN, |m| m.f1);
            pass &= f1 >= F1_MIN;
            format!("{} F1 {f1:.4}", c.name())
        })
        .collect();
    outcome(pass, format!("{} (>= {F1_MIN})", parts.join(", ")))
}

fn dropnode_expectation() -> Outcome {
    let mut g = rng::from_seed(606);
    let x = Array2::from_shape_fn((6, 4), |_| g.random_range(-3.0..3.0));
    let rate = 0.5;
    let mut sum = Array2::<f64>::zeros(x.dim());
    for _ in 0..DROPNODE_DRAWS {
        sum += &drop_node(&x, rate, &mut g);
    }
    let mean = sum / DROPNODE_DRAWS as f64;
    // Each entry is x/(1-δ) with probability 1-δ: sd = |x|·sqrt(δ/(1-δ)).
    let mut worst = 0.0f64;
    for (m, v) in mean.iter().zip(x.iter()) {
        let se = v.abs() * (rate / (1.0 - rate)).sqrt() / (DROPNODE_DRAWS as f64).sqrt();
        if se > 0.0 {
            worst = worst.max((m - v).abs() / se);
        }
    }
    outcome(worst <= DROPNODE_SE, format!("{DROPNODE_DRAWS} draws, max |mean - X| = {worst:.2} SE (<= {DROPNODE_SE})"))
}

fn reduction_quality() -> Outcome {
    let (x, labels) = gaussian_clusters(3, 20, 50, 10.0, 707);
    let t = match tsne(x.view(), 2, 10.0, 1000, 1) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("tsne failed: {e}")),
    };
    let u = match umap(x.view(), 2, 15, 0.1, 200, 2) {
        Ok(u) => u,
        Err(e) => return outcome(false, format!("umap failed: {e}")),
    };
    let pt = knn_purity(t.embedding.data.view(), &labels, 10);
    let pu = knn_purity(u.data.view(), &labels, 10);
    let perp_err = t.perplexities.iter().map(|p| (p - 10.0).abs()).fold(0.0, f64::max);
    outcome(
        pt >= PURITY_MIN && pu >= PURITY_MIN && perp_err <= PERPLEXITY_TOL,
        format!("10-NN purity tSNE {pt:.3}, UMAP {pu:.3} (>= {PURITY_MIN}); max perplexity err {perp_err:.1e} (<= {PERPLEXITY_TOL:.0e})"),
    )
}

fn determinism() -> Outcome {
    let cfg = tiny_experiment(808);
    let mut reports = Vec::new();
    for threads in [1, 1, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let written = pool.install(|| run_experiment(&cfg)).and_then(|out| write_experiment(&out, dir.path()));
        if let Err(e) = written {
            return outcome(false, format!("experiment failed: {e}"));
        }
        reports.push(std::fs::read(dir.path().join("report.json")).unwrap());
    }
    let same = reports.windows(2).all(|w| w[0] == w[1]);
    outcome(
        same,
        format!("report.json identical across runs with 1, 1 and 4 threads: {same} ({} bytes)", reports[0].len()),
    )
}

fn splits() -> Outcome {
    let one_class = vec![Some(0); 40];
    let s = stratified_split(&one_class, [0.7, 0.1, 0.2], 9).unwrap();
    let sizes_one = s.sizes();
    let two: Vec<Option<usize>> = (0..20).map(|i| Some(i % 2)).collect();
    let s2 = stratified_split(&two, [0.7, 0.1, 0.2], 9).unwrap();
    let per_class: Vec<(usize, usize, usize)> = (0..2)
        .map(|c| {
            let count = |m: &Vec<bool>| (0..20).filter(|&i| i % 2 == c && m[i]).count();
            (count(&s2.train), count(&s2.val), count(&s2.test))
        })
        .collect();
    // Random labelings: train/val counts follow the floor rule per class.
    let mut g = rng::from_seed(909);
    let mut balanced = true;
    for trial in 0..200 {
        let n = g.random_range(5..400);
        let labels: Vec<Option<usize>> = (0..n).map(|_| g.random_bool(0.9).then(|| g.random_range(0..2))).collect();
        let Ok(s) = stratified_split(&labels, [0.7, 0.1, 0.2], trial) else { continue };
        for c in 0..2 {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == Some(c)).collect();
            let k = members.len() as f64;
            let count = |m: &Vec<bool>| members.iter().filter(|&&i| m[i]).count() as f64;
            balanced &= (count(&s.train) - 0.7 * k).abs() < 1.0 && (count(&s.val) - 0.1 * k).abs() < 1.0;
            balanced &= count(&s.train) + count(&s.val) + count(&s.test) == k;
        }
    }
    let pass = sizes_one == (28, 4, 8) && per_class.iter().all(|&c| c == (7, 1, 2)) && balanced;
    outcome(
        pass,
        format!("40 one-class -> {sizes_one:?} (want (28, 4, 8)); 2x10 per class {per_class:?} (want 7/1/2); 200 random labelings per-class within 1 item: {balanced}"),
    )
}

fn baselines() -> Outcome {
    let mut g = rng::from_seed(1010);
    let n = 200;
    let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
    // Class decided by the sign of the first feature, with a margin of 0.5.
    let x = Array2::from_shape_fn((n, 5), |(i, j)| {
        let v: f64 = g.random_range(0.5..3.0);
        if j == 0 {
            if y[i] == 1 {
                v
            } else {
                -v
            }
        } else {
            g.random_range(-3.0..3.0)
        }
    });
    let accuracy = |m: &TabularModel| {
        let p = predict_tabular(m, x.view()).unwrap();
        (0..n).filter(|&i| usize::from(p[[i, 1]] > 0.5) == y[i]).count() as f64 / n as f64
    };
    let forest = train_random_forest(x.view(), &y, &ForestConfig::default()).unwrap();
    let boost = train_gradient_boosting(x.view(), &y, &BoostConfig::default()).unwrap();
    let decreasing = boost.loss_history.windows(2).all(|w| w[1] < w[0]);
    let (first, last) = (boost.loss_history[0], *boost.loss_history.last().unwrap());
    let (fa, ba) = (accuracy(&TabularModel::Forest(forest)), accuracy(&TabularModel::Boosting(boost)));
    outcome(
        fa == 1.0 && ba == 1.0 && decreasing,
        format!("accuracy RF {fa}, boosting {ba} (want 1.0); log-loss {first:.4} -> {last:.2e}, strictly decreasing: {decreasing}"),
    )
}

fn main() {
    type Check = fn() -> Outcome;
    let checks: [(&str, Check, Option<Duration>); 10] = [
        ("radiomics oracle equivalence", radiomics_oracles, Some(Duration::from_secs(10))),
        ("GRAND gradient correctness", gradient_correctness, Some(Duration::from_secs(5))),
        ("propagation oracle", propagation_oracle, None),
        ("kNN edge budget", edge_budget, Some(Duration::from_secs(120))),
        ("end-to-end learning", end_to_end, Some(Duration::from_secs(300))),
        ("DropNode expectation", dropnode_expectation, None),
        ("dimensionality-reduction quality", reduction_quality, None),
        ("determinism", determinism, None),
        ("split sizes", splits, None),
        ("baseline sanity", baselines, None),
    ];
    let mut failures = 0;
    for (i, (name, check, budget)) in checks.into_iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed < b);
        let pass = result.pass && in_time;
        if !pass {
            failures += 1;
        }
        let limit = budget.map_or(String::new(), |b| format!(", budget {}s", b.as_secs()));
        println!(
            "{} {:>2}. {name}: {} [{:.2}s{limit}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failures} failed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
