use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::search::{hyperparameter_search, Assignment, Param, SearchResult, SearchSpace};
use super::split::{case_split, stratified_split, SplitLevel, SplitMasks};
use super::Standardizer;
use crate::baselines::{
    predict_tabular, train_gradient_boosting, train_random_forest, BoostConfig, ForestConfig, TabularModel,
};
use crate::dataset::{load_dataset, CellTable, Dataset, Diagnosis};
use crate::dimred::{reduce, Method, ReduceConfig};
use crate::features::{extract_sample, Aggregator, FeatureKind, RadiomicsConfig};
use crate::grand::{predict_grand, train_grand, GrandConfig};
use crate::graph::{knn_feature_graph, normalize_adjacency, spatial_knn_graph, Metric};
use crate::io_util::{fmt_f64, write_atomic};
use crate::metrics::{compute_metrics, Confusion, Metrics};
use crate::synth::{generate_synthetic_dataset, SynthConfig};
use crate::{par, rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    GrandFeatureGraph,
    GrandSpatialGraph,
    RandomForest,
    GradientBoosting,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::GrandFeatureGraph,
        ModelKind::GrandSpatialGraph,
        ModelKind::RandomForest,
        ModelKind::GradientBoosting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::GrandFeatureGraph => "grand_feature_graph",
            ModelKind::GrandSpatialGraph => "grand_spatial_graph",
            ModelKind::RandomForest => "random_forest",
            ModelKind::GradientBoosting => "gradient_boosting",
        }
    }
}

/// Where reduced features are used: to build the feature graph, as node
/// features (including the tabular baselines' inputs), or both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReduceTarget {
    #[default]
    Both,
    Graph,
    Features,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSettings {
    pub budget: usize,
    pub grand: SearchSpace,
    pub forest: SearchSpace,
    pub boost: SearchSpace,
}

impl Default for SearchSettings {
    fn default() -> Self {
        let space = |items: Vec<(&str, Param)>| items.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        Self {
            budget: 20,
            grand: space(vec![
                ("learning_rate", Param::LogUniform { lo: 1e-3, hi: 5e-2 }),
                ("drop_rate", Param::Uniform { lo: 0.1, hi: 0.7 }),
                ("consistency_weight", Param::Uniform { lo: 0.0, hi: 2.0 }),
                ("temperature", Param::Uniform { lo: 0.1, hi: 1.0 }),
                ("prop_order", Param::Int { lo: 2, hi: 10 }),
                ("input_dropout", Param::Uniform { lo: 0.0, hi: 0.7 }),
            ]),
            forest: space(vec![
                ("n_trees", Param::Int { lo: 50, hi: 200 }),
                ("max_depth", Param::Int { lo: 3, hi: 12 }),
                ("min_leaf", Param::Int { lo: 1, hi: 8 }),
            ]),
            boost: space(vec![
                ("n_rounds", Param::Int { lo: 50, hi: 300 }),
                ("max_depth", Param::Int { lo: 2, hi: 5 }),
                ("learning_rate", Param::LogUniform { lo: 0.02, hi: 0.3 }),
            ]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset directory or manifest. Exactly one of `dataset` and `synth`.
    pub dataset: Option<PathBuf>,
    /// Generate the dataset in memory instead of loading it.
    pub synth: Option<SynthConfig>,
    pub feature_types: Vec<FeatureKind>,
    pub reductions: Vec<Method>,
    pub models: Vec<ModelKind>,
    pub aggregator: Aggregator,
    pub radiomics: RadiomicsConfig,
    /// Reduction settings; `method` is ignored and `dim` applies to PCA and UMAP.
    /// Every reduction is capped at the feature count.
    pub reduction: ReduceConfig,
    pub tsne_dim: usize,
    pub reduce_target: ReduceTarget,
    pub graph_k: usize,
    pub metric: Metric,
    pub split_ratios: [f64; 3],
    pub split_level: SplitLevel,
    pub grand: GrandConfig,
    pub forest: ForestConfig,
    pub boost: BoostConfig,
    /// Per-cell hyperparameter search on validation F1; off when absent.
    pub search: Option<SearchSettings>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            synth: None,
            feature_types: FeatureKind::ALL.to_vec(),
            reductions: Method::ALL.to_vec(),
            models: ModelKind::ALL.to_vec(),
            aggregator: Aggregator::Mean,
            radiomics: RadiomicsConfig::default(),
            reduction: ReduceConfig::default(),
            tsne_dim: 2,
            reduce_target: ReduceTarget::Both,
            graph_k: crate::graph::DEFAULT_K,
            metric: Metric::Euclidean,
            split_ratios: [0.7, 0.1, 0.2],
            split_level: SplitLevel::Cell,
            grand: GrandConfig::default(),
            forest: ForestConfig::default(),
            boost: BoostConfig::default(),
            search: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDetails {
    pub n_features: usize,
    pub graph_edges: Option<usize>,
    pub best_epoch: Option<usize>,
    pub search: Option<SearchResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub feature_type: FeatureKind,
    pub reduction: Method,
    pub model: ModelKind,
    pub status: CellStatus,
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
    pub details: Option<CellDetails>,
}

impl CellReport {
    pub fn name(&self) -> String {
        cell_name(self.feature_type, self.reduction, self.model)
    }
}

fn cell_name(f: FeatureKind, r: Method, m: ModelKind) -> String {
    format!("{}__{}__{}", f.name(), r.name(), m.name())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub config: ExperimentConfig,
    pub n_cells: usize,
    pub n_labeled: usize,
    /// Train, validation and test sizes.
    pub split_sizes: [usize; 3],
    /// Radiomic extraction warnings per feature type.
    pub feature_warnings: BTreeMap<String, usize>,
    pub cells: Vec<CellReport>,
}

/// Named files for one grid cell.
pub type CellFiles = Vec<(String, Vec<u8>)>;

/// Everything an experiment produces. Timings are kept apart from the report
/// so that the report is reproducible byte for byte.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    /// Files per grid cell, keyed by cell name.
    pub artifacts: Vec<(String, CellFiles)>,
    /// Wall-clock seconds per stage.
    pub timings: Vec<(String, f64)>,
}

fn dedup_sorted<T: Ord + Copy>(v: &[T]) -> Vec<T> {
    let mut v = v.to_vec();
    v.sort();
    v.dedup();
    v
}

fn load_source(cfg: &ExperimentConfig) -> Result<Dataset> {
    match (&cfg.dataset, &cfg.synth) {
        (Some(path), None) => load_dataset(path),
        (None, Some(s)) => Ok(generate_synthetic_dataset(s)?.dataset),
        _ => Err(Error::invalid("experiment config needs exactly one of `dataset` and `synth`")),
    }
}

fn extract_all(ds: &Dataset, kind: FeatureKind, cfg: &ExperimentConfig) -> Result<(CellTable, usize)> {
    let parts = par::map_slice(&ds.samples, |s| extract_sample(s, kind, cfg.aggregator, &cfg.radiomics))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let warnings = parts.iter().map(|p| p.1.len()).sum();
    let table = CellTable::concat(parts.iter().map(|p| &p.0))?;
    Ok((table, warnings))
}

fn rows_of(x: ArrayView2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

struct Context<'a> {
    labels: &'a [Option<usize>],
    split: &'a SplitMasks,
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
    centroids: Vec<(f64, f64)>,
    sample_ids: Vec<&'a str>,
    cell_ids: Vec<u32>,
}

impl Context<'_> {
    /// Nodes used to score configurations: validation, or training when the
    /// validation split is empty.
    fn selection(&self) -> &[usize] {
        if self.val.is_empty() {
            &self.train
        } else {
            &self.val
        }
    }

    fn truth(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.labels[i].expect("masked nodes are labeled")).collect()
    }

    fn f1_on(&self, idx: &[usize], prob: &[f64]) -> f64 {
        let pred: Vec<usize> = idx.iter().map(|&i| usize::from(prob[i] > 0.5)).collect();
        Confusion::from_predictions(&self.truth(idx), &pred).f1()
    }

    fn predictions_csv(&self, prob: &[f64]) -> Vec<u8> {
        let mut out = String::from("cell_id,sample_id,split,label,prob_tumor,predicted\n");
        for i in 0..prob.len() {
            let label = self.labels[i].map_or("-1".to_string(), |l| l.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.cell_ids[i],
                self.sample_ids[i],
                self.split.subset(i),
                label,
                fmt_f64(prob[i]),
                usize::from(prob[i] > 0.5)
            ));
        }
        out.into_bytes()
    }
}

struct CellOutcome {
    metrics: Metrics,
    details: CellDetails,
    artifacts: Vec<(String, Vec<u8>)>,
}

fn set_usize(target: &mut usize, v: f64) {
    *target = v.round().max(0.0) as usize;
}

fn apply_grand(base: &GrandConfig, a: &Assignment) -> Result<GrandConfig> {
    let mut c = base.clone();
    for (k, &v) in a {
        match k.as_str() {
            "drop_rate" => c.drop_rate = v,
            "prop_order" => set_usize(&mut c.prop_order, v),
            "n_augmentations" => set_usize(&mut c.n_augmentations, v),
            "temperature" => c.temperature = v,
            "consistency_weight" => c.consistency_weight = v,
            "hidden_dim" => set_usize(&mut c.hidden_dim, v),
            "input_dropout" => c.input_dropout = v,
            "learning_rate" => c.learning_rate = v,
            "weight_decay" => c.weight_decay = v,
            "max_epochs" => set_usize(&mut c.max_epochs, v),
            "patience" => set_usize(&mut c.patience, v),
            _ => return Err(Error::invalid(format!("unknown grand search parameter {k}"))),
        }
    }
    c.check()?;
    Ok(c)
}

fn apply_forest(base: &ForestConfig, a: &Assignment) -> Result<ForestConfig> {
    let mut c = base.clone();
    for (k, &v) in a {
        match k.as_str() {
            "n_trees" => set_usize(&mut c.n_trees, v),
            "max_depth" => set_usize(&mut c.max_depth, v),
            "min_leaf" => set_usize(&mut c.min_leaf, v),
            "features_per_split" => c.features_per_split = Some(v.round().max(1.0) as usize),
            _ => return Err(Error::invalid(format!("unknown forest search parameter {k}"))),
        }
    }
    Ok(c)
}

fn apply_boost(base: &BoostConfig, a: &Assignment) -> Result<BoostConfig> {
    let mut c = base.clone();
    for (k, &v) in a {
        match k.as_str() {
            "n_rounds" => set_usize(&mut c.n_rounds, v),
            "max_depth" => set_usize(&mut c.max_depth, v),
            "min_leaf" => set_usize(&mut c.min_leaf, v),
            "learning_rate" => c.learning_rate = v,
            _ => return Err(Error::invalid(format!("unknown boosting search parameter {k}"))),
        }
    }
    Ok(c)
}

/// Runs an optional search and returns the chosen assignment.
fn choose<F>(
    space: Option<(&SearchSpace, usize)>,
    seed: u64,
    objective: F,
) -> Result<(Assignment, Option<SearchResult>)>
where
    F: FnMut(&Assignment) -> Result<f64>,
{
    match space {
        None => Ok((Assignment::new(), None)),
        Some((space, budget)) => {
            let r = hyperparameter_search(space, objective, budget, seed)?;
            Ok((r.best_config().clone(), Some(r)))
        }
    }
}

fn run_cell(
    ctx: &Context,
    graph_x: &Array2<f64>,
    node_x: &Array2<f64>,
    model: ModelKind,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<CellOutcome> {
    if ctx.test.is_empty() {
        return Err(Error::invalid("test split is empty"));
    }
    let search_seed = rng::derive_seed(seed, 1);
    let budget = cfg.search.as_ref().map(|s| s.budget).unwrap_or(0);
    let mut artifacts = Vec::new();
    let (prob, details) = match model {
        ModelKind::GrandFeatureGraph | ModelKind::GrandSpatialGraph => {
            let graph = if model == ModelKind::GrandFeatureGraph {
                knn_feature_graph(graph_x.view(), cfg.graph_k, cfg.metric)?
            } else {
                spatial_knn_graph(&ctx.centroids, &ctx.sample_ids, cfg.graph_k)?.0
            };
            let adj = normalize_adjacency(&graph);
            let labels: Vec<usize> = ctx.labels.iter().map(|l| l.unwrap_or(0)).collect();
            let base = GrandConfig { seed, ..cfg.grand.clone() };
            let fit = |c: &GrandConfig| -> Result<Vec<f64>> {
                let m = train_grand(&adj, node_x, &labels, &ctx.train, &ctx.val, c)?;
                let p = predict_grand(&m, &adj, node_x)?;
                Ok(p.probabilities.column(1).to_vec())
            };
            let space = cfg.search.as_ref().map(|s| (&s.grand, budget));
            let (best, search) = choose(space, search_seed, |a| {
                let prob = fit(&apply_grand(&base, a)?)?;
                Ok(ctx.f1_on(ctx.selection(), &prob))
            })?;
            let final_cfg = apply_grand(&base, &best)?;
            let m = train_grand(&adj, node_x, &labels, &ctx.train, &ctx.val, &final_cfg)?;
            let p = predict_grand(&m, &adj, node_x)?;
            artifacts.push(("history.csv".to_string(), m.history_csv().into_bytes()));
            artifacts.push(("model.grnd".to_string(), m.to_bytes()));
            let details = CellDetails {
                n_features: node_x.ncols(),
                graph_edges: Some(graph.edges.len()),
                best_epoch: Some(m.best_epoch),
                search,
            };
            (p.probabilities.column(1).to_vec(), details)
        }
        ModelKind::RandomForest | ModelKind::GradientBoosting => {
            let x_train = rows_of(node_x.view(), &ctx.train);
            let y_train = ctx.truth(&ctx.train);
            let fit = |a: &Assignment| -> Result<TabularModel> {
                Ok(if model == ModelKind::RandomForest {
                    let c = apply_forest(&ForestConfig { seed, ..cfg.forest.clone() }, a)?;
                    TabularModel::Forest(train_random_forest(x_train.view(), &y_train, &c)?)
                } else {
                    let c = apply_boost(&BoostConfig { seed, ..cfg.boost.clone() }, a)?;
                    TabularModel::Boosting(train_gradient_boosting(x_train.view(), &y_train, &c)?)
                })
            };
            let space = cfg
                .search
                .as_ref()
                .map(|s| (if model == ModelKind::RandomForest { &s.forest } else { &s.boost }, budget));
            let (best, search) = choose(space, search_seed, |a| {
                let m = fit(a)?;
                let p = predict_tabular(&m, node_x.view())?;
                Ok(ctx.f1_on(ctx.selection(), &p.column(1).to_vec()))
            })?;
            let m = fit(&best)?;
            let p = predict_tabular(&m, node_x.view())?;
            artifacts.push(("model.bin".to_string(), m.to_bytes()));
            let details = CellDetails { n_features: node_x.ncols(), graph_edges: None, best_epoch: None, search };
            (p.column(1).to_vec(), details)
        }
    };
    let y_test = ctx.truth(&ctx.test);
    let p_test: Vec<f64> = ctx.test.iter().map(|&i| prob[i]).collect();
    let metrics = compute_metrics(&y_test, &p_test, 0.5);
    artifacts.push(("predictions.csv".to_string(), ctx.predictions_csv(&prob)));
    Ok(CellOutcome { metrics, details, artifacts })
}

/// Runs every requested (feature type, reduction, model) cell. All sub-seeds
/// derive from `cfg.seed` and each cell's position in the full grid, so a
/// restricted grid reproduces the same numbers as the full one.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.graph_k == 0 {
        return Err(Error::invalid("graph_k must be at least 1"));
    }
    let mut timings = Vec::new();
    let t0 = Instant::now();
    let ds = load_source(cfg)?;
    timings.push(("load".to_string(), t0.elapsed().as_secs_f64()));

    let feature_types = dedup_sorted(&cfg.feature_types);
    let reductions = dedup_sorted(&cfg.reductions);
    let models = dedup_sorted(&cfg.models);
    if feature_types.is_empty() || reductions.is_empty() || models.is_empty() {
        return Err(Error::invalid("experiment grid is empty"));
    }

    let mut tables = Vec::new();
    let mut feature_warnings = BTreeMap::new();
    for &kind in &feature_types {
        let t = Instant::now();
        let (table, warnings) = extract_all(&ds, kind, cfg)?;
        timings.push((format!("extract_{}", kind.name()), t.elapsed().as_secs_f64()));
        feature_warnings.insert(kind.name().to_string(), warnings);
        tables.push(table);
    }
    let keys = |t: &CellTable| t.rows.iter().map(|r| (r.sample_id.clone(), r.cell_id)).collect::<Vec<_>>();
    if tables.iter().any(|t| keys(t) != keys(&tables[0])) {
        return Err(Error::invalid("feature tables cover different cells"));
    }
    let base = &tables[0];
    let labels: Vec<Option<usize>> = base.labels().iter().map(|l| l.class_index()).collect();
    let split_seed = rng::derive_seed(cfg.seed, 1);
    let split = match cfg.split_level {
        SplitLevel::Cell => stratified_split(&labels, cfg.split_ratios, split_seed)?,
        SplitLevel::Case => {
            let index: BTreeMap<&str, usize> = ds.samples.iter().enumerate().map(|(i, s)| (s.sample_id(), i)).collect();
            let case_of: Vec<usize> = base.rows.iter().map(|r| index[r.sample_id.as_str()]).collect();
            let case_class: Vec<usize> =
                ds.samples.iter().map(|s| usize::from(s.diagnosis == Diagnosis::Melanoma)).collect();
            case_split(&labels, &case_of, &case_class, cfg.split_ratios, split_seed)?
        }
    };
    let ctx = Context {
        labels: &labels,
        split: &split,
        train: split.train_indices(),
        val: split.val_indices(),
        test: split.test_indices(),
        centroids: base.centroids(),
        sample_ids: base.sample_ids(),
        cell_ids: base.rows.iter().map(|r| r.cell_id).collect(),
    };
    if ctx.train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }

    // Standardized features and their reductions, computed once per pair.
    type Inputs = std::result::Result<(Array2<f64>, Array2<f64>), String>;
    let mut inputs: BTreeMap<(FeatureKind, Method), Inputs> = BTreeMap::new();
    for (table, &kind) in tables.iter().zip(&feature_types) {
        let raw = table.matrix();
        let z = Standardizer::fit(raw.view(), &ctx.train).transform(raw.view());
        for &method in &reductions {
            let t = Instant::now();
            let fi = FeatureKind::ALL.iter().position(|&k| k == kind).unwrap();
            let ri = Method::ALL.iter().position(|&m| m == method).unwrap();
            let rc = ReduceConfig {
                method,
                // Never embed into more dimensions than the features have.
                dim: if method == Method::Tsne { cfg.tsne_dim } else { cfg.reduction.dim }.min(z.ncols()),
                seed: rng::derive_seed(cfg.seed, 100 + (fi * Method::ALL.len() + ri) as u64),
                ..cfg.reduction.clone()
            };
            let entry = if method == Method::None {
                Ok((z.clone(), z.clone()))
            } else {
                reduce(z.view(), &rc)
                    .map(|e| {
                        let reduced = Standardizer::fit(e.data.view(), &ctx.train).transform(e.data.view());
                        match cfg.reduce_target {
                            ReduceTarget::Both => (reduced.clone(), reduced),
                            ReduceTarget::Graph => (reduced, z.clone()),
                            ReduceTarget::Features => (z.clone(), reduced),
                        }
                    })
                    .map_err(|e| format!("reduction failed: {e}"))
            };
            timings.push((format!("reduce_{}_{}", kind.name(), method.name()), t.elapsed().as_secs_f64()));
            inputs.insert((kind, method), entry);
        }
    }

    let mut grid = Vec::new();
    for &f in &feature_types {
        for &r in &reductions {
            for &m in &models {
                let fi = FeatureKind::ALL.iter().position(|&k| k == f).unwrap();
                let ri = Method::ALL.iter().position(|&k| k == r).unwrap();
                let mi = ModelKind::ALL.iter().position(|&k| k == m).unwrap();
                let index = (fi * Method::ALL.len() + ri) * ModelKind::ALL.len() + mi;
                grid.push((f, r, m, rng::derive_seed(cfg.seed, 1000 + index as u64)));
            }
        }
    }
    let results = par::map_slice(&grid, |&(f, r, m, seed)| {
        let t = Instant::now();
        let out = match &inputs[&(f, r)] {
            Ok((gx, nx)) => run_cell(&ctx, gx, nx, m, cfg, seed).map_err(|e| e.to_string()),
            Err(e) => Err(e.clone()),
        };
        (out, t.elapsed().as_secs_f64())
    });

    let mut cells = Vec::new();
    let mut artifacts = Vec::new();
    for (&(f, r, m, _), (out, secs)) in grid.iter().zip(results) {
        let name = cell_name(f, r, m);
        timings.push((name.clone(), secs));
        let report = match out {
            Ok(o) => {
                artifacts.push((name, o.artifacts));
                CellReport {
                    feature_type: f,
                    reduction: r,
                    model: m,
                    status: CellStatus::Ok,
                    metrics: Some(o.metrics),
                    error: None,
                    details: Some(o.details),
                }
            }
            Err(e) => {
                artifacts.push((name, vec![("error.txt".to_string(), format!("{e}\n").into_bytes())]));
                CellReport {
                    feature_type: f,
                    reduction: r,
                    model: m,
                    status: CellStatus::Failed,
                    metrics: None,
                    error: Some(e),
                    details: None,
                }
            }
        };
        cells.push(report);
    }
    let (a, b, c) = split.sizes();
    let report = ExperimentReport {
        seed: cfg.seed,
        config: cfg.clone(),
        n_cells: labels.len(),
        n_labeled: labels.iter().filter(|l| l.is_some()).count(),
        split_sizes: [a, b, c],
        feature_warnings,
        cells,
    };
    Ok(ExperimentOutput { report, artifacts, timings })
}

/// One row per (model, reduction); metric columns per feature type. Failed
/// or missing cells leave their columns empty.
pub fn table1_csv(report: &ExperimentReport) -> String {
    const METRICS: [&str; 5] = ["accuracy", "precision", "recall", "f1", "roc_auc"];
    let features = dedup_sorted(&report.cells.iter().map(|c| c.feature_type).collect::<Vec<_>>());
    let mut rows: Vec<(ModelKind, Method)> = report.cells.iter().map(|c| (c.model, c.reduction)).collect();
    rows.sort();
    rows.dedup();
    let mut out = String::from("model,reduction");
    for f in &features {
        for m in METRICS {
            out.push_str(&format!(",{}_{}", f.name(), m));
        }
    }
    out.push('\n');
    for (model, red) in rows {
        out.push_str(&format!("{},{}", model.name(), red.name()));
        for &f in &features {
            let cell = report.cells.iter().find(|c| c.model == model && c.reduction == red && c.feature_type == f);
            match cell.and_then(|c| c.metrics.as_ref()) {
                Some(m) => {
                    for v in [Some(m.accuracy), Some(m.precision), Some(m.recall), Some(m.f1), m.roc_auc] {
                        out.push(',');
                        if let Some(v) = v {
                            out.push_str(&format!("{v:.4}"));
                        }
                    }
                }
                None => out.push_str(&",".repeat(METRICS.len())),
            }
        }
        out.push('\n');
    }
    out
}

/// Writes `report.json`, `table1.csv`, `timings.json` and `runs/<cell>/*`.
pub fn write_experiment(out: &ExperimentOutput, dir: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(&out.report).expect("report serializes");
    json.push('\n');
    write_atomic(&dir.join("report.json"), json.as_bytes())?;
    write_atomic(&dir.join("table1.csv"), table1_csv(&out.report).as_bytes())?;
    let timings: BTreeMap<&str, f64> = out.timings.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let mut tj = serde_json::to_string_pretty(&timings).expect("timings serialize");
    tj.push('\n');
    write_atomic(&dir.join("timings.json"), tj.as_bytes())?;
    for (cell, files) in &out.artifacts {
        for (name, bytes) in files {
            write_atomic(&dir.join("runs").join(cell).join(name), bytes)?;
        }
    }
    Ok(())
}
