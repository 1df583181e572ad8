use std::collections::HashMap;
use std::path::Path;

use cellgraph::baselines::{
    predict_tabular, train_gradient_boosting, train_random_forest, BaselineKind, BoostConfig, ForestConfig,
    TabularModel,
};
use cellgraph::dataset::{load_dataset, CellTable};
use cellgraph::dimred::{reduce, ReduceConfig};
use cellgraph::features::{extract_sample, Aggregator, FeatureKind, RadiomicsConfig};
use cellgraph::grand::{predict_grand, train_grand, GrandConfig};
use cellgraph::graph::{assemble_training_graph, normalize_adjacency, CellGraph, GraphKind, Metric, DEFAULT_K};
use cellgraph::harness::{
    compute_metrics, run_experiment, stratified_split, table1_csv, write_experiment, ExperimentConfig,
    ExperimentReport, SplitMasks, Standardizer,
};
use cellgraph::io_util::{fmt_f64, read_bytes, write_atomic};
use cellgraph::rng;
use cellgraph::synth::{generate_synthetic_dataset, write_synthetic, SynthConfig};
use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{svg, Cli, Command, Failure};

type Outcome = Result<(), Failure>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphType {
    #[default]
    Feature,
    Spatial,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExtractSettings {
    features: FeatureKind,
    aggregator: Aggregator,
    radiomics: RadiomicsConfig,
}

impl Default for ExtractSettings {
    fn default() -> Self {
        Self { features: FeatureKind::Expression, aggregator: Aggregator::Mean, radiomics: RadiomicsConfig::default() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GraphSettings {
    kind: GraphType,
    k: usize,
    metric: Metric,
    /// z-score columns over all rows before measuring feature distances.
    standardize: bool,
}

impl Default for GraphSettings {
    fn default() -> Self {
        Self { kind: GraphType::Feature, k: DEFAULT_K, metric: Metric::Euclidean, standardize: true }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainSettings {
    grand: GrandConfig,
    split_ratios: [f64; 3],
    seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self { grand: GrandConfig::default(), split_ratios: [0.7, 0.1, 0.2], seed: 0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BaselineSettings {
    model: BaselineKind,
    forest: ForestConfig,
    boost: BoostConfig,
    split_ratios: [f64; 3],
    seed: u64,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        Self {
            model: BaselineKind::RandomForest,
            forest: ForestConfig::default(),
            boost: BoostConfig::default(),
            split_ratios: [0.7, 0.1, 0.2],
            seed: 0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EvaluateSettings {
    subset: String,
    threshold: f64,
}

impl Default for EvaluateSettings {
    fn default() -> Self {
        Self { subset: "test".into(), threshold: 0.5 }
    }
}

const METRICS: [&str; 5] = ["accuracy", "precision", "recall", "f1", "roc_auc"];

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ReportSettings {
    metrics: Vec<String>,
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self { metrics: METRICS.iter().map(|m| m.to_string()).collect() }
    }
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Failure> {
    let Some(path) = path else { return Ok(T::default()) };
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Failure::Stage(format!("{}: {e}", path.display())))
}

fn required_out(cli: &Cli) -> Result<&Path, Failure> {
    cli.out
        .as_deref()
        .ok_or_else(|| Failure::Usage("the following required arguments were not provided:\n  --out <OUT>".into()))
}

fn override_with<T>(target: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *target = v;
    }
}

fn read_table(path: &Path) -> Result<CellTable, Failure> {
    let text = String::from_utf8(read_bytes(path)?)
        .map_err(|_| Failure::Stage(format!("{}: not valid UTF-8", path.display())))?;
    let mut table = CellTable::from_csv(&text, path)?;
    table.sort_canonical();
    Ok(table)
}

pub fn execute(cli: &Cli) -> Outcome {
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Synth(a) => {
            let mut cfg: SynthConfig = load_config(config)?;
            override_with(&mut cfg.n_samples, a.samples);
            override_with(&mut cfg.n_melanoma, a.melanoma);
            override_with(&mut cfg.cells_per_sample, a.cells);
            override_with(&mut cfg.image_size, a.image_size);
            override_with(&mut cfg.n_channels, a.channels);
            override_with(&mut cfg.seed, cli.seed);
            let out = required_out(cli)?;
            let generated = generate_synthetic_dataset(&cfg)?;
            write_synthetic(&generated, &cfg, out)?;
            Ok(())
        }
        Command::Extract(a) => {
            let mut s: ExtractSettings = load_config(config)?;
            override_with(&mut s.features, a.features);
            override_with(&mut s.aggregator, a.aggregator);
            override_with(&mut s.radiomics.levels, a.levels);
            let out = required_out(cli)?;
            let ds = load_dataset(&a.dataset)?;
            let mut tables = Vec::new();
            let mut warnings = 0;
            for sample in &ds.samples {
                let (t, w) = extract_sample(sample, s.features, s.aggregator, &s.radiomics)?;
                warnings += w.len();
                tables.push(t);
            }
            if warnings > 0 {
                eprintln!("warning: {warnings} texture feature(s) could not be computed and were left missing");
            }
            let table = CellTable::concat(&tables)?;
            Ok(write_atomic(out, table.to_csv().as_bytes())?)
        }
        Command::Graph(a) => {
            let mut s: GraphSettings = load_config(config)?;
            override_with(&mut s.kind, a.kind);
            override_with(&mut s.k, a.k);
            override_with(&mut s.metric, a.metric);
            let out = required_out(cli)?;
            let mut table = read_table(&a.features)?;
            if s.standardize && s.kind == GraphType::Feature {
                let x = table.matrix();
                let all: Vec<usize> = (0..x.nrows()).collect();
                let z = Standardizer::fit(x.view(), &all).transform(x.view());
                table = table.with_features(table.feature_names.clone(), &z)?;
            }
            let kind = match s.kind {
                GraphType::Feature => GraphKind::Feature(s.metric),
                GraphType::Spatial => GraphKind::Spatial,
            };
            let built = assemble_training_graph(&[table], kind, s.k)?;
            for w in &built.warnings {
                eprintln!("warning: {w}");
            }
            Ok(write_atomic(out, built.graph.to_edge_list().as_bytes())?)
        }
        Command::Reduce(a) => {
            let mut cfg: ReduceConfig = load_config(config)?;
            override_with(&mut cfg.method, a.method);
            override_with(&mut cfg.dim, a.dim);
            override_with(&mut cfg.perplexity, a.perplexity);
            override_with(&mut cfg.n_neighbors, a.neighbors);
            override_with(&mut cfg.seed, cli.seed);
            let out = required_out(cli)?;
            let table = read_table(&a.input)?;
            let e = reduce(table.matrix().view(), &cfg)?;
            let names = if cfg.method == cellgraph::dimred::Method::None {
                table.feature_names.clone()
            } else {
                (0..e.dim()).map(|j| format!("{}_{j}", cfg.method.name())).collect()
            };
            let reduced = table.with_features(names, &e.data)?;
            Ok(write_atomic(out, reduced.to_csv().as_bytes())?)
        }
        Command::Train(a) => {
            let mut s: TrainSettings = load_config(config)?;
            override_with(&mut s.grand.max_epochs, a.epochs);
            override_with(&mut s.grand.learning_rate, a.lr);
            override_with(&mut s.grand.drop_rate, a.drop_rate);
            override_with(&mut s.grand.prop_order, a.prop_order);
            override_with(&mut s.seed, cli.seed);
            s.grand.seed = rng::derive_seed(s.seed, 2);
            let out = required_out(cli)?;
            let table = read_table(&a.features)?;
            let text = String::from_utf8_lossy(&read_bytes(&a.graph)?).into_owned();
            let graph = CellGraph::from_edge_list(&text, &a.graph)?;
            if graph.n_nodes != table.len() {
                return Err(Failure::Stage(format!(
                    "{} has {} nodes but {} has {} rows",
                    a.graph.display(),
                    graph.n_nodes,
                    a.features.display(),
                    table.len()
                )));
            }
            let nodes = Nodes::new(&table, &a.labels, s.split_ratios, s.seed)?;
            let x = nodes.standardize(&table.matrix());
            let adj = normalize_adjacency(&graph);
            let dense: Vec<usize> = nodes.labels.iter().map(|l| l.unwrap_or(0)).collect();
            let model =
                train_grand(&adj, &x, &dense, &nodes.split.train_indices(), &nodes.split.val_indices(), &s.grand)?;
            let p = predict_grand(&model, &adj, &x)?;
            model.save(&out.join("model.grnd"))?;
            write_atomic(&out.join("history.csv"), model.history_csv().as_bytes())?;
            let prob = p.probabilities.column(1).to_vec();
            Ok(write_atomic(&out.join("predictions.csv"), nodes.predictions_csv(&table, &prob).as_bytes())?)
        }
        Command::Baseline(a) => {
            let mut s: BaselineSettings = load_config(config)?;
            override_with(&mut s.model, a.model);
            override_with(&mut s.forest.n_trees, a.trees);
            override_with(&mut s.boost.n_rounds, a.rounds);
            override_with(&mut s.seed, cli.seed);
            s.forest.seed = rng::derive_seed(s.seed, 2);
            s.boost.seed = s.forest.seed;
            let out = required_out(cli)?;
            let table = read_table(&a.features)?;
            let nodes = Nodes::new(&table, &a.labels, s.split_ratios, s.seed)?;
            let x = nodes.standardize(&table.matrix());
            let train = nodes.split.train_indices();
            let x_train = x.select(ndarray::Axis(0), &train);
            let y_train: Vec<usize> =
                train.iter().map(|&i| nodes.labels[i].expect("train nodes are labeled")).collect();
            let model = match s.model {
                BaselineKind::RandomForest => {
                    TabularModel::Forest(train_random_forest(x_train.view(), &y_train, &s.forest)?)
                }
                BaselineKind::GradientBoosting => {
                    TabularModel::Boosting(train_gradient_boosting(x_train.view(), &y_train, &s.boost)?)
                }
            };
            let prob = predict_tabular(&model, x.view())?.column(1).to_vec();
            model.save(&out.join("model.bin"))?;
            Ok(write_atomic(&out.join("predictions.csv"), nodes.predictions_csv(&table, &prob).as_bytes())?)
        }
        Command::Evaluate(a) => {
            let mut s: EvaluateSettings = load_config(config)?;
            override_with(&mut s.subset, a.subset.clone());
            if !["train", "val", "test", "all"].contains(&s.subset.as_str()) {
                return Err(Failure::Usage(format!(
                    "invalid value {:?} for --subset (train, val, test, all)",
                    s.subset
                )));
            }
            let (truth, prob) = read_predictions(&a.predictions, &s.subset)?;
            if truth.is_empty() {
                return Err(Failure::Stage(format!(
                    "{}: no labeled rows in subset {}",
                    a.predictions.display(),
                    s.subset
                )));
            }
            let metrics = compute_metrics(&truth, &prob, s.threshold);
            let mut json = serde_json::to_string_pretty(&metrics).expect("serializable");
            json.push('\n');
            match &cli.out {
                Some(out) => write_atomic(out, json.as_bytes())?,
                None => print!("{json}"),
            }
            Ok(())
        }
        Command::Experiment(a) => {
            let mut cfg: ExperimentConfig = load_config(config)?;
            if let Some(d) = &a.dataset {
                cfg.dataset = Some(d.clone());
                cfg.synth = None;
            }
            override_with(&mut cfg.feature_types, a.feature_types.clone());
            override_with(&mut cfg.reductions, a.reductions.clone());
            override_with(&mut cfg.models, a.models.clone());
            override_with(&mut cfg.seed, cli.seed);
            let out = required_out(cli)?;
            if cfg.dataset.is_none() && cfg.synth.is_none() {
                return Err(Failure::Usage(
                    "experiment needs a data source: pass --dataset or a config with `dataset` or `synth`".into(),
                ));
            }
            let result = run_experiment(&cfg)?;
            write_experiment(&result, out)?;
            for c in &result.report.cells {
                if let Some(e) = &c.error {
                    eprintln!("warning: cell {} failed: {e}", c.name());
                }
            }
            Ok(())
        }
        Command::Report(a) => {
            let s: ReportSettings = load_config(config)?;
            if let Some(m) = s.metrics.iter().find(|m| !METRICS.contains(&m.as_str())) {
                return Err(Failure::Stage(format!("unknown metric {m:?}; expected one of {}", METRICS.join(", "))));
            }
            let out = required_out(cli)?;
            let path = if a.report.is_dir() { a.report.join("report.json") } else { a.report.clone() };
            let report: ExperimentReport = serde_json::from_slice(&read_bytes(&path)?)
                .map_err(|e| Failure::Stage(format!("{}: {e}", path.display())))?;
            write_atomic(&out.join("table1.csv"), table1_csv(&report).as_bytes())?;
            for metric in &s.metrics {
                let bars: Vec<(String, Option<f64>)> = report
                    .cells
                    .iter()
                    .map(|c| (c.name(), c.metrics.as_ref().and_then(|m| metric_value(m, metric))))
                    .collect();
                write_atomic(&out.join(format!("{metric}.svg")), svg::bar_chart(metric, &bars).as_bytes())?;
            }
            Ok(())
        }
    }
}

fn metric_value(m: &cellgraph::harness::Metrics, name: &str) -> Option<f64> {
    match name {
        "accuracy" => Some(m.accuracy),
        "precision" => Some(m.precision),
        "recall" => Some(m.recall),
        "f1" => Some(m.f1),
        "roc_auc" => m.roc_auc,
        _ => None,
    }
}

/// Labels aligned to the feature table's rows plus the stratified split.
struct Nodes {
    labels: Vec<Option<usize>>,
    split: SplitMasks,
}

impl Nodes {
    fn new(table: &CellTable, labels_path: &Path, ratios: [f64; 3], seed: u64) -> Result<Self, Failure> {
        let by_cell = read_labels(labels_path)?;
        let labels: Vec<Option<usize>> =
            table.rows.iter().map(|r| by_cell.get(&(r.sample_id.clone(), r.cell_id)).copied().flatten()).collect();
        let split = stratified_split(&labels, ratios, rng::derive_seed(seed, 1))?;
        Ok(Self { labels, split })
    }

    /// z-scores with training-node statistics.
    fn standardize(&self, x: &Array2<f64>) -> Array2<f64> {
        Standardizer::fit(x.view(), &self.split.train_indices()).transform(x.view())
    }

    fn predictions_csv(&self, table: &CellTable, prob: &[f64]) -> String {
        let mut out = String::from("cell_id,sample_id,split,label,prob_tumor,predicted\n");
        for (i, r) in table.rows.iter().enumerate() {
            let label = self.labels[i].map_or("-1".to_string(), |l| l.to_string());
            out.push_str(&format!(
                "{},{},{},{label},{},{}\n",
                r.cell_id,
                r.sample_id,
                self.split.subset(i),
                fmt_f64(prob[i]),
                usize::from(prob[i] > 0.5)
            ));
        }
        out
    }
}

type CsvReader = csv::Reader<std::io::Cursor<Vec<u8>>>;

/// Reader positioned after the header, plus the index of each wanted column.
fn csv_columns(path: &Path, wanted: &[&str]) -> Result<(CsvReader, Vec<usize>), Failure> {
    let bytes = read_bytes(path)?;
    let mut rdr = csv::Reader::from_reader(std::io::Cursor::new(bytes));
    let header = rdr.headers().map_err(|e| Failure::Stage(format!("{}: {e}", path.display())))?.clone();
    let idx = wanted
        .iter()
        .map(|w| {
            header
                .iter()
                .position(|h| h == *w)
                .ok_or_else(|| Failure::Stage(format!("{}: missing column {w}", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((rdr, idx))
}

fn bad_row(path: &Path, line: usize) -> Failure {
    Failure::Stage(format!("{}: line {line}: malformed row", path.display()))
}

/// `(sample_id, cell_id) -> class` from any CSV carrying those columns and a
/// `label` column (-1 for unlabeled).
fn read_labels(path: &Path) -> Result<HashMap<(String, u32), Option<usize>>, Failure> {
    let (mut rdr, idx) = csv_columns(path, &["cell_id", "sample_id", "label"])?;
    let mut map = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|_| bad_row(path, i + 2))?;
        let cell: u32 = rec[idx[0]].parse().map_err(|_| bad_row(path, i + 2))?;
        let label = match rec[idx[2]].trim() {
            "-1" => None,
            "0" => Some(0),
            "1" => Some(1),
            _ => return Err(bad_row(path, i + 2)),
        };
        map.insert((rec[idx[1]].to_string(), cell), label);
    }
    Ok(map)
}

fn read_predictions(path: &Path, subset: &str) -> Result<(Vec<usize>, Vec<f64>), Failure> {
    let (mut rdr, idx) = csv_columns(path, &["split", "label", "prob_tumor"])?;
    let (mut truth, mut prob) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|_| bad_row(path, i + 2))?;
        if subset != "all" && &rec[idx[0]] != subset {
            continue;
        }
        let label: i64 = rec[idx[1]].parse().map_err(|_| bad_row(path, i + 2))?;
        if label < 0 {
            continue;
        }
        truth.push(label as usize);
        prob.push(rec[idx[2]].parse().map_err(|_| bad_row(path, i + 2))?);
    }
    Ok((truth, prob))
}
