//! `cellgraph` command-line entry point.

mod stages;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use cellgraph::baselines::BaselineKind;
use cellgraph::dimred::Method;
use cellgraph::features::{Aggregator, FeatureKind};
use cellgraph::graph::Metric;
use cellgraph::harness::ModelKind;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

/// Cell classification pipeline for multiplex tissue images: synthetic data,
/// feature extraction, graphs, embeddings, GRAND and tree baselines.
///
/// Every stage reads an optional JSON config (`--config`); flags given on the
/// command line override config values.
#[derive(Debug, Parser)]
#[command(name = "cellgraph", version)]
pub struct Cli {
    /// Root seed; overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON config for the chosen stage.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file or directory (stage dependent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to all cores. Output bytes do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory (config: synth parameters).
    Synth(SynthArgs),
    /// Extract per-cell features from a dataset into a feature CSV.
    Extract(ExtractArgs),
    /// Build a feature-similarity or spatial kNN graph as an edge list.
    Graph(GraphArgs),
    /// Reduce a feature CSV with PCA, t-SNE or UMAP.
    Reduce(ReduceArgs),
    /// Train GRAND on a graph and feature table.
    Train(TrainArgs),
    /// Train a random forest or gradient-boosting baseline.
    Baseline(BaselineArgs),
    /// Compute metrics from a predictions CSV.
    Evaluate(EvaluateArgs),
    /// Run the feature x reduction x model grid.
    Experiment(ExperimentArgs),
    /// Render table1.csv and one SVG bar chart per metric from report.json.
    Report(ReportArgs),
}

fn serde_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown value {s:?}"))
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub melanoma: Option<usize>,
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub image_size: Option<usize>,
    #[arg(long)]
    pub channels: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Dataset directory or manifest.json.
    #[arg(long, required = true)]
    pub dataset: PathBuf,
    /// expression | radiomics
    #[arg(long, value_parser = serde_enum::<FeatureKind>)]
    pub features: Option<FeatureKind>,
    /// mean | median
    #[arg(long, value_parser = serde_enum::<Aggregator>)]
    pub aggregator: Option<Aggregator>,
    /// Gray levels for texture matrices.
    #[arg(long)]
    pub levels: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Feature CSV.
    #[arg(long, required = true)]
    pub features: PathBuf,
    /// feature | spatial
    #[arg(long, value_parser = serde_enum::<stages::GraphType>)]
    pub kind: Option<stages::GraphType>,
    #[arg(long)]
    pub k: Option<usize>,
    /// euclidean | cosine
    #[arg(long, value_parser = serde_enum::<Metric>)]
    pub metric: Option<Metric>,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    /// Feature CSV to reduce.
    #[arg(long = "in", required = true)]
    pub input: PathBuf,
    /// none | pca | tsne | umap
    #[arg(long, value_parser = serde_enum::<Method>)]
    pub method: Option<Method>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub perplexity: Option<f64>,
    #[arg(long)]
    pub neighbors: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Edge list over the feature table's rows.
    #[arg(long, required = true)]
    pub graph: PathBuf,
    #[arg(long, required = true)]
    pub features: PathBuf,
    /// CSV with cell_id, sample_id and label columns (-1 = unlabeled).
    #[arg(long, required = true)]
    pub labels: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub drop_rate: Option<f64>,
    #[arg(long)]
    pub prop_order: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// random_forest | gradient_boosting
    #[arg(long, value_parser = serde_enum::<BaselineKind>)]
    pub model: Option<BaselineKind>,
    #[arg(long, required = true)]
    pub features: PathBuf,
    /// CSV with cell_id, sample_id and label columns (-1 = unlabeled).
    #[arg(long, required = true)]
    pub labels: PathBuf,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub rounds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// predictions.csv written by train or baseline.
    #[arg(long, required = true)]
    pub predictions: PathBuf,
    /// train | val | test | all
    #[arg(long)]
    pub subset: Option<String>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Dataset directory or manifest.json; replaces the config's data source.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Comma-separated: expression,radiomics
    #[arg(long, value_delimiter = ',', value_parser = serde_enum::<FeatureKind>)]
    pub feature_types: Option<Vec<FeatureKind>>,
    /// Comma-separated: none,pca,tsne,umap
    #[arg(long, value_delimiter = ',', value_parser = serde_enum::<Method>)]
    pub reductions: Option<Vec<Method>>,
    /// Comma-separated: grand_feature_graph,grand_spatial_graph,random_forest,gradient_boosting
    #[arg(long, value_delimiter = ',', value_parser = serde_enum::<ModelKind>)]
    pub models: Option<Vec<ModelKind>>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// report.json, or the experiment directory holding it.
    #[arg(long, required = true)]
    pub report: PathBuf,
}

/// Stage failure: usage problems exit with 2, everything else with 1.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Stage(String),
}

impl From<cellgraph::Error> for Failure {
    fn from(e: cellgraph::Error) -> Self {
        Failure::Stage(e.to_string())
    }
}

fn stage_name(c: &Command) -> &'static str {
    match c {
        Command::Synth(_) => "synth",
        Command::Extract(_) => "extract",
        Command::Graph(_) => "graph",
        Command::Reduce(_) => "reduce",
        Command::Train(_) => "train",
        Command::Baseline(_) => "baseline",
        Command::Evaluate(_) => "evaluate",
        Command::Experiment(_) => "experiment",
        Command::Report(_) => "report",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stage = stage_name(&cli.command);
    let result = match cli.threads {
        Some(0) => Err(Failure::Usage("--threads must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::Stage(e.to_string()))
            .and_then(|_| stages::execute(&cli)),
        None => stages::execute(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try 'cellgraph {stage} --help'.");
            ExitCode::from(2)
        }
        Err(Failure::Stage(msg)) => {
            eprintln!("{}", serde_json::json!({ "stage": stage, "status": "error", "message": msg }));
            ExitCode::from(1)
        }
    }
}
