//! Argument parsing, error mapping and file plumbing for the `capnet` binary.

mod commands;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use commands::run;

#[derive(Debug, Parser)]
#[command(name = "capnet", version, about = "Capability conjugation graphs, test-plan synthesis and allocation")]
pub struct Cli {
    /// Worker threads for parallel statistics; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the conjugation graph from interrelations, correlations and strong candidates.
    BuildGraph(BuildGraphArgs),
    /// Select the minimal set of movement sequences covering the graph.
    Synthesize(SynthesizeArgs),
    /// Filter a profile dataset and compute correlations with permutation p-values.
    Analyze(AnalyzeArgs),
    /// Check an agent against action requirements, compensating deficits where possible.
    Allocate(AllocateArgs),
    /// Write a synthetic profile dataset.
    GenData(GenDataArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OrientationArg {
    /// Direct edges along movement stages.
    Stages,
    /// Keep relation directions; drop symmetric edges that close a cycle.
    Relational,
}

#[derive(Debug, Args)]
pub struct GraphSource {
    /// Capability catalog CSV (defaults to the bundled catalog).
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Graph JSON written by build-graph (defaults to the bundled reference graph).
    #[arg(long)]
    pub graph: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildGraphArgs {
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Interrelation table CSV; repeat to merge several files.
    #[arg(long)]
    pub interrelations: Vec<PathBuf>,
    /// Correlation matrix CSV.
    #[arg(long)]
    pub correlations: Option<PathBuf>,
    /// Sample count behind the correlation matrix.
    #[arg(long, default_value_t = 476)]
    pub samples: usize,
    /// Strong candidate table CSV.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    /// Movement stage table CSV used by the stage orientation.
    #[arg(long)]
    pub stages: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OrientationArg::Stages)]
    pub orientation: OrientationArg,
    /// Edges with |r| below this are pruned.
    #[arg(long, default_value_t = 0.4)]
    pub threshold: f64,
    /// Minimum path length used by the reachability repair.
    #[arg(long, default_value_t = 4)]
    pub n_min: usize,
    /// Add only strong candidates, without reachability repair.
    #[arg(long)]
    pub no_repair: bool,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    #[arg(long)]
    pub out_dot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[command(flatten)]
    pub source: GraphSource,
    /// Minimum number of capabilities per sequence.
    #[arg(long, default_value_t = 4)]
    pub n_min: usize,
    /// Minimum visits per capability.
    #[arg(long, default_value_t = 6)]
    pub p_max: usize,
    /// Maximum visits per capability.
    #[arg(long, default_value_t = 7)]
    pub p_hat_max: usize,
    /// Sequence table CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Full run document as JSON.
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// Print the shaded sequence table.
    #[arg(long)]
    pub shaded: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PhaseArg {
    Pre,
    Post,
    All,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Profile dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Comma-separated capability ids (defaults to the sitting over-table set).
    #[arg(long, value_delimiter = ',')]
    pub ids: Vec<String>,
    #[arg(long, value_enum, default_value_t = PhaseArg::Pre)]
    pub phase: PhaseArg,
    /// Minimum profile standard deviation.
    #[arg(long, default_value_t = 0.2)]
    pub threshold: f64,
    #[arg(long, default_value_t = 10_000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_corr: Option<PathBuf>,
    #[arg(long)]
    pub out_p: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    #[command(flatten)]
    pub source: GraphSource,
    /// Profile dataset CSV.
    #[arg(long)]
    pub profiles: PathBuf,
    /// Agent to allocate (defaults to the first profile).
    #[arg(long)]
    pub agent: Option<String>,
    /// Requirement set CSV.
    #[arg(long)]
    pub requirements: PathBuf,
    /// Action to check (defaults to every action in the file).
    #[arg(long)]
    pub action: Option<String>,
    /// Per-capability slack as `id=value`, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub xi: Vec<String>,
    /// Aggregate slack.
    #[arg(long, default_value_t = 0)]
    pub theta: u32,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    #[arg(long)]
    pub out_text: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Number of agents; each gets a pre and a post profile unless --pre-only.
    #[arg(long, default_value_t = 1040)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub pre_only: bool,
    /// Fraction of deliberately flat or incomplete profiles.
    #[arg(long)]
    pub degenerate_fraction: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Infeasible(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Infeasible(_) => 4,
            CliError::Internal(_) => 5,
        }
    }
}

pub fn exit_code(result: Result<(), CliError>) -> ExitCode {
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("capnet: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

pub(crate) fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

/// Creates or truncates `path` and writes `bytes`.
pub(crate) fn write_artifact(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io_err = |source| CliError::Io { path: path.to_owned(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes).map_err(io_err)?;
    w.flush().map_err(io_err)
}
