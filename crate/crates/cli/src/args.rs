use clap::{Args, Parser, Subcommand, ValueEnum};
use cookstate_core::model::{SeriesMode, StateChangeKind};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "cookstate",
    version,
    about = "Recognize cooking state changes from prompt-pair scores"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank the prompt pairs in a score file by LA slope.
    ComparePrompts(CompareArgs),
    /// Calibrate a recognizer profile on one annotated session.
    Calibrate(CalibrateArgs),
    /// Run a recognizer profile on a session.
    Detect(DetectArgs),
    /// Select, calibrate and evaluate from a protocol config.
    Protocol(ProtocolArgs),
    /// Write a synthetic session from a spec.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Continuous,
    Discrete,
}

impl From<ModeArg> for SeriesMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Continuous => SeriesMode::Continuous,
            ModeArg::Discrete => SeriesMode::Discrete,
        }
    }
}

/// Where prompt texts come from. Without either flag every bundled catalog is searched.
#[derive(Debug, Args)]
pub struct CatalogArgs {
    /// Restrict the bundled catalog to one state-change kind.
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<StateChangeKind>,
    /// Prompt catalog JSON file to use instead of the bundled one.
    #[arg(long, conflicts_with = "kind")]
    pub catalog: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<StateChangeKind, String> {
    s.parse()
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// JSONL score file.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, default_value_t = 100.0)]
    pub temperature: f64,
    /// Ranking JSON output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub catalog: CatalogArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Prompt pair id to calibrate.
    #[arg(long = "pair")]
    pub pair_id: String,
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    #[arg(long, default_value_t = 100.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 1)]
    pub min_consecutive: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Continuous)]
    pub mode: ModeArg,
    /// Profile JSON output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub catalog: CatalogArgs,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub profile: PathBuf,
    /// Session manifest; with an annotation the report carries the diff.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Continuous)]
    pub mode: ModeArg,
    /// Report JSON output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProtocolArgs {
    /// Protocol config JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's window.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub min_consecutive: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Report JSON output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// SynthSpec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory for the manifest and score file.
    #[arg(long)]
    pub out: PathBuf,
}
