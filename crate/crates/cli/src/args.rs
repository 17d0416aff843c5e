use std::net::SocketAddr;
use std::path::PathBuf;

use bathyedit::splitter::DEFAULT_CHUNK_LENGTH;
use bathyedit::{Side, SplitSpec, Strategy};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "bathyedit", version, about = "Assisted editing pipeline for ship-track bathymetry")]
pub struct Cli {
    /// Log filter (error, warn, info, debug, trace); RUST_LOG overrides it.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus from a JSON generator spec.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Partition a corpus into train and test units.
    Split {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on the train side of a split.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        split: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every sounding of a corpus.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// ROC points (`fpr,tpr,threshold`) of a scores file against corpus labels.
    Roc {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Restrict to one side of this split.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SideArg::Test, requires = "split")]
        side: SideArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-region AUROC matrix (train on row, test on column).
    Matrix {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Same-region versus ALL-region improvement from a matrix file.
    Improvement {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Test AUROC under per-example, chunk and per-cruise splits.
    SeqReport {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CHUNK_LENGTH)]
        chunk_length: usize,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Zero the time-of-day, latitude and longitude channels first.
        #[arg(long)]
        ablate_proxies: bool,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve scored soundings and edit operations over HTTP.
    Serve {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Append-only edit log; created when missing.
        #[arg(long)]
        edit_log: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    PerExample,
    PerCruise,
    Chunk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Train,
    Test,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::Train => Side::Train,
            SideArg::Test => Side::Test,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    #[arg(long, default_value_t = DEFAULT_CHUNK_LENGTH)]
    pub chunk_length: usize,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SplitArgs {
    pub fn spec(&self) -> SplitSpec {
        let strategy = match self.strategy {
            StrategyArg::PerExample => Strategy::PerExample,
            StrategyArg::PerCruise => Strategy::PerCruise,
            StrategyArg::Chunk => Strategy::Chunk {
                length: self.chunk_length,
            },
        };
        SplitSpec::new(strategy, self.test_fraction, self.seed)
    }
}

/// Training configuration: a JSON file, then individual overrides.
#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// JSON object with any TrainConfig fields; missing fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub num_rounds: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub max_leaves: Option<usize>,
    #[arg(long)]
    pub min_samples_leaf: Option<usize>,
}
