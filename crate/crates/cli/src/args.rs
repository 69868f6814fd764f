use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "hrmf",
    version,
    about = "Enrich character hidden states with word semantics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Merge several tokenizers' segmentations per sentence (JSON lines in, JSON lines out).
    Vote(VoteArgs),
    /// Write a seeded weight bundle with zero biases.
    InitWeights(InitArgs),
    /// Run the fusion layer over one sentence's hidden states.
    Fuse(FuseArgs),
    /// Run the randomized invariant suite.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct VoteArgs {
    /// Input JSON lines, `-` for stdin.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Output JSON lines, stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Word embedding width.
    #[arg(long = "d-w")]
    pub d_w: usize,
    /// Hidden width.
    #[arg(long = "d-h")]
    pub d_h: usize,
    #[arg(long, default_value_t = 1)]
    pub heads: usize,
    #[arg(long, short)]
    pub output: PathBuf,
}

/// Every option may also come from `--config`; flags win.
#[derive(Debug, Args)]
pub struct FuseArgs {
    /// JSON run description with the same keys as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Hidden states in the text matrix format.
    #[arg(long)]
    pub hidden: Option<PathBuf>,
    /// One segmentation record (JSON lines).
    #[arg(long)]
    pub segmentation: Option<PathBuf>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Key-character retention ratio [default: 0.9]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Plain-branch weight [default: 0.5]
    #[arg(long)]
    pub mu: Option<f64>,
    /// Attention heads [default: 1]
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the mixed states, omega and both attention branches next to the output.
    #[arg(long)]
    pub debug_intermediates: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Cases per property.
    #[arg(long, default_value_t = 100)]
    pub cases: usize,
    #[arg(long, default_value_t = 0x5EED)]
    pub seed: u64,
    /// Swap in a broken softmax to confirm the suite notices.
    #[arg(long, hide = true)]
    pub corrupt_softmax: bool,
}
