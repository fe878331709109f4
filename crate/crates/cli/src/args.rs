//! Flag definitions.

use std::path::PathBuf;

use clap::Args;

/// Scenario keys for the flags of `run-sim`. Flags override the config
/// file.
#[derive(Debug, Clone, Args)]
pub struct RunSimArgs {
    /// Scenario file of `key=value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `at2d` (quorum broadcast) or `at2p` (probabilistic broadcast).
    #[arg(long)]
    pub protocol: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Byzantine fraction; implies `--byzantine auto` unless that is given.
    #[arg(long)]
    pub f: Option<f64>,
    /// Byzantine processes: a comma list of ids, `auto` or `none`.
    #[arg(long)]
    pub byzantine: Option<String>,
    /// `crash` (silent Byzantine processes) or `equivocate`.
    #[arg(long)]
    pub adversary: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run this many consecutive seeds starting at `--seed`.
    #[arg(long)]
    pub runs: Option<u64>,
    #[arg(long)]
    pub max_delay: Option<u64>,
    #[arg(long)]
    pub fifo: bool,
    #[arg(long)]
    pub expose_endpoints: bool,
    /// Expected gossip sample size.
    #[arg(long = "G")]
    pub g: Option<f64>,
    #[arg(long = "E")]
    pub e: Option<usize>,
    #[arg(long = "E-hat")]
    pub e_hat: Option<usize>,
    #[arg(long = "R")]
    pub r: Option<usize>,
    #[arg(long = "R-hat")]
    pub r_hat: Option<usize>,
    #[arg(long = "D")]
    pub d: Option<usize>,
    #[arg(long = "D-hat")]
    pub d_hat: Option<usize>,
    /// Transfers each correct process attempts.
    #[arg(long)]
    pub transfers: Option<usize>,
    #[arg(long)]
    pub initial_max: Option<u64>,
    #[arg(long)]
    pub amount_max: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct SmCheckArgs {
    #[arg(long, default_value_t = 3)]
    pub processes: usize,
    /// Operations per process.
    #[arg(long, default_value_t = 4)]
    pub ops: usize,
    #[arg(long, default_value_t = 1000)]
    pub schedules: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Check the k-shared construction, with every account owned by all
    /// processes.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ConsensusArgs {
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 1000)]
    pub schedules: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `implemented` (registers and k-consensus) or `atomic`.
    #[arg(long, default_value = "implemented")]
    pub backend: String,
    /// Explore every schedule instead of sampling.
    #[arg(long)]
    pub exhaustive: bool,
}

/// Base point of a bound computation; the swept parameter overrides one
/// field.
#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub f: f64,
    #[arg(long = "G", default_value_t = 10.0)]
    pub g: f64,
    #[arg(long = "E", default_value_t = 40)]
    pub e: usize,
    #[arg(long = "E-hat", default_value_t = 32)]
    pub e_hat: usize,
    #[arg(long = "R", default_value_t = 40)]
    pub r: usize,
    #[arg(long = "R-hat", default_value_t = 13)]
    pub r_hat: usize,
    #[arg(long = "D", default_value_t = 40)]
    pub d: usize,
    #[arg(long = "D-hat", default_value_t = 24)]
    pub d_hat: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    /// `gossip-totality`, `validity`, `totality` or `consistency`.
    #[arg(long)]
    pub property: String,
    /// `<param>=<lo>:<hi>:<step>`, inclusive; param is one of N, f, G, E,
    /// E-hat, R, R-hat, D, D-hat.
    #[arg(long)]
    pub sweep: String,
    #[command(flatten)]
    pub point: PointArgs,
    /// Estimate gossip totality by Monte Carlo with this many samples.
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct CrossArgs {
    /// `gossip-totality`, `validity`, `totality` or `consistency`.
    #[arg(long)]
    pub property: String,
    #[command(flatten)]
    pub point: PointArgs,
    /// Simulated seeds.
    #[arg(long, default_value_t = 1000)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
