use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[command(
    name = "evidenced",
    version,
    about = "Marginal likelihood estimation, Bayes factors and tree selection for phylogenetic models"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Simulate an alignment along a tree.
    Simulate(SimulateArgs),
    /// Run a Metropolis–Hastings chain on a fixed topology.
    Sample(SampleArgs),
    /// Estimate the evidence from one or more saved chains.
    Evidence(EvidenceArgs),
    /// Bayes factor between two substitution models.
    Compare(CompareArgs),
    /// Rank candidate topologies by evidence.
    Trees(TreesArgs),
    /// Run IDR on synthetic targets with known constants.
    Validate(ValidateArgs),
    /// Rerun the command recorded in a manifest and compare outputs.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Jc69,
    GtrGamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorArg {
    Idr,
    Hm,
    /// Posterior arithmetic mean (a surrogate score, not an evidence).
    Am,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SeedArgs {
    /// Master seed; all sub-seeds are derived from it.
    #[arg(long, env = "EVIDENCED_SEED", default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OutArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = "evidenced-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "jc69")]
    pub model: ModelArg,
    /// Discrete gamma categories for gtr-gamma.
    #[arg(long, default_value_t = 4)]
    pub categories: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PriorArgs {
    /// Rate of the exponential prior on each branch length.
    #[arg(long, default_value_t = 10.0)]
    pub branch_rate: f64,
    /// Rate of the exponential prior on the gamma shape.
    #[arg(long, default_value_t = 1.0)]
    pub alpha_rate: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ChainArgs {
    /// Recorded draws per chain.
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    /// Adaptive sweeps discarded before recording.
    #[arg(long, default_value_t = 10_000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 10)]
    pub thin: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EstimatorArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_value = "idr,hm,am")]
    pub estimators: Vec<EstimatorArg>,
    /// `lo:hi:log[:per-decade]` or a comma-separated list of values.
    #[arg(long, default_value = "1e-12:1e2:log")]
    pub k_grid: String,
    /// Bootstrap replicates per estimate (0 disables).
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Newick file, or a Newick string starting with `(`.
    #[arg(long)]
    pub tree: String,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Base frequencies `A,C,G,T` for gtr-gamma.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.25,0.25,0.25")]
    pub pi: Vec<f64>,
    /// Exchangeabilities `AC,AG,AT,CG,CT,GT` for gtr-gamma (normalized).
    #[arg(long, value_delimiter = ',', default_value = "1,1,1,1,1,1")]
    pub rho: Vec<f64>,
    /// Gamma shape for gtr-gamma.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 200)]
    pub sites: usize,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    /// FASTA or relaxed PHYLIP.
    #[arg(long)]
    pub alignment: PathBuf,
    /// Newick file, or a Newick string starting with `(`.
    #[arg(long)]
    pub tree: String,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Independent chains, written as chain-1.csv … chain-R.csv when R > 1.
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetArg {
    /// The phylogenetic posterior described by the chain's sidecar.
    Phylo,
    /// Standard normal density in the chain's dimension (for checks).
    StdNormal,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvidenceArgs {
    /// Chain CSV; repeat for Monte Carlo replicates.
    #[arg(long, required = true)]
    pub chain: Vec<PathBuf>,
    /// Alignment the chains were run on (needed by IDR for phylo targets).
    #[arg(long)]
    pub alignment: Option<PathBuf>,
    /// Tree, if the sidecar does not record one.
    #[arg(long)]
    pub tree: Option<String>,
    /// Model, if the sidecar does not record one.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long, value_enum, default_value = "phylo")]
    pub target: TargetArg,
    #[command(flatten)]
    pub estimators: EstimatorArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub alignment: PathBuf,
    #[arg(long)]
    pub tree: String,
    /// `M1,M0`: the report gives log BF(M1 vs M0).
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "jc69,gtr-gamma"
    )]
    pub models: Vec<ModelArg>,
    #[arg(long, default_value_t = 4)]
    pub categories: usize,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub estimators: EstimatorArgs,
    /// Independent chains per model.
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TreesArgs {
    #[arg(long)]
    pub alignment: PathBuf,
    /// File with one Newick tree per line. With 4 taxa and no file, all
    /// three unrooted topologies are compared.
    #[arg(long)]
    pub trees: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub estimators: EstimatorArgs,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    /// I.i.d. draws per target.
    #[arg(long, default_value_t = 100_000)]
    pub draws: usize,
    #[arg(long, default_value = "1e-8:1e30:log")]
    pub k_grid: String,
    /// Only run targets with these names.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<String>,
    #[command(flatten)]
    pub seed: SeedArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for the rerun's outputs.
    #[arg(long)]
    pub out: PathBuf,
}
