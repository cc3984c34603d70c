//! Random-walk Metropolis–Hastings on unconstrained phylogenetic parameters,
//! chain persistence and effective sample size.

mod ess;
mod io;
mod posterior;
mod sampler;

pub use ess::{autocorrelation, effective_sample_size, Ess};
pub use io::{
    read_chain, read_chain_csv, sidecar_path, write_chain, write_chain_csv, ChainSidecar,
};
pub use posterior::{log_posterior, Evaluation, ModelChoice, PhyloPosterior, PriorSpec, Target};
pub use sampler::{chain_to_sample, run_chain, Chain, ChainConfig, RunInfo};
