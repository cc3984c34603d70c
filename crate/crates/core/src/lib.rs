//! Marginal likelihood (model evidence) estimation from posterior samples.
//!
//! The central estimator is the inflated density ratio (IDR) estimator, a
//! generalized harmonic mean estimator whose instrumental density is built by
//! inflating the unnormalized target with a plateau of known mass around its
//! (standardized) mode. Harmonic mean and arithmetic mean estimators are
//! provided as baselines.
//!
//! The rest of the crate applies the estimators to fixed-topology
//! phylogenetic models: reversible nucleotide substitution models
//! ([`substmodel`]), trees, alignments and the pruning likelihood
//! ([`phylotree`]), unconstrained reparameterizations ([`transforms`]),
//! Metropolis–Hastings sampling ([`mcmc`]) and Bayes-factor model and tree
//! comparison ([`compare`]).

pub mod compare;
pub mod error;
pub mod evidence;
pub mod inflation;
pub mod mcmc;
pub mod numeric;
pub mod phylotree;
pub mod substmodel;
pub mod transforms;

pub use error::{Error, Result};
