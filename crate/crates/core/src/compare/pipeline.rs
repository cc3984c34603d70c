use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{
    arithmetic_mean_with, bootstrap_rmse, harmonic_mean_with, idr_log_estimate, EstimatorOptions,
    EvidenceEstimate, IdrProblem, KGridResult, Method, SampledFrom, Standardization,
};
use crate::inflation::ModeChoice;
use crate::mcmc::{
    chain_to_sample, run_chain, Chain, ChainConfig, ModelChoice, PhyloPosterior, PriorSpec, Target,
};
use crate::phylotree::{Alignment, Topology};

/// Decades `10⁻¹²` through `10²`.
pub fn default_k_grid() -> Vec<f64> {
    (-12..=2).map(|e| 10f64.powi(e)).collect()
}

/// Independent 64-bit seed for sub-task `stream` of a master seed.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceConfig {
    pub chain: ChainConfig,
    /// Inflation masses relative to the largest sampled target density.
    pub k_grid: Vec<f64>,
    pub standardization: Standardization,
    /// Any of IDR, HM and the posterior arithmetic mean, in output order.
    pub methods: Vec<Method>,
    /// Bootstrap replicates; 0 skips the bootstrap.
    pub bootstrap: usize,
    pub bootstrap_seed: u64,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        Self {
            chain: ChainConfig::default(),
            k_grid: default_k_grid(),
            standardization: Standardization::CrossFit(ModeChoice::SampleMean),
            methods: vec![Method::Idr],
            bootstrap: 0,
            bootstrap_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRun {
    /// IDR grid with `log_c` values on the original scale.
    pub k_grid: Option<KGridResult>,
    pub estimates: Vec<EvidenceEstimate>,
    /// Amount subtracted from the log target before inflating it.
    pub log_shift: f64,
}

impl EvidenceRun {
    pub fn get(&self, method: Method) -> Option<&EvidenceEstimate> {
        self.estimates.iter().find(|e| e.method == method)
    }
}

/// Evidence estimates from a finished chain on `target`. IDR needs the
/// target to evaluate inflated densities; HM and AM only use the chain.
///
/// The log target is shifted by its largest sampled value so that inflation
/// masses stay representable for posteriors with log evidence far from 0.
pub fn evidence_from_chain(
    target: Option<&dyn Target>,
    chain: &Chain,
    cfg: &EvidenceConfig,
    fingerprint: Option<&str>,
) -> Result<EvidenceRun> {
    let sample = chain_to_sample(chain)?;
    let shift = chain
        .log_post
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::DegenerateInput(
            "chain has no finite log posterior".into(),
        ));
    }
    let ess = sample.ess();
    let boot_size = ess.round().clamp(1.0, sample.len() as f64);
    let opts = EstimatorOptions {
        ess: Some(ess),
        ..Default::default()
    };
    let mut grid = None;
    let mut estimates = Vec::new();
    for &method in &cfg.methods {
        let mut e = match method {
            Method::Idr => {
                let target = target.ok_or_else(|| {
                    Error::InvalidInput("IDR needs the target density to re-evaluate draws".into())
                })?;
                let shifted = sample.shifted(-shift);
                let log_g = |x: &[f64]| match target.log_density(x) {
                    Ok((lp, _)) => lp - shift,
                    Err(_) => f64::NAN,
                };
                let problem = IdrProblem::new(&shifted, log_g, &cfg.standardization)?;
                let mut search = problem.search(&cfg.k_grid)?;
                for row in &mut search.rows {
                    row.log_c += shift;
                    row.ci_low += shift;
                    row.ci_high += shift;
                }
                let mut e = search.estimate.take().expect("search fills the estimate");
                e.log_c += shift;
                e.ci_low += shift;
                e.ci_high += shift;
                if cfg.bootstrap > 0 {
                    let k = search.selected().k;
                    let delta = problem.log_ratios(k)?;
                    let b = bootstrap_rmse(
                        &delta,
                        |d| idr_log_estimate(d, k),
                        cfg.bootstrap,
                        boot_size,
                        cfg.bootstrap_seed,
                    )?;
                    e.rmse_boot = Some(b.rmse);
                }
                search.estimate = Some(e.clone());
                grid = Some(search);
                e
            }
            Method::Hm => {
                let mut e = harmonic_mean_with(&chain.log_lik, &opts)?;
                if cfg.bootstrap > 0 {
                    let b = bootstrap_rmse(
                        &chain.log_lik,
                        |x| harmonic_mean_with(x, &EstimatorOptions::default()).map(|e| e.log_c),
                        cfg.bootstrap,
                        boot_size,
                        cfg.bootstrap_seed,
                    )?;
                    e.rmse_boot = Some(b.rmse);
                }
                e
            }
            Method::AmPosteriorSurrogate => {
                let mut e = arithmetic_mean_with(&chain.log_lik, SampledFrom::Posterior, &opts)?;
                if cfg.bootstrap > 0 {
                    let b = bootstrap_rmse(
                        &chain.log_lik,
                        |x| {
                            arithmetic_mean_with(
                                x,
                                SampledFrom::Posterior,
                                &EstimatorOptions::default(),
                            )
                            .map(|e| e.log_c)
                        },
                        cfg.bootstrap,
                        boot_size,
                        cfg.bootstrap_seed,
                    )?;
                    e.rmse_boot = Some(b.rmse);
                }
                e
            }
            other => {
                return Err(Error::Unsupported(format!(
                    "{} is not available from posterior draws alone",
                    other.label()
                )))
            }
        };
        if let Some(f) = fingerprint {
            e = e.with_fingerprint(f);
        }
        estimates.push(e);
    }
    Ok(EvidenceRun {
        k_grid: grid,
        estimates,
        log_shift: shift,
    })
}

/// Samples the fixed-topology posterior and estimates its evidence.
pub fn run_evidence(
    aln: &Alignment,
    topo: &Topology,
    model: ModelChoice,
    prior: PriorSpec,
    cfg: &EvidenceConfig,
) -> Result<(EvidenceRun, Chain)> {
    let post = PhyloPosterior::new(aln, topo, model, prior)?;
    let chain = run_chain(&post, &post.initial_point(), &cfg.chain)?;
    let run = evidence_from_chain(Some(&post), &chain, cfg, Some(&aln.fingerprint()))?;
    Ok((run, chain))
}
