use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{effective_sample_size, Target};
use crate::error::{Error, Result};
use crate::evidence::LogDensitySample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Number of recorded draws `T`.
    pub draws: usize,
    /// Sweeps discarded (and used for adaptation) before recording.
    pub burn_in: usize,
    pub thin: usize,
    pub initial_scale: f64,
    pub target_acceptance: f64,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            draws: 10_000,
            burn_in: 10_000,
            thin: 10,
            initial_scale: 0.5,
            target_acceptance: 0.3,
            seed: 1,
        }
    }
}

/// Bookkeeping stored with a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub seed: Option<u64>,
    pub burn_in: usize,
    pub thin: usize,
    /// Fraction of accepted single-coordinate proposals after burn-in.
    pub acceptance_rate: Option<f64>,
    pub proposal_scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub columns: Vec<String>,
    /// Row-major `T × d` unconstrained draws.
    pub draws: Vec<f64>,
    pub log_post: Vec<f64>,
    pub log_lik: Vec<f64>,
    pub info: RunInfo,
}

impl Chain {
    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.log_post.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_post.is_empty()
    }

    pub fn draw(&self, t: usize) -> &[f64] {
        let d = self.dim();
        &self.draws[t * d..(t + 1) * d]
    }

    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.draws
            .iter()
            .skip(j)
            .step_by(self.dim())
            .copied()
            .collect()
    }

    /// Minimum per-series ESS over `log_post` and every coordinate.
    pub fn multivariate_ess(&self) -> Result<f64> {
        let mut ess = effective_sample_size(&self.log_post)?.ess;
        for j in 0..self.dim() {
            ess = ess.min(effective_sample_size(&self.coordinate(j))?.ess);
        }
        Ok(ess)
    }
}

/// Componentwise Gaussian random-walk Metropolis–Hastings.
///
/// Each sweep proposes every coordinate once. During burn-in each coordinate's
/// scale follows a Robbins–Monro update toward the target acceptance rate;
/// afterwards the scales are frozen, so the recorded draws come from a fixed
/// reversible kernel. Runs `burn_in + draws·thin` sweeps in total.
pub fn run_chain<T: Target + ?Sized>(
    target: &T,
    initial: &[f64],
    config: &ChainConfig,
) -> Result<Chain> {
    let d = target.dim();
    if initial.len() != d {
        return Err(Error::InvalidInput(format!(
            "initial point has {} coordinates, target has {d}",
            initial.len()
        )));
    }
    if config.draws < 100 {
        return Err(Error::InvalidInput(format!(
            "need at least 100 draws, got {}",
            config.draws
        )));
    }
    if config.thin == 0 || config.burn_in >= config.draws * config.thin {
        return Err(Error::InvalidInput(
            "need thin ≥ 1 and burn_in < draws·thin".into(),
        ));
    }
    if !(config.initial_scale > 0.0
        && config.target_acceptance > 0.0
        && config.target_acceptance < 1.0)
    {
        return Err(Error::InvalidInput(
            "proposal scale and target acceptance must be in range".into(),
        ));
    }
    let abort = |iteration: usize, e: Error| Error::ChainAborted {
        iteration,
        message: e.to_string(),
    };
    let mut x = initial.to_vec();
    let (mut lp, mut ll) = target.log_density(&x).map_err(|e| abort(0, e))?;
    if !lp.is_finite() {
        return Err(Error::ChainAborted {
            iteration: 0,
            message: format!("initial log density is {lp}"),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut log_scale = vec![config.initial_scale.ln(); d];
    let total = config.burn_in + config.draws * config.thin;
    let mut draws = Vec::with_capacity(config.draws * d);
    let mut log_post = Vec::with_capacity(config.draws);
    let mut log_lik = Vec::with_capacity(config.draws);
    let (mut accepted, mut proposed) = (0u64, 0u64);
    for it in 0..total {
        let adapting = it < config.burn_in;
        let gain = ((it + 1) as f64).powf(-0.6);
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            let u: f64 = rng.random();
            let old = x[j];
            x[j] = old + log_scale[j].exp() * z;
            let (lp2, ll2) = target.log_density(&x).map_err(|e| abort(it, e))?;
            let accept = lp2 > f64::NEG_INFINITY && u.ln() < lp2 - lp;
            if accept {
                lp = lp2;
                ll = ll2;
            } else {
                x[j] = old;
            }
            if adapting {
                let a = if accept { 1.0 } else { 0.0 };
                log_scale[j] += gain * (a - config.target_acceptance);
            } else {
                proposed += 1;
                accepted += accept as u64;
            }
        }
        if !adapting && (it - config.burn_in + 1) % config.thin == 0 {
            draws.extend_from_slice(&x);
            log_post.push(lp);
            log_lik.push(ll);
        }
    }
    Ok(Chain {
        columns: target.column_names(),
        draws,
        log_post,
        log_lik,
        info: RunInfo {
            seed: Some(config.seed),
            burn_in: config.burn_in,
            thin: config.thin,
            acceptance_rate: Some(accepted as f64 / proposed.max(1) as f64),
            proposal_scales: log_scale.iter().map(|s| s.exp()).collect(),
        },
    })
}

/// Draws with `log_g = log_post`, the chain's log-likelihoods and its
/// multivariate ESS.
pub fn chain_to_sample(chain: &Chain) -> Result<LogDensitySample> {
    let ess = chain.multivariate_ess()?;
    LogDensitySample::from_flat(chain.draws.clone(), chain.dim(), chain.log_post.clone())?
        .with_ess(ess)?
        .with_log_lik(chain.log_lik.clone())
}
