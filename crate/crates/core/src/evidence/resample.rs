use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{log_mean_exp, log_sum_exp};

/// Above this fraction of failed replicates the bootstrap result is flagged.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOutcome {
    /// Root-mean-square relative deviation over successful replicates. May be
    /// `inf` for very unstable estimators; `log_rmse` stays finite.
    pub rmse: f64,
    pub log_rmse: f64,
    pub replicates: usize,
    pub failed: usize,
    /// More than [`MAX_FAILED_FRACTION`] of the replicates failed.
    pub unreliable: bool,
}

/// Bootstrap relative RMSE of a log-scale estimator.
///
/// Each replicate draws `round(ess)` indices with replacement from a
/// ChaCha20 generator seeded with `seed` on stream `b`, so replicates can run
/// in parallel and still be reproducible.
pub fn bootstrap_rmse<E>(
    statistic: &[f64],
    estimator: E,
    b: usize,
    ess: f64,
    seed: u64,
) -> Result<BootstrapOutcome>
where
    E: Fn(&[f64]) -> Result<f64> + Sync,
{
    let t = statistic.len();
    if t < 2 {
        return Err(Error::InvalidInput(format!(
            "bootstrap needs at least 2 values, got {t}"
        )));
    }
    if b == 0 {
        return Err(Error::InvalidInput(
            "bootstrap needs at least one replicate".into(),
        ));
    }
    if !(ess >= 1.0 && ess <= t as f64) {
        return Err(Error::InvalidInput(format!(
            "effective sample size {ess} outside [1, {t}]"
        )));
    }
    let full = estimator(statistic)?;
    let size = (ess.round() as usize).max(1);
    let replicate_logs: Vec<Option<f64>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64);
            let resampled: Vec<f64> = (0..size)
                .map(|_| statistic[rng.random_range(0..t)])
                .collect();
            estimator(&resampled).ok().filter(|v| !v.is_nan())
        })
        .collect();
    let succeeded: Vec<f64> = replicate_logs.iter().flatten().copied().collect();
    let failed = b - succeeded.len();
    if succeeded.is_empty() {
        return Err(Error::DegenerateInput(
            "every bootstrap replicate failed".into(),
        ));
    }
    // log((ĉ_b/ĉ - 1)^2), kept on the log scale so wild replicates cannot overflow
    let log_sq: Vec<f64> = succeeded
        .iter()
        .map(|&lb| 2.0 * log_abs_expm1(lb - full))
        .collect();
    let log_rmse = 0.5 * (log_sum_exp(&log_sq) - (succeeded.len() as f64).ln());
    Ok(BootstrapOutcome {
        rmse: log_rmse.exp(),
        log_rmse,
        replicates: b,
        failed,
        unreliable: failed as f64 > MAX_FAILED_FRACTION * b as f64,
    })
}

fn log_abs_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().abs().ln()
    }
}

/// Relative RMSE of independent replicate estimates around their
/// natural-scale mean.
pub fn mc_replicate_rmse(log_estimates: &[f64]) -> Result<f64> {
    if log_estimates.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 replicate estimates, got {}",
            log_estimates.len()
        )));
    }
    if log_estimates.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "replicate estimates must be finite".into(),
        ));
    }
    let log_bar = log_mean_exp(log_estimates);
    let ms = log_estimates
        .iter()
        .map(|&l| (l - log_bar).exp_m1().powi(2))
        .sum::<f64>()
        / log_estimates.len() as f64;
    Ok(ms.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::log_mean_exp;

    fn log_mean(values: &[f64]) -> Result<f64> {
        Ok(log_mean_exp(values))
    }

    #[test]
    fn constant_statistic_has_zero_rmse() {
        let out = bootstrap_rmse(&[0.7; 50], log_mean, 200, 50.0, 1).unwrap();
        assert_eq!(out.rmse, 0.0);
        assert_eq!(out.failed, 0);
    }

    #[test]
    fn failed_replicates_are_counted() {
        let stat: Vec<f64> = (0..20).map(|i| i as f64).collect();
        // fails whenever the resample misses the largest value
        let est = |v: &[f64]| {
            if v.contains(&19.0) {
                Ok(log_mean_exp(v))
            } else {
                Err(Error::DegenerateInput("missing".into()))
            }
        };
        let out = bootstrap_rmse(&stat, est, 500, 20.0, 3).unwrap();
        assert!(out.failed > 50 && out.unreliable);
    }

    #[test]
    fn mc_replicate_examples() {
        assert_eq!(mc_replicate_rmse(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
        let r = mc_replicate_rmse(&[0.0, 1.1f64.ln()]).unwrap();
        assert!((r - 0.05 / 1.05).abs() < 1e-14);
        assert!(mc_replicate_rmse(&[1.0]).is_err());
    }

    #[test]
    fn bad_arguments() {
        assert!(bootstrap_rmse(&[1.0], log_mean, 10, 1.0, 0).is_err());
        assert!(bootstrap_rmse(&[1.0, 2.0], log_mean, 0, 2.0, 0).is_err());
        assert!(bootstrap_rmse(&[1.0, 2.0], log_mean, 10, 3.0, 0).is_err());
    }
}
