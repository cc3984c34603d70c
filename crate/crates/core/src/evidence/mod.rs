//! Evidence estimators: arithmetic mean, harmonic mean, generalized harmonic
//! mean and inflated density ratio, with their error estimates.
//!
//! All arithmetic happens on the natural-log scale. Relative errors are
//! scale-free, so they are computed from values rescaled by their maximum.

mod idr;
mod report;
mod resample;
mod sample;

pub use idr::{
    idr, idr_from_log_ratios, idr_k_search, idr_log_estimate, IdrProblem, KGridResult, KGridRow,
    Standardization,
};
pub(crate) use report::align;
pub use report::{render_estimates, render_k_grid};
pub use resample::{bootstrap_rmse, mc_replicate_rmse, BootstrapOutcome, MAX_FAILED_FRACTION};
pub use sample::LogDensitySample;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::scaled_exp_moments;

/// Lower CI bound offset used when `2·rmse ≥ 1` makes `log(1 - 2·rmse)`
/// undefined.
pub const CI_LOWER_CLAMP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "IDR")]
    Idr,
    #[serde(rename = "HM")]
    Hm,
    #[serde(rename = "GHM")]
    Ghm,
    #[serde(rename = "AM_prior")]
    AmPrior,
    #[serde(rename = "AM_posterior_surrogate")]
    AmPosteriorSurrogate,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Idr => "IDR",
            Method::Hm => "HM",
            Method::Ghm => "GHM",
            Method::AmPrior => "AM",
            Method::AmPosteriorSurrogate => "AM*",
        }
    }
}

/// Where the draws fed to the arithmetic mean estimator came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampledFrom {
    Prior,
    Posterior,
}

/// Error form used for the harmonic mean estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum HmErrorForm {
    /// `ĉ · sqrt(Var(1/L) / n)`, matching the arithmetic mean form.
    #[default]
    DeltaMethod,
    /// `ĉ · sqrt(Var(1/L))`, without the `1/n` factor.
    Literal,
}

/// Log evidence with its error estimates. All rmse values are relative
/// errors on the natural scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceEstimate {
    pub method: Method,
    pub log_c: f64,
    pub rmse_delta: f64,
    pub rmse_delta_ess: f64,
    pub rmse_boot: Option<f64>,
    pub rmse_mc: Option<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub k_opt: Option<f64>,
    pub n_draws: usize,
    pub ess: f64,
    /// False for the posterior arithmetic mean, which is only a surrogate
    /// score.
    pub is_marginal_likelihood: bool,
    pub data_fingerprint: Option<String>,
}

impl EvidenceEstimate {
    pub(crate) fn new(method: Method, log_c: f64, rmse_delta: f64, n: usize, ess: f64) -> Self {
        let rmse_delta_ess = rmse_delta * (n as f64 / ess).sqrt();
        let (ci_low, ci_high) = confidence_interval(log_c, rmse_delta_ess);
        Self {
            method,
            log_c,
            rmse_delta,
            rmse_delta_ess,
            rmse_boot: None,
            rmse_mc: None,
            ci_low,
            ci_high,
            k_opt: None,
            n_draws: n,
            ess,
            is_marginal_likelihood: method != Method::AmPosteriorSurrogate,
            data_fingerprint: None,
        }
    }

    pub fn with_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.data_fingerprint = Some(fingerprint.into());
        self
    }
}

/// `[log(ĉ(1 - 2ρ)), log(ĉ(1 + 2ρ))]`; the lower end is clamped to
/// `log ĉ - 5` once `2ρ ≥ 1`.
pub fn confidence_interval(log_c: f64, rmse: f64) -> (f64, f64) {
    let two = 2.0 * rmse;
    let low = if two >= 1.0 {
        log_c - CI_LOWER_CLAMP
    } else {
        log_c + (-two).ln_1p()
    };
    (low, log_c + two.ln_1p())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions {
    /// Effective sample size; defaults to the number of values.
    pub ess: Option<f64>,
    pub hm_form: HmErrorForm,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            ess: None,
            hm_form: HmErrorForm::DeltaMethod,
        }
    }
}

fn check_log_values(values: &[f64], what: &str) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "{what}: need at least 2 values, got {}",
            values.len()
        )));
    }
    if let Some(i) = values
        .iter()
        .position(|v| v.is_nan() || *v == f64::INFINITY)
    {
        return Err(Error::InvalidInput(format!(
            "{what}: value {i} is {}",
            values[i]
        )));
    }
    Ok(())
}

fn resolve_ess(ess: Option<f64>, n: usize) -> Result<f64> {
    match ess {
        None => Ok(n as f64),
        Some(e) if e >= 1.0 && e <= n as f64 => Ok(e),
        Some(e) => Err(Error::InvalidInput(format!(
            "effective sample size {e} outside [1, {n}]"
        ))),
    }
}

/// Arithmetic mean of likelihood values.
pub fn arithmetic_mean(
    log_likelihoods: &[f64],
    sampled_from: SampledFrom,
) -> Result<EvidenceEstimate> {
    arithmetic_mean_with(log_likelihoods, sampled_from, &EstimatorOptions::default())
}

pub fn arithmetic_mean_with(
    log_likelihoods: &[f64],
    sampled_from: SampledFrom,
    opts: &EstimatorOptions,
) -> Result<EvidenceEstimate> {
    check_log_values(log_likelihoods, "arithmetic mean")?;
    let n = log_likelihoods.len();
    let ess = resolve_ess(opts.ess, n)?;
    let (shift, mean_w, sd_w) = scaled_exp_moments(log_likelihoods);
    if shift == f64::NEG_INFINITY {
        return Err(Error::DegenerateInput(
            "every log-likelihood is -inf".into(),
        ));
    }
    let log_c = shift + mean_w.ln();
    let rmse = sd_w / (mean_w * (n as f64).sqrt());
    let method = match sampled_from {
        SampledFrom::Prior => Method::AmPrior,
        SampledFrom::Posterior => Method::AmPosteriorSurrogate,
    };
    Ok(EvidenceEstimate::new(method, log_c, rmse, n, ess))
}

/// Harmonic mean of likelihood values over posterior draws.
pub fn harmonic_mean(log_likelihoods: &[f64]) -> Result<EvidenceEstimate> {
    harmonic_mean_with(log_likelihoods, &EstimatorOptions::default())
}

pub fn harmonic_mean_with(
    log_likelihoods: &[f64],
    opts: &EstimatorOptions,
) -> Result<EvidenceEstimate> {
    check_log_values(log_likelihoods, "harmonic mean")?;
    if let Some(i) = log_likelihoods.iter().position(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::DegenerateInput(format!(
            "log-likelihood {i} is -inf; 1/L is unbounded"
        )));
    }
    let n = log_likelihoods.len();
    let ess = resolve_ess(opts.ess, n)?;
    let negated: Vec<f64> = log_likelihoods.iter().map(|v| -v).collect();
    let (shift, mean_w, sd_w) = scaled_exp_moments(&negated);
    let log_c = -(shift + mean_w.ln());
    let rmse = match opts.hm_form {
        HmErrorForm::DeltaMethod => sd_w / (mean_w * (n as f64).sqrt()),
        HmErrorForm::Literal => sd_w / mean_w,
    };
    Ok(EvidenceEstimate::new(Method::Hm, log_c, rmse, n, ess))
}

/// Generalized harmonic mean with a normalized instrumental density `log_f`.
///
/// `log_f` must integrate to one and have support inside that of the target;
/// this is the caller's responsibility.
pub fn ghm<F>(sample: &LogDensitySample, log_f: F) -> Result<EvidenceEstimate>
where
    F: Fn(&[f64]) -> f64,
{
    let mut log_ratio = Vec::with_capacity(sample.len());
    for (t, (theta, &lg)) in sample.iter().zip(sample.log_g()).enumerate() {
        let lf = log_f(theta);
        if lf.is_nan() || lf == f64::INFINITY {
            return Err(Error::EstimatorBreakdown {
                index: t,
                reason: format!("instrumental log density is {lf} where log g = {lg}"),
            });
        }
        log_ratio.push(lf - lg);
    }
    let (shift, mean_w, sd_w) = scaled_exp_moments(&log_ratio);
    if shift == f64::NEG_INFINITY {
        return Err(Error::EstimatorBreakdown {
            index: 0,
            reason: "instrumental density vanishes on every draw".into(),
        });
    }
    let n = sample.len();
    let log_c = -(shift + mean_w.ln());
    let rmse = sd_w / (mean_w * (n as f64).sqrt());
    Ok(EvidenceEstimate::new(
        Method::Ghm,
        log_c,
        rmse,
        n,
        sample.ess(),
    ))
}
