use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EvidenceEstimate, LogDensitySample, Method};
use crate::error::{Error, Result};
use crate::inflation::{
    fit_standardization, norm, InflationConfig, ModeChoice, StandardizationSpec,
};
use crate::numeric::{mean, sample_variance};

/// Beyond this log ratio `expm1` would overflow, so excesses are rescaled.
const EXP_SAFE: f64 = 700.0;

/// How draws are standardized before inflating the target.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub enum Standardization {
    /// Inflate around the origin of the given coordinates.
    None,
    /// Fit center and whitening to the sample.
    #[default]
    Fit,
    FitWithMode(ModeChoice),
    /// Two-fold cross-fitting: each half of the sample is inflated with the
    /// center and whitening fitted on the other half. Removes the bias that
    /// reusing the draws for the fit causes in high dimensions.
    CrossFit(ModeChoice),
    Spec(StandardizationSpec),
}

struct Fold {
    spec: StandardizationSpec,
    log_g_center: f64,
}

/// A sample and target prepared for repeated IDR evaluation over many `k`.
///
/// Standardization is linear and the inflation map is a radial rescaling in
/// standardized space, so a shrunken draw is `center + f·(θ - center)` in the
/// original coordinates and the Jacobian of the standardization cancels in
/// the density ratio.
pub struct IdrProblem<'a, F> {
    sample: &'a LogDensitySample,
    log_g: F,
    /// Draws before `split` use `folds[0]`, the rest the last fold.
    folds: Vec<Fold>,
    split: usize,
    radii: Vec<f64>,
}

impl<'a, F> IdrProblem<'a, F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(
        sample: &'a LogDensitySample,
        log_g: F,
        standardization: &Standardization,
    ) -> Result<Self> {
        let d = sample.dim();
        let n = sample.len();
        let fit = |lo: usize, hi: usize, mode: &ModeChoice| {
            fit_standardization(
                &sample.flat_draws()[lo * d..hi * d],
                d,
                &sample.log_g()[lo..hi],
                mode,
            )
        };
        let (specs, split) = match standardization {
            Standardization::None => (vec![StandardizationSpec::identity(d)], n),
            Standardization::Fit => (vec![fit(0, n, &ModeChoice::BestSample)?], n),
            Standardization::FitWithMode(mode) => (vec![fit(0, n, mode)?], n),
            Standardization::CrossFit(mode) => {
                if n < 4 {
                    return Err(Error::InvalidInput(format!(
                        "cross-fitting needs at least 4 draws, got {n}"
                    )));
                }
                let h = n / 2;
                (vec![fit(h, n, mode)?, fit(0, h, mode)?], h)
            }
            Standardization::Spec(spec) => {
                if spec.dim() != d {
                    return Err(Error::InvalidInput(format!(
                        "standardization has dimension {} but the sample has {d}",
                        spec.dim()
                    )));
                }
                (vec![spec.clone()], n)
            }
        };
        let mut folds = Vec::with_capacity(specs.len());
        for spec in specs {
            let log_g_center = log_g(&spec.mode);
            if !log_g_center.is_finite() {
                return Err(Error::EstimatorBreakdown {
                    index: 0,
                    reason: format!("log target at the inflation center is {log_g_center}"),
                });
            }
            folds.push(Fold { spec, log_g_center });
        }
        let radii = sample
            .iter()
            .enumerate()
            .map(|(t, theta)| {
                let f = if t < split {
                    &folds[0]
                } else {
                    &folds[folds.len() - 1]
                };
                norm(&f.spec.apply(theta))
            })
            .collect();
        Ok(Self {
            sample,
            log_g,
            folds,
            split,
            radii,
        })
    }

    /// Standardization of the first fold (the only one unless cross-fitting).
    pub fn spec(&self) -> &StandardizationSpec {
        &self.folds[0].spec
    }

    /// Inflation configuration of the first fold in standardized coordinates.
    pub fn config(&self, k: f64) -> Result<InflationConfig> {
        self.fold_config(&self.folds[0], k)
    }

    fn fold_config(&self, fold: &Fold, k: f64) -> Result<InflationConfig> {
        InflationConfig::new(
            k,
            fold.log_g_center + fold.spec.log_jacobian,
            self.sample.dim(),
        )
    }

    /// `log g_Pk(θ_t) - log g(θ_t)` for every draw.
    pub fn log_ratios(&self, k: f64) -> Result<Vec<f64>> {
        let cfgs = self
            .folds
            .iter()
            .map(|f| self.fold_config(f, k))
            .collect::<Result<Vec<_>>>()?;
        let log_g = &self.log_g;
        let out: Vec<f64> = (0..self.sample.len())
            .into_par_iter()
            .map(|t| {
                let i = if t < self.split {
                    0
                } else {
                    self.folds.len() - 1
                };
                let (fold, cfg) = (&self.folds[i], &cfgs[i]);
                let lg = self.sample.log_g()[t];
                match cfg.shrink_factor(self.radii[t]) {
                    None => fold.log_g_center - lg,
                    Some(f) => {
                        let p: Vec<f64> = self
                            .sample
                            .draw(t)
                            .iter()
                            .zip(&fold.spec.mode)
                            .map(|(x, c)| c + f * (x - c))
                            .collect();
                        log_g(&p) - lg
                    }
                }
            })
            .collect();
        if let Some(i) = out.iter().position(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::EstimatorBreakdown {
                index: i,
                reason: format!("inflated log density ratio is {}", out[i]),
            });
        }
        Ok(out)
    }

    pub fn estimate(&self, k: f64) -> Result<EvidenceEstimate> {
        let delta = self.log_ratios(k)?;
        idr_from_log_ratios(&delta, k, self.sample.ess())
    }

    pub fn search(&self, k_grid: &[f64]) -> Result<KGridResult> {
        check_grid(k_grid)?;
        let mut rows = Vec::new();
        let mut estimates = Vec::new();
        let mut failures = Vec::new();
        for &k in k_grid {
            match self.estimate(k) {
                Ok(e) => {
                    rows.push(KGridRow::from_estimate(k, &e));
                    estimates.push(e);
                }
                Err(err @ Error::EstimatorUndefined { .. }) => failures.push((k, err.to_string())),
                Err(err) => return Err(err),
            }
        }
        let selected_index = select_k(&rows).ok_or(Error::NoValidK)?;
        let mut best = estimates.swap_remove(selected_index);
        best.k_opt = Some(rows[selected_index].k);
        Ok(KGridResult {
            rows,
            selected_index,
            failures,
            estimate: Some(best),
        })
    }
}

fn check_grid(k_grid: &[f64]) -> Result<()> {
    if k_grid.is_empty() {
        return Err(Error::InvalidInput("k grid is empty".into()));
    }
    if k_grid.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
        return Err(Error::InvalidInput(
            "k grid values must be positive and finite".into(),
        ));
    }
    if k_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "k grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Excess `mean(ratio) - 1` as `exp(shift) * mean_w`, plus `sd_w`.
fn excess_moments(delta: &[f64]) -> (f64, f64, f64) {
    let max = delta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (shift, w): (f64, Vec<f64>) = if max <= EXP_SAFE {
        let shift = max.max(0.0);
        let scale = (-shift).exp();
        (shift, delta.iter().map(|&v| v.exp_m1() * scale).collect())
    } else {
        let floor = (-max).exp();
        (
            max,
            delta.iter().map(|&v| (v - max).exp() - floor).collect(),
        )
    };
    (shift, mean(&w), sample_variance(&w).sqrt())
}

/// Log of the IDR estimate from per-draw log density ratios.
pub fn idr_log_estimate(delta: &[f64], k: f64) -> Result<f64> {
    let (shift, mean_w, _) = excess_moments(delta);
    if !(mean_w > 0.0) {
        return Err(Error::EstimatorUndefined {
            k,
            excess: mean_w * shift.exp(),
        });
    }
    Ok(k.ln() - shift - mean_w.ln())
}

/// IDR estimate from per-draw log density ratios `log g_Pk(θ_t) - log g(θ_t)`.
pub fn idr_from_log_ratios(delta: &[f64], k: f64, ess: f64) -> Result<EvidenceEstimate> {
    let n = delta.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 draws, got {n}"
        )));
    }
    let (shift, mean_w, sd_w) = excess_moments(delta);
    if !(mean_w > 0.0) {
        return Err(Error::EstimatorUndefined {
            k,
            excess: mean_w * shift.exp(),
        });
    }
    let log_c = k.ln() - shift - mean_w.ln();
    let rmse = sd_w / (mean_w * (n as f64).sqrt());
    let mut e = EvidenceEstimate::new(Method::Idr, log_c, rmse, n, ess);
    e.k_opt = Some(k);
    Ok(e)
}

/// Inflated density ratio estimate for a single inflation mass `k`.
pub fn idr<F>(
    sample: &LogDensitySample,
    log_g: F,
    k: f64,
    standardization: &Standardization,
) -> Result<EvidenceEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    IdrProblem::new(sample, log_g, standardization)?.estimate(k)
}

/// Evaluates IDR on every grid value of `k` (reusing the same draws) and
/// selects the one with the smallest ESS-corrected error.
pub fn idr_k_search<F>(
    sample: &LogDensitySample,
    log_g: F,
    k_grid: &[f64],
    standardization: &Standardization,
) -> Result<KGridResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    IdrProblem::new(sample, log_g, standardization)?.search(k_grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KGridRow {
    pub k: f64,
    pub log_c: f64,
    pub rmse_delta: f64,
    pub rmse_delta_ess: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl KGridRow {
    fn from_estimate(k: f64, e: &EvidenceEstimate) -> Self {
        Self {
            k,
            log_c: e.log_c,
            rmse_delta: e.rmse_delta,
            rmse_delta_ess: e.rmse_delta_ess,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KGridResult {
    pub rows: Vec<KGridRow>,
    pub selected_index: usize,
    /// Grid values for which the estimator was undefined.
    pub failures: Vec<(f64, String)>,
    /// Full estimate at the selected `k`, when produced by a search.
    pub estimate: Option<EvidenceEstimate>,
}

impl KGridResult {
    /// Selects among precomputed rows (sorted by increasing `k`).
    pub fn from_rows(rows: Vec<KGridRow>) -> Result<Self> {
        check_grid(&rows.iter().map(|r| r.k).collect::<Vec<_>>())?;
        let selected_index = select_k(&rows).ok_or(Error::NoValidK)?;
        Ok(Self {
            rows,
            selected_index,
            failures: Vec::new(),
            estimate: None,
        })
    }

    pub fn selected(&self) -> &KGridRow {
        &self.rows[self.selected_index]
    }
}

/// Index of the smallest ESS-corrected rmse; ties go to the smaller `k`.
fn select_k(rows: &[KGridRow]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, row) in rows.iter().enumerate() {
        if row.rmse_delta_ess.is_nan() {
            continue;
        }
        match best {
            Some(b) if rows[b].rmse_delta_ess <= row.rmse_delta_ess => {}
            _ => best = Some(i),
        }
    }
    best
}
