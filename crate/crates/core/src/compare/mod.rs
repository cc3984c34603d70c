//! Bayes factors between substitution models and between fixed topologies.
//!
//! Everything is on the natural-log scale: `log BF₁₀ = log ĉ₁ − log ĉ₀`.

mod pipeline;
mod trees;

pub use pipeline::{
    default_k_grid, derive_seed, evidence_from_chain, run_evidence, EvidenceConfig, EvidenceRun,
};
pub use trees::{
    posterior_probabilities, render_tree_selection, tree_select, TreeEntry, TreeSelection,
};

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{align, confidence_interval, mc_replicate_rmse, EvidenceEstimate, Method};
use crate::numeric::{mean, sample_variance};

/// Natural-log thresholds of the Jeffreys scale as tabulated by Kass and
/// Raftery: BF of √10, 10, 10^1.5 and 100.
pub const LOG_BF_SUBSTANTIAL: f64 = 1.151_292_546_497_023;
pub const LOG_BF_STRONG: f64 = std::f64::consts::LN_10;
pub const LOG_BF_VERY_STRONG: f64 = 3.453_877_639_491_069;
pub const LOG_BF_DECISIVE: f64 = 4.605_170_185_988_092;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Favors {
    M1,
    M0,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strength {
    NotWorthMentioning,
    Substantial,
    Strong,
    VeryStrong,
    Decisive,
}

impl Strength {
    pub fn label(self) -> &'static str {
        match self {
            Strength::NotWorthMentioning => "not worth more than a bare mention",
            Strength::Substantial => "substantial",
            Strength::Strong => "strong",
            Strength::VeryStrong => "very strong",
            Strength::Decisive => "decisive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interpretation {
    pub favors: Favors,
    pub strength: Strength,
}

/// Kass–Raftery reading of a natural-log Bayes factor.
pub fn interpret(log_bf: f64) -> Interpretation {
    let a = log_bf.abs();
    let strength = if a > LOG_BF_DECISIVE {
        Strength::Decisive
    } else if a > LOG_BF_VERY_STRONG {
        Strength::VeryStrong
    } else if a > LOG_BF_STRONG {
        Strength::Strong
    } else if a > LOG_BF_SUBSTANTIAL {
        Strength::Substantial
    } else {
        Strength::NotWorthMentioning
    };
    let favors = if log_bf > 0.0 {
        Favors::M1
    } else if log_bf < 0.0 {
        Favors::M0
    } else {
        Favors::Neither
    };
    Interpretation { favors, strength }
}

/// All `R₁ × R₀` pairwise log Bayes factors of two replicate sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateBf {
    pub mean: f64,
    /// Standard deviation over the pairings (`n - 1` denominator).
    pub sd: f64,
    /// `sd / √(R₁·R₀)`.
    pub se: f64,
    /// `mean ± 2·sd`; the interval used by reports.
    pub ci: (f64, f64),
    /// `mean ± 2·se`.
    pub ci_se: (f64, f64),
    /// `matrix[i][j] = logs1[i] - logs0[j]`.
    pub matrix: Vec<Vec<f64>>,
}

pub fn replicate_bf_ci(logs1: &[f64], logs0: &[f64]) -> Result<ReplicateBf> {
    if logs1.len() < 2 || logs0.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 replicates per model, got {} and {}",
            logs1.len(),
            logs0.len()
        )));
    }
    if logs1.iter().chain(logs0).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "replicate log evidences must be finite".into(),
        ));
    }
    let matrix: Vec<Vec<f64>> = logs1
        .iter()
        .map(|a| logs0.iter().map(|b| a - b).collect())
        .collect();
    let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
    let m = mean(&flat);
    let sd = sample_variance(&flat).sqrt();
    let se = sd / (flat.len() as f64).sqrt();
    Ok(ReplicateBf {
        mean: m,
        sd,
        se,
        ci: (m - 2.0 * sd, m + 2.0 * sd),
        ci_se: (m - 2.0 * se, m + 2.0 * se),
        matrix,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesFactorReport {
    /// `per_model[1].log_c - per_model[0].log_c`.
    pub log_bf: f64,
    pub method: Method,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `[M₀, M₁]`.
    pub per_model: [EvidenceEstimate; 2],
    pub interpretation: Interpretation,
    /// Pairwise replicate summary when Monte Carlo replicates were supplied.
    pub replicates: Option<ReplicateBf>,
    /// Which spread the interval uses.
    pub ci_basis: String,
}

fn check_pair(e1: &EvidenceEstimate, e0: &EvidenceEstimate) -> Result<()> {
    if let (Some(a), Some(b)) = (&e1.data_fingerprint, &e0.data_fingerprint) {
        if a != b {
            return Err(Error::DataMismatch(a.clone(), b.clone()));
        }
    }
    if !(e1.log_c.is_finite() && e0.log_c.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "log evidences must be finite, got {} and {}",
            e1.log_c, e0.log_c
        )));
    }
    Ok(())
}

/// `log BF₁₀` from single estimates.
///
/// Without replicates the interval is `log BF ± 2·√(ρ₁² + ρ₀²)` where `ρ` is
/// each estimate's ESS-corrected relative error, which is the standard
/// deviation of `log ĉ` to first order.
pub fn bayes_factor(e1: &EvidenceEstimate, e0: &EvidenceEstimate) -> Result<BayesFactorReport> {
    check_pair(e1, e0)?;
    let log_bf = e1.log_c - e0.log_c;
    let spread = e1.rmse_delta_ess.hypot(e0.rmse_delta_ess);
    Ok(BayesFactorReport {
        log_bf,
        method: e1.method,
        ci_low: log_bf - 2.0 * spread,
        ci_high: log_bf + 2.0 * spread,
        per_model: [e0.clone(), e1.clone()],
        interpretation: interpret(log_bf),
        replicates: None,
        ci_basis: "delta: ±2·sqrt(rmse1² + rmse0²)".into(),
    })
}

/// Pools replicate estimates of one model: `log_c` becomes the replicate
/// mean on the log scale and `rmse_mc` the replicate RMSE.
pub fn pool_replicates(reps: &[EvidenceEstimate]) -> Result<EvidenceEstimate> {
    let first = reps
        .first()
        .ok_or_else(|| Error::InvalidInput("no replicates".into()))?;
    if let Some(e) = reps.iter().find(|e| e.method != first.method) {
        return Err(Error::InvalidInput(format!(
            "replicates mix {} and {}",
            first.method.label(),
            e.method.label()
        )));
    }
    for e in reps {
        check_pair(e, first)?;
    }
    let logs: Vec<f64> = reps.iter().map(|e| e.log_c).collect();
    let mut pooled = first.clone();
    pooled.log_c = mean(&logs);
    pooled.rmse_delta = mean(&reps.iter().map(|e| e.rmse_delta).collect::<Vec<_>>());
    pooled.rmse_delta_ess = mean(&reps.iter().map(|e| e.rmse_delta_ess).collect::<Vec<_>>());
    pooled.rmse_mc = if reps.len() >= 2 {
        Some(mc_replicate_rmse(&logs)?)
    } else {
        None
    };
    pooled.rmse_boot = None;
    let (lo, hi) = confidence_interval(pooled.log_c, pooled.rmse_delta_ess);
    pooled.ci_low = lo;
    pooled.ci_high = hi;
    Ok(pooled)
}

/// `log BF₁₀` from Monte Carlo replicates of each model: the mean over all
/// pairings with interval `mean ± 2·SD` over the pairings.
pub fn bayes_factor_replicated(
    reps1: &[EvidenceEstimate],
    reps0: &[EvidenceEstimate],
) -> Result<BayesFactorReport> {
    let e1 = pool_replicates(reps1)?;
    let e0 = pool_replicates(reps0)?;
    check_pair(&e1, &e0)?;
    let logs = |r: &[EvidenceEstimate]| r.iter().map(|e| e.log_c).collect::<Vec<_>>();
    let rep = replicate_bf_ci(&logs(reps1), &logs(reps0))?;
    let log_bf = e1.log_c - e0.log_c;
    Ok(BayesFactorReport {
        log_bf,
        method: e1.method,
        ci_low: rep.ci.0,
        ci_high: rep.ci.1,
        per_model: [e0, e1],
        interpretation: interpret(log_bf),
        replicates: Some(rep),
        ci_basis: "replicates: mean ± 2·SD over all pairings".into(),
    })
}

/// Text summary: per-model evidences, the log Bayes factor and, if present,
/// both replicate spreads.
pub fn render_bayes_factors(reports: &[BayesFactorReport], labels: [&str; 2]) -> String {
    let header = ["method", "log_bf", "ci", "favors", "strength"];
    let rows: Vec<[String; 5]> = reports
        .iter()
        .map(|r| {
            [
                r.method.label().to_string(),
                format!("{:.4}", r.log_bf),
                format!("[{:.4}, {:.4}]", r.ci_low, r.ci_high),
                match r.interpretation.favors {
                    Favors::M1 => labels[1].to_string(),
                    Favors::M0 => labels[0].to_string(),
                    Favors::Neither => "-".to_string(),
                },
                r.interpretation.strength.label().to_string(),
            ]
        })
        .collect();
    let mut out = format!("log BF({} vs {})\n", labels[1], labels[0]);
    out.push_str(&align(&header, &rows));
    for r in reports {
        if let Some(rep) = &r.replicates {
            let _ = writeln!(
                out,
                "{}: {} pairings, SD {:.4}, SE {:.4}, ±2·SE interval [{:.4}, {:.4}]",
                r.method.label(),
                rep.matrix.len() * rep.matrix[0].len(),
                rep.sd,
                rep.se,
                rep.ci_se.0,
                rep.ci_se.1
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::harmonic_mean;
    use proptest::prelude::*;

    fn est(log_c: f64) -> EvidenceEstimate {
        let mut e = harmonic_mean(&[log_c, log_c]).unwrap();
        e.method = Method::Idr;
        e
    }

    #[test]
    fn jeffreys_thresholds() {
        assert!((LOG_BF_SUBSTANTIAL - 10f64.sqrt().ln()).abs() < 1e-15);
        assert!((LOG_BF_VERY_STRONG - 10f64.powf(1.5).ln()).abs() < 1e-15);
        assert!((LOG_BF_DECISIVE - 100f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn hadamard_example() {
        let r = bayes_factor(&est(-595.5919), &est(-611.8571)).unwrap();
        assert!((r.log_bf - 16.2652).abs() < 1e-9);
        assert_eq!(
            r.interpretation,
            Interpretation {
                favors: Favors::M1,
                strength: Strength::Decisive
            }
        );
        assert!((r.log_bf - (r.per_model[1].log_c - r.per_model[0].log_c)).abs() < 1e-12);
        let eq = bayes_factor(&est(-3.0), &est(-3.0)).unwrap();
        assert_eq!(eq.log_bf, 0.0);
        assert_eq!(eq.interpretation.favors, Favors::Neither);
    }

    #[test]
    fn fingerprints_must_match() {
        let a = est(-1.0).with_fingerprint("aa");
        let b = est(-2.0).with_fingerprint("bb");
        assert!(matches!(bayes_factor(&a, &b), Err(Error::DataMismatch(..))));
        assert!(bayes_factor(&a, &est(-2.0).with_fingerprint("aa")).is_ok());
    }

    #[test]
    fn replicate_hand_example() {
        let r = replicate_bf_ci(&[1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert!((r.mean - 1.5).abs() < 1e-15);
        assert!((r.sd - 0.5774).abs() < 5e-5);
        assert!((r.ci.0 - 0.3453).abs() < 5e-5 && (r.ci.1 - 2.6547).abs() < 5e-5);
        assert!((r.se - r.sd / 2.0).abs() < 1e-15);
        let flat = replicate_bf_ci(&[3.0; 4], &[1.0; 3]).unwrap();
        assert_eq!(flat.ci, (2.0, 2.0));
        assert!(replicate_bf_ci(&[1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn replicated_report_brackets_its_estimate() {
        let reps1: Vec<_> = [-10.0, -10.2, -9.9].map(est).to_vec();
        let reps0: Vec<_> = [-13.0, -13.1].map(est).to_vec();
        let r = bayes_factor_replicated(&reps1, &reps0).unwrap();
        assert!(r.ci_low <= r.log_bf && r.log_bf <= r.ci_high);
        assert!((r.log_bf - (r.per_model[1].log_c - r.per_model[0].log_c)).abs() < 1e-12);
        assert!((r.log_bf - r.replicates.as_ref().unwrap().mean).abs() < 1e-12);
        assert!(r.per_model[0].rmse_mc.is_some());
        let text = render_bayes_factors(&[r], ["M0", "M1"]);
        assert!(text.contains("6 pairings"));
    }

    proptest! {
        #[test]
        fn antisymmetric_and_additive(a in -1e4f64..1e4, b in -1e4f64..1e4, c in -1e4f64..1e4) {
            let (ea, eb, ec) = (est(a), est(b), est(c));
            let ab = bayes_factor(&ea, &eb).unwrap().log_bf;
            let ba = bayes_factor(&eb, &ea).unwrap().log_bf;
            prop_assert_eq!(ab, -ba);
            let bc = bayes_factor(&eb, &ec).unwrap().log_bf;
            let ac = bayes_factor(&ea, &ec).unwrap().log_bf;
            prop_assert!((ac - (ab + bc)).abs() <= 1e-12 * (a.abs() + b.abs() + c.abs()).max(1.0));
        }
    }
}
