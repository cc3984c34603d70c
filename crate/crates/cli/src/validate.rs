//! Synthetic targets with known normalizing constants.

use std::f64::consts::LN_2;

use anyhow::Result;
use evidenced::evidence::{idr_k_search, KGridResult, LogDensitySample, Standardization};
use evidenced::inflation::ModeChoice;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Φ(z)`, accurate far into the lower tail.
fn ln_std_normal_cdf(z: f64) -> f64 {
    if z > -30.0 {
        (0.5 * erfc(-z / std::f64::consts::SQRT_2)).ln()
    } else {
        ln_normal_cdf_tail(z)
    }
}

/// Mills-ratio asymptotics for `z ≪ 0`.
fn ln_normal_cdf_tail(z: f64) -> f64 {
    let z2 = z * z;
    -0.5 * z2 - (-z).ln() - LN_SQRT_2PI
        + (-1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2)).ln_1p()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// Independent normal coordinates.
    Gaussian { mean: Vec<f64>, sd: Vec<f64> },
    /// `x = loc + L s` with independent skew-normal `s_i` of shape `shape`,
    /// `L` lower triangular.
    SkewNormal {
        loc: Vec<f64>,
        chol: Vec<Vec<f64>>,
        shape: f64,
    },
    /// Equal-weight mixture of two isotropic normals.
    Mixture { means: [Vec<f64>; 2], sd: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub name: String,
    /// Injected log normalizing constant.
    pub log_c: f64,
    pub family: Family,
}

impl Target {
    pub fn dim(&self) -> usize {
        match &self.family {
            Family::Gaussian { mean, .. } => mean.len(),
            Family::SkewNormal { loc, .. } => loc.len(),
            Family::Mixture { means, .. } => means[0].len(),
        }
    }

    /// `log_c + log p(x)` with `p` normalized.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.log_c
            + match &self.family {
                Family::Gaussian { mean, sd } => x
                    .iter()
                    .zip(mean)
                    .zip(sd)
                    .map(|((x, m), s)| -0.5 * ((x - m) / s).powi(2) - s.ln() - LN_SQRT_2PI)
                    .sum(),
                Family::SkewNormal { loc, chol, shape } => {
                    // forward substitution for s = L⁻¹ (x - loc)
                    let d = loc.len();
                    let mut s = vec![0.0; d];
                    let mut lp = 0.0;
                    for i in 0..d {
                        let acc: f64 = (0..i).map(|j| chol[i][j] * s[j]).sum();
                        s[i] = (x[i] - loc[i] - acc) / chol[i][i];
                        lp += LN_2 - 0.5 * s[i] * s[i] - LN_SQRT_2PI
                            + ln_std_normal_cdf(shape * s[i])
                            - chol[i][i].ln();
                    }
                    lp
                }
                Family::Mixture { means, sd } => {
                    let d = x.len() as f64;
                    let comp = |m: &[f64], s: f64| {
                        let q: f64 = x.iter().zip(m).map(|(x, m)| (x - m) * (x - m)).sum();
                        -0.5 * q / (s * s) - d * (s.ln() + LN_SQRT_2PI)
                    };
                    let a = comp(&means[0], sd[0]);
                    let b = comp(&means[1], sd[1]);
                    let hi = a.max(b);
                    hi + ((a - hi).exp() + (b - hi).exp()).ln() - LN_2
                }
            }
    }

    /// `n` exact draws, row-major.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let d = self.dim();
        let mut out = Vec::with_capacity(n * d);
        let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
        for _ in 0..n {
            match &self.family {
                Family::Gaussian { mean, sd } => {
                    out.extend(mean.iter().zip(sd).map(|(m, s)| m + s * z()));
                }
                Family::SkewNormal { loc, chol, shape } => {
                    let delta = shape / (1.0 + shape * shape).sqrt();
                    let s: Vec<f64> = (0..d)
                        .map(|_| {
                            let (u0, u1) = (z(), z());
                            delta * u0.abs() + (1.0 - delta * delta).sqrt() * u1
                        })
                        .collect();
                    out.extend(
                        (0..d).map(|i| loc[i] + (0..=i).map(|j| chol[i][j] * s[j]).sum::<f64>()),
                    );
                }
                Family::Mixture { means, sd } => {
                    let c = if z() < 0.0 { 0 } else { 1 };
                    out.extend(means[c].iter().map(|m| m + sd[c] * z()));
                }
            }
        }
        out
    }
}

/// The default suite: Gaussians in 1 and 100 dimensions, a correlated 5-d
/// skew normal and two-component mixtures in 2, 3 and 10 dimensions.
pub fn default_targets() -> Vec<Target> {
    let ramp = |d: usize, lo: f64, hi: f64| -> Vec<f64> {
        (0..d)
            .map(|i| lo + (hi - lo) * i as f64 / (d.max(2) - 1) as f64)
            .collect()
    };
    let chol5: Vec<Vec<f64>> = (0..5)
        .map(|i| {
            (0..5)
                .map(|j| match i.cmp(&j) {
                    std::cmp::Ordering::Equal => 1.0 + 0.25 * i as f64,
                    std::cmp::Ordering::Greater => 0.3,
                    std::cmp::Ordering::Less => 0.0,
                })
                .collect()
        })
        .collect();
    let mixture = |name: &str, d: usize, log_c: f64| Target {
        name: name.into(),
        log_c,
        family: Family::Mixture {
            means: [vec![0.0; d], {
                let mut m = vec![0.0; d];
                m[0] = 2.0;
                m
            }],
            sd: [1.0, 0.7],
        },
    };
    vec![
        Target {
            name: "gauss-1d".into(),
            log_c: 0.0,
            family: Family::Gaussian {
                mean: vec![1.0],
                sd: vec![2.0],
            },
        },
        Target {
            name: "gauss-100d".into(),
            log_c: 0.0,
            family: Family::Gaussian {
                mean: ramp(100, -1.0, 1.0),
                sd: ramp(100, 0.5, 2.0),
            },
        },
        Target {
            name: "skew-normal-5d".into(),
            log_c: 3.467,
            family: Family::SkewNormal {
                loc: ramp(5, -1.0, 1.0),
                chol: chol5,
                shape: 4.0,
            },
        },
        mixture("mixture-2d", 2, 8f64.ln()),
        mixture("mixture-3d", 3, 16f64.ln()),
        mixture("mixture-10d", 10, 0.0),
    ]
}

/// Decades from `10⁻⁸` to `10³⁰`.
pub fn default_validation_grid() -> Vec<f64> {
    (-8..=30).map(|e| 10f64.powi(e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub name: String,
    pub dim: usize,
    pub log_c_true: f64,
    pub grid: Option<KGridResult>,
    pub log_c_hat: Option<f64>,
    pub rmse: Option<f64>,
    pub k_opt: Option<f64>,
    /// `|log ĉ - log c| ≤ 3·rmse`.
    pub pass: bool,
    pub error: Option<String>,
}

pub fn run_target(target: &Target, n: usize, seed: u64, k_grid: &[f64]) -> Result<Outcome> {
    let d = target.dim();
    let draws = target.sample(n, seed);
    let log_g: Vec<f64> = draws
        .chunks_exact(d)
        .map(|x| target.log_density(x))
        .collect();
    let sample = LogDensitySample::from_flat(draws, d, log_g)?;
    let result = idr_k_search(
        &sample,
        |x: &[f64]| target.log_density(x),
        k_grid,
        &Standardization::CrossFit(ModeChoice::SampleMean),
    );
    let mut out = Outcome {
        name: target.name.clone(),
        dim: d,
        log_c_true: target.log_c,
        grid: None,
        log_c_hat: None,
        rmse: None,
        k_opt: None,
        pass: false,
        error: None,
    };
    match result {
        Ok(grid) => {
            let e = grid.estimate.clone().expect("search fills the estimate");
            out.pass = (e.log_c - target.log_c).abs() <= 3.0 * e.rmse_delta;
            out.log_c_hat = Some(e.log_c);
            out.rmse = Some(e.rmse_delta);
            out.k_opt = e.k_opt;
            out.grid = Some(grid);
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    Ok(out)
}
