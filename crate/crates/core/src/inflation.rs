//! Inflated (perturbed) densities and sample standardization.
//!
//! The inflated density `g_Pk` keeps `g(0)` constant on a ball of radius
//! `r_k` around the origin and pushes the rest of `g` radially outward so that
//! the total mass grows from `c` to `c + k`. In one dimension this is the
//! familiar shift `g(θ ∓ r_k)` outside `[-r_k, r_k]`. In `d ≥ 2` the outward
//! push maps radius `s` to `(s^d + r_k^d)^{1/d}`, which preserves volume, so
//! the only extra mass is the plateau `g(0)·V_d(r_k) = k`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::log_unit_ball_volume;

/// Eigenvalues below this fraction of the largest are treated as collapsed.
pub const SINGULAR_EIGENVALUE_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InflationConfig {
    pub k: f64,
    pub r_k: f64,
    pub d: usize,
    /// Log of the plateau height `g(0)`.
    pub log_g0: f64,
}

impl InflationConfig {
    pub fn new(k: f64, log_g0: f64, d: usize) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "inflation mass must be positive, got {k}"
            )));
        }
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if !log_g0.is_finite() {
            return Err(Error::InvalidInput(format!(
                "log g(0) must be finite, got {log_g0}"
            )));
        }
        let r_k = if d == 1 {
            0.5 * k * (-log_g0).exp()
        } else {
            radius_for_log_mass(k.ln(), log_g0, d)
        };
        Ok(Self { k, r_k, d, log_g0 })
    }

    pub fn g0(&self) -> f64 {
        self.log_g0.exp()
    }

    /// Radial scale applied to a point at distance `radius` from the origin,
    /// or `None` when the point lies on the plateau.
    pub fn shrink_factor(&self, radius: f64) -> Option<f64> {
        shrink_factor(radius, self.r_k, self.d)
    }
}

/// Plateau radius whose ball carries mass `k` at height `g0`.
///
/// `d = 1` gives `r_k = k / (2 g0)`.
pub fn radius_for_mass(k: f64, g0: f64, d: usize) -> f64 {
    if d == 1 {
        return k / (2.0 * g0);
    }
    radius_for_log_mass(k.ln(), g0.ln(), d)
}

/// [`radius_for_mass`] with the mass and the height given on the log scale,
/// which keeps posterior-scale heights such as `exp(-7000)` representable.
pub fn radius_for_log_mass(log_k: f64, log_g0: f64, d: usize) -> f64 {
    let log_volume = log_k - log_g0;
    if d == 1 {
        return 0.5 * log_volume.exp();
    }
    ((log_volume - log_unit_ball_volume(d)) / d as f64).exp()
}

fn shrink_factor(radius: f64, r_k: f64, d: usize) -> Option<f64> {
    if radius <= r_k {
        return None;
    }
    if d == 1 {
        return Some((radius - r_k) / radius);
    }
    // (1 - (r/ρ)^d)^{1/d}, accurate when (r/ρ)^d is tiny
    let x = (d as f64 * (r_k.ln() - radius.ln())).exp();
    Some(((-x).ln_1p() / d as f64).exp())
}

/// Maps a point outside the plateau to the point whose `g` value the
/// inflated density takes there.
pub fn shrink_point(theta: &[f64], r_k: f64) -> Option<Vec<f64>> {
    let d = theta.len();
    if d == 1 {
        let t = theta[0];
        if t.abs() <= r_k {
            return None;
        }
        return Some(vec![t - r_k.copysign(t)]);
    }
    let radius = norm(theta);
    shrink_factor(radius, r_k, d).map(|f| theta.iter().map(|v| v * f).collect())
}

/// Inverse of [`shrink_point`]: pushes any point outward past the plateau.
pub fn inflate_point(theta: &[f64], r_k: f64) -> Vec<f64> {
    let d = theta.len();
    if d == 1 {
        let t = theta[0];
        return vec![t + r_k.copysign(t)];
    }
    let s = norm(theta);
    if s == 0.0 {
        return theta.to_vec();
    }
    let log_rho = (s.ln() * d as f64).max(r_k.ln() * d as f64)
        + (-(d as f64) * (s.ln() - r_k.ln()).abs()).exp().ln_1p();
    let rho = (log_rho / d as f64).exp();
    theta.iter().map(|v| v * rho / s).collect()
}

/// Log of the inflated density at `theta`.
pub fn inflate_log_density<F>(log_g: F, cfg: &InflationConfig, theta: &[f64]) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    match shrink_point(theta, cfg.r_k) {
        None => cfg.log_g0,
        Some(p) => log_g(&p),
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// How the standardization center is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub enum ModeChoice {
    /// The draw with the highest log target value.
    #[default]
    BestSample,
    SampleMean,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationSpec {
    pub mode: Vec<f64>,
    /// Row-major `d × d` symmetric inverse square root of the sample covariance.
    pub whitening: Vec<f64>,
    /// Row-major symmetric square root of the sample covariance.
    pub unwhitening: Vec<f64>,
    /// `log |det unwhitening|`: the log-Jacobian added to `log g` when the
    /// target is re-expressed in standardized coordinates.
    pub log_jacobian: f64,
}

impl StandardizationSpec {
    pub fn identity(d: usize) -> Self {
        let mut eye = vec![0.0; d * d];
        for i in 0..d {
            eye[i * d + i] = 1.0;
        }
        Self {
            mode: vec![0.0; d],
            whitening: eye.clone(),
            unwhitening: eye,
            log_jacobian: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mode.len()
    }

    /// `W (θ - mode)`.
    pub fn apply(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let centered: Vec<f64> = theta.iter().zip(&self.mode).map(|(a, b)| a - b).collect();
        (0..d)
            .map(|i| {
                let row = &self.whitening[i * d..(i + 1) * d];
                row.iter().zip(&centered).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// `mode + W⁻¹ z`.
    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| {
                let row = &self.unwhitening[i * d..(i + 1) * d];
                self.mode[i] + row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }

    /// Log density of the standardized target; it has the same total mass as
    /// `log_g`.
    pub fn adjust<'a, F>(&'a self, log_g: F) -> impl Fn(&[f64]) -> f64 + 'a
    where
        F: Fn(&[f64]) -> f64 + 'a,
    {
        move |z: &[f64]| log_g(&self.invert(z)) + self.log_jacobian
    }
}

/// A standardized copy of a sample.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub spec: StandardizationSpec,
    /// Row-major `T × d` standardized draws.
    pub draws: Vec<f64>,
    /// Adjusted log target values at the standardized draws.
    pub log_g: Vec<f64>,
}

/// Sample mean and covariance of row-major `T × d` draws.
pub fn sample_moments(draws: &[f64], d: usize) -> (DVector<f64>, DMatrix<f64>) {
    let t = draws.len() / d;
    let mut mean = DVector::zeros(d);
    for row in draws.chunks_exact(d) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean /= t as f64;
    let mut cov = DMatrix::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in draws.chunks_exact(d) {
        for j in 0..d {
            centered[j] = row[j] - mean[j];
        }
        for i in 0..d {
            let ci = centered[i];
            for j in i..d {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / (t as f64 - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    (mean, cov)
}

/// Builds the standardization for row-major `T × d` draws with matching log
/// target values.
pub fn fit_standardization(
    draws: &[f64],
    d: usize,
    log_g: &[f64],
    mode: &ModeChoice,
) -> Result<StandardizationSpec> {
    let t = log_g.len();
    if d == 0 || draws.len() != t * d || t < 2 {
        return Err(Error::InvalidInput(format!(
            "standardization needs at least 2 draws of dimension >= 1 (got {t} draws, {} values, d = {d})",
            draws.len()
        )));
    }
    let (mean, cov) = sample_moments(draws, d);
    let eig = SymmetricEigen::new(cov);
    let max_eig = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let collapsed: Vec<Vec<f64>> = (0..d)
        .filter(|&i| !(eig.eigenvalues[i] > SINGULAR_EIGENVALUE_RATIO * max_eig) || max_eig <= 0.0)
        .map(|i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    if !collapsed.is_empty() {
        return Err(Error::DegenerateSample {
            directions: collapsed,
        });
    }
    let v = &eig.eigenvectors;
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let whitening = v * inv_sqrt * v.transpose();
    let unwhitening = v * sqrt * v.transpose();
    let log_jacobian = 0.5 * eig.eigenvalues.iter().map(|l| l.ln()).sum::<f64>();

    let center = match mode {
        ModeChoice::BestSample => {
            let best = log_g
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
                )
                .0;
            draws[best * d..(best + 1) * d].to_vec()
        }
        ModeChoice::SampleMean => mean.iter().copied().collect(),
        ModeChoice::Given(m) => {
            if m.len() != d {
                return Err(Error::InvalidInput(format!(
                    "mode has dimension {} but the sample has dimension {d}",
                    m.len()
                )));
            }
            m.clone()
        }
    };
    let row_major = |m: &DMatrix<f64>| -> Vec<f64> {
        (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)])
            .collect()
    };
    Ok(StandardizationSpec {
        mode: center,
        whitening: row_major(&whitening),
        unwhitening: row_major(&unwhitening),
        log_jacobian,
    })
}

/// Standardizes a sample with respect to a (local) mode and its sample
/// covariance.
pub fn standardize(
    draws: &[f64],
    d: usize,
    log_g: &[f64],
    mode: &ModeChoice,
) -> Result<Standardized> {
    let spec = fit_standardization(draws, d, log_g, mode)?;
    let z: Vec<f64> = draws
        .chunks_exact(d)
        .flat_map(|row| spec.apply(row))
        .collect();
    let adjusted = log_g.iter().map(|v| v + spec.log_jacobian).collect();
    Ok(Standardized {
        spec,
        draws: z,
        log_g: adjusted,
    })
}
