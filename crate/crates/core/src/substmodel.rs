//! Reversible nucleotide substitution models (JC69, GTR) with optional
//! discrete-gamma rate heterogeneity.
//!
//! States are ordered A, C, G, T; exchangeabilities AC, AG, AT, CG, CT, GT.
//! Rate matrices are scaled to one expected substitution per unit time, so
//! branch lengths are in expected substitutions per site.

use nalgebra::{Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf_inv;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

pub const N_STATES: usize = 4;

/// Default number of discrete-gamma categories.
pub const DEFAULT_GAMMA_CATEGORIES: usize = 4;

/// Exchangeability index pairs in AC, AG, AT, CG, CT, GT order.
pub const RHO_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

pub type TransitionMatrix = [[f64; N_STATES]; N_STATES];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "jc69")]
    Jc69,
    #[serde(rename = "gtr")]
    Gtr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionModel {
    kind: ModelKind,
    pi: [f64; 4],
    rho: [f64; 6],
    alpha: Option<f64>,
    n_categories: usize,
}

fn check_simplex<const N: usize>(name: &str, v: &[f64; N]) -> Result<()> {
    if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "{name} must be positive: {v:?}"
        )));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!(
            "{name} must sum to 1, sums to {s}"
        )));
    }
    Ok(())
}

impl SubstitutionModel {
    pub fn jc69() -> Self {
        Self {
            kind: ModelKind::Jc69,
            pi: [0.25; 4],
            rho: [1.0 / 6.0; 6],
            alpha: None,
            n_categories: 1,
        }
    }

    pub fn gtr(pi: [f64; 4], rho: [f64; 6]) -> Result<Self> {
        check_simplex("pi", &pi)?;
        check_simplex("rho", &rho)?;
        Ok(Self {
            kind: ModelKind::Gtr,
            pi,
            rho,
            alpha: None,
            n_categories: 1,
        })
    }

    /// Adds discrete-gamma rate heterogeneity with shape `alpha`.
    pub fn with_gamma(mut self, alpha: f64, n_categories: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "gamma shape must be positive, got {alpha}"
            )));
        }
        if n_categories < 2 {
            return Err(Error::InvalidInput(
                "gamma rate heterogeneity needs at least 2 categories".into(),
            ));
        }
        self.alpha = Some(alpha);
        self.n_categories = n_categories;
        Ok(self)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn pi(&self) -> &[f64; 4] {
        &self.pi
    }

    pub fn rho(&self) -> &[f64; 6] {
        &self.rho
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn n_categories(&self) -> usize {
        self.n_categories
    }

    /// Per-category relative rates (a single `1.0` without rate heterogeneity).
    pub fn category_rates(&self) -> Vec<f64> {
        match self.alpha {
            Some(a) => gamma_category_rates(a, self.n_categories),
            None => vec![1.0],
        }
    }
}

/// Rate matrix with its symmetrized eigendecomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    pub q: [[f64; 4]; 4],
    /// Factor that was divided out to reach unit expected rate.
    pub scale: f64,
    pi: [f64; 4],
    eigenvalues: [f64; 4],
    /// `Π^{-1/2} U`
    left: Matrix4<f64>,
    /// `Uᵀ Π^{1/2}`
    right: Matrix4<f64>,
}

/// `q_ij = ρ_ij π_j` off the diagonal, rows summing to zero, rescaled so that
/// `-Σ π_i q_ii = 1`.
pub fn build_q(model: &SubstitutionModel) -> RateMatrix {
    let pi = model.pi;
    let mut q = [[0.0; 4]; 4];
    for (&(i, j), &r) in RHO_PAIRS.iter().zip(&model.rho) {
        q[i][j] = r * pi[j];
        q[j][i] = r * pi[i];
    }
    for i in 0..4 {
        q[i][i] = -(0..4).filter(|&j| j != i).map(|j| q[i][j]).sum::<f64>();
    }
    let scale = -(0..4).map(|i| pi[i] * q[i][i]).sum::<f64>();
    for row in q.iter_mut() {
        for v in row.iter_mut() {
            *v /= scale;
        }
    }
    let sqrt_pi = pi.map(f64::sqrt);
    let sym = Matrix4::from_fn(|i, j| {
        if i == j {
            q[i][i]
        } else {
            // ρ_ij sqrt(π_i π_j) / scale, symmetric by construction
            0.5 * (sqrt_pi[i] * q[i][j] / sqrt_pi[j] + sqrt_pi[j] * q[j][i] / sqrt_pi[i])
        }
    });
    let eig = SymmetricEigen::new(sym);
    let u = eig.eigenvectors;
    let left = Matrix4::from_fn(|i, k| u[(i, k)] / sqrt_pi[i]);
    let right = Matrix4::from_fn(|k, j| u[(j, k)] * sqrt_pi[j]);
    let mut eigenvalues = [
        eig.eigenvalues[0],
        eig.eigenvalues[1],
        eig.eigenvalues[2],
        eig.eigenvalues[3],
    ];
    // the stationary eigenvalue is exactly zero; rounding would otherwise
    // blow up as exp(±1e-16 t) for astronomically long branches
    let top = (0..4)
        .max_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]))
        .unwrap_or(0);
    eigenvalues[top] = 0.0;
    RateMatrix {
        q,
        scale,
        pi,
        eigenvalues,
        left,
        right,
    }
}

impl RateMatrix {
    pub fn pi(&self) -> &[f64; 4] {
        &self.pi
    }

    /// `P(t) = exp(Q t)`, as `I + Π^{-1/2} U (e^{Λt} - 1) Uᵀ Π^{1/2}` so that
    /// short branches keep full relative precision.
    ///
    /// The eigen route is only accurate to ~1e-16 in absolute terms. When some
    /// entry falls below [`SMALL_ENTRY`] (nearly reducible chains at extreme
    /// parameters) the matrix is recomputed by uniformization with squaring,
    /// which only adds nonnegative terms and keeps every entry's relative
    /// precision.
    pub fn transition(&self, t: f64) -> TransitionMatrix {
        let e = self.eigenvalues.map(|l| (l * t).exp_m1());
        let mut p = [[0.0; 4]; 4];
        let mut smallest = f64::INFINITY;
        for (i, row) in p.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let mut s = if i == j { 1.0 } else { 0.0 };
                for k in 0..4 {
                    s += self.left[(i, k)] * e[k] * self.right[(k, j)];
                }
                smallest = smallest.min(s);
                *v = if s < 0.0 && s > -1e-12 { 0.0 } else { s };
            }
        }
        if smallest < SMALL_ENTRY && t > 0.0 {
            return self.transition_uniformized(t);
        }
        p
    }

    fn transition_uniformized(&self, t: f64) -> TransitionMatrix {
        let mu = (0..4).map(|i| -self.q[i][i] * t).fold(0.0, f64::max);
        if !(mu > 0.0) {
            return std::array::from_fn(|i| {
                std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 })
            });
        }
        let squarings = (mu / 0.5).log2().ceil().max(0.0) as i32;
        let step = mu / 2f64.powi(squarings);
        let scale = t / 2f64.powi(squarings) / step;
        // B = I + Q h / step is stochastic and nonnegative
        let b = Matrix4::from_fn(|i, j| {
            let off = self.q[i][j] * scale;
            if i == j {
                (1.0 + off).max(0.0)
            } else {
                off.max(0.0)
            }
        });
        let mut term = Matrix4::identity();
        let mut weight = (-step).exp();
        let mut sum = term * weight;
        for n in 1..40 {
            term *= b;
            weight *= step / n as f64;
            sum += term * weight;
        }
        // rows are stochastic; renormalizing stops rounding from compounding
        // over many squarings
        let normalize = |m: &mut Matrix4<f64>| {
            for i in 0..4 {
                let r: f64 = m.row(i).sum();
                for j in 0..4 {
                    m[(i, j)] /= r;
                }
            }
        };
        normalize(&mut sum);
        for _ in 0..squarings {
            sum = sum * sum;
            normalize(&mut sum);
        }
        std::array::from_fn(|i| std::array::from_fn(|j| sum[(i, j)]))
    }
}

/// Entries below this trigger the uniformization fallback in
/// [`RateMatrix::transition`].
pub const SMALL_ENTRY: f64 = 1e-10;

pub fn transition_matrix(q: &RateMatrix, t: f64) -> Result<TransitionMatrix> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "branch length must be nonnegative and finite, got {t}"
        )));
    }
    let p = q.transition(t);
    if p.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "transition matrix at t = {t} is not finite"
        )));
    }
    Ok(p)
}

/// Above this shape the incomplete gamma series gets slow and loses
/// precision, and a normal approximation is accurate to ~1/shape.
const NORMAL_APPROX_SHAPE: f64 = 1e7;

/// `P(a, x)` extended by `P(a, 0) = 0`.
fn lower_regularized(a: f64, x: f64) -> f64 {
    if x > 0.0 {
        gamma_lr(a, x)
    } else {
        0.0
    }
}

/// Quantile of Gamma(shape, rate = shape) at probability `p`.
fn gamma_quantile(shape: f64, p: f64) -> f64 {
    let cdf = |x: f64| lower_regularized(shape, shape * x);
    let log_density =
        |x: f64| shape.ln() + (shape - 1.0) * (shape * x).ln() - shape * x - ln_gamma(shape);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while cdf(hi) < p {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..2000 {
        let f = cdf(x) - p;
        if f == 0.0 || x == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - f / log_density(x).exp();
        x = if newton > lo && newton < hi {
            newton
        } else if lo == 0.0 {
            // very small shapes put quantiles many orders of magnitude below 1
            hi * 1e-3
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) <= 1e-15 * x {
            break;
        }
    }
    x
}

fn std_normal_density(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Mean rate of each of `n` equal-probability bins of Gamma(alpha, alpha).
///
/// With quantiles `q_i`, the bin mean is `n [P(α+1, α q_i) - P(α+1, α q_{i-1})]`,
/// which telescopes so the rates average to exactly one.
pub fn gamma_category_rates(alpha: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![1.0; n];
    }
    let rates: Vec<f64> = if alpha > NORMAL_APPROX_SHAPE {
        // bins of N(1, 1/alpha): mean = 1 + n σ (φ(z_{i-1}) - φ(z_i))
        let sigma = alpha.sqrt().recip();
        let mut dens = vec![0.0];
        dens.extend((1..n).map(|i| {
            let z = std::f64::consts::SQRT_2 * erf_inv(2.0 * i as f64 / n as f64 - 1.0);
            std_normal_density(z)
        }));
        dens.push(0.0);
        dens.windows(2)
            .map(|w| 1.0 + n as f64 * sigma * (w[0] - w[1]))
            .collect()
    } else {
        let mut upper_cdf = Vec::with_capacity(n + 1);
        upper_cdf.push(0.0);
        for i in 1..n {
            let q = gamma_quantile(alpha, i as f64 / n as f64);
            upper_cdf.push(lower_regularized(alpha + 1.0, alpha * q));
        }
        upper_cdf.push(1.0);
        upper_cdf
            .windows(2)
            .map(|w| n as f64 * (w[1] - w[0]))
            .collect()
    };
    let mean = rates.iter().sum::<f64>() / n as f64;
    rates.iter().map(|r| r / mean).collect()
}
