use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phylotree::{Alignment, BranchLengths, Topology, TreeLikelihood};
use crate::substmodel::{SubstitutionModel, DEFAULT_GAMMA_CATEGORIES};
use crate::transforms::{Layout, PhyloParams};

/// Substitution model family being sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelChoice {
    Jc69,
    GtrGamma { n_categories: usize },
}

impl ModelChoice {
    pub fn gtr_gamma() -> Self {
        Self::GtrGamma {
            n_categories: DEFAULT_GAMMA_CATEGORIES,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Jc69 => "jc69",
            Self::GtrGamma { .. } => "gtr-gamma",
        }
    }

    pub fn layout(&self, n_branches: usize) -> Layout {
        match self {
            Self::Jc69 => Layout::jc69(n_branches),
            Self::GtrGamma { .. } => Layout::gtr(n_branches, true),
        }
    }

    pub fn build(&self, params: &PhyloParams) -> Result<SubstitutionModel> {
        match *self {
            Self::Jc69 => Ok(SubstitutionModel::jc69()),
            Self::GtrGamma { n_categories } => {
                let missing = |what: &str| Error::InvalidInput(format!("GTR+Γ needs {what}"));
                SubstitutionModel::gtr(
                    params.pi.ok_or_else(|| missing("pi"))?,
                    params.rho.ok_or_else(|| missing("rho"))?,
                )?
                .with_gamma(params.alpha.ok_or_else(|| missing("alpha"))?, n_categories)
            }
        }
    }
}

/// Exponential priors on branch lengths and the gamma shape, flat Dirichlet
/// priors on base frequencies and exchangeabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub branch_rate: f64,
    pub alpha_rate: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            branch_rate: 10.0,
            alpha_rate: 1.0,
        }
    }
}

/// `ln Γ(4)` and `ln Γ(6)`: flat Dirichlet densities on the 4- and 6-simplex.
const LN_DIRICHLET_PI: f64 = 1.791_759_469_228_055;
const LN_DIRICHLET_RHO: f64 = 4.787_491_742_782_046;

impl PriorSpec {
    pub fn new(branch_rate: f64, alpha_rate: f64) -> Result<Self> {
        if !(branch_rate > 0.0
            && branch_rate.is_finite()
            && alpha_rate > 0.0
            && alpha_rate.is_finite())
        {
            return Err(Error::InvalidInput(format!(
                "prior rates must be positive, got branch {branch_rate}, alpha {alpha_rate}"
            )));
        }
        Ok(Self {
            branch_rate,
            alpha_rate,
        })
    }

    /// Log prior density of constrained parameters.
    pub fn log_density(&self, params: &PhyloParams) -> f64 {
        let lb = self.branch_rate;
        let mut lp: f64 = params.branch_lengths.iter().map(|t| lb.ln() - lb * t).sum();
        if params.pi.is_some() {
            lp += LN_DIRICHLET_PI;
        }
        if params.rho.is_some() {
            lp += LN_DIRICHLET_RHO;
        }
        if let Some(a) = params.alpha {
            lp += self.alpha_rate.ln() - self.alpha_rate * a;
        }
        lp
    }

    /// Exact draw from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, layout: &Layout, rng: &mut R) -> PhyloParams {
        let branch = Exp::new(self.branch_rate).expect("validated rate");
        let alpha = Exp::new(self.alpha_rate).expect("validated rate");
        let mut flat = |n: usize| {
            let e: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let pi = layout.has_pi.then(|| {
            let v = flat(4);
            [v[0], v[1], v[2], v[3]]
        });
        let rho = layout.has_rho.then(|| {
            let v = flat(6);
            [v[0], v[1], v[2], v[3], v[4], v[5]]
        });
        PhyloParams {
            branch_lengths: (0..layout.n_branches).map(|_| branch.sample(rng)).collect(),
            pi,
            rho,
            alpha: layout.has_alpha.then(|| alpha.sample(rng)),
        }
    }
}

/// Terms of the transformed log posterior at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// `log_prior + log_lik + log_jacobian`
    pub log_post: f64,
    pub log_lik: f64,
    pub log_prior: f64,
    pub log_jacobian: f64,
}

/// Unnormalized posterior in unconstrained coordinates that an MCMC chain
/// explores. `log_lik` is reported alongside for the harmonic mean.
pub trait Target: Sync {
    fn dim(&self) -> usize;

    /// `(log_post, log_lik)`; `-inf` rejects the point.
    fn log_density(&self, point: &[f64]) -> Result<(f64, f64)>;

    fn column_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("x.{i}")).collect()
    }
}

/// Fixed-topology phylogenetic posterior.
#[derive(Debug, Clone)]
pub struct PhyloPosterior {
    lik: TreeLikelihood,
    layout: Layout,
    model: ModelChoice,
    prior: PriorSpec,
}

impl PhyloPosterior {
    pub fn new(
        aln: &Alignment,
        topo: &Topology,
        model: ModelChoice,
        prior: PriorSpec,
    ) -> Result<Self> {
        Ok(Self {
            lik: TreeLikelihood::new(aln, topo)?,
            layout: model.layout(topo.n_branches()),
            model,
            prior,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn model(&self) -> ModelChoice {
        self.model
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn topology(&self) -> &Topology {
        self.lik.topology()
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<Evaluation> {
        let (params, log_jacobian) = self.layout.unpack(point)?;
        let log_prior = self.prior.log_density(&params);
        // lengths that under- or overflow leave the support numerically
        let Ok(lengths) = BranchLengths::new(params.branch_lengths.clone()) else {
            return Ok(Evaluation {
                log_post: f64::NEG_INFINITY,
                log_lik: f64::NEG_INFINITY,
                log_prior,
                log_jacobian,
            });
        };
        let model = self.model.build(&params)?;
        let log_lik = self.lik.log_likelihood(&lengths, &model)?;
        let log_post = log_prior + log_lik + log_jacobian;
        Ok(Evaluation {
            log_post: if log_post.is_nan() {
                f64::NEG_INFINITY
            } else {
                log_post
            },
            log_lik,
            log_prior,
            log_jacobian,
        })
    }

    /// Branch lengths 0.1, uniform frequencies and exchangeabilities, shape 1.
    pub fn initial_point(&self) -> Vec<f64> {
        let params = PhyloParams {
            branch_lengths: vec![0.1; self.layout.n_branches],
            pi: self.layout.has_pi.then_some([0.25; 4]),
            rho: self.layout.has_rho.then_some([1.0 / 6.0; 6]),
            alpha: self.layout.has_alpha.then_some(1.0),
        };
        self.layout
            .pack(&params)
            .expect("valid default parameters")
            .0
    }

    /// An exact prior draw in unconstrained coordinates.
    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        Ok(self.layout.pack(&self.prior.sample(&self.layout, rng))?.0)
    }
}

impl Target for PhyloPosterior {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn log_density(&self, point: &[f64]) -> Result<(f64, f64)> {
        self.evaluate(point).map(|e| (e.log_post, e.log_lik))
    }

    fn column_names(&self) -> Vec<String> {
        self.layout.column_names()
    }
}

/// `(log_post, log_lik)` at an unconstrained point.
pub fn log_posterior(
    point: &[f64],
    aln: &Alignment,
    topo: &Topology,
    model: ModelChoice,
    prior: &PriorSpec,
) -> Result<(f64, f64)> {
    PhyloPosterior::new(aln, topo, model, *prior)?.log_density(point)
}
