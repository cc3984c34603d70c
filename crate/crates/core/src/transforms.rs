//! Unconstrained reparameterizations of phylogenetic parameters.
//!
//! Positive parameters (branch lengths, the gamma shape) are mapped by `log`;
//! simplex parameters (base frequencies, exchangeabilities) by the additive
//! log-ratio with the last component as reference. Every log-Jacobian
//! reported here is that of the inverse map, i.e. the term added to a
//! constrained log density to obtain the density of the unconstrained
//! coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version tag of the coordinate layout written next to chains.
pub const PACKING_VERSION: u32 = 1;

/// Tolerance on `Σ x_i = 1` for simplex inputs.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Elementwise `log`; the log-Jacobian of `exp` is the sum of the outputs.
pub fn log_transform(values: &[f64]) -> Result<(Vec<f64>, f64)> {
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "log transform needs positive finite values, got {v}"
        )));
    }
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let jac = y.iter().sum();
    Ok((y, jac))
}

pub fn exp_transform(y: &[f64]) -> (Vec<f64>, f64) {
    (y.iter().map(|v| v.exp()).collect(), y.iter().sum())
}

fn check_simplex(x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "simplex needs at least 2 components, got {}",
            x.len()
        )));
    }
    if let Some(v) = x.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "simplex components must be positive, got {v}"
        )));
    }
    let sum: f64 = x.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE * x.len() as f64 {
        return Err(Error::InvalidInput(format!(
            "simplex components sum to {sum}"
        )));
    }
    Ok(())
}

/// Additive log-ratio `y_i = log(x_i / x_D)`.
///
/// The returned log-Jacobian, `Σ_{i=1}^{D} log x_i`, is that of the additive
/// logistic inverse.
pub fn alr(x: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_simplex(x)?;
    let last = x[x.len() - 1].ln();
    let y = x[..x.len() - 1].iter().map(|v| v.ln() - last).collect();
    Ok((y, x.iter().map(|v| v.ln()).sum()))
}

/// Additive logistic map back to the simplex, with its log-Jacobian.
pub fn alr_inv(y: &[f64]) -> (Vec<f64>, f64) {
    let max = y.iter().copied().fold(0.0f64, f64::max);
    let mut x: Vec<f64> = y.iter().map(|v| (v - max).exp()).collect();
    x.push((-max).exp());
    let total: f64 = x.iter().sum();
    let log_total = max + total.ln();
    x.iter_mut().for_each(|v| *v /= total);
    // log x_i = y_i - log(1 + Σ e^y), log x_D = -log(1 + Σ e^y)
    let jac = y.iter().sum::<f64>() - (y.len() + 1) as f64 * log_total;
    (x, jac)
}

/// Additive log-ratio with an arbitrary reference component.
pub fn alr_with_reference(x: &[f64], reference: usize) -> Result<(Vec<f64>, f64)> {
    check_simplex(x)?;
    if reference >= x.len() {
        return Err(Error::InvalidInput(format!(
            "reference {reference} out of range"
        )));
    }
    let lr = x[reference].ln();
    let y = x
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != reference)
        .map(|(_, v)| v.ln() - lr)
        .collect();
    Ok((y, x.iter().map(|v| v.ln()).sum()))
}

pub fn alr_inv_with_reference(y: &[f64], reference: usize) -> (Vec<f64>, f64) {
    let (tail_ref, jac) = alr_inv(y);
    // alr_inv places the reference last; move it into position
    let mut x = tail_ref[..y.len()].to_vec();
    x.insert(reference.min(y.len()), tail_ref[y.len()]);
    (x, jac)
}

/// Constrained parameters of a fixed-topology phylogenetic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhyloParams {
    pub branch_lengths: Vec<f64>,
    pub pi: Option<[f64; 4]>,
    pub rho: Option<[f64; 6]>,
    pub alpha: Option<f64>,
}

/// Which blocks are present and how many branches there are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub n_branches: usize,
    pub has_pi: bool,
    pub has_rho: bool,
    pub has_alpha: bool,
    /// Reference component of both simplex blocks (last index by default).
    pub pi_reference: usize,
    pub rho_reference: usize,
}

impl Layout {
    pub fn jc69(n_branches: usize) -> Self {
        Self {
            n_branches,
            has_pi: false,
            has_rho: false,
            has_alpha: false,
            pi_reference: 3,
            rho_reference: 5,
        }
    }

    pub fn gtr(n_branches: usize, gamma: bool) -> Self {
        Self {
            n_branches,
            has_pi: true,
            has_rho: true,
            has_alpha: gamma,
            pi_reference: 3,
            rho_reference: 5,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_branches
            + 3 * self.has_pi as usize
            + 5 * self.has_rho as usize
            + self.has_alpha as usize
    }

    /// Column names in packing order.
    pub fn column_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.n_branches).map(|i| format!("bl.{i}")).collect();
        if self.has_pi {
            names.extend((0..3).map(|i| format!("pi.alr.{i}")));
        }
        if self.has_rho {
            names.extend((0..5).map(|i| format!("rho.alr.{i}")));
        }
        if self.has_alpha {
            names.push("log.alpha".into());
        }
        names
    }

    /// Packs constrained parameters as branch lengths, then `pi`, then
    /// `rho`, then `log alpha`. Returns the point and its total log-Jacobian.
    pub fn pack(&self, params: &PhyloParams) -> Result<(Vec<f64>, f64)> {
        let block_err = |block: &str, e: Error| Error::InvalidBlock {
            block: block.into(),
            message: e.to_string(),
        };
        if params.branch_lengths.len() != self.n_branches {
            return Err(Error::InvalidBlock {
                block: "branch_lengths".into(),
                message: format!(
                    "expected {} values, got {}",
                    self.n_branches,
                    params.branch_lengths.len()
                ),
            });
        }
        let (mut out, mut jac) =
            log_transform(&params.branch_lengths).map_err(|e| block_err("branch_lengths", e))?;
        if self.has_pi {
            let pi = params
                .pi
                .ok_or_else(|| block_err("pi", Error::InvalidInput("missing".into())))?;
            let (y, j) =
                alr_with_reference(&pi, self.pi_reference).map_err(|e| block_err("pi", e))?;
            out.extend(y);
            jac += j;
        }
        if self.has_rho {
            let rho = params
                .rho
                .ok_or_else(|| block_err("rho", Error::InvalidInput("missing".into())))?;
            let (y, j) =
                alr_with_reference(&rho, self.rho_reference).map_err(|e| block_err("rho", e))?;
            out.extend(y);
            jac += j;
        }
        if self.has_alpha {
            let alpha = params
                .alpha
                .ok_or_else(|| block_err("alpha", Error::InvalidInput("missing".into())))?;
            let (y, j) = log_transform(&[alpha]).map_err(|e| block_err("alpha", e))?;
            out.extend(y);
            jac += j;
        }
        Ok((out, jac))
    }

    /// Inverse of [`Layout::pack`].
    pub fn unpack(&self, point: &[f64]) -> Result<(PhyloParams, f64)> {
        if point.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates, got {}",
                self.dim(),
                point.len()
            )));
        }
        let (bl, mut jac) = exp_transform(&point[..self.n_branches]);
        let mut at = self.n_branches;
        let mut params = PhyloParams {
            branch_lengths: bl,
            pi: None,
            rho: None,
            alpha: None,
        };
        if self.has_pi {
            let (x, j) = alr_inv_with_reference(&point[at..at + 3], self.pi_reference);
            params.pi = Some([x[0], x[1], x[2], x[3]]);
            jac += j;
            at += 3;
        }
        if self.has_rho {
            let (x, j) = alr_inv_with_reference(&point[at..at + 5], self.rho_reference);
            params.rho = Some([x[0], x[1], x[2], x[3], x[4], x[5]]);
            jac += j;
            at += 5;
        }
        if self.has_alpha {
            params.alpha = Some(point[at].exp());
            jac += point[at];
        }
        Ok((params, jac))
    }
}
