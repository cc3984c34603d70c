use std::io::Read;

use crate::error::{Error, Result};

/// Posterior draws in unconstrained coordinates with the unnormalized log
/// target at each draw.
#[derive(Debug, Clone, PartialEq)]
pub struct LogDensitySample {
    draws: Vec<f64>,
    dim: usize,
    log_g: Vec<f64>,
    ess: f64,
    log_lik: Option<Vec<f64>>,
}

impl LogDensitySample {
    pub fn new(draws: Vec<Vec<f64>>, log_g: Vec<f64>) -> Result<Self> {
        let dim = draws.first().map_or(0, Vec::len);
        if let Some(i) = draws.iter().position(|r| r.len() != dim) {
            return Err(Error::InvalidInput(format!(
                "draw {i} has dimension {} but draw 0 has {dim}",
                draws[i].len()
            )));
        }
        Self::from_flat(draws.into_iter().flatten().collect(), dim, log_g)
    }

    /// Builds a sample from row-major `T × dim` storage.
    pub fn from_flat(draws: Vec<f64>, dim: usize, log_g: Vec<f64>) -> Result<Self> {
        let t = log_g.len();
        if t < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 draws, got {t}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("draws must have dimension >= 1".into()));
        }
        if draws.len() != t * dim {
            return Err(Error::InvalidInput(format!(
                "{} draw values do not form {t} rows of dimension {dim}",
                draws.len()
            )));
        }
        if let Some(i) = log_g.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "log_g[{i}] = {} is not finite",
                log_g[i]
            )));
        }
        if let Some(i) = draws.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "draw {} has a non-finite coordinate",
                i / dim
            )));
        }
        Ok(Self {
            draws,
            dim,
            log_g,
            ess: t as f64,
            log_lik: None,
        })
    }

    pub fn with_ess(mut self, ess: f64) -> Result<Self> {
        let t = self.len() as f64;
        if !(1.0..=t).contains(&ess) {
            return Err(Error::InvalidInput(format!(
                "effective sample size {ess} outside [1, {t}]"
            )));
        }
        self.ess = ess;
        Ok(self)
    }

    /// Reads CSV with one draw per row and the log target in the last
    /// column. A header row is skipped when its first field is not numeric.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut flat = Vec::new();
        let mut log_g = Vec::new();
        let mut dim = None;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse {
                offset: e.position().map_or(0, |p| p.byte() as usize),
                message: e.to_string(),
            })?;
            let fields: Vec<&str> = rec.iter().collect();
            if line == 0 && fields.first().is_some_and(|f| f.parse::<f64>().is_err()) {
                continue;
            }
            let offset = rec.position().map_or(0, |p| p.byte() as usize);
            let values = fields
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse {
                    offset,
                    message: format!("row {line}: {e}"),
                })?;
            if values.len() < 2 {
                return Err(Error::Parse {
                    offset,
                    message: format!("row {line} has fewer than 2 columns"),
                });
            }
            let d = values.len() - 1;
            if *dim.get_or_insert(d) != d {
                return Err(Error::Parse {
                    offset,
                    message: format!("row {line} has {} columns", values.len()),
                });
            }
            flat.extend_from_slice(&values[..d]);
            log_g.push(values[d]);
        }
        Self::from_flat(flat, dim.unwrap_or(0), log_g)
    }

    pub fn len(&self) -> usize {
        self.log_g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_g.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn draw(&self, t: usize) -> &[f64] {
        &self.draws[t * self.dim..(t + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.draws.chunks_exact(self.dim)
    }

    /// Row-major `T × d` draws.
    pub fn flat_draws(&self) -> &[f64] {
        &self.draws
    }

    pub fn log_g(&self) -> &[f64] {
        &self.log_g
    }

    pub fn ess(&self) -> f64 {
        self.ess
    }

    /// Attaches per-draw log-likelihoods (used by the harmonic mean).
    pub fn with_log_lik(mut self, log_lik: Vec<f64>) -> Result<Self> {
        if log_lik.len() != self.len() {
            return Err(Error::InvalidInput(format!(
                "{} log-likelihoods for {} draws",
                log_lik.len(),
                self.len()
            )));
        }
        self.log_lik = Some(log_lik);
        Ok(self)
    }

    pub fn log_lik(&self) -> Option<&[f64]> {
        self.log_lik.as_deref()
    }

    /// Adds `shift` to every log target value.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        out.log_g.iter_mut().for_each(|v| *v += shift);
        out
    }
}
