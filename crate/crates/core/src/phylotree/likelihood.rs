use std::collections::{HashMap, HashSet};

use super::{nucleotide_mask, Alignment, BranchLengths, Topology, Visit};
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, log_sum_exp};
use crate::substmodel::{build_q, transition_matrix, SubstitutionModel, TransitionMatrix};

/// Partials whose largest entry falls below this are rescaled.
const RESCALE_BELOW: f64 = 1e-150;

/// Distinct site columns (as nucleotide masks in topology leaf order) with
/// their multiplicities, in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSet {
    pub patterns: Vec<Vec<u8>>,
    pub weights: Vec<f64>,
}

impl PatternSet {
    pub fn build(aln: &Alignment, topo: &Topology, compress: bool) -> Result<Self> {
        let a: HashSet<&String> = aln.names().iter().collect();
        let t: HashSet<&String> = topo.names().iter().collect();
        if a != t {
            let mut missing: Vec<&String> = t.difference(&a).copied().collect();
            let mut extra: Vec<&String> = a.difference(&t).copied().collect();
            missing.sort();
            extra.sort();
            return Err(Error::NameMismatch(format!(
                "tree taxa missing from alignment: {missing:?}; alignment taxa not in tree: {extra:?}"
            )));
        }
        let rows: Vec<&[u8]> = topo
            .names()
            .iter()
            .map(|n| aln.row(n).unwrap_or_default())
            .collect();
        let mut patterns: Vec<Vec<u8>> = Vec::new();
        let mut weights = Vec::new();
        let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
        for site in 0..aln.n_sites() {
            let col: Vec<u8> = rows
                .iter()
                .map(|r| nucleotide_mask(r[site]).unwrap_or(15))
                .collect();
            if compress {
                if let Some(&i) = index.get(&col) {
                    weights[i] += 1.0;
                    continue;
                }
                index.insert(col.clone(), patterns.len());
            }
            patterns.push(col);
            weights.push(1.0);
        }
        Ok(Self { patterns, weights })
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

/// Pruning-algorithm likelihood for a fixed alignment and topology.
#[derive(Debug, Clone)]
pub struct TreeLikelihood {
    topo: Topology,
    postorder: Vec<Visit>,
    /// `tips[leaf][pattern]`
    tips: Vec<Vec<[f64; 4]>>,
    weights: Vec<f64>,
}

impl TreeLikelihood {
    pub fn new(aln: &Alignment, topo: &Topology) -> Result<Self> {
        Self::with_patterns(topo, PatternSet::build(aln, topo, true)?)
    }

    pub fn with_patterns(topo: &Topology, patterns: PatternSet) -> Result<Self> {
        if patterns.patterns.iter().any(|p| p.len() != topo.n_leaves()) {
            return Err(Error::InvalidInput(
                "pattern width does not match the number of leaves".into(),
            ));
        }
        let tips = (0..topo.n_leaves())
            .map(|leaf| {
                patterns
                    .patterns
                    .iter()
                    .map(|p| std::array::from_fn(|s| f64::from((p[leaf] >> s) & 1)))
                    .collect()
            })
            .collect();
        Ok(Self {
            topo: topo.clone(),
            postorder: topo.postorder(),
            tips,
            weights: patterns.weights,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn n_patterns(&self) -> usize {
        self.weights.len()
    }

    /// Log-likelihood summed over sites; gamma categories carry equal weight.
    pub fn log_likelihood(
        &self,
        lengths: &BranchLengths,
        model: &SubstitutionModel,
    ) -> Result<f64> {
        if lengths.len() != self.topo.n_branches() {
            return Err(Error::InvalidInput(format!(
                "{} branch lengths for a tree with {} branches",
                lengths.len(),
                self.topo.n_branches()
            )));
        }
        let np = self.n_patterns();
        if np == 0 {
            return Ok(0.0);
        }
        let q = build_q(model);
        let rates = model.category_rates();
        let mut per_cat = Vec::with_capacity(rates.len());
        for &r in &rates {
            let pmats = lengths
                .as_slice()
                .iter()
                .map(|&t| transition_matrix(&q, t * r))
                .collect::<Result<Vec<_>>>()?;
            per_cat.push(self.site_likelihoods(&pmats, q.pi()));
        }
        let ln_cats = (rates.len() as f64).ln();
        let site_logs = (0..np).map(|p| {
            let unscaled = per_cat.iter().all(|(_, s)| s[p] == 0.0);
            let l = if unscaled {
                (per_cat.iter().map(|(l, _)| l[p]).sum::<f64>()).ln() - ln_cats
            } else {
                let terms: Vec<f64> = per_cat.iter().map(|(l, s)| l[p].ln() + s[p]).collect();
                log_sum_exp(&terms) - ln_cats
            };
            self.weights[p] * l
        });
        let total = compensated_sum(site_logs);
        if total.is_nan() {
            return Err(Error::Numeric("log-likelihood is NaN".into()));
        }
        Ok(total)
    }

    /// Per-pattern root likelihoods and accumulated log scale factors.
    fn site_likelihoods(&self, pmats: &[TransitionMatrix], pi: &[f64; 4]) -> (Vec<f64>, Vec<f64>) {
        let np = self.n_patterns();
        let mut partials: Vec<Vec<[f64; 4]>> = vec![Vec::new(); self.topo.n_nodes()];
        let mut scale = vec![0.0; np];
        for v in &self.postorder {
            let mut buf = if self.topo.is_leaf(v.node) {
                self.tips[v.node].clone()
            } else {
                vec![[1.0; 4]; np]
            };
            let mut has_children = false;
            for &(u, e) in self.topo.neighbors(v.node) {
                if Some(u) == v.parent {
                    continue;
                }
                has_children = true;
                let p = &pmats[e];
                for (b, c) in buf.iter_mut().zip(&partials[u]) {
                    for s in 0..4 {
                        b[s] *= p[s][0] * c[0] + p[s][1] * c[1] + p[s][2] * c[2] + p[s][3] * c[3];
                    }
                }
            }
            if has_children {
                for (b, sc) in buf.iter_mut().zip(scale.iter_mut()) {
                    let m = b.iter().copied().fold(0.0, f64::max);
                    if m > 0.0 && m < RESCALE_BELOW {
                        b.iter_mut().for_each(|x| *x /= m);
                        *sc += m.ln();
                    }
                }
            }
            partials[v.node] = buf;
        }
        let root = &partials[self.topo.root()];
        let lik = root
            .iter()
            .map(|b| (0..4).map(|s| pi[s] * b[s]).sum())
            .collect();
        (lik, scale)
    }
}

/// `log p(X | τ, ν, model)` by the pruning algorithm with pattern compression.
pub fn log_likelihood(
    aln: &Alignment,
    topo: &Topology,
    lengths: &BranchLengths,
    model: &SubstitutionModel,
) -> Result<f64> {
    TreeLikelihood::new(aln, topo)?.log_likelihood(lengths, model)
}
