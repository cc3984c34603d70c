use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, run_evidence, EvidenceConfig};
use crate::evidence::{align, EvidenceEstimate, Method};
use crate::mcmc::{ModelChoice, PriorSpec};
use crate::numeric::log_sum_exp;
use crate::phylotree::{emit_newick, Alignment, BranchLengths, Topology};

/// `p_i = ĉ_i / Σ_j ĉ_j` from log evidences, under equal prior weights.
pub fn posterior_probabilities(log_c: &[f64]) -> Vec<f64> {
    let total = log_sum_exp(log_c);
    log_c.iter().map(|l| (l - total).exp()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEntry {
    /// Newick text with posterior-mean branch lengths, or unit lengths if
    /// the run failed.
    pub newick: String,
    pub seed: u64,
    pub estimate: Option<EvidenceEstimate>,
    pub posterior_probability: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSelection {
    pub model: ModelChoice,
    pub method: Method,
    pub entries: Vec<TreeEntry>,
    /// `log_bf[i][j] = log ĉ_i - log ĉ_j` where both runs succeeded.
    pub log_bf: Vec<Vec<Option<f64>>>,
    /// Successful entries by decreasing evidence.
    pub ranking: Vec<usize>,
}

impl TreeSelection {
    pub fn all_succeeded(&self) -> bool {
        self.entries.iter().all(|e| e.error.is_none())
    }
}

/// Estimates the evidence of every candidate topology with its own chain and
/// ranks them. Chain `i` uses seed `derive_seed(cfg.chain.seed, i)`. A failed
/// topology is reported with its error and left out of the probabilities.
pub fn tree_select(
    aln: &Alignment,
    topologies: &[Topology],
    model: ModelChoice,
    prior: PriorSpec,
    cfg: &EvidenceConfig,
) -> TreeSelection {
    let method = cfg.methods.first().copied().unwrap_or(Method::Idr);
    let mut entries: Vec<TreeEntry> = topologies
        .par_iter()
        .enumerate()
        .map(|(i, topo)| {
            let seed = derive_seed(cfg.chain.seed, i as u64);
            let mut run_cfg = cfg.clone();
            run_cfg.chain.seed = seed;
            let unit = BranchLengths::new(vec![1.0; topo.n_branches()]).expect("positive");
            match run_evidence(aln, topo, model, prior, &run_cfg) {
                Ok((run, chain)) => {
                    let means: Vec<f64> = (0..topo.n_branches())
                        .map(|j| {
                            let c = chain.coordinate(j);
                            c.iter().map(|y| y.exp()).sum::<f64>() / c.len() as f64
                        })
                        .collect();
                    let lengths = BranchLengths::new(means).unwrap_or(unit);
                    match run.get(method) {
                        Some(e) => TreeEntry {
                            newick: emit_newick(topo, &lengths),
                            seed,
                            estimate: Some(e.clone()),
                            posterior_probability: None,
                            error: None,
                        },
                        None => TreeEntry {
                            newick: emit_newick(topo, &lengths),
                            seed,
                            estimate: None,
                            posterior_probability: None,
                            error: Some(format!("no {} estimate", method.label())),
                        },
                    }
                }
                Err(e) => TreeEntry {
                    newick: emit_newick(topo, &unit),
                    seed,
                    estimate: None,
                    posterior_probability: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let ok: Vec<usize> = (0..entries.len())
        .filter(|&i| entries[i].estimate.is_some())
        .collect();
    let logs: Vec<f64> = ok
        .iter()
        .map(|&i| entries[i].estimate.as_ref().unwrap().log_c)
        .collect();
    for (&i, p) in ok.iter().zip(posterior_probabilities(&logs)) {
        entries[i].posterior_probability = Some(p);
    }
    let log_c = |i: usize| entries[i].estimate.as_ref().map(|e| e.log_c);
    let log_bf = (0..entries.len())
        .map(|i| {
            (0..entries.len())
                .map(|j| Some(log_c(i)? - log_c(j)?))
                .collect()
        })
        .collect();
    let mut ranking = ok.clone();
    ranking.sort_by(|&a, &b| log_c(b).unwrap().total_cmp(&log_c(a).unwrap()));
    TreeSelection {
        model,
        method,
        entries,
        log_bf,
        ranking,
    }
}

/// Per-topology evidence table followed by the pairwise log Bayes factors.
pub fn render_tree_selection(sel: &TreeSelection) -> String {
    let header = ["tree", "log_c", "rmse_ess", "posterior", "newick"];
    let rows: Vec<[String; 5]> = sel
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| match (&e.estimate, &e.error) {
            (Some(est), _) => [
                format!("T{}", i + 1),
                format!("{:.4}", est.log_c),
                format!("{:.4}", est.rmse_delta_ess),
                format!("{:.4}", e.posterior_probability.unwrap_or(f64::NAN)),
                e.newick.clone(),
            ],
            (None, err) => [
                format!("T{}", i + 1),
                "failed".into(),
                "-".into(),
                "-".into(),
                format!("{} ({})", e.newick, err.as_deref().unwrap_or("")),
            ],
        })
        .collect();
    let mut out = format!(
        "{} evidence by topology ({})\n",
        sel.method.label(),
        sel.model.label()
    );
    out.push_str(&align(&header, &rows));
    out.push_str("\nlog BF(row vs column)\n");
    let n = sel.entries.len();
    for i in 0..n {
        let cells: Vec<String> = (0..n)
            .map(|j| sel.log_bf[i][j].map_or("-".into(), |v| format!("{v:.4}")))
            .collect();
        out.push_str(&format!("T{}  {}\n", i + 1, cells.join("  ")));
    }
    out
}
