use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{Alignment, BranchLengths, Topology};
use crate::error::{Error, Result};
use crate::substmodel::{build_q, transition_matrix, SubstitutionModel};

fn draw<R: Rng>(rng: &mut R, probs: &[f64; 4]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    3
}

/// Evolves `n_sites` independent sites down the tree from the traversal root.
/// Each site draws its gamma category uniformly. Deterministic under `seed`.
pub fn simulate_alignment(
    topo: &Topology,
    lengths: &BranchLengths,
    model: &SubstitutionModel,
    n_sites: usize,
    seed: u64,
) -> Result<Alignment> {
    if lengths.len() != topo.n_branches() {
        return Err(Error::InvalidInput(format!(
            "{} branch lengths for a tree with {} branches",
            lengths.len(),
            topo.n_branches()
        )));
    }
    let q = build_q(model);
    let rates = model.category_rates();
    let pmats = rates
        .iter()
        .map(|r| {
            lengths
                .as_slice()
                .iter()
                .map(|t| transition_matrix(&q, t * r))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let order = topo.preorder();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut rows = vec![Vec::with_capacity(n_sites); topo.n_leaves()];
    let mut state = vec![0usize; topo.n_nodes()];
    for _ in 0..n_sites {
        let cat = rng.random_range(0..rates.len());
        for v in &order {
            state[v.node] = match (v.parent, v.edge) {
                (Some(p), Some(e)) => draw(&mut rng, &pmats[cat][e][state[p]]),
                _ => draw(&mut rng, q.pi()),
            };
        }
        for (leaf, row) in rows.iter_mut().enumerate() {
            row.push(b"ACGT"[state[leaf]]);
        }
    }
    if n_sites == 0 {
        return Alignment::empty(topo.names().to_vec());
    }
    Alignment::new(topo.names().to_vec(), rows)
}
