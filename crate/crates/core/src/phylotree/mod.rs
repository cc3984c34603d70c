//! Unrooted binary trees, alignments, pruning likelihood and simulation.
//!
//! Nodes `0..n` are the leaves in label order of construction; internal nodes
//! follow. A tree is an edge list plus an arbitrary traversal root, which may
//! be any node (the likelihood does not depend on it for reversible models).

mod alignment;
mod likelihood;
mod newick;
mod simulate;

use std::collections::{BTreeSet, HashSet};

use rand::Rng;

pub use alignment::{nucleotide_mask, Alignment};
pub use likelihood::{log_likelihood, PatternSet, TreeLikelihood};
pub use newick::{emit_newick, parse_newick};
pub use simulate::simulate_alignment;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    names: Vec<String>,
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    root: usize,
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// One step of a post-order walk: `node` is reached from `parent` through `edge`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Visit {
    pub node: usize,
    pub parent: Option<usize>,
    pub edge: Option<usize>,
}

impl Topology {
    /// Builds a tree from leaf names and an edge list over nodes `0..2n-2`
    /// (or `0..2` for two leaves).
    pub fn new(names: Vec<String>, edges: Vec<(usize, usize)>, root: usize) -> Result<Self> {
        let n = names.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "a tree needs at least 2 leaves, got {n}"
            )));
        }
        let unique: HashSet<&String> = names.iter().collect();
        if unique.len() != n {
            return Err(Error::InvalidInput("leaf names must be unique".into()));
        }
        let n_nodes = if n == 2 { 2 } else { 2 * n - 2 };
        let n_edges = if n == 2 { 1 } else { 2 * n - 3 };
        if edges.len() != n_edges {
            return Err(Error::InvalidInput(format!(
                "{n} leaves need {n_edges} branches, got {}",
                edges.len()
            )));
        }
        if root >= n_nodes {
            return Err(Error::InvalidInput(format!("root {root} out of range")));
        }
        let mut adjacency = vec![Vec::new(); n_nodes];
        for (e, &(a, b)) in edges.iter().enumerate() {
            if a >= n_nodes || b >= n_nodes || a == b {
                return Err(Error::InvalidInput(format!("bad edge ({a}, {b})")));
            }
            adjacency[a].push((b, e));
            adjacency[b].push((a, e));
        }
        for (v, adj) in adjacency.iter().enumerate() {
            let want = if v < n || n == 2 { 1 } else { 3 };
            if adj.len() != want {
                return Err(Error::InvalidInput(format!(
                    "node {v} has degree {}, expected {want}",
                    adj.len()
                )));
            }
        }
        let topo = Self {
            names,
            n_nodes,
            edges,
            root,
            adjacency,
        };
        // n_nodes - 1 edges plus connectivity means it is a tree
        if topo.postorder().len() != n_nodes {
            return Err(Error::InvalidInput(
                "edges do not form a connected tree".into(),
            ));
        }
        Ok(topo)
    }

    pub fn n_leaves(&self) -> usize {
        self.names.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_branches(&self) -> usize {
        self.edges.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node < self.names.len()
    }

    /// `(neighbor, edge)` pairs of a node.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    /// Same tree, different traversal root.
    pub fn with_root(&self, root: usize) -> Result<Self> {
        if root >= self.n_nodes {
            return Err(Error::InvalidInput(format!("root {root} out of range")));
        }
        Ok(Self {
            root,
            ..self.clone()
        })
    }

    /// Children before parents; the root comes last.
    pub fn postorder(&self) -> Vec<Visit> {
        let mut order = self.preorder();
        order.reverse();
        order
    }

    /// Parents before children; the root comes first.
    pub fn preorder(&self) -> Vec<Visit> {
        let mut out = Vec::with_capacity(self.n_nodes);
        let mut stack = vec![Visit {
            node: self.root,
            parent: None,
            edge: None,
        }];
        let mut seen = vec![false; self.n_nodes];
        while let Some(v) = stack.pop() {
            if seen[v.node] {
                continue;
            }
            seen[v.node] = true;
            out.push(v);
            for &(u, e) in self.adjacency[v.node].iter().rev() {
                if Some(u) != v.parent {
                    stack.push(Visit {
                        node: u,
                        parent: Some(v.node),
                        edge: Some(e),
                    });
                }
            }
        }
        out
    }

    /// Leaf-name bipartition induced by each branch, as the side that does not
    /// contain the lexicographically smallest name.
    pub fn splits(&self) -> Vec<BTreeSet<String>> {
        let smallest = self.names.iter().min().cloned().unwrap_or_default();
        (0..self.edges.len())
            .map(|e| {
                let (a, _) = self.edges[e];
                let side = self.leaves_on_side(a, e);
                let side: BTreeSet<String> =
                    side.into_iter().map(|i| self.names[i].clone()).collect();
                if side.contains(&smallest) {
                    self.names
                        .iter()
                        .filter(|n| !side.contains(*n))
                        .cloned()
                        .collect()
                } else {
                    side
                }
            })
            .collect()
    }

    /// True when both trees have the same leaf set and the same splits.
    pub fn same_topology(&self, other: &Topology) -> bool {
        let a: BTreeSet<&String> = self.names.iter().collect();
        let b: BTreeSet<&String> = other.names.iter().collect();
        a == b && {
            let sa: BTreeSet<_> = self.splits().into_iter().collect();
            let sb: BTreeSet<_> = other.splits().into_iter().collect();
            sa == sb
        }
    }

    fn leaves_on_side(&self, start: usize, cut: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![(start, usize::MAX)];
        while let Some((v, from)) = stack.pop() {
            if self.is_leaf(v) {
                out.push(v);
            }
            for &(u, e) in &self.adjacency[v] {
                if e != cut && u != from {
                    stack.push((u, v));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchLengths(Vec<f64>);

impl BranchLengths {
    pub fn new(lengths: Vec<f64>) -> Result<Self> {
        if let Some((i, t)) = lengths
            .iter()
            .enumerate()
            .find(|(_, t)| !(**t > 0.0 && t.is_finite()))
        {
            return Err(Error::InvalidInput(format!(
                "branch {i} has length {t}; lengths must be positive"
            )));
        }
        Ok(Self(lengths))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// The three unrooted topologies on four labels: `ab|cd`, `ac|bd`, `ad|bc`.
///
/// Branch order is: the two pendant edges of the first cherry, the two of the
/// second, then the internal edge.
pub fn enumerate_topologies(names: &[&str]) -> Result<Vec<Topology>> {
    if names.len() != 4 {
        return Err(Error::Unsupported(format!(
            "topology enumeration is implemented for 4 taxa only, got {}",
            names.len()
        )));
    }
    let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    [[0, 1, 2, 3], [0, 2, 1, 3], [0, 3, 1, 2]]
        .iter()
        .map(|[a, b, c, d]| {
            Topology::new(
                names.clone(),
                vec![(4, *a), (4, *b), (5, *c), (5, *d), (4, 5)],
                4,
            )
        })
        .collect()
}

/// Uniform random tree by stepwise addition of leaves onto random edges.
pub fn random_topology<R: Rng + ?Sized>(names: Vec<String>, rng: &mut R) -> Result<Topology> {
    let n = names.len();
    if n < 3 {
        return Topology::new(names, vec![(0, 1)], 0);
    }
    let mut edges = vec![(n, 0), (n, 1), (n, 2)];
    for leaf in 3..n {
        let new_internal = n + leaf - 2;
        let e = rng.random_range(0..edges.len());
        let (a, b) = edges[e];
        edges[e] = (a, new_internal);
        edges.push((new_internal, b));
        edges.push((new_internal, leaf));
    }
    Topology::new(names, edges, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("t{i}")).collect()
    }

    #[test]
    fn rejects_bad_trees() {
        assert!(Topology::new(names(3), vec![(3, 0), (3, 1)], 3).is_err());
        assert!(Topology::new(vec!["a".into(), "a".into()], vec![(0, 1)], 0).is_err());
        // leaf with degree 2
        assert!(Topology::new(names(3), vec![(3, 0), (0, 1), (3, 2)], 3).is_err());
        assert!(BranchLengths::new(vec![0.1, 0.0]).is_err());
        assert!(BranchLengths::new(vec![0.1, f64::NAN]).is_err());
    }

    #[test]
    fn four_taxon_topologies() {
        let ts = enumerate_topologies(&["A", "B", "C", "D"]).unwrap();
        assert_eq!(ts.len(), 3);
        for (i, a) in ts.iter().enumerate() {
            assert_eq!(a.n_branches(), 5);
            assert_eq!(a.names(), ts[0].names());
            for b in &ts[i + 1..] {
                assert!(!a.same_topology(b));
            }
        }
        assert!(enumerate_topologies(&["A", "B", "C"]).is_err());
    }

    #[test]
    fn traversal_orders() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(3);
        let t = random_topology(names(7), &mut rng).unwrap();
        assert_eq!(t.n_branches(), 11);
        for root in 0..t.n_nodes() {
            let t = t.with_root(root).unwrap();
            let post = t.postorder();
            assert_eq!(post.len(), t.n_nodes());
            assert_eq!(post.last().unwrap().node, root);
            let mut done = vec![false; t.n_nodes()];
            for v in &post {
                for &(u, _) in t.neighbors(v.node) {
                    if Some(u) != v.parent {
                        assert!(done[u], "child {u} after parent {}", v.node);
                    }
                }
                done[v.node] = true;
            }
        }
    }

    #[test]
    fn splits_of_quartet() {
        let ts = enumerate_topologies(&["A", "B", "C", "D"]).unwrap();
        let internal = &ts[0].splits()[4];
        assert_eq!(
            internal.iter().map(String::as_str).collect::<Vec<_>>(),
            ["C", "D"]
        );
    }
}
