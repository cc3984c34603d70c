use std::collections::{BTreeMap, BTreeSet};

use evidenced::phylotree::{
    emit_newick, log_likelihood, parse_newick, random_topology, simulate_alignment, Alignment,
    BranchLengths, PatternSet, Topology, TreeLikelihood,
};
use evidenced::substmodel::{build_q, SubstitutionModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("t{i}")).collect()
}

fn random_model(rng: &mut ChaCha20Rng, gamma: bool) -> SubstitutionModel {
    let raw_pi: Vec<f64> = (0..4).map(|_| rng.random_range(0.05..1.0)).collect();
    let raw_rho: Vec<f64> = (0..6).map(|_| rng.random_range(0.05..1.0)).collect();
    let sp: f64 = raw_pi.iter().sum();
    let sr: f64 = raw_rho.iter().sum();
    let m = SubstitutionModel::gtr(
        std::array::from_fn(|i| raw_pi[i] / sp),
        std::array::from_fn(|i| raw_rho[i] / sr),
    )
    .unwrap();
    if gamma {
        m.with_gamma(rng.random_range(0.2..3.0), 4).unwrap()
    } else {
        m
    }
}

fn random_lengths(rng: &mut ChaCha20Rng, n: usize) -> BranchLengths {
    BranchLengths::new((0..n).map(|_| rng.random_range(0.01..1.0)).collect()).unwrap()
}

fn random_alignment(rng: &mut ChaCha20Rng, names: &[String], sites: usize) -> Alignment {
    let alphabet = b"ACGTACGTACGTRN-";
    let rows = names
        .iter()
        .map(|_| {
            (0..sites)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                .collect()
        })
        .collect();
    Alignment::new(names.to_vec(), rows).unwrap()
}

fn mask(c: u8) -> Vec<usize> {
    match c {
        b'A' => vec![0],
        b'C' => vec![1],
        b'G' => vec![2],
        b'T' => vec![3],
        b'R' => vec![0, 2],
        _ => vec![0, 1, 2, 3],
    }
}

/// Sums over every joint state assignment of all nodes, rooted at node 0.
fn brute_force(aln: &Alignment, topo: &Topology, bl: &BranchLengths, m: &SubstitutionModel) -> f64 {
    let n_nodes = topo.n_nodes();
    // orient edges away from node 0 by repeated sweeps
    let mut parent_of: Vec<Option<(usize, usize)>> = vec![None; n_nodes];
    let mut reached = vec![false; n_nodes];
    reached[0] = true;
    while reached.iter().any(|r| !r) {
        for (e, &(a, b)) in topo.edges().iter().enumerate() {
            if reached[a] && !reached[b] {
                parent_of[b] = Some((a, e));
                reached[b] = true;
            } else if reached[b] && !reached[a] {
                parent_of[a] = Some((b, e));
                reached[a] = true;
            }
        }
    }
    let q = build_q(m);
    let rates = m.category_rates();
    let mut total = 0.0;
    for site in 0..aln.n_sites() {
        let allowed: Vec<Vec<usize>> = (0..n_nodes)
            .map(|v| {
                if topo.is_leaf(v) {
                    mask(aln.row(&topo.names()[v]).unwrap()[site])
                } else {
                    vec![0, 1, 2, 3]
                }
            })
            .collect();
        let mut site_lik = 0.0;
        for &r in &rates {
            let p: Vec<_> = bl.as_slice().iter().map(|t| q.transition(t * r)).collect();
            let mut states = vec![0usize; n_nodes];
            let mut sum = 0.0;
            let mut idx = vec![0usize; n_nodes];
            'outer: loop {
                for v in 0..n_nodes {
                    states[v] = allowed[v][idx[v]];
                }
                let mut term = m.pi()[states[0]];
                for v in 1..n_nodes {
                    let (u, e) = parent_of[v].unwrap();
                    term *= p[e][states[u]][states[v]];
                }
                sum += term;
                for v in 0..n_nodes {
                    idx[v] += 1;
                    if idx[v] < allowed[v].len() {
                        continue 'outer;
                    }
                    idx[v] = 0;
                }
                break;
            }
            site_lik += sum / rates.len() as f64;
        }
        total += site_lik.ln();
    }
    total
}

#[test]
fn pruning_matches_brute_force() {
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    for instance in 0..200 {
        let n = rng.random_range(2..=4);
        let gamma = instance % 2 == 1;
        let topo = random_topology(names(n), &mut rng).unwrap();
        let bl = random_lengths(&mut rng, topo.n_branches());
        let m = if instance % 4 == 0 {
            SubstitutionModel::jc69()
        } else {
            random_model(&mut rng, gamma)
        };
        let sites = rng.random_range(1..=4);
        let aln = random_alignment(&mut rng, topo.names(), sites);
        let want = brute_force(&aln, &topo, &bl, &m);
        let got = log_likelihood(&aln, &topo, &bl, &m).unwrap();
        assert!(
            (got - want).abs() <= 1e-12 * want.abs(),
            "instance {instance}: {got} vs {want}"
        );
    }
}

#[test]
fn pattern_compression_is_neutral() {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    for _ in 0..20 {
        let topo = random_topology(names(5), &mut rng).unwrap();
        let bl = random_lengths(&mut rng, topo.n_branches());
        let m = random_model(&mut rng, true);
        // few distinct columns so compression actually merges
        let aln = simulate_alignment(&topo, &bl, &m, 300, rng.random()).unwrap();
        let compressed = TreeLikelihood::new(&aln, &topo).unwrap();
        let full =
            TreeLikelihood::with_patterns(&topo, PatternSet::build(&aln, &topo, false).unwrap())
                .unwrap();
        assert!(compressed.n_patterns() < full.n_patterns());
        let a = compressed.log_likelihood(&bl, &m).unwrap();
        let b = full.log_likelihood(&bl, &m).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs(), "{a} vs {b}");
    }
}

#[test]
fn root_placement_invariance() {
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    for _ in 0..10 {
        let topo = random_topology(names(6), &mut rng).unwrap();
        let bl = random_lengths(&mut rng, topo.n_branches());
        let m = random_model(&mut rng, true);
        let aln = random_alignment(&mut rng, topo.names(), 50);
        let base = log_likelihood(&aln, &topo, &bl, &m).unwrap();
        for root in 0..topo.n_nodes() {
            let l = log_likelihood(&aln, &topo.with_root(root).unwrap(), &bl, &m).unwrap();
            assert!((l - base).abs() < 1e-10, "root {root}: {l} vs {base}");
        }
    }
}

/// Log-domain pruning, independent of the production code path.
fn log_space_pruning(
    aln: &Alignment,
    topo: &Topology,
    bl: &BranchLengths,
    m: &SubstitutionModel,
) -> f64 {
    let q = build_q(m);
    let rates = m.category_rates();
    let lse = |v: &[f64]| {
        let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if mx == f64::NEG_INFINITY {
            mx
        } else {
            mx + v.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
        }
    };
    fn message(
        v: usize,
        from: usize,
        topo: &Topology,
        logp: &[[[f64; 4]; 4]],
        site: usize,
        aln: &Alignment,
        lse: &dyn Fn(&[f64]) -> f64,
    ) -> [f64; 4] {
        let mut out = if topo.is_leaf(v) {
            let allowed = mask(aln.row(&topo.names()[v]).unwrap()[site]);
            std::array::from_fn(|s| {
                if allowed.contains(&s) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            })
        } else {
            [0.0; 4]
        };
        for &(u, e) in topo.neighbors(v) {
            if u == from {
                continue;
            }
            let child = message(u, v, topo, logp, site, aln, lse);
            for (s, o) in out.iter_mut().enumerate() {
                let terms: Vec<f64> = (0..4).map(|j| logp[e][s][j] + child[j]).collect();
                *o += lse(&terms);
            }
        }
        out
    }
    let mut total = 0.0;
    for site in 0..aln.n_sites() {
        let mut per_cat = Vec::new();
        for &r in &rates {
            let logp: Vec<[[f64; 4]; 4]> = bl
                .as_slice()
                .iter()
                .map(|t| q.transition(t * r).map(|row| row.map(f64::ln)))
                .collect();
            let root = message(0, usize::MAX, topo, &logp, site, aln, &lse);
            let terms: Vec<f64> = (0..4).map(|s| m.pi()[s].ln() + root[s]).collect();
            per_cat.push(lse(&terms));
        }
        total += lse(&per_cat) - (rates.len() as f64).ln();
    }
    total
}

#[test]
fn scaling_on_long_alignments() {
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    for _ in 0..10 {
        let topo = random_topology(names(6), &mut rng).unwrap();
        let bl = random_lengths(&mut rng, topo.n_branches());
        let m = random_model(&mut rng, true);
        let aln = simulate_alignment(&topo, &bl, &m, 100_000, rng.random()).unwrap();
        let got = log_likelihood(&aln, &topo, &bl, &m).unwrap();
        // reference: brute-force per distinct column, weighted, with compensated summation
        let patterns = PatternSet::build(&aln, &topo, true).unwrap();
        let mut terms = Vec::with_capacity(patterns.len());
        for (cols, w) in patterns.patterns.iter().zip(&patterns.weights) {
            let rows: Vec<Vec<u8>> = cols
                .iter()
                .map(|&mk| vec![b"?ACGT"[[0, 1, 2, 0, 3, 0, 0, 0, 4][mk as usize]]])
                .collect();
            let one = Alignment::new(topo.names().to_vec(), rows).unwrap();
            terms.push(w * brute_force(&one, &topo, &bl, &m));
        }
        let want = neumaier(&terms);
        assert!(got.is_finite());
        assert!((got - want).abs() <= 1e-8 * want.abs(), "{got} vs {want}");
    }
}

fn neumaier(values: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for &v in values {
        let t = s + v;
        c += if s.abs() >= v.abs() {
            (s - t) + v
        } else {
            (v - t) + s
        };
        s = t;
    }
    s + c
}

#[test]
fn scaling_on_deep_trees() {
    // a single site on 400 taxa with long branches underflows without rescaling
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let topo = random_topology(names(400), &mut rng).unwrap();
    let bl = BranchLengths::new(
        (0..topo.n_branches())
            .map(|_| rng.random_range(1.0..3.0))
            .collect(),
    )
    .unwrap();
    let m = random_model(&mut rng, true);
    let aln = random_alignment(&mut rng, topo.names(), 3);
    let got = log_likelihood(&aln, &topo, &bl, &m).unwrap();
    let want = log_space_pruning(&aln, &topo, &bl, &m);
    assert!(got.is_finite() && got < -700.0 * 3.0 / 2.0, "{got}");
    assert!((got - want).abs() <= 1e-10 * want.abs(), "{got} vs {want}");
}

/// Split -> branch length, computed from the edge list alone.
fn split_map(topo: &Topology, bl: &BranchLengths) -> BTreeMap<BTreeSet<String>, u64> {
    let all: BTreeSet<String> = topo.names().iter().cloned().collect();
    let first = all.iter().next().unwrap().clone();
    let mut out = BTreeMap::new();
    for (e, &(a, _)) in topo.edges().iter().enumerate() {
        let mut side = BTreeSet::new();
        let mut stack = vec![a];
        let mut seen = BTreeSet::from([a]);
        while let Some(v) = stack.pop() {
            if topo.is_leaf(v) {
                side.insert(topo.names()[v].clone());
            }
            for (f, &(x, y)) in topo.edges().iter().enumerate() {
                if f == e {
                    continue;
                }
                let next = if x == v {
                    y
                } else if y == v {
                    x
                } else {
                    continue;
                };
                if seen.insert(next) {
                    stack.push(next);
                }
            }
        }
        let key = if side.contains(&first) {
            all.difference(&side).cloned().collect()
        } else {
            side
        };
        out.insert(key, bl.as_slice()[e].to_bits());
    }
    out
}

#[test]
fn newick_round_trip_is_isomorphic() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for _ in 0..100 {
        let n = rng.random_range(3..12);
        let topo = random_topology(names(n), &mut rng).unwrap();
        let bl = BranchLengths::new(
            (0..topo.n_branches())
                .map(|_| rng.random_range(1e-6..2.0))
                .collect(),
        )
        .unwrap();
        let text = emit_newick(&topo, &bl);
        let (t2, bl2) = parse_newick(&text).unwrap();
        assert_eq!(split_map(&topo, &bl), split_map(&t2, &bl2), "{text}");
        assert!(topo.same_topology(&t2));
    }
}
