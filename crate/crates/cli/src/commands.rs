use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use evidenced::compare::{
    bayes_factor, bayes_factor_replicated, derive_seed, evidence_from_chain, pool_replicates,
    render_bayes_factors, render_tree_selection, run_evidence, tree_select, BayesFactorReport,
    EvidenceConfig, EvidenceRun,
};
use evidenced::evidence::{render_estimates, render_k_grid, EvidenceEstimate, Method};
use evidenced::mcmc::{
    run_chain, write_chain_csv, ChainConfig, ChainSidecar, ModelChoice, PhyloPosterior, PriorSpec,
    Target,
};
use evidenced::phylotree::{
    emit_newick, enumerate_topologies, parse_newick, simulate_alignment, Alignment, BranchLengths,
    Topology,
};
use evidenced::substmodel::SubstitutionModel;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::*;
use crate::kgrid::parse_k_grid;
use crate::manifest::{self, digest_file, FileDigest, Outputs};
use crate::validate::{default_targets, run_target, Outcome};

/// Result of one command: the text printed to stdout and whether the run
/// should exit successfully.
#[derive(Debug)]
pub struct Report {
    pub text: String,
    pub ok: bool,
}

fn ok(text: String) -> Report {
    Report { text, ok: true }
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::fs::canonicalize(p).with_context(|| format!("resolving {}", p.display()))
}

/// Newick given inline (starting with `(`) or as a file path.
fn is_inline_tree(tree: &str) -> bool {
    tree.trim_start().starts_with('(')
}

fn resolve_tree(tree: &str) -> Result<String> {
    if is_inline_tree(tree) {
        Ok(tree.to_string())
    } else {
        Ok(absolute(Path::new(tree))?.display().to_string())
    }
}

fn tree_text(tree: &str) -> Result<String> {
    if is_inline_tree(tree) {
        Ok(tree.trim().to_string())
    } else {
        Ok(std::fs::read_to_string(tree)
            .with_context(|| format!("reading {tree}"))?
            .trim()
            .to_string())
    }
}

fn load_tree(tree: &str) -> Result<(Topology, BranchLengths)> {
    parse_newick(&tree_text(tree)?).with_context(|| format!("parsing tree {tree}"))
}

fn load_alignment(path: &Path) -> Result<Alignment> {
    Alignment::read(path).with_context(|| format!("reading {}", path.display()))
}

/// Input paths made absolute so that a manifest can be replayed from any
/// working directory.
pub fn resolve_paths(cmd: &Command) -> Result<Command> {
    let mut cmd = cmd.clone();
    match &mut cmd {
        Command::Simulate(a) => a.tree = resolve_tree(&a.tree)?,
        Command::Sample(a) => {
            a.alignment = absolute(&a.alignment)?;
            a.tree = resolve_tree(&a.tree)?;
        }
        Command::Evidence(a) => {
            for c in &mut a.chain {
                *c = absolute(c)?;
            }
            if let Some(p) = &mut a.alignment {
                *p = absolute(p)?;
            }
            if let Some(t) = &mut a.tree {
                *t = resolve_tree(t)?;
            }
        }
        Command::Compare(a) => {
            a.alignment = absolute(&a.alignment)?;
            a.tree = resolve_tree(&a.tree)?;
        }
        Command::Trees(a) => {
            a.alignment = absolute(&a.alignment)?;
            if let Some(p) = &mut a.trees {
                *p = absolute(p)?;
            }
        }
        Command::Validate(_) | Command::Replay(_) => {}
    }
    Ok(cmd)
}

/// Files read by a (resolved) command.
fn input_files(cmd: &Command) -> Vec<PathBuf> {
    let tree = |t: &str| (!is_inline_tree(t)).then(|| PathBuf::from(t));
    match cmd {
        Command::Simulate(a) => tree(&a.tree).into_iter().collect(),
        Command::Sample(a) => std::iter::once(a.alignment.clone())
            .chain(tree(&a.tree))
            .collect(),
        Command::Evidence(a) => {
            let mut v = Vec::new();
            for c in &a.chain {
                v.push(c.clone());
                let side = evidenced::mcmc::sidecar_path(c);
                if side.exists() {
                    v.push(side);
                }
            }
            v.extend(a.alignment.clone());
            v.extend(a.tree.as_deref().and_then(tree));
            v
        }
        Command::Compare(a) => std::iter::once(a.alignment.clone())
            .chain(tree(&a.tree))
            .collect(),
        Command::Trees(a) => std::iter::once(a.alignment.clone())
            .chain(a.trees.clone())
            .collect(),
        Command::Validate(_) | Command::Replay(_) => Vec::new(),
    }
}

fn out_dir(cmd: &Command) -> Option<&Path> {
    match cmd {
        Command::Simulate(a) => Some(&a.out.out),
        Command::Sample(a) => Some(&a.out.out),
        Command::Evidence(a) => Some(&a.out.out),
        Command::Compare(a) => Some(&a.out.out),
        Command::Trees(a) => Some(&a.out.out),
        Command::Validate(a) => Some(&a.out.out),
        Command::Replay(_) => None,
    }
}

fn set_out_dir(cmd: &mut Command, dir: PathBuf) {
    match cmd {
        Command::Simulate(a) => a.out.out = dir,
        Command::Sample(a) => a.out.out = dir,
        Command::Evidence(a) => a.out.out = dir,
        Command::Compare(a) => a.out.out = dir,
        Command::Trees(a) => a.out.out = dir,
        Command::Validate(a) => a.out.out = dir,
        Command::Replay(a) => a.out = dir,
    }
}

/// Runs a command, writing its outputs and a manifest to its output
/// directory.
pub fn run(cmd: &Command) -> Result<Report> {
    if let Command::Replay(a) = cmd {
        return replay(a);
    }
    let cmd = resolve_paths(cmd)?;
    let inputs = input_files(&cmd)
        .iter()
        .map(|p| digest_file(p))
        .collect::<Result<Vec<FileDigest>>>()?;
    let mut out = Outputs::create(out_dir(&cmd).expect("not a replay"))?;
    let report = match &cmd {
        Command::Simulate(a) => simulate(a, &mut out)?,
        Command::Sample(a) => sample(a, &mut out)?,
        Command::Evidence(a) => evidence(a, &mut out)?,
        Command::Compare(a) => compare(a, &mut out)?,
        Command::Trees(a) => trees(a, &mut out)?,
        Command::Validate(a) => validate(a, &mut out)?,
        Command::Replay(_) => unreachable!(),
    };
    out.finish(&cmd, inputs)?;
    Ok(report)
}

fn replay(a: &ReplayArgs) -> Result<Report> {
    let original = manifest::read_manifest(&a.manifest)?;
    manifest::check_inputs(&original)?;
    let mut cmd = original.command.clone();
    if matches!(cmd, Command::Replay(_)) {
        bail!("manifest records a replay");
    }
    set_out_dir(&mut cmd, a.out.clone());
    run(&cmd)?;
    let rerun = manifest::read_manifest(&a.out.join(manifest::MANIFEST_FILE))?;
    let diffs = manifest::compare_outputs(&original, &rerun);
    if diffs.is_empty() {
        Ok(ok(format!(
            "replay reproduced all {} outputs\n",
            original.outputs.len()
        )))
    } else {
        Ok(Report {
            text: format!("replay differs:\n  {}\n", diffs.join("\n  ")),
            ok: false,
        })
    }
}

fn model_choice(model: ModelArg, categories: usize) -> ModelChoice {
    match model {
        ModelArg::Jc69 => ModelChoice::Jc69,
        ModelArg::GtrGamma => ModelChoice::GtrGamma {
            n_categories: categories,
        },
    }
}

fn prior_spec(p: &PriorArgs) -> Result<PriorSpec> {
    Ok(PriorSpec::new(p.branch_rate, p.alpha_rate)?)
}

fn chain_config(c: &ChainArgs, seed: u64) -> ChainConfig {
    ChainConfig {
        draws: c.draws,
        burn_in: c.burn_in,
        thin: c.thin,
        seed,
        ..Default::default()
    }
}

fn method(e: EstimatorArg) -> Method {
    match e {
        EstimatorArg::Idr => Method::Idr,
        EstimatorArg::Hm => Method::Hm,
        EstimatorArg::Am => Method::AmPosteriorSurrogate,
    }
}

fn evidence_config(
    e: &EstimatorArgs,
    chain: ChainConfig,
    boot_seed: u64,
) -> Result<EvidenceConfig> {
    let mut methods: Vec<Method> = Vec::new();
    for m in e.estimators.iter().map(|&m| method(m)) {
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    if methods.is_empty() {
        bail!("no estimators selected");
    }
    Ok(EvidenceConfig {
        chain,
        k_grid: parse_k_grid(&e.k_grid)?,
        methods,
        bootstrap: e.bootstrap,
        bootstrap_seed: boot_seed,
        ..Default::default()
    })
}

const HM_WARNING: &str = "warning: the harmonic mean estimator can have infinite variance; \
its error estimates may be unreliable";

fn simulate(a: &SimulateArgs, out: &mut Outputs) -> Result<Report> {
    let (topo, lengths) = load_tree(&a.tree)?;
    let model = match a.model.model {
        ModelArg::Jc69 => SubstitutionModel::jc69(),
        ModelArg::GtrGamma => {
            let pi: [f64; 4] =
                a.pi.clone()
                    .try_into()
                    .map_err(|_| anyhow!("--pi needs 4 values"))?;
            let rho: [f64; 6] = a
                .rho
                .clone()
                .try_into()
                .map_err(|_| anyhow!("--rho needs 6 values"))?;
            let total: f64 = rho.iter().sum();
            SubstitutionModel::gtr(pi, rho.map(|r| r / total))?
                .with_gamma(a.alpha, a.model.categories)?
        }
    };
    let aln = simulate_alignment(&topo, &lengths, &model, a.sites, a.seed.seed)?;
    out.write("alignment.fasta", aln.to_fasta().as_bytes())?;
    Ok(ok(format!(
        "simulated {} taxa × {} sites into {}\n",
        aln.n_taxa(),
        aln.n_sites(),
        out.dir().join("alignment.fasta").display()
    )))
}

fn chain_name(r: usize, replicates: usize) -> String {
    if replicates == 1 {
        "chain".into()
    } else {
        format!("chain-{}", r + 1)
    }
}

fn sample(a: &SampleArgs, out: &mut Outputs) -> Result<Report> {
    if a.replicates == 0 {
        bail!("--replicates must be at least 1");
    }
    let aln = load_alignment(&a.alignment)?;
    let (topo, _) = load_tree(&a.tree)?;
    let model = model_choice(a.model.model, a.model.categories);
    let prior = prior_spec(&a.prior)?;
    let post = PhyloPosterior::new(&aln, &topo, model, prior)?;
    let unit = BranchLengths::new(vec![1.0; topo.n_branches()])?;
    let chains = (0..a.replicates)
        .into_par_iter()
        .map(|r| {
            let cfg = chain_config(&a.chain, derive_seed(a.seed.seed, r as u64));
            Ok(run_chain(&post, &post.initial_point(), &cfg)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut text = String::new();
    for (r, chain) in chains.iter().enumerate() {
        let name = chain_name(r, a.replicates);
        let mut csv = Vec::new();
        write_chain_csv(&mut csv, chain)?;
        out.write(&format!("{name}.csv"), &csv)?;
        let sidecar = ChainSidecar {
            model: Some(model),
            priors: Some(prior),
            tree: Some(emit_newick(&topo, &unit)),
            data_fingerprint: Some(aln.fingerprint()),
            ..ChainSidecar::for_chain(chain)
        };
        out.write_json(&format!("{name}.json"), &sidecar)?;
        text.push_str(&format!(
            "{name}: {} draws, acceptance {:.3}, ESS {:.0}\n",
            chain.len(),
            chain.info.acceptance_rate.unwrap_or(f64::NAN),
            chain.multivariate_ess()?
        ));
    }
    Ok(ok(text))
}

/// Product of independent standard normals, for checking the pipeline on
/// saved draws with a known evidence of 1.
struct StdNormal(usize);

impl Target for StdNormal {
    fn dim(&self) -> usize {
        self.0
    }

    fn log_density(&self, p: &[f64]) -> evidenced::Result<(f64, f64)> {
        let lp = p
            .iter()
            .map(|x| -0.5 * x * x - 0.918_938_533_204_672_8)
            .sum();
        Ok((lp, lp))
    }
}

#[derive(Debug, Serialize)]
struct EvidenceOutput {
    chains: Vec<EvidenceRun>,
    /// Per-method estimates pooled over chains (replicate RMSE when R > 1).
    pooled: Vec<EvidenceEstimate>,
}

fn evidence(a: &EvidenceArgs, out: &mut Outputs) -> Result<Report> {
    let needs_target = a.estimators.estimators.contains(&EstimatorArg::Idr);
    let aln = a.alignment.as_deref().map(load_alignment).transpose()?;
    let mut runs = Vec::new();
    for (i, path) in a.chain.iter().enumerate() {
        let (chain, sidecar) = evidenced::mcmc::read_chain(path)
            .with_context(|| format!("reading chain {}", path.display()))?;
        let fingerprint = sidecar.as_ref().and_then(|s| s.data_fingerprint.clone());
        if let (Some(aln), Some(fp)) = (&aln, &fingerprint) {
            if aln.fingerprint() != *fp {
                bail!(
                    "{} was sampled from different data than {}",
                    path.display(),
                    a.alignment.as_ref().unwrap().display()
                );
            }
        }
        let cfg = evidence_config(
            &a.estimators,
            ChainConfig::default(),
            derive_seed(a.seed.seed, i as u64),
        )?;
        let target: Option<Box<dyn Target>> = match a.target {
            TargetArg::StdNormal => Some(Box::new(StdNormal(chain.dim()))),
            TargetArg::Phylo if needs_target => {
                let aln = aln
                    .as_ref()
                    .ok_or_else(|| anyhow!("IDR on a phylogenetic chain needs --alignment"))?;
                let side = sidecar.as_ref();
                let tree = match (&a.tree, side.and_then(|s| s.tree.clone())) {
                    (Some(t), _) => tree_text(t)?,
                    (None, Some(t)) => t,
                    (None, None) => bail!("{} has no recorded tree; pass --tree", path.display()),
                };
                let (topo, _) = parse_newick(&tree)?;
                let model = match (a.model, side.and_then(|s| s.model)) {
                    (Some(m), _) => {
                        model_choice(m, evidenced::substmodel::DEFAULT_GAMMA_CATEGORIES)
                    }
                    (None, Some(m)) => m,
                    (None, None) => bail!("{} has no recorded model; pass --model", path.display()),
                };
                let prior = side.and_then(|s| s.priors).unwrap_or_default();
                let post = PhyloPosterior::new(aln, &topo, model, prior)?;
                if post.layout().dim() != chain.dim() {
                    bail!(
                        "{} has {} columns, the model needs {}",
                        path.display(),
                        chain.dim(),
                        post.layout().dim()
                    );
                }
                Some(Box::new(post))
            }
            TargetArg::Phylo => None,
        };
        let fp = fingerprint.or_else(|| aln.as_ref().map(|a| a.fingerprint()));
        runs.push(evidence_from_chain(
            target.as_deref(),
            &chain,
            &cfg,
            fp.as_deref(),
        )?);
    }
    let methods: Vec<Method> = runs[0].estimates.iter().map(|e| e.method).collect();
    let pooled = methods
        .iter()
        .map(|&m| {
            let reps: Vec<EvidenceEstimate> =
                runs.iter().filter_map(|r| r.get(m).cloned()).collect();
            Ok(pool_replicates(&reps)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut text = render_estimates(&pooled);
    if let Some(grid) = &runs[0].k_grid {
        text.push_str("\nIDR k grid (first chain)\n");
        text.push_str(&render_k_grid(grid));
    }
    if methods.contains(&Method::Hm) {
        text.push_str(&format!("\n{HM_WARNING}\n"));
    }
    out.write("evidence.txt", text.as_bytes())?;
    out.write_json(
        "evidence.json",
        &EvidenceOutput {
            chains: runs,
            pooled,
        },
    )?;
    Ok(ok(text))
}

#[derive(Debug, Serialize)]
struct CompareOutput {
    /// `[M0, M1]` labels.
    models: [String; 2],
    /// `runs[m][r]` for model `m` (0 = M0) and replicate `r`.
    runs: [Vec<EvidenceRun>; 2],
    reports: Vec<BayesFactorReport>,
}

fn compare(a: &CompareArgs, out: &mut Outputs) -> Result<Report> {
    let [m1, m0] = a.models[..] else {
        bail!("--models needs exactly two models, M1,M0");
    };
    if a.replicates == 0 {
        bail!("--replicates must be at least 1");
    }
    let aln = load_alignment(&a.alignment)?;
    let (topo, _) = load_tree(&a.tree)?;
    let prior = prior_spec(&a.prior)?;
    let models = [
        model_choice(m0, a.categories),
        model_choice(m1, a.categories),
    ];
    // model m, replicate r: chain seed derived twice from the master seed
    let jobs: Vec<(usize, usize)> = (0..2)
        .flat_map(|m| (0..a.replicates).map(move |r| (m, r)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(m, r)| {
            let seed = derive_seed(derive_seed(a.seed.seed, m as u64), r as u64);
            let cfg = evidence_config(&a.estimators, chain_config(&a.chain, seed), seed)?;
            Ok(run_evidence(&aln, &topo, models[m], prior, &cfg)?.0)
        })
        .collect::<Result<Vec<_>>>()?;
    let (runs0, runs1) = runs.split_at(a.replicates);
    let reports = runs0[0]
        .estimates
        .iter()
        .map(|e| {
            let reps = |rs: &[EvidenceRun]| -> Vec<EvidenceEstimate> {
                rs.iter().filter_map(|r| r.get(e.method).cloned()).collect()
            };
            let (r1, r0) = (reps(runs1), reps(runs0));
            Ok(if a.replicates >= 2 {
                bayes_factor_replicated(&r1, &r0)?
            } else {
                bayes_factor(&r1[0], &r0[0])?
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = [models[0].label(), models[1].label()];
    let mut text = render_bayes_factors(&reports, labels);
    if reports.iter().any(|r| r.method == Method::Hm) {
        text.push_str(&format!("\n{HM_WARNING}\n"));
    }
    out.write("compare.txt", text.as_bytes())?;
    out.write_json(
        "compare.json",
        &CompareOutput {
            models: labels.map(String::from),
            runs: [runs0.to_vec(), runs1.to_vec()],
            reports,
        },
    )?;
    Ok(ok(text))
}

fn trees(a: &TreesArgs, out: &mut Outputs) -> Result<Report> {
    let aln = load_alignment(&a.alignment)?;
    let topologies = match &a.trees {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| Ok(parse_newick(l.trim())?.0))
            .collect::<Result<Vec<_>>>()?,
        None => {
            let names: Vec<&str> = aln.names().iter().map(String::as_str).collect();
            enumerate_topologies(&names)
                .context("pass --trees for alignments with other than 4 taxa")?
        }
    };
    if topologies.is_empty() {
        bail!("no candidate trees");
    }
    let model = model_choice(a.model.model, a.model.categories);
    let prior = prior_spec(&a.prior)?;
    let cfg = evidence_config(
        &a.estimators,
        chain_config(&a.chain, a.seed.seed),
        derive_seed(a.seed.seed, u64::MAX),
    )?;
    let sel = tree_select(&aln, &topologies, model, prior, &cfg);
    let text = render_tree_selection(&sel);
    out.write("trees.txt", text.as_bytes())?;
    out.write_json("trees.json", &sel)?;
    Ok(Report {
        text,
        ok: sel.all_succeeded(),
    })
}

fn validate(a: &ValidateArgs, out: &mut Outputs) -> Result<Report> {
    let grid = parse_k_grid(&a.k_grid)?;
    let targets: Vec<_> = default_targets()
        .into_iter()
        .filter(|t| a.targets.is_empty() || a.targets.contains(&t.name))
        .collect();
    if targets.is_empty() {
        bail!("no targets match {:?}", a.targets);
    }
    let outcomes = targets
        .par_iter()
        .enumerate()
        .map(|(i, t)| run_target(t, a.draws, derive_seed(a.seed.seed, i as u64), &grid))
        .collect::<Result<Vec<Outcome>>>()?;
    let mut text =
        String::from("target           dim   log_c     estimate  rmse      k_opt     result\n");
    for o in &outcomes {
        let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        text.push_str(&format!(
            "{:<16} {:<5} {:<9.4} {:<9} {:<9} {:<9} {}\n",
            o.name,
            o.dim,
            o.log_c_true,
            f(o.log_c_hat),
            f(o.rmse),
            o.k_opt.map_or("-".to_string(), |k| format!("{k:.0e}")),
            match (&o.error, o.pass) {
                (Some(e), _) => format!("error: {e}"),
                (None, true) => "pass".into(),
                (None, false) => "FAIL".into(),
            }
        ));
    }
    out.write("validate.txt", text.as_bytes())?;
    out.write_json("validate.json", &outcomes)?;
    Ok(Report {
        text,
        ok: outcomes.iter().all(|o| o.pass),
    })
}
