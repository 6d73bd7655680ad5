//! Forward simulation of trait matrices.
//!
//! Traits are born at rate λ on every lineage and each instance dies at
//! rate μ. The root lineage starts at equilibrium with Poisson(λ/μ) traits.
//! A catastrophe kills each trait independently with probability κ and
//! adds Poisson(κλ/μ) new ones. Without borrowing each edge is simulated
//! exactly from survival probabilities; with borrowing, all extant lineages
//! are advanced together event by event.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp, Gamma, Poisson};

use crate::config::{CatastropheConfig, InitialTree, LossRate, RunConfig, TreePriorConfig};
use crate::newick::write_newick;
use crate::nexus::{write_nexus, Cell, CladeConstraint, TraitMatrix};
use crate::output::{with_suffix, write_text};
use crate::priors::{psi_to_mu, RhoMode};
use crate::tree::Tree;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BorrowingMode {
    /// Copies go to any other extant lineage.
    Global,
    /// Copies go only to lineages whose common ancestor is less than this
    /// many years old.
    Local { distance: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Borrowing {
    /// Copy rate per trait instance, relative to μ.
    pub rate: f64,
    pub mode: BorrowingMode,
}

/// Rates of the trait process.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraitProcess {
    pub lambda: f64,
    pub mu: f64,
    /// Death probability at each catastrophe on the tree.
    pub kappa: f64,
    /// Relative standard deviation of per-branch death rates; 0 for none.
    pub branch_sd: f64,
    /// Relative standard deviation of per-branch, per-class death rates.
    pub class_sd: f64,
    pub borrowing: Option<Borrowing>,
}

impl TraitProcess {
    pub fn new(lambda: f64, mu: f64) -> Self {
        TraitProcess {
            lambda,
            mu,
            kappa: 0.0,
            branch_sd: 0.0,
            class_sd: 0.0,
            borrowing: None,
        }
    }

    fn check(&self) -> Result<()> {
        let ok = self.lambda > 0.0
            && self.mu > 0.0
            && self.lambda.is_finite()
            && self.mu.is_finite()
            && (0.0..=1.0).contains(&self.kappa)
            && self.branch_sd >= 0.0
            && self.class_sd >= 0.0
            && self.borrowing.is_none_or(|b| b.rate >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid trait process {self:?}"
            )))
        }
    }
}

/// Simulated presence of traits at the leaves.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    /// `presence[j][leaf]` for each trait `j` present at some leaf.
    pub presence: Vec<Vec<bool>>,
    /// Observation class of each trait.
    pub classes: Vec<usize>,
    pub n_classes: usize,
    /// Death rate used on the edge above each node, averaged over classes.
    pub branch_mu: Vec<f64>,
}

impl Simulation {
    pub fn n_traits(&self) -> usize {
        self.presence.len()
    }

    /// Number of traits present at each leaf.
    pub fn leaf_counts(&self, n_leaves: usize) -> Vec<usize> {
        let mut c = vec![0; n_leaves];
        for col in &self.presence {
            for (i, &p) in col.iter().enumerate() {
                c[i] += p as usize;
            }
        }
        c
    }
}

/// Gamma draw with the given mean and relative standard deviation.
fn gamma_around<R: Rng + ?Sized>(mean: f64, rel_sd: f64, rng: &mut R) -> f64 {
    if rel_sd <= 0.0 {
        return mean;
    }
    let shape = 1.0 / (rel_sd * rel_sd);
    Gamma::new(shape, mean / shape)
        .expect("valid gamma")
        .sample(rng)
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).expect("finite mean").sample(rng) as usize
    }
}

/// Simulate all traits as a single class.
pub fn simulate_traits<R: Rng + ?Sized>(
    tree: &Tree,
    process: &TraitProcess,
    rng: &mut R,
) -> Result<Simulation> {
    process.check()?;
    let branch_mu: Vec<f64> = (0..tree.n_nodes())
        .map(|_| gamma_around(process.mu, process.branch_sd, rng))
        .collect();
    let presence = simulate_class(tree, process, process.lambda, &branch_mu, rng);
    let n = presence.len();
    Ok(Simulation {
        presence,
        classes: vec![0; n],
        n_classes: 1,
        branch_mu,
    })
}

/// Simulate `n_obs` classes, each born at rate λ/n_obs, conditioning every
/// leaf to carry at least one trait of every class. Each class is
/// resimulated until the condition holds, up to `max_attempts` times.
pub fn enforce_no_empty_field<R: Rng + ?Sized>(
    tree: &Tree,
    process: &TraitProcess,
    n_obs: usize,
    max_attempts: usize,
    rng: &mut R,
) -> Result<Simulation> {
    process.check()?;
    if n_obs == 0 {
        return Err(Error::InvalidArgument(
            "need at least one observation class".into(),
        ));
    }
    let branch_mu: Vec<f64> = (0..tree.n_nodes())
        .map(|_| gamma_around(process.mu, process.branch_sd, rng))
        .collect();
    let lambda = process.lambda / n_obs as f64;
    let leaves = tree.n_leaves();
    let mut presence = Vec::new();
    let mut classes = Vec::new();
    let mut mean_mu = vec![0.0; tree.n_nodes()];
    for class in 0..n_obs {
        let class_mu: Vec<f64> = branch_mu
            .iter()
            .map(|&m| gamma_around(m, process.class_sd, rng))
            .collect();
        let mut attempt = 0;
        let cols = loop {
            attempt += 1;
            let cols = simulate_class(tree, process, lambda, &class_mu, rng);
            if (0..leaves).all(|i| cols.iter().any(|c| c[i])) {
                break cols;
            }
            if attempt >= max_attempts {
                return Err(Error::Simulation(format!(
                    "class {} left a leaf without traits in {max_attempts} attempts; \
                     increase K or lower the number of classes",
                    class + 1
                )));
            }
        };
        for (m, c) in mean_mu.iter_mut().zip(&class_mu) {
            *m += c / n_obs as f64;
        }
        classes.extend(std::iter::repeat_n(class, cols.len()));
        presence.extend(cols);
    }
    Ok(Simulation {
        presence,
        classes,
        n_classes: n_obs,
        branch_mu: mean_mu,
    })
}

fn simulate_class<R: Rng + ?Sized>(
    tree: &Tree,
    process: &TraitProcess,
    lambda: f64,
    branch_mu: &[f64],
    rng: &mut R,
) -> Vec<Vec<bool>> {
    match process.borrowing {
        Some(b) if b.rate > 0.0 => simulate_events(tree, process, lambda, branch_mu, b, rng),
        _ => simulate_edges(tree, process, lambda, branch_mu, rng),
    }
}

/// Leaf sets as presence columns, one per trait seen at some leaf.
fn columns(tree: &Tree, at_leaves: Vec<Vec<usize>>, n_ids: usize) -> Vec<Vec<bool>> {
    let l = tree.n_leaves();
    let mut cols: Vec<Option<Vec<bool>>> = vec![None; n_ids];
    for (leaf, ids) in at_leaves.into_iter().enumerate() {
        for id in ids {
            cols[id].get_or_insert_with(|| vec![false; l])[leaf] = true;
        }
    }
    cols.into_iter().flatten().collect()
}

fn sorted_catastrophes(tree: &Tree, v: usize) -> Vec<f64> {
    let mut pos = tree.node(v).catastrophes.clone();
    pos.sort_by(f64::total_cmp);
    pos
}

fn simulate_edges<R: Rng + ?Sized>(
    tree: &Tree,
    process: &TraitProcess,
    lambda: f64,
    branch_mu: &[f64],
    rng: &mut R,
) -> Vec<Vec<bool>> {
    let nu = process.kappa * lambda / process.mu;
    let mut next_id = 0usize;
    let fresh = |next_id: &mut usize, n: usize| {
        let ids = *next_id..*next_id + n;
        *next_id += n;
        ids
    };
    let mut at: Vec<Vec<usize>> = vec![Vec::new(); tree.n_nodes()];
    let root = tree.root();
    at[root] = fresh(&mut next_id, poisson(lambda / process.mu, rng)).collect();
    for v in tree.preorder() {
        let Some(p) = tree.parent(v) else { continue };
        let mu = branch_mu[v];
        let len = tree.branch_length(v);
        let mut traits = at[p].clone();
        let segment = |traits: &mut Vec<usize>, next_id: &mut usize, s: f64, rng: &mut R| {
            let keep = (-mu * s).exp();
            traits.retain(|_| rng.random::<f64>() < keep);
            traits.extend(fresh(next_id, poisson(lambda / mu * (1.0 - keep), rng)));
        };
        let mut last = 0.0;
        for pos in sorted_catastrophes(tree, v) {
            segment(&mut traits, &mut next_id, (pos - last) * len, rng);
            traits.retain(|_| rng.random::<f64>() >= process.kappa);
            traits.extend(fresh(&mut next_id, poisson(nu, rng)));
            last = pos;
        }
        segment(&mut traits, &mut next_id, (1.0 - last) * len, rng);
        at[v] = traits;
    }
    let leaves: Vec<Vec<usize>> = (0..tree.n_leaves())
        .map(|i| std::mem::take(&mut at[i]))
        .collect();
    columns(tree, leaves, next_id)
}

struct Lineage {
    node: usize,
    traits: Vec<usize>,
}

fn simulate_events<R: Rng + ?Sized>(
    tree: &Tree,
    process: &TraitProcess,
    lambda: f64,
    branch_mu: &[f64],
    borrowing: Borrowing,
    rng: &mut R,
) -> Vec<Vec<bool>> {
    let nu = process.kappa * lambda / process.mu;
    let copy_rate = borrowing.rate * process.mu;
    let root = tree.root();
    let mut next_id = poisson(lambda / process.mu, rng);
    let mut at_leaves: Vec<Vec<usize>> = vec![Vec::new(); tree.n_leaves()];

    // Scheduled events in order of decreasing age: node splits or leaf
    // samplings, and catastrophes.
    #[derive(Clone, Copy)]
    enum Fixed {
        Node(usize),
        Catastrophe(usize),
    }
    let mut fixed: Vec<(f64, Fixed)> = Vec::new();
    for v in 0..tree.n_nodes() {
        fixed.push((tree.age(v), Fixed::Node(v)));
        if let Some(p) = tree.parent(v) {
            let (top, len) = (tree.age(p), tree.branch_length(v));
            for &pos in &tree.node(v).catastrophes {
                fixed.push((top - pos * len, Fixed::Catastrophe(v)));
            }
        }
    }
    fixed.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut lineages: Vec<Lineage> = Vec::new();
    let mut t = tree.age(root);
    let mut pending = (0..next_id).collect::<Vec<usize>>();
    for (age, event) in fixed {
        while !lineages.is_empty() {
            let births = lambda * lineages.len() as f64;
            let deaths: f64 = lineages
                .iter()
                .map(|l| l.traits.len() as f64 * branch_mu[l.node])
                .sum();
            let n_inst: usize = lineages.iter().map(|l| l.traits.len()).sum();
            let copies = copy_rate * n_inst as f64;
            let total = births + deaths + copies;
            let dt = Exp::new(total).expect("positive rate").sample(rng);
            if t - dt <= age {
                break;
            }
            t -= dt;
            let u = rng.random::<f64>() * total;
            if u < births {
                let k = rng.random_range(0..lineages.len());
                lineages[k].traits.push(next_id);
                next_id += 1;
            } else if u < births + deaths {
                let mut r = u - births;
                let mut k = 0;
                while k + 1 < lineages.len() {
                    let w = lineages[k].traits.len() as f64 * branch_mu[lineages[k].node];
                    if r < w {
                        break;
                    }
                    r -= w;
                    k += 1;
                }
                let n = lineages[k].traits.len();
                if n > 0 {
                    let j = rng.random_range(0..n);
                    lineages[k].traits.swap_remove(j);
                }
            } else {
                let mut j = rng.random_range(0..n_inst);
                let mut k = 0;
                while j >= lineages[k].traits.len() {
                    j -= lineages[k].traits.len();
                    k += 1;
                }
                let id = lineages[k].traits[j];
                let from = lineages[k].node;
                let eligible: Vec<usize> = (0..lineages.len())
                    .filter(|&m| m != k)
                    .filter(|&m| match borrowing.mode {
                        BorrowingMode::Global => true,
                        BorrowingMode::Local { distance } => {
                            tree.age(tree.mrca_pair(from, lineages[m].node)) - t < distance
                        }
                    })
                    .collect();
                if !eligible.is_empty() {
                    let m = eligible[rng.random_range(0..eligible.len())];
                    if !lineages[m].traits.contains(&id) {
                        lineages[m].traits.push(id);
                    }
                }
            }
        }
        t = age;
        match event {
            Fixed::Node(v) => {
                let traits = if v == root {
                    std::mem::take(&mut pending)
                } else {
                    let k = lineages
                        .iter()
                        .position(|l| l.node == v)
                        .expect("lineage is extant");
                    lineages.swap_remove(k).traits
                };
                match tree.children(v) {
                    Some([a, b]) => {
                        lineages.push(Lineage {
                            node: a,
                            traits: traits.clone(),
                        });
                        lineages.push(Lineage { node: b, traits });
                    }
                    None => at_leaves[v] = traits,
                }
            }
            Fixed::Catastrophe(v) => {
                let l = lineages
                    .iter_mut()
                    .find(|l| l.node == v)
                    .expect("lineage is extant");
                l.traits.retain(|_| rng.random::<f64>() >= process.kappa);
                let n = poisson(nu, rng);
                l.traits.extend(next_id..next_id + n);
                next_id += n;
            }
        }
    }
    columns(tree, at_leaves, next_id)
}

/// How simulated traits are observed.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Observation {
    /// Draw ξ_i ~ Beta(1, 1/3) per leaf and hide cells with probability
    /// 1 - ξ_i; under several classes whole (leaf, class) blocks are hidden.
    pub missing: bool,
    /// Drop traits recorded at only one leaf.
    pub remove_rare: bool,
}

/// Observed matrix and the recording probabilities used.
#[derive(Clone, Debug, PartialEq)]
pub struct Observed {
    pub matrix: TraitMatrix,
    pub xi: Vec<f64>,
    /// Class of each retained trait.
    pub classes: Vec<usize>,
}

/// Draw a recording probability from Beta(1, 1/3).
pub fn draw_xi<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Beta::new(1.0, 1.0 / 3.0).expect("valid beta").sample(rng)
}

pub fn apply_observation_model<R: Rng + ?Sized>(
    sim: &Simulation,
    taxa: &[String],
    obs: &Observation,
    rng: &mut R,
) -> Result<Observed> {
    let l = taxa.len();
    let xi: Vec<f64> = if obs.missing {
        (0..l).map(|_| draw_xi(rng)).collect()
    } else {
        vec![1.0; l]
    };
    let block_hidden: Vec<Vec<bool>> = if obs.missing && sim.n_classes > 1 {
        (0..l)
            .map(|i| {
                (0..sim.n_classes)
                    .map(|_| rng.random::<f64>() >= xi[i])
                    .collect()
            })
            .collect()
    } else {
        vec![vec![false; sim.n_classes]; l]
    };
    let mut columns = Vec::new();
    let mut classes = Vec::new();
    for (col, &class) in sim.presence.iter().zip(&sim.classes) {
        let cells: Vec<Cell> = (0..l)
            .map(|i| {
                let hidden = if sim.n_classes > 1 {
                    block_hidden[i][class]
                } else {
                    obs.missing && rng.random::<f64>() >= xi[i]
                };
                match (hidden, col[i]) {
                    (true, _) => Cell::Missing,
                    (false, true) => Cell::Present,
                    (false, false) => Cell::Absent,
                }
            })
            .collect();
        let ones = cells.iter().filter(|&&c| c == Cell::Present).count();
        if ones == 0 || (obs.remove_rare && ones == 1) {
            continue;
        }
        columns.push(cells);
        classes.push(class);
    }
    if columns.is_empty() {
        log::warn!("no traits remain after observation");
    }
    let matrix = TraitMatrix::from_columns(taxa.to_vec(), &columns)?;
    Ok(Observed {
        matrix,
        xi,
        classes,
    })
}

/// Calibrations on `count` distinct internal nodes chosen uniformly: a node
/// of age t gets root bounds `[(1 - c/100) t, (1 + c/100) t]`.
pub fn synthesize_clades<R: Rng + ?Sized>(
    tree: &Tree,
    count: usize,
    accuracy: f64,
    rng: &mut R,
) -> Result<Vec<CladeConstraint>> {
    let internal: Vec<usize> = tree.internal_nodes().collect();
    if count == 0 || count > internal.len() {
        return Err(Error::InvalidArgument(format!(
            "can synthesize between 1 and {} clades, {count} requested",
            internal.len()
        )));
    }
    if !(0.0..100.0).contains(&accuracy) {
        return Err(Error::InvalidArgument(format!(
            "clade accuracy must lie in [0, 100), got {accuracy}"
        )));
    }
    let chosen = rand::seq::index::sample(rng, internal.len(), count);
    let mut nodes: Vec<usize> = chosen.iter().map(|k| internal[k]).collect();
    nodes.sort_unstable();
    Ok(nodes
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let t = tree.age(v);
            let taxa = tree
                .leaves_below(v)
                .iter()
                .map(|&i| tree.taxa()[i].clone())
                .collect();
            let mut c = CladeConstraint::new(format!("clade_{}", k + 1), taxa);
            c.rootmin = Some((1.0 - accuracy / 100.0) * t);
            c.rootmax = Some((1.0 + accuracy / 100.0) * t);
            c
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub enum SynthTree {
    /// Exponential branching tree on `n_leaves` taxa named `taxon_1`, ...
    Random {
        n_leaves: usize,
        theta: f64,
    },
    Given(Tree),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthCatastrophes {
    pub kappa: f64,
    /// When set, catastrophes are placed on the tree as a Poisson process
    /// of this rate, replacing any it carries.
    pub rho: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoEmptyField {
    pub n_obs: usize,
    pub class_sd: f64,
}

/// Settings for generating a synthetic data set.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub tree: SynthTree,
    /// Mean number of traits per taxon, K = λ/μ.
    pub traits_per_taxon: f64,
    /// Probability of losing a trait in 1000 years.
    pub psi: f64,
    pub catastrophes: Option<SynthCatastrophes>,
    pub branch_sd: f64,
    pub nef: Option<NoEmptyField>,
    pub borrowing: Option<Borrowing>,
    pub missing: bool,
    pub remove_rare: bool,
    /// Number of calibrated clades and their accuracy c in percent.
    pub clades: Option<(usize, f64)>,
    pub max_attempts: usize,
}

impl SynthConfig {
    pub fn new(tree: SynthTree, traits_per_taxon: f64, psi: f64) -> Self {
        SynthConfig {
            tree,
            traits_per_taxon,
            psi,
            catastrophes: None,
            branch_sd: 0.0,
            nef: None,
            borrowing: None,
            missing: false,
            remove_rare: false,
            clades: None,
            max_attempts: 1000,
        }
    }
}

/// A synthetic data set with the values that generated it.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub tree: Tree,
    pub matrix: TraitMatrix,
    pub xi: Vec<f64>,
    pub clades: Vec<CladeConstraint>,
    pub mu: f64,
    pub lambda: f64,
    pub config: SynthConfig,
}

impl SynthData {
    /// Key-value record of the generating parameters.
    pub fn parameters(&self) -> BTreeMap<String, String> {
        let c = &self.config;
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("K", c.traits_per_taxon.to_string());
        put("psi", c.psi.to_string());
        put("mu", self.mu.to_string());
        put("lambda", self.lambda.to_string());
        put("root_age", self.tree.age(self.tree.root()).to_string());
        put("n_traits", self.matrix.n_traits().to_string());
        if let Some(cat) = c.catastrophes {
            put("kappa", cat.kappa.to_string());
            put("nu", (cat.kappa * self.lambda / self.mu).to_string());
            if let Some(rho) = cat.rho {
                put("rho", rho.to_string());
            }
            put("n_catastrophes", self.tree.total_catastrophes().to_string());
        }
        if c.branch_sd > 0.0 {
            put("sigma", c.branch_sd.to_string());
        }
        if let Some(n) = c.nef {
            put("n_obs", n.n_obs.to_string());
            put("varsigma", n.class_sd.to_string());
        }
        if let Some(b) = c.borrowing {
            put("beta", b.rate.to_string());
            if let BorrowingMode::Local { distance } = b.mode {
                put("borrowing_distance", distance.to_string());
            }
        }
        if c.missing {
            put(
                "xi",
                self.xi
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        put("remove_rare", (c.remove_rare as u8).to_string());
        m
    }
}

fn place_catastrophes<R: Rng + ?Sized>(tree: &mut Tree, rho: f64, rng: &mut R) {
    for v in tree.edges().collect::<Vec<_>>() {
        let n = poisson(rho * tree.branch_length(v), rng);
        let cats = tree.catastrophes_mut(v);
        cats.clear();
        cats.extend((0..n).map(|_| rng.random::<f64>()));
    }
}

/// Generate a synthetic data set.
pub fn synthesize<R: Rng + ?Sized>(config: &SynthConfig, rng: &mut R) -> Result<SynthData> {
    if !(config.traits_per_taxon > 0.0) {
        return Err(Error::InvalidArgument("K must be positive".into()));
    }
    let mu = psi_to_mu(config.psi)?;
    let lambda = config.traits_per_taxon * mu;
    let mut tree = match &config.tree {
        SynthTree::Random { n_leaves, theta } => {
            let taxa: Arc<[String]> = (1..=*n_leaves).map(|i| format!("taxon_{i}")).collect();
            Tree::random_exponential(taxa, *theta, None, rng)?
        }
        SynthTree::Given(t) => t.clone(),
    };
    let kappa = match config.catastrophes {
        Some(c) => {
            if let Some(rho) = c.rho {
                place_catastrophes(&mut tree, rho, rng);
            }
            c.kappa
        }
        None => {
            tree.clear_catastrophes();
            0.0
        }
    };
    let process = TraitProcess {
        lambda,
        mu,
        kappa,
        branch_sd: config.branch_sd,
        class_sd: config.nef.map_or(0.0, |n| n.class_sd),
        borrowing: config.borrowing,
    };
    let sim = match config.nef {
        Some(n) => enforce_no_empty_field(&tree, &process, n.n_obs, config.max_attempts, rng)?,
        None => simulate_traits(&tree, &process, rng)?,
    };
    let obs = Observation {
        missing: config.missing,
        remove_rare: config.remove_rare,
    };
    let observed = apply_observation_model(&sim, tree.taxa(), &obs, rng)?;
    let clades = match config.clades {
        Some((count, c)) => synthesize_clades(&tree, count, c, rng)?,
        None => Vec::new(),
    };
    Ok(SynthData {
        tree,
        matrix: observed.matrix,
        xi: observed.xi,
        clades,
        mu,
        lambda,
        config: config.clone(),
    })
}

/// A fitting configuration matched to a synthetic data set.
pub fn fit_config_for(
    data: &SynthData,
    nexus_path: &Path,
    run_length: usize,
    sample_interval: usize,
) -> RunConfig {
    let stem = nexus_path.with_extension("");
    let mut name = stem
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push("_fit");
    let data_name = nexus_path
        .file_name()
        .map(|n| n.into())
        .unwrap_or_else(|| nexus_path.to_path_buf());
    let mut c = RunConfig::new(data_name, name, run_length, sample_interval);
    let root = data.tree.age(data.tree.root());
    let bound = data
        .clades
        .iter()
        .filter_map(|k| k.rootmax.or(k.rootmin))
        .fold(root, f64::max);
    c.tree_prior = TreePriorConfig::UniformRoot {
        max_root_age: (2.0 * bound).ceil(),
        topology_weighted: false,
    };
    c.initial_tree = InitialTree::Random {
        theta: 1.0 / root.max(1e-9),
    };
    c.loss_rate = LossRate {
        vary: true,
        psi: 0.2,
    };
    c.account_rare_traits = data.config.remove_rare;
    c.model_missing = data.config.missing;
    c.impose_clades = !data.clades.is_empty();
    if data.config.catastrophes.is_some() {
        c.catastrophes = Some(CatastropheConfig {
            kappa: None,
            rho: RhoMode::Marginal,
        });
    }
    c
}

/// Write the Nexus file (data, clades, true tree and parameters) and a
/// `.par` file, next to it, for fitting the data.
pub fn write_synthetic(path: &Path, data: &SynthData) -> Result<()> {
    let nexus = write_nexus(
        &data.matrix,
        &data.clades,
        Some(&write_newick(&data.tree, true)),
        Some(&data.parameters()),
    );
    write_text(path, &nexus)?;
    let config = fit_config_for(data, path, 100_000, 100);
    let mut par = String::from("% Synthetic data record; settings below fit the generated file.\n");
    for (k, v) in data.parameters() {
        par.push_str(&format!("% synth {k} = {v}\n"));
    }
    par.push_str(&crate::config::write_par(&config));
    write_text(&with_suffix(&path.with_extension(""), ".par"), &par)
}
