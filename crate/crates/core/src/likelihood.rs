//! Site-pattern tables and the integrated stochastic Dollo likelihood.
//!
//! A trait born on edge `i` (or in the equilibrium population above the
//! root) contributes to pattern `p` when it survives to node `i`, produces
//! the restriction of `p` below `i`, and every leaf outside the subtree of
//! `i` shows the emission of a dead trait. With `τ_i` the effective edge
//! length (catastrophes folded in as extra time), the expected number of
//! births on edge `i` that reach node `i` alive is `(1 - e^{-μτ_i})/μ` per
//! unit birth rate, and `1/μ` at the root. Summing over edges gives the
//! pattern intensity `z_p`; the λ-integrated likelihood is multinomial with
//! probabilities `z_p / Z` over registrable patterns.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::nexus::{Cell, TraitMatrix};
use crate::tree::Tree;
use crate::{Error, Result};

/// Distinct observed columns with their multiplicities. Cells are in the
/// order of the retained taxa, which is also the tree's leaf order.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternTable {
    pub taxa: Vec<String>,
    pub patterns: Vec<Vec<Cell>>,
    pub counts: Vec<usize>,
    /// Columns dropped for having no recorded presence.
    pub removed_empty: usize,
    /// Columns dropped for having a single recorded presence (only when
    /// the registration threshold is 2).
    pub removed_singletons: usize,
}

impl PatternTable {
    pub fn n_taxa(&self) -> usize {
        self.taxa.len()
    }

    pub fn n_patterns(&self) -> usize {
        self.patterns.len()
    }

    /// Total number of retained traits.
    pub fn n_traits(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Taxa with at least one missing cell.
    pub fn taxa_with_missing(&self) -> Vec<usize> {
        (0..self.n_taxa())
            .filter(|&j| self.patterns.iter().any(|p| p[j] == Cell::Missing))
            .collect()
    }

    /// Per-taxon fraction of retained cells that are recorded.
    pub fn recorded_fraction(&self) -> Vec<f64> {
        let n = self.n_traits() as f64;
        (0..self.n_taxa())
            .map(|j| {
                let rec: usize = self
                    .patterns
                    .iter()
                    .zip(&self.counts)
                    .filter(|(p, _)| p[j] != Cell::Missing)
                    .map(|(_, &c)| c)
                    .sum();
                if n > 0.0 {
                    rec as f64 / n
                } else {
                    1.0
                }
            })
            .collect()
    }

    /// Retained traits as a matrix, one column per trait.
    pub fn to_matrix(&self) -> TraitMatrix {
        let columns: Vec<Vec<Cell>> = self
            .patterns
            .iter()
            .zip(&self.counts)
            .flat_map(|(p, &c)| std::iter::repeat_n(p.clone(), c))
            .collect();
        TraitMatrix::from_columns(self.taxa.clone(), &columns).expect("table taxa are valid")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TabulateOptions {
    /// 0-based taxon indices to drop.
    pub omitted_taxa: Vec<usize>,
    /// 0-based trait indices to drop.
    pub omitted_traits: Vec<usize>,
    /// Registration threshold, 1 or 2.
    pub registration: u8,
    /// When false, missing cells are recoded as absent.
    pub model_missing: bool,
}

fn check_registration(d: u8) -> Result<()> {
    if d == 1 || d == 2 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "registration threshold must be 1 or 2, got {d}"
        )))
    }
}

pub fn tabulate_patterns(matrix: &TraitMatrix, opts: &TabulateOptions) -> Result<PatternTable> {
    check_registration(opts.registration)?;
    let taxa: Vec<usize> = (0..matrix.n_taxa())
        .filter(|i| !opts.omitted_taxa.contains(i))
        .collect();
    if taxa.len() < 2 {
        return Err(Error::Data(format!(
            "only {} taxa remain after omission",
            taxa.len()
        )));
    }
    let mut map: BTreeMap<Vec<Cell>, usize> = BTreeMap::new();
    let mut order: Vec<Vec<Cell>> = Vec::new();
    let (mut removed_empty, mut removed_singletons) = (0, 0);
    for k in (0..matrix.n_traits()).filter(|k| !opts.omitted_traits.contains(k)) {
        let col: Vec<Cell> = taxa
            .iter()
            .map(|&i| match matrix.get(i, k) {
                Cell::Missing if !opts.model_missing => Cell::Absent,
                c => c,
            })
            .collect();
        let ones = col.iter().filter(|&&c| c == Cell::Present).count();
        if ones == 0 {
            removed_empty += 1;
            continue;
        }
        if ones == 1 && opts.registration == 2 {
            removed_singletons += 1;
            continue;
        }
        let e = map.entry(col.clone()).or_insert(0);
        if *e == 0 {
            order.push(col);
        }
        *e += 1;
    }
    if removed_singletons > 0 {
        log::info!("removed {removed_singletons} traits recorded in a single taxon");
    }
    let counts = order.iter().map(|p| map[p]).collect();
    Ok(PatternTable {
        taxa: taxa.iter().map(|&i| matrix.taxa[i].clone()).collect(),
        patterns: order,
        counts,
        removed_empty,
        removed_singletons,
    })
}

/// Model parameters entering the likelihood. `xi[j]` is the probability
/// that a cell of taxon `j` is recorded.
#[derive(Clone, Copy, Debug)]
pub struct LikelihoodParams<'a> {
    pub mu: f64,
    pub kappa: f64,
    pub xi: &'a [f64],
    pub registration: u8,
}

/// Per-edge survival quantities shared by all patterns.
struct EdgeTerms {
    /// `ln e^{-μτ}` per node (edge into the node).
    log_survive: Vec<f64>,
    /// `ln(1 - e^{-μτ})` per node.
    log_die: Vec<f64>,
    /// `ln` of expected arrivals alive at the node per unit birth rate.
    log_weight: Vec<f64>,
    post: Vec<usize>,
}

fn edge_terms(tree: &Tree, mu: f64, kappa: f64) -> EdgeTerms {
    let lengths: Vec<f64> = (0..tree.n_nodes())
        .map(|i| {
            if i == tree.root() {
                f64::INFINITY
            } else {
                tree.effective_edge_length(i, mu, kappa)
            }
        })
        .collect();
    edge_terms_from_lengths(tree, &lengths, mu)
}

fn edge_terms_from_lengths(tree: &Tree, lengths: &[f64], mu: f64) -> EdgeTerms {
    let n = tree.n_nodes();
    let mut log_survive = vec![0.0; n];
    let mut log_die = vec![f64::NEG_INFINITY; n];
    let mut log_weight = vec![-mu.ln(); n];
    for i in tree.edges() {
        let x = mu * lengths[i];
        log_survive[i] = -x;
        log_die[i] = if x.is_infinite() {
            0.0
        } else {
            (-(-x).exp_m1()).ln()
        };
        log_weight[i] = log_die[i] - mu.ln();
    }
    EdgeTerms {
        log_survive,
        log_die,
        log_weight,
        post: tree.postorder(),
    }
}

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

fn check_params(tree: &Tree, p: &LikelihoodParams) -> Result<()> {
    check_registration(p.registration)?;
    if p.xi.len() != tree.n_leaves() {
        return Err(Error::InvalidArgument(format!(
            "{} recording probabilities for {} leaves",
            p.xi.len(),
            tree.n_leaves()
        )));
    }
    Ok(())
}

/// Leaf emissions `(alive, dead)` in log space.
fn leaf_emission(c: Cell, xi: f64) -> (f64, f64) {
    match c {
        Cell::Present => (xi.ln(), f64::NEG_INFINITY),
        Cell::Absent => (f64::NEG_INFINITY, xi.ln()),
        Cell::Missing => {
            let m = (-xi).ln_1p();
            (m, m)
        }
    }
}

/// `ln z_p` with scratch buffers supplied by the caller.
fn log_intensity(
    tree: &Tree,
    terms: &EdgeTerms,
    xi: &[f64],
    pattern: &[Cell],
    alive: &mut [f64],
    dead: &mut [f64],
    outside: &mut [f64],
) -> f64 {
    for &v in &terms.post {
        match tree.children(v) {
            None => (alive[v], dead[v]) = leaf_emission(pattern[v], xi[v]),
            Some([a, b]) => {
                let mut acc = 0.0;
                for c in [a, b] {
                    acc += logaddexp(terms.log_survive[c] + alive[c], terms.log_die[c] + dead[c]);
                }
                alive[v] = acc;
                dead[v] = dead[a] + dead[b];
            }
        }
    }
    let root = tree.root();
    outside[root] = 0.0;
    let mut total = terms.log_weight[root] + alive[root];
    for &v in terms.post.iter().rev() {
        if let Some([a, b]) = tree.children(v) {
            outside[a] = outside[v] + dead[b];
            outside[b] = outside[v] + dead[a];
        }
        if v != root {
            total = logaddexp(total, terms.log_weight[v] + alive[v] + outside[v]);
        }
    }
    total
}

/// Expected number of traits showing `pattern` per unit birth rate.
pub fn pattern_intensity(tree: &Tree, params: &LikelihoodParams, pattern: &[Cell]) -> Result<f64> {
    check_params(tree, params)?;
    if pattern.len() != tree.n_leaves() {
        return Err(Error::InvalidArgument(format!(
            "pattern of length {} for {} leaves",
            pattern.len(),
            tree.n_leaves()
        )));
    }
    let terms = edge_terms(tree, params.mu, params.kappa);
    let n = tree.n_nodes();
    let (mut a, mut d, mut o) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    Ok(log_intensity(tree, &terms, params.xi, pattern, &mut a, &mut d, &mut o).exp())
}

/// Sum of intensities over all registrable patterns: the expected number of
/// traits recorded in at least one taxon, less (for threshold 2) those
/// recorded in exactly one.
pub fn registered_normalizer(tree: &Tree, params: &LikelihoodParams) -> Result<f64> {
    check_params(tree, params)?;
    let terms = edge_terms(tree, params.mu, params.kappa);
    Ok(normalizer(tree, &terms, params))
}

fn normalizer(tree: &Tree, terms: &EdgeTerms, params: &LikelihoodParams) -> f64 {
    let n = tree.n_nodes();
    // any[v]: P(at least one recorded presence below v | alive at v).
    // one[v]: P(exactly one recorded presence below v | alive at v).
    let mut any = vec![0.0; n];
    let mut one = vec![0.0; n];
    let mut z_any = 0.0;
    let mut z_one = 0.0;
    for &v in &terms.post {
        match tree.children(v) {
            None => {
                any[v] = params.xi[v];
                one[v] = params.xi[v];
            }
            Some([a, b]) => {
                let (sa, sb) = (terms.log_survive[a].exp(), terms.log_survive[b].exp());
                let (xa, xb) = (sa * any[a], sb * any[b]);
                any[v] = xa + xb - xa * xb;
                one[v] = sa * one[a] * (1.0 - xb) + sb * one[b] * (1.0 - xa);
            }
        }
        let w = terms.log_weight[v].exp();
        z_any += w * any[v];
        z_one += w * one[v];
    }
    if params.registration == 2 {
        z_any - z_one
    } else {
        z_any
    }
}

/// Sufficient quantities for the integrated and Poisson likelihoods.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LikelihoodTerms {
    /// `Σ_p N_p ln z_p`.
    pub sum_log_z: f64,
    /// Normalizer `Z`.
    pub normalizer: f64,
    /// Total trait count `N`.
    pub n_traits: usize,
    /// `Σ_p ln N_p!`.
    pub log_count_factorials: f64,
}

impl LikelihoodTerms {
    /// `Σ_p N_p (ln z_p - ln Z)`.
    pub fn integrated(&self) -> f64 {
        if self.n_traits == 0 {
            return 0.0;
        }
        self.sum_log_z - self.n_traits as f64 * self.normalizer.ln()
    }

    /// Poisson log-likelihood at birth rate `lambda`.
    pub fn poisson(&self, lambda: f64) -> f64 {
        let n = self.n_traits as f64;
        let base = if self.n_traits == 0 {
            0.0
        } else {
            n * lambda.ln()
        };
        base - lambda * self.normalizer + self.sum_log_z - self.log_count_factorials
    }
}

pub fn likelihood_terms(
    table: &PatternTable,
    tree: &Tree,
    params: &LikelihoodParams,
) -> Result<LikelihoodTerms> {
    check_params(tree, params)?;
    if table.n_taxa() != tree.n_leaves() {
        return Err(Error::InvalidArgument(format!(
            "table has {} taxa, tree has {} leaves",
            table.n_taxa(),
            tree.n_leaves()
        )));
    }
    terms_for(
        table,
        tree,
        &edge_terms(tree, params.mu, params.kappa),
        params,
    )
}

/// As [`likelihood_terms`], with the effective length of every edge given
/// explicitly (indexed by child node) instead of derived from ages and
/// catastrophes.
pub fn likelihood_terms_with_lengths(
    table: &PatternTable,
    tree: &Tree,
    lengths: &[f64],
    params: &LikelihoodParams,
) -> Result<LikelihoodTerms> {
    check_params(tree, params)?;
    if lengths.len() != tree.n_nodes() || table.n_taxa() != tree.n_leaves() {
        return Err(Error::InvalidArgument(
            "edge lengths or table do not match the tree".into(),
        ));
    }
    terms_for(
        table,
        tree,
        &edge_terms_from_lengths(tree, lengths, params.mu),
        params,
    )
}

fn terms_for(
    table: &PatternTable,
    tree: &Tree,
    terms: &EdgeTerms,
    params: &LikelihoodParams,
) -> Result<LikelihoodTerms> {
    let n = tree.n_nodes();
    let (mut a, mut d, mut o) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut sum_log_z = 0.0;
    let mut log_fact = 0.0;
    for (p, &c) in table.patterns.iter().zip(&table.counts) {
        let lz = log_intensity(tree, terms, params.xi, p, &mut a, &mut d, &mut o);
        sum_log_z += c as f64 * lz;
        log_fact += ln_gamma(c as f64 + 1.0);
    }
    Ok(LikelihoodTerms {
        sum_log_z,
        normalizer: normalizer(tree, terms, params),
        n_traits: table.n_traits(),
        log_count_factorials: log_fact,
    })
}

/// `Σ_p N_p (ln z_p - ln Z)`, the likelihood with the birth rate integrated
/// out under its `1/λ` prior. Impossible data give `-∞`.
pub fn log_integrated_likelihood(
    table: &PatternTable,
    tree: &Tree,
    params: &LikelihoodParams,
) -> Result<f64> {
    Ok(likelihood_terms(table, tree, params)?.integrated())
}

/// `N ln λ - λZ + Σ_p N_p ln z_p - Σ_p ln N_p!`.
pub fn log_poisson_likelihood(
    table: &PatternTable,
    tree: &Tree,
    params: &LikelihoodParams,
    lambda: f64,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "birth rate must be positive, got {lambda}"
        )));
    }
    Ok(likelihood_terms(table, tree, params)?.poisson(lambda))
}

/// Draw λ from its conditional posterior `Gamma(N, rate Z)`.
pub fn sample_lambda<R: Rng + ?Sized>(terms: &LikelihoodTerms, rng: &mut R) -> Result<f64> {
    if terms.n_traits == 0 {
        return Err(Error::InvalidArgument(
            "cannot sample the birth rate without data".into(),
        ));
    }
    let g = Gamma::new(terms.n_traits as f64, 1.0 / terms.normalizer)
        .map_err(|e| Error::InvalidArgument(format!("birth-rate posterior: {e}")))?;
    Ok(g.sample(rng))
}
