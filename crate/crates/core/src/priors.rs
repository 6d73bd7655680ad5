//! Tree and parameter priors, the catastrophe-count prior and the
//! assembled log-posterior. Gamma distributions are shape-rate throughout.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::constraints::ConstraintSet;
use crate::likelihood::{likelihood_terms, LikelihoodParams, LikelihoodTerms};
use crate::state::{ChainState, Model};
use crate::tree::Tree;
use crate::{Error, Result};

/// Shape and rate of the Gamma prior on the death rate μ.
pub const MU_PRIOR: (f64, f64) = (0.001, 0.001);
/// Support of the uniform prior on the catastrophe death probability κ.
pub const KAPPA_PRIOR: (f64, f64) = (0.25, 1.0);
/// Shape and rate of the Gamma prior on the catastrophe rate ρ.
pub const RHO_PRIOR: (f64, f64) = (1.5, 5000.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TreePrior {
    /// Root age approximately uniform below the maximum root age held by
    /// the constraint set, optionally reweighted to be uniform over
    /// topologies.
    UniformRoot { topology_weighted: bool },
    /// Exponential branching process with its rate integrated out.
    Exponential,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhoMode {
    /// ρ integrated out against its Gamma prior.
    Marginal,
    Fixed(f64),
}

/// `-(L-1) ln |g|`. A tree of zero length is outside the support.
pub fn log_tree_prior_exponential(tree: &Tree) -> f64 {
    let len = tree.tree_length();
    if !(len > 0.0) {
        return f64::NEG_INFINITY;
    }
    -((tree.n_leaves() - 1) as f64) * len.ln()
}

/// Log density of the approximately root-uniform prior:
/// `1{t_r < T} Π_i (T - s_i)/(t_r - s_i)` over free non-root internal
/// nodes, where `s_i` is the least age node `i` can take given the
/// constraints below it and a node is free when neither it nor any
/// ancestor has an upper age bound.
pub fn log_tree_prior_uniform_root(
    tree: &Tree,
    constraints: &ConstraintSet,
    topology_weighted: bool,
) -> f64 {
    let Some(t_max) = constraints.max_root_age() else {
        return f64::NEG_INFINITY;
    };
    let root = tree.root();
    let tr = tree.age(root);
    if !(tr < t_max) {
        return f64::NEG_INFINITY;
    }
    let (lo, hi) = constraints.node_bounds(tree);
    let mut floor = lo;
    for v in tree.postorder() {
        if let Some([a, b]) = tree.children(v) {
            floor[v] = floor[v].max(floor[a]).max(floor[b]);
        }
    }
    let mut bounded = vec![false; tree.n_nodes()];
    let mut total = 0.0;
    for v in tree.preorder() {
        bounded[v] = hi[v].is_finite() || tree.parent(v).is_some_and(|p| bounded[p]);
        if v == root || tree.is_leaf(v) || bounded[v] {
            continue;
        }
        let s = floor[v];
        if !(tr > s) {
            return f64::NEG_INFINITY;
        }
        total += (t_max - s).ln() - (tr - s).ln();
    }
    if topology_weighted {
        total += log_topology_weight(tree);
    }
    total
}

/// `Σ_v ln I_v - ln (L-1)!`, the log inverse number of rankings of the
/// tree's topology, where `I_v` counts the internal nodes in the subtree
/// of `v`.
pub fn log_topology_weight(tree: &Tree) -> f64 {
    let mut count = vec![0usize; tree.n_nodes()];
    let mut total = 0.0;
    for v in tree.postorder() {
        if let Some([a, b]) = tree.children(v) {
            count[v] = 1 + count[a] + count[b];
            total += (count[v] as f64).ln();
        }
    }
    total - ln_gamma(tree.n_leaves() as f64)
}

/// Gamma(shape, rate) log density.
pub fn log_gamma_density(x: f64, shape: f64, rate: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

pub fn log_mu_prior(mu: f64) -> f64 {
    log_gamma_density(mu, MU_PRIOR.0, MU_PRIOR.1)
}

pub fn log_kappa_prior(kappa: f64) -> f64 {
    let (lo, hi) = KAPPA_PRIOR;
    if (lo..=hi).contains(&kappa) {
        -(hi - lo).ln()
    } else {
        f64::NEG_INFINITY
    }
}

pub fn log_xi_prior(xi: f64) -> f64 {
    if (0.0..=1.0).contains(&xi) {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

/// Log prior of per-edge catastrophe counts given finite edge lengths.
/// With ρ marginalised this is the negative multinomial
/// `Γ(a+K)/Γ(a) Π 1/k_i! Π (ℓ_i/(b+Σℓ))^{k_i} (b/(b+Σℓ))^a`.
pub fn log_catastrophe_count_prior(counts: &[usize], lengths: &[f64], mode: RhoMode) -> f64 {
    debug_assert_eq!(counts.len(), lengths.len());
    let mut lin = 0.0;
    let mut total_len = 0.0;
    let mut k_total = 0usize;
    for (&k, &l) in counts.iter().zip(lengths) {
        total_len += l;
        k_total += k;
        if k > 0 {
            if !(l > 0.0) {
                return f64::NEG_INFINITY;
            }
            lin += k as f64 * l.ln() - ln_gamma(k as f64 + 1.0);
        }
    }
    match mode {
        RhoMode::Marginal => {
            let (a, b) = RHO_PRIOR;
            let k = k_total as f64;
            ln_gamma(a + k) - ln_gamma(a) + lin - k * (b + total_len).ln()
                + a * (b.ln() - (b + total_len).ln())
        }
        RhoMode::Fixed(rho) => {
            if !(rho > 0.0) {
                return if k_total == 0 { 0.0 } else { f64::NEG_INFINITY };
            }
            lin + k_total as f64 * rho.ln() - rho * total_len
        }
    }
}

/// Catastrophe counts and raw lengths of the finite edges of `tree`.
pub fn edge_counts_and_lengths(tree: &Tree) -> (Vec<usize>, Vec<f64>) {
    tree.edges()
        .map(|i| (tree.catastrophe_count(i), tree.branch_length(i)))
        .unzip()
}

/// Mean proportion of traits lost in 1000 years: `ψ = 1 - e^{-1000μ}`.
pub fn mu_to_psi(mu: f64) -> f64 {
    -(-1000.0 * mu).exp_m1()
}

pub fn psi_to_mu(psi: f64) -> Result<f64> {
    if !(psi > 0.0 && psi < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "loss proportion must lie in (0,1), got {psi}"
        )));
    }
    Ok(-(-psi).ln_1p() / 1000.0)
}

/// Draw ρ from `Gamma(a + Σk, rate b + Σℓ)`.
pub fn sample_rho<R: Rng + ?Sized>(tree: &Tree, rng: &mut R) -> f64 {
    let (a, b) = RHO_PRIOR;
    let shape = a + tree.total_catastrophes() as f64;
    let rate = b + tree.tree_length();
    Gamma::new(shape, 1.0 / rate)
        .expect("positive parameters")
        .sample(rng)
}

/// The log-posterior split into its parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Posterior {
    pub log_prior: f64,
    pub log_likelihood: f64,
    /// Present whenever the state is inside the prior support.
    pub terms: Option<LikelihoodTerms>,
}

impl Posterior {
    pub fn total(&self) -> f64 {
        self.log_prior + self.log_likelihood
    }

    fn outside() -> Self {
        Posterior {
            log_prior: f64::NEG_INFINITY,
            log_likelihood: f64::NEG_INFINITY,
            terms: None,
        }
    }
}

/// Log prior of a state: tree prior, parameter priors for varied
/// parameters, and the catastrophe-count prior. `-∞` outside the support.
pub fn log_prior(state: &ChainState, model: &Model) -> f64 {
    let tree = &state.tree;
    if !model.constraints.is_satisfied(tree) {
        return f64::NEG_INFINITY;
    }
    let mut lp = match model.tree_prior {
        TreePrior::UniformRoot { topology_weighted } => {
            log_tree_prior_uniform_root(tree, &model.constraints, topology_weighted)
        }
        TreePrior::Exponential => log_tree_prior_exponential(tree),
    };
    if model.vary_mu {
        lp += log_mu_prior(state.mu);
    } else if !(state.mu > 0.0) {
        return f64::NEG_INFINITY;
    }
    if model.catastrophes {
        if model.vary_kappa {
            lp += log_kappa_prior(state.kappa);
        } else if !(state.kappa > 0.0 && state.kappa <= 1.0) {
            return f64::NEG_INFINITY;
        }
        let (k, l) = edge_counts_and_lengths(tree);
        lp += log_catastrophe_count_prior(&k, &l, model.rho);
    } else if tree.total_catastrophes() > 0 {
        return f64::NEG_INFINITY;
    }
    for &j in &model.missing_taxa {
        lp += log_xi_prior(state.xi[j]);
    }
    if state.xi.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
        return f64::NEG_INFINITY;
    }
    lp
}

pub fn log_posterior(state: &ChainState, model: &Model) -> Posterior {
    let log_prior = log_prior(state, model);
    if log_prior == f64::NEG_INFINITY || log_prior.is_nan() {
        return Posterior::outside();
    }
    let params = LikelihoodParams {
        mu: state.mu,
        kappa: state.kappa,
        xi: &state.xi,
        registration: model.registration,
    };
    match likelihood_terms(&model.table, &state.tree, &params) {
        Ok(terms) => {
            let ll = terms.integrated();
            Posterior {
                log_prior,
                log_likelihood: if ll.is_nan() { f64::NEG_INFINITY } else { ll },
                terms: Some(terms),
            }
        }
        Err(_) => Posterior::outside(),
    }
}
