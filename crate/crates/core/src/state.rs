//! The sampled state and the fixed model it is evaluated against.

use std::sync::Arc;

use crate::constraints::ConstraintSet;
use crate::likelihood::PatternTable;
use crate::priors::{RhoMode, TreePrior};
use crate::tree::Tree;

/// One point of the Markov chain: the catastrophe-annotated tree, the
/// death rate μ, the catastrophe death probability κ and per-taxon
/// recording probabilities ξ (1 for taxa without missing cells).
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub tree: Tree,
    pub mu: f64,
    pub kappa: f64,
    pub xi: Vec<f64>,
}

impl ChainState {
    pub fn new(tree: Tree, mu: f64, kappa: f64, xi: Vec<f64>) -> Self {
        ChainState {
            tree,
            mu,
            kappa,
            xi,
        }
    }

    /// Exact equality of everything the target depends on: topology, ages
    /// and catastrophe counts bitwise, and all scalars bitwise.
    /// Catastrophe positions are ignored.
    pub fn same_state(&self, other: &ChainState) -> bool {
        self.mu.to_bits() == other.mu.to_bits()
            && self.kappa.to_bits() == other.kappa.to_bits()
            && self.xi.len() == other.xi.len()
            && self
                .xi
                .iter()
                .zip(&other.xi)
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && self.tree.same_state(&other.tree)
    }
}

/// Data and model settings held fixed during a run.
#[derive(Clone, Debug)]
pub struct Model {
    pub taxa: Arc<[String]>,
    pub table: PatternTable,
    pub constraints: ConstraintSet,
    pub tree_prior: TreePrior,
    pub registration: u8,
    pub catastrophes: bool,
    pub rho: RhoMode,
    pub vary_mu: bool,
    pub vary_kappa: bool,
    pub vary_topology: bool,
    /// Taxa whose recording probability is a free parameter.
    pub missing_taxa: Vec<usize>,
}

impl Model {
    /// A model with no data, so that the posterior is the prior. The tree
    /// prior is root-uniform when the constraint set has a maximum root
    /// age and exponential otherwise.
    pub fn prior_only(taxa: Arc<[String]>, constraints: ConstraintSet) -> Self {
        let tree_prior = if constraints.max_root_age().is_some() {
            TreePrior::UniformRoot {
                topology_weighted: false,
            }
        } else {
            TreePrior::Exponential
        };
        Model {
            table: PatternTable {
                taxa: taxa.to_vec(),
                patterns: Vec::new(),
                counts: Vec::new(),
                removed_empty: 0,
                removed_singletons: 0,
            },
            taxa,
            constraints,
            tree_prior,
            registration: 1,
            catastrophes: false,
            rho: RhoMode::Marginal,
            vary_mu: false,
            vary_kappa: false,
            vary_topology: true,
            missing_taxa: Vec::new(),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.taxa.len()
    }
}
