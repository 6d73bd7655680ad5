//! Starting states.

use std::sync::Arc;

use rand::Rng;

use super::engine::{step, Chain};
use super::moves::{MoveContext, Schedule};
use crate::constraints::{random_feasible_tree, ConstraintSet};
use crate::likelihood::PatternTable;
use crate::priors::KAPPA_PRIOR;
use crate::state::{ChainState, Model};
use crate::tree::Tree;
use crate::Result;

/// Prior-targeting steps run after building a feasible tree.
pub const DEFAULT_BURN_IN: usize = 1000;

/// Random tree satisfying the constraints, followed by `burn_in` steps of
/// a chain targeting the tree prior.
pub fn constrained_initial_tree<R: Rng + ?Sized>(
    taxa: Arc<[String]>,
    theta: f64,
    constraints: &ConstraintSet,
    burn_in: usize,
    rng: &mut R,
) -> Result<Tree> {
    let tree = random_feasible_tree(taxa.clone(), theta, constraints, rng)?;
    if burn_in == 0 || taxa.len() < 2 {
        return Ok(tree);
    }
    let model = Model::prior_only(taxa, constraints.clone());
    let schedule = Schedule::new(&model, None, false)?;
    let ctx = MoveContext {
        model: &model,
        schedule: &schedule,
        delta: 2f64.ln(),
    };
    let n = tree.n_leaves();
    let mut chain = Chain::new(ChainState::new(tree, 1.0, 0.5, vec![1.0; n]), &model)?;
    for _ in 0..burn_in {
        step(&mut chain, &ctx, rng);
    }
    Ok(chain.state.tree)
}

/// Recording probabilities: the fraction of recorded cells, clamped to
/// `[0.05, 1]`, for taxa in `missing_taxa`, and 1 for the others.
pub fn initial_xi(table: &PatternTable, missing_taxa: &[usize]) -> Vec<f64> {
    let frac = table.recorded_fraction();
    let mut xi = vec![1.0; table.n_taxa()];
    for &i in missing_taxa {
        xi[i] = frac[i].clamp(0.05, 1.0);
    }
    xi
}

/// Initial κ: the given value, or a uniform draw from its prior support.
pub fn initial_kappa<R: Rng + ?Sized>(fixed: Option<f64>, rng: &mut R) -> f64 {
    match fixed {
        Some(k) => k,
        None => rng.random_range(KAPPA_PRIOR.0..KAPPA_PRIOR.1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::Clade;
    use crate::leafset::LeafSet;
    use crate::rng;
    use crate::tree::testing::taxa;

    #[test]
    fn nested_clades_hold_after_burn_in() {
        let inner = Clade {
            name: "A".into(),
            taxa: LeafSet::from_indices(6, [0, 1]),
            rootmin: Some(1.0),
            rootmax: Some(2.0),
            originatemin: None,
            originatemax: None,
        };
        let outer = Clade {
            name: "B".into(),
            taxa: LeafSet::from_indices(6, [0, 1, 2, 3]),
            rootmin: None,
            rootmax: Some(4.0),
            originatemin: None,
            originatemax: None,
        };
        let cs = ConstraintSet::new(6, vec![inner, outer], Some(10.0)).unwrap();
        let mut r = rng::from_seed(3);
        for _ in 0..5 {
            let t = constrained_initial_tree(taxa(6), 0.5, &cs, 500, &mut r).unwrap();
            assert!(cs.is_satisfied(&t));
        }
    }

    #[test]
    fn infeasible_bounds_fail() {
        let c = Clade {
            name: "A".into(),
            taxa: LeafSet::from_indices(3, [0, 1]),
            rootmin: Some(20.0),
            rootmax: None,
            originatemin: None,
            originatemax: None,
        };
        assert!(ConstraintSet::new(3, vec![c], Some(10.0)).is_err());
    }
}
