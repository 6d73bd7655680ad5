//! Clade constraints on trees and construction of trees that satisfy them.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::leafset::LeafSet;
use crate::nexus::CladeConstraint;
use crate::tree::{Node, Tree};
use crate::{Error, Result};

/// A clade over leaf indices. A single-leaf clade bounds that leaf's
/// sampling age through its root bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct Clade {
    pub name: String,
    pub taxa: LeafSet,
    pub rootmin: Option<f64>,
    pub rootmax: Option<f64>,
    pub originatemin: Option<f64>,
    pub originatemax: Option<f64>,
}

impl Clade {
    fn lower_bounds(&self) -> impl Iterator<Item = f64> {
        [self.rootmin, self.originatemin].into_iter().flatten()
    }

    fn upper_bounds(&self) -> impl Iterator<Item = f64> {
        [self.rootmax, self.originatemax].into_iter().flatten()
    }
}

/// Which clades of a data file to use.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CladeSelection {
    /// 0-based clade indices to drop entirely.
    pub ignored: Vec<usize>,
    /// 0-based clade indices whose age bounds are dropped.
    pub age_ignored: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSet {
    n_leaves: usize,
    clades: Vec<Clade>,
    max_root_age: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NotMonophyletic { clade: String },
    RootAge { clade: String, age: f64 },
    OriginateAge { clade: String, age: f64 },
    RootTooOld { age: f64, max: f64 },
    ZeroLengthEdge { node: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotMonophyletic { clade } => write!(f, "clade {clade} is not monophyletic"),
            Violation::RootAge { clade, age } => {
                write!(f, "clade {clade} root age {age} out of bounds")
            }
            Violation::OriginateAge { clade, age } => {
                write!(f, "clade {clade} originate age {age} out of bounds")
            }
            Violation::RootTooOld { age, max } => write!(f, "root age {age} is not below {max}"),
            Violation::ZeroLengthEdge { node } => {
                write!(f, "edge into node {node} has zero length")
            }
        }
    }
}

fn within(x: f64, lo: Option<f64>, hi: Option<f64>) -> bool {
    lo.is_none_or(|lo| x >= lo) && hi.is_none_or(|hi| x <= hi)
}

impl ConstraintSet {
    pub fn unconstrained(n_leaves: usize, max_root_age: Option<f64>) -> Self {
        ConstraintSet {
            n_leaves,
            clades: Vec::new(),
            max_root_age,
        }
    }

    /// Checks that clades nest or are disjoint and that the maximum root age
    /// exceeds every lower bound.
    pub fn new(n_leaves: usize, clades: Vec<Clade>, max_root_age: Option<f64>) -> Result<Self> {
        for c in &clades {
            if c.taxa.is_empty() {
                return Err(Error::Constraint(format!("clade {} is empty", c.name)));
            }
            if c.taxa.iter().any(|l| l >= n_leaves) {
                return Err(Error::Constraint(format!(
                    "clade {} names an unknown leaf",
                    c.name
                )));
            }
            for (lo, hi) in [(c.rootmin, c.rootmax), (c.originatemin, c.originatemax)] {
                if let (Some(lo), Some(hi)) = (lo, hi) {
                    if lo > hi {
                        return Err(Error::Constraint(format!(
                            "clade {} has min above max",
                            c.name
                        )));
                    }
                }
            }
            if let Some(t) = max_root_age {
                if let Some(b) = c.lower_bounds().find(|&b| b >= t) {
                    return Err(Error::Constraint(format!(
                        "maximum root age {t} does not exceed lower bound {b} of clade {}",
                        c.name
                    )));
                }
            }
        }
        if let Some(t) = max_root_age {
            if !(t > 0.0) {
                return Err(Error::Constraint(format!(
                    "maximum root age must be positive, got {t}"
                )));
            }
        }
        for (i, a) in clades.iter().enumerate() {
            for b in &clades[i + 1..] {
                if a.taxa.intersects(&b.taxa)
                    && !a.taxa.is_subset(&b.taxa)
                    && !b.taxa.is_subset(&a.taxa)
                {
                    return Err(Error::Constraint(format!(
                        "clades {} and {} overlap without nesting",
                        a.name, b.name
                    )));
                }
            }
        }
        Ok(ConstraintSet {
            n_leaves,
            clades,
            max_root_age,
        })
    }

    /// Map file-level clades onto the retained taxa. A clade that loses
    /// some of its taxa to omission keeps the rest; one that loses all of
    /// them is dropped. Both cases are logged.
    pub fn from_clades(
        taxa: &[String],
        clades: &[CladeConstraint],
        selection: &CladeSelection,
        max_root_age: Option<f64>,
    ) -> Result<Self> {
        let mut out = Vec::new();
        for (k, c) in clades.iter().enumerate() {
            if selection.ignored.contains(&k) {
                continue;
            }
            let kept: Vec<usize> = c
                .taxa
                .iter()
                .filter_map(|name| taxa.iter().position(|t| t == name))
                .collect();
            if kept.is_empty() {
                log::warn!("clade {} has no retained taxa and is dropped", c.name);
                continue;
            }
            if kept.len() < c.taxa.len() {
                log::warn!(
                    "clade {} keeps {} of its {} taxa after omission",
                    c.name,
                    kept.len(),
                    c.taxa.len()
                );
            }
            let ages = !selection.age_ignored.contains(&k);
            out.push(Clade {
                name: c.name.clone(),
                taxa: LeafSet::from_indices(taxa.len(), kept),
                rootmin: c.rootmin.filter(|_| ages),
                rootmax: c.rootmax.filter(|_| ages),
                originatemin: c.originatemin.filter(|_| ages),
                originatemax: c.originatemax.filter(|_| ages),
            });
        }
        ConstraintSet::new(taxa.len(), out, max_root_age)
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn clades(&self) -> &[Clade] {
        &self.clades
    }

    pub fn max_root_age(&self) -> Option<f64> {
        self.max_root_age
    }

    pub fn set_max_root_age(&mut self, t: Option<f64>) {
        self.max_root_age = t;
    }

    /// Sampling-age window of a leaf from single-taxon clades.
    pub fn leaf_window(&self, leaf: usize) -> Option<(f64, f64)> {
        self.clades
            .iter()
            .filter(|c| c.taxa.len() == 1 && c.taxa.contains(leaf))
            .filter(|c| c.rootmin.is_some() || c.rootmax.is_some())
            .map(|c| (c.rootmin.unwrap_or(0.0), c.rootmax.unwrap_or(f64::INFINITY)))
            .reduce(|a, b| (a.0.max(b.0), a.1.min(b.1)))
    }

    pub fn offset_leaves(&self) -> Vec<usize> {
        (0..self.n_leaves)
            .filter(|&l| self.leaf_window(l).is_some())
            .collect()
    }

    /// Largest finite upper bound over all clades (0 when there is none).
    pub fn max_upper_bound(&self) -> f64 {
        self.clades
            .iter()
            .flat_map(Clade::upper_bounds)
            .fold(0.0, f64::max)
    }

    pub fn has_upper_bounds(&self) -> bool {
        self.clades
            .iter()
            .any(|c| c.upper_bounds().next().is_some())
    }

    /// Every violated constraint; empty iff the tree is admissible.
    pub fn validate(&self, tree: &Tree) -> Vec<Violation> {
        let mut out = Vec::new();
        for i in tree.edges() {
            if tree.branch_length(i) <= 0.0 {
                out.push(Violation::ZeroLengthEdge { node: i });
            }
        }
        if let Some(max) = self.max_root_age {
            let age = tree.age(tree.root());
            if age >= max {
                out.push(Violation::RootTooOld { age, max });
            }
        }
        if self.clades.is_empty() {
            return out;
        }
        let sets = tree.leaf_sets();
        for c in &self.clades {
            let leaves: Vec<usize> = c.taxa.iter().collect();
            let m = tree.mrca(&leaves).expect("clade leaves are valid");
            if sets[m] != c.taxa {
                out.push(Violation::NotMonophyletic {
                    clade: c.name.clone(),
                });
                continue;
            }
            let age = tree.age(m);
            if !within(age, c.rootmin, c.rootmax) {
                out.push(Violation::RootAge {
                    clade: c.name.clone(),
                    age,
                });
            }
            if c.originatemin.is_some() || c.originatemax.is_some() {
                let age = tree.parent(m).map_or(f64::INFINITY, |p| tree.age(p));
                if !within(age, c.originatemin, c.originatemax) {
                    out.push(Violation::OriginateAge {
                        clade: c.name.clone(),
                        age,
                    });
                }
            }
        }
        out
    }

    pub fn is_satisfied(&self, tree: &Tree) -> bool {
        self.validate(tree).is_empty()
    }

    /// Per-node bounds imposed directly by constraints on `tree` (clade root
    /// bounds, originate bounds, leaf windows). Leaves without a window are
    /// pinned at their current age. Clades that are not monophyletic on
    /// `tree` contribute nothing.
    pub fn node_bounds(&self, tree: &Tree) -> (Vec<f64>, Vec<f64>) {
        let n = tree.n_nodes();
        let mut lo = vec![0.0; n];
        let mut hi = vec![f64::INFINITY; n];
        for leaf in 0..tree.n_leaves() {
            if self.leaf_window(leaf).is_none() {
                lo[leaf] = tree.age(leaf);
                hi[leaf] = tree.age(leaf);
            }
        }
        if self.clades.is_empty() {
            return (lo, hi);
        }
        let sets = tree.leaf_sets();
        for c in &self.clades {
            let leaves: Vec<usize> = c.taxa.iter().collect();
            let m = tree.mrca(&leaves).expect("valid leaves");
            if sets[m] != c.taxa {
                continue;
            }
            if let Some(v) = c.rootmin {
                lo[m] = lo[m].max(v);
            }
            if let Some(v) = c.rootmax {
                hi[m] = hi[m].min(v);
            }
            if let Some(p) = tree.parent(m) {
                if let Some(v) = c.originatemin {
                    lo[p] = lo[p].max(v);
                }
                if let Some(v) = c.originatemax {
                    hi[p] = hi[p].min(v);
                }
            }
        }
        (lo, hi)
    }
}

/// Random tree satisfying `constraints`: clades are built bottom-up as
/// random binary subtrees, node ages are drawn top-down uniformly within
/// their feasible windows, and a fresh topology is tried whenever a window
/// comes out empty.
pub fn random_feasible_tree<R: Rng + ?Sized>(
    taxa: Arc<[String]>,
    theta: f64,
    constraints: &ConstraintSet,
    rng: &mut R,
) -> Result<Tree> {
    const ATTEMPTS: usize = 1000;
    let l = taxa.len();
    if l < 2 {
        return Err(Error::InvalidArgument("need at least two taxa".into()));
    }
    if constraints.n_leaves() != l {
        return Err(Error::InvalidArgument(
            "constraint set is for a different taxon set".into(),
        ));
    }
    if let Some(t) = constraints.max_root_age() {
        for leaf in 0..l {
            if let Some((lo, _)) = constraints.leaf_window(leaf) {
                if lo >= t {
                    return Err(Error::Constraint(format!(
                        "leaf {leaf} cannot be younger than the maximum root age"
                    )));
                }
            }
        }
    }
    for _ in 0..ATTEMPTS {
        if let Some(t) = try_build(&taxa, theta, constraints, rng)? {
            return Ok(t);
        }
    }
    Err(Error::Constraint(format!(
        "no tree satisfying the constraints found after {ATTEMPTS} attempts"
    )))
}

fn try_build<R: Rng + ?Sized>(
    taxa: &Arc<[String]>,
    theta: f64,
    cs: &ConstraintSet,
    rng: &mut R,
) -> Result<Option<Tree>> {
    let l = taxa.len();
    let mut nodes: Vec<Node> = (0..l)
        .map(|_| Node {
            age: 0.0,
            parent: None,
            children: None,
            catastrophes: Vec::new(),
        })
        .collect();
    let mut cover: Vec<usize> = (0..l).collect();
    let mut groups: Vec<LeafSet> = cs
        .clades()
        .iter()
        .filter(|c| c.taxa.len() > 1)
        .map(|c| c.taxa.clone())
        .collect();
    groups.push(LeafSet::full(l));
    groups.sort_by_key(LeafSet::len);
    for g in &groups {
        let mut items: Vec<usize> = Vec::new();
        for leaf in g.iter() {
            if !items.contains(&cover[leaf]) {
                items.push(cover[leaf]);
            }
        }
        while items.len() > 1 {
            let a = items.swap_remove(rng.random_range(0..items.len()));
            let b = items.swap_remove(rng.random_range(0..items.len()));
            let v = nodes.len();
            nodes.push(Node {
                age: 0.0,
                parent: None,
                children: Some([a, b]),
                catastrophes: Vec::new(),
            });
            nodes[a].parent = Some(v);
            nodes[b].parent = Some(v);
            items.push(v);
        }
        for leaf in g.iter() {
            cover[leaf] = items[0];
        }
    }
    let root = cover[0];
    let mut tree = Tree::from_parts(taxa.clone(), nodes, root)?;
    let (own_lo, own_hi) = cs.node_bounds(&tree);
    let post = tree.postorder();
    let mut lo = own_lo.clone();
    for &v in &post {
        if let Some([a, b]) = tree.children(v) {
            lo[v] = lo[v].max(lo[a]).max(lo[b]);
            if lo[v] >= own_hi[v] {
                return Ok(None);
            }
        }
    }
    let mut root_hi = own_hi[root];
    if let Some(t) = cs.max_root_age() {
        root_hi = root_hi.min(t);
    }
    if lo[root] >= root_hi {
        return Ok(None);
    }
    let root_age = if root_hi.is_finite() {
        rng.random_range(lo[root]..root_hi)
    } else {
        let exp =
            Exp::new(theta).map_err(|_| Error::InvalidArgument("bad branching rate".into()))?;
        lo[root] + (0..l - 1).map(|_| exp.sample(rng)).sum::<f64>()
    };
    tree.set_age(root, root_age);
    for v in tree.preorder() {
        if v == root {
            continue;
        }
        let pa = tree.age(tree.parent(v).unwrap());
        if v < l && cs.leaf_window(v).is_none() {
            if tree.age(v) >= pa {
                return Ok(None);
            }
            continue;
        }
        let hi = pa.min(own_hi[v]);
        if lo[v] >= hi {
            return Ok(None);
        }
        tree.set_age(v, rng.random_range(lo[v]..hi));
    }
    Ok(cs.is_satisfied(&tree).then_some(tree))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::tree::testing::{build, taxa};

    fn clade(name: &str, n: usize, leaves: &[usize]) -> Clade {
        Clade {
            name: name.into(),
            taxa: LeafSet::from_indices(n, leaves.iter().copied()),
            rootmin: None,
            rootmax: None,
            originatemin: None,
            originatemax: None,
        }
    }

    /// Leaves 3,4,5 (1-based) form the clade; its root has age 2 and the
    /// originate node age 3.
    fn figure_tree() -> Tree {
        build(
            7,
            &[
                (3, 4, 1.0),
                (2, 7, 2.0),
                (1, 8, 3.0),
                (5, 6, 1.5),
                (0, 10, 2.5),
                (9, 11, 4.0),
            ],
        )
    }

    #[test]
    fn figure_configuration_is_valid() {
        let mut c = clade("c", 7, &[2, 3, 4]);
        c.rootmin = Some(1.5);
        c.rootmax = Some(2.5);
        c.originatemin = Some(2.8);
        c.originatemax = Some(3.5);
        let cs = ConstraintSet::new(7, vec![c], Some(10.0)).unwrap();
        assert!(cs.validate(&figure_tree()).is_empty());
    }

    #[test]
    fn detects_violations() {
        let t = figure_tree();
        let split = ConstraintSet::new(7, vec![clade("s", 7, &[2, 5])], None).unwrap();
        assert_eq!(
            split.validate(&t),
            vec![Violation::NotMonophyletic { clade: "s".into() }]
        );
        let at_max = ConstraintSet::unconstrained(7, Some(4.0));
        assert!(matches!(
            at_max.validate(&t)[..],
            [Violation::RootTooOld { .. }]
        ));
        assert!(ConstraintSet::unconstrained(7, Some(4.0 + 1e-9)).is_satisfied(&t));
        let mut c = clade("c", 7, &[2, 3, 4]);
        c.originatemax = Some(2.9);
        let cs = ConstraintSet::new(7, vec![c], None).unwrap();
        assert!(matches!(
            cs.validate(&t)[..],
            [Violation::OriginateAge { .. }]
        ));
    }

    #[test]
    fn zero_length_edges_are_rejected() {
        let t = build(3, &[(0, 1, 1.0), (3, 2, 1.0)]);
        assert!(!ConstraintSet::unconstrained(3, None).is_satisfied(&t));
    }

    #[test]
    fn rejects_bad_sets() {
        let a = clade("a", 4, &[0, 1]);
        let b = clade("b", 4, &[1, 2]);
        assert!(ConstraintSet::new(4, vec![a.clone(), b], None).is_err());
        let mut c = a.clone();
        c.rootmin = Some(50.0);
        assert!(ConstraintSet::new(4, vec![c], Some(40.0)).is_err());
        let nested = clade("n", 4, &[0, 1, 2]);
        assert!(ConstraintSet::new(4, vec![a, nested], None).is_ok());
    }

    #[test]
    fn omitted_taxa_in_clades() {
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let clades = vec![
            CladeConstraint::new("keep", vec!["a".into(), "z".into()]),
            CladeConstraint::new("drop", vec!["z".into()]),
        ];
        let cs =
            ConstraintSet::from_clades(&names, &clades, &CladeSelection::default(), None).unwrap();
        assert_eq!(cs.clades().len(), 1);
        assert_eq!(cs.clades()[0].taxa.iter().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn feasible_trees_satisfy_nested_constraints() {
        let n = 8;
        let mut a = clade("A", n, &[0, 1]);
        a.rootmin = Some(100.0);
        a.rootmax = Some(200.0);
        let mut b = clade("B", n, &[0, 1, 2, 3]);
        b.originatemin = Some(500.0);
        let mut off = clade("off", n, &[5]);
        off.rootmin = Some(40.0);
        off.rootmax = Some(60.0);
        let cs = ConstraintSet::new(n, vec![a, b, off], Some(2000.0)).unwrap();
        let mut r = rng::from_seed(1);
        for _ in 0..200 {
            let t = random_feasible_tree(taxa(n), 0.01, &cs, &mut r).unwrap();
            assert!(cs.validate(&t).is_empty(), "{:?}", cs.validate(&t));
            let sets = t.leaf_sets();
            let ma = t.mrca(&[0, 1]).unwrap();
            let mb = t.mrca(&[0, 1, 2, 3]).unwrap();
            assert!(sets[ma].is_subset(&sets[mb]));
            assert!((40.0..=60.0).contains(&t.age(5)));
        }
    }

    #[test]
    fn contradictory_bounds_fail() {
        let n = 4;
        let mut a = clade("A", n, &[0, 1]);
        a.rootmin = Some(100.0);
        let mut b = clade("B", n, &[0, 1, 2]);
        b.rootmax = Some(50.0);
        let cs = ConstraintSet::new(n, vec![a, b], None).unwrap();
        let mut r = rng::from_seed(1);
        assert!(random_feasible_tree(taxa(n), 0.01, &cs, &mut r).is_err());
    }
}
