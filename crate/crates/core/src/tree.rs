//! Dated rooted binary trees with catastrophes on edges.
//!
//! Nodes live in one vector. Leaves occupy indices `0..L` in taxon order and
//! internal nodes `L..2L-1`; the root is any internal index. Edge `i` is the
//! edge leading into node `i` from its parent, so catastrophes are stored on
//! the child node of the edge they sit on. Ages are in years before the most
//! recently sampled taxon.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::leafset::LeafSet;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub age: f64,
    pub parent: Option<usize>,
    pub children: Option<[usize; 2]>,
    /// Relative positions in (0, 1) along the edge into this node, measured
    /// from the parent end. The count of catastrophes is the length.
    pub catastrophes: Vec<f64>,
}

impl Node {
    fn leaf(age: f64) -> Self {
        Node {
            age,
            parent: None,
            children: None,
            catastrophes: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    root: usize,
    taxa: Arc<[String]>,
}

impl Tree {
    /// Assemble a tree from raw nodes, checking the binary structure and
    /// that ages never decrease towards the root.
    pub fn from_parts(taxa: Arc<[String]>, nodes: Vec<Node>, root: usize) -> Result<Tree> {
        let tree = Tree { nodes, root, taxa };
        tree.check_structure()?;
        Ok(tree)
    }

    pub fn n_leaves(&self) -> usize {
        self.taxa.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn taxa(&self) -> &Arc<[String]> {
        &self.taxa
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn age(&self, i: usize) -> f64 {
        self.nodes[i].age
    }

    pub fn set_age(&mut self, i: usize, age: f64) {
        self.nodes[i].age = age;
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.nodes[i].parent
    }

    pub fn children(&self, i: usize) -> Option<[usize; 2]> {
        self.nodes[i].children
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        i < self.n_leaves()
    }

    pub fn sibling(&self, i: usize) -> Option<usize> {
        let p = self.parent(i)?;
        let [a, b] = self.children(p).expect("parent has children");
        Some(if a == i { b } else { a })
    }

    pub fn internal_nodes(&self) -> std::ops::Range<usize> {
        self.n_leaves()..self.n_nodes()
    }

    /// Finite edges, identified by their child node.
    pub fn edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_nodes()).filter(move |&i| i != self.root)
    }

    /// Raw length of edge `i`; infinite for the root edge.
    pub fn branch_length(&self, i: usize) -> f64 {
        match self.parent(i) {
            Some(p) => self.nodes[p].age - self.nodes[i].age,
            None => f64::INFINITY,
        }
    }

    pub fn catastrophe_count(&self, i: usize) -> usize {
        self.nodes[i].catastrophes.len()
    }

    pub fn catastrophes_mut(&mut self, i: usize) -> &mut Vec<f64> {
        &mut self.nodes[i].catastrophes
    }

    pub fn total_catastrophes(&self) -> usize {
        self.nodes.iter().map(|n| n.catastrophes.len()).sum()
    }

    pub fn clear_catastrophes(&mut self) {
        for n in &mut self.nodes {
            n.catastrophes.clear();
        }
    }

    /// Sum of finite edge lengths, `|g|`.
    pub fn tree_length(&self) -> f64 {
        self.edges().map(|i| self.branch_length(i)).sum()
    }

    /// Edge length with each catastrophe folded in as an instantaneous
    /// advance of `-ln(1-κ)/μ` years. Infinite when κ = 1 and the edge has
    /// a catastrophe.
    pub fn effective_edge_length(&self, i: usize, mu: f64, kappa: f64) -> f64 {
        effective_length(self.branch_length(i), self.catastrophe_count(i), mu, kappa)
    }

    /// Nodes in post-order (children before parents).
    pub fn postorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_nodes());
        let mut stack = vec![(self.root, false)];
        while let Some((v, expanded)) = stack.pop() {
            match self.children(v) {
                Some([a, b]) if !expanded => {
                    stack.push((v, true));
                    stack.push((b, false));
                    stack.push((a, false));
                }
                _ => out.push(v),
            }
        }
        out
    }

    /// Nodes in pre-order (parents before children).
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_nodes());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            out.push(v);
            if let Some([a, b]) = self.children(v) {
                stack.push(b);
                stack.push(a);
            }
        }
        out
    }

    /// Leaf set below every node, indexed by node.
    pub fn leaf_sets(&self) -> Vec<LeafSet> {
        let n = self.n_leaves();
        let mut sets = vec![LeafSet::empty(n); self.n_nodes()];
        for v in self.postorder() {
            sets[v] = match self.children(v) {
                None => LeafSet::singleton(n, v),
                Some([a, b]) => sets[a].union(&sets[b]),
            };
        }
        sets
    }

    /// Leaves below node `v`.
    pub fn leaves_below(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            match self.children(u) {
                None => out.push(u),
                Some([a, b]) => {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        out
    }

    /// True when `a` is `b` or an ancestor of `b`.
    pub fn is_ancestor_or_self(&self, a: usize, b: usize) -> bool {
        let mut v = Some(b);
        while let Some(u) = v {
            if u == a {
                return true;
            }
            v = self.parent(u);
        }
        false
    }

    pub fn depth(&self, v: usize) -> usize {
        let mut d = 0;
        let mut u = v;
        while let Some(p) = self.parent(u) {
            d += 1;
            u = p;
        }
        d
    }

    /// Most recent common ancestor of a non-empty set of leaves.
    pub fn mrca(&self, leaves: &[usize]) -> Result<usize> {
        let (&first, rest) = leaves
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("mrca of an empty leaf set".into()))?;
        for &l in leaves {
            if l >= self.n_leaves() {
                return Err(Error::InvalidArgument(format!("unknown leaf id {l}")));
            }
        }
        let mut acc = first;
        for &l in rest {
            acc = self.mrca_pair(acc, l);
        }
        Ok(acc)
    }

    pub fn mrca_pair(&self, a: usize, b: usize) -> usize {
        let (mut a, mut b) = (a, b);
        let (mut da, mut db) = (self.depth(a), self.depth(b));
        while da > db {
            a = self.parent(a).unwrap();
            da -= 1;
        }
        while db > da {
            b = self.parent(b).unwrap();
            db -= 1;
        }
        while a != b {
            a = self.parent(a).unwrap();
            b = self.parent(b).unwrap();
        }
        a
    }

    /// Check binary structure, parent/child consistency, catastrophe
    /// positions and non-decreasing ages. Ties are allowed here.
    pub fn check_structure(&self) -> Result<()> {
        let l = self.n_leaves();
        if l < 2 {
            return Err(Error::Tree("a tree needs at least two leaves".into()));
        }
        if self.nodes.len() != 2 * l - 1 {
            return Err(Error::Tree(format!(
                "{} nodes for {l} leaves, expected {}",
                self.nodes.len(),
                2 * l - 1
            )));
        }
        if self.root < l || self.root >= self.nodes.len() {
            return Err(Error::Tree("root must be an internal node".into()));
        }
        if self.nodes[self.root].parent.is_some() {
            return Err(Error::Tree("root has a parent".into()));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match n.children {
                None if i >= l => {
                    return Err(Error::Tree(format!("internal node {i} has no children")))
                }
                Some(_) if i < l => return Err(Error::Tree(format!("leaf {i} has children"))),
                Some([a, b]) => {
                    if a == b || a >= self.nodes.len() || b >= self.nodes.len() {
                        return Err(Error::Tree(format!("bad children at node {i}")));
                    }
                    for c in [a, b] {
                        if self.nodes[c].parent != Some(i) {
                            return Err(Error::Tree(format!(
                                "node {c} does not point back to {i}"
                            )));
                        }
                        if self.nodes[c].age > n.age || !n.age.is_finite() {
                            return Err(Error::Tree(format!(
                                "node {c} (age {}) is older than its parent {i} (age {})",
                                self.nodes[c].age, n.age
                            )));
                        }
                    }
                }
                None => {}
            }
            if i != self.root && n.parent.is_none() {
                return Err(Error::Tree(format!("node {i} is detached")));
            }
            if n.catastrophes.iter().any(|&u| !(0.0..=1.0).contains(&u)) {
                return Err(Error::Tree(format!("catastrophe position off edge {i}")));
            }
            if i == self.root && !n.catastrophes.is_empty() {
                return Err(Error::Tree("catastrophes on the root edge".into()));
            }
        }
        if self.postorder().len() != self.nodes.len() {
            return Err(Error::Tree("tree is not connected".into()));
        }
        Ok(())
    }

    /// True when every edge has strictly positive length.
    pub fn has_strict_ages(&self) -> bool {
        self.edges().all(|i| self.branch_length(i) > 0.0)
    }

    /// Order-independent description of the tree: every node keyed by its
    /// leaf set together with its age bits and catastrophe count.
    pub fn canonical_form(&self) -> Vec<(LeafSet, u64, usize)> {
        let sets = self.leaf_sets();
        let mut v: Vec<_> = sets
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s, self.nodes[i].age.to_bits(), self.catastrophe_count(i)))
            .collect();
        v.sort();
        v
    }

    /// Same topology, ages and catastrophe counts, regardless of how the
    /// internal nodes happen to be numbered.
    pub fn same_state(&self, other: &Tree) -> bool {
        self.n_leaves() == other.n_leaves() && self.canonical_form() == other.canonical_form()
    }

    /// Order-independent topology description (leaf sets of internal nodes).
    pub fn topology_key(&self) -> Vec<LeafSet> {
        let sets = self.leaf_sets();
        let mut v: Vec<_> = self.internal_nodes().map(|i| sets[i].clone()).collect();
        v.sort();
        v
    }

    /// Detach the subtree at `i` (its parent `p` goes with it) and regraft
    /// `p` onto the edge above `target`, giving `p` the age `new_age`.
    /// Catastrophes stay on the edge into the node that carried them.
    pub fn prune_regraft(&mut self, i: usize, target: usize, new_age: f64) {
        let p = self.parent(i).expect("pruned node has a parent");
        let g = self
            .parent(p)
            .expect("pruned node's parent is not the root");
        let s = self.sibling(i).unwrap();
        self.replace_child(g, p, s);
        self.nodes[s].parent = Some(g);
        let q = self.parent(target).expect("target is not the root");
        self.replace_child(q, target, p);
        self.nodes[p].parent = Some(q);
        self.nodes[p].children = Some([i, target]);
        self.nodes[target].parent = Some(p);
        self.nodes[p].age = new_age;
    }

    /// Swap the parents of two nodes; neither may be an ancestor of the other.
    pub fn exchange(&mut self, a: usize, b: usize) {
        let pa = self.parent(a).expect("exchanged node has a parent");
        let pb = self.parent(b).expect("exchanged node has a parent");
        if pa == pb {
            return;
        }
        self.replace_child(pa, a, b);
        self.replace_child(pb, b, a);
        self.nodes[a].parent = Some(pb);
        self.nodes[b].parent = Some(pa);
    }

    fn replace_child(&mut self, parent: usize, old: usize, new: usize) {
        let ch = self.nodes[parent].children.as_mut().expect("internal");
        if ch[0] == old {
            ch[0] = new;
        } else {
            debug_assert_eq!(ch[1], old);
            ch[1] = new;
        }
    }

    /// Random tree by successive exponential(θ) branching intervals: starting
    /// from the leaves at their ages, pairs of extant lineages are joined
    /// until one lineage remains. Leaves without an age are placed at zero.
    pub fn random_exponential<R: Rng + ?Sized>(
        taxa: Arc<[String]>,
        theta: f64,
        leaf_ages: Option<&[f64]>,
        rng: &mut R,
    ) -> Result<Tree> {
        let l = taxa.len();
        if l < 2 {
            return Err(Error::InvalidArgument("need at least two taxa".into()));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "branching rate must be positive, got {theta}"
            )));
        }
        let exp = Exp::new(theta).unwrap();
        let mut nodes: Vec<Node> = (0..l)
            .map(|i| Node::leaf(leaf_ages.map_or(0.0, |a| a[i])))
            .collect();
        // Leaves enter the pool of lineages in order of age.
        let mut pending: Vec<usize> = (0..l).collect();
        pending.sort_by(|&a, &b| nodes[b].age.total_cmp(&nodes[a].age));
        let mut lineages: Vec<usize> = Vec::new();
        let mut t = 0.0;
        while let Some(&next) = pending.last() {
            if nodes[next].age <= t {
                lineages.push(pending.pop().unwrap());
            } else {
                break;
            }
        }
        while lineages.len() + pending.len() > 1 {
            let dt = exp.sample(rng);
            let arrive = pending.last().map(|&p| nodes[p].age);
            if lineages.len() < 2 || arrive.is_some_and(|a| a < t + dt) {
                // Next leaf is sampled before the next branching.
                let p = pending.pop().unwrap();
                t = nodes[p].age;
                lineages.push(p);
                continue;
            }
            t += dt;
            let a = lineages.swap_remove(rng.random_range(0..lineages.len()));
            let b = lineages.swap_remove(rng.random_range(0..lineages.len()));
            let v = nodes.len();
            nodes.push(Node {
                age: t,
                parent: None,
                children: Some([a, b]),
                catastrophes: Vec::new(),
            });
            nodes[a].parent = Some(v);
            nodes[b].parent = Some(v);
            lineages.push(v);
        }
        let root = lineages[0];
        Tree::from_parts(taxa, nodes, root)
    }

    /// Relabel internal nodes so that two trees with the same topology get
    /// the same numbering (internal nodes ordered by their leaf sets,
    /// children ordered by leaf set).
    pub fn canonicalize(&mut self) {
        let l = self.n_leaves();
        let sets = self.leaf_sets();
        let mut order: Vec<usize> = self.internal_nodes().collect();
        order.sort_by(|&a, &b| sets[a].cmp(&sets[b]));
        let mut new_index = vec![0usize; self.n_nodes()];
        for (i, slot) in new_index.iter_mut().enumerate().take(l) {
            *slot = i;
        }
        for (k, &old) in order.iter().enumerate() {
            new_index[old] = l + k;
        }
        let mut nodes = self.nodes.clone();
        for (old, n) in self.nodes.iter().enumerate() {
            let mut m = n.clone();
            m.parent = n.parent.map(|p| new_index[p]);
            m.children = n.children.map(|[a, b]| {
                let (a2, b2) = (new_index[a], new_index[b]);
                if sets[a] <= sets[b] {
                    [a2, b2]
                } else {
                    [b2, a2]
                }
            });
            nodes[new_index[old]] = m;
        }
        self.nodes = nodes;
        self.root = new_index[self.root];
    }
}

pub(crate) fn effective_length(raw: f64, k: usize, mu: f64, kappa: f64) -> f64 {
    if k == 0 {
        return raw;
    }
    raw + k as f64 * catastrophe_advance(mu, kappa)
}

/// Time advance equivalent to one catastrophe, `-ln(1-κ)/μ`.
pub fn catastrophe_advance(mu: f64, kappa: f64) -> f64 {
    -(-kappa).ln_1p() / mu
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    pub fn taxa(n: usize) -> Arc<[String]> {
        (0..n)
            .map(|i| format!("t{}", i + 1))
            .collect::<Vec<_>>()
            .into()
    }

    /// Build a tree from `(left, right, age)` joins; leaves at age zero.
    pub fn build(n_leaves: usize, joins: &[(usize, usize, f64)]) -> Tree {
        let mut nodes: Vec<Node> = (0..n_leaves).map(|_| Node::leaf(0.0)).collect();
        for &(a, b, age) in joins {
            let v = nodes.len();
            nodes.push(Node {
                age,
                parent: None,
                children: Some([a, b]),
                catastrophes: Vec::new(),
            });
            nodes[a].parent = Some(v);
            nodes[b].parent = Some(v);
        }
        let root = nodes.len() - 1;
        Tree::from_parts(taxa(n_leaves), nodes, root).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::testing::build;
    use super::*;
    use crate::rng;

    /// Seven leaves with clade {3,4,5} (1-based) rooted at index 8 and its
    /// originate node at index 9, whose other child is leaf 2 (1-based).
    fn clade_figure_tree() -> Tree {
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
    fn mrca_queries() {
        let t = clade_figure_tree();
        // taxa 3,4,5 (1-based) are leaves 2,3,4
        assert_eq!(t.mrca(&[2, 3, 4]).unwrap(), 8);
        assert_eq!(t.parent(8), Some(9));
        assert_eq!(t.mrca(&[5]).unwrap(), 5);
        assert_eq!(t.mrca(&(0..7).collect::<Vec<_>>()).unwrap(), t.root());
        assert!(t.mrca(&[9]).is_err());
        assert!(t.mrca(&[]).is_err());
    }

    #[test]
    fn mrca_associative_over_union() {
        let mut r = rng::from_seed(3);
        for _ in 0..50 {
            let t = Tree::random_exponential(testing::taxa(9), 1.0, None, &mut r).unwrap();
            let s1 = [0usize, 4, 7];
            let s2 = [2usize, 3];
            let all: Vec<usize> = s1.iter().chain(&s2).copied().collect();
            let m = t.mrca(&all).unwrap();
            let m1 = t.mrca(&s1).unwrap();
            let m2 = t.mrca(&s2).unwrap();
            assert_eq!(m, t.mrca_pair(m1, m2));
        }
    }

    #[test]
    fn lengths() {
        let t = build(2, &[(0, 1, 5.0)]);
        assert_eq!(t.tree_length(), 10.0);
        // ((A:1,B:1):1,C:2)
        let t = build(3, &[(0, 1, 1.0), (3, 2, 2.0)]);
        assert_eq!(t.tree_length(), 5.0);
        assert_eq!(t.n_nodes(), 5);
        assert_eq!(t.edges().count(), 4);
    }

    #[test]
    fn effective_edge_length_folds_catastrophes() {
        let mut t = build(2, &[(0, 1, 100.0)]);
        assert_eq!(t.effective_edge_length(0, 0.001, 0.5), 100.0);
        t.catastrophes_mut(0).push(0.3);
        let one = t.effective_edge_length(0, 0.001, 0.5);
        assert!((one - (100.0 + 693.147_180_559_945_3)).abs() < 1e-9);
        t.catastrophes_mut(0).push(0.6);
        let two = t.effective_edge_length(0, 0.001, 0.5);
        assert!((two - 100.0 - 2.0 * (one - 100.0)).abs() < 1e-9);
        assert!(t.effective_edge_length(0, 0.001, 0.6) > two);
        assert_eq!(t.effective_edge_length(0, 0.001, 1.0), f64::INFINITY);
    }

    #[test]
    fn exponential_tree_is_valid() {
        let mut r = rng::from_seed(11);
        for l in 2..12 {
            let t = Tree::random_exponential(testing::taxa(l), 0.5, None, &mut r).unwrap();
            t.check_structure().unwrap();
            assert!(t.has_strict_ages());
            assert_eq!(t.total_catastrophes(), 0);
            assert!((0..l).all(|i| t.age(i) == 0.0));
        }
    }

    #[test]
    fn exponential_tree_respects_leaf_ages() {
        let mut r = rng::from_seed(12);
        let ages = [0.0, 5.0, 0.0, 20.0];
        for _ in 0..20 {
            let t = Tree::random_exponential(testing::taxa(4), 0.2, Some(&ages), &mut r).unwrap();
            t.check_structure().unwrap();
            assert_eq!(t.age(3), 20.0);
            assert!(t.has_strict_ages());
        }
    }

    #[test]
    fn exponential_root_age_mean_for_two_leaves() {
        // Monte-Carlo check of the exponential law of the single interval.
        let mut r = rng::from_seed(99);
        let theta = 2.5;
        let n = 100_000;
        let ages: Vec<f64> = (0..n)
            .map(|_| {
                let t = Tree::random_exponential(testing::taxa(2), theta, None, &mut r).unwrap();
                t.age(t.root())
            })
            .collect();
        let mean = ages.iter().sum::<f64>() / n as f64;
        let se = (1.0 / theta) / (n as f64).sqrt();
        assert!((mean - 1.0 / theta).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn prune_regraft_and_exchange_keep_structure() {
        let mut r = rng::from_seed(5);
        let mut t = Tree::random_exponential(testing::taxa(6), 1.0, None, &mut r).unwrap();
        let sets_before = t.leaf_sets();
        // find a node whose parent is not the root and regraft it onto a leaf edge
        let i = (0..t.n_nodes())
            .find(|&i| t.parent(i).is_some_and(|p| p != t.root()))
            .unwrap();
        let p = t.parent(i).unwrap();
        let target = (0..t.n_leaves())
            .find(|&j| !sets_before[i].contains(j) && t.sibling(i) != Some(j))
            .unwrap();
        let new_age = t.age(i).max(t.age(target)) + 1e-3;
        let q = t.parent(target).unwrap();
        if new_age < t.age(q) && q != p {
            t.prune_regraft(i, target, new_age);
            t.check_structure().unwrap();
            assert_eq!(t.parent(target), Some(p));
        }
        let mut c = t.clone();
        c.canonicalize();
        assert!(c.same_state(&t));
        c.check_structure().unwrap();
    }

    #[test]
    fn canonical_form_ignores_internal_labels() {
        let a = build(3, &[(0, 1, 1.0), (3, 2, 2.0)]);
        let b = build(3, &[(1, 0, 1.0), (2, 3, 2.0)]);
        assert!(a.same_state(&b));
        let c = build(3, &[(0, 2, 1.0), (3, 1, 2.0)]);
        assert!(!a.same_state(&c));
    }
}
