//! The proposal kernels, numbered as in the move table of the sampler.
//!
//! | id | proposal |
//! |----|----------|
//! | 1  | internal node age, uniform between its oldest child and its parent (root: up to the maximum root age, or a multiplier when there is none) |
//! | 2  | narrow exchange of a node with its parent's sibling |
//! | 3  | wide exchange of the parents of two unrelated nodes |
//! | 4  | prune and regraft onto an edge adjacent to the original position |
//! | 5  | prune and regraft onto any compatible edge |
//! | 6  | scale all node ages |
//! | 7  | scale the ages in one subtree |
//! | 8  | multiply μ |
//! | 11 | leaf age within its sampling window |
//! | 12 | scale the ages above every clade upper bound |
//! | 13 | add a catastrophe |
//! | 14 | delete a catastrophe |
//! | 15 | redraw the catastrophe count of one edge from its conditional prior |
//! | 16 | multiply κ |
//! | 17 | move a catastrophe along its edge |
//! | 18 | move a catastrophe to an adjacent edge |
//! | 19 | multiply one ξ |
//! | 20 | multiply all ξ by a common factor |
//! | 21 | multiply the borrowing rate (dormant) |
//!
//! Multipliers are `e^u` with `u ~ U(-δ, δ)`. Node choices are keyed by the
//! leaf set below the node, so coupled chains pick the same clade.

use rand::Rng;

use super::draw::{draw, draw_all, Continuous, CountLaw, Keyed, Pair, Scaled, Uniform};
use crate::leafset::LeafSet;
use crate::priors::{RhoMode, TreePrior, RHO_PRIOR};
use crate::state::{ChainState, Model};
use crate::tree::Tree;

/// Move ids in the order of the monitoring columns.
pub const MOVE_IDS: [u8; 19] = [
    1, 2, 3, 4, 5, 6, 7, 8, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21,
];

/// Moves that cannot be coupled efficiently.
pub const UNCOUPLED_MOVES: [u8; 3] = [6, 7, 12];

/// A candidate state and the log Hastings ratio of reaching it; `None`
/// for a proposal that is rejected outright.
pub type Proposal = Option<(ChainState, f64)>;

pub fn move_name(id: u8) -> &'static str {
    match id {
        1 => "node age",
        2 => "narrow exchange",
        3 => "wide exchange",
        4 => "local prune-regraft",
        5 => "global prune-regraft",
        6 => "scale tree",
        7 => "scale subtree",
        8 => "death rate",
        11 => "leaf age",
        12 => "scale above constraints",
        13 => "add catastrophe",
        14 => "delete catastrophe",
        15 => "resample catastrophe count",
        16 => "catastrophe death probability",
        17 => "move catastrophe on edge",
        18 => "move catastrophe between edges",
        19 => "one recording probability",
        20 => "all recording probabilities",
        21 => "borrowing rate",
        _ => "unknown",
    }
}

fn slot(id: u8) -> Option<usize> {
    MOVE_IDS.iter().position(|&m| m == id)
}

/// Weights of the enabled moves.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    weights: [f64; MOVE_IDS.len()],
}

impl Schedule {
    /// Moves applicable to `model`, weighted by `weights` (in
    /// [`MOVE_IDS`] order; all ones when absent). Moves 6, 7 and 12 are
    /// dropped for coupled runs.
    pub fn new(model: &Model, weights: Option<&[f64]>, coupled: bool) -> crate::Result<Self> {
        let mut w = [1.0; MOVE_IDS.len()];
        if let Some(given) = weights {
            if given.len() != MOVE_IDS.len() {
                return Err(crate::Error::Config(format!(
                    "expected {} move weights, got {}",
                    MOVE_IDS.len(),
                    given.len()
                )));
            }
            if given.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return Err(crate::Error::Config(
                    "move weights must be non-negative".into(),
                ));
            }
            w.copy_from_slice(given);
        }
        let l = model.n_leaves();
        for (k, &id) in MOVE_IDS.iter().enumerate() {
            let on = match id {
                1 => true,
                2..=5 => model.vary_topology && l >= 3,
                6 | 7 => !coupled,
                8 => model.vary_mu,
                11 => !model.constraints.offset_leaves().is_empty(),
                12 => !coupled && model.constraints.has_upper_bounds(),
                13..=15 | 17 | 18 => model.catastrophes,
                16 => model.catastrophes && model.vary_kappa,
                19 | 20 => !model.missing_taxa.is_empty(),
                _ => false,
            };
            if !on {
                w[k] = 0.0;
            }
        }
        if model.catastrophes && (w[slot(13).unwrap()] > 0.0) != (w[slot(14).unwrap()] > 0.0) {
            return Err(crate::Error::Config(
                "adding and deleting catastrophes must both be enabled or both disabled".into(),
            ));
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(crate::Error::Config("no move is enabled".into()));
        }
        Ok(Schedule { weights: w })
    }

    pub fn weight(&self, id: u8) -> f64 {
        slot(id).map_or(0.0, |k| self.weights[k])
    }

    pub fn enabled(&self) -> Vec<u8> {
        MOVE_IDS
            .iter()
            .copied()
            .filter(|&id| self.weight(id) > 0.0)
            .collect()
    }

    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        let total: f64 = self.weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (k, &w) in self.weights.iter().enumerate() {
            if u < w {
                return MOVE_IDS[k];
            }
            u -= w;
        }
        let last = self.weights.iter().rposition(|&w| w > 0.0).unwrap();
        MOVE_IDS[last]
    }
}

/// Everything a proposal needs besides the states.
pub struct MoveContext<'a> {
    pub model: &'a Model,
    pub schedule: &'a Schedule,
    /// Half-width of the log multiplier.
    pub delta: f64,
}

/// Propose move `id` for one chain or a coupled pair.
pub fn propose<R: Rng + ?Sized>(
    id: u8,
    s: Pair<&ChainState>,
    ctx: &MoveContext,
    rng: &mut R,
) -> Pair<Proposal> {
    match id {
        1 => node_age(s, ctx, rng),
        2 => narrow_exchange(s, rng),
        3 => wide_exchange(s, rng),
        4 => prune_regraft(s, true, rng),
        5 => prune_regraft(s, false, rng),
        6 => scale_tree(s, ScaleScope::All, ctx, rng),
        7 => scale_tree(s, ScaleScope::Subtree, ctx, rng),
        8 => scalar(s, ctx, rng, |st| st.mu, |st, v| st.mu = v),
        11 => leaf_age(s, ctx, rng),
        12 => scale_tree(s, ScaleScope::AboveBounds, ctx, rng),
        13 => add_catastrophe(s, ctx, rng),
        14 => delete_catastrophe(s, ctx, rng),
        15 => resample_count(s, ctx, rng),
        16 => scalar(s, ctx, rng, |st| st.kappa, |st, v| st.kappa = v),
        17 => shift_catastrophe(s, rng),
        18 => hop_catastrophe(s, rng),
        19 => one_xi(s, ctx, rng),
        20 => all_xi(s, ctx, rng),
        _ => s.map(|_| None),
    }
}

/// Candidate items with the keys used to couple the choice between chains.
struct Choice<K> {
    keys: Vec<K>,
    items: Vec<usize>,
    weights: Option<Vec<f64>>,
}

impl<K: Clone + PartialEq> Choice<K> {
    fn uniform(pairs: impl IntoIterator<Item = (K, usize)>) -> Self {
        let (keys, items) = pairs.into_iter().unzip();
        Choice {
            keys,
            items,
            weights: None,
        }
    }

    fn weighted(triples: impl IntoIterator<Item = (K, usize, f64)>) -> Self {
        let mut c = Choice {
            keys: Vec::new(),
            items: Vec::new(),
            weights: Some(Vec::new()),
        };
        for (k, i, w) in triples {
            c.keys.push(k);
            c.items.push(i);
            c.weights.as_mut().unwrap().push(w);
        }
        c
    }

    fn law(&self) -> Option<Keyed<K>> {
        match &self.weights {
            None => Keyed::uniform(self.keys.clone()),
            Some(w) => Keyed::weighted(self.keys.clone(), w.clone()),
        }
    }

    fn size(&self) -> usize {
        self.items.len()
    }
}

/// Draw one item per chain, coupled through the keys.
fn pick<K: Clone + PartialEq, R: Rng + ?Sized>(
    choices: &Pair<Choice<K>>,
    rng: &mut R,
) -> Pair<Option<usize>> {
    let laws = choices.as_ref().map(Choice::law);
    let keys = draw(laws, rng);
    choices
        .as_ref()
        .zip(keys)
        .map(|(c, k)| k.map(|k| c.items[c.keys.iter().position(|x| *x == k).unwrap()]))
}

fn log_multiplier<R: Rng + ?Sized>(delta: f64, rng: &mut R) -> f64 {
    delta * (2.0 * rng.random::<f64>() - 1.0)
}

fn strictly_ordered(tree: &Tree) -> bool {
    tree.edges().all(|i| tree.branch_length(i) > 0.0)
}

fn oldest_child(tree: &Tree, v: usize) -> f64 {
    let [a, b] = tree.children(v).expect("internal node");
    tree.age(a).max(tree.age(b))
}

fn node_age<R: Rng + ?Sized>(
    s: Pair<&ChainState>,
    ctx: &MoveContext,
    rng: &mut R,
) -> Pair<Proposal> {
    let t_max = match ctx.model.tree_prior {
        TreePrior::UniformRoot { .. } => ctx.model.constraints.max_root_age(),
        TreePrior::Exponential => None,
    };
    let choices = s.map(|st| {
        let sets = st.tree.leaf_sets();
        Choice::uniform(st.tree.internal_nodes().map(|v| (sets[v].clone(), v)))
    });
    let nodes = pick(&choices, rng);
    let laws = s.zip(nodes).map(|(st, v)| {
        let v = v?;
        let t = &st.tree;
        let lo = oldest_child(t, v);
        match t.parent(v) {
            Some(p) => Uniform::new(lo, t.age(p)).map(Continuous::Uniform),
            None => match t_max {
                Some(hi) => Uniform::new(lo, hi).map(Continuous::Uniform),
                None => Some(Continuous::Scaled(Scaled {
                    shift: lo,
                    base: t.age(v) - lo,
                    delta: ctx.delta,
                })),
            },
        }
    });
    let ages = draw(laws, rng);
    s.zip(nodes).zip(ages).map(|((st, v), a)| {
        let (v, a) = (v?, a?);
        let mut n = st.clone();
        let mut h = 0.0;
        if n.tree.parent(v).is_none() && t_max.is_none() {
            let lo = oldest_child(&n.tree, v);
            h = ((a - lo) / (n.tree.age(v) - lo)).ln();
        }
        n.tree.set_age(v, a);
        Some((n, h))
    })
}

fn leaf_age<R: Rng + ?Sized>(
    s: Pair<&ChainState>,
    ctx: &MoveContext,
    rng: &mut R,
) -> Pair<Proposal> {
    let cs = &ctx.model.constraints;
    let leaves = cs.offset_leaves();
    let choices = s.map(|_| Choice::uniform(leaves.iter().map(|&l| (l, l))));
    let picked = pick(&choices, rng);
    let laws = s.zip(picked).map(|(st, l)| {
        let l = l?;
        let (lo, hi) = cs.leaf_window(l)?;
        let p = st.tree.parent(l)?;
        Uniform::new(lo, hi.min(st.tree.age(p)))
    });
    let ages = draw(laws, rng);
    s.zip(picked).zip(ages).map(|((st, l), a)| {
        let mut n = st.clone();
        n.tree.set_age(l?, a?);
        Some((n, 0.0))
    })
}

/// Nodes whose parent is not the root, keyed by leaf set.
fn non_root_parent_nodes(t: &Tree) -> Choice<LeafSet> {
    let sets = t.leaf_sets();
    let root = t.root();
    Choice::uniform(
        t.edges()
            .filter(|&i| t.parent(i) != Some(root))
            .map(|i| (sets[i].clone(), i)),
    )
}

fn narrow_exchange<R: Rng + ?Sized>(s: Pair<&ChainState>, rng: &mut R) -> Pair<Proposal> {
    let choices = s.map(|st| non_root_parent_nodes(&st.tree));
    let picked = pick(&choices, rng);
    s.zip(picked).map(|(st, i)| {
        let i = i?;
        let t = &st.tree;
        let p = t.parent(i)?;
        let u = t.sibling(p)?;
        if t.age(u) >= t.age(p) {
            return None;
        }
        let mut n = st.clone();
        n.tree.exchange(i, u);
        Some((n, 0.0))
    })
}

fn wide_exchange<R: Rng + ?Sized>(s: Pair<&ChainState>, rng: &mut R) -> Pair<Proposal> {
    let choices = s.map(|st| {
        let sets = st.tree.leaf_sets();
        Choice::uniform(st.tree.edges().map(|i| (sets[i].clone(), i)))
    });
    let first = pick(&choices, rng);
    let second = pick(&choices, rng);
    s.zip(first).zip(second).map(|((st, i), j)| {
        let (i, j) = (i?, j?);
        let t = &st.tree;
        let (pi, pj) = (t.parent(i)?, t.parent(j)?);
        if i == j || pi == pj || t.is_ancestor_or_self(i, j) || t.is_ancestor_or_self(j, i) {
            return None;
        }
        if t.age(i) >= t.age(pj) || t.age(j) >= t.age(pi) {
            return None;
        }
        let mut n = st.clone();
        n.tree.exchange(i, j);
        Some((n, 0.0))
    })
}

/// The tree with the subtree at `i` and its parent `p` cut out.
struct Pruned {
    parent: Vec<Option<usize>>,
    children: Vec<Option<[usize; 2]>>,
    attached: Vec<bool>,
    root: usize,
    sibling: usize,
    p: usize,
}

impl Pruned {
    fn new(t: &Tree, i: usize) -> Self {
        let p = t.parent(i).unwrap();
        let g = t.parent(p).unwrap();
        let s = t.sibling(i).unwrap();
        let mut parent: Vec<Option<usize>> = (0..t.n_nodes()).map(|v| t.parent(v)).collect();
        let mut children: Vec<Option<[usize; 2]>> =
            (0..t.n_nodes()).map(|v| t.children(v)).collect();
        parent[s] = Some(g);
        let ch = children[g].as_mut().unwrap();
        if ch[0] == p {
            ch[0] = s;
        } else {
            ch[1] = s;
        }
        let mut attached = vec![true; t.n_nodes()];
        attached[p] = false;
        let mut stack = vec![i];
        while let Some(v) = stack.pop() {
            attached[v] = false;
            if let Some([a, b]) = t.children(v) {
                stack.extend([a, b]);
            }
        }
        Pruned {
            parent,
            children,
            attached,
            root: t.root(),
            sibling: s,
            p,
        }
    }

    /// Edges of the pruned tree (excluding the root edge) onto which a
    /// node of age `min_age` can be regrafted.
    fn valid(&self, t: &Tree, e: usize, min_age: f64) -> bool {
        self.attached[e] && e != self.root && self.parent[e].is_some_and(|q| t.age(q) > min_age)
    }

    fn neighbours(&self, t: &Tree, e: usize, min_age: f64) -> Vec<usize> {
        let mut out = Vec::with_capacity(4);
        if let Some([a, b]) = self.children[e] {
            out.extend([a, b]);
        }
        if let Some(q) = self.parent[e] {
            if q != self.root {
                out.push(q);
            }
            let [a, b] = self.children[q].unwrap();
            out.push(if a == e { b } else { a });
        }
        out.retain(|&x| self.valid(t, x, min_age));
        out
    }
}

fn prune_regraft<R: Rng + ?Sized>(
    s: Pair<&ChainState>,
    local: bool,
    rng: &mut R,
) -> Pair<Proposal> {
    let choices = s.map(|st| non_root_parent_nodes(&st.tree));
    let picked = pick(&choices, rng);
    let setup = s.zip(picked).map(|(st, i)| {
        let i = i?;
        let t = &st.tree;
        let sets = t.leaf_sets();
        let pr = Pruned::new(t, i);
        let min_age = t.age(i);
        let targets: Vec<usize> = if local {
            pr.neighbours(t, pr.sibling, min_age)
        } else {
            (0..t.n_nodes())
                .filter(|&e| pr.valid(t, e, min_age))
                .collect()
        };
        let keyed = targets.iter().map(|&e| (sets[e].difference(&sets[i]), e));
        Some((i, pr, Choice::uniform(keyed)))
    });
    let choices = setup.as_ref().map(|c| match c {
        Some((_, _, ch)) => Choice {
            keys: ch.keys.clone(),
            items: ch.items.clone(),
            weights: None,
        },
        None => Choice::uniform(std::iter::empty()),
    });
    let targets = pick(&choices, rng);
    let laws = s.zip(setup.as_ref()).zip(targets).map(|((st, c), j)| {
        let (i, pr, _) = c.as_ref()?;
        let j = j?;
        let t = &st.tree;
        Uniform::new(t.age(*i).max(t.age(j)), t.age(pr.parent[j].unwrap()))
    });
    let ages = draw(laws, rng);
    s.zip(setup)
        .zip(targets.zip(ages))
        .map(|((st, c), (j, a))| {
            let (i, pr, ch) = c?;
            let (j, a) = (j?, a?);
            let t = &st.tree;
            let s_old = pr.sibling;
            let g = pr.parent[s_old].unwrap();
            let range_old = t.age(g) - t.age(i).max(t.age(s_old));
            let range_new = t.age(pr.parent[j].unwrap()) - t.age(i).max(t.age(j));
            let mut h = range_new.ln() - range_old.ln();
            if local {
                let back = pr.neighbours(t, j, t.age(i)).len();
                h += (ch.size() as f64).ln() - (back as f64).ln();
            }
            let mut n = st.clone();
            n.tree.prune_regraft(i, j, a);
            debug_assert_eq!(pr.p, n.tree.parent(i).unwrap());
            Some((n, h))
        })
}

#[derive(Clone, Copy, PartialEq)]
enum ScaleScope {
    All,
    Subtree,
    AboveBounds,
}

fn scale_tree<R: Rng + ?Sized>(
    s: Pair<&ChainState>,
    scope: ScaleScope,
    ctx: &MoveContext,
    rng: &mut R,
) -> Pair<Proposal> {
    let cs = &ctx.model.constraints;
    let subtree = match scope {
        ScaleScope::Subtree => {
            let choices = s.map(|st| {
                let sets = st.tree.leaf_sets();
                Choice::uniform(st.tree.internal_nodes().map(|v| (sets[v].clone(), v)))
            });
            Some(pick(&choices, rng))
        }
        _ => None,
    };
    let u = log_multiplier(ctx.delta, rng);
    let m = u.exp();
    let floor = cs.max_upper_bound();
    let offset = cs.offset_leaves();
    s.zip(subtree.unwrap_or(s.map(|_| None))).map(|(st, root)| {
        let t = &st.tree;
        let nodes: Vec<usize> = match scope {
            ScaleScope::All => t.internal_nodes().chain(offset.iter().copied()).collect(),
            ScaleScope::Subtree => {
                let r = root?;
                t.internal_nodes()
                    .filter(|&v| t.is_ancestor_or_self(r, v))
                    .collect()
            }
            ScaleScope::AboveBounds => t.internal_nodes().filter(|&v| t.age(v) > floor).collect(),
        };
        if nodes.is_empty() {
            return None;
        }
        let mut n = st.clone();
        for &v in &nodes {
            let a = t.age(v);
            n.tree.set_age(
                v,
                match scope {
                    ScaleScope::AboveBounds => floor + (a - floor) * m,
                    _ => a * m,
                },
            );
        }
        if !strictly_ordered(&n.tree) {
            return None;
        }
        Some((n, nodes.len() as f64 * u))
    })
}

fn scalar<R: Rng + ?Sized>(
    s: Pair<&ChainState>,
    ctx: &MoveContext,
    rng: &mut R,
    get: fn(&ChainState) -> f64,
    set: fn(&mut ChainState, f64),
) -> Pair<Proposal> {
    let olds = s.map(get);
    let laws = olds.map(|v| Scaled {
        shift: 0.0,
        base: v,
        delta: ctx.delta,
    });
    let news = draw_all(laws, rng);
    s.zip(olds.zip(news)).map(|(st, (old, new))| {
        let mut n = st.clone();
        set(&mut n, new);
        Some((n, (new / old).ln()))
    })
}

fn one_xi<R: Rng + ?Sized>(s: Pair<&ChainState>, ctx: &MoveContext, rng: &mut R) -> Pair<Proposal> {
    let taxa = &ctx.model.missing_taxa;
    let choices = s.map(|_| Choice::uniform(taxa.iter().map(|&j| (j, j))));
    let picked = pick(&choices, rng);
    let laws = s.zip(picked).map(|(st, j)| {
        j.map(|j| Scaled {
            shift: 0.0,
            base: st.xi[j],
            delta: ctx.delta,
        })
    });
    let news = draw(laws, rng);
    s.zip(picked.zip(news)).map(|(st, (j, new))| {
        let (j, new) = (j?, new?);
        let mut n = st.clone();
        let h = (new / n.xi[j]).ln();
        n.xi[j] = new;
        Some((n, h))
    })
}

fn all_xi<R: Rng + ?Sized>(s: Pair<&ChainState>, ctx: &MoveContext, rng: &mut R) -> Pair<Proposal> {
    let taxa = &ctx.model.missing_taxa;
    let u = log_multiplier(ctx.delta, rng);
    s.map(|st| {
        let mut n = st.clone();
        for &j in taxa {
            n.xi[j] *= u.exp();
        }
        Some((n, taxa.len() as f64 * u))
    })
}

/// Finite edges keyed by leaf set, optionally weighted by their
/// catastrophe counts.
fn edge_choice(t: &Tree, by_count: bool) -> Choice<LeafSet> {
    let sets = t.leaf_sets();
    if by_count {
        Choice::weighted(
            t.edges()
                .filter(|&i| t.catastrophe_count(i) > 0)
                .map(|i| (sets[i].clone(), i, t.catastrophe_count(i) as f64)),
        )
    } else {
        Choice::uniform(t.edges().map(|i| (sets[i].clone(), i)))
    }
}

fn add_catastrophe<R: Rng + ?Sized>(
    s: Pair<&ChainState>,
    ctx: &MoveContext,
    rng: &mut R,
) -> Pair<Proposal> {
    let choices = s.map(|st| edge_choice(&st.tree, false));
    let picked = pick(&choices, rng);
    let pos: f64 = rng.random();
    let w = (ctx.schedule.weight(14) / ctx.schedule.weight(13)).ln();
    s.zip(picked).map(|(st, i)| {
        let i = i?;
        let t = &st.tree;
        let e = (t.n_nodes() - 1) as f64;
        let k = t.catastrophe_count(i) as f64;
        let total = t.total_catastrophes() as f64;
        let h = ((k + 1.0) / (total + 1.0)).ln() + e.ln() + w;
        let mut n = st.clone();
        n.tree.catastrophes_mut(i).push(pos);
        Some((n, h))
    })
}

fn delete_catastrophe<R: Rng + ?Sized>(
    s: Pair<&ChainState>,
    ctx: &MoveContext,
    rng: &mut R,
) -> Pair<Proposal> {
    let choices = s.map(|st| edge_choice(&st.tree, true));
    let picked = pick(&choices, rng);
    let which: f64 = rng.random();
    let w = (ctx.schedule.weight(13) / ctx.schedule.weight(14)).ln();
    s.zip(picked).map(|(st, i)| {
        let i = i?;
        let t = &st.tree;
        let e = (t.n_nodes() - 1) as f64;
        let k = t.catastrophe_count(i);
        let total = t.total_catastrophes() as f64;
        let h = -e.ln() - (k as f64 / total).ln() + w;
        let mut n = st.clone();
        n.tree
            .catastrophes_mut(i)
            .remove(((which * k as f64) as usize).min(k - 1));
        Some((n, h))
    })
}

/// Conditional prior of the count on edge `i` given the other counts.
fn count_law(t: &Tree, i: usize, rho: RhoMode) -> CountLaw {
    let len = t.branch_length(i);
    match rho {
        RhoMode::Fixed(r) => CountLaw::Poisson { mean: r * len },
        RhoMode::Marginal => {
            let (a, b) = RHO_PRIOR;
            let others = (t.total_catastrophes() - t.catastrophe_count(i)) as f64;
            CountLaw::NegativeBinomial {
                r: a + others,
                p: len / (b + t.tree_length()),
            }
        }
    }
}

fn resample_count<R: Rng + ?Sized>(
    s: Pair<&ChainState>,
    ctx: &MoveContext,
    rng: &mut R,
) -> Pair<Proposal> {
    use super::draw::Law;
    let choices = s.map(|st| edge_choice(&st.tree, false));
    let picked = pick(&choices, rng);
    let laws = s
        .zip(picked)
        .map(|(st, i)| i.map(|i| count_law(&st.tree, i, ctx.model.rho)));
    let counts = draw(laws, rng);
    let positions: Vec<f64> = {
        let most = counts.x.unwrap_or(0).max(counts.y.flatten().unwrap_or(0));
        (0..most).map(|_| rng.random()).collect()
    };
    s.zip(picked.zip(counts)).map(|(st, (i, k))| {
        let (i, k) = (i?, k?);
        let law = count_law(&st.tree, i, ctx.model.rho);
        let h = law.log_density(&st.tree.catastrophe_count(i)) - law.log_density(&k);
        let mut n = st.clone();
        *n.tree.catastrophes_mut(i) = positions[..k].to_vec();
        Some((n, h))
    })
}

fn shift_catastrophe<R: Rng + ?Sized>(s: Pair<&ChainState>, rng: &mut R) -> Pair<Proposal> {
    let choices = s.map(|st| edge_choice(&st.tree, true));
    let picked = pick(&choices, rng);
    let (which, pos): (f64, f64) = (rng.random(), rng.random());
    s.zip(picked).map(|(st, i)| {
        let i = i?;
        let k = st.tree.catastrophe_count(i);
        let mut n = st.clone();
        n.tree.catastrophes_mut(i)[((which * k as f64) as usize).min(k - 1)] = pos;
        Some((n, 0.0))
    })
}

/// Edges adjacent to edge `i`: its child edges, its parent edge (unless
/// that is the root edge) and its sibling edge.
pub fn edge_neighbours(t: &Tree, i: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(4);
    if let Some([a, b]) = t.children(i) {
        out.extend([a, b]);
    }
    if let Some(p) = t.parent(i) {
        if p != t.root() {
            out.push(p);
        }
        out.push(t.sibling(i).unwrap());
    }
    out
}

fn hop_catastrophe<R: Rng + ?Sized>(s: Pair<&ChainState>, rng: &mut R) -> Pair<Proposal> {
    let choices = s.map(|st| edge_choice(&st.tree, true));
    let from = pick(&choices, rng);
    let targets = s.zip(from).map(|(st, i)| {
        let sets = st.tree.leaf_sets();
        match i {
            Some(i) => Choice::uniform(
                edge_neighbours(&st.tree, i)
                    .into_iter()
                    .map(|j| (sets[j].clone(), j)),
            ),
            None => Choice::uniform(std::iter::empty()),
        }
    });
    let to = pick(&targets, rng);
    let (which, pos): (f64, f64) = (rng.random(), rng.random());
    s.zip(from.zip(to)).map(|(st, (i, j))| {
        let (i, j) = (i?, j?);
        let t = &st.tree;
        let (ki, kj) = (t.catastrophe_count(i), t.catastrophe_count(j));
        let (ni, nj) = (edge_neighbours(t, i).len(), edge_neighbours(t, j).len());
        let h = ((kj + 1) as f64 / nj as f64).ln() - (ki as f64 / ni as f64).ln();
        let mut n = st.clone();
        n.tree
            .catastrophes_mut(i)
            .remove(((which * ki as f64) as usize).min(ki - 1));
        n.tree.catastrophes_mut(j).push(pos);
        Some((n, h))
    })
}
