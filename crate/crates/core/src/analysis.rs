//! Summaries of sampled trees and of trait data.

use std::collections::HashMap;

use rand::Rng;

use crate::leafset::LeafSet;
use crate::nexus::{Cell, TraitMatrix};
use crate::simulate::{apply_observation_model, simulate_traits, Observation, TraitProcess};
use crate::tree::Tree;
use crate::{Error, Result};

/// A clade of a consensus tree.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusClade {
    pub leaves: LeafSet,
    /// Fraction of samples containing the clade.
    pub support: f64,
    /// Mean length of the edge above the clade over samples containing it.
    pub mean_length: f64,
    /// Mean catastrophe count on that edge, rounded half up.
    pub catastrophes: usize,
}

/// Majority-rule consensus: possibly multifurcating, clades listed from
/// largest to smallest, the first being the root.
#[derive(Clone, Debug, PartialEq)]
pub struct ConsensusTree {
    pub taxa: Vec<String>,
    pub clades: Vec<ConsensusClade>,
}

impl ConsensusTree {
    /// Support label: a percentage for clades below 95% support, none
    /// otherwise.
    pub fn label(support: f64) -> Option<String> {
        (support < 0.95).then(|| format!("{}%", (support * 100.0).round() as i64))
    }

    /// Children of clade `k`: the maximal clades it strictly contains, and
    /// the leaves not covered by any of them.
    pub fn children(&self, k: usize) -> (Vec<usize>, Vec<usize>) {
        let parent = &self.clades[k].leaves;
        let inner: Vec<usize> = (0..self.clades.len())
            .filter(|&j| {
                j != k
                    && self.clades[j].leaves.is_subset(parent)
                    && self.clades[j].leaves != *parent
            })
            .collect();
        let maximal: Vec<usize> = inner
            .iter()
            .copied()
            .filter(|&j| {
                !inner
                    .iter()
                    .any(|&o| o != j && self.clades[j].leaves.is_subset(&self.clades[o].leaves))
            })
            .collect();
        let mut covered = LeafSet::empty(self.taxa.len());
        for &j in &maximal {
            covered.union_with(&self.clades[j].leaves);
        }
        let leaves = parent.iter().filter(|&l| !covered.contains(l)).collect();
        (maximal, leaves)
    }

    /// Newick text with mean branch lengths, support labels on internal
    /// nodes and `[&cat=k]` annotations for nonzero catastrophe counts.
    pub fn to_newick(&self, leaf_lengths: &[f64], leaf_catastrophes: &[usize]) -> String {
        fn annot(cats: usize) -> String {
            if cats > 0 {
                format!("[&cat={cats}]")
            } else {
                String::new()
            }
        }
        fn rec(t: &ConsensusTree, k: usize, ll: &[f64], lc: &[usize], out: &mut String) {
            let (subs, leaves) = t.children(k);
            out.push('(');
            let mut first = true;
            for &l in &leaves {
                if !first {
                    out.push(',');
                }
                first = false;
                out.push_str(&format!("{}{}:{}", t.taxa[l], annot(lc[l]), ll[l]));
            }
            for &j in &subs {
                if !first {
                    out.push(',');
                }
                first = false;
                rec(t, j, ll, lc, out);
            }
            out.push(')');
            let c = &t.clades[k];
            if k != 0 {
                if let Some(lbl) = ConsensusTree::label(c.support) {
                    out.push_str(&lbl);
                }
                out.push_str(&annot(c.catastrophes));
                out.push_str(&format!(":{}", c.mean_length));
            }
        }
        let mut s = String::new();
        rec(self, 0, leaf_lengths, leaf_catastrophes, &mut s);
        s.push(';');
        s
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

struct SplitStats {
    count: usize,
    length: f64,
    cats: f64,
}

/// Full consensus: clades plus mean leaf-edge lengths and catastrophe
/// counts.
#[derive(Clone, Debug, PartialEq)]
pub struct Consensus {
    pub tree: ConsensusTree,
    pub leaf_lengths: Vec<f64>,
    pub leaf_catastrophes: Vec<usize>,
}

impl Consensus {
    pub fn to_newick(&self) -> String {
        self.tree
            .to_newick(&self.leaf_lengths, &self.leaf_catastrophes)
    }
}

/// Majority-rule consensus of every `subsample`-th tree. Clades with
/// support at or above `threshold` are kept; when two such clades
/// conflict (possible only at exactly 50%), the one seen first wins.
pub fn consensus(trees: &[Tree], threshold: f64, subsample: usize) -> Result<Consensus> {
    if !(0.5..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!(
            "consensus threshold must lie in [0.5, 1], got {threshold}"
        )));
    }
    let step = subsample.max(1);
    let chosen: Vec<&Tree> = trees.iter().step_by(step).collect();
    if chosen.is_empty() {
        return Err(Error::InvalidArgument("no trees to summarise".into()));
    }
    let l = chosen[0].n_leaves();
    let taxa = chosen[0].taxa().to_vec();
    let mut order: Vec<LeafSet> = Vec::new();
    let mut stats: HashMap<LeafSet, SplitStats> = HashMap::new();
    let mut leaf_len = vec![0.0; l];
    let mut leaf_cat = vec![0.0; l];
    for t in &chosen {
        if t.taxa().as_ref() != taxa.as_slice() {
            return Err(Error::InvalidArgument("trees have different taxa".into()));
        }
        let sets = t.leaf_sets();
        for v in 0..t.n_nodes() {
            if t.is_leaf(v) {
                leaf_len[v] += t.branch_length(v);
                leaf_cat[v] += t.catastrophe_count(v) as f64;
                continue;
            }
            let e = stats.entry(sets[v].clone()).or_insert_with(|| {
                order.push(sets[v].clone());
                SplitStats {
                    count: 0,
                    length: 0.0,
                    cats: 0.0,
                }
            });
            e.count += 1;
            if v != t.root() {
                e.length += t.branch_length(v);
                e.cats += t.catastrophe_count(v) as f64;
            }
        }
    }
    let n = chosen.len() as f64;
    let mut kept: Vec<ConsensusClade> = Vec::new();
    let mut candidates: Vec<&LeafSet> = order
        .iter()
        .filter(|s| stats[*s].count as f64 / n >= threshold)
        .collect();
    candidates.sort_by(|a, b| stats[*b].count.cmp(&stats[*a].count));
    for s in candidates {
        let compatible = kept
            .iter()
            .all(|k| k.leaves.is_subset(s) || s.is_subset(&k.leaves) || !k.leaves.intersects(s));
        if !compatible {
            continue;
        }
        let st = &stats[s];
        kept.push(ConsensusClade {
            leaves: s.clone(),
            support: st.count as f64 / n,
            mean_length: st.length / st.count as f64,
            catastrophes: round_half_up(st.cats / st.count as f64),
        });
    }
    kept.sort_by_key(|k| std::cmp::Reverse(k.leaves.len()));
    Ok(Consensus {
        tree: ConsensusTree { taxa, clades: kept },
        leaf_lengths: leaf_len.iter().map(|x| x / n).collect(),
        leaf_catastrophes: leaf_cat.iter().map(|&x| round_half_up(x / n)).collect(),
    })
}

/// Ages of the most recent common ancestor of a taxon set across samples.
#[derive(Clone, Debug, PartialEq)]
pub struct MrcaSeries {
    pub ages: Vec<f64>,
    /// Whether the taxa form exactly a clade in each sample.
    pub is_clade: Vec<bool>,
}

impl MrcaSeries {
    /// Posterior probability that the taxa form a clade.
    pub fn clade_probability(&self) -> f64 {
        if self.is_clade.is_empty() {
            return f64::NAN;
        }
        self.is_clade.iter().filter(|&&b| b).count() as f64 / self.is_clade.len() as f64
    }
}

/// MRCA ages of the named taxa in each tree.
pub fn mrca_age_series(trees: &[Tree], taxa: &[&str]) -> Result<MrcaSeries> {
    let mut out = MrcaSeries {
        ages: Vec::with_capacity(trees.len()),
        is_clade: Vec::with_capacity(trees.len()),
    };
    for t in trees {
        let leaves: Vec<usize> = taxa
            .iter()
            .map(|name| {
                t.taxa()
                    .iter()
                    .position(|x| x == name)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown taxon {name}")))
            })
            .collect::<Result<_>>()?;
        let m = t.mrca(&leaves)?;
        out.ages.push(t.age(m));
        out.is_clade.push(
            t.leaves_below(m).len() == {
                let mut u = leaves.clone();
                u.sort_unstable();
                u.dedup();
                u.len()
            },
        );
    }
    Ok(out)
}

/// Recorded presences per trait (column sums) and per taxon (row sums).
/// Missing cells count as absent.
pub fn data_histograms(matrix: &TraitMatrix) -> (Vec<usize>, Vec<usize>) {
    let per_trait = (0..matrix.n_traits())
        .map(|k| {
            (0..matrix.n_taxa())
                .filter(|&i| matrix.get(i, k) == Cell::Present)
                .count()
        })
        .collect();
    let per_taxon = (0..matrix.n_taxa())
        .map(|i| {
            matrix
                .row(i)
                .iter()
                .filter(|&&c| c == Cell::Present)
                .count()
        })
        .collect();
    (per_trait, per_taxon)
}

/// Counts of each value `0..=max` in `values`.
pub fn histogram(values: &[usize]) -> Vec<usize> {
    let max = values.iter().copied().max().unwrap_or(0);
    let mut h = vec![0; max + 1];
    for &v in values {
        h[v] += 1;
    }
    h
}

/// Histograms of the data beside those of a matrix simulated under the
/// fitted model.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticComparison {
    pub data_per_trait: Vec<usize>,
    pub data_per_taxon: Vec<usize>,
    pub synthetic_per_trait: Vec<usize>,
    pub synthetic_per_taxon: Vec<usize>,
}

/// Parameters of one posterior sample used for model checking.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleParams {
    pub mu: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub xi: Vec<f64>,
    /// Drop singleton traits from the synthetic matrix.
    pub remove_rare: bool,
}

/// Simulate data on a sampled tree with sampled parameters and pair its
/// histograms with those of the data.
pub fn synthetic_comparison<R: Rng + ?Sized>(
    tree: &Tree,
    params: &SampleParams,
    data: &TraitMatrix,
    rng: &mut R,
) -> Result<SyntheticComparison> {
    let mut process = TraitProcess::new(params.lambda, params.mu);
    process.kappa = params.kappa;
    let sim = simulate_traits(tree, &process, rng)?;
    let mut observed = apply_observation_model(
        &sim,
        tree.taxa(),
        &Observation {
            missing: false,
            remove_rare: params.remove_rare,
        },
        rng,
    )?
    .matrix;
    if params.xi.iter().any(|&x| x < 1.0) {
        let columns: Vec<Vec<Cell>> = (0..observed.n_traits())
            .map(|k| {
                (0..observed.n_taxa())
                    .map(|i| {
                        let c = observed.get(i, k);
                        if rng.random::<f64>() >= params.xi[i] {
                            Cell::Missing
                        } else {
                            c
                        }
                    })
                    .collect()
            })
            .filter(|col: &Vec<Cell>| {
                let ones = col.iter().filter(|&&c| c == Cell::Present).count();
                ones > usize::from(params.remove_rare)
            })
            .collect();
        observed = TraitMatrix::from_columns(observed.taxa.clone(), &columns)?;
    }
    let (dt, dx) = data_histograms(data);
    let (st, sx) = data_histograms(&observed);
    Ok(SyntheticComparison {
        data_per_trait: dt,
        data_per_taxon: dx,
        synthetic_per_trait: st,
        synthetic_per_taxon: sx,
    })
}

/// Divergence-time estimate for taxa `i` and `j` from trait counts:
/// `-(1/(2μ)) ln(n_ij / sqrt(n_i n_j))`, where `n_i`, `n_j` count the
/// traits each holds and `n_ij` those they share. `None` when they share
/// none. Assumes every trait, singletons included, was recorded.
pub fn map_pairwise_time(matrix: &TraitMatrix, i: usize, j: usize, mu: f64) -> Option<f64> {
    let (mut ni, mut nj, mut nij) = (0usize, 0usize, 0usize);
    for k in 0..matrix.n_traits() {
        let a = matrix.get(i, k) == Cell::Present;
        let b = matrix.get(j, k) == Cell::Present;
        ni += a as usize;
        nj += b as usize;
        nij += (a && b) as usize;
    }
    if nij == 0 {
        return None;
    }
    let r = nij as f64 / ((ni as f64) * (nj as f64)).sqrt();
    Some((-r.ln() / (2.0 * mu)).max(0.0))
}

/// Pairwise estimates and, per pair, the estimate beside the age of the
/// pair's MRCA in `tree`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceOutputs {
    /// In data-file taxon order.
    pub matrix: Vec<Vec<Option<f64>>>,
    /// `(i, j, estimate, mrca age)` for `i < j`.
    pub pairs: Vec<(usize, usize, Option<f64>, f64)>,
}

pub fn distance_outputs(matrix: &TraitMatrix, tree: &Tree, mu: f64) -> Result<DistanceOutputs> {
    let leaf_of = leaf_index(matrix, tree)?;
    let n = matrix.n_taxa();
    let mut m = vec![vec![Some(0.0); n]; n];
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let t = map_pairwise_time(matrix, i, j, mu);
            m[i][j] = t;
            m[j][i] = t;
            let depth = tree.age(tree.mrca_pair(leaf_of[i], leaf_of[j]));
            pairs.push((i, j, t, depth));
        }
    }
    Ok(DistanceOutputs { matrix: m, pairs })
}

/// Leaf of `tree` for each matrix taxon.
fn leaf_index(matrix: &TraitMatrix, tree: &Tree) -> Result<Vec<usize>> {
    if matrix.n_taxa() != tree.n_leaves() {
        return Err(Error::InvalidArgument(format!(
            "matrix has {} taxa, tree has {} leaves",
            matrix.n_taxa(),
            tree.n_leaves()
        )));
    }
    matrix
        .taxa
        .iter()
        .map(|name| {
            tree.taxa()
                .iter()
                .position(|t| t == name)
                .ok_or_else(|| Error::InvalidArgument(format!("taxon {name} is not in the tree")))
        })
        .collect()
}

/// Leaves of `tree` at which trait `k` is recorded present.
fn present_leaves(matrix: &TraitMatrix, leaf_of: &[usize], k: usize) -> Vec<usize> {
    (0..matrix.n_taxa())
        .filter(|&i| matrix.get(i, k) == Cell::Present)
        .map(|i| leaf_of[i])
        .collect()
}

/// For each node, the number of traits recorded present below it and at
/// no leaf outside it. Leaves report their singleton traits; the root
/// reports every trait with a recorded presence.
pub fn active_trait_counts(tree: &Tree, matrix: &TraitMatrix) -> Result<Vec<usize>> {
    let leaf_of = leaf_index(matrix, tree)?;
    let mut counts = vec![0; tree.n_nodes()];
    for k in 0..matrix.n_traits() {
        let p = present_leaves(matrix, &leaf_of, k);
        if p.is_empty() {
            continue;
        }
        counts[tree.mrca(&p)?] += 1;
    }
    Ok(counts)
}

/// Where a trait can have been, edge by edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeStatus {
    /// On a path between a leaf holding the trait and the trait's MRCA.
    RequiredPresent,
    /// The MRCA's edge or above: the trait was born somewhere here.
    PossibleBirth,
    /// Elsewhere: the trait was absent or died.
    AbsentOrDied,
}

/// Status of the edge above each node for trait `k` (the root's entry
/// stands for the edge above the root). Leaves with missing cells do not
/// constrain the path.
pub fn trait_path(tree: &Tree, matrix: &TraitMatrix, k: usize) -> Result<Vec<EdgeStatus>> {
    if k >= matrix.n_traits() {
        return Err(Error::InvalidArgument(format!("no trait {k}")));
    }
    let leaf_of = leaf_index(matrix, tree)?;
    let p = present_leaves(matrix, &leaf_of, k);
    if p.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "trait {k} is not recorded present anywhere"
        )));
    }
    let m = tree.mrca(&p)?;
    let mut status = vec![EdgeStatus::AbsentOrDied; tree.n_nodes()];
    for &leaf in &p {
        let mut v = leaf;
        while v != m {
            status[v] = EdgeStatus::RequiredPresent;
            v = tree.parent(v).expect("m is an ancestor");
        }
    }
    let mut v = Some(m);
    while let Some(u) = v {
        status[u] = EdgeStatus::PossibleBirth;
        v = tree.parent(u);
    }
    Ok(status)
}

/// Sample autocorrelation of `xs` at lags `0..=max_lag`.
pub fn autocorrelation(xs: &[f64], max_lag: usize) -> Vec<f64> {
    let n = xs.len();
    if n < 2 {
        return vec![f64::NAN; max_lag + 1];
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (0..=max_lag)
        .map(|lag| {
            if lag >= n || var == 0.0 {
                return f64::NAN;
            }
            let c: f64 = (0..n - lag)
                .map(|t| (xs[t] - mean) * (xs[t + lag] - mean))
                .sum();
            c / var
        })
        .collect()
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Equal-tailed interval holding `mass` of the sample.
pub fn credible_interval(xs: &[f64], mass: f64) -> (f64, f64) {
    let tail = (1.0 - mass) / 2.0;
    (quantile(xs, tail), quantile(xs, 1.0 - tail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newick::parse_newick;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn tree(nw: &str) -> Tree {
        parse_newick(nw, Some(&names(&["A", "B", "C", "D"]))).unwrap()
    }

    #[test]
    fn three_sample_consensus() {
        let trees = vec![
            tree("((A:1,B:1):2,(C:2,D:2):1);"),
            tree("((A:2,B:2):1,(C:1,D:1):2);"),
            tree("(((A:1,C:1):1,B:2):1,D:3);"),
        ];
        let c = consensus(&trees, 0.5, 1).unwrap();
        let ab = LeafSet::from_indices(4, [0, 1]);
        let cd = LeafSet::from_indices(4, [2, 3]);
        let got_ab = c.tree.clades.iter().find(|k| k.leaves == ab).unwrap();
        assert!((got_ab.support - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(ConsensusTree::label(got_ab.support).as_deref(), Some("67%"));
        assert!((got_ab.mean_length - 1.5).abs() < 1e-12);
        assert!(c.tree.clades.iter().any(|k| k.leaves == cd));
        assert_eq!(c.tree.clades.len(), 3);
        assert_eq!(ConsensusTree::label(1.0), None);
        assert!(consensus(&trees, 0.4, 1).is_err());
        assert!(consensus(&[], 0.5, 1).is_err());
    }

    #[test]
    fn conflicting_samples_give_a_star() {
        let trees = vec![
            tree("((A:1,B:1):1,(C:1,D:1):1);"),
            tree("((A:1,C:1):1,(B:1,D:1):1);"),
            tree("((A:1,D:1):1,(B:1,C:1):1);"),
        ];
        let c = consensus(&trees, 0.5, 1).unwrap();
        assert_eq!(c.tree.clades.len(), 1);
        assert_eq!(c.to_newick().matches('(').count(), 1);
    }

    #[test]
    fn mrca_series() {
        let trees = vec![
            tree("((A:1,B:1):2,(C:2,D:2):1);"),
            tree("(((A:1,C:1):1,B:2):1,D:3);"),
        ];
        let s = mrca_age_series(&trees, &["A", "B"]).unwrap();
        assert_eq!(s.ages, vec![1.0, 2.0]);
        assert_eq!(s.is_clade, vec![true, false]);
        assert_eq!(s.clade_probability(), 0.5);
        assert_eq!(
            mrca_age_series(&trees, &["A"]).unwrap().ages,
            vec![0.0, 0.0]
        );
        assert_eq!(
            mrca_age_series(&trees, &["A", "B", "C", "D"]).unwrap().ages,
            vec![3.0, 3.0]
        );
        assert!(mrca_age_series(&trees, &["Z"]).is_err());
    }

    fn matrix(rows: &[&str]) -> TraitMatrix {
        let taxa: Vec<String> = (0..rows.len())
            .map(|i| ["A", "B", "C", "D"][i].to_string())
            .collect();
        let cells = rows
            .iter()
            .map(|r| {
                r.chars()
                    .map(|c| match c {
                        '1' => Cell::Present,
                        '0' => Cell::Absent,
                        _ => Cell::Missing,
                    })
                    .collect()
            })
            .collect();
        TraitMatrix::new(taxa, cells, None).unwrap()
    }

    #[test]
    fn histograms() {
        assert_eq!(
            data_histograms(&matrix(&["100", "010", "001"])),
            (vec![1, 1, 1], vec![1, 1, 1])
        );
        assert_eq!(
            data_histograms(&matrix(&["11111", "11111"])),
            (vec![2; 5], vec![5, 5])
        );
        assert_eq!(
            data_histograms(&matrix(&["1?", "?1"])),
            (vec![1, 1], vec![1, 1])
        );
        assert_eq!(histogram(&[0, 2, 2]), vec![1, 0, 2]);
    }

    #[test]
    fn pairwise_time() {
        let m = matrix(&["1111", "1111"]);
        assert_eq!(map_pairwise_time(&m, 0, 1, 0.001), Some(0.0));
        let m = matrix(&["1110", "1011"]);
        let t1 = map_pairwise_time(&m, 0, 1, 0.001).unwrap();
        let t2 = map_pairwise_time(&m, 0, 1, 0.0005).unwrap();
        assert!((t2 - 2.0 * t1).abs() < 1e-9);
        assert_eq!(map_pairwise_time(&m, 1, 0, 0.001).unwrap(), t1);
        assert_eq!(map_pairwise_time(&matrix(&["10", "01"]), 0, 1, 0.001), None);
    }

    #[test]
    fn active_traits_and_paths() {
        let taxa = names(&["A", "B", "C"]);
        let t = parse_newick("((A:1,B:1):1,C:2);", Some(&taxa)).unwrap();
        let mut rows = vec![String::new(); 3];
        for _ in 0..20 {
            rows[0].push('1');
            rows[1].push('1');
            rows[2].push('0');
        }
        rows[0].push('1');
        rows[1].push('1');
        rows[2].push('1');
        rows[0].push('?');
        rows[1].push('?');
        rows[2].push('?');
        let m = matrix(&rows.iter().map(String::as_str).collect::<Vec<_>>());
        let c = active_trait_counts(&t, &m).unwrap();
        let ab = t.mrca(&[0, 1]).unwrap();
        assert_eq!(c[ab], 20);
        assert_eq!(c[t.root()], 1);

        let path = trait_path(&t, &m, 20).unwrap();
        assert_eq!(path[0], EdgeStatus::RequiredPresent);
        assert_eq!(path[ab], EdgeStatus::RequiredPresent);
        assert_eq!(path[t.root()], EdgeStatus::PossibleBirth);
        let single = matrix(&["100", "000", "000"]);
        let p = trait_path(&t, &single, 0).unwrap();
        assert_eq!(p[0], EdgeStatus::PossibleBirth);
        assert_eq!(p[1], EdgeStatus::AbsentOrDied);
        assert_eq!(p[ab], EdgeStatus::PossibleBirth);
        assert!(trait_path(&t, &m, 21).is_err());
    }

    #[test]
    fn autocorrelation_values() {
        let xs: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let a = autocorrelation(&xs, 2);
        assert!((a[0] - 1.0).abs() < 1e-12);
        assert!(a[1] < -0.9);
        assert!(a[2] > 0.9);
        assert_eq!(quantile(&[1.0, 2.0, 3.0], 0.5), 2.0);
    }
}
