use dollo_core::constraints::ConstraintSet;
use dollo_core::mcmc::{step, Chain, MoveContext, Schedule, MOVE_IDS};
use dollo_core::newick::parse_newick;
use dollo_core::priors::TreePrior;
use dollo_core::rng;
use dollo_core::state::{ChainState, Model};
use dollo_core::tree::Tree;
use std::sync::Arc;

fn names(n: usize) -> Arc<[String]> {
    (0..n).map(|i| format!("t{i}")).collect()
}

fn weights(on: &[u8]) -> Vec<f64> {
    MOVE_IDS
        .iter()
        .map(|id| if on.contains(id) { 1.0 } else { 0.0 })
        .collect()
}

fn start_tree(n: usize) -> Tree {
    let text = match n {
        4 => "(((t0:1,t1:1):1,t2:2):2,t3:4);",
        _ => unreachable!(),
    };
    let taxa = names(n);
    parse_newick(text, Some(&taxa)).unwrap()
}

fn is_balanced(t: &Tree) -> bool {
    let [a, b] = t.children(t.root()).unwrap();
    !t.is_leaf(a) && !t.is_leaf(b)
}

/// Fraction of balanced trees and root ages, sampled every `thin` steps.
fn sample_prior(model: &Model, on: &[u8], steps: usize, thin: usize, seed: u64) -> (f64, Vec<f64>) {
    let w = weights(on);
    let sched = Schedule::new(model, Some(&w), false).unwrap();
    let ctx = MoveContext {
        model,
        schedule: &sched,
        delta: 2f64.ln(),
    };
    let st = ChainState::new(start_tree(4), 1.0, 0.5, vec![1.0; 4]);
    let mut chain = Chain::new(st, model).unwrap();
    let mut r = rng::from_seed(seed);
    let mut balanced = 0usize;
    let mut ages = Vec::new();
    for s in 1..=steps {
        step(&mut chain, &ctx, &mut r);
        balanced += is_balanced(&chain.state.tree) as usize;
        if s % thin == 0 {
            ages.push(chain.state.tree.age(chain.state.tree.root()));
        }
    }
    (balanced as f64 / steps as f64, ages)
}

fn ks_uniform(xs: &[f64], lo: f64, hi: f64) -> f64 {
    let mut v: Vec<f64> = xs.iter().map(|x| (x - lo) / (hi - lo)).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &u)| ((i + 1) as f64 / n - u).max(u - i as f64 / n))
        .fold(0.0, f64::max)
}

fn prior_model(weighted: bool) -> Model {
    let mut m = Model::prior_only(names(4), ConstraintSet::unconstrained(4, Some(10.0)));
    m.tree_prior = TreePrior::UniformRoot {
        topology_weighted: weighted,
    };
    m
}

// Under the root-uniform prior a topology has mass proportional to its
// number of rankings: 2 for each of the 3 balanced trees and 1 for each of
// the 12 caterpillars. Weighting by the topology term makes it uniform.
#[test]
fn topology_moves_target_the_tree_prior() {
    for (i, on) in [[1u8, 2], [1, 3], [1, 4], [1, 5]].iter().enumerate() {
        for (weighted, expect) in [(false, 1.0 / 3.0), (true, 1.0 / 5.0)] {
            let model = prior_model(weighted);
            let (frac, ages) = sample_prior(&model, on, 300_000, 100, 10 + i as u64);
            assert!(
                (frac - expect).abs() < 0.02,
                "moves {on:?} weighted={weighted}: balanced fraction {frac}, expected {expect}"
            );
            let d = ks_uniform(&ages, 0.0, 10.0);
            assert!(
                d < 1.63 / (ages.len() as f64).sqrt() * 1.5,
                "moves {on:?}: KS {d}"
            );
        }
    }
}

#[test]
fn scaling_moves_keep_root_age_uniform() {
    let model = prior_model(false);
    for on in [[1u8, 6], [1, 7]] {
        let (_, ages) = sample_prior(&model, &on, 200_000, 100, 3);
        let d = ks_uniform(&ages, 0.0, 10.0);
        assert!(
            d < 1.63 / (ages.len() as f64).sqrt() * 1.5,
            "moves {on:?}: KS {d}"
        );
    }
}

fn catastrophe_chain(on: &[u8], seed: u64, steps: usize) -> Vec<usize> {
    let taxa = names(4);
    let tree = parse_newick(
        "(((t0:1000,t1:1000):1000,t2:2000):2000,t3:4000);",
        Some(&taxa),
    )
    .unwrap();
    let mut model = Model::prior_only(taxa, ConstraintSet::unconstrained(4, Some(10_000.0)));
    model.catastrophes = true;
    let w = weights(on);
    let sched = Schedule::new(&model, Some(&w), false).unwrap();
    let ctx = MoveContext {
        model: &model,
        schedule: &sched,
        delta: 2f64.ln(),
    };
    let mut chain = Chain::new(ChainState::new(tree, 1.0, 0.5, vec![1.0; 4]), &model).unwrap();
    let mut r = rng::from_seed(seed);
    let mut out = Vec::new();
    for s in 1..=steps {
        step(&mut chain, &ctx, &mut r);
        if s % 10 == 0 {
            let t = &chain.state.tree;
            out.push(t.total_catastrophes());
            out.push(t.catastrophe_count(0));
        }
    }
    out
}

// Total length 11000 with a = 1.5, b = 5000: K is negative binomial with
// P(K = 0) = (5000/16000)^1.5 and E K = 1.5 * 11000 / 5000 = 3.3; leaf 0's
// edge holds 1/11 of the length.
#[test]
fn catastrophe_moves_target_count_prior() {
    let p0 = (5000.0f64 / 16000.0).powf(1.5);
    for (i, on) in [vec![13u8, 14], vec![15], vec![13, 14, 18], vec![15, 17]]
        .iter()
        .enumerate()
    {
        let xs = catastrophe_chain(on, 20 + i as u64, 400_000);
        let n = xs.len() / 2;
        let totals: Vec<usize> = xs.iter().step_by(2).copied().collect();
        let leaf0: Vec<usize> = xs.iter().skip(1).step_by(2).copied().collect();
        let zero = totals.iter().filter(|&&k| k == 0).count() as f64 / n as f64;
        let mean = totals.iter().sum::<usize>() as f64 / n as f64;
        let mean0 = leaf0.iter().sum::<usize>() as f64 / n as f64;
        assert!(
            (zero - p0).abs() < 0.02,
            "moves {on:?}: P(K=0) {zero} vs {p0}"
        );
        assert!((mean - 3.3).abs() < 0.25, "moves {on:?}: E K {mean}");
        assert!((mean0 - 0.3).abs() < 0.05, "moves {on:?}: E k_0 {mean0}");
    }
}

#[test]
fn scalar_moves_target_uniform_priors() {
    let taxa = names(3);
    let tree = parse_newick("((t0:1,t1:1):1,t2:2);", Some(&taxa)).unwrap();
    let mut model = Model::prior_only(taxa, ConstraintSet::unconstrained(3, Some(10.0)));
    model.catastrophes = true;
    model.vary_kappa = true;
    model.missing_taxa = vec![0, 2];
    for (on, pick) in [(16u8, 0usize), (19, 1), (20, 2)] {
        let w = weights(&[1, on, if on == 20 { 19 } else { on }]);
        let sched = Schedule::new(&model, Some(&w), false).unwrap();
        let ctx = MoveContext {
            model: &model,
            schedule: &sched,
            delta: 2f64.ln(),
        };
        let st = ChainState::new(tree.clone(), 1.0, 0.5, vec![0.5, 1.0, 0.5]);
        let mut chain = Chain::new(st, &model).unwrap();
        let mut r = rng::from_seed(on as u64);
        let mut xs = Vec::new();
        for s in 1..=200_000 {
            step(&mut chain, &ctx, &mut r);
            if s % 50 == 0 {
                xs.push(match pick {
                    0 => chain.state.kappa,
                    1 => chain.state.xi[0],
                    _ => chain.state.xi[2],
                });
            }
        }
        assert_eq!(chain.state.xi[1], 1.0);
        let (lo, hi) = if pick == 0 { (0.25, 1.0) } else { (0.0, 1.0) };
        let d = ks_uniform(&xs, lo, hi);
        assert!(
            d < 1.63 / (xs.len() as f64).sqrt() * 1.5,
            "move {on}: KS {d}"
        );
    }
}

// Two leaves, leaf 0 dated in [0, 1], T = 10: the prior is uniform on
// {t_0 in [0, 1], t_0 < t_r < 10}, so E t_0 = (T/2 - 1/3) / (T - 1/2).
#[test]
fn offset_leaf_moves_target_the_prior() {
    use dollo_core::constraints::Clade;
    use dollo_core::leafset::LeafSet;
    let taxa = names(2);
    let c = Clade {
        name: "old".into(),
        taxa: LeafSet::singleton(2, 0),
        rootmin: Some(0.0),
        rootmax: Some(1.0),
        originatemin: None,
        originatemax: None,
    };
    let cs = ConstraintSet::new(2, vec![c], Some(10.0)).unwrap();
    let model = Model::prior_only(taxa.clone(), cs);
    let expect = (5.0 - 1.0 / 3.0) / 9.5;
    for on in [vec![1u8, 11], vec![1, 11, 12]] {
        let w = weights(&on);
        let sched = Schedule::new(&model, Some(&w), false).unwrap();
        let ctx = MoveContext {
            model: &model,
            schedule: &sched,
            delta: 2f64.ln(),
        };
        let tree = parse_newick("(t0:2,t1:2.5);", Some(&taxa)).unwrap();
        assert_eq!(tree.age(0), 0.5);
        let mut chain = Chain::new(ChainState::new(tree, 1.0, 0.5, vec![1.0; 2]), &model).unwrap();
        let mut r = rng::from_seed(7);
        let (mut sum, mut n) = (0.0, 0usize);
        for s in 1..=400_000 {
            step(&mut chain, &ctx, &mut r);
            if s % 10 == 0 {
                sum += chain.state.tree.age(0);
                n += 1;
            }
        }
        let mean = sum / n as f64;
        assert!(
            (mean - expect).abs() < 0.01,
            "moves {on:?}: mean leaf age {mean} vs {expect}"
        );
    }
}
