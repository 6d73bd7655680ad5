//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use dollo_core::analysis::{autocorrelation, consensus, credible_interval, ConsensusTree};
use dollo_core::config::RunConfig;
use dollo_core::constraints::ConstraintSet;
use dollo_core::coupling::{coupled_step, met, run_coupled, tv_bound, CouplingSettings};
use dollo_core::leafset::LeafSet;
use dollo_core::likelihood::{
    likelihood_terms, likelihood_terms_with_lengths, pattern_intensity, registered_normalizer,
    tabulate_patterns, LikelihoodParams, TabulateOptions,
};
use dollo_core::mcmc::init::constrained_initial_tree;
use dollo_core::mcmc::{run, step, Chain, MemorySink, MoveContext, RunLength, Schedule};
use dollo_core::newick::parse_newick;
use dollo_core::nexus::{parse_nexus, write_nexus, Cell, ParsedNexus, TraitMatrix};
use dollo_core::priors::{log_catastrophe_count_prior, RhoMode, RHO_PRIOR};
use dollo_core::rng::{self, ChainRng};
use dollo_core::runner::{build_model, initial_state};
use dollo_core::simulate::{
    draw_xi, fit_config_for, simulate_traits, synthesize, write_synthetic, Borrowing,
    BorrowingMode, SynthCatastrophes, SynthConfig, SynthData, SynthTree, TraitProcess,
};
use dollo_core::state::{ChainState, Model};
use dollo_core::tree::Tree;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn names(n: usize) -> Arc<[String]> {
    (0..n).map(|i| format!("t{i}")).collect()
}

fn kolmogorov_p(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let p: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * if k as usize % 2 == 1 { 1.0 } else { -1.0 }
                * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    p.clamp(0.0, 1.0)
}

fn ks_one(xs: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let s = n.sqrt();
    (d, kolmogorov_p((s + 0.12 + 0.11 / s) * d))
}

fn ks_two(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let s = (na * nb / (na + nb)).sqrt();
    (d, kolmogorov_p((s + 0.12 + 0.11 / s) * d))
}

/// Effective sample size from the initial positive autocorrelations.
fn ess(xs: &[f64]) -> f64 {
    let n = xs.len();
    let rho = autocorrelation(xs, (n / 10).clamp(1, 2000));
    let mut tau = 1.0;
    for r in rho.iter().skip(1) {
        if r.is_nan() || *r <= 0.05 {
            break;
        }
        tau += 2.0 * r;
    }
    n as f64 / tau
}

/// Every k-th value, with k chosen so that the values are roughly
/// independent.
fn thin_independent(xs: &[f64]) -> Vec<f64> {
    let k = (xs.len() as f64 / ess(xs)).ceil().max(1.0) as usize;
    xs.iter().copied().step_by(k).collect()
}

fn context<'a>(model: &'a Model, schedule: &'a Schedule) -> MoveContext<'a> {
    MoveContext {
        model,
        schedule,
        delta: 2f64.ln(),
    }
}

struct Problem {
    data: ParsedNexus,
    config: RunConfig,
    model: Model,
}

fn problem(synth: &SynthData) -> Problem {
    let data = ParsedNexus {
        matrix: synth.matrix.clone(),
        clades: synth.clades.clone(),
        embedded_tree: None,
        synthesize_params: None,
    };
    let config = fit_config_for(synth, Path::new("synthetic.nex"), 1000, 100);
    let model = build_model(&config, &data).unwrap();
    Problem {
        data,
        config,
        model,
    }
}

fn start(p: &Problem, r: &mut ChainRng) -> Chain {
    Chain::new(
        initial_state(&p.config, &p.model, &p.data, r).unwrap(),
        &p.model,
    )
    .unwrap()
}

fn four_leaf_problem(catastrophes: bool, missing: bool) -> Problem {
    let mut c = SynthConfig::new(
        SynthTree::Random {
            n_leaves: 4,
            theta: 1.0 / 1000.0,
        },
        30.0,
        0.3,
    );
    if catastrophes {
        c.catastrophes = Some(SynthCatastrophes {
            kappa: 0.5,
            rho: Some(0.0005),
        });
    }
    c.missing = missing;
    problem(&synthesize(&c, &mut rng::from_seed(4)).unwrap())
}

fn two_leaf_closed_form() -> Outcome {
    let taxa = names(2);
    let tree = parse_newick("(t0:1,t1:1);", Some(&taxa)).unwrap();
    let xi = [1.0, 1.0];
    let p = LikelihoodParams {
        mu: 1.0,
        kappa: 0.5,
        xi: &xi,
        registration: 1,
    };
    let e = (-2.0f64).exp();
    let cases = [
        ([Cell::Present, Cell::Present], e),
        ([Cell::Present, Cell::Absent], 1.0 - e),
        ([Cell::Absent, Cell::Present], 1.0 - e),
    ];
    let err = cases
        .iter()
        .map(|(pat, want)| (pattern_intensity(&tree, &p, pat).unwrap() - want).abs())
        .fold(0.0, f64::max);
    let z_err = (registered_normalizer(&tree, &p).unwrap() - (2.0 - e)).abs();
    outcome(
        err < 1e-12 && z_err < 1e-12,
        format!("max abs error {:.1e}, normalizer error {z_err:.1e}", err),
    )
}

fn encode(p: &[Cell]) -> usize {
    p.iter().rev().fold(0, |acc, c| {
        3 * acc
            + match c {
                Cell::Absent => 0,
                Cell::Present => 1,
                Cell::Missing => 2,
            }
    })
}

fn decode(mut code: usize, l: usize) -> Vec<Cell> {
    (0..l)
        .map(|_| {
            let c = [Cell::Absent, Cell::Present, Cell::Missing][code % 3];
            code /= 3;
            c
        })
        .collect()
}

fn simulated_pattern_frequencies() -> Outcome {
    let configs = [
        (3, 0.5, 1.0, 1u8),
        (3, 1.0, 0.7, 2),
        (4, 1.0, 1.0, 2),
        (4, 0.5, 0.7, 1),
        (4, 1.0, 0.7, 2),
    ];
    let mut r = rng::from_seed(2);
    let mut worst = 0.0f64;
    let mut sums = 0.0f64;
    let mut n_checked = 0;
    for &(l, mu, x, d) in &configs {
        let tree = Tree::random_exponential(names(l), 1.0, None, &mut r).unwrap();
        let xi = vec![x; l];
        let p = LikelihoodParams {
            mu,
            kappa: 0.5,
            xi: &xi,
            registration: d,
        };
        let z = registered_normalizer(&tree, &p).unwrap();
        let lambda = (1e6 / z).min(2e6 / (1.0 / mu + tree.tree_length()));
        let mut counts = vec![0usize; 3usize.pow(l as u32)];
        let mut n = 0usize;
        while n < 1_000_000 {
            let sim = simulate_traits(&tree, &TraitProcess::new(lambda, mu), &mut r).unwrap();
            for col in &sim.presence {
                let pat: Vec<Cell> = col
                    .iter()
                    .map(|&present| {
                        if x < 1.0 && r.random::<f64>() >= x {
                            Cell::Missing
                        } else if present {
                            Cell::Present
                        } else {
                            Cell::Absent
                        }
                    })
                    .collect();
                if pat.iter().filter(|&&c| c == Cell::Present).count() >= d as usize {
                    counts[encode(&pat)] += 1;
                    n += 1;
                }
            }
        }
        let n = n as f64;
        let mut total_q = 0.0;
        for (code, &c) in counts.iter().enumerate() {
            let pat = decode(code, l);
            if pat.iter().filter(|&&c| c == Cell::Present).count() < d as usize {
                continue;
            }
            let q = pattern_intensity(&tree, &p, &pat).unwrap() / z;
            total_q += q;
            n_checked += 1;
            let dev = if q <= 0.0 {
                if c == 0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (c as f64 - n * q).abs() / (n * q * (1.0 - q)).sqrt()
            };
            worst = worst.max(dev);
        }
        sums = sums.max((total_q - 1.0).abs());
    }
    outcome(
        worst <= 3.0,
        format!("{n_checked} patterns over 5 trees, largest deviation {worst:.2} sd, |sum q - 1| = {sums:.1e}"),
    )
}

fn random_cell<R: Rng>(r: &mut R) -> Cell {
    match r.random_range(0..10) {
        0 => Cell::Missing,
        1..=4 => Cell::Present,
        _ => Cell::Absent,
    }
}

fn catastrophe_identity() -> Outcome {
    let mut r = rng::from_seed(3);
    let mut worst = 0.0f64;
    let mut total_cats = 0;
    for _ in 0..100 {
        let l = r.random_range(3..=8);
        let mut tree = Tree::random_exponential(names(l), 1.0, None, &mut r).unwrap();
        for v in tree.edges().collect::<Vec<_>>() {
            let k = r.random_range(0..3);
            let pos: Vec<f64> = (0..k).map(|_| r.random()).collect();
            tree.catastrophes_mut(v).extend(pos);
        }
        total_cats += tree.total_catastrophes();
        let rows: Vec<Vec<Cell>> = (0..l)
            .map(|_| (0..25).map(|_| random_cell(&mut r)).collect())
            .collect();
        let matrix = TraitMatrix::new(names(l).to_vec(), rows, None).unwrap();
        let d = r.random_range(1..=2);
        let table = tabulate_patterns(
            &matrix,
            &TabulateOptions {
                registration: d,
                model_missing: true,
                ..Default::default()
            },
        )
        .unwrap();
        let mu = r.random_range(0.2..2.0);
        let kappa = r.random_range(0.25..0.99);
        let xi: Vec<f64> = (0..l).map(|_| r.random_range(0.5..1.0)).collect();
        let p = LikelihoodParams {
            mu,
            kappa,
            xi: &xi,
            registration: d,
        };
        let with_cats = likelihood_terms(&table, &tree, &p).unwrap();
        let advance = -(1.0 - kappa).ln() / mu;
        let lengths: Vec<f64> = (0..tree.n_nodes())
            .map(|v| {
                if v == tree.root() {
                    f64::INFINITY
                } else {
                    tree.branch_length(v) + tree.catastrophe_count(v) as f64 * advance
                }
            })
            .collect();
        let mut plain = tree.clone();
        plain.clear_catastrophes();
        let extended = likelihood_terms_with_lengths(&table, &plain, &lengths, &p).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
        worst = worst
            .max(rel(with_cats.integrated(), extended.integrated()))
            .max(rel(with_cats.normalizer, extended.normalizer));
    }
    outcome(
        worst <= 1e-12,
        format!(
            "100 configurations, {total_cats} catastrophes, max relative difference {worst:.1e}"
        ),
    )
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn rho_marginal() -> Outcome {
    let (a, b) = RHO_PRIOR;
    let mut r = rng::from_seed(4);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = r.random_range(2..15);
        let counts: Vec<usize> = (0..m).map(|_| r.random_range(0..5)).collect();
        let lengths: Vec<f64> = (0..m).map(|_| r.random_range(50.0..5000.0)).collect();
        let closed = log_catastrophe_count_prior(&counts, &lengths, RhoMode::Marginal);
        let total: f64 = lengths.iter().sum::<f64>() + b;
        let shape = a + counts.iter().sum::<usize>() as f64;
        let log_density = |rho: f64| -> f64 {
            let lik: f64 = counts
                .iter()
                .zip(&lengths)
                .map(|(&k, &len)| {
                    k as f64 * (rho * len).ln() - rho * len - ln_gamma(k as f64 + 1.0)
                })
                .sum();
            lik + a * b.ln() - ln_gamma(a) + (a - 1.0) * rho.ln() - b * rho
        };
        let integrand = |v: f64| {
            if v <= 0.0 {
                return 0.0;
            }
            let rho = v * v / total;
            (log_density(rho) + (2.0 * v / total).ln() - closed).exp()
        };
        let upper = (shape + 40.0 * shape.sqrt() + 100.0).sqrt();
        let ratio = simpson(integrand, 0.0, upper, 20_000);
        worst = worst.max((ratio - 1.0).abs());
    }
    outcome(
        worst <= 1e-6,
        format!("20 instances, max relative error {worst:.1e}"),
    )
}

fn prior_root_ages(l: usize, steps: usize, seed: u64) -> Vec<f64> {
    let taxa = names(l);
    let cs = ConstraintSet::unconstrained(l, Some(10.0));
    let model = Model::prior_only(taxa.clone(), cs.clone());
    let schedule = Schedule::new(&model, None, false).unwrap();
    let ctx = context(&model, &schedule);
    let mut r = rng::from_seed(seed);
    let tree = constrained_initial_tree(taxa, 0.5, &cs, 1000, &mut r).unwrap();
    let mut chain = Chain::new(ChainState::new(tree, 1.0, 0.5, vec![1.0; l]), &model).unwrap();
    let mut ages = Vec::with_capacity(steps / 10);
    for s in 1..=steps {
        step(&mut chain, &ctx, &mut r);
        if s % 10 == 0 {
            ages.push(chain.state.tree.age(chain.state.tree.root()));
        }
    }
    ages
}

fn prior_targeting() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (l, steps) in [(6, 1_000_000), (2, 200_000)] {
        let ages = prior_root_ages(l, steps, 5 + l as u64);
        let n_eff = ess(&ages);
        let thinned = thin_independent(&ages);
        let (d, p) = ks_one(&thinned, |x| (x / 10.0).clamp(0.0, 1.0));
        ok &= p > 0.01 && n_eff >= 1000.0;
        parts.push(format!("L={l}: ESS {n_eff:.0}, KS D={d:.4} p={p:.3}"));
    }
    outcome(ok, parts.join("; "))
}

fn chain_root_ages(p: &Problem, schedule: &Schedule, steps: usize, seed: u64) -> Vec<f64> {
    let ctx = context(&p.model, schedule);
    let mut r = rng::from_seed(seed);
    let mut chain = start(p, &mut r);
    let mut ages = Vec::with_capacity(steps / 100);
    for s in 1..=steps {
        step(&mut chain, &ctx, &mut r);
        if s % 100 == 0 {
            ages.push(chain.state.tree.age(chain.state.tree.root()));
        }
    }
    ages
}

fn chi_square_homogeneity(a: &[f64], b: &[f64], bins: usize) -> (f64, f64) {
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = (1..bins).map(|k| pooled[k * pooled.len() / bins]).collect();
    let bin = |x: f64| cuts.iter().filter(|&&c| x >= c).count();
    let mut table = vec![[0.0f64; 2]; bins];
    for &x in a {
        table[bin(x)][0] += 1.0;
    }
    for &x in b {
        table[bin(x)][1] += 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let mut stat = 0.0;
    for row in &table {
        let total = row[0] + row[1];
        for (obs, col) in row.iter().zip([na, nb]) {
            let e = total * col / n;
            if e > 0.0 {
                stat += (obs - e).powi(2) / e;
            }
        }
    }
    let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
    (stat, p)
}

fn stationarity() -> Outcome {
    let p = four_leaf_problem(false, false);
    let schedule = Schedule::new(&p.model, None, false).unwrap();
    let a = chain_root_ages(&p, &schedule, 1_000_000, 61);
    let b = chain_root_ages(&p, &schedule, 1_000_000, 62);
    let (ta, tb) = (thin_independent(&a), thin_independent(&b));
    let (stat, pv) = chi_square_homogeneity(&ta, &tb, 10);
    outcome(
        pv > 0.01,
        format!(
            "{} and {} thinned samples, chi2 {stat:.2} on 9 df, p={pv:.3}",
            ta.len(),
            tb.len()
        ),
    )
}

fn coupling_checks() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;

    let full = four_leaf_problem(true, true);
    let schedule = Schedule::new(&full.model, None, true).unwrap();
    let ctx = context(&full.model, &schedule);
    let mut r = rng::from_seed(71);
    let mut x = start(&full, &mut r);
    let mut y = x.clone();
    let mut broke = None;
    for s in 1..=100_000 {
        coupled_step(&mut x, &mut y, &ctx, &mut r);
        if !met(&x, &y) {
            broke = Some(s);
            break;
        }
    }
    let accepted: u64 = dollo_core::mcmc::MOVE_IDS
        .iter()
        .map(|&id| x.stats.accepted(id))
        .sum();
    ok &= broke.is_none() && accepted > 0;
    parts.push(match broke {
        None => format!("faithful over 1e5 steps ({accepted} accepted)"),
        Some(s) => format!("chains separated at step {s}"),
    });

    let p = four_leaf_problem(false, false);
    let schedule = Schedule::new(&p.model, None, true).unwrap();
    let ctx = context(&p.model, &schedule);
    let len = RunLength::new(1_000_000, 100).unwrap();
    let mut r = rng::from_seed(72);
    let mut x = start(&p, &mut r);
    let mut y = start(&p, &mut r);
    let settings = CouplingSettings::new(len, 1000, 1_000_000).unwrap();
    let (mut xs, mut ys) = (MemorySink::default(), MemorySink::default());
    run_coupled(
        &mut x,
        &mut y,
        &ctx,
        &settings,
        &mut r,
        &mut xs,
        &mut ys,
        &mut |_| {},
    )
    .unwrap();
    let mut single = start(&p, &mut r);
    let mut ss = MemorySink::default();
    run(&mut single, &ctx, len, &mut r, &mut ss, &mut |_| {}).unwrap();
    let mu_x: Vec<f64> = xs.records.iter().map(|t| t.mu).collect();
    let mu_s: Vec<f64> = ss.records.iter().map(|t| t.mu).collect();
    let (tx, ts) = (thin_independent(&mu_x), thin_independent(&mu_s));
    let (d, pv) = ks_two(&tx, &ts);
    ok &= pv > 0.01;
    parts.push(format!(
        "X-chain mu vs single chain KS D={d:.3} p={pv:.3} ({} vs {} thinned samples)",
        tx.len(),
        ts.len()
    ));

    let lag = 1000;
    let mut taus = Vec::new();
    let mut met_count = 0;
    for rep in 0..20 {
        let mut r = rng::from_seed(800 + rep);
        let mut x = start(&p, &mut r);
        let mut y = start(&p, &mut r);
        let settings =
            CouplingSettings::new(RunLength::new(1000, 100).unwrap(), lag, 100_000).unwrap();
        let (mut xs, mut ys) = (MemorySink::default(), MemorySink::default());
        let tau = run_coupled(
            &mut x,
            &mut y,
            &ctx,
            &settings,
            &mut r,
            &mut xs,
            &mut ys,
            &mut |_| {},
        )
        .unwrap();
        if let Some(t) = tau {
            met_count += 1;
            taus.push(t);
        }
    }
    ok &= met_count >= 18;
    let max_tau = taus.iter().max().copied().unwrap_or(0);
    parts.push(format!(
        "{met_count}/20 met within 1e5 (largest tau {max_tau})"
    ));

    let zero = tv_bound(&[200, 700, 1000], lag, 0).unwrap();
    ok &= zero == 0.0;
    parts.push(format!("tv_bound with all tau <= l: {zero}"));
    outcome(ok, parts.join("; "))
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn simulator_moments() -> Outcome {
    let taxa = names(5);
    let tree = parse_newick(
        "(((t0:600,t1:600):900,t2:1500):1500,(t3:1000,t4:1000):2000);",
        Some(&taxa),
    )
    .unwrap();
    let k = 20.0;
    let mu = -(0.8f64).ln() / 1000.0;
    let mut r = rng::from_seed(8);
    let mut parts = Vec::new();
    let mut ok = true;

    let means: Vec<f64> = (0..1000)
        .map(|_| {
            let s = simulate_traits(&tree, &TraitProcess::new(k * mu, mu), &mut r).unwrap();
            s.leaf_counts(5).iter().sum::<usize>() as f64 / 5.0
        })
        .collect();
    let (m, se) = mean_and_se(&means);
    ok &= (m - k).abs() <= 3.0 * se;
    parts.push(format!("traits per leaf {m:.3} (K={k}, se {se:.3})"));

    let xs: Vec<f64> = (0..100_000).map(|_| draw_xi(&mut r)).collect();
    let (m, se) = mean_and_se(&xs);
    ok &= (m - 0.75).abs() <= 3.0 * se;
    parts.push(format!("xi mean {m:.4} (se {se:.4})"));

    let shared = |s: &dollo_core::simulate::Simulation| {
        s.presence.iter().filter(|c| c[0] && c[3]).count() as f64
    };
    let plain: Vec<f64> = (0..2000)
        .map(|_| shared(&simulate_traits(&tree, &TraitProcess::new(k * mu, mu), &mut r).unwrap()))
        .collect();
    let mut local = TraitProcess::new(k * mu, mu);
    local.borrowing = Some(Borrowing {
        rate: 0.5,
        mode: BorrowingMode::Local { distance: 0.0 },
    });
    let zero_distance: Vec<f64> = (0..2000)
        .map(|_| shared(&simulate_traits(&tree, &local, &mut r).unwrap()))
        .collect();
    let (d, pv) = ks_two(&plain, &zero_distance);
    ok &= pv > 0.01;
    parts.push(format!("local borrowing d=0 vs none KS D={d:.3} p={pv:.3}"));
    outcome(ok, parts.join("; "))
}

const EXAMPLE: &str = "#NEXUS
BEGIN DATA;
DIMENSIONS NTAX=9 NCHAR=30;
FORMAT MISSING=? GAP=-  INTERLEAVE ;
MATRIX
taxon_1  00?1111010110101000101001?0000
taxon_2  101111010?11001111001011011000
taxon_3  01101101??1110111?001010011000
taxon_4  010111100111011100110000100100
taxon_5  110111101111011??0110100100100
taxon_6  111111010111?01111001011011011
taxon_7  1111???101101011110??011011011
taxon_8  111111000111101110001011011011
taxon_9  11111101?111101111001011?11011
;
END;
BEGIN CLADES;
CLADE  NAME = Clade_1
ROOTMIN = 346
ROOTMAX = 422
TAXA = taxon_4, taxon_5;
CLADE  NAME = Clade_2
ORIGINATEMIN = 346
TAXA = taxon_1, taxon_8, taxon_9;
END;
";

fn parser_round_trip() -> Outcome {
    let p = parse_nexus(EXAMPLE).unwrap();
    let c = &p.clades[0];
    let example_ok = p.matrix.n_taxa() == 9
        && p.matrix.n_traits() == 30
        && p.clades.len() == 2
        && c.name == "Clade_1"
        && c.rootmin == Some(346.0)
        && c.rootmax == Some(422.0);
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng::from_seed(9);
    let mut identical = 0;
    for i in 0..100 {
        let mut cfg = SynthConfig::new(
            SynthTree::Random {
                n_leaves: r.random_range(3..12),
                theta: 1.0 / 1500.0,
            },
            r.random_range(5.0..40.0),
            r.random_range(0.1..0.5),
        );
        cfg.missing = r.random_bool(0.5);
        cfg.remove_rare = r.random_bool(0.5);
        if r.random_bool(0.5) {
            cfg.catastrophes = Some(SynthCatastrophes {
                kappa: 0.6,
                rho: Some(0.0005),
            });
        }
        if r.random_bool(0.5) {
            cfg.clades = Some((2, 10.0));
        }
        let data = synthesize(&cfg, &mut r).unwrap();
        let path = dir.path().join(format!("f{i}.nex"));
        write_synthetic(&path, &data).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let parsed = parse_nexus(&text).unwrap();
        let rewritten = write_nexus(
            &parsed.matrix,
            &parsed.clades,
            parsed.embedded_tree.as_deref(),
            parsed.synthesize_params.as_ref(),
        );
        if parsed.matrix == data.matrix && parsed.clades == data.clades && rewritten == text {
            identical += 1;
        }
    }
    let n = RunLength::new(5000, 100).unwrap().n_samples();
    outcome(
        example_ok && identical == 100 && n == 51,
        format!(
            "example file {}, {identical}/100 files round-trip, (5000,100) -> {n} samples",
            if example_ok { "ok" } else { "wrong" }
        ),
    )
}

fn consensus_checks() -> Outcome {
    let taxa: Vec<String> = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
    let t = |s: &str| parse_newick(s, Some(&taxa)).unwrap();
    let trees = [
        t("((A:1,B:1):2,(C:2,D:2):1);"),
        t("((A:2,B:2):1,(C:1,D:1):2);"),
        t("(((A:1,C:1):1,B:2):1,D:3);"),
    ];
    let c = consensus(&trees, 0.5, 1).unwrap();
    let ab = LeafSet::from_indices(4, [0, 1]);
    let cd = LeafSet::from_indices(4, [2, 3]);
    let find = |s: &LeafSet| c.tree.clades.iter().find(|k| k.leaves == *s);
    let fixture_ok = c.tree.clades.len() == 3
        && find(&ab).is_some_and(|k| {
            (k.support - 2.0 / 3.0).abs() < 1e-12 && (k.mean_length - 1.5).abs() < 1e-12
        })
        && find(&cd).is_some_and(|k| (k.support - 2.0 / 3.0).abs() < 1e-12)
        && ConsensusTree::label(2.0 / 3.0).as_deref() == Some("67%")
        && ConsensusTree::label(1.0).is_none()
        && c.to_newick().contains(")67%:");

    let mut r = rng::from_seed(10);
    let mut idempotent = 0;
    for _ in 0..50 {
        let l = r.random_range(3..12);
        let taxa = names(l);
        let tree = Tree::random_exponential(taxa.clone(), 1.0, None, &mut r).unwrap();
        let c = consensus(&vec![tree.clone(); 5], 0.5, 1).unwrap();
        let back = parse_newick(&c.to_newick(), Some(&taxa)).unwrap();
        let sets = tree.leaf_sets();
        let ages_match = back.leaf_sets().iter().enumerate().all(|(v, s)| {
            let w = sets.iter().position(|x| x == s).unwrap();
            (back.age(v) - tree.age(w)).abs() < 1e-9
        });
        let all_full = c.tree.clades.iter().all(|k| k.support == 1.0);
        if back.topology_key() == tree.topology_key()
            && ages_match
            && all_full
            && c.tree.clades.len() == l - 1
        {
            idempotent += 1;
        }
    }
    outcome(
        fixture_ok && idempotent == 50,
        format!(
            "fixture {}, {idempotent}/50 unanimous samples reproduce their tree",
            if fixture_ok { "ok" } else { "wrong" }
        ),
    )
}

const RECOVERY_TREE: &str =
    "((((t0:800,t1:800):1200,t2:2000):1000,(t3:1500,t4:1500):1500):1000,((t5:1000,t6:1000):1500,t7:2500):1500);";
const RECOVERY_STEPS: usize = 300_000;

fn recovery() -> Outcome {
    let taxa = names(8);
    let mut tree = parse_newick(RECOVERY_TREE, Some(&taxa)).unwrap();
    let t2 = tree.taxa().iter().position(|n| n == "t2").unwrap();
    tree.catastrophes_mut(t2).push(0.5);
    let truth = tree.age(tree.root());
    let mut covered = 0;
    let mut widths = Vec::new();
    for rep in 0..20u64 {
        let mut r = rng::from_seed(1100 + rep);
        let mut cfg = SynthConfig::new(SynthTree::Given(tree.clone()), 50.0, 0.4);
        cfg.catastrophes = Some(SynthCatastrophes {
            kappa: 0.8,
            rho: None,
        });
        cfg.clades = Some((3, 10.0));
        let data = synthesize(&cfg, &mut r).unwrap();
        let p = problem(&data);
        let schedule = Schedule::new(&p.model, None, false).unwrap();
        let ctx = context(&p.model, &schedule);
        let mut chain = start(&p, &mut r);
        let mut sink = MemorySink::default();
        run(
            &mut chain,
            &ctx,
            RunLength::new(RECOVERY_STEPS, 100).unwrap(),
            &mut r,
            &mut sink,
            &mut |_| {},
        )
        .unwrap();
        let ages: Vec<f64> = sink.records[sink.records.len() / 4..]
            .iter()
            .map(|t| t.root_age)
            .collect();
        let (lo, hi) = credible_interval(&ages, 0.95);
        widths.push(hi - lo);
        if lo <= truth && truth <= hi {
            covered += 1;
        }
    }
    let mean_width = widths.iter().sum::<f64>() / widths.len() as f64;
    outcome(
        covered >= 18,
        format!("true root age {truth} inside the 95% interval in {covered}/20 replicates (mean width {mean_width:.0})"),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        (
            "two-leaf closed form",
            Duration::from_secs(1),
            two_leaf_closed_form,
        ),
        (
            "simulated pattern frequencies",
            Duration::from_secs(300),
            simulated_pattern_frequencies,
        ),
        (
            "catastrophe as edge extension",
            Duration::from_secs(10),
            catastrophe_identity,
        ),
        (
            "catastrophe rate marginal",
            Duration::from_secs(10),
            rho_marginal,
        ),
        (
            "MCMC targets the tree prior",
            Duration::from_secs(120),
            prior_targeting,
        ),
        (
            "independent chains agree",
            Duration::from_secs(600),
            stationarity,
        ),
        ("lag coupling", Duration::from_secs(1200), coupling_checks),
        (
            "simulator moments",
            Duration::from_secs(300),
            simulator_moments,
        ),
        (
            "parsing and round trips",
            Duration::from_secs(60),
            parser_round_trip,
        ),
        ("consensus trees", Duration::from_secs(60), consensus_checks),
        ("root age recovery", Duration::from_secs(3600), recovery),
    ];
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t0 = Instant::now();
        let o = check();
        let elapsed = t0.elapsed();
        let pass = o.pass && elapsed <= *limit;
        failed += usize::from(!pass);
        println!(
            "criterion {n:>2} {}  {name}: {} [{:.1}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
