//! Browser bindings: simulate a data set, score a tree, and run a short
//! chain, all on Nexus and Newick text.

use dollo_core::analysis::consensus;
use dollo_core::config::{CatastropheConfig, RunConfig};
use dollo_core::likelihood::{likelihood_terms, LikelihoodParams};
use dollo_core::mcmc::init::initial_xi;
use dollo_core::mcmc::{run, Chain, MemorySink, MoveContext, RunLength, Schedule};
use dollo_core::newick::{parse_newick, write_newick};
use dollo_core::nexus::{parse_nexus, write_nexus, Cell, ParsedNexus};
use dollo_core::priors::{psi_to_mu, RhoMode};
use dollo_core::rng;
use dollo_core::runner::{build_model, initial_state};
use dollo_core::simulate::{synthesize, SynthCatastrophes, SynthConfig, SynthTree};
use dollo_core::{Error, Result};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn has_missing(data: &ParsedNexus) -> bool {
    let m = &data.matrix;
    (0..m.n_taxa()).any(|i| m.row(i).contains(&Cell::Missing))
}

fn demo_config(data: &ParsedNexus, steps: usize, interval: usize, catastrophes: bool) -> RunConfig {
    let mut c = RunConfig::new("", "", steps, interval);
    c.model_missing = has_missing(data);
    c.impose_clades = !data.clades.is_empty();
    if catastrophes {
        c.catastrophes = Some(CatastropheConfig {
            kappa: None,
            rho: RhoMode::Marginal,
        });
    }
    c
}

/// Simulate on a random tree; JSON with `nexus`, `tree`, `rootAge`, `traits`.
pub fn simulate_json(
    leaves: usize,
    traits: f64,
    psi: f64,
    kappa: f64,
    cat_rate: f64,
    missing: bool,
    seed: u64,
) -> Result<String> {
    let mut c = SynthConfig::new(
        SynthTree::Random {
            n_leaves: leaves,
            theta: 0.001,
        },
        traits,
        psi,
    );
    if kappa > 0.0 {
        c.catastrophes = Some(SynthCatastrophes {
            kappa,
            rho: Some(cat_rate),
        });
    }
    c.missing = missing;
    let d = synthesize(&c, &mut rng::from_seed(seed))?;
    let tree = write_newick(&d.tree, kappa > 0.0);
    Ok(json!({
        "nexus": write_nexus(&d.matrix, &d.clades, Some(&tree), None),
        "tree": tree,
        "rootAge": d.tree.age(d.tree.root()),
        "traits": d.matrix.n_traits(),
    })
    .to_string())
}

/// Integrated log-likelihood of a Nexus data set on a Newick tree.
pub fn log_likelihood_of(nexus: &str, newick: &str, psi: f64, kappa: f64) -> Result<f64> {
    let data = parse_nexus(nexus)?;
    let mut config = demo_config(&data, 1, 1, kappa > 0.0);
    config.impose_clades = false;
    let model = build_model(&config, &data)?;
    let mut tree = parse_newick(newick, Some(&model.taxa))?;
    if kappa <= 0.0 {
        tree.clear_catastrophes();
    }
    let xi = initial_xi(&model.table, &model.missing_taxa);
    let params = LikelihoodParams {
        mu: psi_to_mu(psi)?,
        kappa: kappa.max(0.0),
        xi: &xi,
        registration: config.registration(),
    };
    Ok(likelihood_terms(&model.table, &tree, &params)?.integrated())
}

/// Run one chain; JSON with per-sample `rootAge`, `mu`, `logLikelihood`
/// and the majority-rule `consensus` of the second half.
pub fn sample_json(
    nexus: &str,
    steps: usize,
    interval: usize,
    catastrophes: bool,
    seed: u64,
) -> Result<String> {
    let data = parse_nexus(nexus)?;
    let config = demo_config(&data, steps, interval, catastrophes);
    config.validate()?;
    let model = build_model(&config, &data)?;
    let schedule = Schedule::new(&model, None, false)?;
    let ctx = MoveContext {
        model: &model,
        schedule: &schedule,
        delta: config.multiplier_half_width,
    };
    let state = initial_state(&config, &model, &data, &mut rng::stream(seed, 1))?;
    let mut chain = Chain::new(state, &model)?;
    let mut sink = MemorySink::default();
    let len = RunLength::new(steps, interval)?;
    run(
        &mut chain,
        &ctx,
        len,
        &mut rng::stream(seed, 0),
        &mut sink,
        &mut |_| {},
    )?;
    let half = sink.trees.len() / 2;
    let con = consensus(&sink.trees[half..], 0.5, 1)?;
    let col = |f: fn(&dollo_core::mcmc::TraceRecord) -> f64| -> Vec<f64> {
        sink.records.iter().map(f).collect()
    };
    Ok(json!({
        "rootAge": col(|r| r.root_age),
        "mu": col(|r| r.mu),
        "logLikelihood": col(|r| r.log_likelihood),
        "consensus": con.to_newick(),
        "taxa": model.taxa.to_vec(),
    })
    .to_string())
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn simulate(
    leaves: usize,
    traits: f64,
    psi: f64,
    kappa: f64,
    cat_rate: f64,
    missing: bool,
    seed: u32,
) -> std::result::Result<String, JsError> {
    simulate_json(leaves, traits, psi, kappa, cat_rate, missing, seed.into()).map_err(js)
}

#[wasm_bindgen(js_name = logLikelihood)]
pub fn log_likelihood(
    nexus: &str,
    newick: &str,
    psi: f64,
    kappa: f64,
) -> std::result::Result<f64, JsError> {
    log_likelihood_of(nexus, newick, psi, kappa).map_err(js)
}

#[wasm_bindgen]
pub fn sample(
    nexus: &str,
    steps: usize,
    interval: usize,
    catastrophes: bool,
    seed: u32,
) -> std::result::Result<String, JsError> {
    sample_json(nexus, steps, interval, catastrophes, seed.into()).map_err(js)
}
