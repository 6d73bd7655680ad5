//! Batch runs driven by a [`RunConfig`].

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;

use crate::config::{InitialTree, RunConfig, TreePriorConfig};
use crate::constraints::{CladeSelection, ConstraintSet};
use crate::coupling::{run_coupled, CouplingSettings};
use crate::likelihood::{tabulate_patterns, TabulateOptions};
use crate::mcmc::init::{constrained_initial_tree, initial_kappa, initial_xi, DEFAULT_BURN_IN};
use crate::mcmc::{run, Chain, MoveContext, RunLength, Schedule};
use crate::newick::parse_newick;
use crate::nexus::{parse_nexus, ParsedNexus};
use crate::output::{read_saved_sample, with_suffix, write_par_file, write_tau, FileSink};
use crate::priors::{psi_to_mu, TreePrior};
use crate::rng::{self, ChainRng};
use crate::state::{ChainState, Model};
use crate::{Error, Result};

/// Read and parse a Nexus data file.
pub fn load_data(path: &Path) -> Result<ParsedNexus> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_nexus(&text)
}

/// The model a configuration describes for the given data.
pub fn build_model(config: &RunConfig, data: &ParsedNexus) -> Result<Model> {
    let table = tabulate_patterns(
        &data.matrix,
        &TabulateOptions {
            omitted_taxa: config.omitted_taxa.clone(),
            omitted_traits: config.omitted_traits.clone(),
            registration: config.registration(),
            model_missing: config.model_missing,
        },
    )?;
    let taxa: Arc<[String]> = table.taxa.clone().into();
    let (max_root_age, tree_prior) = match config.tree_prior {
        TreePriorConfig::UniformRoot {
            max_root_age,
            topology_weighted,
        } => (
            Some(max_root_age),
            TreePrior::UniformRoot { topology_weighted },
        ),
        TreePriorConfig::Exponential => (None, TreePrior::Exponential),
    };
    let constraints = if config.impose_clades {
        let selection = CladeSelection {
            ignored: config.ignored_clades.clone(),
            age_ignored: config.age_ignored_clades.clone(),
        };
        ConstraintSet::from_clades(&taxa, &data.clades, &selection, max_root_age)?
    } else {
        ConstraintSet::unconstrained(taxa.len(), max_root_age)
    };
    let missing_taxa = if config.model_missing {
        table.taxa_with_missing()
    } else {
        Vec::new()
    };
    let cats = config.catastrophes;
    Ok(Model {
        taxa,
        constraints,
        tree_prior,
        registration: config.registration(),
        catastrophes: cats.is_some(),
        rho: cats.map_or(crate::priors::RhoMode::Marginal, |c| c.rho),
        vary_mu: config.loss_rate.vary,
        vary_kappa: cats.is_some_and(|c| c.kappa.is_none()),
        vary_topology: config.vary_topology,
        missing_taxa,
        table,
    })
}

/// The starting state of a chain.
pub fn initial_state<R: Rng + ?Sized>(
    config: &RunConfig,
    model: &Model,
    data: &ParsedNexus,
    rng: &mut R,
) -> Result<ChainState> {
    let mut mu = psi_to_mu(config.loss_rate.psi)?;
    let mut kappa = match config.catastrophes {
        Some(c) => initial_kappa(c.kappa, rng),
        None => 0.5,
    };
    let mut xi = initial_xi(&model.table, &model.missing_taxa);
    let mut tree = match &config.initial_tree {
        InitialTree::Random { theta } => constrained_initial_tree(
            model.taxa.clone(),
            *theta,
            &model.constraints,
            DEFAULT_BURN_IN,
            rng,
        )?,
        InitialTree::True => {
            let nw = data.embedded_tree.as_deref().ok_or_else(|| {
                Error::Config("Initial_tree = true needs a data file with a trees block".into())
            })?;
            parse_newick(nw, Some(&model.taxa))?
        }
        InitialTree::FromOutput { file, index } => {
            let saved = read_saved_sample(file, *index, &model.taxa)?;
            if let Some(m) = saved.mu {
                mu = m;
            }
            if let (Some(k), Some(c)) = (saved.kappa, config.catastrophes) {
                kappa = c.kappa.unwrap_or(k);
            }
            if let Some(x) = saved.xi {
                if x.len() == xi.len() && !model.missing_taxa.is_empty() {
                    for &j in &model.missing_taxa {
                        xi[j] = x[j];
                    }
                }
            }
            saved.tree
        }
    };
    if !model.catastrophes {
        tree.clear_catastrophes();
    }
    Ok(ChainState::new(tree, mu, kappa, xi))
}

/// Output stem with the replicate suffix appended.
pub fn output_stem(config: &RunConfig, suffix: Option<&str>) -> PathBuf {
    with_suffix(&config.output_file, suffix.unwrap_or(""))
}

/// Fill in a seed taken from the clock when none is configured.
pub fn resolve_seed(config: &mut RunConfig) -> u64 {
    *config.seed.get_or_insert_with(rng::clock_seed)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub stem: PathBuf,
    pub seed: u64,
    pub n_samples: usize,
    /// Meeting time of a coupled run.
    pub tau: Option<usize>,
}

struct Setup {
    data: ParsedNexus,
    model: Model,
    schedule: Schedule,
}

fn setup(config: &RunConfig, coupled: bool) -> Result<Setup> {
    config.validate()?;
    let data = load_data(&config.data_file)?;
    let model = build_model(config, &data)?;
    let schedule = Schedule::new(&model, config.move_weights.as_deref(), coupled)?;
    Ok(Setup {
        data,
        model,
        schedule,
    })
}

fn context<'a>(s: &'a Setup, config: &RunConfig) -> MoveContext<'a> {
    MoveContext {
        model: &s.model,
        schedule: &s.schedule,
        delta: config.multiplier_half_width,
    }
}

fn streams(seed: u64) -> (ChainRng, ChainRng, ChainRng) {
    (
        rng::stream(seed, 0),
        rng::stream(seed, 1),
        rng::stream(seed, 2),
    )
}

/// Run a single chain and write its output files.
pub fn fit(
    config: &RunConfig,
    suffix: Option<&str>,
    monitor: &mut dyn FnMut(&str),
) -> Result<RunReport> {
    let mut config = config.clone();
    config.coupled = false;
    let seed = resolve_seed(&mut config);
    let s = setup(&config, false)?;
    let ctx = context(&s, &config);
    let (mut moves, mut init, _) = streams(seed);
    let state = initial_state(&config, &s.model, &s.data, &mut init)?;
    let mut chain = Chain::new(state, &s.model)?;
    let stem = output_stem(&config, suffix);
    write_par_file(&stem, &config)?;
    let len = RunLength::new(config.run_length, config.sample_interval)?;
    let mut sink = FileSink::create(&stem, &s.model.taxa, !s.model.missing_taxa.is_empty())?;
    run(&mut chain, &ctx, len, &mut moves, &mut sink, monitor)?;
    sink.finish()?;
    Ok(RunReport {
        stem,
        seed,
        n_samples: len.n_samples(),
        tau: None,
    })
}

/// Run a lag-coupled pair and write `_x`, `_y` and `.tau` outputs.
pub fn couple(
    config: &RunConfig,
    suffix: Option<&str>,
    monitor: &mut dyn FnMut(&str),
) -> Result<RunReport> {
    let mut config = config.clone();
    config.coupled = true;
    let seed = resolve_seed(&mut config);
    let s = setup(&config, true)?;
    let ctx = context(&s, &config);
    let (mut moves, mut init_x, mut init_y) = streams(seed);
    let mut x = Chain::new(
        initial_state(&config, &s.model, &s.data, &mut init_x)?,
        &s.model,
    )?;
    let mut y = Chain::new(
        initial_state(&config, &s.model, &s.data, &mut init_y)?,
        &s.model,
    )?;
    let stem = output_stem(&config, suffix);
    write_par_file(&stem, &config)?;
    let len = RunLength::new(config.run_length, config.sample_interval)?;
    let settings = CouplingSettings::new(len, config.coupling_lag, config.coupling_max_iterations)?;
    let write_xi = !s.model.missing_taxa.is_empty();
    let mut xs = FileSink::create(&with_suffix(&stem, "_x"), &s.model.taxa, write_xi)?;
    let mut ys = FileSink::create(&with_suffix(&stem, "_y"), &s.model.taxa, write_xi)?;
    let tau = run_coupled(
        &mut x, &mut y, &ctx, &settings, &mut moves, &mut xs, &mut ys, monitor,
    )?;
    xs.finish()?;
    ys.finish()?;
    write_tau(&stem, tau, config.sample_interval)?;
    let last = tau.map_or(settings.max_iterations, |t| t.max(config.run_length));
    Ok(RunReport {
        stem,
        seed,
        n_samples: last / config.sample_interval + 1,
        tau,
    })
}
