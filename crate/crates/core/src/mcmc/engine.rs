//! Metropolis–Hastings steps, move statistics and sub-sampled runs.

use rand::Rng;

use super::draw::Pair;
use super::moves::{propose, MoveContext, MOVE_IDS};
use crate::likelihood::sample_lambda;
use crate::priors::{log_posterior, sample_rho, Posterior, RhoMode};
use crate::state::{ChainState, Model};
use crate::{Error, Result};

/// Proposal and acceptance counts per move since the last reset.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MoveStats {
    proposed: [u64; MOVE_IDS.len()],
    accepted: [u64; MOVE_IDS.len()],
}

impl MoveStats {
    fn slot(id: u8) -> usize {
        MOVE_IDS
            .iter()
            .position(|&m| m == id)
            .expect("known move id")
    }

    pub fn record(&mut self, id: u8, accepted: bool) {
        let k = Self::slot(id);
        self.proposed[k] += 1;
        self.accepted[k] += accepted as u64;
    }

    pub fn proposed(&self, id: u8) -> u64 {
        self.proposed[Self::slot(id)]
    }

    pub fn accepted(&self, id: u8) -> u64 {
        self.accepted[Self::slot(id)]
    }

    /// Fraction accepted; NaN when the move was never proposed.
    pub fn acceptance(&self, id: u8) -> f64 {
        let k = Self::slot(id);
        if self.proposed[k] == 0 {
            f64::NAN
        } else {
            self.accepted[k] as f64 / self.proposed[k] as f64
        }
    }

    pub fn reset(&mut self) {
        *self = MoveStats::default();
    }
}

/// A chain's current state with its cached log-posterior.
#[derive(Clone, Debug)]
pub struct Chain {
    pub state: ChainState,
    pub post: Posterior,
    pub stats: MoveStats,
}

impl Chain {
    /// Fails when the state is outside the support of the posterior, for
    /// example a starting tree that breaks a clade constraint.
    pub fn new(state: ChainState, model: &Model) -> Result<Chain> {
        let violations = model.constraints.validate(&state.tree);
        if !violations.is_empty() {
            let msgs: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(Error::Constraint(format!(
                "initial tree violates constraints: {}",
                msgs.join("; ")
            )));
        }
        let post = log_posterior(&state, model);
        if !(post.total() > f64::NEG_INFINITY) {
            return Err(Error::InvalidArgument(format!(
                "initial state has zero posterior density (log prior {}, log likelihood {})",
                post.log_prior, post.log_likelihood
            )));
        }
        Ok(Chain {
            state,
            post,
            stats: MoveStats::default(),
        })
    }
}

/// One Metropolis–Hastings step.
pub fn step<R: Rng + ?Sized>(chain: &mut Chain, ctx: &MoveContext, rng: &mut R) {
    step_pair(chain, None, ctx, rng);
}

/// One step of a chain or of a coupled pair. Both chains use the same move
/// and the same acceptance uniform.
pub(crate) fn step_pair<R: Rng + ?Sized>(
    x: &mut Chain,
    y: Option<&mut Chain>,
    ctx: &MoveContext,
    rng: &mut R,
) {
    let id = ctx.schedule.choose(rng);
    let states = Pair {
        x: &x.state,
        y: y.as_ref().map(|c| &c.state),
    };
    let props = propose(id, states, ctx, rng);
    let log_u = rng.random::<f64>().ln();
    accept(x, props.x, id, log_u, ctx.model);
    if let (Some(y), Some(p)) = (y, props.y) {
        accept(y, p, id, log_u, ctx.model);
    }
}

fn accept(chain: &mut Chain, prop: super::moves::Proposal, id: u8, log_u: f64, model: &Model) {
    let ok = match prop {
        None => false,
        Some((cand, h)) => {
            let post = log_posterior(&cand, model);
            let ratio = post.total() - chain.post.total() + h;
            if log_u < ratio {
                chain.state = cand;
                chain.post = post;
                true
            } else {
                false
            }
        }
    };
    chain.stats.record(id, ok);
}

/// One saved row of output.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    /// Iteration number of the saved state.
    pub sample: usize,
    pub root_age: f64,
    pub mu: f64,
    pub kappa: f64,
    /// Birth rate drawn from its conditional posterior.
    pub lambda: f64,
    /// Catastrophe rate drawn from its conditional posterior (or its fixed
    /// value; zero without catastrophes).
    pub rho: f64,
    pub log_prior: f64,
    pub log_likelihood: f64,
    pub poisson_log_likelihood: f64,
    pub xi: Vec<f64>,
}

/// Build the output row for the chain's current state, drawing λ and ρ.
pub fn trace_record<R: Rng + ?Sized>(
    sample: usize,
    chain: &Chain,
    model: &Model,
    rng: &mut R,
) -> TraceRecord {
    let st = &chain.state;
    let terms = chain.post.terms;
    let lambda = terms
        .and_then(|t| sample_lambda(&t, rng).ok())
        .unwrap_or(f64::NAN);
    let poisson = terms.map_or(f64::NAN, |t| {
        if lambda.is_nan() {
            f64::NAN
        } else {
            t.poisson(lambda)
        }
    });
    let (kappa, rho) = if model.catastrophes {
        let rho = match model.rho {
            RhoMode::Marginal => sample_rho(&st.tree, rng),
            RhoMode::Fixed(r) => r,
        };
        (st.kappa, rho)
    } else {
        (0.0, 0.0)
    };
    TraceRecord {
        sample,
        root_age: st.tree.age(st.tree.root()),
        mu: st.mu,
        kappa,
        lambda,
        rho,
        log_prior: chain.post.log_prior,
        log_likelihood: chain.post.log_likelihood,
        poisson_log_likelihood: poisson,
        xi: st.xi.clone(),
    }
}

/// `(s,loglik) a1 a2 ...` with acceptance fractions in move-table order.
pub fn monitor_line(sample: usize, log_likelihood: f64, stats: &MoveStats) -> String {
    let mut s = format!("({sample},{log_likelihood:.6})");
    for &id in &MOVE_IDS {
        let a = stats.acceptance(id);
        if a.is_nan() {
            s.push_str(" NaN");
        } else {
            s.push_str(&format!(" {a:.2}"));
        }
    }
    s
}

/// Receives saved states.
pub trait SampleSink {
    fn record(&mut self, chain: &Chain, record: &TraceRecord) -> Result<()>;
}

/// Collects records in memory.
#[derive(Clone, Debug, Default)]
pub struct MemorySink {
    pub records: Vec<TraceRecord>,
    pub trees: Vec<crate::tree::Tree>,
}

impl SampleSink for MemorySink {
    fn record(&mut self, chain: &Chain, record: &TraceRecord) -> Result<()> {
        self.records.push(record.clone());
        self.trees.push(chain.state.tree.clone());
        Ok(())
    }
}

/// Run length and sub-sampling interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunLength {
    pub run_length: usize,
    pub sample_interval: usize,
}

impl RunLength {
    pub fn new(run_length: usize, sample_interval: usize) -> Result<Self> {
        if sample_interval == 0 || run_length < sample_interval {
            return Err(Error::Config(format!(
                "need run length ({run_length}) >= sample interval ({sample_interval}) >= 1"
            )));
        }
        Ok(RunLength {
            run_length,
            sample_interval,
        })
    }

    /// `floor(r/j) + 1`: the initial state and every `j`-th state.
    pub fn n_samples(&self) -> usize {
        self.run_length / self.sample_interval + 1
    }
}

/// Run the chain, saving the initial state and every `j`-th state after it.
/// `monitor` receives one line per saved state.
pub fn run<R: Rng + ?Sized>(
    chain: &mut Chain,
    ctx: &MoveContext,
    len: RunLength,
    rng: &mut R,
    sink: &mut dyn SampleSink,
    monitor: &mut dyn FnMut(&str),
) -> Result<()> {
    save(0, chain, ctx.model, rng, sink, monitor)?;
    for s in 1..=len.run_length {
        step(chain, ctx, rng);
        if s % len.sample_interval == 0 {
            save(s, chain, ctx.model, rng, sink, monitor)?;
        }
    }
    Ok(())
}

pub(crate) fn save<R: Rng + ?Sized>(
    s: usize,
    chain: &mut Chain,
    model: &Model,
    rng: &mut R,
    sink: &mut dyn SampleSink,
    monitor: &mut dyn FnMut(&str),
) -> Result<()> {
    debug_assert!({
        let fresh = log_posterior(&chain.state, model).total();
        let cached = chain.post.total();
        (fresh - cached).abs() <= 1e-9 * cached.abs().max(1.0)
    });
    let rec = trace_record(s, chain, model, rng);
    sink.record(chain, &rec)?;
    monitor(&monitor_line(s, chain.post.log_likelihood, &chain.stats));
    chain.stats.reset();
    Ok(())
}
