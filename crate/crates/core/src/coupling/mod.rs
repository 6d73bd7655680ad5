//! Lag-coupled pairs of chains.
//!
//! The `x` chain runs `l` steps alone; from then on `x` and `y` move
//! together through [`coupled_step`], with `y` lagging `l` iterations
//! behind. Each chain follows the ordinary kernel marginally, and once
//! `X_s = Y_{s-l}` the two stay equal. The meeting time `τ` is the first
//! saved iteration `s` at which this holds, so it is rounded up to the
//! sampling grid.

use rand::Rng;

use crate::mcmc::engine::{save, step_pair};
use crate::mcmc::{step, Chain, MoveContext, RunLength, SampleSink};
use crate::{Error, Result};

/// One step of the pair. Equal inputs give equal outputs.
pub fn coupled_step<R: Rng + ?Sized>(x: &mut Chain, y: &mut Chain, ctx: &MoveContext, rng: &mut R) {
    step_pair(x, Some(y), ctx, rng);
}

/// True when the two chains are in the same state.
pub fn met(x: &Chain, y: &Chain) -> bool {
    x.state.same_state(&y.state)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingSettings {
    pub len: RunLength,
    /// Lag `l`, a positive multiple of the sample interval.
    pub lag: usize,
    /// Give up on meeting after this many iterations of `x`.
    pub max_iterations: usize,
}

impl CouplingSettings {
    pub fn new(len: RunLength, lag: usize, max_iterations: usize) -> Result<Self> {
        if lag == 0 || !lag.is_multiple_of(len.sample_interval) {
            return Err(Error::Config(format!(
                "coupling lag {lag} must be a positive multiple of the sample interval {}",
                len.sample_interval
            )));
        }
        Ok(CouplingSettings {
            len,
            lag,
            max_iterations: max_iterations.max(len.run_length),
        })
    }
}

/// Run a coupled pair. Samples of `x` go to `x_sink` at iterations
/// `0, j, 2j, ...`; samples of `y` go to `y_sink` until the chains meet.
/// The run stops at the later of the run length and the meeting time; the
/// meeting time is `None` if the chains had not met by the iteration cap.
#[allow(clippy::too_many_arguments)]
pub fn run_coupled<R: Rng + ?Sized>(
    x: &mut Chain,
    y: &mut Chain,
    ctx: &MoveContext,
    settings: &CouplingSettings,
    rng: &mut R,
    x_sink: &mut dyn SampleSink,
    y_sink: &mut dyn SampleSink,
    monitor: &mut dyn FnMut(&str),
) -> Result<Option<usize>> {
    let j = settings.len.sample_interval;
    let l = settings.lag;
    let mut tau = None;
    save(0, x, ctx.model, rng, x_sink, &mut |m| {
        monitor(&format!("x {m}"))
    })?;
    let mut s = 0;
    loop {
        let done = match tau {
            Some(t) => s >= settings.len.run_length.max(t),
            None => s >= settings.max_iterations,
        };
        if done {
            break;
        }
        s += 1;
        if s <= l || tau.is_some() {
            step(x, ctx, rng);
        } else {
            coupled_step(x, y, ctx, rng);
        }
        if s % j == 0 {
            save(s, x, ctx.model, rng, x_sink, &mut |m| {
                monitor(&format!("x {m}"))
            })?;
            if s >= l && tau.is_none() {
                save(s - l, y, ctx.model, rng, y_sink, &mut |m| {
                    monitor(&format!("y {m}"))
                })?;
                if met(x, y) {
                    tau = Some(s);
                }
            }
        }
    }
    Ok(tau)
}

/// Estimated bound on the total variation distance to stationarity at
/// iteration `t`: the mean over replicates of `max(0, ⌈(τ - l - t)/l⌉)`.
pub fn tv_bound(taus: &[usize], lag: usize, t: usize) -> Result<f64> {
    if taus.is_empty() {
        return Err(Error::InvalidArgument("no meeting times".into()));
    }
    if lag == 0 {
        return Err(Error::InvalidArgument("lag must be positive".into()));
    }
    let total: usize = taus
        .iter()
        .map(|&tau| {
            let excess = tau.saturating_sub(lag + t);
            excess.div_ceil(lag)
        })
        .sum();
    Ok(total as f64 / taus.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_bound_values() {
        assert_eq!(tv_bound(&[100, 200, 150], 200, 0).unwrap(), 0.0);
        assert_eq!(tv_bound(&[300], 100, 0).unwrap(), 2.0);
        assert_eq!(tv_bound(&[301], 100, 0).unwrap(), 3.0);
        let taus = [120, 450, 800, 1000, 3000];
        let mut last = f64::INFINITY;
        for t in (0..4000).step_by(50) {
            let b = tv_bound(&taus, 100, t).unwrap();
            assert!(b <= last);
            last = b;
        }
        assert!(tv_bound(&[], 100, 0).is_err());
    }

    #[test]
    fn lag_must_be_multiple() {
        let len = RunLength::new(1000, 100).unwrap();
        assert!(CouplingSettings::new(len, 150, 0).is_err());
        assert!(CouplingSettings::new(len, 500, 0).is_ok());
    }
}
