//! Bayesian inference of dated trait-presence phylogenies under the
//! stochastic Dollo model with catastrophes, missing data and a rare-trait
//! registration threshold.
//!
//! The crate is organised around the pieces of a run:
//!
//! * [`nexus`], [`newick`], [`config`] and [`output`] read data and run
//!   configurations and write every run output file.
//! * [`tree`] and [`constraints`] hold the dated binary tree, clade
//!   constraints and tree construction.
//! * [`likelihood`] evaluates expected pattern intensities by a pruning
//!   recursion and the λ-integrated multinomial likelihood.
//! * [`priors`] holds the tree, parameter and catastrophe-count priors and
//!   the assembled log-posterior.
//! * [`mcmc`] is the Metropolis–Hastings sampler, [`coupling`] the
//!   lag-coupled pair of chains built on the same move set.
//! * [`simulate`] synthesises data under the model and its generalisations,
//!   and [`analysis`] summarises sampled trees and data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod constraints;
pub mod coupling;
pub mod error;
pub mod leafset;
pub mod likelihood;
pub mod mcmc;
pub mod newick;
pub mod nexus;
pub mod output;
pub mod priors;
pub mod rng;
pub mod runner;
pub mod simulate;
pub mod state;
pub mod tree;

pub use error::{Error, Result};
