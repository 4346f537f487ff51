//! Two-particle occupancy statistics from overlapping wavepackets.
//!
//! Exact Maxwell-Boltzmann, Bose-Einstein and Fermi-Dirac occupancy counting
//! ([`occupancy`]), a split-operator simulation of Gaussian packets scattering
//! off a rectangular barrier ([`grid`], [`propagator`]), and the joint
//! reflection/transmission statistics of symmetrized and antisymmetrized
//! pairs of such packets ([`twoparticle`], [`experiment`]).

// Negated comparisons are how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod occupancy;
pub mod propagator;
pub mod report;
pub mod twoparticle;

pub use error::{Error, Result};

/// Toolkit version echoed in JSON summaries.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
