//! Steady-state analysis of open generalized Jackson networks.
//!
//! This crate provides two independent routes to the stationary queue-length
//! distribution of a single-class open queueing network with renewal external
//! arrivals, i.i.d. general service times, Markovian routing, and FCFS
//! single-server stations:
//!
//! * an analytical product-form approximation in which each station's queue
//!   length is a mixed atom-at-zero / exponential law whose parameters come
//!   from the routing matrix and the first two moments of the primitive
//!   distributions ([`approx`]), and
//! * an exact discrete-event simulation of the network ([`sim`]) together
//!   with batch-means confidence intervals, histogram comparison data, and a
//!   G-test of independence across stations ([`stats`]).
//!
//! The [`transform`] module exposes the moment-generating-function machinery
//! (the exponent functions γ and ξ, their Taylor data, and the θ-vector
//! construction) as numerically checkable identities; `gjn bar-check` runs
//! the whole identity suite from the command line.
//!
//! See the crate examples for end-to-end usage; the `gjn` binary drives the
//! same library code from experiment config files.

// index-based loops mirror the matrix formulas throughout
#![allow(clippy::needless_range_loop)]

pub mod approx;
pub mod cli;
pub mod config;
pub mod error;
pub mod flow;
pub mod network;
pub mod report;
pub mod rng;
pub mod sim;
pub mod special;
pub mod stats;
#[cfg(test)]
pub(crate) mod testutil;
pub mod transform;

pub use approx::{build_approx, ApproxModel, PmfConvention};
pub use config::ExperimentConfig;
pub use error::Error;
pub use flow::{compute_w, solve_traffic, TrafficSolution, WMatrix};
pub use network::{DistributionSpec, NetworkSpec};
pub use sim::{jackson_oracle, simulate, SimConfig, SimEstimate};
pub use transform::ThetaVector;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
