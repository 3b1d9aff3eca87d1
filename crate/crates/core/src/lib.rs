//! Monte Carlo laboratory for bond percolation on a randomly stretched lattice.
//!
//! Columns of the half-plane are placed at the points of a discrete renewal
//! process. The crate covers the renewal machinery, the multiscale good/bad
//! labelling of intervals, exact checks of the scale recursions, crossing
//! events with per-sample containment audits, and an experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod crossing;
pub mod decouple;
pub mod dsu;
pub mod env;
pub mod error;
pub mod events;
pub mod harness;
pub mod labels;
pub mod lattice;
pub mod numerics;
pub mod perc;
pub mod pmf;
pub mod proof;
pub mod renewal;
pub mod rng;
pub mod scales;
pub mod stats;

pub use error::{Error, Result};
