//! Sojourn-time analysis for the ideal marked-pair synchronizer that joins the
//! two branches of a fork-join queueing network.
//!
//! Each arriving job is forked into two partners that traverse an M/M/N_a and
//! an M/M/N_b branch. The synchronizer holds whichever partner arrives first
//! until its twin shows up; the wait is `t = |t_a - t_b|`.
//!
//! - [`analytic`]: closed-form densities for `t` under the independence
//!   approximation, expressed as signed exponential mixtures.
//! - [`fjsim`]: discrete-event simulation of the network and synchronizer.
//! - [`ck`]: iterative solver for the joint queue-length distribution of the
//!   `{M/M/1; M/M/1}` network, and the branch sojourn correlation it implies.
//! - [`gof`]: Pearson chi-square harness comparing simulation to the analytic density.
//! - [`io`]: CSV and JSON emission.

pub mod analytic;
pub mod ck;
mod error;
pub mod fixtures;
pub mod fjsim;
pub mod gof;
pub mod io;
pub mod stats;

pub use analytic::{
    branch_sojourn_density, cross_convolve, erlang_idle_prob, fold_to_waiting_density,
    little_occupancy, queue_nonempty_prob, waiting_density, Branch, BranchOccupancy, ExpMixture,
    NetworkParams, Servers, Side, Support, Term,
};
pub use error::{Error, Result};
