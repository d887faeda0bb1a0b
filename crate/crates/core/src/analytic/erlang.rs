//! Stationary M/M/N quantities.
//!
//! Everything is driven by the Erlang-B recurrence
//! `B(k) = a B(k-1) / (k + a B(k-1))` and a log-domain partial Poisson sum,
//! so no factorial or power of the offered load is ever formed explicitly.

use serde::{Deserialize, Serialize};

use super::params::{check_branch, Servers};
use crate::error::{domain, Result};

/// Stationary occupancy probabilities of one M/M/N branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchOccupancy {
    /// Probability the branch holds no jobs.
    pub p0: f64,
    /// Probability that all servers are busy, so an arrival has to queue.
    pub p_queue: f64,
}

fn finite_servers(lambda: f64, mu: f64, n: Servers) -> Result<u32> {
    check_branch(lambda, mu, n)?;
    match n {
        Servers::Finite(n) => Ok(n),
        Servers::Infinite => domain("Erlang probabilities need a finite server count"),
    }
}

fn erlang_b(load: f64, n: u32) -> f64 {
    let mut b = 1.0;
    for k in 1..=n {
        let ab = load * b;
        b = ab / (f64::from(k) + ab);
    }
    b
}

/// `ln Σ_{k=0}^{n} load^k / k!`, accumulated with a running log-sum-exp.
fn ln_poisson_partial_sum(load: f64, n: u32) -> f64 {
    let ln_load = load.ln();
    let mut ln_term = 0.0_f64;
    let mut acc = 0.0_f64; // ln of the running sum; first term is 1
    for k in 1..=n {
        ln_term += ln_load - f64::from(k).ln();
        let (hi, lo) = if acc >= ln_term { (acc, ln_term) } else { (ln_term, acc) };
        acc = hi + (lo - hi).exp().ln_1p();
    }
    acc
}

pub fn branch_occupancy(lambda: f64, mu: f64, n: Servers) -> Result<BranchOccupancy> {
    let n = finite_servers(lambda, mu, n)?;
    let load = lambda / mu;
    let psi = load / f64::from(n);
    let b = erlang_b(load, n);
    let p_queue = b / (1.0 - psi * (1.0 - b));
    // 1/p0 = S_n (1 - B + B/(1-ψ)), S_n the Poisson partial sum up to n
    let ln_inv = ln_poisson_partial_sum(load, n) + (1.0 - b + b / (1.0 - psi)).ln();
    Ok(BranchOccupancy { p0: (-ln_inv).exp(), p_queue })
}

/// Probability that an M/M/N branch is empty.
pub fn erlang_idle_prob(lambda: f64, mu: f64, n: Servers) -> Result<f64> {
    branch_occupancy(lambda, mu, n).map(|o| o.p0)
}

/// Probability that an arrival to an M/M/N branch finds every server busy
/// and joins the queue (the Erlang-C probability).
pub fn queue_nonempty_prob(lambda: f64, mu: f64, n: Servers) -> Result<f64> {
    branch_occupancy(lambda, mu, n).map(|o| o.p_queue)
}
