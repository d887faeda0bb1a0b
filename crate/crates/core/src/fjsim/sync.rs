use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::analytic::Branch;
use crate::error::{Error, Result};

/// A partner reaching the synchronizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncArrival {
    pub id: u64,
    pub branch: Branch,
    pub fork_time: f64,
    /// Arrival time at the synchronizer (the branch departure time).
    pub time: f64,
}

/// Both partners of a pair, released together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub id: u64,
    pub fork_time: f64,
    pub t_a: f64,
    pub t_b: f64,
    pub first_branch: Branch,
    /// Release time, i.e. the second partner's arrival.
    pub release_time: f64,
}

impl MatchedPair {
    /// Time the first partner spent in synchronizer memory.
    pub fn t_sync(&self) -> f64 {
        (self.t_a - self.t_b).abs()
    }
}

/// Ideal marked-pair synchronizer: unbounded memory, instantaneous monitor.
///
/// A new arrival either finds its partner in memory, in which case both are
/// released, or is stored until the partner arrives.
#[derive(Debug, Default, Clone)]
pub struct Synchronizer {
    memory: HashMap<u64, SyncArrival>,
}

impl Synchronizer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of first partners currently waiting.
    pub fn len(&self) -> usize {
        self.memory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memory.is_empty()
    }

    pub fn holds(&self, id: u64) -> Option<Branch> {
        self.memory.get(&id).map(|a| a.branch)
    }

    /// Processes one arrival and returns the released pair, if any.
    pub fn step(&mut self, arrival: SyncArrival) -> Result<Option<MatchedPair>> {
        match self.memory.remove(&arrival.id) {
            None => {
                self.memory.insert(arrival.id, arrival);
                Ok(None)
            }
            Some(first) if first.branch == arrival.branch => {
                let id = arrival.id;
                self.memory.insert(id, first);
                Err(Error::Protocol(format!(
                    "job {id} arrived twice from branch {}",
                    arrival.branch
                )))
            }
            Some(first) => {
                let (a, b) = match first.branch {
                    Branch::A => (first, arrival),
                    Branch::B => (arrival, first),
                };
                Ok(Some(MatchedPair {
                    id: arrival.id,
                    fork_time: first.fork_time,
                    t_a: a.time - a.fork_time,
                    t_b: b.time - b.fork_time,
                    first_branch: first.branch,
                    release_time: arrival.time,
                }))
            }
        }
    }
}
