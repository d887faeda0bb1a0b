//! Discrete-event simulation of the two-branch fork-join network feeding an
//! ideal marked-pair synchronizer.
//!
//! One global event queue ordered by `(time, sequence)`. A fork event injects
//! both twins into their branches at the same instant; each branch is a FIFO
//! M/M/N (or M/M/∞) station; every branch departure is handed to the
//! [`Synchronizer`].

mod source;
mod sync;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

pub use source::{ExpSource, ScriptedSource, TimeSource};
pub use sync::{MatchedPair, SyncArrival, Synchronizer};

use crate::analytic::{mean_wait, Branch, NetworkParams, Servers};
use crate::error::{domain, Result};

/// One copy of a forked job.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub id: u64,
    pub fork_time: f64,
    pub branch: Branch,
}

/// Per-pair record of a completed synchronization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SojournSample {
    pub id: u64,
    pub t_a: f64,
    pub t_b: f64,
    pub t_sync: f64,
    pub first_branch: Branch,
    #[serde(skip)]
    pub fork_time: f64,
}

impl From<MatchedPair> for SojournSample {
    fn from(p: MatchedPair) -> Self {
        SojournSample {
            id: p.id,
            t_a: p.t_a,
            t_b: p.t_b,
            t_sync: p.t_sync(),
            first_branch: p.first_branch,
            fork_time: p.fork_time,
        }
    }
}

/// Count of first partners in synchronizer memory right after an event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupancyStep {
    pub time: f64,
    pub count: u32,
}

/// Piecewise-constant synchronizer occupancy. The count is zero before the
/// first step and holds each step's value until the next one.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OccupancyTrace {
    /// Start of the averaging window.
    pub start: f64,
    pub steps: Vec<OccupancyStep>,
}

impl OccupancyTrace {
    /// Time average of the count over `[start, last step]`.
    pub fn time_average(&self) -> f64 {
        let Some(last) = self.steps.last() else {
            return 0.0;
        };
        let span = last.time - self.start;
        if span <= 0.0 {
            return 0.0;
        }
        let mut area = 0.0;
        let mut prev_t = self.start;
        let mut prev_c = 0u32;
        for s in &self.steps {
            let t = s.time.max(self.start);
            area += f64::from(prev_c) * (t - prev_t);
            prev_t = t;
            prev_c = s.count;
        }
        area / span
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_jobs: u64,
    pub seed: u64,
    /// Leading fraction of pairs (by id) excluded from the statistics.
    pub warmup_fraction: f64,
    /// Keep the full occupancy trace in the result.
    pub keep_trace: bool,
    /// Keep per-pair samples; when off only the summary statistics are kept.
    pub keep_samples: bool,
}

impl SimConfig {
    pub fn new(n_jobs: u64, seed: u64) -> Self {
        SimConfig { n_jobs, seed, warmup_fraction: 0.0, keep_trace: true, keep_samples: true }
    }

    pub fn warmup(mut self, fraction: f64) -> Self {
        self.warmup_fraction = fraction;
        self
    }

    pub fn keep_trace(mut self, keep: bool) -> Self {
        self.keep_trace = keep;
        self
    }

    pub fn keep_samples(mut self, keep: bool) -> Self {
        self.keep_samples = keep;
        self
    }

    fn warmup_jobs(&self) -> u64 {
        (self.warmup_fraction * self.n_jobs as f64).floor() as u64
    }
}

/// Outcome of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub params: NetworkParams,
    pub config: SimConfig,
    /// Pairs after warmup, in release order.
    pub samples: Vec<SojournSample>,
    /// Number of pairs after warmup (equals `samples.len()` when samples are kept).
    pub n_retained: u64,
    /// Mean of `t_sync` over the retained pairs.
    pub t_mean_emp: f64,
    /// Time-averaged number of first partners held in memory.
    pub sync_occupancy_mean: f64,
    /// Peak number of first partners held at once.
    pub max_memory: u32,
    /// Time of the last synchronizer event.
    pub end_time: f64,
    pub trace: OccupancyTrace,
}

impl SimResult {
    pub fn n_jobs(&self) -> u64 {
        self.config.n_jobs
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn t_sync(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t_sync).collect()
    }

    /// Samples sorted by pair id.
    pub fn samples_by_id(&self) -> Vec<SojournSample> {
        let mut v = self.samples.clone();
        v.sort_by_key(|s| s.id);
        v
    }

    /// Headline numbers of the run next to the analytic mean wait.
    pub fn summary(&self) -> Result<SimSummary> {
        let t_mean = mean_wait(&self.params)?;
        Ok(SimSummary {
            params: self.params,
            n_jobs: self.config.n_jobs,
            seed: self.config.seed,
            warmup_fraction: self.config.warmup_fraction,
            n_retained: self.n_retained,
            t_mean,
            t_mean_emp: self.t_mean_emp,
            delta_t_rel: (t_mean - self.t_mean_emp) / t_mean,
            sync_occupancy_mean: self.sync_occupancy_mean,
            little_occupancy: self.params.lambda * self.t_mean_emp,
            max_memory: self.max_memory,
            end_time: self.end_time,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub params: NetworkParams,
    pub n_jobs: u64,
    pub seed: u64,
    pub warmup_fraction: f64,
    pub n_retained: u64,
    /// Analytic mean wait under the independence approximation.
    pub t_mean: f64,
    pub t_mean_emp: f64,
    pub delta_t_rel: f64,
    /// Time-averaged synchronizer occupancy.
    pub sync_occupancy_mean: f64,
    /// `λ T̄_emp`.
    pub little_occupancy: f64,
    pub max_memory: u32,
    pub end_time: f64,
}

/// The synchronizer occupancy time series of a run.
pub fn occupancy_trace(result: &SimResult) -> &OccupancyTrace {
    &result.trace
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    Fork,
    Departure(Job),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed: BinaryHeap is a max-heap and we want the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

#[derive(Default)]
struct EventQueue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl EventQueue {
    fn schedule(&mut self, time: f64, kind: EventKind) {
        self.heap.push(Event { time, seq: self.seq, kind });
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }
}

/// FIFO multi-server station. Servers are exchangeable, so only the busy
/// count is tracked.
struct Station {
    branch: Branch,
    servers: Servers,
    busy: u32,
    queue: VecDeque<(Job, f64)>,
}

impl Station {
    fn new(branch: Branch, servers: Servers) -> Self {
        Station { branch, servers, busy: 0, queue: VecDeque::new() }
    }

    fn has_free_server(&self) -> bool {
        match self.servers {
            Servers::Finite(n) => self.busy < n,
            Servers::Infinite => true,
        }
    }

    fn arrive(&mut self, job: Job, service: f64, now: f64, events: &mut EventQueue) {
        if self.has_free_server() {
            self.busy += 1;
            events.schedule(now + service, EventKind::Departure(job));
        } else {
            self.queue.push_back((job, service));
        }
    }

    fn depart(&mut self, now: f64, events: &mut EventQueue) {
        debug_assert!(self.busy > 0, "departure from idle station {}", self.branch);
        self.busy -= 1;
        if let Some((job, service)) = self.queue.pop_front() {
            self.busy += 1;
            events.schedule(now + service, EventKind::Departure(job));
        }
    }
}

/// Simulates `n_jobs` forked pairs with exponential durations from `seed`.
pub fn run_simulation(
    params: &NetworkParams,
    n_jobs: u64,
    seed: u64,
    warmup_fraction: f64,
) -> Result<SimResult> {
    let config = SimConfig::new(n_jobs, seed).warmup(warmup_fraction);
    simulate(params, &config, &mut ExpSource::new(params, seed))
}

/// Runs the event loop with durations drawn from `source`.
pub fn simulate<S: TimeSource>(
    params: &NetworkParams,
    config: &SimConfig,
    source: &mut S,
) -> Result<SimResult> {
    params.validate()?;
    if config.n_jobs == 0 {
        return domain("n_jobs must be at least 1");
    }
    if !(0.0..1.0).contains(&config.warmup_fraction) {
        return domain(format!("warmup fraction must lie in [0, 1), got {}", config.warmup_fraction));
    }
    let warmup_jobs = config.warmup_jobs();

    let mut events = EventQueue::default();
    let mut station_a = Station::new(Branch::A, params.n_a);
    let mut station_b = Station::new(Branch::B, params.n_b);
    let mut sync = Synchronizer::new();

    let retained = config.n_jobs - warmup_jobs;
    let mut samples = Vec::with_capacity(if config.keep_samples { retained as usize } else { 0 });
    let mut sync_sum = 0.0;
    let mut steps = Vec::new();
    let mut window_start: Option<f64> = None;
    let mut area = 0.0;
    let mut last_event = 0.0_f64;
    let mut max_memory = 0u32;
    let mut next_id = 0u64;

    events.schedule(source.interarrival(), EventKind::Fork);
    while let Some(ev) = events.pop() {
        let now = ev.time;
        match ev.kind {
            EventKind::Fork => {
                let id = next_id;
                next_id += 1;
                if id == warmup_jobs {
                    window_start = Some(now);
                }
                for (station, branch) in [(&mut station_a, Branch::A), (&mut station_b, Branch::B)] {
                    let service = source.service(branch);
                    station.arrive(Job { id, fork_time: now, branch }, service, now, &mut events);
                }
                if next_id < config.n_jobs {
                    events.schedule(now + source.interarrival(), EventKind::Fork);
                }
            }
            EventKind::Departure(job) => {
                match job.branch {
                    Branch::A => station_a.depart(now, &mut events),
                    Branch::B => station_b.depart(now, &mut events),
                }
                if let Some(start) = window_start {
                    area += sync.len() as f64 * (now - last_event.max(start));
                }
                last_event = now;
                let arrival = SyncArrival { id: job.id, branch: job.branch, fork_time: job.fork_time, time: now };
                if let Some(pair) = sync.step(arrival)? {
                    if pair.id >= warmup_jobs {
                        let sample = SojournSample::from(pair);
                        sync_sum += sample.t_sync;
                        if config.keep_samples {
                            samples.push(sample);
                        }
                    }
                }
                let count = sync.len() as u32;
                max_memory = max_memory.max(count);
                if config.keep_trace {
                    steps.push(OccupancyStep { time: now, count });
                }
            }
        }
    }
    debug_assert!(sync.is_empty(), "pairs left unmatched at drain");

    let window_start = window_start.unwrap_or(last_event);
    let span = last_event - window_start;
    let sync_occupancy_mean = if span > 0.0 { area / span } else { 0.0 };
    let t_mean_emp = if retained > 0 { sync_sum / retained as f64 } else { 0.0 };
    Ok(SimResult {
        params: *params,
        config: *config,
        samples,
        n_retained: retained,
        t_mean_emp,
        sync_occupancy_mean,
        max_memory,
        end_time: last_event,
        trace: OccupancyTrace { start: window_start, steps },
    })
}
