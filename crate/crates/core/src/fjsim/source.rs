use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic::{Branch, NetworkParams};

/// Supplies the random durations that drive a simulation run.
pub trait TimeSource {
    /// Time from the previous fork to the next one.
    fn interarrival(&mut self) -> f64;
    /// Service requirement of the next job entering `branch`.
    fn service(&mut self, branch: Branch) -> f64;
}

const ARRIVAL_STREAM: u64 = 0;
const BRANCH_A_STREAM: u64 = 1;
const BRANCH_B_STREAM: u64 = 2;

/// Inverse-transform exponential draw; monotone in the uniform.
fn exp_draw(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(-u).ln_1p() / rate
}

/// Exponential durations from three independent ChaCha8 streams of one seed:
/// stream 0 for arrivals, 1 for branch `a` services, 2 for branch `b`.
#[derive(Debug, Clone)]
pub struct ExpSource {
    lambda: f64,
    mu_a: f64,
    mu_b: f64,
    arrivals: ChaCha8Rng,
    branch_a: ChaCha8Rng,
    branch_b: ChaCha8Rng,
}

impl ExpSource {
    pub fn new(params: &NetworkParams, seed: u64) -> Self {
        let stream = |s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            rng
        };
        ExpSource {
            lambda: params.lambda,
            mu_a: params.mu_a,
            mu_b: params.mu_b,
            arrivals: stream(ARRIVAL_STREAM),
            branch_a: stream(BRANCH_A_STREAM),
            branch_b: stream(BRANCH_B_STREAM),
        }
    }
}

impl TimeSource for ExpSource {
    fn interarrival(&mut self) -> f64 {
        exp_draw(&mut self.arrivals, self.lambda)
    }

    fn service(&mut self, branch: Branch) -> f64 {
        match branch {
            Branch::A => exp_draw(&mut self.branch_a, self.mu_a),
            Branch::B => exp_draw(&mut self.branch_b, self.mu_b),
        }
    }
}

/// Replays fixed sequences of durations; panics when a sequence runs out.
#[derive(Debug, Clone, Default)]
pub struct ScriptedSource {
    pub interarrivals: std::collections::VecDeque<f64>,
    pub services_a: std::collections::VecDeque<f64>,
    pub services_b: std::collections::VecDeque<f64>,
}

impl ScriptedSource {
    pub fn new(interarrivals: &[f64], services_a: &[f64], services_b: &[f64]) -> Self {
        ScriptedSource {
            interarrivals: interarrivals.iter().copied().collect(),
            services_a: services_a.iter().copied().collect(),
            services_b: services_b.iter().copied().collect(),
        }
    }
}

impl TimeSource for ScriptedSource {
    fn interarrival(&mut self) -> f64 {
        self.interarrivals.pop_front().expect("scripted interarrivals exhausted")
    }

    fn service(&mut self, branch: Branch) -> f64 {
        let q = match branch {
            Branch::A => &mut self.services_a,
            Branch::B => &mut self.services_b,
        };
        q.pop_front().expect("scripted service times exhausted")
    }
}
