//! Independent reference computations shared by the integration tests. None
//! of these use the library's closed forms.

#![allow(dead_code)]

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use fjsync::{NetworkParams, Servers};
use gauss_quad::GaussLegendre;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `∫_a^b f` by 20-point Gauss-Legendre, bisecting each piece until it
/// agrees with the sum of its halves to about 1e-13 relative.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    bisecting(&f, a, b, gl(&f, a, b), 40)
}

fn gl(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(20).unwrap())).integrate(a, b, f)
}

fn bisecting(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, depth: u32) -> f64 {
    let mid = 0.5 * (a + b);
    let (left, right) = (gl(f, a, mid), gl(f, mid, b));
    let halves = left + right;
    if depth == 0 || (halves - whole).abs() <= 1e-13 * halves.abs() + 1e-22 {
        return halves;
    }
    bisecting(f, a, mid, left, depth - 1) + bisecting(f, mid, b, right, depth - 1)
}

/// Idle probability and probability of waiting of an M/M/N queue, from the
/// birth-death chain truncated at `states` levels.
pub fn birth_death_occupancy(lambda: f64, mu: f64, n: u32, states: usize) -> (f64, f64) {
    let mut weight = 1.0;
    let mut total = 1.0;
    let mut busy = 0.0;
    for k in 1..states {
        weight *= lambda / (mu * f64::from(n.min(k as u32)));
        total += weight;
        if k as u32 >= n {
            busy += weight;
        }
    }
    (1.0 / total, busy / total)
}

/// One branch described by its sojourn ingredients: a service density
/// `μ e^{-μx}` and a queueing-delay distribution `1 - p̃ e^{-r x}`.
#[derive(Debug, Clone, Copy)]
pub struct BranchOracle {
    pub mu: f64,
    pub p_wait: f64,
    pub queue_rate: f64,
}

impl BranchOracle {
    pub fn new(lambda: f64, mu: f64, servers: Servers) -> Self {
        match servers {
            Servers::Infinite => BranchOracle { mu, p_wait: 0.0, queue_rate: 1.0 },
            Servers::Finite(n) => {
                let (_, p_wait) = birth_death_occupancy(lambda, mu, n, 10_000);
                BranchOracle { mu, p_wait, queue_rate: mu * f64::from(n) - lambda }
            }
        }
    }

    /// `d/dt ∫_0^t v(ξ) W(t-ξ) dξ = v(t) W(0) + ∫_0^t v(ξ) W'(t-ξ) dξ`.
    pub fn pdf(&self, t: f64) -> f64 {
        let BranchOracle { mu, p_wait, queue_rate } = *self;
        let v = |x: f64| mu * (-mu * x).exp();
        let head = v(t) * (1.0 - p_wait);
        if p_wait == 0.0 || t == 0.0 {
            return head;
        }
        let dw = |x: f64| p_wait * queue_rate * (-queue_rate * x).exp();
        head + integrate(|xi| v(xi) * dw(t - xi), 0.0, t)
    }

    /// Slowest decay rate of the density.
    pub fn min_rate(&self) -> f64 {
        if self.p_wait == 0.0 {
            self.mu
        } else {
            self.mu.min(self.queue_rate)
        }
    }
}

/// Density of `|t_a - t_b|` for independent branches, by numerical
/// convolution and folding: `∫ fa(τ+t) fb(τ) dτ + ∫ fb(τ+t) fa(τ) dτ`.
pub fn waiting_pdf_numeric(a: &BranchOracle, b: &BranchOracle, t: f64) -> f64 {
    let upper = 60.0 / a.min_rate().min(b.min_rate());
    let right = integrate(|tau| a.pdf(tau + t) * b.pdf(tau), 0.0, upper);
    let left = integrate(|tau| b.pdf(tau + t) * a.pdf(tau), 0.0, upper);
    right + left
}

pub fn oracles(p: &NetworkParams) -> (BranchOracle, BranchOracle) {
    (BranchOracle::new(p.lambda, p.mu_a, p.n_a), BranchOracle::new(p.lambda, p.mu_b, p.n_b))
}

/// Server counts mixing all three branch kinds; `None` is M/M/∞.
pub const MIXED_SERVERS: [Option<u32>; 6] = [Some(1), Some(2), Some(3), Some(5), Some(8), None];

/// `count` stable networks drawn from a fixed seed: λ in [0.2, 3], server
/// counts from `choices`, utilizations in [0.05, 0.95].
pub fn random_networks(count: usize, seed: u64, choices: &[Option<u32>]) -> Vec<NetworkParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let lambda = rng.random_range(0.2..3.0);
            let mut branch = || {
                let n = choices[rng.random_range(0..choices.len())];
                let psi: f64 = rng.random_range(0.05..0.95);
                match n {
                    Some(n) => (Servers::Finite(n), lambda / (f64::from(n) * psi)),
                    None => (Servers::Infinite, lambda / psi),
                }
            };
            let (n_a, mu_a) = branch();
            let (n_b, mu_b) = branch();
            NetworkParams::new(lambda, n_a, mu_a, n_b, mu_b).expect("stable by construction")
        })
        .collect()
}

/// Zero followed by `points - 1` geometrically spaced abscissae up to `upper`.
pub fn sup_norm_grid(upper: f64, points: usize) -> Vec<f64> {
    let lo = upper * 1e-5;
    let ratio = (upper / lo).powf(1.0 / (points - 2) as f64);
    std::iter::once(0.0).chain((0..points - 1).map(|i| lo * ratio.powi(i as i32))).collect()
}
