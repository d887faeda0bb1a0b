//! Closed-form synchronizer wait distributions under the assumption that the
//! two branch sojourn times are independent.
//!
//! Every density here is an [`ExpMixture`]. The pipeline is
//! [`branch_sojourn_density`] per branch, [`cross_convolve`] to get the
//! two-sided density of `t_a - t_b`, then [`fold_to_waiting_density`] to get the
//! density of `|t_a - t_b|`.

mod erlang;
mod mixture;
mod params;

pub use erlang::{branch_occupancy, erlang_idle_prob, queue_nonempty_prob, BranchOccupancy};
pub use mixture::{geometric_grid, ExpMixture, Side, Support, Term, QUANTILE_CDF_TOL};
pub use params::{utilization, Branch, NetworkParams, Servers};

use crate::error::{domain, Result};
use params::check_branch;

/// Relative nudge applied to the queueing rate `μN - λ` when it collides with
/// the service rate `μ`, i.e. when `λ = μ(N - 1)`. Roughly `sqrt(f64::EPSILON)`,
/// which balances truncation against cancellation of the two coefficients.
pub const RATE_COLLISION_NUDGE: f64 = 1.5e-8;

/// Sojourn-time density of one M/M/N (or M/M/∞) FIFO branch.
///
/// For finite `N` this is
/// `μ(1 + p̃μ/(r-μ)) e^{-μt} - p̃μr/(r-μ) e^{-rt}` with `r = μN - λ` and `p̃`
/// the Erlang-C probability. At `N = 1` the `μ` term cancels and the result
/// is exactly `(μ-λ) e^{-(μ-λ)t}`. When `r` is within a relative
/// [`RATE_COLLISION_NUDGE`] of `μ` it is moved that far away from `μ`; the
/// result stays normalized and differs from the limiting `t e^{-μt}` form by
/// about 1e-8 absolute, in density and in CDF.
pub fn branch_sojourn_density(lambda: f64, mu: f64, servers: Servers) -> Result<ExpMixture> {
    Ok(branch_model(lambda, mu, servers)?.density()?)
}

/// A branch sojourn time as a service time `Exp(μ)` plus, with probability
/// `p̃`, an `Exp(r)` queueing delay.
#[derive(Debug, Clone, Copy)]
struct BranchModel {
    mu: f64,
    p_queue: f64,
    queue_rate: f64,
}

impl BranchModel {
    fn density(&self) -> Result<ExpMixture> {
        let BranchModel { mu, p_queue, queue_rate } = *self;
        if p_queue == 0.0 {
            return ExpMixture::exponential(mu);
        }
        let gap = queue_rate - mu;
        let service_coeff = mu * (1.0 + p_queue * mu / gap);
        let queue_coeff = -p_queue * mu * queue_rate / gap;
        ExpMixture::one_sided([(service_coeff, mu), (queue_coeff, queue_rate)])
    }

    /// Closed-form Laplace transform. Unlike summing the mixture terms this
    /// stays accurate when the two rates nearly coincide.
    fn laplace(&self, s: f64) -> f64 {
        let BranchModel { mu, p_queue, queue_rate } = *self;
        mu / (s + mu) * (1.0 - p_queue + p_queue * queue_rate / (s + queue_rate))
    }
}

fn branch_model(lambda: f64, mu: f64, servers: Servers) -> Result<BranchModel> {
    check_branch(lambda, mu, servers)?;
    let n = match servers {
        Servers::Infinite => return Ok(BranchModel { mu, p_queue: 0.0, queue_rate: mu }),
        Servers::Finite(1) => {
            let rate = mu - lambda;
            return Ok(BranchModel { mu: rate, p_queue: 0.0, queue_rate: rate });
        }
        Servers::Finite(n) => n,
    };
    let p_queue = queue_nonempty_prob(lambda, mu, servers)?;
    let mut queue_rate = mu * f64::from(n) - lambda;
    let gap = queue_rate - mu;
    if gap.abs() < RATE_COLLISION_NUDGE * mu {
        let sign = if gap < 0.0 { -1.0 } else { 1.0 };
        queue_rate = mu * (1.0 + sign * RATE_COLLISION_NUDGE);
    }
    Ok(BranchModel { mu, p_queue, queue_rate })
}

/// Density of `t_a - t_b` for independent `t_a ~ fa`, `t_b ~ fb`:
/// `f̃(s) = ∫ fb(τ) fa(τ + s) dτ`.
///
/// Each term `(A, a)` of `fa` contributes `A L_b(a) e^{-a s} θ(s)` and each
/// term `(B, b)` of `fb` contributes `B L_a(b) e^{b s} θ(-s)`, where `L` is
/// the Laplace transform.
pub fn cross_convolve(fa: &ExpMixture, fb: &ExpMixture) -> Result<ExpMixture> {
    if !fa.is_one_sided() || !fb.is_one_sided() {
        return domain("cross_convolve takes two one-sided densities");
    }
    convolve_with_transforms(
        fa,
        |s| fa.laplace_unchecked(s),
        fb,
        |s| fb.laplace_unchecked(s),
    )
}

fn convolve_with_transforms(
    fa: &ExpMixture,
    la: impl Fn(f64) -> f64,
    fb: &ExpMixture,
    lb: impl Fn(f64) -> f64,
) -> Result<ExpMixture> {
    let right = fa.terms().iter().map(|t| Term::right(t.coeff * lb(t.rate), t.rate));
    let left = fb.terms().iter().map(|t| Term::left(t.coeff * la(t.rate), t.rate));
    ExpMixture::two_sided(right.chain(left).collect::<Vec<_>>())
}

/// Density of `|X|` on `[0, ∞)` from the two-sided density of `X`:
/// `f(t) = f̃(t) + f̃(-t)`.
pub fn fold_to_waiting_density(two_sided: &ExpMixture) -> Result<ExpMixture> {
    if two_sided.is_one_sided() {
        return domain("fold_to_waiting_density takes a two-sided density");
    }
    ExpMixture::one_sided(two_sided.terms().iter().map(|t| (t.coeff, t.rate)))
}

/// Branch-pair density of `t_a - t_b` for a network.
pub fn difference_density(params: &NetworkParams) -> Result<ExpMixture> {
    params.validate()?;
    let ma = branch_model(params.lambda, params.mu_a, params.n_a)?;
    let mb = branch_model(params.lambda, params.mu_b, params.n_b)?;
    convolve_with_transforms(&ma.density()?, |s| ma.laplace(s), &mb.density()?, |s| mb.laplace(s))
}

/// Density `f(t)` of the synchronizer wait of the first partner.
pub fn waiting_density(params: &NetworkParams) -> Result<ExpMixture> {
    fold_to_waiting_density(&difference_density(params)?)
}

/// Mean of a one-sided density, `Σ c / r²`.
pub fn mixture_mean(f: &ExpMixture) -> Result<f64> {
    if !f.is_one_sided() {
        return domain("mixture_mean takes a one-sided density");
    }
    Ok(f.mean())
}

pub fn mixture_cdf(f: &ExpMixture, t: f64) -> Result<f64> {
    f.cdf(t)
}

pub fn mixture_quantile(f: &ExpMixture, p: f64) -> Result<f64> {
    f.quantile(p)
}

/// Mean synchronizer wait `T̄` under the independence approximation.
pub fn mean_wait(params: &NetworkParams) -> Result<f64> {
    mixture_mean(&waiting_density(params)?)
}

/// Little's law: mean number of first partners held in the synchronizer.
pub fn little_occupancy(lambda: f64, mean_wait: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(mean_wait >= 0.0) {
        return domain(format!(
            "little_occupancy needs lambda > 0 and mean wait >= 0, got {lambda}, {mean_wait}"
        ));
    }
    Ok(lambda * mean_wait)
}
