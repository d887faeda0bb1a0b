//! Pearson chi-square test of simulated synchronizer waits against the
//! analytic density, with equal-probability bins.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::analytic::{waiting_density, ExpMixture, NetworkParams};
use crate::error::{domain, Result};
use crate::fixtures::VerdictCell;
use crate::fjsim::run_simulation;
use crate::stats;

pub const DEFAULT_BINS: usize = 30;
pub const DEFAULT_ALPHA: f64 = 0.01;
/// Tabulated critical value for 29 degrees of freedom at α = 0.01.
pub const TABULATED_CRITICAL: f64 = 49.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CriticalMode {
    /// 49.6 for 30 bins at α = 0.01, the exact quantile otherwise.
    #[default]
    Tabulated,
    /// Always the exact chi-square quantile.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareOptions {
    pub bins: usize,
    pub alpha: f64,
    pub critical: CriticalMode,
}

impl Default for ChiSquareOptions {
    fn default() -> Self {
        ChiSquareOptions { bins: DEFAULT_BINS, alpha: DEFAULT_ALPHA, critical: CriticalMode::Tabulated }
    }
}

/// Upper-α critical value of the chi-square distribution with `bins - 1`
/// degrees of freedom.
pub fn critical_value(bins: usize, alpha: f64, mode: CriticalMode) -> Result<f64> {
    if bins < 2 {
        return domain("need at least two bins");
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    if mode == CriticalMode::Tabulated && bins == DEFAULT_BINS && alpha == DEFAULT_ALPHA {
        return Ok(TABULATED_CRITICAL);
    }
    let dist = ChiSquared::new((bins - 1) as f64).map_err(|e| crate::Error::Domain(e.to_string()))?;
    Ok(dist.inverse_cdf(1.0 - alpha))
}

/// Inner bin edges: the `k / bins` quantiles of the hypothesis, `k = 1..bins`.
pub fn bin_edges(hypothesis: &ExpMixture, bins: usize) -> Result<Vec<f64>> {
    (1..bins).map(|k| hypothesis.quantile(k as f64 / bins as f64)).collect()
}

/// Result of one goodness-of-fit check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub chi2: f64,
    pub bins: Vec<u64>,
    pub critical: f64,
    pub alpha: f64,
    pub accepted: bool,
    pub n_samples: usize,
    /// `(T̄ - T̄_emp) / T̄`, when the samples come from a simulated network.
    pub delta_t_rel: Option<f64>,
    pub t_mean: Option<f64>,
    pub t_mean_emp: Option<f64>,
    pub params: Option<NetworkParams>,
    pub n_jobs: Option<u64>,
    pub seed: Option<u64>,
}

/// Pearson statistic `Σ (O_k - E)² / E` with `E = n / bins`.
pub fn chi_square_test(samples: &[f64], hypothesis: &ExpMixture, opts: &ChiSquareOptions) -> Result<GofReport> {
    if opts.bins < 2 {
        return domain("need at least two bins");
    }
    if samples.len() < 10 * opts.bins {
        return domain(format!(
            "chi-square test with {} bins needs at least {} samples, got {}",
            opts.bins,
            10 * opts.bins,
            samples.len()
        ));
    }
    hypothesis.check_density(1_000)?;
    let critical = critical_value(opts.bins, opts.alpha, opts.critical)?;
    let edges = bin_edges(hypothesis, opts.bins)?;
    let mut counts = vec![0u64; opts.bins];
    for &x in samples {
        counts[edges.partition_point(|&e| e <= x)] += 1;
    }
    let expected = samples.len() as f64 / opts.bins as f64;
    let chi2 = counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum::<f64>();
    Ok(GofReport {
        chi2,
        bins: counts,
        critical,
        alpha: opts.alpha,
        accepted: chi2 <= critical,
        n_samples: samples.len(),
        delta_t_rel: None,
        t_mean: None,
        t_mean_emp: None,
        params: None,
        n_jobs: None,
        seed: None,
    })
}

/// Simulates the network and tests the observed synchronizer waits against
/// the analytic density built under the independence approximation.
pub fn hypothesis1_verdict(params: &NetworkParams, n_jobs: u64, seed: u64) -> Result<GofReport> {
    hypothesis1_verdict_with(params, n_jobs, seed, &ChiSquareOptions::default())
}

pub fn hypothesis1_verdict_with(
    params: &NetworkParams,
    n_jobs: u64,
    seed: u64,
    opts: &ChiSquareOptions,
) -> Result<GofReport> {
    let f = waiting_density(params)?;
    let sim = run_simulation(params, n_jobs, seed, 0.0)?;
    let mut report = chi_square_test(&sim.t_sync(), &f, opts)?;
    let t_mean = f.mean();
    report.t_mean = Some(t_mean);
    report.t_mean_emp = Some(sim.t_mean_emp);
    report.delta_t_rel = Some((t_mean - sim.t_mean_emp) / t_mean);
    report.params = Some(*params);
    report.n_jobs = Some(n_jobs);
    report.seed = Some(seed);
    Ok(report)
}

/// A finite-server grid point given by utilizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub n_a: u32,
    pub n_b: u32,
    pub psi_a: f64,
    pub psi_b: f64,
}

/// Majority verdict for one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub n_a: u32,
    pub n_b: u32,
    pub psi_a: f64,
    pub psi_b: f64,
    /// Median statistic over seeds.
    pub chi2: f64,
    pub accepted: bool,
    /// Mean of `(T̄ - T̄_emp) / T̄` over seeds.
    pub delta_t_rel: f64,
    #[serde(skip)]
    pub votes_accept: usize,
    #[serde(skip)]
    pub runs: usize,
}

/// Runs every seed at one point and takes the majority verdict.
pub fn majority_verdict(params: &NetworkParams, n_jobs: u64, seeds: &[u64]) -> Result<(Vec<GofReport>, bool)> {
    if seeds.is_empty() {
        return domain("need at least one seed");
    }
    let reports = seeds
        .par_iter()
        .map(|&s| hypothesis1_verdict(params, n_jobs, s))
        .collect::<Result<Vec<_>>>()?;
    let votes = reports.iter().filter(|r| r.accepted).count();
    Ok((reports, 2 * votes > seeds.len()))
}

/// Accept/reject table over a parameter grid, majority over `seeds` at each
/// point. Rows come back in the order of `points`.
pub fn validity_region_scan(points: &[RegionPoint], lambda: f64, n_jobs: u64, seeds: &[u64]) -> Result<Vec<RegionRow>> {
    points
        .par_iter()
        .map(|pt| {
            let params = NetworkParams::from_utilization(lambda, pt.n_a, pt.psi_a, pt.n_b, pt.psi_b)?;
            let (reports, accepted) = majority_verdict(&params, n_jobs, seeds)?;
            let chi2: Vec<f64> = reports.iter().map(|r| r.chi2).collect();
            let dt: Vec<f64> = reports.iter().filter_map(|r| r.delta_t_rel).collect();
            Ok(RegionRow {
                n_a: pt.n_a,
                n_b: pt.n_b,
                psi_a: pt.psi_a,
                psi_b: pt.psi_b,
                chi2: stats::median(&chi2),
                accepted,
                delta_t_rel: stats::mean(&dt),
                votes_accept: reports.iter().filter(|r| r.accepted).count(),
                runs: reports.len(),
            })
        })
        .collect()
}

/// Allowed gap, in percentage points, between a simulated and a published
/// `ΔT̄/T̄`: 5 points for published values of 5% and above, 2 points below.
pub fn delta_t_tolerance_pct(published_pct: f64) -> f64 {
    if published_pct >= 5.0 {
        5.0
    } else {
        2.0
    }
}

/// A published cell next to its reproduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellComparison {
    pub lambda: f64,
    pub n_a: u32,
    pub n_b: u32,
    pub psi_a: f64,
    pub psi_b: f64,
    pub paper_chi2: f64,
    pub paper_rejected: bool,
    /// Median statistic over seeds.
    pub chi2: f64,
    /// Majority verdict over seeds.
    pub rejected: bool,
    pub votes_reject: usize,
    pub runs: usize,
    pub verdict_match: bool,
    pub paper_delta_t_pct: f64,
    /// Mean over seeds.
    pub delta_t_pct: f64,
    pub delta_t_match: bool,
}

/// Reruns each published cell with `n_jobs` per seed and compares verdicts
/// and mean-wait deviations.
pub fn compare_with_published(cells: &[VerdictCell], n_jobs: u64, seeds: &[u64]) -> Result<Vec<CellComparison>> {
    cells
        .par_iter()
        .map(|cell| {
            let (reports, accepted) = majority_verdict(&cell.params()?, n_jobs, seeds)?;
            let chi2: Vec<f64> = reports.iter().map(|r| r.chi2).collect();
            let dt: Vec<f64> = reports.iter().filter_map(|r| r.delta_t_rel).map(|d| 100.0 * d).collect();
            let delta_t_pct = stats::mean(&dt);
            Ok(CellComparison {
                lambda: cell.lambda,
                n_a: cell.n_a,
                n_b: cell.n_b,
                psi_a: cell.psi_a,
                psi_b: cell.psi_b,
                paper_chi2: cell.chi2,
                paper_rejected: cell.rejected,
                chi2: stats::median(&chi2),
                rejected: !accepted,
                votes_reject: reports.iter().filter(|r| !r.accepted).count(),
                runs: reports.len(),
                verdict_match: accepted != cell.rejected,
                paper_delta_t_pct: cell.delta_t_pct,
                delta_t_pct,
                delta_t_match: (delta_t_pct - cell.delta_t_pct).abs() <= delta_t_tolerance_pct(cell.delta_t_pct),
            })
        })
        .collect()
}
