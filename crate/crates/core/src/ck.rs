//! Stationary joint queue-length distribution of the `{M/M/1; M/M/1}`
//! fork-join network.
//!
//! The state is `(q_a, q_b)`. A fork adds one job to each branch; each branch
//! serves at its own rate. The balance equations have no known closed form,
//! so they are solved by a relaxed Jacobi-style fixed-point iteration on a
//! truncated `n × n` grid, with probability outside the grid taken as zero
//! and the grid renormalized after every sweep.
//!
//! The plain (`γ = 1`) sweep is periodic with period three (a fork moves
//! `q_a + q_b` up by two, a departure down by one), so oscillating error
//! components are removed by interleaving damped `γ = 0.1` phases.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{NetworkParams, Servers};
use crate::error::{domain, Result};

/// Rates of the single-server network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CkParams {
    pub lambda: f64,
    pub mu_a: f64,
    pub mu_b: f64,
}

impl CkParams {
    pub fn new(lambda: f64, mu_a: f64, mu_b: f64) -> Result<Self> {
        let p = CkParams { lambda, mu_a, mu_b };
        p.validate()?;
        Ok(p)
    }

    /// Rates with the given utilizations, scaled so that `λ + μ_a + μ_b = 1`.
    ///
    /// The stationary distribution depends only on the utilizations; the unit
    /// total rate keeps balance-equation residuals on the same scale as the
    /// iteration displacement.
    pub fn from_utilization(psi_a: f64, psi_b: f64) -> Result<Self> {
        if !(psi_a > 0.0 && psi_a < 1.0 && psi_b > 0.0 && psi_b < 1.0) {
            return domain(format!("utilizations must lie in (0, 1), got {psi_a}, {psi_b}"));
        }
        let lambda = 1.0 / (1.0 + 1.0 / psi_a + 1.0 / psi_b);
        Self::new(lambda, lambda / psi_a, lambda / psi_b)
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [(self.lambda, "lambda"), (self.mu_a, "mu_a"), (self.mu_b, "mu_b")] {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.psi_a() >= 1.0 || self.psi_b() >= 1.0 {
            return domain(format!(
                "unstable network: psi_a={}, psi_b={}",
                self.psi_a(),
                self.psi_b()
            ));
        }
        Ok(())
    }

    pub fn psi_a(&self) -> f64 {
        self.lambda / self.mu_a
    }

    pub fn psi_b(&self) -> f64 {
        self.lambda / self.mu_b
    }
}

impl TryFrom<&NetworkParams> for CkParams {
    type Error = crate::Error;

    fn try_from(p: &NetworkParams) -> Result<Self> {
        if p.n_a != Servers::Finite(1) || p.n_b != Servers::Finite(1) {
            return domain("the joint-distribution solver covers single-server branches only");
        }
        CkParams::new(p.lambda, p.mu_a, p.mu_b)
    }
}

/// Truncated joint distribution `P(q_a, q_b)`, `0 <= q_a, q_b < n`, row-major
/// in `q_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointGrid {
    n: usize,
    probs: Vec<f64>,
    params: CkParams,
}

impl JointGrid {
    pub fn new(params: CkParams, n: usize, probs: Vec<f64>) -> Result<Self> {
        params.validate()?;
        if n == 0 || probs.len() != n * n {
            return domain(format!("grid of size {n} needs {} entries, got {}", n * n, probs.len()));
        }
        if let Some(bad) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return domain(format!("grid entries must be finite and non-negative, found {bad}"));
        }
        Ok(JointGrid { n, probs, params })
    }

    /// Independent geometric marginals, `(1-ψ_a)ψ_a^{q_a} (1-ψ_b)ψ_b^{q_b}`.
    pub fn product_form(params: CkParams, n: usize) -> Result<Self> {
        params.validate()?;
        let pa = geometric_marginal(params.psi_a(), n);
        let pb = geometric_marginal(params.psi_b(), n);
        let probs = pa.iter().flat_map(|x| pb.iter().map(move |y| x * y)).collect();
        JointGrid::new(params, n, probs)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> CkParams {
        self.params
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, qa: usize, qb: usize) -> f64 {
        if qa < self.n && qb < self.n {
            self.probs[qa * self.n + qb]
        } else {
            0.0
        }
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn marginal_a(&self) -> Vec<f64> {
        self.probs.chunks(self.n).map(|row| row.iter().sum()).collect()
    }

    pub fn marginal_b(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n];
        for row in self.probs.chunks(self.n) {
            for (acc, p) in m.iter_mut().zip(row) {
                *acc += p;
            }
        }
        m
    }

    /// Mass on the last row and column of the grid.
    pub fn boundary_mass(&self) -> f64 {
        let last = self.n - 1;
        let row: f64 = (0..self.n).map(|qb| self.get(last, qb)).sum();
        let col: f64 = (0..last).map(|qa| self.get(qa, last)).sum();
        row + col
    }
}

/// `(1-ψ)ψ^m` for `m < n`.
pub fn geometric_marginal(psi: f64, n: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(n);
    let mut p = 1.0 - psi;
    for _ in 0..n {
        v.push(p);
        p *= psi;
    }
    v
}

/// Largest absolute violation of the stationary balance equations over the
/// states whose equations reference only in-grid neighbours
/// (`q_a, q_b <= n - 2`).
pub fn ck_residual(grid: &JointGrid) -> f64 {
    let CkParams { lambda, mu_a, mu_b } = grid.params;
    let p = |a: usize, b: usize| grid.get(a, b);
    let mut worst = 0.0_f64;
    for qa in 0..grid.n.saturating_sub(1) {
        for qb in 0..grid.n.saturating_sub(1) {
            let inflow_dep = mu_a * p(qa + 1, qb) + mu_b * p(qa, qb + 1);
            let r = match (qa, qb) {
                (0, 0) => lambda * p(0, 0) - inflow_dep,
                (0, _) => (lambda + mu_b) * p(0, qb) - inflow_dep,
                (_, 0) => (lambda + mu_a) * p(qa, 0) - inflow_dep,
                _ => (lambda + mu_a + mu_b) * p(qa, qb) - lambda * p(qa - 1, qb - 1) - inflow_dep,
            };
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// Convergence measures of an iterate.
///
/// `d1` and `d2` are the L1 distances between the grid marginals and the
/// exact geometric branch marginals; `d3` is the L1 displacement of the last
/// sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviations {
    pub d1: f64,
    pub d2: f64,
}

pub fn marginal_deviations(grid: &JointGrid) -> Deviations {
    let pa = geometric_marginal(grid.params.psi_a(), grid.n);
    let pb = geometric_marginal(grid.params.psi_b(), grid.n);
    let l1 = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| (u - v).abs()).sum();
    Deviations { d1: l1(&pa, &grid.marginal_a()), d2: l1(&pb, &grid.marginal_b()) }
}

/// Statistics of one sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepStats {
    /// `Σ |P_{n+1} - P_n|` after normalization.
    pub d3: f64,
    /// `max |P_{n+1} - P_n|` after normalization.
    pub max_change: f64,
    /// Grid sum before normalization.
    pub raw_total: f64,
}

/// Stateful iterator over relaxed sweeps.
#[derive(Debug, Clone)]
pub struct Sweeper {
    grid: JointGrid,
    scratch: Vec<f64>,
}

impl Sweeper {
    pub fn new(start: JointGrid) -> Self {
        let scratch = vec![0.0; start.probs.len()];
        Sweeper { grid: start, scratch }
    }

    pub fn grid(&self) -> &JointGrid {
        &self.grid
    }

    pub fn into_grid(self) -> JointGrid {
        self.grid
    }

    /// One relaxed sweep `P' = (1-γ)P + γ T(P)`, followed by normalization.
    pub fn sweep(&mut self, gamma: f64) -> SweepStats {
        let n = self.grid.n;
        let CkParams { lambda, mu_a, mu_b } = self.grid.params;
        let prev = &self.grid.probs;
        let next = &mut self.scratch;
        let keep = 1.0 - gamma;
        let w_origin = gamma / lambda;
        let w_edge_a = gamma / (lambda + mu_b); // q_a = 0, q_b > 0
        let w_edge_b = gamma / (lambda + mu_a); // q_a > 0, q_b = 0
        let w_inner = gamma / (lambda + mu_a + mu_b);
        let zeros = vec![0.0; n];

        for qa in 0..n {
            let row = &prev[qa * n..(qa + 1) * n];
            let below = if qa + 1 < n { &prev[(qa + 1) * n..(qa + 2) * n] } else { &zeros[..] };
            let out = &mut next[qa * n..(qa + 1) * n];
            let right = |qb: usize| if qb + 1 < n { row[qb + 1] } else { 0.0 };
            if qa == 0 {
                out[0] = keep * row[0] + w_origin * (mu_a * below[0] + mu_b * right(0));
                for qb in 1..n {
                    out[qb] = keep * row[qb] + w_edge_a * (mu_a * below[qb] + mu_b * right(qb));
                }
            } else {
                let above = &prev[(qa - 1) * n..qa * n];
                out[0] = keep * row[0] + w_edge_b * (mu_a * below[0] + mu_b * right(0));
                let last = n - 1;
                for qb in 1..last {
                    out[qb] = keep * row[qb]
                        + w_inner * (lambda * above[qb - 1] + mu_a * below[qb] + mu_b * row[qb + 1]);
                }
                if last >= 1 {
                    out[last] = keep * row[last]
                        + w_inner * (lambda * above[last - 1] + mu_a * below[last]);
                }
            }
        }

        let raw_total: f64 = next.iter().sum();
        let scale = 1.0 / raw_total;
        let mut d3 = 0.0;
        let mut max_change = 0.0_f64;
        for (x, old) in next.iter_mut().zip(prev) {
            *x *= scale;
            let d = (*x - old).abs();
            d3 += d;
            max_change = max_change.max(d);
        }
        std::mem::swap(&mut self.grid.probs, &mut self.scratch);
        SweepStats { d3, max_change, raw_total }
    }
}

/// Relaxation schedule: plain sweeps until `D_3` stalls, then a fixed number
/// of damped sweeps, then plain sweeps again.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSchedule {
    pub plain_gamma: f64,
    pub damped_gamma: f64,
    pub damped_iterations: u64,
    /// `D_3` is considered stalled when it improved by less than
    /// `stall_rel_improvement` (relative) over this many plain sweeps.
    pub stall_window: u64,
    pub stall_rel_improvement: f64,
}

impl Default for GammaSchedule {
    fn default() -> Self {
        GammaSchedule {
            plain_gamma: 1.0,
            damped_gamma: 0.1,
            damped_iterations: 1_000,
            stall_window: 100,
            stall_rel_improvement: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    /// Converged once a plain sweep moves the grid by less than this (L1).
    pub d3: f64,
    pub max_iterations: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { d3: 1e-11, max_iterations: 5_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub grid_size: usize,
    pub schedule: GammaSchedule,
    pub stop: StopRule,
    /// Boundary mass above which the truncation is flagged.
    pub tail_mass_warning: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            grid_size: 190,
            schedule: GammaSchedule::default(),
            stop: StopRule::default(),
            tail_mass_warning: 1e-6,
        }
    }
}

/// A run of consecutive sweeps at one relaxation parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPhase {
    pub gamma: f64,
    pub first_iteration: u64,
    pub iterations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiag {
    pub d1: f64,
    pub d2: f64,
    /// Displacement of the last plain sweep.
    pub d3: f64,
    pub iterations: u64,
    pub converged: bool,
    pub residual: f64,
    pub boundary_mass: f64,
    pub truncation_warning: bool,
    pub gamma_history: Vec<GammaPhase>,
}

/// Solves for the stationary joint distribution starting from the
/// product-form guess.
///
/// Hitting the iteration cap is not an error: the best grid is returned with
/// `converged = false`.
pub fn solve_stationary(params: CkParams, config: &SolverConfig) -> Result<(JointGrid, ConvergenceDiag)> {
    if config.grid_size < 10 {
        return domain(format!("grid size must be at least 10, got {}", config.grid_size));
    }
    let sched = config.schedule;
    if !(sched.plain_gamma > 0.0 && sched.plain_gamma <= 1.0 && sched.damped_gamma > 0.0 && sched.damped_gamma <= 1.0) {
        return domain("relaxation parameters must lie in (0, 1]");
    }
    let mut sweeper = Sweeper::new(JointGrid::product_form(params, config.grid_size)?);
    let mut history: Vec<GammaPhase> = Vec::new();
    let mut iterations = 0u64;
    let mut last_plain_d3 = f64::INFINITY;
    let mut converged = false;

    let begin_phase = |history: &mut Vec<GammaPhase>, gamma: f64, at: u64| {
        history.push(GammaPhase { gamma, first_iteration: at, iterations: 0 });
    };

    'outer: while iterations < config.stop.max_iterations {
        // plain phase
        begin_phase(&mut history, sched.plain_gamma, iterations);
        let mut window_start_d3 = f64::INFINITY;
        let mut in_window = 0u64;
        loop {
            if iterations >= config.stop.max_iterations {
                break 'outer;
            }
            let s = sweeper.sweep(sched.plain_gamma);
            iterations += 1;
            history.last_mut().unwrap().iterations += 1;
            last_plain_d3 = s.d3;
            if s.d3 < config.stop.d3 {
                converged = true;
                break 'outer;
            }
            in_window += 1;
            if in_window == sched.stall_window {
                let improved = window_start_d3 - s.d3;
                let stalled = window_start_d3.is_finite()
                    && improved < sched.stall_rel_improvement * window_start_d3;
                if stalled {
                    break;
                }
                window_start_d3 = s.d3;
                in_window = 0;
            }
        }
        // damped phase
        begin_phase(&mut history, sched.damped_gamma, iterations);
        for _ in 0..sched.damped_iterations {
            if iterations >= config.stop.max_iterations {
                break 'outer;
            }
            sweeper.sweep(sched.damped_gamma);
            iterations += 1;
            history.last_mut().unwrap().iterations += 1;
        }
    }

    let grid = sweeper.into_grid();
    let dev = marginal_deviations(&grid);
    let boundary_mass = grid.boundary_mass();
    let diag = ConvergenceDiag {
        d1: dev.d1,
        d2: dev.d2,
        d3: last_plain_d3,
        iterations,
        converged,
        residual: ck_residual(&grid),
        boundary_mass,
        truncation_warning: boundary_mass > config.tail_mass_warning,
        gamma_history: history,
    };
    Ok((grid, diag))
}

/// Moments of the joint queue lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueMoments {
    pub mean_a: f64,
    pub mean_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub cov: f64,
}

pub fn queue_moments(grid: &JointGrid) -> Result<QueueMoments> {
    let total = grid.total();
    if !(total > 0.0) {
        return domain("grid carries no probability mass");
    }
    let n = grid.n;
    let (mut ea, mut eb, mut eaa, mut ebb, mut eab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for qa in 0..n {
        for qb in 0..n {
            let p = grid.get(qa, qb) / total;
            let (a, b) = (qa as f64, qb as f64);
            ea += p * a;
            eb += p * b;
            eaa += p * a * a;
            ebb += p * b * b;
            eab += p * a * b;
        }
    }
    Ok(QueueMoments {
        mean_a: ea,
        mean_b: eb,
        var_a: eaa - ea * ea,
        var_b: ebb - eb * eb,
        cov: eab - ea * eb,
    })
}

/// Correlation coefficient between the two branch sojourn times of a pair.
///
/// A forking pair sees the stationary state `(q_a, q_b)` (Poisson arrivals see
/// time averages). Given that state, `t_i` is Erlang(`q_i + 1`, `μ_i`) under
/// FIFO, and the two are conditionally independent because they depend on
/// disjoint service times. Hence `Cov(t_a, t_b) = Cov(q_a, q_b) / (μ_a μ_b)`
/// and `Var(t_i) = (E q_i + 1 + Var q_i) / μ_i²`.
pub fn sojourn_correlation(grid: &JointGrid) -> Result<f64> {
    let m = queue_moments(grid)?;
    let CkParams { mu_a, mu_b, .. } = grid.params;
    let var_ta = (m.mean_a + 1.0 + m.var_a) / (mu_a * mu_a);
    let var_tb = (m.mean_b + 1.0 + m.var_b) / (mu_b * mu_b);
    if !(var_ta > 0.0 && var_tb > 0.0) {
        return domain("degenerate sojourn variance");
    }
    let r = m.cov / (mu_a * mu_b) / (var_ta * var_tb).sqrt();
    Ok(r.clamp(-1.0, 1.0))
}

/// One point of the correlation-versus-utilization curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPoint {
    pub psi_a: f64,
    pub psi_b: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(skip)]
    pub converged: bool,
}

/// The `ψ_b` values of the published correlation curves.
pub const FIG_PSI_B: [f64; 4] = [0.05, 0.35, 0.65, 0.90];

/// Solves every `(ψ_a, ψ_b)` combination in parallel; output is sorted by
/// `ψ_b`, then `ψ_a`.
pub fn correlation_sweep(psi_a: &[f64], psi_b: &[f64], config: &SolverConfig) -> Result<Vec<CorrelationPoint>> {
    let mut points: Vec<(f64, f64)> =
        psi_b.iter().flat_map(|&b| psi_a.iter().map(move |&a| (a, b))).collect();
    points.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.total_cmp(&y.0)));
    points
        .par_iter()
        .map(|&(a, b)| {
            let (grid, diag) = solve_stationary(CkParams::from_utilization(a, b)?, config)?;
            Ok(CorrelationPoint { psi_a: a, psi_b: b, r: sojourn_correlation(&grid)?, converged: diag.converged })
        })
        .collect()
}
