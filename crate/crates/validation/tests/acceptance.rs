//! End-to-end acceptance checks. Run all with `cargo test -p fjsync-validation
//! --test acceptance`, or a subset by passing check ids after `--`.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use fjsync::analytic::{mean_wait, waiting_density};
use fjsync::ck::{correlation_sweep, solve_stationary, sojourn_correlation, CkParams, SolverConfig, FIG_PSI_B};
use fjsync::fixtures::{in_acceptance_region, solver_references, verdict_cells};
use fjsync::fjsim::{simulate, ExpSource, SimConfig};
use fjsync::gof::{chi_square_test, compare_with_published, validity_region_scan, ChiSquareOptions, RegionPoint};
use fjsync::io::{write_json, write_samples_csv};
use fjsync::stats::{batch_means_se, mean, pearson};
use fjsync::{ExpMixture, NetworkParams, Result, Servers};
use fjsync_validation::{run_checks, selected_ids, Check, Verdict};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const PAPER_JOBS: u64 = 100_000;
const PAPER_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn main() {
    let checks = [
        Check { id: 1, title: "closed-form reductions", run: reductions },
        Check { id: 2, title: "four-rate density oracle", run: four_rate_oracle },
        Check { id: 3, title: "published verdict cells", run: published_cells },
        Check { id: 4, title: "acceptance regions", run: acceptance_regions },
        Check { id: 5, title: "mean-wait bound", run: mean_wait_bound },
        Check { id: 6, title: "stationary solver stop", run: solver_stop },
        Check { id: 7, title: "correlation curves", run: correlation_curves },
        Check { id: 8, title: "null calibration", run: null_calibration },
        Check { id: 9, title: "little's law", run: littles_law },
        Check { id: 10, title: "determinism", run: determinism },
    ];
    let only = selected_ids(std::env::args().skip(1));
    if run_checks(&checks, &only) > 0 {
        std::process::exit(1);
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// `f(t) = k (e^{-a t} + e^{-b t})`, `k = ab/(a+b)`, for the infinite-server
/// and single-server networks (with `a = μ_a - λ`, `b = μ_b - λ` in the latter).
fn reductions() -> Result<Verdict> {
    let mut worst_coeff: f64 = 0.0;
    let mut worst_mean: f64 = 0.0;
    let mut shape_ok = true;
    for (ma, mb) in [(1.0, 2.0), (0.7, 0.7), (3.0, 0.25), (1.3, 5.9), (10.0, 0.01)] {
        let lambda = 0.5 * f64::min(ma, mb);
        let cases = [
            (NetworkParams::new(lambda, Servers::Infinite, ma, Servers::Infinite, mb)?, ma, mb),
            (NetworkParams::new(lambda, Servers::Finite(1), ma, Servers::Finite(1), mb)?, ma - lambda, mb - lambda),
        ];
        for (p, a, b) in cases {
            let f = waiting_density(&p)?;
            let k = a * b / (a + b);
            let want = ExpMixture::one_sided([(k, a), (k, b)])?;
            shape_ok &= f.terms().len() == want.terms().len();
            for (got, w) in f.terms().iter().zip(want.terms()) {
                worst_coeff = worst_coeff.max(rel(got.coeff, w.coeff)).max(rel(got.rate, w.rate));
            }
            let mean = (a * a + b * b) / ((a + b) * a * b);
            worst_mean = worst_mean.max(rel(mean_wait(&p)?, mean));
        }
    }
    let passed = shape_ok && worst_coeff <= 4.0 * f64::EPSILON && worst_mean <= 1e-12;
    Ok(Verdict::new(
        passed,
        format!("max coefficient rel err {worst_coeff:.1e} (<= 4 ulp), max mean rel err {worst_mean:.1e} (<= 1e-12)"),
    ))
}

fn four_rate_oracle() -> Result<Verdict> {
    let servers = [Some(2), Some(3), Some(4), Some(5), Some(6), Some(8), Some(10)];
    let nets = support::random_networks(50, 2024, &servers);
    let rows: Vec<(f64, bool)> = nets
        .par_iter()
        .map(|p| {
            let f = waiting_density(p)?;
            let (a, b) = support::oracles(p);
            let worst = support::sup_norm_grid(50.0 / f.min_rate(), 100)
                .into_iter()
                .map(|t| (f.density(t) - support::waiting_pdf_numeric(&a, &b, t)).abs())
                .fold(0.0, f64::max);
            Ok((worst, f.terms().len() == 4))
        })
        .collect::<Result<_>>()?;
    let worst = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let four = rows.iter().filter(|r| r.1).count();
    Ok(Verdict::new(
        worst <= 1e-8 && four == rows.len(),
        format!("{} sets, {four} with four rates, sup-norm error {worst:.2e} (<= 1e-8)", rows.len()),
    ))
}

fn cell_label(lambda: f64, n_a: u32, n_b: u32, psi_a: f64, psi_b: f64) -> String {
    format!("λ{lambda} {n_a}/{n_b} ψ{psi_a}/{psi_b}")
}

fn published_cells() -> Result<Verdict> {
    let rows = compare_with_published(&verdict_cells(), PAPER_JOBS, &PAPER_SEEDS)?;
    let verdicts = rows.iter().filter(|r| r.verdict_match).count();
    let deltas = rows.iter().filter(|r| r.delta_t_match).count();
    let mut misses = Vec::new();
    for r in &rows {
        let label = cell_label(r.lambda, r.n_a, r.n_b, r.psi_a, r.psi_b);
        if !r.verdict_match {
            let word = |rej: bool| if rej { "rej" } else { "acc" };
            misses.push(format!("{label} {}->{} χ²{:.0}", word(r.paper_rejected), word(r.rejected), r.chi2));
        }
        if !r.delta_t_match {
            misses.push(format!("{label} ΔT {:.1}% vs {:.1}%", r.delta_t_pct, r.paper_delta_t_pct));
        }
    }
    let n = rows.len();
    Ok(Verdict::new(
        verdicts == n && deltas == n,
        format!("verdicts {verdicts}/{n}, ΔT within tolerance {deltas}/{n}; misses: [{}]", misses.join("; ")),
    ))
}

fn acceptance_regions() -> Result<Verdict> {
    let psis = [0.1, 0.2, 0.5, 0.75, 0.8];
    let mut points = Vec::new();
    for n in [1, 2, 3, 5, 6, 8] {
        for psi_a in psis {
            for psi_b in psis {
                points.push(RegionPoint { n_a: n, n_b: n, psi_a, psi_b });
            }
        }
    }
    let rows = validity_region_scan(&points, 1.0, PAPER_JOBS, &PAPER_SEEDS)?;
    let mut agree = 0;
    let (mut inside, mut inside_agree) = (0, 0);
    for r in &rows {
        let expected = in_acceptance_region(r.n_a, r.n_b, r.psi_a, r.psi_b);
        if expected == r.accepted {
            agree += 1;
        }
        if expected {
            inside += 1;
            inside_agree += usize::from(r.accepted);
        }
    }
    let frac = agree as f64 / rows.len() as f64;
    Ok(Verdict::new(
        frac >= 0.9,
        format!(
            "{agree}/{} grid points agree ({:.1}%, need >= 90%); accepted inside regions {inside_agree}/{inside}",
            rows.len(),
            100.0 * frac
        ),
    ))
}

fn mean_wait_bound() -> Result<Verdict> {
    const JOBS: u64 = 1_000_000;
    let cells = verdict_cells();
    let rows: Vec<(String, f64, bool)> = cells
        .par_iter()
        .map(|c| {
            let p = c.params()?;
            let t = mean_wait(&p)?;
            let mut dts = Vec::new();
            for seed in PAPER_SEEDS {
                let cfg = SimConfig::new(JOBS, seed).keep_samples(false).keep_trace(false);
                let r = simulate(&p, &cfg, &mut ExpSource::new(&p, seed))?;
                dts.push((t - r.t_mean_emp) / t);
            }
            let corner = c.n_a == 1 && c.n_b == 1 && c.psi_a > 0.5 && c.psi_b > 0.5;
            Ok((cell_label(c.lambda, c.n_a, c.n_b, c.psi_a, c.psi_b), mean(&dts), corner))
        })
        .collect::<Result<_>>()?;
    let mut misses = Vec::new();
    for (label, dt, corner) in &rows {
        let cap = if *corner { 0.20 } else { 0.10 };
        if !(*dt > 0.0 && *dt <= cap) {
            misses.push(format!("{label} {:+.2}% (cap {:.0}%)", 100.0 * dt, 100.0 * cap));
        }
    }
    let max = rows.iter().map(|r| r.1).fold(f64::MIN, f64::max);
    let min = rows.iter().map(|r| r.1).fold(f64::MAX, f64::min);
    Ok(Verdict::new(
        misses.is_empty(),
        format!(
            "ΔT/T in [{:+.2}%, {:+.2}%] over {} cells ({} seeds x {JOBS} jobs); misses: [{}]",
            100.0 * min,
            100.0 * max,
            rows.len(),
            PAPER_SEEDS.len(),
            misses.join("; ")
        ),
    ))
}

fn solver_stop() -> Result<Verdict> {
    let config = SolverConfig::default();
    let mut parts = Vec::new();
    let mut passed = true;
    for psi in [0.05, 0.5, 0.9] {
        let (_, d) = solve_stationary(CkParams::from_utilization(psi, psi)?, &config)?;
        let ok = if psi < 0.8 {
            d.converged && d.d1 < 1e-11 && d.d2 < 1e-11 && d.d3 < 1e-11
        } else {
            let reference = solver_references().into_iter().find(|r| r.psi == psi).expect("reference row");
            d.d1 <= 1.5 * reference.d1_max && d.d2 <= 1.5 * reference.d1_max && d.d3 <= 1.5 * reference.d3_max
        };
        let ok = ok && d.residual <= 1e-9;
        passed &= ok;
        parts.push(format!(
            "ψ{psi}: D1 {:.1e} D2 {:.1e} D3 {:.1e} residual {:.1e} after {} sweeps",
            d.d1, d.d2, d.d3, d.residual, d.iterations
        ));
    }
    Ok(Verdict::new(passed, parts.join("; ")))
}

fn correlation_curves() -> Result<Verdict> {
    let psi_a = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
    let curves = correlation_sweep(&psi_a, &FIG_PSI_B, &SolverConfig::default())?;
    let at = |a: f64, b: f64| curves.iter().find(|c| c.psi_a == a && c.psi_b == b).map(|c| c.r).unwrap();
    let ends: Vec<f64> = FIG_PSI_B.iter().map(|&b| at(0.9, b)).collect();
    let ordered = ends.windows(2).all(|w| w[0] < w[1]);
    let low = curves.iter().filter(|c| c.psi_a.min(c.psi_b) <= 0.1);
    let low_max = low.map(|c| c.r).fold(f64::MIN, f64::max);
    let all_converged = curves.iter().all(|c| c.converged);

    let psi = 0.75;
    let (grid, _) = solve_stationary(CkParams::from_utilization(psi, psi)?, &SolverConfig::default())?;
    let r_ck = sojourn_correlation(&grid)?;
    let p = NetworkParams::from_utilization(1.0, 1, psi, 1, psi)?;
    let cfg = SimConfig::new(1_000_000, 7).warmup(0.01).keep_trace(false);
    let sim = simulate(&p, &cfg, &mut ExpSource::new(&p, 7))?;
    let ta: Vec<f64> = sim.samples.iter().map(|s| s.t_a).collect();
    let tb: Vec<f64> = sim.samples.iter().map(|s| s.t_b).collect();
    let r_sim = pearson(&ta, &tb);
    let se = batch_means_se(ta.len(), 50, |rg| pearson(&ta[rg.clone()], &tb[rg]));
    let z = (r_sim - r_ck) / se;

    let passed = ordered && low_max < 0.05 && all_converged && z.abs() <= 3.0;
    Ok(Verdict::new(
        passed,
        format!(
            "R(0.9, ψb) = [{}] for ψb = {FIG_PSI_B:?}; max R with min ψ <= 0.1: {low_max:.4}; \
             ψ0.75: solver {r_ck:.4} vs simulated {r_sim:.4} ± {se:.4} (z {z:+.2}); all converged: {all_converged}",
            ends.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

fn null_calibration() -> Result<Verdict> {
    const TRIALS: u64 = 200;
    const SAMPLES: usize = 20_000;
    let p = NetworkParams::from_utilization(1.5, 3, 0.5, 5, 0.5)?;
    let f = waiting_density(&p)?;
    let opts = ChiSquareOptions::default();
    let rejected = (0..TRIALS)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(trial);
            let xs = (0..SAMPLES).map(|_| f.quantile(rng.random::<f64>())).collect::<Result<Vec<_>>>()?;
            Ok(!chi_square_test(&xs, &f, &opts)?.accepted)
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&r| r)
        .count();
    let rate = rejected as f64 / TRIALS as f64;
    Ok(Verdict::new(
        (0.002..=0.03).contains(&rate),
        format!("{rejected}/{TRIALS} rejected ({:.1}%, need 0.2%..3%), {SAMPLES} samples per trial", 100.0 * rate),
    ))
}

/// The time-average occupancy against `λ T̄_emp`. The standard error combines
/// the batch-means error of `T̄_emp` with the `1/√n` error of the realized
/// arrival rate.
fn littles_law() -> Result<Verdict> {
    let cells = verdict_cells();
    let zs: Vec<(String, f64)> = cells
        .par_iter()
        .map(|c| {
            let p = c.params()?;
            let cfg = SimConfig::new(PAPER_JOBS, 1).keep_trace(false);
            let r = simulate(&p, &cfg, &mut ExpSource::new(&p, 1))?;
            let waits = r.t_sync();
            let little = p.lambda * r.t_mean_emp;
            let se_wait = p.lambda * batch_means_se(waits.len(), 50, |rg| mean(&waits[rg]));
            let se = (se_wait.powi(2) + little.powi(2) / waits.len() as f64).sqrt();
            Ok((cell_label(c.lambda, c.n_a, c.n_b, c.psi_a, c.psi_b), (r.sync_occupancy_mean - little) / se))
        })
        .collect::<Result<_>>()?;
    let worst = zs.iter().map(|z| z.1.abs()).fold(0.0, f64::max);
    let misses: Vec<String> = zs.iter().filter(|z| z.1.abs() > 3.0).map(|z| format!("{} z {:+.2}", z.0, z.1)).collect();
    Ok(Verdict::new(
        misses.is_empty(),
        format!("{} cells, max |z| {worst:.2} (<= 3); misses: [{}]", zs.len(), misses.join("; ")),
    ))
}

fn determinism() -> Result<Verdict> {
    let mut identical = true;
    let mut distinct = true;
    for p in [
        NetworkParams::from_utilization(0.3, 1, 0.75, 1, 0.5)?,
        NetworkParams::from_utilization(2.0, 8, 0.9, 8, 0.93)?,
    ] {
        let outputs = |seed: u64| -> Result<(Vec<u8>, Vec<u8>)> {
            let r = simulate(&p, &SimConfig::new(50_000, seed), &mut ExpSource::new(&p, seed))?;
            let (mut csv, mut json) = (Vec::new(), Vec::new());
            write_samples_csv(&mut csv, &r.samples)?;
            write_json(&mut json, &r.summary()?)?;
            Ok((csv, json))
        };
        let first = outputs(99)?;
        identical &= first == outputs(99)?;
        distinct &= first.0 != outputs(100)?.0;
    }
    Ok(Verdict::new(
        identical && distinct,
        format!("same seed byte-identical CSV and JSON: {identical}; different seed differs: {distinct}"),
    ))
}
