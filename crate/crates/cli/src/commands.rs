use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use fjsync::analytic::{branch_occupancy, mean_wait, waiting_density, BranchOccupancy};
use fjsync::ck::{queue_moments, solve_stationary, sojourn_correlation, ConvergenceDiag, QueueMoments, SolverConfig};
use fjsync::fixtures::verdict_cells;
use fjsync::fjsim::{simulate, ExpSource, SimConfig};
use fjsync::gof::{compare_with_published, validity_region_scan, RegionPoint};
use fjsync::io::{create_file, write_grid_csv, write_json, write_records_csv, write_samples_csv};
use fjsync::{cross_convolve, fold_to_waiting_density, little_occupancy, Branch, ExpMixture, NetworkParams, Servers};
use serde::Serialize;

use crate::config::{AnalyticJob, CkSolveJob, Fig3Job, Job, SimulateJob, ValidateJob};

pub fn run(job: &Job) -> Result<()> {
    match job {
        Job::Analytic(j) => analytic(j),
        Job::Simulate(j) => simulate_cmd(j),
        Job::CkSolve(j) => ck_solve(j),
        Job::Validate(j) => validate(j),
        Job::Fig3(j) => fig3(j),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    write_json(std::io::stdout().lock(), value)?;
    Ok(())
}

fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(create_file(path)?, value).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct Quantile {
    p: f64,
    t: f64,
}

#[derive(Serialize)]
struct AnalyticReport {
    params: Option<NetworkParams>,
    density: ExpMixture,
    mean_wait: f64,
    /// Mean number of partners held, by Little's law; needs λ.
    sync_occupancy: Option<f64>,
    branch_a: Option<BranchOccupancy>,
    branch_b: Option<BranchOccupancy>,
    quantiles: Vec<Quantile>,
}

fn analytic(job: &AnalyticJob) -> Result<()> {
    let (params, density) = if job.inf_servers && job.network.lambda.is_none() {
        let (Some(mu_a), Some(mu_b)) = (job.network.mu_a, job.network.mu_b) else {
            bail!("--inf-servers without --lambda needs --mu-a and --mu-b");
        };
        let two_sided = cross_convolve(&ExpMixture::exponential(mu_a)?, &ExpMixture::exponential(mu_b)?)?;
        (None, fold_to_waiting_density(&two_sided)?)
    } else {
        let mut spec = job.network.clone();
        if job.inf_servers {
            spec.n_a = crate::config::ServerCount(Servers::Infinite);
            spec.n_b = spec.n_a;
        }
        let p = spec.params()?;
        (Some(p), waiting_density(&p)?)
    };
    let mean = match &params {
        Some(p) => mean_wait(p)?,
        None => density.mean(),
    };
    let quantiles = job
        .quantiles
        .iter()
        .map(|&p| Ok(Quantile { p, t: density.quantile(p)? }))
        .collect::<Result<Vec<_>>>()?;
    // occupancy probabilities exist only for finite-server branches
    let branch = |b: Branch| -> Result<Option<BranchOccupancy>> {
        match params.as_ref() {
            Some(p) if matches!(p.servers(b), Servers::Finite(_)) => {
                let mu = if b == Branch::A { p.mu_a } else { p.mu_b };
                Ok(Some(branch_occupancy(p.lambda, mu, p.servers(b))?))
            }
            _ => Ok(None),
        }
    };
    let report = AnalyticReport {
        sync_occupancy: params.as_ref().map(|p| little_occupancy(p.lambda, mean)).transpose()?,
        branch_a: branch(Branch::A)?,
        branch_b: branch(Branch::B)?,
        params,
        density,
        mean_wait: mean,
        quantiles,
    };
    if let Some(out) = &job.out {
        save_json(out, &report)?;
    }
    print_json(&report)
}

fn simulate_cmd(job: &SimulateJob) -> Result<()> {
    let p = job.network.params()?;
    let cfg = SimConfig::new(job.jobs, job.seed).warmup(job.warmup).keep_samples(job.samples);
    let result = simulate(&p, &cfg, &mut ExpSource::new(&p, job.seed))?;
    let summary = result.summary()?;
    let dir = &job.out_dir;
    if job.samples {
        let path = dir.join(format!("samples_seed{}.csv", job.seed));
        write_samples_csv(create_file(&path)?, &result.samples_by_id())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    save_json(&dir.join(format!("summary_seed{}.json", job.seed)), &summary)?;
    save_json(&dir.join("job.json"), &Job::Simulate(job.clone()))?;
    print_json(&summary)
}

#[derive(Serialize)]
struct CkReport {
    psi_a: f64,
    psi_b: f64,
    grid_size: usize,
    #[serde(rename = "R")]
    r: f64,
    moments: QueueMoments,
    diagnostics: ConvergenceDiag,
}

fn ck_solve(job: &CkSolveJob) -> Result<()> {
    let params = job.params()?;
    let mut config = SolverConfig { grid_size: job.grid_size, ..SolverConfig::default() };
    config.stop.max_iterations = job.max_iterations;
    let (grid, diag) = solve_stationary(params, &config)?;
    if !diag.converged {
        eprintln!("warning: stopped after {} sweeps without converging (D3 = {:e})", diag.iterations, diag.d3);
    }
    if diag.truncation_warning {
        eprintln!("warning: boundary mass {:e}; consider a larger --grid-size", diag.boundary_mass);
    }
    let tag = format!("psi{}_{}", job.psi_a, job.psi_b);
    if job.write_grid {
        let path = job.out_dir.join(format!("grid_{tag}.csv"));
        write_grid_csv(create_file(&path)?, &grid).with_context(|| format!("writing {}", path.display()))?;
    }
    let report = CkReport {
        psi_a: job.psi_a,
        psi_b: job.psi_b,
        grid_size: job.grid_size,
        r: sojourn_correlation(&grid)?,
        moments: queue_moments(&grid)?,
        diagnostics: diag,
    };
    save_json(&job.out_dir.join(format!("ck_{tag}.json")), &report)?;
    print_json(&report)
}

fn validate(job: &ValidateJob) -> Result<()> {
    if !job.table3 && !job.region {
        bail!("nothing to do: enable --table3 and/or --region");
    }
    if job.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let seeds = job.seeds();
    fs::create_dir_all(&job.out_dir).with_context(|| format!("creating {}", job.out_dir.display()))?;
    if job.table3 {
        let rows = compare_with_published(&verdict_cells(), job.jobs, &seeds)?;
        let verdicts = rows.iter().filter(|r| r.verdict_match).count();
        let means = rows.iter().filter(|r| r.delta_t_match).count();
        println!("published cells: verdict agrees {verdicts}/{}, ΔT agrees {means}/{}", rows.len(), rows.len());
        write_records_csv(create_file(&job.out_dir.join("table3.csv"))?, &rows)?;
    }
    if job.region {
        let points: Vec<RegionPoint> = job
            .servers
            .iter()
            .flat_map(|&n| {
                job.psi.iter().flat_map(move |&psi_a| {
                    job.psi.iter().map(move |&psi_b| RegionPoint { n_a: n, n_b: n, psi_a, psi_b })
                })
            })
            .collect();
        if points.is_empty() {
            bail!("region scan grid is empty");
        }
        let rows = validity_region_scan(&points, job.lambda, job.jobs, &seeds)?;
        let accepted = rows.iter().filter(|r| r.accepted).count();
        println!("region scan: accepted {accepted}/{}", rows.len());
        write_records_csv(create_file(&job.out_dir.join("region.csv"))?, &rows)?;
    }
    save_json(&job.out_dir.join("job.json"), &Job::Validate(job.clone()))
}

fn fig3(job: &Fig3Job) -> Result<()> {
    if job.psi_a.is_empty() || job.psi_b.is_empty() {
        bail!("fig3 needs at least one ψ_a and one ψ_b");
    }
    let config = SolverConfig { grid_size: job.grid_size, ..SolverConfig::default() };
    let points = fjsync::ck::correlation_sweep(&job.psi_a, &job.psi_b, &config)?;
    for p in points.iter().filter(|p| !p.converged) {
        eprintln!("warning: ψ_a={} ψ_b={} did not converge", p.psi_a, p.psi_b);
    }
    let path = job.out_dir.join("fig3.csv");
    write_records_csv(create_file(&path)?, &points)?;
    println!("wrote {} points to {}", points.len(), path.display());
    Ok(())
}
