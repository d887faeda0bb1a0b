use fjsync::analytic::{branch_sojourn_density, Branch};
use fjsync::ck::{solve_stationary, sojourn_correlation, CkParams, SolverConfig};
use fjsync::fjsim::{run_simulation, simulate, ExpSource, SimConfig, SimResult};
use fjsync::gof::{chi_square_test, ChiSquareOptions};
use fjsync::io::{write_json, write_samples_csv};
use fjsync::stats::{batch_means_se, mean, pearson};
use fjsync::NetworkParams;

fn csv_bytes(r: &SimResult) -> Vec<u8> {
    let mut buf = Vec::new();
    write_samples_csv(&mut buf, &r.samples).unwrap();
    buf
}

#[test]
fn same_seed_gives_identical_csv_and_different_seeds_differ() {
    let p = NetworkParams::from_utilization(1.5, 3, 0.7, 5, 0.6).unwrap();
    let a = csv_bytes(&run_simulation(&p, 20_000, 42, 0.0).unwrap());
    let b = csv_bytes(&run_simulation(&p, 20_000, 42, 0.0).unwrap());
    let c = csv_bytes(&run_simulation(&p, 20_000, 43, 0.0).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn branch_means_match_queueing_theory() {
    let p = NetworkParams::from_utilization(2.0, 8, 0.7, 3, 0.5).unwrap();
    let r = run_simulation(&p, 400_000, 5, 0.01).unwrap();
    for (branch, get) in [(Branch::A, (|s: &fjsync::fjsim::SojournSample| s.t_a) as fn(&_) -> f64), (Branch::B, |s| s.t_b)] {
        let xs: Vec<f64> = r.samples.iter().map(get).collect();
        let want = branch_sojourn_density(p.lambda, p.mu(branch), p.servers(branch)).unwrap().mean();
        let se = batch_means_se(xs.len(), 50, |rg| mean(&xs[rg]));
        let got = mean(&xs);
        assert!((got - want).abs() < 4.0 * se, "{branch}: {got} vs {want} (se {se})");
    }
}

#[test]
fn thinned_branch_sojourns_fit_the_branch_density() {
    // arrivals see time averages, so each branch alone is an M/M/N queue
    let p = NetworkParams::from_utilization(1.5, 3, 0.6, 1, 0.4).unwrap();
    let r = run_simulation(&p, 600_000, 9, 0.0).unwrap();
    let samples = r.samples_by_id();
    for branch in [Branch::A, Branch::B] {
        let xs: Vec<f64> = samples
            .iter()
            .step_by(60)
            .map(|s| if branch == Branch::A { s.t_a } else { s.t_b })
            .collect();
        let f = branch_sojourn_density(p.lambda, p.mu(branch), p.servers(branch)).unwrap();
        let report = chi_square_test(&xs, &f, &ChiSquareOptions::default()).unwrap();
        assert!(report.accepted, "{branch}: chi2 {}", report.chi2);
    }
}

#[test]
fn occupancy_obeys_littles_law() {
    for (lambda, na, pa, nb, pb) in [(0.3, 1, 0.5, 1, 0.4), (1.5, 3, 0.8, 5, 0.6), (2.0, 8, 0.9, 8, 0.5)] {
        let p = NetworkParams::from_utilization(lambda, na, pa, nb, pb).unwrap();
        let r = run_simulation(&p, 200_000, 3, 0.0).unwrap();
        let waits = r.t_sync();
        let n = waits.len() as f64;
        let little = lambda * r.t_mean_emp;
        let se_wait = lambda * batch_means_se(waits.len(), 50, |rg| mean(&waits[rg]));
        let se = (se_wait.powi(2) + (little / n.sqrt()).powi(2)).sqrt();
        let diff = (r.sync_occupancy_mean - little).abs();
        assert!(diff < 3.0 * se, "{p:?}: {} vs {little} (se {se})", r.sync_occupancy_mean);
    }
}

#[test]
fn simulated_correlation_matches_stationary_solver() {
    let psi = 0.5;
    let ck = CkParams::from_utilization(psi, psi).unwrap();
    let (grid, diag) = solve_stationary(ck, &SolverConfig::default()).unwrap();
    assert!(diag.converged);
    let r_ck = sojourn_correlation(&grid).unwrap();
    let p = NetworkParams::from_utilization(1.0, 1, psi, 1, psi).unwrap();
    let r = run_simulation(&p, 400_000, 21, 0.01).unwrap();
    let ta: Vec<f64> = r.samples.iter().map(|s| s.t_a).collect();
    let tb: Vec<f64> = r.samples.iter().map(|s| s.t_b).collect();
    let r_sim = pearson(&ta, &tb);
    let se = batch_means_se(ta.len(), 40, |rg| pearson(&ta[rg.clone()], &tb[rg]));
    assert!((r_sim - r_ck).abs() < 3.0 * se, "{r_sim} vs {r_ck} (se {se})");
}

#[test]
fn summary_json_echoes_parameters_and_seed() {
    let p = NetworkParams::from_utilization(1.5, 3, 0.5, 5, 0.5).unwrap();
    let cfg = SimConfig::new(5_000, 77).keep_trace(false);
    let r = simulate(&p, &cfg, &mut ExpSource::new(&p, 77)).unwrap();
    let mut buf = Vec::new();
    write_json(&mut buf, &r.summary().unwrap()).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    assert_eq!(v["seed"], 77);
    assert_eq!(v["n_jobs"], 5_000);
    assert_eq!(v["params"]["lambda"], 1.5);
    assert_eq!(v["params"]["n_b"]["finite"], 5);
}
