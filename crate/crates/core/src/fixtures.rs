//! Published reference data bundled with the crate: the acceptance regions,
//! the solver stopping diagnostics and the per-cell χ² verdicts.

use serde::{Deserialize, Serialize};

use crate::analytic::NetworkParams;
use crate::error::Result;

const TABLE1: &str = include_str!("../fixtures/table1.json");
const TABLE2: &str = include_str!("../fixtures/table2.json");
const TABLE3: &str = include_str!("../fixtures/table3.json");

/// A rectangle of parameters where the independence hypothesis was accepted.
/// Both branches must have a server count in `n_min..=n_max` (`None` is
/// unbounded) and utilizations in `(0, psi_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRegion {
    pub n_min: u32,
    pub n_max: Option<u32>,
    pub psi_a_max: f64,
    pub psi_b_max: f64,
}

impl AcceptanceRegion {
    pub fn contains(&self, n_a: u32, n_b: u32, psi_a: f64, psi_b: f64) -> bool {
        let n_ok = |n: u32| n >= self.n_min && self.n_max.map_or(true, |m| n <= m);
        n_ok(n_a) && n_ok(n_b) && psi_a > 0.0 && psi_b > 0.0 && psi_a <= self.psi_a_max && psi_b <= self.psi_b_max
    }
}

/// Stopping diagnostics of the stationary solver at `ψ_a = ψ_b = psi`.
/// With `bound_only` the values are upper bounds rather than measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverReference {
    pub psi: f64,
    pub d1_max: f64,
    pub d3_max: f64,
    pub bound_only: bool,
}

/// One published goodness-of-fit cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictCell {
    pub lambda: f64,
    pub n_a: u32,
    pub n_b: u32,
    pub psi_a: f64,
    pub psi_b: f64,
    pub chi2: f64,
    pub rejected: bool,
    /// `(T̄ - T̄_emp) / T̄` in percent.
    pub delta_t_pct: f64,
}

impl VerdictCell {
    pub fn params(&self) -> Result<NetworkParams> {
        NetworkParams::from_utilization(self.lambda, self.n_a, self.psi_a, self.n_b, self.psi_b)
    }
}

pub fn acceptance_regions() -> Vec<AcceptanceRegion> {
    serde_json::from_str(TABLE1).expect("bundled acceptance regions parse")
}

/// True when some published region contains the point.
pub fn in_acceptance_region(n_a: u32, n_b: u32, psi_a: f64, psi_b: f64) -> bool {
    acceptance_regions().iter().any(|r| r.contains(n_a, n_b, psi_a, psi_b))
}

pub fn solver_references() -> Vec<SolverReference> {
    serde_json::from_str(TABLE2).expect("bundled solver references parse")
}

pub fn verdict_cells() -> Vec<VerdictCell> {
    serde_json::from_str(TABLE3).expect("bundled verdict cells parse")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_data_loads() {
        assert_eq!(acceptance_regions().len(), 4);
        assert_eq!(solver_references().len(), 4);
        let cells = verdict_cells();
        assert_eq!(cells.len(), 21);
        assert_eq!(cells.iter().filter(|c| c.rejected).count(), 12);
        for c in &cells {
            c.params().unwrap();
            assert_eq!(c.rejected, c.chi2 > 49.6, "{c:?}");
        }
    }

    #[test]
    fn region_membership() {
        assert!(in_acceptance_region(1, 2, 0.2, 0.1));
        assert!(!in_acceptance_region(1, 1, 0.5, 0.1));
        assert!(in_acceptance_region(4, 4, 0.8, 0.5));
        assert!(!in_acceptance_region(4, 4, 0.8, 0.8));
        assert!(!in_acceptance_region(2, 3, 0.1, 0.1));
        assert!(in_acceptance_region(40, 6, 0.75, 0.1));
    }
}
