use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Which branch of the fork a partner travels through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    A,
    B,
}

impl Branch {
    pub fn other(self) -> Branch {
        match self {
            Branch::A => Branch::B,
            Branch::B => Branch::A,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::A => "a",
            Branch::B => "b",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Number of parallel servers in a branch.
///
/// The infinite-server branch is a separate variant: it has no queue, its
/// sojourn time is a single service time, and it is always stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Servers {
    Finite(u32),
    Infinite,
}

impl Servers {
    pub fn finite(self) -> Option<u32> {
        match self {
            Servers::Finite(n) => Some(n),
            Servers::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Servers::Infinite)
    }
}

impl fmt::Display for Servers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Servers::Finite(n) => write!(f, "{n}"),
            Servers::Infinite => f.write_str("inf"),
        }
    }
}

/// Utilization `λ / (N μ)` of one branch; zero for an infinite-server branch.
pub fn utilization(lambda: f64, mu: f64, servers: Servers) -> f64 {
    match servers {
        Servers::Finite(n) => lambda / (f64::from(n) * mu),
        Servers::Infinite => 0.0,
    }
}

pub(crate) fn check_branch(lambda: f64, mu: f64, servers: Servers) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return domain(format!("arrival rate must be positive and finite, got {lambda}"));
    }
    if !(mu.is_finite() && mu > 0.0) {
        return domain(format!("service rate must be positive and finite, got {mu}"));
    }
    if let Servers::Finite(n) = servers {
        if n == 0 {
            return domain("server count must be at least 1");
        }
        let psi = utilization(lambda, mu, servers);
        if psi >= 1.0 {
            return domain(format!(
                "unstable branch: utilization {psi} >= 1 (lambda={lambda}, mu={mu}, n={n})"
            ));
        }
    }
    Ok(())
}

/// The fork-join network: Poisson arrivals at rate `lambda`, branch `a` with
/// `n_a` servers of rate `mu_a`, branch `b` with `n_b` servers of rate `mu_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub lambda: f64,
    pub n_a: Servers,
    pub mu_a: f64,
    pub n_b: Servers,
    pub mu_b: f64,
}

impl NetworkParams {
    /// Builds and validates a parameter set.
    pub fn new(lambda: f64, n_a: Servers, mu_a: f64, n_b: Servers, mu_b: f64) -> Result<Self> {
        let p = NetworkParams { lambda, n_a, mu_a, n_b, mu_b };
        p.validate()?;
        Ok(p)
    }

    /// Builds a finite-server network from utilizations, `μ_i = λ / (N_i ψ_i)`.
    pub fn from_utilization(lambda: f64, n_a: u32, psi_a: f64, n_b: u32, psi_b: f64) -> Result<Self> {
        for (psi, name) in [(psi_a, "psi_a"), (psi_b, "psi_b")] {
            if !(psi > 0.0 && psi < 1.0) {
                return domain(format!("{name} must lie in (0, 1), got {psi}"));
            }
        }
        if n_a == 0 || n_b == 0 {
            return domain("server count must be at least 1");
        }
        let mu_a = lambda / (f64::from(n_a) * psi_a);
        let mu_b = lambda / (f64::from(n_b) * psi_b);
        Self::new(lambda, Servers::Finite(n_a), mu_a, Servers::Finite(n_b), mu_b)
    }

    pub fn validate(&self) -> Result<()> {
        check_branch(self.lambda, self.mu_a, self.n_a)?;
        check_branch(self.lambda, self.mu_b, self.n_b)
    }

    pub fn servers(&self, branch: Branch) -> Servers {
        match branch {
            Branch::A => self.n_a,
            Branch::B => self.n_b,
        }
    }

    pub fn mu(&self, branch: Branch) -> f64 {
        match branch {
            Branch::A => self.mu_a,
            Branch::B => self.mu_b,
        }
    }

    pub fn psi(&self, branch: Branch) -> f64 {
        utilization(self.lambda, self.mu(branch), self.servers(branch))
    }

    pub fn psi_a(&self) -> f64 {
        self.psi(Branch::A)
    }

    pub fn psi_b(&self) -> f64 {
        self.psi(Branch::B)
    }

    /// The same network with the branch labels exchanged.
    pub fn swapped(&self) -> NetworkParams {
        NetworkParams {
            lambda: self.lambda,
            n_a: self.n_b,
            mu_a: self.mu_b,
            n_b: self.n_a,
            mu_b: self.mu_a,
        }
    }
}
