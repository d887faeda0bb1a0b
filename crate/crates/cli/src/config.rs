//! Command-line and config-file options.
//!
//! Each subcommand resolves to a job struct. Values come from flags first, then
//! from the `--config` JSON object, then from defaults. A resolved job
//! serializes to JSON that resolves back to the same job, so `--print-config`
//! output can be fed back through `--config`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fjsync::ck::{CkParams, FIG_PSI_B};
use fjsync::{NetworkParams, Servers};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FJSYNC_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "fjsync-out";

#[derive(Debug, Parser)]
#[command(name = "fjsync", version, about = "Synchronizer sojourn times in two-branch fork-join networks")]
pub struct Cli {
    /// JSON object with options for the subcommand; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Print the resolved options as JSON and exit.
    #[arg(long, global = true)]
    pub print_config: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form synchronizer wait density, mean and quantiles.
    Analytic(AnalyticArgs),
    /// Discrete-event simulation; writes per-pair samples and a summary.
    Simulate(SimulateArgs),
    /// Stationary joint queue lengths of the single-server network.
    CkSolve(CkSolveArgs),
    /// Chi-square validation against the published cells and regions.
    Validate(ValidateArgs),
    /// Sojourn-time correlation curves over a utilization grid.
    Fig3(Fig3Args),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analytic(_) => "analytic",
            Command::Simulate(_) => "simulate",
            Command::CkSolve(_) => "ck-solve",
            Command::Validate(_) => "validate",
            Command::Fig3(_) => "fig3",
        }
    }
}

/// A branch server count: a positive integer or `inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerCount(pub Servers);

impl Default for ServerCount {
    fn default() -> Self {
        ServerCount(Servers::Finite(1))
    }
}

impl FromStr for ServerCount {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "inf" | "infinite" | "∞" => Ok(ServerCount(Servers::Infinite)),
            other => match other.parse::<u32>() {
                Ok(n) if n > 0 => Ok(ServerCount(Servers::Finite(n))),
                _ => Err(format!("expected a positive server count or `inf`, got `{s}`")),
            },
        }
    }
}

impl fmt::Display for ServerCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Servers::Finite(n) => write!(f, "{n}"),
            Servers::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for ServerCount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Servers::Finite(n) => s.serialize_u32(n),
            Servers::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ServerCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u32),
            Text(String),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Count(n) => n.to_string(),
            Raw::Text(t) => t,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Network options shared by `analytic` and `simulate`. Service rates are
/// given directly (`mu_*`) or through utilizations (`psi_*`).
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct NetworkArgs {
    /// Arrival rate.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Servers in branch a (integer or `inf`).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_a: Option<ServerCount>,
    /// Servers in branch b (integer or `inf`).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_b: Option<ServerCount>,
    /// Per-server service rate in branch a.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_a: Option<f64>,
    /// Per-server service rate in branch b.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_b: Option<f64>,
    /// Utilization of branch a, λ/(N_a μ_a); sets μ_a.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_a: Option<f64>,
    /// Utilization of branch b, λ/(N_b μ_b); sets μ_b.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkSpec {
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub n_a: ServerCount,
    #[serde(default)]
    pub n_b: ServerCount,
    #[serde(default)]
    pub mu_a: Option<f64>,
    #[serde(default)]
    pub mu_b: Option<f64>,
    #[serde(default)]
    pub psi_a: Option<f64>,
    #[serde(default)]
    pub psi_b: Option<f64>,
}

impl NetworkSpec {
    pub fn params(&self) -> Result<NetworkParams> {
        let lambda = self.lambda.ok_or_else(|| anyhow!("--lambda is required"))?;
        let mu_a = branch_rate(lambda, self.n_a, self.mu_a, self.psi_a, "a")?;
        let mu_b = branch_rate(lambda, self.n_b, self.mu_b, self.psi_b, "b")?;
        Ok(NetworkParams::new(lambda, self.n_a.0, mu_a, self.n_b.0, mu_b)?)
    }
}

fn branch_rate(lambda: f64, n: ServerCount, mu: Option<f64>, psi: Option<f64>, branch: &str) -> Result<f64> {
    match (mu, psi, n.0) {
        (Some(_), Some(_), _) => bail!("give either --mu-{branch} or --psi-{branch}, not both"),
        (Some(mu), None, _) => Ok(mu),
        (None, Some(_), Servers::Infinite) => bail!("--psi-{branch} needs a finite server count; use --mu-{branch}"),
        (None, Some(psi), Servers::Finite(n)) => Ok(lambda / (f64::from(n) * psi)),
        (None, None, _) => bail!("--mu-{branch} or --psi-{branch} is required"),
    }
}

fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct AnalyticArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub network: NetworkArgs,
    /// Both branches have infinitely many servers; λ may then be omitted.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inf_servers: Option<bool>,
    /// Probabilities at which to report quantiles.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantiles: Option<Vec<f64>>,
    /// Also write the report to this file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticJob {
    #[serde(flatten)]
    pub network: NetworkSpec,
    #[serde(default)]
    pub inf_servers: bool,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_quantiles() -> Vec<f64> {
    vec![0.5, 0.9, 0.99]
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub network: NetworkArgs,
    /// Number of forked jobs.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<u64>,
    /// Random seed (required).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Leading fraction of pairs left out of the statistics.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warmup: Option<f64>,
    /// Write the per-pair samples CSV.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<bool>,
    /// Output directory [default: $FJSYNC_OUT_DIR or ./fjsync-out].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateJob {
    #[serde(flatten)]
    pub network: NetworkSpec,
    #[serde(default = "default_jobs")]
    pub jobs: u64,
    pub seed: u64,
    #[serde(default)]
    pub warmup: f64,
    #[serde(default = "yes")]
    pub samples: bool,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_jobs() -> u64 {
    100_000
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct CkSolveArgs {
    /// Utilization of branch a; rates are scaled so that λ + μ_a + μ_b = 1.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_a: Option<f64>,
    /// Utilization of branch b.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_b: Option<f64>,
    /// States per axis.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    /// Sweep cap.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<u64>,
    /// Write the joint distribution CSV.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub write_grid: Option<bool>,
    /// Output directory [default: $FJSYNC_OUT_DIR or ./fjsync-out].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CkSolveJob {
    pub psi_a: f64,
    pub psi_b: f64,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: u64,
    #[serde(default = "yes")]
    pub write_grid: bool,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl CkSolveJob {
    pub fn params(&self) -> Result<CkParams> {
        Ok(CkParams::from_utilization(self.psi_a, self.psi_b)?)
    }
}

fn default_grid_size() -> usize {
    190
}

fn default_max_iterations() -> u64 {
    5_000_000
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ValidateArgs {
    /// First seed; runs use consecutive seeds from here (required).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Seeds per cell; the verdict is the majority.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<u32>,
    /// Jobs per run.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<u64>,
    /// Rerun the published verdict cells.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table3: Option<bool>,
    /// Scan a grid of equal server counts and utilizations.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<bool>,
    /// Arrival rate of the region scan.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Server counts of the region scan (both branches equal).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub servers: Option<Vec<u32>>,
    /// Utilizations of the region scan (every ψ_a, ψ_b pair).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<f64>>,
    /// Output directory [default: $FJSYNC_OUT_DIR or ./fjsync-out].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateJob {
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: u32,
    #[serde(default = "default_jobs")]
    pub jobs: u64,
    #[serde(default = "yes")]
    pub table3: bool,
    #[serde(default)]
    pub region: bool,
    #[serde(default = "default_region_lambda")]
    pub lambda: f64,
    #[serde(default = "default_region_servers")]
    pub servers: Vec<u32>,
    #[serde(default = "default_region_psi")]
    pub psi: Vec<f64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl ValidateJob {
    pub fn seeds(&self) -> Vec<u64> {
        (0..u64::from(self.runs)).map(|i| self.seed + i).collect()
    }
}

fn default_runs() -> u32 {
    5
}

fn default_region_lambda() -> f64 {
    1.0
}

fn default_region_servers() -> Vec<u32> {
    vec![1, 2, 3, 5, 6, 8]
}

fn default_region_psi() -> Vec<f64> {
    vec![0.1, 0.2, 0.5, 0.75, 0.8]
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct Fig3Args {
    /// Utilizations of branch a.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_a: Option<Vec<f64>>,
    /// Utilizations of branch b, one curve each.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_b: Option<Vec<f64>>,
    /// States per axis.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    /// Output directory [default: $FJSYNC_OUT_DIR or ./fjsync-out].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig3Job {
    #[serde(default = "default_fig3_psi_a")]
    pub psi_a: Vec<f64>,
    #[serde(default = "default_fig3_psi_b")]
    pub psi_b: Vec<f64>,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_fig3_psi_a() -> Vec<f64> {
    (1..=18).map(|i| f64::from(i) * 0.05).map(|x| (x * 100.0).round() / 100.0).collect()
}

fn default_fig3_psi_b() -> Vec<f64> {
    FIG_PSI_B.to_vec()
}

/// A fully resolved invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    Analytic(AnalyticJob),
    Simulate(SimulateJob),
    CkSolve(CkSolveJob),
    Validate(ValidateJob),
    Fig3(Fig3Job),
}

/// Reads a config file: a JSON object whose optional `command` key must name
/// the subcommand being run.
pub fn load_config(path: &Path, command: &str) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let Value::Object(mut map) = value else {
        bail!("{} must contain a JSON object", path.display());
    };
    match map.remove("command") {
        None => {}
        Some(Value::String(c)) if c == command => {}
        Some(other) => bail!("{} is for command {other}, not {command}", path.display()),
    }
    Ok(map)
}

/// Merges flags over config values and deserializes the job, rejecting keys
/// the job does not know.
fn merge<A: Serialize, J: Serialize + DeserializeOwned>(args: &A, config: Map<String, Value>, command: &str) -> Result<J> {
    let mut merged = config;
    if let Value::Object(flags) = serde_json::to_value(args)? {
        merged.extend(flags);
    }
    let job: J = serde_json::from_value(Value::Object(merged.clone()))
        .map_err(|e| anyhow!("{command}: {}", e.to_string().replace("missing field `", "missing option `")))?;
    if let Value::Object(known) = serde_json::to_value(&job)? {
        if let Some(unknown) = merged.keys().find(|k| !known.contains_key(*k)) {
            bail!("{command}: unknown option `{unknown}`");
        }
    }
    Ok(job)
}

pub fn resolve(command: &Command, config: Map<String, Value>) -> Result<Job> {
    let name = command.name();
    Ok(match command {
        Command::Analytic(a) => Job::Analytic(merge(a, config, name)?),
        Command::Simulate(a) => Job::Simulate(merge(a, config, name)?),
        Command::CkSolve(a) => Job::CkSolve(merge(a, config, name)?),
        Command::Validate(a) => Job::Validate(merge(a, config, name)?),
        Command::Fig3(a) => Job::Fig3(merge(a, config, name)?),
    })
}
