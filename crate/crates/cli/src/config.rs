//! Command-line flags, the optional JSON config file, and their merge.
//!
//! Precedence is flags over file over built-in defaults. The merged
//! [`ExperimentConfig`] is validated before any compute and echoed verbatim
//! into every output header.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "treecp",
    version,
    about = "Contact process on homogeneous trees: simulation, estimators and spectral numerics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate replicate trajectories; writes snapshots CSV and a summary JSON.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: SimulateArgs,
    },
    /// Monte Carlo estimate of one observable; writes a CSV.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: EstimateArgs,
    },
    /// Phase-boundary ray scans; writes a CSV and the full scans as JSON.
    Phase {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: PhaseArgs,
    },
    /// Spectral dimension report; writes JSON and a flat CSV.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: ReportArgs,
    },
    /// Galton-Watson trees, simulated directly or extracted from the process.
    Gw {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: GwArgs,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Estimate { .. } => "estimate",
            Command::Phase { .. } => "phase",
            Command::Report { .. } => "report",
            Command::Gw { .. } => "gw",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// JSON config file; flags override its entries.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Number of free generators.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Infection rates, one per free generator (comma-separated).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    /// Metric parameter of the boundary, in (0,1).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Level depth `n` used by level sums, calibration and profiles.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Bound on the simultaneous infected population per run.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub population_cap: Option<usize>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendArg {
    Gillespie,
    Percolation,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Snapshot times (default: 11 equally spaced times up to the horizon).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
pub enum Target {
    #[serde(rename = "u")]
    U,
    #[serde(rename = "beta")]
    Beta,
    #[serde(rename = "eta")]
    Eta,
    #[serde(rename = "theta")]
    Theta,
    #[serde(rename = "H", alias = "h")]
    #[value(name = "H", alias = "h")]
    H,
    #[serde(rename = "b")]
    B,
    #[serde(rename = "profile")]
    Profile,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    /// Observable to estimate.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    /// Vertices for `u`, as words like `a1.a2'` (default: all words up to the depth).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub words: Option<Vec<String>>,
    /// Largest power `n` of each letter used by `beta`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// Times for `eta`.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    /// Speeds `s` for `profile`.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<Vec<f64>>,
    /// Exponents for `theta`, `H` and `b`.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Montecarlo,
    Analytic,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PhaseArgs {
    /// Ray directions, `;`-separated, coordinates comma-separated (e.g. `1,1;1,2`).
    /// Defaults to the rates vector.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directions: Option<String>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    /// Bracket width at which bisection stops.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Normal quantile of the Monte Carlo tests.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    /// Free weights `b_1..b_d`; calibrated from the rates when absent.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    /// Margin within which `θ2 = 1` counts as critical.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criticality_tol: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GwArgs {
    /// Simulate a Bernoulli-offspring tree with these label probabilities
    /// instead of extracting from the process.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    /// Embedded tree index `r`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generations: Option<usize>,
    /// Time allowed for each trail search.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_horizon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_generation_size: Option<usize>,
}

/// The merged configuration. Fields left `None` by both file and flags
/// take per-command defaults in [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: Option<usize>,
    pub rates: Vec<f64>,
    pub alpha: Option<f64>,
    pub horizon: Option<f64>,
    pub runs: Option<u64>,
    pub seed: Option<u64>,
    pub depth: Option<usize>,
    pub population_cap: Option<usize>,
    pub out: Option<PathBuf>,
    pub snapshots: Option<Vec<f64>>,
    pub backend: Option<BackendArg>,
    pub target: Option<Target>,
    pub words: Option<Vec<String>>,
    pub n_max: Option<usize>,
    pub t_grid: Option<Vec<f64>>,
    pub s_grid: Option<Vec<f64>>,
    pub rho: Option<Vec<f64>>,
    pub directions: Option<Vec<Vec<f64>>>,
    pub mode: Option<ModeArg>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub tol: Option<f64>,
    pub z: Option<f64>,
    pub b: Option<Vec<f64>>,
    pub criticality_tol: Option<f64>,
    pub q: Option<Vec<f64>>,
    pub r: Option<u32>,
    pub generations: Option<usize>,
    pub step_horizon: Option<f64>,
    pub max_generation_size: Option<usize>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_directions(s: &str) -> Result<Vec<Vec<f64>>, CliError> {
    s.split(';')
        .map(|ray| {
            ray.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| usage(format!("malformed direction {ray:?}"))))
                .collect()
        })
        .collect()
}

fn overlay(base: &mut Map<String, Value>, flags: impl Serialize) -> Result<(), CliError> {
    match serde_json::to_value(flags).map_err(|e| usage(e.to_string()))? {
        Value::Object(m) => base.extend(m),
        _ => unreachable!("flag structs serialize to objects"),
    }
    Ok(())
}

fn read_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(usage(format!("{}: config must be a JSON object", path.display()))),
        Err(e) => Err(usage(format!("{}: {e}", path.display()))),
    }
}

impl ExperimentConfig {
    /// Merges the config file (if any) with the command's flags.
    pub fn from_command(cmd: &Command) -> Result<Self, CliError> {
        let (common, opts) = match cmd {
            Command::Simulate { common, opts } => (common, serde_json::to_value(opts)),
            Command::Estimate { common, opts } => (common, serde_json::to_value(opts)),
            Command::Phase { common, opts } => (common, serde_json::to_value(opts)),
            Command::Report { common, opts } => (common, serde_json::to_value(opts)),
            Command::Gw { common, opts } => (common, serde_json::to_value(opts)),
        };
        let mut merged = match &common.config {
            Some(path) => read_file(path)?,
            None => Map::new(),
        };
        overlay(&mut merged, common)?;
        let mut opts = opts.map_err(|e| usage(e.to_string()))?;
        if let Some(Value::String(s)) = opts.get("directions") {
            let parsed = parse_directions(s)?;
            opts["directions"] = serde_json::to_value(parsed).map_err(|e| usage(e.to_string()))?;
        }
        overlay(&mut merged, opts)?;
        serde_json::from_value(Value::Object(merged)).map_err(|e| usage(format!("config: {e}")))
    }

    /// Fills per-command defaults and checks the shared preconditions.
    pub fn resolve(mut self, command: &str) -> Result<Self, CliError> {
        let (runs, horizon, depth, cap) = match command {
            "phase" => (10_000, 100.0, 4, 5000),
            "gw" => (200, 200.0, 3, 100_000),
            _ => (1000, 50.0, 3, 200_000),
        };
        self.runs.get_or_insert(runs);
        self.horizon.get_or_insert(horizon);
        self.depth.get_or_insert(depth);
        self.population_cap.get_or_insert(cap);
        self.seed.get_or_insert(0);
        self.alpha.get_or_insert(0.5);
        self.out.get_or_insert_with(|| PathBuf::from("treecp-out"));
        self.check_rates()?;
        match command {
            "simulate" => {
                self.require_rates()?;
                let h = self.horizon();
                self.snapshots.get_or_insert_with(|| (0..=10).map(|k| h * k as f64 / 10.0).collect());
                self.backend.get_or_insert(BackendArg::Gillespie);
            }
            "estimate" => {
                self.require_rates()?;
                let Some(target) = self.target else { return Err(usage("estimate needs --target")) };
                match target {
                    Target::Beta => {
                        self.n_max.get_or_insert(6);
                    }
                    Target::Eta => {
                        let h = self.horizon();
                        self.t_grid.get_or_insert_with(|| (1..=10).map(|k| h * k as f64 / 10.0).collect());
                    }
                    Target::Profile => {
                        let grid = self.s_grid.get_or_insert_with(|| (1..=20).map(|k| 0.25 * k as f64).collect());
                        if grid.is_empty() || grid.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                            return Err(usage("s_grid must hold positive finite speeds"));
                        }
                        if grid.windows(2).any(|w| w[0] >= w[1]) {
                            return Err(usage("s_grid must be strictly increasing"));
                        }
                    }
                    Target::Theta | Target::H | Target::B => {
                        self.rho.get_or_insert_with(|| vec![1.0, 2.0]);
                    }
                    Target::U => {}
                }
            }
            "phase" => {
                if self.directions.is_none() {
                    self.require_rates()?;
                    self.directions = Some(vec![self.rates.clone()]);
                }
                self.mode.get_or_insert(ModeArg::Montecarlo);
                self.t_min.get_or_insert(0.05);
                self.t_max.get_or_insert(4.0);
                self.tol.get_or_insert(0.02);
                self.z.get_or_insert(1.96);
            }
            "report" => {
                if self.b.is_none() {
                    self.require_rates()?;
                }
                self.criticality_tol.get_or_insert(1e-3);
            }
            "gw" => {
                if self.q.is_none() {
                    self.require_rates()?;
                    self.r.get_or_insert(1);
                    self.step_horizon.get_or_insert(200.0);
                    self.max_generation_size.get_or_insert(2000);
                }
                self.generations.get_or_insert(if self.q.is_some() { 12 } else { 3 });
            }
            _ => {}
        }
        let alpha = self.alpha();
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(usage(format!("alpha must lie in (0,1), got {alpha}")));
        }
        if !(self.horizon() > 0.0 && self.horizon().is_finite()) {
            return Err(usage("horizon must be positive and finite"));
        }
        if self.runs() == 0 {
            return Err(usage("runs must be at least 1"));
        }
        Ok(self)
    }

    fn check_rates(&mut self) -> Result<(), CliError> {
        if self.rates.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(usage("rates must be finite and nonnegative"));
        }
        match (self.d, self.rates.len()) {
            (_, 0) => Ok(()),
            (None, n) => {
                self.d = Some(n);
                Ok(())
            }
            (Some(d), 1) if d > 1 => {
                self.rates = vec![self.rates[0]; d];
                Ok(())
            }
            (Some(d), n) if d == n => Ok(()),
            (Some(d), n) => Err(usage(format!("--d {d} does not match {n} rates"))),
        }
    }

    fn require_rates(&self) -> Result<(), CliError> {
        if self.rates.is_empty() {
            Err(usage("missing --rates"))
        } else {
            Ok(())
        }
    }

    pub fn runs(&self) -> u64 {
        self.runs.unwrap_or(1)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(1.0)
    }

    pub fn depth(&self) -> usize {
        self.depth.unwrap_or(1)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(0.5)
    }

    pub fn population_cap(&self) -> usize {
        self.population_cap.unwrap_or(treecp::estimators::DEFAULT_ESTIMATOR_CAP)
    }

    pub fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("treecp-out"))
    }
}
