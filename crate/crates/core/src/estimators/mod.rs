//! Monte Carlo estimators built on replicated runs.
//!
//! Every estimator takes an [`Mc`] budget. Replicate `k` is driven by
//! `replicate_seed(seed, k)`, so the same budget with the same seed replays
//! the same trajectories in any estimator; estimates computed from one seed
//! are paired. With [`Mc::coupled`] runs are evaluated on a percolation
//! window with fixed reference rates, which couples different rate vectors
//! monotonically.

mod eta;
mod hitting;
mod levels;
mod profile;

use serde::Serialize;

pub use eta::estimate_eta;
pub use hitting::{estimate_beta, estimate_u, estimate_u_many, estimate_u_t, estimate_w, BetaEstimate, TrailEstimate};
pub use levels::{
    calibrate_b, estimate_h, estimate_h_multi, estimate_level_ratio, estimate_theta, level_ratio, BVector,
    HMatrixEstimate,
};
pub use profile::{estimate_growth_profile, GrowthProfile};

use crate::engine::{run_in, Driver, PercolationWindow, Rates, Region, RunConfig, RunRecord, StopFn};
use crate::error::{param, Result};
use crate::rng::replicate_seed;
use crate::stats::Flag;

/// Default bound on the simultaneous infected population in estimator runs.
pub const DEFAULT_ESTIMATOR_CAP: usize = 200_000;

/// Replication budget shared by the estimators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mc {
    pub runs: u64,
    pub horizon: f64,
    pub seed: u64,
    pub population_cap: usize,
    /// Reference rates of a shared percolation window, if coupled.
    pub coupling: Option<Vec<f64>>,
    /// Run on the tree truncated at this depth.
    pub truncate: Option<u32>,
}

impl Mc {
    pub fn new(runs: u64, horizon: f64, seed: u64) -> Self {
        Self { runs, horizon, seed, population_cap: DEFAULT_ESTIMATOR_CAP, coupling: None, truncate: None }
    }

    pub fn cap(mut self, population_cap: usize) -> Self {
        self.population_cap = population_cap;
        self
    }

    /// Couple through percolation windows with these (unexpanded)
    /// reference rates; every rate vector used must lie below them.
    pub fn coupled(mut self, reference: &Rates) -> Self {
        self.coupling = Some(reference.expanded().to_vec());
        self
    }

    pub fn truncate(mut self, depth: u32) -> Self {
        self.truncate = Some(depth);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return param("runs must be at least 1");
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return param(format!("horizon must be positive and finite, got {}", self.horizon));
        }
        Ok(())
    }

    pub(crate) fn config(&self) -> RunConfig {
        let cfg = RunConfig::new(self.horizon).population_cap(self.population_cap);
        match self.truncate {
            Some(depth) => cfg.truncate(depth),
            None => cfg,
        }
    }

    /// Replicate `k` under `cfg`.
    pub(crate) fn replicate(
        &self,
        rates: &Rates,
        cfg: &RunConfig,
        region: &Region,
        stop: Option<StopFn>,
        k: u64,
    ) -> Result<RunRecord> {
        let seed = replicate_seed(self.seed, k);
        match &self.coupling {
            None => run_in(rates, cfg, region, Driver::Gillespie { seed }, stop, seed),
            Some(reference) => {
                let window = PercolationWindow::new(seed, reference);
                run_in(rates, cfg, region, Driver::Window { window: &window, thinning: None }, stop, seed)
            }
        }
    }
}

/// Runs `map` over all replicates and folds the results in replicate order.
pub(crate) fn replicates<T: Send, A>(
    n: u64,
    init: A,
    map: impl Fn(u64) -> Result<T> + Sync,
    mut fold: impl FnMut(A, T) -> A,
) -> Result<A> {
    crate::parallel::fold_replicates(n, Ok(init), map, |acc, _, t| Ok(fold(acc?, t?)))
}

/// Horizon chosen as 4× the 99th percentile of pilot extinction times,
/// clamped into `[floor, ceiling]`. Returns the horizon and any flags
/// (`CapReached` when some pilots did not die out by `ceiling`).
pub fn adaptive_horizon(rates: &Rates, pilots: u64, seed: u64, floor: f64, ceiling: f64) -> Result<(f64, Vec<Flag>)> {
    if pilots == 0 || !(floor > 0.0 && floor <= ceiling) {
        return param("adaptive horizon needs pilots > 0 and 0 < floor <= ceiling");
    }
    let mc = Mc::new(pilots, ceiling, seed ^ 0x9e37_79b9).cap(20_000);
    let cfg = mc.config();
    let region = Region::whole(rates.alphabet());
    let times = replicates(
        pilots,
        Vec::new(),
        |k| mc.replicate(rates, &cfg, &region, None, k).map(|r| r.extinction_time),
        |mut v, t| {
            v.push(t);
            v
        },
    )?;
    // survivors count as infinitely late extinctions
    let mut ext: Vec<f64> = times.iter().map(|t| t.unwrap_or(f64::INFINITY)).collect();
    let mut flags = Vec::new();
    if ext.iter().any(|t| t.is_infinite()) {
        flags.push(Flag::CapReached);
    }
    ext.sort_by(f64::total_cmp);
    let idx = ((0.99 * ext.len() as f64).ceil() as usize).clamp(1, ext.len()) - 1;
    let h = 4.0 * ext[idx];
    if h > ceiling || h < floor {
        flags.push(Flag::Clamped);
    }
    Ok((h.clamp(floor, ceiling), flags))
}
