//! Continuous-time simulation of the contact process on `T_{2d}`.
//!
//! Infected vertices recover at rate 1, and an infected `x` attempts to
//! infect `x i` at rate `λ_i` (attempts onto infected vertices are drawn and
//! discarded). The process starts from `A_0 = {1}`.
//!
//! Two samplers are provided. [`Backend::Gillespie`] is a next-event
//! simulation and the default. [`Backend::Percolation`] evaluates the
//! graphical representation on an explicit [`PercolationWindow`], which is
//! what couples several runs pathwise (thinning, restriction to a subtree,
//! ladders of rates).

mod record;
mod sim;
pub(crate) mod tree;
pub mod window;

use serde::Serialize;

pub use record::{EventCounts, RunRecord, Snapshot, Status};
pub use window::PercolationWindow;

use crate::cayley::{Alphabet, Letter, Word};
use crate::error::{param, Result};
use crate::rng::replicate_seed;

/// Symmetric infection rates `λ_i = λ_{i^{-1}}`; recovery rate is 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rates {
    alphabet: Alphabet,
    lambda: Vec<f64>,
    #[serde(skip)]
    expanded: Vec<f64>,
}

impl Rates {
    /// `lambda[k]` is the rate along `a_{k+1}` and `a_{k+1}^{-1}`.
    pub fn new(lambda: &[f64]) -> Result<Self> {
        let alphabet = Alphabet::new(lambda.len())?;
        if let Some(bad) = lambda.iter().find(|l| !l.is_finite() || **l < 0.0) {
            return param(format!("rates must be finite and nonnegative, got {bad}"));
        }
        let mut expanded = lambda.to_vec();
        expanded.extend_from_slice(lambda);
        Ok(Self { alphabet, lambda: lambda.to_vec(), expanded })
    }

    pub fn isotropic(d: usize, lambda: f64) -> Result<Self> {
        Self::new(&vec![lambda; d])
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn d(&self) -> usize {
        self.alphabet.d()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// Per-letter rates, length `2d`.
    pub fn expanded(&self) -> &[f64] {
        &self.expanded
    }

    #[inline]
    pub fn of(&self, letter: Letter) -> f64 {
        self.expanded[letter as usize]
    }

    /// `Σ_{i ∈ A} λ_i`.
    pub fn total(&self) -> f64 {
        self.expanded.iter().sum()
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(&self.lambda.iter().map(|l| l * t).collect::<Vec<_>>())
    }

    /// Smallest positive rate.
    pub fn min_positive(&self) -> Option<f64> {
        self.lambda.iter().copied().filter(|l| *l > 0.0).min_by(f64::total_cmp)
    }

    pub fn is_isotropic(&self) -> bool {
        self.lambda.windows(2).all(|w| w[0] == w[1])
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &Rates) -> bool {
        self.d() == other.d() && self.lambda.iter().zip(&other.lambda).all(|(a, b)| a <= b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Gillespie,
    Percolation,
}

pub const DEFAULT_DEPTH_CAP: u32 = 10_000;
pub const DEFAULT_POPULATION_CAP: usize = 1 << 20;

/// Options for a single run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub horizon: f64,
    /// Times at which the state is recorded (must lie in `[0, horizon]`).
    pub snapshot_times: Vec<f64>,
    /// Vertices whose first-hit time and snapshot membership are tracked.
    pub watch: Vec<Word>,
    /// End the run once every watched vertex has been infected.
    pub stop_when_watched_hit: bool,
    /// Abort if a vertex deeper than this is infected.
    pub depth_cap: u32,
    /// Abort once more than this many vertices are infected at once.
    pub population_cap: usize,
    /// Vertices deeper than this do not exist (finite truncation).
    pub truncate_depth: Option<u32>,
    /// Store the infected set (as vertex keys) at each snapshot.
    pub record_infected: bool,
    pub backend: Backend,
}

impl RunConfig {
    pub fn new(horizon: f64) -> Self {
        Self {
            horizon,
            snapshot_times: Vec::new(),
            watch: Vec::new(),
            stop_when_watched_hit: false,
            depth_cap: DEFAULT_DEPTH_CAP,
            population_cap: DEFAULT_POPULATION_CAP,
            truncate_depth: None,
            record_infected: false,
            backend: Backend::Gillespie,
        }
    }

    pub fn snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn watching(mut self, watch: Vec<Word>, stop_when_hit: bool) -> Self {
        self.watch = watch;
        self.stop_when_watched_hit = stop_when_hit;
        self
    }

    pub fn backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn population_cap(mut self, cap: usize) -> Self {
        self.population_cap = cap;
        self
    }

    pub fn truncate(mut self, depth: u32) -> Self {
        self.truncate_depth = Some(depth);
        self
    }

    pub fn record_infected(mut self) -> Self {
        self.record_infected = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return param(format!("horizon must be positive and finite, got {}", self.horizon));
        }
        if let Some(t) = self.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= self.horizon)) {
            return param(format!("snapshot time {t} outside [0, horizon]"));
        }
        if self.snapshot_times.windows(2).any(|w| w[0] > w[1]) {
            return param("snapshot times must be nondecreasing");
        }
        Ok(())
    }
}

/// Live view of a run, passed to stop predicates.
#[derive(Debug, Clone, Copy)]
pub struct ProcessView {
    pub time: f64,
    pub population: usize,
    pub max_depth_infected: u32,
    /// Depth of the vertex touched by the last event.
    pub last_depth: u32,
    /// Whether the last event infected the root `1`.
    pub root_infected_now: bool,
}

pub type StopFn<'a> = &'a dyn Fn(&ProcessView) -> bool;

/// Where a run starts and which part of the tree it may use.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    /// Initially infected vertex.
    pub origin: Word,
    pub start_time: f64,
    /// Letter at the origin whose branch is excluded.
    pub blocked: Option<Letter>,
    /// Vertices at this depth absorb trails: they are recorded when first
    /// reached and never infect anything.
    pub sink_depth: Option<u32>,
}

impl Region {
    pub fn whole(alphabet: Alphabet) -> Self {
        Self { origin: alphabet.root(), start_time: 0.0, blocked: None, sink_depth: None }
    }

    /// The subtree `T* = T − T(a^{-1})` with trails stopped at `level`.
    pub fn downward(alphabet: Alphabet, base_letter: Letter, level: u32) -> Self {
        Self {
            origin: alphabet.root(),
            start_time: 0.0,
            blocked: Some(alphabet.inv(base_letter)),
            sink_depth: Some(level),
        }
    }

    /// `T(x)` entered at `(start, x)`, trails stopped `r` levels below `x`.
    pub fn below(x: Word, start: f64, r: u32) -> Self {
        let depth = x.len() as u32 + r;
        Self { origin: x, start_time: start, blocked: None, sink_depth: Some(depth) }
    }

    fn is_restricted(&self) -> bool {
        self.blocked.is_some() || self.sink_depth.is_some() || !self.origin.is_root()
    }
}

/// Sampler choice plus the coupling data it needs.
#[derive(Debug, Clone)]
pub enum Driver<'w> {
    Gillespie { seed: u64 },
    Window { window: &'w PercolationWindow, thinning: Option<f64> },
}

/// Simulates one trajectory of the process started from `{1}`.
pub fn run(rates: &Rates, cfg: &RunConfig, seed: u64, stop: Option<StopFn>) -> Result<RunRecord> {
    let region = Region::whole(rates.alphabet());
    match cfg.backend {
        Backend::Gillespie => run_in(rates, cfg, &region, Driver::Gillespie { seed }, stop, seed),
        Backend::Percolation => {
            let window = PercolationWindow::new(seed, rates.expanded());
            run_in(rates, cfg, &region, Driver::Window { window: &window, thinning: None }, stop, seed)
        }
    }
}

/// General entry point: any region, any driver.
pub fn run_in(
    rates: &Rates,
    cfg: &RunConfig,
    region: &Region,
    driver: Driver,
    stop: Option<StopFn>,
    seed: u64,
) -> Result<RunRecord> {
    cfg.validate()?;
    if region.origin.alphabet() != rates.alphabet() {
        return param("region and rates use different alphabets");
    }
    match driver {
        Driver::Gillespie { seed: s } => sim::gillespie(rates, cfg, region, s, stop, seed),
        Driver::Window { window, thinning } => {
            if let Some(p) = thinning {
                if !(p > 0.0 && p <= 1.0) {
                    return param(format!("thinning probability must lie in (0,1], got {p}"));
                }
            }
            for (i, &l) in rates.expanded().iter().enumerate() {
                if l > window.ref_rate(i + 1) * (1.0 + 1e-12) {
                    return param("rates exceed the window's reference rates");
                }
            }
            sim::percolation(rates, cfg, region, window, thinning, stop, seed)
        }
    }
}

/// Runs the process and its `p`-thinned version on one shared percolation
/// structure. Returns `(original, thinned)`.
pub fn run_coupled_thinned(rates: &Rates, p: f64, cfg: &RunConfig, seed: u64) -> Result<(RunRecord, RunRecord)> {
    if !(p > 0.0 && p < 1.0) {
        return param(format!("p must lie in (0,1), got {p}"));
    }
    if rates.min_positive().is_none() {
        return param("thinning needs at least one positive rate");
    }
    run_coupled_thinned_unchecked(rates, p, cfg, seed)
}

pub(crate) fn run_coupled_thinned_unchecked(
    rates: &Rates,
    p: f64,
    cfg: &RunConfig,
    seed: u64,
) -> Result<(RunRecord, RunRecord)> {
    let window = PercolationWindow::new(seed, rates.expanded());
    let region = Region::whole(rates.alphabet());
    let original = run_in(rates, cfg, &region, Driver::Window { window: &window, thinning: None }, None, seed)?;
    let thinned = run_in(rates, cfg, &region, Driver::Window { window: &window, thinning: Some(p) }, None, seed)?;
    Ok((original, thinned))
}

/// Rates of the contact process equivalent in law to the `p`-thinned one
/// after the time change that restores recovery rate 1 at the smallest rate:
/// `λ̃_i = p λ_i / (1 + q λ_c)`.
pub fn thinned_rates(rates: &Rates, p: f64) -> Result<Rates> {
    let lc = rates.min_positive().ok_or_else(|| crate::Error::Parameter("no positive rate".into()))?;
    let q = 1.0 - p;
    Rates::new(&rates.lambda().iter().map(|l| p * l / (1.0 + q * lc)).collect::<Vec<_>>())
}

/// Downward-trail run: confined to `T*` (the branch through `a^{-1}` at the
/// root is excluded) with trails absorbed at `level`. The record's
/// [`RunRecord::sink_hits`] lists the level vertices reached.
pub fn run_restricted(rates: &Rates, base_letter: Letter, level: u32, cfg: &RunConfig, seed: u64) -> Result<RunRecord> {
    if level == 0 {
        return param("target level must be at least 1");
    }
    let region = Region::downward(rates.alphabet(), base_letter, level);
    match cfg.backend {
        Backend::Gillespie => run_in(rates, cfg, &region, Driver::Gillespie { seed }, None, seed),
        Backend::Percolation => {
            let window = PercolationWindow::new(seed, rates.expanded());
            run_in(rates, cfg, &region, Driver::Window { window: &window, thinning: None }, None, seed)
        }
    }
}

/// Seed of replicate `k` of an experiment with master seed `master`.
pub fn replicate(master: u64, k: u64) -> u64 {
    replicate_seed(master, k)
}
