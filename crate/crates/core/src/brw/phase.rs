//! Ray scans of the phase diagram: along `λ = t u` for a unit direction `u`,
//! locate `t1` (global survival) and `t2` (strong survival).
//!
//! Every evaluation at a point `t` simulates once and builds the level
//! matrices `Ĥ_1`, `Ĥ_2` at depths `n` and `n + 1`:
//!
//! - Monte Carlo mode tests the level ratios `θ̂_ρ = Σ_{G_{n+1}} û^ρ / Σ_{G_n} û^ρ`
//!   against 1. A point is below a boundary when `θ̂ + z·se < 1` and above
//!   it when `θ̂ - z·se > 1`; the interval between the last point below and
//!   the first point above is the confidence interval.
//! - Analytic mode calibrates `b̂` from `Ĥ_1` and bisects on the sign of
//!   `q1(b̂)` and `q2(b̂)`. The singularity `R` of the system along `u` is
//!   reported alongside; it lives on the `z` scale, not the `λ` scale.
//!
//! Direction coordinates are sorted before simulating. Relabelling
//! generators is a tree automorphism, so the law is unchanged and permuted
//! directions produce identical output.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{criticality_residuals, find_singularity, Singularity};
use crate::engine::Rates;
use crate::error::{param, Result};
use crate::estimators::{calibrate_b, estimate_h_multi, level_ratio, Mc};
use crate::stats::Estimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    Analytic,
    MonteCarlo,
}

impl ScanMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Analytic => "analytic",
            Self::MonteCarlo => "montecarlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanBudget {
    /// Runs per evaluated point.
    pub runs: u64,
    pub seed: u64,
    /// Lower depth `n` of the level ratio.
    pub depth: usize,
    pub population_cap: usize,
    pub horizon: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Bracket width at which bisection stops.
    pub tol: f64,
    /// Two-sided normal quantile for the Monte Carlo tests.
    pub z: f64,
}

impl Default for ScanBudget {
    fn default() -> Self {
        Self {
            runs: 10_000,
            seed: 0,
            depth: 4,
            population_cap: 5000,
            horizon: 100.0,
            t_min: 0.05,
            t_max: 4.0,
            tol: 0.02,
            z: 1.96,
        }
    }
}

impl ScanBudget {
    fn validate(&self) -> Result<()> {
        if self.runs < 2 || self.depth == 0 || self.population_cap == 0 {
            return param("scan budget needs runs >= 2, depth >= 1 and a positive population cap");
        }
        if !(self.t_min > 0.0 && self.t_min < self.t_max && self.t_max.is_finite()) {
            return param("scan range must satisfy 0 < t_min < t_max < inf");
        }
        if !(self.tol > 0.0 && self.z > 0.0 && self.horizon > 0.0) {
            return param("tol, z and horizon must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanFlag {
    /// No point in range was classified above the first boundary.
    T1Unbracketed,
    /// No point in range was classified above the second boundary.
    T2Unbracketed,
}

impl ScanFlag {
    pub fn name(self) -> &'static str {
        match self {
            Self::T1Unbracketed => "t1_unbracketed",
            Self::T2Unbracketed => "t2_unbracketed",
        }
    }
}

/// One evaluated point of a ray.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayPoint {
    pub t: f64,
    pub theta1: Estimate,
    pub theta2: Estimate,
    /// Calibrated weights in the sorted letter order.
    pub b: Vec<f64>,
    pub q1: f64,
    pub q2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayScan {
    /// Unit direction, in the order given.
    pub direction: Vec<f64>,
    pub mode: ScanMode,
    pub t1: f64,
    pub t1_ci: Option<(f64, f64)>,
    pub t2: f64,
    pub t2_ci: Option<(f64, f64)>,
    /// Singularity along the direction (analytic mode), on the `z` scale.
    pub singularity: Option<Singularity>,
    pub points: Vec<RayPoint>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<ScanFlag>,
}

impl RayScan {
    pub const CSV_HEADER: &'static str = "direction,t1,t1_lo,t1_hi,t2,t2_lo,t2_hi,mode,flags";

    /// Row matching [`Self::CSV_HEADER`]; direction and flags are `;`-joined.
    pub fn csv_row(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        let ci = |c: Option<(f64, f64)>| c.map(|(a, b)| format!("{a},{b}")).unwrap_or_else(|| ",".into());
        let flags = self.flags.iter().map(|f| f.name()).collect::<Vec<_>>().join(";");
        format!(
            "{},{},{},{},{},{},{}",
            join(&self.direction),
            self.t1,
            ci(self.t1_ci),
            self.t2,
            ci(self.t2_ci),
            self.mode.name(),
            flags
        )
    }
}

struct Evaluator<'a> {
    sorted: Vec<f64>,
    budget: &'a ScanBudget,
    cache: BTreeMap<u64, RayPoint>,
}

impl Evaluator<'_> {
    fn at(&mut self, t: f64) -> Result<&RayPoint> {
        let key = t.to_bits();
        if !self.cache.contains_key(&key) {
            let point = self.evaluate(t)?;
            self.cache.insert(key, point);
        }
        Ok(&self.cache[&key])
    }

    fn evaluate(&self, t: f64) -> Result<RayPoint> {
        let b = self.budget;
        let lambda: Vec<f64> = self.sorted.iter().map(|u| t * u).collect();
        let rates = Rates::new(&lambda)?;
        let mc = Mc::new(b.runs, b.horizon, b.seed).cap(b.population_cap);
        let h = estimate_h_multi(&[1.0, 2.0], &[b.depth, b.depth + 1], &rates, &mc)?;
        let weights = calibrate_b(&h[0][0], &h[0][1])?.b;
        let (q1, q2) = criticality_residuals(&weights)?;
        Ok(RayPoint {
            t,
            theta1: level_ratio(&h[0][0], &h[0][1]),
            theta2: level_ratio(&h[1][0], &h[1][1]),
            b: weights,
            q1,
            q2,
        })
    }

    /// Bisects for the switch of a predicate that is false at `lo` and true
    /// at `hi`; returns the final bracket.
    fn edge(&mut self, pred: &impl Fn(&RayPoint) -> bool, mut lo: f64, mut hi: f64) -> Result<(f64, f64)> {
        while hi - lo > self.budget.tol {
            let mid = 0.5 * (lo + hi);
            if pred(self.at(mid)?) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok((lo, hi))
    }

    /// Points in `[lo, hi]`, sorted by `t`.
    fn within(&self, lo: f64, hi: f64) -> Vec<&RayPoint> {
        let mut v: Vec<&RayPoint> = self.cache.values().filter(|p| p.t >= lo && p.t <= hi).collect();
        v.sort_by(|a, b| a.t.total_cmp(&b.t));
        v
    }
}

/// First upward crossing of `value = level` by linear interpolation.
fn crossing(points: &[&RayPoint], value: impl Fn(&RayPoint) -> f64, level: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let (a, b) = (value(w[0]), value(w[1]));
        (a < level && b >= level).then(|| w[0].t + (w[1].t - w[0].t) * (level - a) / (b - a))
    })
}

struct Boundary {
    t: f64,
    ci: Option<(f64, f64)>,
    unbracketed: bool,
}

fn mc_boundary(ev: &mut Evaluator, stat: impl Fn(&RayPoint) -> &Estimate) -> Result<Boundary> {
    let (z, t_min, t_max) = (ev.budget.z, ev.budget.t_min, ev.budget.t_max);
    let below = |p: &RayPoint| {
        let e = stat(p);
        e.value + z * e.stderr < 1.0
    };
    let above = |p: &RayPoint| {
        let e = stat(p);
        e.value - z * e.stderr > 1.0
    };
    let not_below = |p: &RayPoint| !below(p);
    let lower = if not_below(ev.at(t_min)?) {
        t_min
    } else if !not_below(ev.at(t_max)?) {
        t_max
    } else {
        ev.edge(&not_below, t_min, t_max)?.0
    };
    let (upper, unbracketed) = if !above(ev.at(t_max)?) {
        (t_max, true)
    } else if above(ev.at(lower)?) {
        (lower, false)
    } else {
        (ev.edge(&above, lower, t_max)?.1, false)
    };
    let points = ev.within(lower, upper);
    let t = crossing(&points, |p| stat(p).value, 1.0).unwrap_or(0.5 * (lower + upper));
    Ok(Boundary { t, ci: Some((lower, upper)), unbracketed })
}

fn analytic_boundary(ev: &mut Evaluator, q: impl Fn(&RayPoint) -> f64) -> Result<Boundary> {
    let (t_min, t_max) = (ev.budget.t_min, ev.budget.t_max);
    let pred = |p: &RayPoint| q(p) >= 0.0;
    if pred(ev.at(t_min)?) {
        return Ok(Boundary { t: t_min, ci: None, unbracketed: false });
    }
    if !pred(ev.at(t_max)?) {
        return Ok(Boundary { t: t_max, ci: None, unbracketed: true });
    }
    let (lo, hi) = ev.edge(&pred, t_min, t_max)?;
    let points = ev.within(lo, hi);
    let t = crossing(&points, &q, 0.0).unwrap_or(0.5 * (lo + hi));
    Ok(Boundary { t, ci: None, unbracketed: false })
}

/// Scans the ray `λ = t u`, `u = direction / |direction|`, for the two
/// phase boundaries.
pub fn phase_ray_scan(direction: &[f64], mode: ScanMode, budget: &ScanBudget) -> Result<RayScan> {
    budget.validate()?;
    if direction.is_empty() || direction.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return param("direction must be nonempty, finite and nonnegative");
    }
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return param("direction needs a positive entry");
    }
    let unit: Vec<f64> = direction.iter().map(|x| x / norm).collect();
    let mut sorted = unit.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut ev = Evaluator { sorted, budget, cache: BTreeMap::new() };
    let (b1, b2, singularity) = match mode {
        ScanMode::MonteCarlo => (mc_boundary(&mut ev, |p| &p.theta1)?, mc_boundary(&mut ev, |p| &p.theta2)?, None),
        ScanMode::Analytic => {
            let mut p = ev.sorted.clone();
            p.extend_from_slice(&ev.sorted);
            (analytic_boundary(&mut ev, |p| p.q1)?, analytic_boundary(&mut ev, |p| p.q2)?, Some(find_singularity(&p)?))
        }
    };
    let mut flags = Vec::new();
    if b1.unbracketed {
        flags.push(ScanFlag::T1Unbracketed);
    }
    if b2.unbracketed {
        flags.push(ScanFlag::T2Unbracketed);
    }
    let points = ev.cache.into_values().collect();
    Ok(RayScan { direction: unit, mode, t1: b1.t, t1_ci: b1.ci, t2: b2.t, t2_ci: b2.ci, singularity, points, flags })
}
