//! Space-time growth profile `Φ̂(s) = (1/n) log E N_n(ns)`.

use serde::Serialize;

use super::{replicates, Mc};
use crate::engine::{Rates, Region};
use crate::error::{param, Result};
use crate::stats::{mean_stderr, Estimate, Flag};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthProfile {
    pub n: usize,
    pub s: Vec<f64>,
    pub phi: Vec<Estimate>,
    /// Smallest upward zero crossing of `Φ̂`.
    pub s1: Option<f64>,
    /// Largest downward zero crossing of `Φ̂`.
    pub s2: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<Flag>,
}

/// `Φ̂(s) = (1/n) log( mean over runs of |A_{ns} ∩ G_n| )` on `s_grid`, with
/// crossings located by linear interpolation. Runs stopped by a cap before
/// `ns` are excluded at that `s` (flagged).
pub fn estimate_growth_profile(rates: &Rates, s_grid: &[f64], n: usize, mc: &Mc) -> Result<GrowthProfile> {
    mc.validate()?;
    if n == 0 {
        return param("profile depth must be at least 1");
    }
    if s_grid.is_empty() || s_grid[0] <= 0.0 || s_grid.windows(2).any(|w| w[0] >= w[1]) {
        return param("s_grid must be positive and strictly increasing");
    }
    if s_grid.iter().any(|s| !s.is_finite()) {
        return param("s_grid must be finite");
    }
    let times: Vec<f64> = s_grid.iter().map(|s| s * n as f64).collect();
    let last = *times.last().unwrap_or(&0.0);
    let mc = Mc { horizon: mc.horizon.max(last), ..mc.clone() };
    let cfg = mc.config().snapshots(times);
    let region = Region::whole(rates.alphabet());
    let m = s_grid.len();
    let samples = replicates(
        mc.runs,
        vec![Vec::new(); m],
        |k| {
            let r = mc.replicate(rates, &cfg, &region, None, k)?;
            Ok(r.snapshots.iter().map(|s| s.level(n) as f64).collect::<Vec<f64>>())
        },
        |mut acc: Vec<Vec<f64>>, counts| {
            for (i, c) in counts.into_iter().enumerate() {
                acc[i].push(c);
            }
            acc
        },
    )?;
    let mut flags = Vec::new();
    let phi: Vec<Estimate> = samples
        .iter()
        .map(|xs| {
            let (mean, se) = mean_stderr(xs);
            let mut e = if xs.is_empty() || mean <= 0.0 {
                Estimate::new(f64::NEG_INFINITY, f64::INFINITY, mc.runs, "profile:level-mean")
                    .with_flag(Flag::NegInfinite)
            } else {
                Estimate::new(mean.ln() / n as f64, se / (mean * n as f64), xs.len() as u64, "profile:level-mean")
            };
            if (xs.len() as u64) < mc.runs {
                e.flag(Flag::CapReached);
            }
            e
        })
        .collect();
    let values: Vec<f64> = phi.iter().map(|e| e.value).collect();
    let (s1, s2) = crossings(s_grid, &values);
    if s1.is_none() || s2.is_none() {
        flags.push(Flag::NoCrossing);
    }
    if phi.iter().any(|e| e.has(Flag::CapReached)) {
        flags.push(Flag::CapReached);
    }
    Ok(GrowthProfile { n, s: s_grid.to_vec(), phi, s1, s2, flags })
}

/// First upward and last downward zero crossing of `y` on grid `x`.
pub(crate) fn crossings(x: &[f64], y: &[f64]) -> (Option<f64>, Option<f64>) {
    let cross = |k: usize| {
        let (y0, y1) = (y[k], y[k + 1]);
        if y0.is_finite() && y1.is_finite() {
            x[k] + (x[k + 1] - x[k]) * y0 / (y0 - y1)
        } else {
            0.5 * (x[k] + x[k + 1])
        }
    };
    let mut up = None;
    let mut down = None;
    for k in 0..y.len().saturating_sub(1) {
        if up.is_none() && y[k] < 0.0 && y[k + 1] >= 0.0 {
            up = Some(cross(k));
        }
        if y[k] >= 0.0 && y[k + 1] < 0.0 {
            down = Some(cross(k));
        }
    }
    (up, down)
}
