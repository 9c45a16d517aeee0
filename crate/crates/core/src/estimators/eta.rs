//! Decay rate `η` of `P{1 ∈ A_t}`.

use super::{replicates, Mc};
use crate::engine::{Rates, Region};
use crate::error::{param, Result};
use crate::stats::{weighted_line_fit, Estimate, Flag};

/// `η̂ = exp(slope)` of a weighted fit of `log P̂{1 ∈ A_t}` against `t` over
/// `t_grid`. Runs stopped by a cap before a grid time are left out of that
/// time's denominator (flagged). The result is clamped to at most 1.
pub fn estimate_eta(rates: &Rates, t_grid: &[f64], mc: &Mc) -> Result<Estimate> {
    mc.validate()?;
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| w[0] >= w[1]) || t_grid[0] < 0.0 {
        return param("t_grid must hold at least two increasing nonnegative times");
    }
    let last = *t_grid.last().unwrap_or(&0.0);
    let mc = Mc { horizon: mc.horizon.max(last), ..mc.clone() };
    let cfg = mc.config().snapshots(t_grid.to_vec());
    let region = Region::whole(rates.alphabet());
    let m = t_grid.len();
    let (inside, seen) = replicates(
        mc.runs,
        (vec![0u64; m], vec![0u64; m]),
        |k| {
            let r = mc.replicate(rates, &cfg, &region, None, k)?;
            Ok(r.snapshots.iter().map(|s| s.root_infected).collect::<Vec<bool>>())
        },
        |(mut inside, mut seen), snaps| {
            for (i, &b) in snaps.iter().enumerate() {
                inside[i] += b as u64;
                seen[i] += 1;
            }
            (inside, seen)
        },
    )?;
    let mut flags = Vec::new();
    if seen.iter().any(|&s| s < mc.runs) {
        flags.push(Flag::CapReached);
    }
    let (mut xs, mut ys, mut ws) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..m {
        if seen[i] == 0 {
            continue;
        }
        let n = seen[i] as f64;
        let p = inside[i] as f64 / n;
        if p == 0.0 {
            flags.push(Flag::Censored);
            continue;
        }
        xs.push(t_grid[i]);
        ys.push(p.ln());
        ws.push(n * p / (1.0 - p).max(1.0 / n));
    }
    let mut e = match weighted_line_fit(&xs, &ys, &ws) {
        Some(fit) => {
            let se = fit.slope_se.max(fit.slope_se_resid);
            let mut e = Estimate::new(fit.slope.exp(), fit.slope.exp() * se, mc.runs, "eta:log-linear-wls");
            if fit.slope > 0.0 {
                e.value = 1.0;
                e.flag(Flag::Clamped);
            }
            // survival indistinguishable from 1 across the whole grid
            if ys.iter().all(|y| *y > -1.0 / mc.runs as f64) {
                e.flag(Flag::Degenerate);
            }
            e
        }
        None => Estimate::new(0.0, f64::INFINITY, mc.runs, "eta:log-linear-wls").with_flag(Flag::Degenerate),
    };
    for f in flags {
        e.flag(f);
    }
    Ok(e)
}
