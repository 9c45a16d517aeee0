//! Hitting probabilities `u_x`, `u_{x,t}`, `w_x` and the exponents `β_i`.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{replicates, Mc};
use crate::cayley::{Letter, Word};
use crate::engine::{ProcessView, Rates, Region, Status};
use crate::error::{param, Result};
use crate::stats::{mean_stderr, weighted_line_fit, Estimate, Flag};

/// `û_x` for several vertices from one set of runs.
///
/// Each run watches all of `words` and stops once every one has been
/// infected. A vertex counts as hit if it was infected by the horizon; the
/// count at half the horizon is the sensitivity check.
pub fn estimate_u_many(words: &[Word], rates: &Rates, mc: &Mc) -> Result<Vec<Estimate>> {
    mc.validate()?;
    if let Some(w) = words.iter().find(|w| w.alphabet() != rates.alphabet()) {
        return param(format!("word {w} does not match the rates' alphabet"));
    }
    let cfg = mc.config().watching(words.to_vec(), true);
    let region = Region::whole(rates.alphabet());
    let m = words.len();
    let half = mc.horizon / 2.0;
    let init = (vec![0u64; m], vec![0u64; m], false);
    let (full, early, capped) = replicates(
        mc.runs,
        init,
        |k| {
            let r = mc.replicate(rates, &cfg, &region, None, k)?;
            Ok((r.watched_first_hit, r.status.capped()))
        },
        |(mut full, mut early, mut capped), (hits, cap)| {
            for (i, h) in hits.iter().enumerate() {
                if let Some(t) = h {
                    full[i] += 1;
                    early[i] += (*t <= half) as u64;
                } else if cap {
                    capped = true;
                }
            }
            (full, early, capped)
        },
    )?;
    Ok(words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            if w.is_root() {
                return Estimate::exact(1.0, "u:root");
            }
            let mut e = Estimate::proportion(full[i], mc.runs, "u:indicator");
            let late = (full[i] - early[i]) as f64 / mc.runs as f64;
            if e.stderr > 0.0 && late > 2.0 * e.stderr {
                e.flag(Flag::HorizonSensitive);
            }
            if capped {
                e.flag(Flag::CapReached);
            }
            e
        })
        .collect())
}

/// `û_x`: fraction of runs in which `x` is ever infected before the horizon.
pub fn estimate_u(x: &Word, rates: &Rates, mc: &Mc) -> Result<Estimate> {
    Ok(estimate_u_many(std::slice::from_ref(x), rates, mc)?.remove(0))
}

/// `û_{x,t}`: fraction of runs with `x ∈ A_t`.
pub fn estimate_u_t(x: &Word, t: f64, rates: &Rates, mc: &Mc) -> Result<Estimate> {
    mc.validate()?;
    if !(t >= 0.0 && t <= mc.horizon) {
        return param(format!("time {t} outside [0, horizon]"));
    }
    let cfg = mc.config().watching(vec![x.clone()], false).snapshots(vec![t]);
    let region = Region::whole(rates.alphabet());
    let stop = move |v: &ProcessView| v.time > t;
    let (hits, capped) = replicates(
        mc.runs,
        (0u64, false),
        |k| {
            let r = mc.replicate(rates, &cfg, &region, Some(&stop), k)?;
            let inside = r.snapshots.first().is_some_and(|s| s.watched[0]);
            Ok((inside, r.snapshots.is_empty() && r.status.capped()))
        },
        |(h, c), (inside, cap)| (h + inside as u64, c || cap),
    )?;
    let mut e = Estimate::proportion(hits, mc.runs, "u_t:indicator");
    if capped {
        e.flag(Flag::CapReached);
    }
    Ok(e)
}

/// `β̂_i` with the per-depth hitting estimates behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaEstimate {
    pub letter: Letter,
    pub estimate: Estimate,
    /// `û_{i^n}` for `n = 1..=n_max`.
    pub per_n: Vec<Estimate>,
}

/// `β̂_i = exp(slope)` of a weighted least-squares fit of `log û_{i^n}`
/// against `n`, using the depths with at least one hit. Weights are the
/// delta-method inverse variances `runs · û / (1 - û)`.
pub fn estimate_beta(letter: Letter, rates: &Rates, n_max: usize, mc: &Mc) -> Result<BetaEstimate> {
    let alpha = rates.alphabet();
    alpha.check(letter as usize)?;
    if n_max < 2 {
        return param("beta fit needs n_max >= 2");
    }
    if rates.of(letter) == 0.0 {
        return Ok(BetaEstimate {
            letter,
            estimate: Estimate::exact(0.0, "beta:zero-rate"),
            per_n: vec![Estimate::exact(0.0, "u:zero-rate"); n_max],
        });
    }
    let words: Vec<Word> = (1..=n_max).map(|n| Word::power(alpha, letter, n)).collect();
    let per_n = estimate_u_many(&words, rates, mc)?;
    let runs = mc.runs as f64;
    let (mut xs, mut ys, mut ws) = (Vec::new(), Vec::new(), Vec::new());
    for (n, e) in per_n.iter().enumerate() {
        if e.value > 0.0 {
            xs.push((n + 1) as f64);
            ys.push(e.value.ln());
            ws.push(runs * e.value / (1.0 - e.value).max(1.0 / runs));
        }
    }
    let censored = xs.len() < n_max;
    let mut estimate = match weighted_line_fit(&xs, &ys, &ws) {
        Some(fit) => {
            let beta = fit.slope.exp();
            let se = beta * fit.slope_se.max(fit.slope_se_resid);
            Estimate::new(beta, se, mc.runs, "beta:log-linear-wls")
        }
        None => {
            // fewer than two usable depths
            let v = xs.first().map(|&n| (ys[0] / n).exp()).unwrap_or(0.0);
            Estimate::new(v, f64::INFINITY, mc.runs, "beta:single-depth").with_flag(Flag::Degenerate)
        }
    };
    if censored {
        estimate.flag(Flag::Censored);
    }
    for e in &per_n {
        for f in &e.flags {
            if matches!(f, Flag::CapReached | Flag::HorizonSensitive) {
                estimate.flag(*f);
            }
        }
    }
    Ok(BetaEstimate { letter, estimate, per_n })
}

/// Downward-trail hitting probabilities `ŵ_x` for the level `ℒ_n` of
/// `T* = T − T(a^{-1})`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrailEstimate {
    pub base: Letter,
    pub level: u32,
    pub words: Vec<Word>,
    pub w: Vec<Estimate>,
    /// `Σ_x ŵ_x` over `ℒ_n`, i.e. the mean number of level vertices reached per run.
    pub total: Estimate,
    /// `Σ_x ŵ_x` over `ℒ_n*`, the words ending in `a`: the mean offspring
    /// number of the embedded tree `τ_n`.
    pub mu: Estimate,
    /// Runs still active at the horizon.
    pub censored: u64,
}

/// Estimates `w_x = P{a downward trail from (0, 1) first reaches x}` for
/// every `x ∈ ℒ_n`, the level-`n` vertices of `T* = T − T(a^{-1})`.
pub fn estimate_w(rates: &Rates, base: Letter, level: u32, mc: &Mc) -> Result<TrailEstimate> {
    mc.validate()?;
    let alpha = rates.alphabet();
    alpha.check(base as usize)?;
    if level == 0 {
        return param("target level must be at least 1");
    }
    let words: Vec<Word> = alpha.enumerate_level_avoiding(level as usize, alpha.inv(base)).collect();
    let index: BTreeMap<&Word, usize> = words.iter().enumerate().map(|(i, w)| (w, i)).collect();
    let cfg = mc.config();
    let region = Region::downward(alpha, base, level);
    let (counts, per_run, per_run_star, censored) = replicates(
        mc.runs,
        (vec![0u64; words.len()], Vec::with_capacity(mc.runs as usize), Vec::with_capacity(mc.runs as usize), 0u64),
        |k| {
            let r = mc.replicate(rates, &cfg, &region, None, k)?;
            let hit: Vec<Word> = r.sink_hits.into_iter().map(|(w, _)| w).collect();
            Ok((hit, r.status == Status::Horizon || r.status.capped()))
        },
        |(mut counts, mut per_run, mut per_run_star, censored), (hit, cut)| {
            for w in &hit {
                counts[index[w]] += 1;
            }
            per_run.push(hit.len() as f64);
            per_run_star.push(hit.iter().filter(|w| w.last() == Some(base)).count() as f64);
            (counts, per_run, per_run_star, censored + cut as u64)
        },
    )?;
    let mut w: Vec<Estimate> = counts.iter().map(|&c| Estimate::proportion(c, mc.runs, "w:indicator")).collect();
    let (mean, se) = mean_stderr(&per_run);
    let mut total = Estimate::new(mean, se, mc.runs, "w:level-sum");
    let (mean, se) = mean_stderr(&per_run_star);
    let mut mu = Estimate::new(mean, se, mc.runs, "w:star-sum");
    if censored > 0 {
        total.flag(Flag::Censored);
        mu.flag(Flag::Censored);
        for e in &mut w {
            e.flag(Flag::Censored);
        }
    }
    Ok(TrailEstimate { base, level, words, w, total, mu, censored })
}
