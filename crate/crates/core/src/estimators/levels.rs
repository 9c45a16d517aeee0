//! Level sums `Σ_{x ∈ G_n} û_x^ρ`, the matrices `H_ρ(n)` and calibrated `b̄`.

use std::collections::HashMap;

use serde::Serialize;

use super::{replicates, Mc};
use crate::engine::{Rates, Region};
use crate::error::{param, Result};
use crate::stats::{csum, jackknife_se, Estimate, Flag};

/// Jackknife groups for level-sum standard errors.
const GROUPS: u64 = 20;

/// Monte Carlo estimate of `H_ρ(n)`: entry `(i, j)` sums `û_x^ρ` over the
/// words `x ∈ G_n` that start with `i` and end with `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HMatrixEstimate {
    pub n: usize,
    pub rho: f64,
    pub d: usize,
    pub entries: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// Sum of all entries, `Σ_{x ∈ G_n} û_x^ρ`.
    pub total: Estimate,
    /// `total^{1/n}`.
    pub theta: Estimate,
    pub runs: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<Flag>,
    /// Leave-one-group-out totals backing the jackknife errors.
    #[serde(skip)]
    pub(crate) loo_totals: Vec<f64>,
}

impl HMatrixEstimate {
    pub fn size(&self) -> usize {
        2 * self.d
    }

    /// Builds an estimate from exact entries (no sampling error).
    pub fn exact(n: usize, rho: f64, d: usize, entries: Vec<Vec<f64>>) -> Self {
        let size = 2 * d;
        let total = csum(entries.iter().flatten().copied());
        Self {
            n,
            rho,
            d,
            stderr: vec![vec![0.0; size]; size],
            entries,
            total: Estimate::exact(total, "h:exact"),
            theta: Estimate::exact(total.max(0.0).powf(1.0 / n.max(1) as f64), "h:exact"),
            runs: 1,
            flags: Vec::new(),
            loo_totals: Vec::new(),
        }
    }
}

/// Contribution of one vertex hit in `c` of `runs` runs.
fn power_term(c: u64, runs: u64, rho: f64) -> f64 {
    if c == 0 {
        return 0.0;
    }
    let (c, n) = (c as f64, runs as f64);
    if rho == 1.0 {
        c / n
    } else if rho == 2.0 && runs > 1 {
        // unbiased for u^2
        c * (c - 1.0) / (n * (n - 1.0))
    } else {
        (c / n).powf(rho)
    }
}

struct VertexCounts {
    first: u8,
    last: u8,
    per_group: Vec<u64>,
}

/// Largest watch list used to end runs early once every tracked vertex is hit.
const WATCH_LIMIT: u64 = 4096;

/// `Ĥ_ρ(n)` for each requested depth, all from the same runs.
pub fn estimate_h(rho: f64, levels: &[usize], rates: &Rates, mc: &Mc) -> Result<Vec<HMatrixEstimate>> {
    Ok(estimate_h_multi(&[rho], levels, rates, mc)?.remove(0))
}

/// `Ĥ_ρ(n)` for every `ρ` in `rhos` and every depth in `levels`, indexed
/// `[rho][level]`, all from one set of runs.
pub fn estimate_h_multi(rhos: &[f64], levels: &[usize], rates: &Rates, mc: &Mc) -> Result<Vec<Vec<HMatrixEstimate>>> {
    mc.validate()?;
    if rhos.is_empty() {
        return param("at least one rho is required");
    }
    if let Some(rho) = rhos.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return param(format!("rho must be positive, got {rho}"));
    }
    if levels.is_empty() || levels.contains(&0) {
        return param("levels must be nonempty and at least 1");
    }
    let d = rates.d();
    let size = 2 * d;
    let groups = GROUPS.min(mc.runs);
    let wanted: Vec<u32> = levels.iter().map(|&n| n as u32).collect();
    let alphabet = rates.alphabet();
    let tracked = levels.iter().map(|&n| alphabet.sphere_size(n).unwrap_or(u64::MAX)).fold(0u64, u64::saturating_add);
    let mut cfg = mc.config();
    if tracked <= WATCH_LIMIT {
        // hit indicators are final once every tracked vertex has been hit
        let watch = levels.iter().flat_map(|&n| alphabet.enumerate_sphere(n)).collect();
        cfg = cfg.watching(watch, true);
    }
    let region = Region::whole(rates.alphabet());
    let init: (Vec<HashMap<u64, VertexCounts>>, Vec<u64>, bool) =
        ((0..levels.len()).map(|_| HashMap::new()).collect(), vec![0; groups as usize], false);
    let (maps, group_runs, capped) = replicates(
        mc.runs,
        init,
        |k| {
            let r = mc.replicate(rates, &cfg, &region, None, k)?;
            let hits: Vec<(usize, u64, u8, u8)> = r
                .hits()
                .filter_map(|h| wanted.iter().position(|&n| n == h.depth).map(|i| (i, h.key, h.first, h.last)))
                .collect();
            Ok((k % groups, hits, r.status.capped()))
        },
        |(mut maps, mut group_runs, capped), (g, hits, cap)| {
            group_runs[g as usize] += 1;
            for (i, key, first, last) in hits {
                let e = maps[i].entry(key).or_insert_with(|| VertexCounts {
                    first,
                    last,
                    per_group: vec![0; groups as usize],
                });
                e.per_group[g as usize] += 1;
            }
            (maps, group_runs, capped || cap)
        },
    )?;

    let sorted: Vec<Vec<(u64, VertexCounts)>> = maps
        .into_iter()
        .map(|map| {
            let mut verts: Vec<(u64, VertexCounts)> = map.into_iter().collect();
            verts.sort_unstable_by_key(|(k, _)| *k);
            verts
        })
        .collect();
    let mut all = Vec::with_capacity(rhos.len());
    for &rho in rhos {
        let mut out = Vec::with_capacity(levels.len());
        for (li, verts) in sorted.iter().enumerate() {
            let n = levels[li];
            let matrix = |drop: Option<usize>| -> Vec<Vec<f64>> {
                let runs = mc.runs - drop.map_or(0, |g| group_runs[g]);
                let mut cells: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); size]; size];
                for (_, v) in verts {
                    let total: u64 = v.per_group.iter().sum();
                    let c = total - drop.map_or(0, |g| v.per_group[g]);
                    cells[v.first as usize][v.last as usize].push(power_term(c, runs, rho));
                }
                cells.into_iter().map(|row| row.into_iter().map(csum).collect()).collect()
            };
            let entries = matrix(None);
            let loo: Vec<Vec<Vec<f64>>> = (0..groups as usize).map(|g| matrix(Some(g))).collect();
            let stderr: Vec<Vec<f64>> = (0..size)
                .map(|i| (0..size).map(|j| jackknife_se(&loo.iter().map(|m| m[i][j]).collect::<Vec<_>>())).collect())
                .collect();
            let sum = |m: &Vec<Vec<f64>>| csum(m.iter().flatten().copied());
            let total_value = sum(&entries);
            let loo_totals: Vec<f64> = loo.iter().map(sum).collect();
            let mut total = Estimate::new(total_value, jackknife_se(&loo_totals), mc.runs, "h:level-sum");
            let root = |s: f64| s.max(0.0).powf(1.0 / n as f64);
            let loo_theta: Vec<f64> = loo_totals.iter().map(|&s| root(s)).collect();
            let mut theta = Estimate::new(root(total_value), jackknife_se(&loo_theta), mc.runs, "theta:level-sum");
            let mut flags = Vec::new();
            if total_value <= 0.0 {
                flags.push(Flag::Censored);
            }
            if capped {
                flags.push(Flag::CapReached);
            }
            for f in &flags {
                total.flag(*f);
                theta.flag(*f);
            }
            out.push(HMatrixEstimate { n, rho, d, entries, stderr, total, theta, runs: mc.runs, flags, loo_totals });
        }
        all.push(out);
    }
    Ok(all)
}

/// `θ̂_ρ = (Σ_{x ∈ G_n} û_x^ρ)^{1/n}`, with a delete-a-group jackknife error.
pub fn estimate_theta(rho: f64, rates: &Rates, n: usize, mc: &Mc) -> Result<Estimate> {
    if n < 2 {
        return param("theta needs depth n >= 2");
    }
    Ok(estimate_h(rho, &[n], rates, mc)?.remove(0).theta)
}

/// `Σ_{G_{n+1}} û_x^ρ / Σ_{G_n} û_x^ρ`, a finite-depth estimate of `θ_ρ` in
/// which the level prefactor cancels.
pub fn estimate_level_ratio(rho: f64, rates: &Rates, n: usize, mc: &Mc) -> Result<Estimate> {
    if n == 0 {
        return param("level ratio needs n >= 1");
    }
    let h = estimate_h(rho, &[n, n + 1], rates, mc)?;
    Ok(level_ratio(&h[0], &h[1]))
}

/// Ratio of the totals of two level matrices from the same runs.
pub fn level_ratio(lo: &HMatrixEstimate, hi: &HMatrixEstimate) -> Estimate {
    let ratio = |a: f64, b: f64| if a > 0.0 { b / a } else { 0.0 };
    let loo: Vec<f64> = lo.loo_totals.iter().zip(&hi.loo_totals).map(|(&a, &b)| ratio(a, b)).collect();
    let mut e = Estimate::new(ratio(lo.total.value, hi.total.value), jackknife_se(&loo), lo.runs, "theta:level-ratio");
    for f in lo.flags.iter().chain(&hi.flags) {
        e.flag(*f);
    }
    e
}

/// Per-letter weights `b̄_i` fitted from consecutive level matrices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BVector {
    /// Expanded, `2d` entries with `b[i] = b[inv(i)]`.
    pub b: Vec<f64>,
    pub rho: f64,
    /// Depth `n` of the lower matrix used in the fit.
    pub depth: usize,
    /// Relative Frobenius residual of the fitted forward model.
    pub residual: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<Flag>,
}

/// Fits `H_{n+1}(·, j) ≈ b̄_j^ρ Σ_{k ≠ j^{-1}} H_n(·, k)` column by column,
/// then averages each inverse pair.
pub fn calibrate_b(h_n: &HMatrixEstimate, h_n1: &HMatrixEstimate) -> Result<BVector> {
    if h_n.d != h_n1.d || h_n.rho != h_n1.rho || h_n1.n != h_n.n + 1 {
        return param("calibration needs matrices of the same rho at consecutive depths");
    }
    let d = h_n.d;
    let size = 2 * d;
    let inv = |j: usize| (j + d) % size;
    let mut c = vec![0.0; size];
    let mut flags = Vec::new();
    let mut norms = vec![0.0; size];
    for j in 0..size {
        let s: Vec<f64> =
            (0..size).map(|i| csum((0..size).filter(|&k| k != inv(j)).map(|k| h_n.entries[i][k]))).collect();
        let ss = csum(s.iter().map(|x| x * x));
        let sy = csum((0..size).map(|i| s[i] * h_n1.entries[i][j]));
        norms[j] = ss;
        if ss > 0.0 {
            c[j] = (sy / ss).max(0.0);
        } else if (0..size).any(|i| h_n1.entries[i][j] > 0.0) {
            flags.push(Flag::IllConditioned);
        }
    }
    let max_norm = norms.iter().copied().fold(0.0, f64::max);
    if norms.iter().any(|&n| n > 0.0 && n < 1e-12 * max_norm) {
        flags.push(Flag::IllConditioned);
    }
    let rho = h_n.rho;
    let mut b: Vec<f64> = c.iter().map(|&c| c.powf(1.0 / rho)).collect();
    for j in 0..d {
        let m = 0.5 * (b[j] + b[j + d]);
        b[j] = m;
        b[j + d] = m;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..size {
        for j in 0..size {
            let fit = b[j].powf(rho) * csum((0..size).filter(|&k| k != inv(j)).map(|k| h_n.entries[i][k]));
            num += (h_n1.entries[i][j] - fit).powi(2);
            den += h_n1.entries[i][j].powi(2);
        }
    }
    let residual = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
    flags.sort();
    flags.dedup();
    Ok(BVector { b, rho, depth: h_n.n, residual, flags })
}
