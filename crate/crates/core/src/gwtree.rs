//! Labelled Galton–Watson trees: simulation, extraction of the embedded
//! trees `τ_r` from contact-process runs, and limit-set dimensions.

use std::collections::HashMap;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::cayley::{Letter, Word};
use crate::engine::{run_in, Driver, PercolationWindow, Rates, Region, RunConfig, Status};
use crate::error::{param, Error, Result};
use crate::estimators::replicates;
use crate::rng::{replicate_seed, SimRng};
use crate::spectral::MarkovChain;
use crate::stats::{csum, line_fit, mean_stderr, Estimate, Flag};

/// Offspring distribution `Q` on subsets of the labels `0..labels.len()`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffspringLaw {
    pub labels: Vec<String>,
    pub kind: LawKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    /// `(set, probability)` pairs.
    Explicit(Vec<(Vec<usize>, f64)>),
    /// Independent label indicators with the given marginals.
    Bernoulli(Vec<f64>),
    /// Observed offspring sets, resampled uniformly.
    Empirical(Vec<Vec<usize>>),
}

fn numbered(k: usize) -> Vec<String> {
    (0..k).map(|i| i.to_string()).collect()
}

fn normalize_set(set: &[usize], k: usize) -> Result<Vec<usize>> {
    let mut s = set.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.len() != set.len() {
        return param("offspring sets hold at most one child per label");
    }
    if s.iter().any(|&i| i >= k) {
        return param(format!("label out of range 0..{k}"));
    }
    Ok(s)
}

impl OffspringLaw {
    pub fn explicit(labels: Vec<String>, entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        let k = labels.len();
        let mut out = Vec::with_capacity(entries.len());
        for (set, p) in entries {
            if !(p >= 0.0 && p.is_finite()) {
                return param(format!("probability {p} is not valid"));
            }
            out.push((normalize_set(&set, k)?, p));
        }
        let total = csum(out.iter().map(|(_, p)| *p));
        if (total - 1.0).abs() > 1e-12 {
            return param(format!("probabilities sum to {total}"));
        }
        Ok(Self { labels, kind: LawKind::Explicit(out) })
    }

    pub fn bernoulli(q: Vec<f64>) -> Result<Self> {
        if q.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return param("marginals must lie in [0, 1]");
        }
        Ok(Self { labels: numbered(q.len()), kind: LawKind::Bernoulli(q) })
    }

    pub fn empirical(labels: Vec<String>, samples: Vec<Vec<usize>>) -> Result<Self> {
        if samples.is_empty() {
            return param("an empirical law needs at least one sample");
        }
        let k = labels.len();
        let samples = samples.iter().map(|s| normalize_set(s, k)).collect::<Result<_>>()?;
        Ok(Self { labels, kind: LawKind::Empirical(samples) })
    }

    /// Every individual has exactly the labels `0..k`.
    pub fn deterministic(k: usize) -> Self {
        Self { labels: numbered(k), kind: LawKind::Explicit(vec![((0..k).collect(), 1.0)]) }
    }

    /// `Q = δ_∅` on `k` labels.
    pub fn sterile(k: usize) -> Self {
        Self { labels: numbered(k), kind: LawKind::Explicit(vec![(Vec::new(), 1.0)]) }
    }

    /// `q_i = Σ_{F ∋ i} Q(F)`.
    pub fn marginals(&self) -> Vec<f64> {
        let k = self.labels.len();
        match &self.kind {
            LawKind::Bernoulli(q) => q.clone(),
            LawKind::Explicit(entries) => {
                let mut q = vec![0.0; k];
                for (set, p) in entries {
                    set.iter().for_each(|&i| q[i] += p);
                }
                q
            }
            LawKind::Empirical(samples) => {
                let mut q = vec![0.0; k];
                for set in samples {
                    set.iter().for_each(|&i| q[i] += 1.0);
                }
                q.iter().map(|c| c / samples.len() as f64).collect()
            }
        }
    }

    /// `μ = Σ_i q_i`.
    pub fn mean(&self) -> f64 {
        csum(self.marginals())
    }

    pub fn sample(&self, rng: &mut SimRng) -> Vec<usize> {
        match &self.kind {
            LawKind::Bernoulli(q) => (0..q.len()).filter(|&i| rng.random::<f64>() < q[i]).collect(),
            LawKind::Explicit(entries) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (set, p) in entries {
                    acc += p;
                    if u < acc {
                        return set.clone();
                    }
                }
                entries.iter().rev().find(|(_, p)| *p > 0.0).map(|(s, _)| s.clone()).unwrap_or_default()
            }
            LawKind::Empirical(samples) => samples[rng.random_range(0..samples.len())].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GwVertex {
    pub parent: Option<usize>,
    pub label: Option<usize>,
    pub generation: usize,
}

/// A tree stored generation by generation; generation `g` occupies a
/// contiguous index range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GwTree {
    pub vertices: Vec<GwVertex>,
    starts: Vec<usize>,
    /// The last recorded generation is empty.
    pub extinct: bool,
}

impl GwTree {
    fn root() -> Self {
        Self { vertices: vec![GwVertex { parent: None, label: None, generation: 0 }], starts: vec![0], extinct: false }
    }

    fn open_generation(&mut self) {
        self.starts.push(self.vertices.len());
    }

    fn close(&mut self) {
        self.extinct = self.generation(self.generations() - 1).is_empty();
    }

    /// Number of recorded generations, including generation 0.
    pub fn generations(&self) -> usize {
        self.starts.len()
    }

    pub fn generation(&self, g: usize) -> Range<usize> {
        let end = self.starts.get(g + 1).copied().unwrap_or(self.vertices.len());
        self.starts[g]..end
    }

    /// `Z_n` for every recorded generation.
    pub fn z(&self) -> Vec<usize> {
        (0..self.generations()).map(|g| self.generation(g).len()).collect()
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut c = vec![Vec::new(); self.vertices.len()];
        for (i, v) in self.vertices.iter().enumerate() {
            if let Some(p) = v.parent {
                c[p].push(i);
            }
        }
        c
    }

    /// Per generation, the vertices with a descendant in the last generation.
    pub fn surviving_counts(&self) -> Vec<usize> {
        let mut alive = vec![false; self.vertices.len()];
        let last = self.generations() - 1;
        for i in self.generation(last) {
            alive[i] = true;
        }
        for i in (0..self.vertices.len()).rev() {
            if alive[i] {
                if let Some(p) = self.vertices[i].parent {
                    alive[p] = true;
                }
            }
        }
        (0..self.generations()).map(|g| self.generation(g).filter(|&i| alive[i]).count()).collect()
    }

    /// Parent-pointer CSV: `vertex_id,parent_id,label,generation`.
    pub fn to_csv(&self, labels: &[String]) -> String {
        let mut out = String::from("vertex_id,parent_id,label,generation\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let parent = v.parent.map(|p| p.to_string()).unwrap_or_default();
            let label = v.label.and_then(|l| labels.get(l).cloned()).unwrap_or_default();
            out.push_str(&format!("{i},{parent},{label},{}\n", v.generation));
        }
        out
    }
}

/// Upper bound on the vertices of a simulated tree.
pub const MAX_VERTICES: usize = 1 << 24;

/// Simulates `generations` generations of a labelled Galton–Watson tree,
/// stopping early on extinction.
pub fn simulate_gw(law: &OffspringLaw, generations: usize, seed: u64) -> Result<GwTree> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut tree = GwTree::root();
    for g in 1..=generations {
        let parents = tree.generation(g - 1);
        tree.open_generation();
        for parent in parents {
            for label in law.sample(&mut rng) {
                tree.vertices.push(GwVertex { parent: Some(parent), label: Some(label), generation: g });
            }
            if tree.vertices.len() > MAX_VERTICES {
                return Err(Error::Overflow(MAX_VERTICES));
            }
        }
        if tree.generation(g).is_empty() {
            break;
        }
    }
    tree.close();
    Ok(tree)
}

/// Settings for extracting `τ_r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractConfig {
    pub r: u32,
    /// The letter `a`; labels are words of length `r` ending in it.
    pub base: Letter,
    pub generations: usize,
    /// Time allowed for each trail search after its start `S_n`.
    pub step_horizon: f64,
    pub population_cap: usize,
    /// A generation larger than this ends the extraction of that tree.
    pub max_generation_size: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self { r: 1, base: 0, generations: 3, step_horizon: 200.0, population_cap: 100_000, max_generation_size: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractedTree {
    pub replicate: u64,
    pub tree: GwTree,
    /// Tree-vertex words, aligned with `tree.vertices`.
    pub words: Vec<Word>,
    /// First-reach times `S`, aligned with `tree.vertices`.
    pub times: Vec<f64>,
    /// Extraction stopped at `max_generation_size`.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extraction {
    pub r: u32,
    pub base: Letter,
    /// The label set `ℒ_r*`.
    pub labels: Vec<Word>,
    pub trees: Vec<ExtractedTree>,
    /// Replicates excluded because a trail search hit the horizon or a cap.
    pub censored: u64,
    /// Mean `Z_1` over kept trees.
    pub z1: Estimate,
}

impl Extraction {
    /// Every observed offspring set, as label indices.
    pub fn offspring_sets(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for t in &self.trees {
            let children = t.tree.children();
            let last = t.tree.generations() - 1;
            for (i, v) in t.tree.vertices.iter().enumerate() {
                // vertices of the last generation were not expanded
                if v.generation < last {
                    out.push(children[i].iter().filter_map(|&c| t.tree.vertices[c].label).collect());
                }
            }
        }
        out
    }

    /// The empirical offspring law over `ℒ_r*`.
    pub fn law(&self) -> Result<OffspringLaw> {
        OffspringLaw::empirical(self.labels.iter().map(|w| w.to_string()).collect(), self.offspring_sets())
    }
}

/// One search for trails from `(start, x)` confined to `T(x)` (or `T*` at the
/// root). Returns the offspring `(word, time)` ending in `a`, or `None` when
/// the search was censored.
fn offspring(
    rates: &Rates,
    window: &PercolationWindow,
    cfg: &ExtractConfig,
    x: &Word,
    start: f64,
) -> Result<Option<Vec<(Word, f64)>>> {
    let region = if x.is_root() {
        Region::downward(rates.alphabet(), cfg.base, cfg.r)
    } else {
        Region::below(x.clone(), start, cfg.r)
    };
    let run_cfg = RunConfig::new(start + cfg.step_horizon).population_cap(cfg.population_cap);
    let rec = run_in(rates, &run_cfg, &region, Driver::Window { window, thinning: None }, None, 0)?;
    if rec.status != Status::Extinct {
        return Ok(None);
    }
    let mut hits: Vec<(Word, f64)> = rec.sink_hits.into_iter().filter(|(w, _)| w.last() == Some(cfg.base)).collect();
    // a.s. distinct times; break exact ties by word for determinism
    hits.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(Some(hits))
}

fn extract_one(
    rates: &Rates,
    cfg: &ExtractConfig,
    labels: &HashMap<Word, usize>,
    seed: u64,
    k: u64,
) -> Result<Option<ExtractedTree>> {
    let window = PercolationWindow::new(replicate_seed(seed, k), rates.expanded());
    let alphabet = rates.alphabet();
    let mut tree = GwTree::root();
    let mut words = vec![alphabet.root()];
    let mut times = vec![0.0];
    let mut truncated = false;
    let r = cfg.r as usize;
    for g in 1..=cfg.generations {
        let parents = tree.generation(g - 1);
        if parents.len() > cfg.max_generation_size {
            truncated = true;
            break;
        }
        tree.open_generation();
        for parent in parents {
            let Some(kids) = offspring(rates, &window, cfg, &words[parent], times[parent])? else {
                return Ok(None);
            };
            for (y, t) in kids {
                let tail = alphabet.word(&y.letters()[y.len() - r..])?;
                let label = labels.get(&tail).copied();
                tree.vertices.push(GwVertex { parent: Some(parent), label, generation: g });
                words.push(y);
                times.push(t);
            }
        }
        if tree.generation(g).is_empty() {
            break;
        }
    }
    tree.close();
    Ok(Some(ExtractedTree { replicate: k, tree, words, times, truncated }))
}

/// Extracts `τ_r` from `runs` replicate percolation structures. Replicates
/// whose trail searches are censored are excluded and counted.
pub fn extract_tau_r(rates: &Rates, cfg: &ExtractConfig, runs: u64, seed: u64) -> Result<Extraction> {
    let alphabet = rates.alphabet();
    alphabet.check(cfg.base as usize)?;
    if cfg.r == 0 || runs == 0 || cfg.generations == 0 {
        return param("extraction needs r >= 1, runs >= 1 and at least one generation");
    }
    if !(cfg.step_horizon > 0.0) {
        return param("step horizon must be positive");
    }
    let labels: Vec<Word> = alphabet
        .enumerate_level_avoiding(cfg.r as usize, alphabet.inv(cfg.base))
        .filter(|w| w.last() == Some(cfg.base))
        .collect();
    let index: HashMap<Word, usize> = labels.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
    let (trees, censored) = replicates(
        runs,
        (Vec::new(), 0u64),
        |k| extract_one(rates, cfg, &index, seed, k),
        |(mut trees, censored), t| match t {
            Some(t) => {
                trees.push(t);
                (trees, censored)
            }
            None => (trees, censored + 1),
        },
    )?;
    let z1: Vec<f64> = trees.iter().map(|t: &ExtractedTree| t.tree.z().get(1).copied().unwrap_or(0) as f64).collect();
    let (mean, se) = mean_stderr(&z1);
    let mut z1 = Estimate::new(mean, se, z1.len() as u64, "gw:z1-mean");
    if censored > 0 {
        z1.flag(Flag::Censored);
    }
    Ok(Extraction { r: cfg.r, base: cfg.base, labels, trees, censored, z1 })
}

/// A limit-set dimension from a Hawkes-type formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GwDimension {
    pub value: f64,
    /// The formula is negative: the set is almost surely empty.
    pub empty: bool,
    /// A zero marginal carries stationary mass.
    pub neg_infinite: bool,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        param(format!("alpha must lie in (0,1), got {alpha}"))
    }
}

/// `-log μ / log α`.
pub fn hawkes_dimension(mu: f64, alpha: f64) -> Result<GwDimension> {
    check_alpha(alpha)?;
    if !(mu > 0.0 && mu.is_finite()) {
        return param(format!("mean offspring must be positive, got {mu}"));
    }
    let value = -mu.ln() / alpha.ln();
    Ok(GwDimension { value, empty: mu < 1.0, neg_infinite: false })
}

/// `-(h(μ) + Σ π_i log q_i) / log α` for a stationary chain over the labels.
pub fn extended_hawkes_dimension(q: &[f64], chain: &MarkovChain, alpha: f64) -> Result<GwDimension> {
    check_alpha(alpha)?;
    if q.len() != chain.size() {
        return param("marginals and chain have different label counts");
    }
    if q.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return param("marginals must lie in [0, 1]");
    }
    let neg_infinite = chain.pi.iter().zip(q).any(|(&p, &x)| p > 0.0 && x == 0.0);
    if neg_infinite {
        return Ok(GwDimension { value: f64::NEG_INFINITY, empty: true, neg_infinite });
    }
    let s = chain.entropy + csum(chain.pi.iter().zip(q).filter(|(p, _)| **p > 0.0).map(|(p, x)| p * x.ln()));
    Ok(GwDimension { value: -s / alpha.ln(), empty: s < 0.0, neg_infinite })
}

/// Metric parameter of `τ_r` viewed inside the full tree.
pub fn tau_r_alpha(alpha: f64, r: u32) -> f64 {
    alpha.powi(r as i32)
}

/// Slope of `log N_n` against `n log(1/α)`, where `N_n` counts generation-`n`
/// vertices with a descendant in the last generation. `window` defaults to
/// the middle half of the recorded generations.
pub fn box_count_dimension(tree: &GwTree, alpha: f64, window: Option<Range<usize>>) -> Result<Estimate> {
    check_alpha(alpha)?;
    let last = tree.generations() - 1;
    if tree.extinct || last == 0 {
        return Err(Error::ExtinctTree);
    }
    let window = window.unwrap_or(last / 4..last - last / 4 + 1);
    if window.end > tree.generations() || window.len() < 2 {
        return param(format!("window {window:?} needs two generations within 0..={last}"));
    }
    let counts = tree.surviving_counts();
    let scale = (1.0 / alpha).ln();
    let xs: Vec<f64> = window.clone().map(|n| n as f64 * scale).collect();
    let ys: Vec<f64> = window.map(|n| (counts[n] as f64).ln()).collect();
    let fit = line_fit(&xs, &ys).ok_or_else(|| Error::NonConvergence("box-count fit failed".into()))?;
    Ok(Estimate::new(fit.slope, fit.slope_se_resid, xs.len() as u64, "gw:box-count"))
}

/// Pearson χ² statistic for independence of the offspring counts of sibling
/// pairs, with counts binned as `0, 1, ..., bins-1+`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    /// 1% critical value.
    pub critical: f64,
    pub rejected: bool,
    pub pairs: usize,
}

/// 1% upper quantiles of χ² with 1..=16 degrees of freedom.
const CHI2_99: [f64; 16] = [
    6.635, 9.210, 11.345, 13.277, 15.086, 16.812, 18.475, 20.090, 21.666, 23.209, 24.725, 26.217, 27.688, 29.141,
    30.578, 32.000,
];

pub fn chi_square_independence(pairs: &[(usize, usize)], bins: usize) -> Result<ChiSquare> {
    if !(2..=5).contains(&bins) {
        return param("bins must be between 2 and 5");
    }
    let mut table = vec![vec![0.0; bins]; bins];
    for &(a, b) in pairs {
        table[a.min(bins - 1)][b.min(bins - 1)] += 1.0;
    }
    let n = pairs.len() as f64;
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..bins).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let live_r: Vec<usize> = (0..bins).filter(|&i| rows[i] > 0.0).collect();
    let live_c: Vec<usize> = (0..bins).filter(|&j| cols[j] > 0.0).collect();
    if live_r.len() < 2 || live_c.len() < 2 {
        return Ok(ChiSquare { statistic: 0.0, df: 0, critical: f64::INFINITY, rejected: false, pairs: pairs.len() });
    }
    let mut stat = 0.0;
    for &i in &live_r {
        for &j in &live_c {
            let e = rows[i] * cols[j] / n;
            stat += (table[i][j] - e).powi(2) / e;
        }
    }
    let df = (live_r.len() - 1) * (live_c.len() - 1);
    let critical = CHI2_99[df - 1];
    Ok(ChiSquare { statistic: stat, df, critical, rejected: stat > critical, pairs: pairs.len() })
}

/// Offspring-count pairs of consecutive siblings across extracted trees
/// (only vertices whose offspring were searched).
pub fn sibling_pairs(extraction: &Extraction) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for t in &extraction.trees {
        let children = t.tree.children();
        let last = t.tree.generations() - 1;
        for kids in &children {
            let expanded: Vec<usize> = kids.iter().copied().filter(|&c| t.tree.vertices[c].generation < last).collect();
            for w in expanded.chunks_exact(2) {
                pairs.push((children[w[0]].len(), children[w[1]].len()));
            }
        }
    }
    pairs
}
