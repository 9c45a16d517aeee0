//! Finite spectral objects built from a weight vector `b` (length `2d`,
//! `b_i = b_{i^{-1}}`).
//!
//! `M_ρ` has entries `b_j^ρ` off the forbidden pattern `j = i^{-1}`. Its
//! lead eigenvalue `θ_ρ` is the unique positive root of
//!
//! ```text
//! Σ_i b_i^ρ / (θ + b_i^ρ) = 1,
//! ```
//!
//! and the right eigenvector is `v_i ∝ 1 / (θ + b_i^ρ)`. Logarithms are
//! natural throughout; dimensions are ratios of logarithms, so the base
//! cancels.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::cayley::{Alphabet, Letter, Word};
use crate::error::{param, Error, Result};
use crate::rng::SimRng;
use crate::stats::csum;

/// Validates a weight vector and returns `d`.
pub fn check_b(b: &[f64]) -> Result<usize> {
    if b.len() < 2 || !b.len().is_multiple_of(2) {
        return param(format!("weight vector needs an even length >= 2, got {}", b.len()));
    }
    if let Some(x) = b.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return param(format!("weights must be finite and nonnegative, got {x}"));
    }
    let d = b.len() / 2;
    for i in 0..d {
        let (x, y) = (b[i], b[i + d]);
        if (x - y).abs() > 1e-12 * x.abs().max(y.abs()) {
            return param(format!("weights must satisfy b_i = b_(i^-1); letter {i}: {x} vs {y}"));
        }
    }
    Ok(d)
}

/// Expands `d` free weights to the `2d` letters.
pub fn expand(free: &[f64]) -> Vec<f64> {
    let mut b = free.to_vec();
    b.extend_from_slice(free);
    b
}

/// `(2d - 1) b^ρ`, the lead eigenvalue for constant weights.
pub fn isotropic_theta(d: usize, b: f64, rho: f64) -> f64 {
    (2 * d - 1) as f64 * b.powf(rho)
}

/// The matrix `M_ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PfMatrix {
    pub d: usize,
    pub rho: f64,
    pub m: DMatrix<f64>,
}

impl PfMatrix {
    pub fn new(b: &[f64], rho: f64) -> Result<Self> {
        let d = check_b(b)?;
        check_rho(rho)?;
        let size = 2 * d;
        let m = DMatrix::from_fn(size, size, |i, j| if j == (i + d) % size { 0.0 } else { b[j].powf(rho) });
        Ok(Self { d, rho, m })
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        param(format!("rho must be positive and finite, got {rho}"))
    }
}

fn eigen_residual(a: &[f64], theta: f64) -> f64 {
    csum(a.iter().map(|&x| x / (theta + x))) - 1.0
}

/// `θ_ρ(b)` by safeguarded Newton on the decreasing residual. Returns 0 when
/// every weight vanishes.
pub fn solve_lead_eigenvalue(b: &[f64], rho: f64) -> Result<f64> {
    check_b(b)?;
    check_rho(rho)?;
    let a: Vec<f64> = b.iter().map(|x| x.powf(rho)).collect();
    let sum = csum(a.iter().copied());
    if sum == 0.0 {
        return Ok(0.0);
    }
    // residual is positive near 0 and negative at `sum`
    let (mut lo, mut hi) = (0.0, sum);
    let mut theta = 0.5 * sum;
    for _ in 0..400 {
        let g = eigen_residual(&a, theta);
        if g == 0.0 {
            return Ok(theta);
        }
        if g > 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let dg = -csum(a.iter().map(|&x| x / ((theta + x) * (theta + x))));
        let newton = theta - g / dg;
        theta = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi || (g.abs() < 1e-15 && (newton - theta).abs() < 1e-15 * theta) {
            break;
        }
    }
    if eigen_residual(&a, theta).abs() > 1e-12 {
        return Err(Error::NonConvergence(format!("lead eigenvalue residual at theta = {theta}")));
    }
    Ok(theta)
}

/// Lead eigendata from power iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerResult {
    pub theta: f64,
    /// Right eigenvector, entries summing to 1.
    pub v: Vec<f64>,
    /// Left eigenvector, entries summing to 1.
    pub w: Vec<f64>,
    pub iterations: usize,
}

const POWER_CAP: usize = 1_000_000;

pub(crate) fn power(m: &DMatrix<f64>) -> Result<(f64, DVector<f64>, usize)> {
    let n = m.nrows();
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    let mut theta = 0.0;
    for it in 1..=POWER_CAP {
        let mv = m * &v;
        let s = mv.sum();
        if s <= 0.0 {
            return Ok((0.0, v, it));
        }
        let next = mv / s;
        theta = s / v.sum();
        let resid = (m * &next - &next * theta).amax();
        v = next;
        if resid < 1e-13 * theta.max(f64::MIN_POSITIVE) || resid < 1e-300 {
            // refine the eigenvalue with a Rayleigh-type quotient
            let mv = m * &v;
            theta = mv.sum() / v.sum();
            return Ok((theta, v, it));
        }
    }
    let mut eig: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let gap = if eig.len() > 1 && eig[0] > 0.0 { eig[1] / eig[0] } else { 0.0 };
    Err(Error::NonConvergence(format!(
        "power iteration did not converge in {POWER_CAP} steps (|λ2|/|λ1| = {gap:.6}, last θ = {theta})"
    )))
}

/// `θ`, `v`, `w` of a nonnegative matrix by power iteration.
pub fn power_iteration(m: &PfMatrix) -> Result<PowerResult> {
    let (theta, v, i1) = power(&m.m)?;
    let (_, w, i2) = power(&m.m.transpose())?;
    Ok(PowerResult { theta, v: v.iter().copied().collect(), w: w.iter().copied().collect(), iterations: i1.max(i2) })
}

/// A finite stationary Markov chain on the letters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovChain {
    pub p: Vec<Vec<f64>>,
    pub pi: Vec<f64>,
    pub entropy: f64,
}

impl MarkovChain {
    /// Validates `p` (rows sum to 1, nonnegative, irreducible) and computes
    /// its stationary law and entropy rate.
    pub fn new(p: Vec<Vec<f64>>) -> Result<Self> {
        let n = p.len();
        if n == 0 || p.iter().any(|r| r.len() != n) {
            return param("transition matrix must be square and nonempty");
        }
        for (i, row) in p.iter().enumerate() {
            if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return param(format!("row {i} has a negative or nonfinite entry"));
            }
            let s = csum(row.iter().copied());
            if (s - 1.0).abs() > 1e-12 {
                return param(format!("row {i} sums to {s}"));
            }
        }
        if !strongly_connected(&p) {
            return Err(Error::Reducible("transition graph is not strongly connected".into()));
        }
        // (P^T - I) π = 0 with the last equation replaced by Σ π = 1
        let mut a = DMatrix::from_fn(n, n, |i, j| p[j][i] - if i == j { 1.0 } else { 0.0 });
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        let pi = a.lu().solve(&rhs).ok_or_else(|| Error::NonConvergence("stationary system is singular".into()))?;
        let pi: Vec<f64> = pi.iter().map(|x| x.max(0.0)).collect();
        let entropy = -csum((0..n).flat_map(|i| {
            let (pi, row) = (pi[i], &p[i]);
            row.iter().filter(|&&x| x > 0.0).map(move |&x| pi * x * x.ln())
        }));
        Ok(Self { p, pi, entropy: entropy.max(0.0) })
    }

    pub fn size(&self) -> usize {
        self.p.len()
    }

    /// Uniform chain on the allowed transitions `j ≠ i^{-1}`.
    pub fn uniform(d: usize) -> Result<Self> {
        let size = 2 * d;
        let q = 1.0 / (size - 1) as f64;
        Self::new((0..size).map(|i| (0..size).map(|j| if j == (i + d) % size { 0.0 } else { q }).collect()).collect())
    }

    /// Largest deviation of `π P` from `π`.
    pub fn stationarity_error(&self) -> f64 {
        let n = self.size();
        (0..n).map(|j| (csum((0..n).map(|i| self.pi[i] * self.p[i][j])) - self.pi[j]).abs()).fold(0.0, f64::max)
    }

    /// Whether the chain never steps to the inverse letter.
    pub fn respects_inverse_pattern(&self) -> bool {
        let n = self.size();
        n.is_multiple_of(2) && (0..n).all(|i| self.p[i][(i + n / 2) % n] == 0.0)
    }

    /// CSV transition table with a header row `from,to,p`.
    pub fn to_csv(&self, alphabet: Alphabet) -> String {
        let mut out = String::from("from,to,p\n");
        for (i, row) in self.p.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{}\n",
                    alphabet.letter_name(i as Letter),
                    alphabet.letter_name(j as Letter),
                    x
                ));
            }
        }
        out
    }
}

fn strongly_connected(p: &[Vec<f64>]) -> bool {
    let n = p.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let edge = if forward { p[i][j] } else { p[j][i] };
                if edge > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// The chain `p(i, j) = b_j^ρ v_j / (θ_ρ v_i)` together with its eigendata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryChain {
    pub chain: MarkovChain,
    pub rho: f64,
    pub theta: f64,
    /// Right eigenvector of `M_ρ`, entries summing to 1.
    pub v: Vec<f64>,
}

pub fn boundary_chain(b: &[f64], rho: f64) -> Result<BoundaryChain> {
    let d = check_b(b)?;
    let theta = solve_lead_eigenvalue(b, rho)?;
    if theta <= 0.0 {
        return param("boundary chain needs a positive lead eigenvalue");
    }
    let size = 2 * d;
    let a: Vec<f64> = b.iter().map(|x| x.powf(rho)).collect();
    let raw: Vec<f64> = a.iter().map(|&x| 1.0 / (theta + x)).collect();
    let norm = csum(raw.iter().copied());
    let v: Vec<f64> = raw.iter().map(|x| x / norm).collect();
    let p: Vec<Vec<f64>> = (0..size)
        .map(|i| {
            let mut row: Vec<f64> =
                (0..size).map(|j| if j == (i + d) % size { 0.0 } else { a[j] * v[j] / (theta * v[i]) }).collect();
            // remove rounding drift so rows sum to 1
            let s = csum(row.iter().copied());
            row.iter_mut().for_each(|x| *x /= s);
            row
        })
        .collect();
    Ok(BoundaryChain { chain: MarkovChain::new(p)?, rho, theta, v })
}

/// `δ = -log θ₁ / log α`.
pub fn hausdorff_dim(theta1: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(theta1 > 0.0 && theta1.is_finite()) {
        return param(format!("theta must be positive, got {theta1}"));
    }
    Ok(-theta1.ln() / alpha.ln())
}

/// `δ_H(Ω) = -log(2d - 1) / log α`.
pub fn omega_dim(d: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(-((2 * d - 1) as f64).ln() / alpha.ln())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        param(format!("alpha must lie in (0,1), got {alpha}"))
    }
}

/// `δ(λ; μ)` for a stationary chain `μ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntersectionDim {
    /// `-(h + ∫φ dμ) / log α`; negative values mean the intersection is empty.
    pub value: f64,
    pub entropy: f64,
    /// `∫φ dμ = Σ π_i log b_i`.
    pub integral: f64,
    /// `h(μ) + ∫φ dμ < 0`: almost surely no limit point is `μ`-typical.
    pub empty: bool,
    /// Some `b_i = 0` carries positive stationary mass.
    pub neg_infinite: bool,
}

pub fn dim_intersection(chain: &MarkovChain, b: &[f64], alpha: f64) -> Result<IntersectionDim> {
    check_b(b)?;
    check_alpha(alpha)?;
    if chain.size() != b.len() {
        return param("chain and weights have different sizes");
    }
    let neg_infinite = chain.pi.iter().zip(b).any(|(&p, &x)| p > 0.0 && x == 0.0);
    let integral = if neg_infinite {
        f64::NEG_INFINITY
    } else {
        csum(chain.pi.iter().zip(b).filter(|(p, _)| **p > 0.0).map(|(p, x)| p * x.ln()))
    };
    let s = chain.entropy + integral;
    Ok(IntersectionDim { value: -s / alpha.ln(), entropy: chain.entropy, integral, empty: s < 0.0, neg_infinite })
}

/// `(2d - 1) θ₂ - θ₁²`; nonnegative, zero exactly for constant weights.
pub fn check_backscatter(b: &[f64]) -> Result<f64> {
    let d = check_b(b)?;
    let t1 = solve_lead_eigenvalue(b, 1.0)?;
    let t2 = solve_lead_eigenvalue(b, 2.0)?;
    Ok((2 * d - 1) as f64 * t2 - t1 * t1)
}

/// Pressure `P(ρφ) = log θ_ρ` (`-inf` when `θ_ρ = 0`).
pub fn pressure_markov(b: &[f64], rho: f64) -> Result<f64> {
    let t = solve_lead_eigenvalue(b, rho)?;
    Ok(if t > 0.0 { t.ln() } else { f64::NEG_INFINITY })
}

/// Slack `P(ρφ) - h(μ) - ρ Σ π_i log b_i` of each trial chain; nonnegative,
/// zero only at the Gibbs chain.
pub fn gibbs_variational_check(b: &[f64], rho: f64, trials: &[MarkovChain]) -> Result<Vec<f64>> {
    check_b(b)?;
    let pressure = pressure_markov(b, rho)?;
    trials
        .iter()
        .map(|c| {
            if c.size() != b.len() || !c.respects_inverse_pattern() {
                return param("trial chain must be on the same letters and avoid inverse steps");
            }
            let mass_on_zero = c.pi.iter().zip(b).any(|(&p, &x)| p > 0.0 && x == 0.0);
            if mass_on_zero {
                return Ok(f64::INFINITY);
            }
            let integral = csum(c.pi.iter().zip(b).filter(|(p, _)| **p > 0.0).map(|(p, x)| p * x.ln()));
            Ok(pressure - c.entropy - rho * integral)
        })
        .collect()
}

fn r_u_residual(b: &[f64], rho: f64) -> f64 {
    csum(b.iter().filter(|&&x| x > 0.0).map(|&x| {
        let a = x.powf(rho);
        a / (1.0 + a)
    })) - 1.0
}

/// The exponent `ρ` with `θ_ρ(b) = 1`, i.e. `Σ b_i^ρ / (1 + b_i^ρ) = 1`.
/// Needs every `b_i < 1`.
pub fn solve_r_u(b: &[f64]) -> Result<f64> {
    check_b(b)?;
    if let Some(x) = b.iter().find(|&&x| x >= 1.0) {
        return param(format!("weight {x} >= 1 is outside the domain (strong survival side)"));
    }
    if r_u_residual(b, 1e-300) <= 0.0 {
        return Err(Error::NoBracket("fewer than three positive weights: no positive root".into()));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while r_u_residual(b, hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::NoBracket("exponent exceeds 1e6".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if r_u_residual(b, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A boundary word prefix drawn from the stationary chain.
pub fn sample_boundary_word(chain: &MarkovChain, length: usize, seed: u64) -> Result<Word> {
    let n = chain.size();
    if !n.is_multiple_of(2) || !chain.respects_inverse_pattern() {
        return param("chain must avoid inverse steps on an even alphabet");
    }
    let alphabet = Alphabet::new(n / 2)?;
    let mut rng = SimRng::seed_from_u64(seed);
    let draw = |rng: &mut SimRng, w: &[f64]| {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &x) in w.iter().enumerate() {
            acc += x;
            if u < acc && x > 0.0 {
                return i;
            }
        }
        w.iter().rposition(|&x| x > 0.0).unwrap_or(0)
    };
    let mut letters = Vec::with_capacity(length);
    if length > 0 {
        letters.push(draw(&mut rng, &chain.pi) as Letter);
    }
    while letters.len() < length {
        let prev = *letters.last().unwrap_or(&0) as usize;
        letters.push(draw(&mut rng, &chain.p[prev]) as Letter);
    }
    alphabet.word(&letters)
}

/// Default tolerance for declaring `θ₂ = 1`.
pub const CRITICALITY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFlag {
    Isotropic,
    AtCriticality,
    /// `θ₂ > 1`: no limit set in the weak phase; dimensions suppressed.
    StrongSurvival,
    /// `δ(λ; μ*) < 0`.
    EmptyIntersection,
    /// `θ₁ = 0` or a zero weight with stationary mass.
    Degenerate,
}

impl ReportFlag {
    pub fn name(self) -> &'static str {
        match self {
            Self::Isotropic => "isotropic",
            Self::AtCriticality => "at_criticality",
            Self::StrongSurvival => "strong_survival",
            Self::EmptyIntersection => "empty_intersection",
            Self::Degenerate => "degenerate",
        }
    }
}

/// Dimensions of the limit set for weights `b` and metric parameter `α`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionReport {
    pub d: usize,
    pub alpha: f64,
    pub b: Vec<f64>,
    pub theta1: f64,
    pub theta2: f64,
    /// `δ(λ) = -log θ₁ / log α`.
    pub delta: Option<f64>,
    /// `δ_H(Ω)`.
    pub delta_omega: f64,
    /// `δ(λ; μ*)` for the Gibbs chain `μ*` of `M₂`.
    pub delta_mu: Option<f64>,
    /// `δ_H(Ω_{μ*}) = h(μ*) / log(1/α)`.
    pub delta_omega_mu: Option<f64>,
    pub h_mu: Option<f64>,
    pub integral_phi: Option<f64>,
    pub backscatter_margin: f64,
    /// `θ₂ - 1`.
    pub criticality_margin: f64,
    pub flags: Vec<ReportFlag>,
}

pub fn dimension_report(b: &[f64], alpha: f64, tol: f64) -> Result<DimensionReport> {
    let d = check_b(b)?;
    check_alpha(alpha)?;
    let theta1 = solve_lead_eigenvalue(b, 1.0)?;
    let theta2 = solve_lead_eigenvalue(b, 2.0)?;
    let mut flags = Vec::new();
    if b.windows(2).all(|w| w[0] == w[1]) {
        flags.push(ReportFlag::Isotropic);
    }
    if (theta2 - 1.0).abs() < tol {
        flags.push(ReportFlag::AtCriticality);
    }
    let strong = theta2 > 1.0 + tol;
    if strong {
        flags.push(ReportFlag::StrongSurvival);
    }
    let mut report = DimensionReport {
        d,
        alpha,
        b: b.to_vec(),
        theta1,
        theta2,
        delta: None,
        delta_omega: omega_dim(d, alpha)?,
        delta_mu: None,
        delta_omega_mu: None,
        h_mu: None,
        integral_phi: None,
        backscatter_margin: (2 * d - 1) as f64 * theta2 - theta1 * theta1,
        criticality_margin: theta2 - 1.0,
        flags,
    };
    if strong {
        return Ok(report);
    }
    if theta1 <= 0.0 {
        report.flags.push(ReportFlag::Degenerate);
        return Ok(report);
    }
    report.delta = Some(hausdorff_dim(theta1, alpha)?);
    match boundary_chain(b, 2.0) {
        Ok(bc) => {
            let dim = dim_intersection(&bc.chain, b, alpha)?;
            if dim.empty {
                report.flags.push(ReportFlag::EmptyIntersection);
            }
            report.delta_mu = Some(dim.value);
            report.delta_omega_mu = Some(dim.entropy / (1.0 / alpha).ln());
            report.h_mu = Some(dim.entropy);
            report.integral_phi = Some(dim.integral);
        }
        Err(Error::Reducible(_)) => report.flags.push(ReportFlag::Degenerate),
        Err(e) => return Err(e),
    }
    Ok(report)
}

impl DimensionReport {
    pub const CSV_HEADER: &'static str = "d,alpha,b,theta1,theta2,delta,delta_omega,delta_mu,delta_omega_mu,h_mu,integral_phi,backscatter_margin,criticality_margin,flags";

    /// One CSV row matching [`Self::CSV_HEADER`]; `b` and `flags` are
    /// `;`-joined, absent values are empty.
    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let b = self.b.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        let flags = self.flags.iter().map(|f| f.name()).collect::<Vec<_>>().join(";");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.d,
            self.alpha,
            b,
            self.theta1,
            self.theta2,
            opt(self.delta),
            self.delta_omega,
            opt(self.delta_mu),
            opt(self.delta_omega_mu),
            opt(self.h_mu),
            opt(self.integral_phi),
            self.backscatter_margin,
            self.criticality_margin,
            flags
        )
    }
}

#[cfg(test)]
mod tests;
