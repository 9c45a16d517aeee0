//! The algebraic system
//!
//! ```text
//! F_i = z p_i - z p_i F_i^2 + F_i Σ_{j ∈ 𝒜} z p_j F_j,    F_i = F_{i^{-1}},
//! ```
//!
//! its minimal solution, the Jacobian radius `γ`, the singularity `R` where
//! `γ = 1`, and the two criticality residuals. Weights `p` carry an arbitrary
//! overall scale that is absorbed into `z`; only `z p` is meaningful.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::spectral::{check_b, power};
use crate::stats::csum;

mod phase;

pub use phase::{phase_ray_scan, RayPoint, RayScan, ScanBudget, ScanFlag, ScanMode};

/// Direction `p` (expanded to `2d` letters) and scale `z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrwParams {
    pub p: Vec<f64>,
    pub z: f64,
}

impl BrwParams {
    pub fn new(p: Vec<f64>, z: f64) -> Result<Self> {
        check_direction(&p)?;
        if !(z >= 0.0 && z.is_finite()) {
            return param(format!("z must be finite and nonnegative, got {z}"));
        }
        Ok(Self { p, z })
    }

    pub fn d(&self) -> usize {
        self.p.len() / 2
    }

    fn half(&self) -> &[f64] {
        &self.p[..self.d()]
    }
}

fn check_direction(p: &[f64]) -> Result<usize> {
    let d = check_b(p)?;
    if p.iter().all(|&x| x == 0.0) {
        return param("at least one p_i must be positive");
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrwSolution {
    /// `F_i` for all `2d` letters.
    pub f: Vec<f64>,
    pub z: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gamma: f64,
    /// Max-norm residual of the system at `f`.
    pub residual: f64,
}

/// Right-hand side on the `d` free coordinates.
fn rhs(p: &[f64], z: f64, f: &[f64]) -> Vec<f64> {
    let s = csum(p.iter().zip(f).map(|(p, f)| p * f));
    (0..p.len()).map(|i| z * p[i] - z * p[i] * f[i] * f[i] + 2.0 * z * f[i] * s).collect()
}

fn residual(p: &[f64], z: f64, f: &[f64]) -> f64 {
    rhs(p, z, f).iter().zip(f).map(|(g, f)| (g - f).abs()).fold(0.0, f64::max)
}

/// `J_ii = 2 z S`, `J_ij = 2 z p_j F_i` on the free coordinates.
fn jacobian(p: &[f64], z: f64, f: &[f64]) -> DMatrix<f64> {
    let s = csum(p.iter().zip(f).map(|(p, f)| p * f));
    let d = p.len();
    DMatrix::from_fn(d, d, |i, j| if i == j { 2.0 * z * s } else { 2.0 * z * p[j] * f[i] })
}

fn radius(j: &DMatrix<f64>) -> Result<f64> {
    Ok(power(j)?.0)
}

const ONE_TOL: f64 = 1e-6;
const MONOTONE_SWEEPS: usize = 10_000;
const MONOTONE_CAP: usize = 2_000_000;

fn newton(p: &[f64], z: f64, start: &[f64]) -> Option<Vec<f64>> {
    let d = p.len();
    let mut f = start.to_vec();
    for _ in 0..100 {
        let g = rhs(p, z, &f);
        let r = DVector::from_iterator(d, g.iter().zip(&f).map(|(g, f)| g - f));
        if r.amax() < 1e-16 {
            break;
        }
        let a = DMatrix::identity(d, d) - jacobian(p, z, &f);
        let step = a.lu().solve(&r)?;
        if step.iter().any(|x| !x.is_finite()) {
            return None;
        }
        for i in 0..d {
            f[i] += step[i];
        }
        if step.amax() < 1e-16 {
            break;
        }
    }
    Some(f)
}

/// Minimal nonnegative solution by monotone iteration from `F = 0`,
/// polished by Newton.
pub fn solve_f(params: &BrwParams) -> Result<BrwSolution> {
    let p = params.half();
    let z = params.z;
    let d = p.len();
    let expand = |f: &[f64]| {
        let mut full = f.to_vec();
        full.extend_from_slice(f);
        full
    };
    let mut f = vec![0.0; d];
    let mut iterations = 0;
    let sweep = |f: &mut Vec<f64>, n: usize, iterations: &mut usize| -> Result<f64> {
        let mut step = 0.0;
        for _ in 0..n {
            let next = rhs(p, z, f);
            step = next.iter().zip(f.iter()).map(|(a, b)| a - b).fold(0.0, f64::max);
            *f = next;
            *iterations += 1;
            if f.iter().any(|&x| x > 1.0 + ONE_TOL || !x.is_finite()) {
                return Err(Error::BeyondSingularity { z });
            }
            if step <= 1e-15 {
                break;
            }
        }
        Ok(step)
    };
    let mut last_step = sweep(&mut f, MONOTONE_SWEEPS, &mut iterations)?;
    loop {
        if let Some(polished) = newton(p, z, &f) {
            // the minimal root lies above every monotone iterate and has γ <= 1
            let above = polished.iter().zip(&f).all(|(a, b)| *a >= b - 1e-12);
            let bounded = polished.iter().all(|&x| x <= 1.0 + ONE_TOL);
            let res = residual(p, z, &polished);
            if above && bounded && res < 1e-12 {
                let gamma = radius(&jacobian(p, z, &polished))?;
                if gamma <= 1.0 + ONE_TOL {
                    return Ok(BrwSolution {
                        f: expand(&polished),
                        z,
                        converged: true,
                        iterations,
                        gamma,
                        residual: res,
                    });
                }
            }
        }
        if iterations >= MONOTONE_CAP {
            break;
        }
        last_step = sweep(&mut f, MONOTONE_SWEEPS * 10, &mut iterations)?;
        if last_step <= 1e-15 {
            let res = residual(p, z, &f);
            let gamma = radius(&jacobian(p, z, &f))?;
            return Ok(BrwSolution { f: expand(&f), z, converged: res < 1e-12, iterations, gamma, residual: res });
        }
    }
    if last_step > 0.0 {
        return Err(Error::BeyondSingularity { z });
    }
    let gamma = radius(&jacobian(p, z, &f))?;
    Ok(BrwSolution { f: expand(&f), z, converged: false, iterations, gamma, residual: residual(p, z, &f) })
}

/// Spectral radius of `J` at a fixed point `f` (given on all `2d` letters).
pub fn jacobian_gamma(params: &BrwParams, f: &[f64]) -> Result<f64> {
    let d = params.d();
    if f.len() != 2 * d {
        return param("F must have one entry per letter");
    }
    radius(&jacobian(params.half(), params.z, &f[..d]))
}

/// The singularity along a direction `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Singularity {
    pub p: Vec<f64>,
    pub r: f64,
    /// `F_i(R)` on all `2d` letters.
    pub f: Vec<f64>,
    pub gamma: f64,
    /// `Σ_i F_i(R)^2 / (1 + F_i(R)^2)`, equal to 1 at the singularity.
    pub identity: f64,
    pub bisection_steps: usize,
}

fn below_singularity(p: &[f64], z: f64) -> Result<Option<BrwSolution>> {
    match solve_f(&BrwParams { p: p.to_vec(), z }) {
        Ok(s) if s.converged && s.gamma < 1.0 => Ok(Some(s)),
        Ok(_) | Err(Error::BeyondSingularity { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Largest `z` tried when bracketing, in units of `1 / max p`.
const Z_CAP: f64 = 1e6;

/// `R` with `γ(R) = 1`: bisection in `z`, then Newton on the extended system
/// `F = G(F, z)`, `(J - I) v = 0`, `Σ v = 1`.
pub fn find_singularity(p: &[f64]) -> Result<Singularity> {
    let d = check_direction(p)?;
    let pmax = p.iter().copied().fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0, 0.5 / pmax);
    let mut lo_sol = None;
    let mut steps = 0;
    loop {
        match below_singularity(p, hi)? {
            Some(s) => {
                lo = hi;
                lo_sol = Some(s);
                hi *= 2.0;
                if hi > Z_CAP / pmax {
                    return Err(Error::NoBracket(format!("no singularity below z = {hi}")));
                }
            }
            None => break,
        }
        steps += 1;
    }
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        match below_singularity(p, mid)? {
            Some(s) => {
                lo = mid;
                lo_sol = Some(s);
            }
            None => hi = mid,
        }
        steps += 1;
    }
    let start = match lo_sol {
        Some(s) => s,
        None => solve_f(&BrwParams { p: p.to_vec(), z: lo })?,
    };
    let half = &p[..d];
    let (f, z) = fold_newton(half, lo, &start.f[..d]).unwrap_or_else(|| (start.f[..d].to_vec(), lo));
    let gamma = radius(&jacobian(half, z, &f))?;
    if (gamma - 1.0).abs() > 1e-8 || residual(half, z, &f) > 1e-10 {
        return Err(Error::NonConvergence(format!("singularity refinement stalled at z = {z}, gamma = {gamma}")));
    }
    let mut full = f.clone();
    full.extend_from_slice(&f);
    let identity = csum(full.iter().map(|x| x * x / (1.0 + x * x)));
    Ok(Singularity { p: p.to_vec(), r: z, f: full, gamma, identity, bisection_steps: steps })
}

fn fold_newton(p: &[f64], z0: f64, f0: &[f64]) -> Option<(Vec<f64>, f64)> {
    let d = p.len();
    let (_, v0, _) = power(&jacobian(p, z0, f0)).ok()?;
    let mut f = f0.to_vec();
    let mut v: Vec<f64> = v0.iter().copied().collect();
    let mut z = z0;
    let n = 2 * d + 1;
    for _ in 0..60 {
        let s = csum(p.iter().zip(&f).map(|(p, f)| p * f));
        let pv = csum(p.iter().zip(&v).map(|(p, v)| p * v));
        let g = rhs(p, z, &f);
        let jm = jacobian(p, z, &f);
        let mut e = DVector::zeros(n);
        for i in 0..d {
            e[i] = g[i] - f[i];
            e[d + i] = csum((0..d).map(|j| jm[(i, j)] * v[j])) - v[i];
        }
        e[2 * d] = csum(v.iter().copied()) - 1.0;
        if e.amax() < 1e-15 {
            break;
        }
        let mut a = DMatrix::zeros(n, n);
        for i in 0..d {
            for j in 0..d {
                a[(i, j)] = jm[(i, j)] - if i == j { 1.0 } else { 0.0 };
                a[(d + i, j)] = 2.0 * z * (p[j] * v[i] + if i == j { pv - p[i] * v[i] } else { 0.0 });
                a[(d + i, d + j)] = jm[(i, j)] - if i == j { 1.0 } else { 0.0 };
            }
            a[(i, n - 1)] = p[i] - p[i] * f[i] * f[i] + 2.0 * f[i] * s;
            a[(d + i, n - 1)] = 2.0 * (s * v[i] + f[i] * (pv - p[i] * v[i]));
            a[(n - 1, d + i)] = 1.0;
        }
        let step = a.lu().solve(&e)?;
        if step.iter().any(|x| !x.is_finite()) {
            return None;
        }
        for i in 0..d {
            f[i] -= step[i];
            v[i] -= step[d + i];
        }
        z -= step[n - 1];
        if step.amax() < 1e-16 {
            break;
        }
    }
    (f.iter().all(|&x| (0.0..=1.0 + ONE_TOL).contains(&x)) && z > 0.0).then_some((f, z))
}

/// `q1 = Σ b_i/(1+b_i) - 1` and `q2 = Σ b_i^2/(1+b_i^2) - 1`, summed over all
/// `2d` letters.
pub fn criticality_residuals(b: &[f64]) -> Result<(f64, f64)> {
    check_b(b)?;
    let q1 = csum(b.iter().map(|x| x / (1.0 + x))) - 1.0;
    let q2 = csum(b.iter().map(|x| x * x / (1.0 + x * x))) - 1.0;
    Ok((q1, q2))
}
