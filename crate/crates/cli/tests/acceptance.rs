//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 3 7`.

mod common;
#[path = "../../core/tests/support/ctmc.rs"]
mod ctmc;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use treecp::brw::{find_singularity, phase_ray_scan, ScanBudget, ScanMode};
use treecp::cayley::Alphabet;
use treecp::engine::{replicate, run, run_coupled_thinned, Rates, RunConfig, RunRecord};
use treecp::estimators::{estimate_level_ratio, estimate_u_many, estimate_w, Mc};
use treecp::gwtree::{extract_tau_r, ExtractConfig};
use treecp::rng::SimRng;
use treecp::spectral::{
    boundary_chain, check_backscatter, dimension_report, expand, gibbs_variational_check, power_iteration,
    solve_lead_eigenvalue, MarkovChain, PfMatrix, ReportFlag,
};
use treecp::stats::{mean_stderr, Estimate};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within_time(o: Outcome, elapsed: Duration, limit: Duration) -> Outcome {
    if elapsed <= limit {
        o
    } else {
        outcome(false, format!("{} [over the {}s budget]", o.detail, limit.as_secs()))
    }
}

fn random_free(rng: &mut SimRng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(lo..hi)).collect()
}

/// Isotropic closed forms `θ_ρ = (2d-1) b^ρ`.
fn c1() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in 2..=4 {
        for k in 0..20 {
            let b = 0.05 + 0.1 * k as f64;
            for rho in [1.0, 2.0] {
                let theta = solve_lead_eigenvalue(&vec![b; 2 * d], rho).unwrap();
                worst = worst.max((theta - (2 * d - 1) as f64 * b.powf(rho)).abs());
            }
        }
    }
    outcome(worst <= 1e-10, format!("max |θ - (2d-1)b^ρ| = {worst:.2e} over d=2..4, 20 b, ρ=1,2"))
}

/// Scalar root against power iteration on random weights.
fn c2() -> Outcome {
    let mut rng = SimRng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let d = rng.random_range(2..=5);
        let b = expand(&random_free(&mut rng, d, 0.01, 1.5));
        let rho = if rng.random_bool(0.5) { 1.0 } else { 2.0 };
        let scalar = solve_lead_eigenvalue(&b, rho).unwrap();
        let power = power_iteration(&PfMatrix::new(&b, rho).unwrap()).unwrap().theta;
        worst = worst.max((scalar - power).abs());
    }
    outcome(worst <= 1e-8, format!("max |θ_scalar - θ_power| = {worst:.2e} over 1000 random b"))
}

/// Singularity identity on random directions and the isotropic anchor.
fn c3() -> Outcome {
    let mut rng = SimRng::seed_from_u64(3);
    let (mut gamma_err, mut id_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let d = rng.random_range(2..=3);
        let s = find_singularity(&expand(&random_free(&mut rng, d, 0.05, 1.0))).unwrap();
        gamma_err = gamma_err.max((s.gamma - 1.0).abs());
        id_err = id_err.max((s.identity - 1.0).abs());
    }
    let iso = find_singularity(&[1.0; 4]).unwrap();
    let r_err = (iso.r - 1.0 / (2.0 * 3f64.sqrt())).abs();
    let f_err = iso.f.iter().map(|f| (f - 1.0 / 3f64.sqrt()).abs()).fold(0.0, f64::max);
    outcome(
        gamma_err <= 1e-8 && id_err <= 1e-6 && r_err <= 1e-8 && f_err <= 1e-8,
        format!("max |γ(R)-1| = {gamma_err:.1e}, max |ΣF²/(1+F²)-1| = {id_err:.1e}, isotropic |R-R*| = {r_err:.1e}, |F-F*| = {f_err:.1e}"),
    )
}

/// Dimension equalities at isotropic criticality, strict inequality otherwise.
fn c4() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in 2..=4 {
        let k = (2 * d - 1) as f64;
        let r = dimension_report(&vec![1.0 / k.sqrt(); 2 * d], 0.5, 1e-3).unwrap();
        let (delta, omega, dmu, dom_mu) =
            (r.delta.unwrap(), r.delta_omega, r.delta_mu.unwrap(), r.delta_omega_mu.unwrap());
        worst = worst
            .max((delta - 0.5 * omega).abs())
            .max((dmu - 0.5 * dom_mu).abs())
            .max((r.h_mu.unwrap() - k.ln()).abs());
    }
    let mut rng = SimRng::seed_from_u64(4);
    let mut margin = f64::INFINITY;
    for _ in 0..100 {
        let d = rng.random_range(2..=4);
        let free = random_free(&mut rng, d, 0.1, 1.0);
        let scale = 1.0 / solve_lead_eigenvalue(&expand(&free), 2.0).unwrap().sqrt();
        let b = expand(&free.iter().map(|x| x * scale).collect::<Vec<_>>());
        let r = dimension_report(&b, 0.5, 1e-3).unwrap();
        if r.flags.contains(&ReportFlag::Isotropic) {
            continue;
        }
        margin = margin.min(0.5 * r.delta_omega - r.delta.unwrap_or(f64::NAN));
    }
    outcome(
        worst <= 1e-10 && margin > 0.0,
        format!("isotropic max deviation {worst:.1e}; anisotropic min (½δ_Ω - δ) = {margin:.3e} over 100 b at q2=0"),
    )
}

/// Backscatter margin and the Gibbs variational slack.
fn c5() -> Outcome {
    let mut rng = SimRng::seed_from_u64(5);
    let mut min_margin = f64::INFINITY;
    for _ in 0..1000 {
        let d = rng.random_range(2..=5);
        min_margin = min_margin.min(check_backscatter(&expand(&random_free(&mut rng, d, 0.01, 1.5))).unwrap());
    }
    let (mut gibbs_max, mut perturbed_min) = (0.0f64, f64::INFINITY);
    for _ in 0..100 {
        let d = rng.random_range(2..=4);
        let b = expand(&random_free(&mut rng, d, 0.05, 1.0));
        let gibbs = boundary_chain(&b, 2.0).unwrap().chain;
        let size = 2 * d;
        let p: Vec<Vec<f64>> = (0..size)
            .map(|i| {
                let row: Vec<f64> = (0..size)
                    .map(|j| if j == (i + d) % size { 0.0 } else { gibbs.p[i][j] * rng.random_range(0.7..1.3) })
                    .collect();
                let s: f64 = row.iter().sum();
                row.iter().map(|x| x / s).collect()
            })
            .collect();
        let perturbed = MarkovChain::new(p).unwrap();
        let slack = gibbs_variational_check(&b, 2.0, &[gibbs, perturbed]).unwrap();
        gibbs_max = gibbs_max.max(slack[0].abs());
        perturbed_min = perturbed_min.min(slack[1]);
    }
    outcome(
        min_margin >= -1e-10 && gibbs_max <= 1e-10 && perturbed_min > 1e-10,
        format!("min backscatter margin {min_margin:.3e}; |slack| at Gibbs ≤ {gibbs_max:.1e}; min perturbed slack {perturbed_min:.3e}"),
    )
}

/// Per-path coefficient of variation of `R_t/t` over the last half of the
/// observed window `[0, stop_time]`.
fn front_cv(r: &RunRecord) -> Option<f64> {
    let end = r.stop_time;
    let v: Vec<f64> = r
        .snapshots
        .iter()
        .filter(|s| s.t >= end / 2.0 && s.t > 0.0)
        .filter_map(|s| s.big_r_t.map(|d| d as f64 / s.t))
        .collect();
    if v.len() < 2 {
        return None;
    }
    let (m, _) = mean_stderr(&v);
    let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    Some(sd / m)
}

fn dominated(small: &RunRecord, big: &RunRecord) -> bool {
    let bigmap = big.first_hit_map();
    let hits_ok = small
        .first_hit_map()
        .iter()
        .filter(|(_, &t)| t <= big.stop_time)
        .all(|(w, t)| bigmap.get(w).is_some_and(|s| s <= t));
    let snaps_ok = small.snapshots.iter().zip(&big.snapshots).all(|(s, b)| {
        let (s, b) = (s.infected.as_ref().unwrap(), b.infected.as_ref().unwrap());
        s.iter().all(|k| b.binary_search(k).is_ok())
    });
    hits_ok && snaps_ok
}

/// Survival, linear front growth and thinning domination at λ = 1.
fn c6() -> Outcome {
    let rates = Rates::isotropic(2, 1.0).unwrap();
    let times: Vec<f64> = (1..=300).map(|k| k as f64 * 0.1).collect();
    let cfg = RunConfig::new(30.0).snapshots(times).population_cap(100_000);
    let (mut survived, mut capped, mut cvs) = (0u64, 0u64, Vec::new());
    for k in 0..1000 {
        let r = run(&rates, &cfg, replicate(6, k), None).unwrap();
        if r.survived() {
            survived += 1;
            capped += r.status.capped() as u64;
            cvs.extend(front_cv(&r));
        }
    }
    let freq = survived as f64 / 1000.0;
    let (cv, _) = mean_stderr(&cvs);
    let coupled_cfg = RunConfig::new(30.0)
        .snapshots((1..=60).map(|k| k as f64 * 0.5).collect())
        .population_cap(20_000)
        .record_infected();
    let held = (0..500)
        .filter(|&k| {
            let (o, t) = run_coupled_thinned(&rates, 0.5, &coupled_cfg, replicate(60, k)).unwrap();
            dominated(&t, &o)
        })
        .count();
    outcome(
        freq > 0.5 && cv < 0.15 && held == 500,
        format!(
            "survival {freq:.3} ({capped} of {survived} survivors hit the population cap); mean per-path CV of R_t/t {cv:.3}; domination {held}/500"
        ),
    )
}

/// Monte Carlo `u_x` against the exact finite chain on the depth-2 tree.
fn c7() -> Outcome {
    let lambda = [0.6, 1.1];
    let ball = ctmc::Ball::new(&lambda, 2);
    let exact = ball.hitting_probabilities();
    let alphabet = Alphabet::new(2).unwrap();
    let words: Vec<_> = ball.words[1..].iter().map(|w| alphabet.word(w).unwrap()).collect();
    let mc = Mc::new(10_000, 400.0, 7).truncate(2);
    let est = estimate_u_many(&words, &Rates::new(&lambda).unwrap(), &mc).unwrap();
    let mut worst: f64 = 0.0;
    let mut inside = 0;
    for (e, x) in est.iter().zip(&exact) {
        let z = (e.value - x).abs() / (x * (1.0 - x) / 10_000f64).sqrt();
        worst = worst.max(z);
        inside += (z <= 3.0) as usize;
    }
    outcome(inside == 16, format!("{inside}/16 vertices within 3σ of the exact chain; max |z| = {worst:.2}"))
}

fn root_of(e: &Estimate, r: u32) -> (f64, f64) {
    let k = 1.0 / r as f64;
    let v = e.value.powf(k);
    (v, e.stderr * k * e.value.powf(k - 1.0))
}

/// Embedded Galton-Watson trees at λ = 0.7.
fn c8() -> Outcome {
    let rates = Rates::isotropic(2, 0.7).unwrap();
    let runs = 4000;
    let roots: Vec<(f64, f64)> = [1u32, 2, 4]
        .iter()
        .map(|&r| {
            let x = extract_tau_r(&rates, &ExtractConfig { r, generations: 1, ..ExtractConfig::default() }, runs, 8)
                .unwrap();
            root_of(&x.z1, r)
        })
        .collect();
    let theta = estimate_level_ratio(1.0, &rates, 4, &Mc::new(runs, 100.0, 80).cap(5000)).unwrap();
    let two = |a: (f64, f64), b: (f64, f64)| 2.0 * (a.1 * a.1 + b.1 * b.1).sqrt();
    let monotone = roots.windows(2).all(|w| w[1].0 >= w[0].0 - two(w[0], w[1]));
    let below = roots.iter().all(|&m| m.0 <= theta.value + two(m, (theta.value, theta.stderr)));

    let x =
        extract_tau_r(&rates, &ExtractConfig { r: 2, generations: 3, ..ExtractConfig::default() }, runs, 81).unwrap();
    let counts: Vec<f64> = x.offspring_sets().iter().map(|s| s.len() as f64).collect();
    let (mean, se) = mean_stderr(&counts);
    let w = estimate_w(&rates, 0, 2, &Mc::new(runs, 200.0, 82)).unwrap();
    let agree = (mean - w.mu.value).abs() <= two((mean, se), (w.mu.value, w.mu.stderr));
    let fmt: Vec<String> = roots.iter().map(|(v, s)| format!("{v:.4}±{s:.4}")).collect();
    outcome(
        monotone && below && agree && x.censored == 0,
        format!(
            "μ̂_r^(1/r) for r=1,2,4: {}; θ̂1 = {:.4}±{:.4}; offspring mean {mean:.4}±{se:.4} over {} vertices vs Σŵ = {:.4}±{:.4}",
            fmt.join(", "),
            theta.value,
            theta.stderr,
            counts.len(),
            w.mu.value,
            w.mu.stderr
        ),
    )
}

/// Phase-diagram ray scans at the full budget.
fn c9() -> Outcome {
    let budget = ScanBudget::default();
    let two = phase_ray_scan(&[1.0, 1.0], ScanMode::MonteCarlo, &budget).unwrap();
    let one = phase_ray_scan(&[1.0], ScanMode::MonteCarlo, &budget).unwrap();
    let (a1, a2) = (two.t1_ci.unwrap(), two.t2_ci.unwrap());
    let d2 = two.t1 < two.t2 && a1.1 < a2.0;
    let (b1, b2) = (one.t1_ci.unwrap(), one.t2_ci.unwrap());
    let d1 = b1.0 <= b2.1 && b2.0 <= b1.1 && one.t1 >= b2.0 && one.t1 <= b2.1 && one.t2 >= b1.0 && one.t2 <= b1.1;
    outcome(
        d2 && d1,
        format!(
            "d=2: t1 = {:.3} [{:.3}, {:.3}], t2 = {:.3} [{:.3}, {:.3}]; d=1: t1 = {:.3} [{:.3}, {:.3}], t2 = {:.3} [{:.3}, {:.3}] {:?}",
            two.t1, a1.0, a1.1, two.t2, a2.0, a2.1, one.t1, b1.0, b1.1, one.t2, b2.0, b2.1, one.flags
        ),
    )
}

/// Byte-identical outputs across 1 and 8 workers for every subcommand.
fn c10() -> Outcome {
    let results: Vec<(&str, bool)> =
        common::COMMANDS.iter().map(|args| (args[0], common::identical_across_workers(args))).collect();
    let failed: Vec<&str> = results.iter().filter(|(_, ok)| !ok).map(|(c, _)| *c).collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            "simulate, estimate, phase, report, gw identical with 1 and 8 workers".to_string()
        } else {
            format!("differs: {}", failed.join(", "))
        },
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome, Option<u64>);
    let criteria: [Criterion; 10] = [
        ("isotropic spectral closed forms", c1, Some(1)),
        ("eigenvalue oracle equivalence", c2, Some(10)),
        ("singularity identity", c3, Some(30)),
        ("dimension equality at isotropic criticality", c4, None),
        ("backscatter and Gibbs properties", c5, None),
        ("Monte Carlo physics", c6, Some(300)),
        ("small-CTMC oracle", c7, None),
        ("embedded GW consistency", c8, None),
        ("phase-diagram sanity", c9, Some(1200)),
        ("determinism", c10, None),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let mut o = check();
        let elapsed = start.elapsed();
        if let Some(secs) = limit {
            o = within_time(o, elapsed, Duration::from_secs(*secs));
        }
        failed += !o.pass as usize;
        println!(
            "criterion {n:>2} {} {name} ({:.1}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
