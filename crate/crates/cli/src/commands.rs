//! The five subcommands.

use serde::Serialize;
use treecp::brw::{phase_ray_scan, RayScan, ScanBudget, ScanMode};
use treecp::cayley::{Alphabet, Word};
use treecp::engine::{self, Backend, Rates, RunConfig, Status};
use treecp::estimators::{
    calibrate_b, estimate_beta, estimate_eta, estimate_growth_profile, estimate_h_multi, estimate_u_many, level_ratio,
    BVector, Mc,
};
use treecp::gwtree::{
    box_count_dimension, chi_square_independence, extract_tau_r, hawkes_dimension, sibling_pairs, simulate_gw,
    tau_r_alpha, ChiSquare, ExtractConfig, GwDimension, GwTree, OffspringLaw,
};
use treecp::parallel::fold_replicates;
use treecp::rng::replicate_seed;
use treecp::spectral::{dimension_report, expand, DimensionReport};
use treecp::stats::{mean_stderr, Estimate, Flag};

use crate::config::{BackendArg, ExperimentConfig, ModeArg, Target};
use crate::output::{csv_body, Sink};
use crate::CliError;

fn rates(cfg: &ExperimentConfig) -> Result<Rates, CliError> {
    Ok(Rates::new(&cfg.rates)?)
}

fn mc(cfg: &ExperimentConfig) -> Mc {
    Mc::new(cfg.runs(), cfg.horizon(), cfg.seed()).cap(cfg.population_cap())
}

fn flags_str(flags: &[Flag]) -> String {
    let names: Vec<String> = flags
        .iter()
        .map(|f| serde_json::to_value(f).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
        .collect();
    names.join(";")
}

fn opt(x: Option<impl ToString>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

// simulate

#[derive(Serialize)]
struct RunSummary {
    run: u64,
    seed: u64,
    status: Status,
    extinction_time: Option<f64>,
    max_depth: u32,
    ever_infected: usize,
    root_reinfections: usize,
}

#[derive(Serialize)]
struct SnapshotSummary {
    t: f64,
    alive: Estimate,
    mean_population: f64,
    mean_max_depth_alive: Option<f64>,
}

#[derive(Serialize)]
struct SimulateSummary {
    runs: u64,
    survived: Estimate,
    cap_reached: u64,
    extinction_time: Option<Estimate>,
    snapshots: Vec<SnapshotSummary>,
    per_run: Vec<RunSummary>,
}

pub fn simulate(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<(), CliError> {
    let rates = rates(cfg)?;
    let times = cfg.snapshots.clone().unwrap_or_default();
    let backend = match cfg.backend {
        Some(BackendArg::Percolation) => Backend::Percolation,
        _ => Backend::Gillespie,
    };
    let run_cfg =
        RunConfig::new(cfg.horizon()).snapshots(times.clone()).population_cap(cfg.population_cap()).backend(backend);
    let m = times.len();
    let init = (String::new(), Vec::new(), vec![(0u64, 0usize, 0u64, 0u64); m]);
    let (rows, per_run, acc) = fold_replicates(
        cfg.runs(),
        Ok(init),
        |k| {
            let seed = replicate_seed(cfg.seed(), k);
            engine::run(&rates, &run_cfg, seed, None).map(|r| {
                let mut rows = String::new();
                for s in &r.snapshots {
                    let common = format!(
                        "{k},{},{},{},{},{}",
                        s.t,
                        s.population,
                        opt(s.r_t),
                        opt(s.big_r_t),
                        s.root_infected as u8
                    );
                    if s.population == 0 {
                        rows.push_str(&format!("{common},,0\n"));
                    }
                    for (n, &c) in s.level_counts.iter().enumerate().filter(|(_, c)| **c > 0) {
                        rows.push_str(&format!("{common},{n},{c}\n"));
                    }
                }
                let snaps: Vec<(usize, Option<u32>)> = r.snapshots.iter().map(|s| (s.population, s.big_r_t)).collect();
                let summary = RunSummary {
                    run: k,
                    seed,
                    status: r.status,
                    extinction_time: r.extinction_time,
                    max_depth: r.max_depth,
                    ever_infected: r.ever_infected_count(),
                    root_reinfections: r.root_reinfections.len(),
                };
                (rows, summary, snaps)
            })
        },
        |acc: treecp::Result<_>, _, item| {
            let (mut rows, mut per_run, mut acc) = acc?;
            let (r, summary, snaps) = item?;
            rows.push_str(&r);
            per_run.push(summary);
            for (slot, (pop, depth)) in acc.iter_mut().zip(snaps) {
                slot.0 += (pop > 0) as u64;
                slot.1 += pop;
                if let Some(d) = depth {
                    slot.2 += d as u64;
                    slot.3 += 1;
                }
            }
            Ok((rows, per_run, acc))
        },
    )?;
    let runs = cfg.runs();
    let survivors = per_run.iter().filter(|r: &&RunSummary| r.status != Status::Extinct).count() as u64;
    let cap_reached = per_run.iter().filter(|r| r.status.capped()).count() as u64;
    let ext: Vec<f64> = per_run.iter().filter_map(|r| r.extinction_time).collect();
    let extinction_time = (!ext.is_empty()).then(|| {
        let (m, se) = mean_stderr(&ext);
        Estimate::new(m, se, ext.len() as u64, "simulate:extinction-time")
    });
    let snapshots = times
        .iter()
        .zip(&acc)
        .map(|(&t, &(alive, pop, depth_sum, depth_n))| SnapshotSummary {
            t,
            alive: Estimate::proportion(alive, runs, "simulate:alive"),
            mean_population: pop as f64 / runs as f64,
            mean_max_depth_alive: (depth_n > 0).then(|| depth_sum as f64 / depth_n as f64),
        })
        .collect();
    let summary = SimulateSummary {
        runs,
        survived: Estimate::proportion(survivors, runs, "simulate:survived"),
        cap_reached,
        extinction_time,
        snapshots,
        per_run,
    };
    sink.csv("simulate_snapshots.csv", &format!("run,t,population,r_t,R_t,root_infected,n,N_n\n{rows}"))?;
    sink.json("simulate_summary.json", "summary", &summary)
}

// estimate

struct Row {
    key: String,
    value: f64,
    stderr: Option<f64>,
    ci95: Option<(f64, f64)>,
    n_samples: u64,
    method: String,
    flags: String,
}

impl Row {
    fn from_estimate(key: String, e: &Estimate) -> Self {
        Self {
            key,
            value: e.value,
            stderr: Some(e.stderr),
            ci95: e.ci95,
            n_samples: e.n_samples,
            method: e.method.to_string(),
            flags: flags_str(&e.flags),
        }
    }
}

const ESTIMATE_COLUMNS: [&str; 9] =
    ["target", "key", "value", "stderr", "ci_lo", "ci_hi", "n_samples", "method", "flags"];

fn target_name(t: Target) -> &'static str {
    match t {
        Target::U => "u",
        Target::Beta => "beta",
        Target::Eta => "eta",
        Target::Theta => "theta",
        Target::H => "H",
        Target::B => "b",
        Target::Profile => "profile",
    }
}

fn b_rows(b: &BVector, alphabet: Alphabet, runs: u64) -> Vec<Row> {
    let mut rows: Vec<Row> =
        b.b.iter()
            .enumerate()
            .map(|(i, &v)| Row {
                key: format!("rho={};n={};letter={}", b.rho, b.depth, alphabet.letter_name(i as u8)),
                value: v,
                stderr: None,
                ci95: None,
                n_samples: runs,
                method: "b:calibrated".into(),
                flags: flags_str(&b.flags),
            })
            .collect();
    rows.push(Row {
        key: format!("rho={};n={};residual", b.rho, b.depth),
        value: b.residual,
        stderr: None,
        ci95: None,
        n_samples: runs,
        method: "b:fit-residual".into(),
        flags: String::new(),
    });
    rows
}

pub fn estimate(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<(), CliError> {
    let rates = rates(cfg)?;
    let alphabet = rates.alphabet();
    let mc = mc(cfg);
    let target = cfg.target.ok_or_else(|| CliError::Usage("estimate needs --target".into()))?;
    let depth = cfg.depth();
    let rhos = cfg.rho.clone().unwrap_or_else(|| vec![1.0, 2.0]);
    let mut rows = Vec::new();
    match target {
        Target::U => {
            let words: Vec<Word> = match &cfg.words {
                Some(ws) => ws.iter().map(|w| alphabet.parse_word(w)).collect::<treecp::Result<_>>()?,
                None => (1..=depth).flat_map(|n| alphabet.enumerate_sphere(n)).collect(),
            };
            let est = estimate_u_many(&words, &rates, &mc)?;
            rows.extend(words.iter().zip(&est).map(|(w, e)| Row::from_estimate(format!("word={w}"), e)));
        }
        Target::Beta => {
            let n_max = cfg.n_max.unwrap_or(6);
            for letter in 0..alphabet.d() as u8 {
                let b = estimate_beta(letter, &rates, n_max, &mc)?;
                let name = alphabet.letter_name(letter);
                rows.push(Row::from_estimate(format!("letter={name}"), &b.estimate));
                for (n, e) in b.per_n.iter().enumerate() {
                    rows.push(Row::from_estimate(format!("letter={name};n={}", n + 1), e));
                }
            }
        }
        Target::Eta => {
            let grid = cfg.t_grid.clone().unwrap_or_default();
            rows.push(Row::from_estimate("eta".into(), &estimate_eta(&rates, &grid, &mc)?));
        }
        Target::Theta | Target::H | Target::B => {
            let h = estimate_h_multi(&rhos, &[depth, depth + 1], &rates, &mc)?;
            for (rho, pair) in rhos.iter().zip(&h) {
                match target {
                    Target::Theta => {
                        rows.push(Row::from_estimate(format!("rho={rho};n={depth};root"), &pair[0].theta));
                        rows.push(Row::from_estimate(
                            format!("rho={rho};n={depth};ratio"),
                            &level_ratio(&pair[0], &pair[1]),
                        ));
                    }
                    Target::H => {
                        for m in pair {
                            for i in 0..m.size() {
                                for j in 0..m.size() {
                                    let e = Estimate::new(m.entries[i][j], m.stderr[i][j], m.runs, "h:entry");
                                    let (li, lj) = (alphabet.letter_name(i as u8), alphabet.letter_name(j as u8));
                                    let mut row = Row::from_estimate(format!("rho={rho};n={};i={li};j={lj}", m.n), &e);
                                    row.flags = flags_str(&m.flags);
                                    rows.push(row);
                                }
                            }
                        }
                    }
                    _ => rows.extend(b_rows(&calibrate_b(&pair[0], &pair[1])?, alphabet, mc.runs)),
                }
            }
        }
        Target::Profile => {
            let grid = cfg.s_grid.clone().unwrap_or_default();
            let p = estimate_growth_profile(&rates, &grid, depth, &mc)?;
            rows.extend(p.s.iter().zip(&p.phi).map(|(s, e)| Row::from_estimate(format!("s={s}"), e)));
            for (name, v) in [("s1", p.s1), ("s2", p.s2)] {
                let mut row = Row {
                    key: name.into(),
                    value: v.unwrap_or(f64::NAN),
                    stderr: None,
                    ci95: None,
                    n_samples: mc.runs,
                    method: "profile:crossing".into(),
                    flags: flags_str(&p.flags),
                };
                if v.is_none() {
                    row.flags = flags_str(&[Flag::NoCrossing]);
                }
                rows.push(row);
            }
        }
    }
    let name = target_name(target);
    let body = csv_body(
        &ESTIMATE_COLUMNS,
        rows.into_iter().map(|r| {
            vec![
                name.to_string(),
                r.key,
                if r.value.is_nan() { String::new() } else { r.value.to_string() },
                opt(r.stderr),
                opt(r.ci95.map(|c| c.0)),
                opt(r.ci95.map(|c| c.1)),
                r.n_samples.to_string(),
                r.method,
                r.flags,
            ]
        }),
    )?;
    sink.csv(&format!("estimate_{name}.csv"), &body)
}

// phase

pub fn phase(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<(), CliError> {
    let budget = ScanBudget {
        runs: cfg.runs(),
        seed: cfg.seed(),
        depth: cfg.depth(),
        population_cap: cfg.population_cap(),
        horizon: cfg.horizon(),
        t_min: cfg.t_min.unwrap_or(0.05),
        t_max: cfg.t_max.unwrap_or(4.0),
        tol: cfg.tol.unwrap_or(0.02),
        z: cfg.z.unwrap_or(1.96),
    };
    let mode = match cfg.mode {
        Some(ModeArg::Analytic) => ScanMode::Analytic,
        _ => ScanMode::MonteCarlo,
    };
    let directions = cfg.directions.clone().unwrap_or_default();
    let scans: Vec<RayScan> =
        directions.iter().map(|u| phase_ray_scan(u, mode, &budget)).collect::<treecp::Result<_>>()?;
    let mut body = format!("{}\n", RayScan::CSV_HEADER);
    for s in &scans {
        body.push_str(&s.csv_row());
        body.push('\n');
    }
    let mut points = String::from("ray,t,theta1,theta1_stderr,theta2,theta2_stderr,q1,q2,b\n");
    for (k, s) in scans.iter().enumerate() {
        for p in &s.points {
            let b: Vec<String> = p.b.iter().map(|x| x.to_string()).collect();
            points.push_str(&format!(
                "{k},{},{},{},{},{},{},{},{}\n",
                p.t,
                p.theta1.value,
                p.theta1.stderr,
                p.theta2.value,
                p.theta2.stderr,
                p.q1,
                p.q2,
                b.join(";")
            ));
        }
    }
    sink.csv("phase.csv", &body)?;
    sink.csv("phase_points.csv", &points)?;
    sink.json("phase.json", "scans", &scans)
}

// report

#[derive(Serialize)]
struct ReportInput {
    source: &'static str,
    b: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    calibration: Option<BVector>,
}

#[derive(Serialize)]
struct ReportDoc {
    input: ReportInput,
    report: DimensionReport,
}

pub fn report(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<(), CliError> {
    let input = match &cfg.b {
        Some(free) => {
            if let Some(d) = cfg.d.filter(|&d| d != free.len()) {
                return Err(CliError::Usage(format!("--d {d} does not match {} weights", free.len())));
            }
            ReportInput { source: "given", b: expand(free), calibration: None }
        }
        None => {
            let rates = rates(cfg)?;
            let depth = cfg.depth();
            let h = estimate_h_multi(&[1.0], &[depth, depth + 1], &rates, &mc(cfg))?;
            let cal = calibrate_b(&h[0][0], &h[0][1])?;
            ReportInput { source: "calibrated", b: cal.b.clone(), calibration: Some(cal) }
        }
    };
    let tol = cfg.criticality_tol.unwrap_or(1e-3);
    let report = dimension_report(&input.b, cfg.alpha(), tol)?;
    sink.csv("report.csv", &format!("{}\n{}\n", DimensionReport::CSV_HEADER, report.csv_row()))?;
    sink.json("report.json", "result", &ReportDoc { input, report })
}

// gw

#[derive(Serialize)]
struct GwSummary {
    mode: &'static str,
    labels: Vec<String>,
    trees: usize,
    censored: u64,
    extinct: usize,
    z1: Estimate,
    /// Mean offspring number of the empirical law.
    mean_offspring: f64,
    /// `mean_offspring^{1/r}`.
    mean_offspring_root: f64,
    r: u32,
    alpha_tau: f64,
    hawkes: Option<GwDimension>,
    box_count: Option<Estimate>,
    sibling_independence: Option<ChiSquare>,
}

fn tree_rows(out: &mut String, k: u64, tree: &GwTree, labels: &[String], extra: Option<(&[Word], &[f64])>) {
    for (i, v) in tree.vertices.iter().enumerate() {
        out.push_str(&format!(
            "{k},{i},{},{},{}",
            opt(v.parent),
            v.label.map(|l| labels[l].clone()).unwrap_or_default(),
            v.generation
        ));
        if let Some((words, times)) = extra {
            out.push_str(&format!(",{},{}", words[i], times[i]));
        }
        out.push('\n');
    }
}

pub fn gw(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<(), CliError> {
    let generations = cfg.generations.unwrap_or(3);
    let alpha = cfg.alpha();
    let runs = cfg.runs();
    let (summary, rows) = if let Some(q) = &cfg.q {
        let law = OffspringLaw::bernoulli(q.clone())?;
        let labels = law.labels.clone();
        let trees: Vec<GwTree> = (0..runs)
            .map(|k| simulate_gw(&law, generations, replicate_seed(cfg.seed(), k)))
            .collect::<treecp::Result<_>>()?;
        let mut rows = String::from("replicate,vertex_id,parent_id,label,generation\n");
        for (k, t) in trees.iter().enumerate() {
            tree_rows(&mut rows, k as u64, t, &labels, None);
        }
        let z1: Vec<f64> = trees.iter().map(|t| t.z().get(1).copied().unwrap_or(0) as f64).collect();
        let (m, se) = mean_stderr(&z1);
        let best = trees.iter().filter(|t| !t.extinct).max_by_key(|t| t.vertices.len());
        let summary = GwSummary {
            mode: "bernoulli",
            labels,
            trees: trees.len(),
            censored: 0,
            extinct: trees.iter().filter(|t| t.extinct).count(),
            z1: Estimate::new(m, se, z1.len() as u64, "gw:z1-mean"),
            mean_offspring: law.mean(),
            mean_offspring_root: law.mean(),
            r: 1,
            alpha_tau: alpha,
            hawkes: (law.mean() > 0.0).then(|| hawkes_dimension(law.mean(), alpha)).transpose()?,
            box_count: best.map(|t| box_count_dimension(t, alpha, None)).transpose()?,
            sibling_independence: None,
        };
        (summary, rows)
    } else {
        let rates = rates(cfg)?;
        let ecfg = ExtractConfig {
            r: cfg.r.unwrap_or(1),
            base: 0,
            generations,
            step_horizon: cfg.step_horizon.unwrap_or(200.0),
            population_cap: cfg.population_cap(),
            max_generation_size: cfg.max_generation_size.unwrap_or(2000),
        };
        let x = extract_tau_r(&rates, &ecfg, runs, cfg.seed())?;
        let labels: Vec<String> = x.labels.iter().map(|w| w.to_string()).collect();
        let mut rows = String::from("replicate,vertex_id,parent_id,label,generation,word,time\n");
        for t in &x.trees {
            tree_rows(&mut rows, t.replicate, &t.tree, &labels, Some((&t.words, &t.times)));
        }
        let sets = x.offspring_sets();
        let mean =
            if sets.is_empty() { 0.0 } else { sets.iter().map(|s| s.len()).sum::<usize>() as f64 / sets.len() as f64 };
        let alpha_tau = tau_r_alpha(alpha, x.r);
        let pairs = sibling_pairs(&x);
        let best = x.trees.iter().filter(|t| !t.tree.extinct && !t.truncated).max_by_key(|t| t.tree.vertices.len());
        let box_count = match best {
            Some(t) if t.tree.generations() >= 3 => Some(box_count_dimension(&t.tree, alpha_tau, None)?),
            _ => None,
        };
        let summary = GwSummary {
            mode: "extracted",
            labels,
            trees: x.trees.len(),
            censored: x.censored,
            extinct: x.trees.iter().filter(|t| t.tree.extinct).count(),
            z1: x.z1.clone(),
            mean_offspring: mean,
            mean_offspring_root: mean.powf(1.0 / x.r as f64),
            r: x.r,
            alpha_tau,
            hawkes: (mean > 0.0).then(|| hawkes_dimension(mean, alpha_tau)).transpose()?,
            box_count,
            sibling_independence: (pairs.len() >= 10).then(|| chi_square_independence(&pairs, 3)).transpose()?,
        };
        (summary, rows)
    };
    sink.csv("gw_trees.csv", &rows)?;
    sink.json("gw_summary.json", "summary", &summary)
}
