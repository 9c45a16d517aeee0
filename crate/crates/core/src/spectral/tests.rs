use super::*;
use rand::Rng;

fn random_b(rng: &mut SimRng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    expand(&(0..d).map(|_| rng.random_range(lo..hi)).collect::<Vec<_>>())
}

#[test]
fn scalar_root_matches_power_iteration() {
    let mut rng = SimRng::seed_from_u64(11);
    for _ in 0..1000 {
        let d = rng.random_range(1..=5);
        let b = random_b(&mut rng, d, 0.01, 2.0);
        let rho = rng.random_range(0.5..3.0);
        let theta = solve_lead_eigenvalue(&b, rho).unwrap();
        let pw = power_iteration(&PfMatrix::new(&b, rho).unwrap()).unwrap();
        assert!((theta - pw.theta).abs() <= 1e-8 * theta, "{b:?} {rho}: {theta} vs {}", pw.theta);
        assert!(pw.v.iter().chain(&pw.w).all(|&x| x > 0.0));
    }
}

#[test]
fn closed_form_vector_is_an_eigenvector() {
    let b = expand(&[0.2, 0.7, 0.45]);
    let bc = boundary_chain(&b, 2.0).unwrap();
    let m = PfMatrix::new(&b, 2.0).unwrap();
    let v = DVector::from_vec(bc.v.clone());
    let r = (&m.m * &v - &v * bc.theta).amax();
    assert!(r < 1e-14, "{r}");
}

#[test]
fn isotropic_closed_form() {
    for d in 1..=5 {
        for b in [0.1, 0.5, 1.3] {
            for rho in [1.0, 2.0] {
                let theta = solve_lead_eigenvalue(&vec![b; 2 * d], rho).unwrap();
                assert!((theta - isotropic_theta(d, b, rho)).abs() < 1e-12 * theta);
            }
        }
    }
}

#[test]
fn degenerate_weights() {
    assert_eq!(solve_lead_eigenvalue(&[0.0; 4], 1.0).unwrap(), 0.0);
    // a single positive pair: θ equals that weight
    let t = solve_lead_eigenvalue(&[0.4, 0.0, 0.4, 0.0], 1.0).unwrap();
    assert!((t - 0.4).abs() < 1e-14);
    assert!(check_b(&[0.1, 0.2, 0.3]).is_err());
    assert!(check_b(&[0.1, 0.2, 0.3, 0.1]).is_err());
    assert!(check_b(&[-0.1, -0.1]).is_err());
    assert!(solve_lead_eigenvalue(&[0.1, 0.1], 0.0).is_err());
}

#[test]
fn boundary_chain_is_stationary_and_respects_the_pattern() {
    let mut rng = SimRng::seed_from_u64(3);
    for _ in 0..200 {
        let d = rng.random_range(2..=5);
        let b = random_b(&mut rng, d, 0.05, 1.5);
        let bc = boundary_chain(&b, 2.0).unwrap();
        assert!(bc.chain.respects_inverse_pattern());
        assert!(bc.chain.stationarity_error() < 1e-12);
        assert!((bc.chain.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn reducible_inputs_are_rejected() {
    assert!(matches!(boundary_chain(&[0.5, 0.0, 0.5, 0.0], 1.0), Err(Error::Reducible(_))));
    assert!(matches!(boundary_chain(&[0.5, 0.5], 1.0), Err(Error::Reducible(_))));
    assert!(MarkovChain::new(vec![vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
}

#[test]
fn gibbs_chain_attains_the_pressure() {
    let mut rng = SimRng::seed_from_u64(5);
    for _ in 0..100 {
        let d = rng.random_range(2..=4);
        let b = random_b(&mut rng, d, 0.05, 1.5);
        let rho = rng.random_range(0.5..3.0);
        let bc = boundary_chain(&b, rho).unwrap();
        let slack = gibbs_variational_check(&b, rho, std::slice::from_ref(&bc.chain)).unwrap();
        assert!(slack[0].abs() < 1e-10, "{slack:?}");
    }
}

fn random_chain(rng: &mut SimRng, d: usize) -> MarkovChain {
    let size = 2 * d;
    let p = (0..size)
        .map(|i| {
            let mut row: Vec<f64> =
                (0..size).map(|j| if j == (i + d) % size { 0.0 } else { rng.random_range(0.01..1.0) }).collect();
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
            row
        })
        .collect();
    MarkovChain::new(p).unwrap()
}

#[test]
fn trial_chains_have_nonnegative_slack() {
    let mut rng = SimRng::seed_from_u64(9);
    let b = expand(&[0.2, 0.9, 0.5]);
    let trials: Vec<MarkovChain> = (0..300).map(|_| random_chain(&mut rng, 3)).collect();
    for rho in [1.0, 2.0] {
        for s in gibbs_variational_check(&b, rho, &trials).unwrap() {
            assert!(s > 0.0);
        }
    }
    let bad = MarkovChain::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    assert!(gibbs_variational_check(&[0.3, 0.3], 1.0, &[bad]).is_err());
}

#[test]
fn backscatter_margin_vanishes_only_when_isotropic() {
    let mut rng = SimRng::seed_from_u64(13);
    for _ in 0..500 {
        let d = rng.random_range(2..=5);
        let b = random_b(&mut rng, d, 0.01, 2.0);
        let m = check_backscatter(&b).unwrap();
        assert!(m > 0.0, "{b:?}: {m}");
    }
    assert!(check_backscatter(&[0.4; 6]).unwrap().abs() < 1e-12);
}

#[test]
fn critical_exponent_root() {
    let b = [1.0 / 3f64.sqrt(); 4];
    assert!((solve_r_u(&b).unwrap() - 2.0).abs() < 1e-12);
    let mut rng = SimRng::seed_from_u64(17);
    for _ in 0..200 {
        let d = rng.random_range(2..=5);
        let b = random_b(&mut rng, d, 0.01, 0.99);
        let r = solve_r_u(&b).unwrap();
        assert!((solve_lead_eigenvalue(&b, r).unwrap() - 1.0).abs() < 1e-10);
    }
    assert!(solve_r_u(&[0.5, 1.0, 0.5, 1.0]).is_err());
    assert!(matches!(solve_r_u(&[0.5, 0.0, 0.5, 0.0]), Err(Error::NoBracket(_))));
}

#[test]
fn isotropic_critical_report() {
    let r = dimension_report(&[1.0 / 3f64.sqrt(); 4], 0.5, CRITICALITY_TOL).unwrap();
    let half = 0.5 * 3f64.ln() / 2f64.ln();
    assert!((r.delta.unwrap() - half).abs() < 1e-12);
    assert!((r.delta_mu.unwrap() - half).abs() < 1e-12);
    assert!((r.delta_omega - 2.0 * half).abs() < 1e-12);
    assert!(r.flags.contains(&ReportFlag::Isotropic));
    assert!(r.flags.contains(&ReportFlag::AtCriticality));
    let strong = dimension_report(&[0.9; 4], 0.5, CRITICALITY_TOL).unwrap();
    assert!(strong.delta.is_none() && strong.flags.contains(&ReportFlag::StrongSurvival));
    assert_eq!(r.csv_row().split(',').count(), DimensionReport::CSV_HEADER.split(',').count());
}

#[test]
fn sampled_words_are_reduced_and_follow_pi() {
    let b = expand(&[0.2, 0.6]);
    let bc = boundary_chain(&b, 2.0).unwrap();
    let mut counts = [0usize; 4];
    for seed in 0..4000 {
        let w = sample_boundary_word(&bc.chain, 8, seed).unwrap();
        assert_eq!(w.len(), 8);
        counts[w.first().unwrap() as usize] += 1;
    }
    for (i, c) in counts.iter().enumerate() {
        let p = bc.chain.pi[i];
        let se = (p * (1.0 - p) / 4000.0).sqrt();
        assert!((*c as f64 / 4000.0 - p).abs() < 4.0 * se);
    }
}
