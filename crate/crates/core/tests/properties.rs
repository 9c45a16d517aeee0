//! Property tests for the deterministic numerics.

use proptest::prelude::*;
use treecp::brw::{find_singularity, jacobian_gamma, solve_f, BrwParams};
use treecp::cayley::{d_alpha, Alphabet};
use treecp::gwtree::{box_count_dimension, hawkes_dimension, simulate_gw, OffspringLaw};
use treecp::spectral::{
    boundary_chain, check_backscatter, expand, gibbs_variational_check, solve_lead_eigenvalue, MarkovChain,
};

fn free_weights() -> impl Strategy<Value = Vec<f64>> {
    (2usize..=4).prop_flat_map(|d| prop::collection::vec(0.01f64..1.5, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn first_passage_eigenvalue_is_homogeneous(free in free_weights(), c in 0.1f64..5.0) {
        let b = expand(&free);
        let scaled: Vec<f64> = b.iter().map(|x| c * x).collect();
        let t = solve_lead_eigenvalue(&b, 1.0).unwrap();
        let ts = solve_lead_eigenvalue(&scaled, 1.0).unwrap();
        prop_assert!((ts - c * t).abs() <= 1e-10 * ts.max(1.0));
    }

    #[test]
    fn eigenvalue_is_monotone_in_each_weight(free in free_weights(), i in 0usize..4, bump in 0.01f64..0.5) {
        let i = i % free.len();
        let mut up = free.clone();
        up[i] += bump;
        for rho in [1.0, 2.0] {
            let lo = solve_lead_eigenvalue(&expand(&free), rho).unwrap();
            let hi = solve_lead_eigenvalue(&expand(&up), rho).unwrap();
            prop_assert!(hi > lo);
        }
    }

    #[test]
    fn backscatter_margin_is_nonnegative(free in free_weights()) {
        prop_assert!(check_backscatter(&expand(&free)).unwrap() >= -1e-10);
    }

    #[test]
    fn gibbs_chain_is_stationary_with_zero_slack(free in free_weights(), rho in 0.5f64..3.0) {
        let b = expand(&free);
        let g = boundary_chain(&b, rho).unwrap();
        prop_assert!(g.chain.stationarity_error() < 1e-12);
        prop_assert!(g.chain.respects_inverse_pattern());
        let uniform = MarkovChain::uniform(free.len()).unwrap();
        let slack = gibbs_variational_check(&b, rho, &[g.chain.clone(), uniform]).unwrap();
        prop_assert!(slack[0].abs() < 1e-10);
        prop_assert!(slack[1] >= -1e-10);
    }

    #[test]
    fn fixed_point_stays_below_the_singularity(free in prop::collection::vec(0.05f64..1.0, 2..=3), frac in 0.0f64..0.95) {
        let p = expand(&free);
        let r = find_singularity(&p).unwrap().r;
        let params = BrwParams::new(p, frac * r).unwrap();
        let s = solve_f(&params).unwrap();
        prop_assert!(s.f.iter().all(|&x| (0.0..1.0).contains(&x)));
        prop_assert!(s.gamma < 1.0);
        prop_assert!((jacobian_gamma(&params, &s.f).unwrap() - s.gamma).abs() < 1e-12);
    }

    #[test]
    fn boundary_metric_is_an_ultrametric(
        x in prop::collection::vec(0u8..4, 12),
        y in prop::collection::vec(0u8..4, 12),
        z in prop::collection::vec(0u8..4, 12),
        alpha in 0.05f64..0.95,
    ) {
        let a = Alphabet::new(2).unwrap();
        let reduce = |v: &[u8]| a.reduce(&v.iter().map(|&l| l as usize).collect::<Vec<_>>()).unwrap();
        let (x, y, z) = (reduce(&x), reduce(&y), reduce(&z));
        let n = x.len().min(y.len()).min(z.len());
        let (x, y, z) = (&x.letters()[..n], &y.letters()[..n], &z.letters()[..n]);
        if let (Ok(xy), Ok(yz), Ok(xz)) = (d_alpha(x, y, alpha), d_alpha(y, z, alpha), d_alpha(x, z, alpha)) {
            prop_assert!(xz <= xy.max(yz) + 1e-15);
        }
    }

    #[test]
    fn deterministic_trees_have_exact_dimension(k in 2usize..=4, alpha in 0.2f64..0.8) {
        let tree = simulate_gw(&OffspringLaw::deterministic(k), 6, 0).unwrap();
        let d = box_count_dimension(&tree, alpha, None).unwrap();
        prop_assert!((d.value - hawkes_dimension(k as f64, alpha).unwrap().value).abs() < 1e-9);
    }
}
