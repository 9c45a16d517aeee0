//! Monte Carlo hitting probabilities against the exact finite chain on the
//! depth-2 truncated tree.

mod support;

use support::ctmc::Ball;
use treecp::cayley::Alphabet;
use treecp::engine::Rates;
use treecp::estimators::{estimate_u_many, Mc};

#[test]
fn truncated_tree_hitting_matches_exact_chain() {
    let lambda = [0.6, 1.1];
    let exact = Ball::new(&lambda, 2).hitting_probabilities();
    let alphabet = Alphabet::new(2).unwrap();
    let ball = Ball::new(&lambda, 2);
    let words: Vec<_> = ball.words[1..].iter().map(|w| alphabet.word(w).unwrap()).collect();
    assert_eq!(words.len(), 16);
    let rates = Rates::new(&lambda).unwrap();
    let mc = Mc::new(10_000, 400.0, 11).truncate(2);
    let est = estimate_u_many(&words, &rates, &mc).unwrap();
    for ((w, e), x) in words.iter().zip(&est).zip(&exact) {
        let sigma = (x * (1.0 - x) / 10_000f64).sqrt();
        assert!((e.value - x).abs() <= 3.0 * sigma, "{w}: {} vs exact {x} (sigma {sigma})", e.value);
        assert!(e.flags.is_empty(), "{w}: {:?}", e.flags);
    }
}
