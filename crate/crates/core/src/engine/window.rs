//! Explicit percolation structure.
//!
//! Each vertex carries a rate-1 recovery clock (clock 0) and, for every
//! letter `i`, an arrow clock (clock `1 + i`) of reference rate `λ_ref,i`.
//! Time is cut into blocks of expected one occurrence; the occurrences of a
//! block are a pure function of (seed, vertex key, clock, block index), so
//! any number of runs can query the same structure in any order.
//!
//! Every arrow carries two uniform marks. Under rates `λ ≤ λ_ref` the arrow
//! exists iff `keep · λ_ref,i < λ_i`; under a `p`-thinning an existing arrow
//! whose thinning mark is `≥ p` becomes a recovery mark at its tail.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::rng::{mix64, unit_open};

/// Largest number of occurrences read from one block; Poisson(1) exceeds
/// this with probability far below 1e-40.
const MAX_PER_BLOCK: usize = 40;

#[derive(Debug, Clone)]
pub struct PercolationWindow {
    key: [u8; 32],
    /// Clock rates indexed by clock: `[1, λ_ref,0, …, λ_ref,2d-1]`.
    clock_rates: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub time: f64,
    pub keep: f64,
    pub thin: f64,
}

impl PercolationWindow {
    /// `ref_rates` are the expanded per-letter reference rates.
    pub fn new(seed: u64, ref_rates: &[f64]) -> Self {
        let mut key = [0u8; 32];
        ChaCha8Rng::seed_from_u64(seed ^ 0x7065_7263_6f6c_6174).fill_bytes(&mut key);
        let mut clock_rates = Vec::with_capacity(ref_rates.len() + 1);
        clock_rates.push(1.0);
        clock_rates.extend_from_slice(ref_rates);
        Self { key, clock_rates }
    }

    pub fn ref_rate(&self, clock: usize) -> f64 {
        self.clock_rates[clock]
    }

    fn block(&self, vertex: u64, clock: usize, index: u64, out: &mut Vec<Arrival>) {
        out.clear();
        let rate = self.clock_rates[clock];
        let width = 1.0 / rate;
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(mix64(vertex ^ mix64(0x1000 + clock as u64)));
        rng.set_word_pos(index as u128 * 256);
        // Poisson(1) by inversion
        let u = unit_open(rng.next_u64());
        let (mut k, mut p, mut cdf) = (0usize, (-1.0f64).exp(), (-1.0f64).exp());
        while u > cdf && k < MAX_PER_BLOCK {
            k += 1;
            p /= k as f64;
            cdf += p;
        }
        let start = index as f64 * width;
        for _ in 0..k {
            let pos = unit_open(rng.next_u64());
            let keep = unit_open(rng.next_u64());
            let thin = unit_open(rng.next_u64());
            out.push(Arrival { time: start + pos * width, keep, thin });
        }
        out.sort_by(|a, b| a.time.total_cmp(&b.time));
    }

    /// First occurrence of the clock strictly after `t`.
    pub fn first_after(&self, vertex: u64, clock: usize, t: f64, scratch: &mut Vec<Arrival>) -> Arrival {
        let rate = self.clock_rates[clock];
        debug_assert!(rate > 0.0);
        let mut index = (t.max(0.0) * rate).floor() as u64;
        loop {
            self.block(vertex, clock, index, scratch);
            if let Some(a) = scratch.iter().find(|a| a.time > t) {
                return *a;
            }
            index += 1;
        }
    }

    /// All occurrences in `[0, horizon]`, in order. Test and diagnostic use.
    pub fn occurrences(&self, vertex: u64, clock: usize, horizon: f64) -> Vec<Arrival> {
        let mut out = Vec::new();
        let mut scratch = Vec::new();
        let rate = self.clock_rates[clock];
        let last = (horizon * rate).floor() as u64;
        for index in 0..=last {
            self.block(vertex, clock, index, &mut scratch);
            out.extend(scratch.iter().filter(|a| a.time <= horizon));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clock_counts_are_poisson() {
        let w = PercolationWindow::new(3, &[0.5, 2.0]);
        let horizon = 200.0;
        let mut total = [0usize; 3];
        for v in 0..200u64 {
            for (c, t) in total.iter_mut().enumerate() {
                let occ = w.occurrences(v, c, horizon);
                assert!(occ.windows(2).all(|p| p[0].time < p[1].time));
                *t += occ.len();
            }
        }
        for (c, rate) in [1.0, 0.5, 2.0].into_iter().enumerate() {
            let mean = rate * horizon * 200.0;
            let got = total[c] as f64;
            assert!((got - mean).abs() < 4.0 * mean.sqrt(), "clock {c}: {got} vs {mean}");
        }
    }

    #[test]
    fn first_after_walks_the_stream() {
        let w = PercolationWindow::new(9, &[1.3]);
        let all = w.occurrences(17, 1, 50.0);
        let mut scratch = Vec::new();
        let mut t = 0.0;
        for expect in &all {
            let a = w.first_after(17, 1, t, &mut scratch);
            assert_eq!(a, *expect);
            t = a.time;
        }
    }
}
