//! Exact hitting probabilities for the contact process on the ball of
//! radius `depth` around the root, by solving the finite Markov chain.
//!
//! States are bitmasks over the ball's vertices. For each target vertex `x`,
//! `h_x(S)` is the probability that `x` is ever infected starting from `S`;
//! it solves the jump-chain equations with `h_x(S) = 1` for `x ∈ S` and
//! `h_x(∅) = 0`. All targets are swept together by Gauss–Seidel.

#![allow(dead_code)]

pub struct Ball {
    /// Vertex words as letter sequences, root first.
    pub words: Vec<Vec<u8>>,
    /// Directed edges `(from, to, rate)`.
    edges: Vec<Vec<(usize, f64)>>,
}

impl Ball {
    /// `lambda` holds the `d` free rates; letter `i` and `i + d` are inverse.
    pub fn new(lambda: &[f64], depth: usize) -> Self {
        let d = lambda.len();
        let size = 2 * d;
        let inv = |l: u8| ((l as usize + d) % size) as u8;
        let mut words: Vec<Vec<u8>> = vec![Vec::new()];
        let mut frontier = vec![Vec::new()];
        for _ in 0..depth {
            let mut next = Vec::new();
            for w in &frontier {
                for l in 0..size as u8 {
                    let w: &Vec<u8> = w;
                    if w.last().is_some_and(|&last| last == inv(l)) {
                        continue;
                    }
                    let mut c = w.clone();
                    c.push(l);
                    next.push(c);
                }
            }
            words.extend(next.iter().cloned());
            frontier = next;
        }
        let index = |w: &[u8]| words.iter().position(|v| v == w);
        let mut edges = vec![Vec::new(); words.len()];
        for (i, w) in words.iter().enumerate() {
            for l in 0..size as u8 {
                let mut y = w.clone();
                if y.last() == Some(&inv(l)) {
                    y.pop();
                } else {
                    y.push(l);
                }
                if let Some(j) = index(&y) {
                    let rate = lambda[l as usize % d];
                    if rate > 0.0 {
                        edges[i].push((j, rate));
                    }
                }
            }
        }
        Self { words, edges }
    }

    /// `u_x` from the initial state `{root}` for every non-root vertex, in the
    /// order of `words[1..]`.
    pub fn hitting_probabilities(&self) -> Vec<f64> {
        let nv = self.words.len();
        assert!(nv <= 20, "state space too large");
        let targets = nv - 1;
        let states = 1usize << nv;
        let mut h = vec![0.0f64; states * targets];
        for s in 1..states {
            for t in 0..targets {
                if s & (1 << (t + 1)) != 0 {
                    h[s * targets + t] = 1.0;
                }
            }
        }
        let mut acc = vec![0.0f64; targets];
        for _sweep in 0..100_000 {
            let mut delta = 0.0f64;
            for s in 1..states {
                let mut total = 0.0;
                acc.iter_mut().for_each(|a| *a = 0.0);
                for v in 0..nv {
                    if s & (1 << v) == 0 {
                        continue;
                    }
                    total += 1.0;
                    let base = (s & !(1 << v)) * targets;
                    for t in 0..targets {
                        acc[t] += h[base + t];
                    }
                    for &(w, rate) in &self.edges[v] {
                        if s & (1 << w) != 0 {
                            continue;
                        }
                        total += rate;
                        let base = (s | (1 << w)) * targets;
                        for t in 0..targets {
                            acc[t] += rate * h[base + t];
                        }
                    }
                }
                for t in 0..targets {
                    if s & (1 << (t + 1)) != 0 {
                        continue;
                    }
                    let new = acc[t] / total;
                    delta = delta.max((new - h[s * targets + t]).abs());
                    h[s * targets + t] = new;
                }
            }
            if delta < 1e-14 {
                break;
            }
        }
        (0..targets).map(|t| h[targets + t]).collect()
    }
}
