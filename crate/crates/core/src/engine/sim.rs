//! The two samplers.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand::{Rng, RngCore, SeedableRng};

use super::record::{EventCounts, RunRecord, Snapshot, Status};
use super::tree::{word_key, Tree, NONE};
use super::window::PercolationWindow;
use super::{ProcessView, Rates, Region, RunConfig, StopFn};
use crate::cayley::Letter;
use crate::error::Result;
use crate::rng::{unit_open, SimRng};

enum Outcome {
    Infected,
    Absorbed,
    Discarded,
}

struct State<'a> {
    cfg: &'a RunConfig,
    tree: Tree,
    sink_depth: Option<u32>,
    active: Vec<u32>,
    root_node: u32,
    watch_keys: HashMap<u64, Vec<usize>>,
    watched_node: Vec<u32>,
    watched_first_hit: Vec<Option<f64>>,
    n_watched_hit: usize,
    sink_hits: Vec<(u32, f64)>,
    root_reinfections: Vec<f64>,
    counts: EventCounts,
    max_depth: u32,
    snapshots: Vec<Snapshot>,
    next_snapshot: usize,
    status: Option<Status>,
}

impl<'a> State<'a> {
    fn new(rates: &Rates, cfg: &'a RunConfig, region: &Region) -> Self {
        let tree = Tree::new(rates.alphabet(), region.origin.clone(), region.blocked, cfg.truncate_depth);
        let mut watch_keys: HashMap<u64, Vec<usize>> = HashMap::new();
        for (i, w) in cfg.watch.iter().enumerate() {
            watch_keys.entry(word_key(w)).or_default().push(i);
        }
        Self {
            cfg,
            tree,
            sink_depth: region.sink_depth,
            active: Vec::new(),
            root_node: if region.origin.is_root() { 0 } else { NONE },
            watch_keys,
            watched_node: vec![NONE; cfg.watch.len()],
            watched_first_hit: vec![None; cfg.watch.len()],
            n_watched_hit: 0,
            sink_hits: Vec::new(),
            root_reinfections: Vec::new(),
            counts: EventCounts::default(),
            max_depth: region.origin.len() as u32,
            snapshots: Vec::with_capacity(cfg.snapshot_times.len()),
            next_snapshot: 0,
            status: None,
        }
    }

    fn mark_first_hit(&mut self, v: u32, t: f64) {
        let node = &mut self.tree.nodes[v as usize];
        if node.first_hit.is_finite() {
            return;
        }
        node.first_hit = t;
        if let Some(idx) = self.watch_keys.get(&node.key) {
            for &i in idx {
                self.watched_node[i] = v;
                self.watched_first_hit[i] = Some(t);
                self.n_watched_hit += 1;
            }
        }
    }

    fn infect(&mut self, v: u32, t: f64) -> Outcome {
        let node = &self.tree.nodes[v as usize];
        if node.infected {
            self.counts.discarded += 1;
            return Outcome::Discarded;
        }
        let depth = node.depth;
        if Some(depth) == self.sink_depth {
            self.counts.absorbed += 1;
            if !node.first_hit.is_finite() {
                self.sink_hits.push((v, t));
            }
            self.mark_first_hit(v, t);
            return Outcome::Absorbed;
        }
        self.mark_first_hit(v, t);
        let node = &mut self.tree.nodes[v as usize];
        node.infected = true;
        node.slot = self.active.len() as u32;
        node.epoch = node.epoch.wrapping_add(1);
        self.active.push(v);
        self.counts.infections += 1;
        self.max_depth = self.max_depth.max(depth);
        if v == self.root_node && t > 0.0 {
            self.root_reinfections.push(t);
        }
        if depth > self.cfg.depth_cap {
            self.status = Some(Status::DepthCap);
        } else if self.active.len() > self.cfg.population_cap {
            self.status = Some(Status::PopulationCap);
        }
        Outcome::Infected
    }

    fn recover(&mut self, v: u32) {
        let node = &mut self.tree.nodes[v as usize];
        debug_assert!(node.infected);
        node.infected = false;
        let slot = node.slot as usize;
        node.slot = NONE;
        self.active.swap_remove(slot);
        if let Some(&moved) = self.active.get(slot) {
            self.tree.nodes[moved as usize].slot = slot as u32;
        }
    }

    fn snapshot(&self, t: f64) -> Snapshot {
        let mut s = Snapshot::empty(t, self.cfg.watch.len(), self.cfg.record_infected);
        if self.active.is_empty() {
            return s;
        }
        let (mut lo, mut hi) = (u32::MAX, 0u32);
        for &v in &self.active {
            let d = self.tree.nodes[v as usize].depth;
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let mut levels = vec![0u32; hi as usize + 1];
        for &v in &self.active {
            levels[self.tree.nodes[v as usize].depth as usize] += 1;
        }
        s.population = self.active.len();
        s.r_t = Some(lo);
        s.big_r_t = Some(hi);
        s.level_counts = levels;
        s.root_infected = self.root_node != NONE && self.tree.nodes[0].infected;
        for (i, &v) in self.watched_node.iter().enumerate() {
            s.watched[i] = v != NONE && self.tree.nodes[v as usize].infected;
        }
        if let Some(keys) = s.infected.as_mut() {
            keys.extend(self.active.iter().map(|&v| self.tree.nodes[v as usize].key));
            keys.sort_unstable();
        }
        s
    }

    /// Records every pending snapshot strictly before `t`.
    fn snapshots_before(&mut self, t: f64) {
        while let Some(&s) = self.cfg.snapshot_times.get(self.next_snapshot) {
            if s >= t {
                break;
            }
            let snap = self.snapshot(s);
            self.snapshots.push(snap);
            self.next_snapshot += 1;
        }
    }

    fn finish_snapshots(&mut self, status: Status) {
        match status {
            Status::Extinct | Status::Horizon => self.snapshots_before(f64::INFINITY),
            _ => {}
        }
    }

    fn view(&self, t: f64, last: u32) -> ProcessView {
        ProcessView {
            time: t,
            population: self.active.len(),
            max_depth_infected: self.max_depth,
            last_depth: self.tree.nodes[last as usize].depth,
            root_infected_now: last == self.root_node && self.tree.nodes[0].infected,
        }
    }

    /// Checks caps, the watch list and the stop predicate after an event.
    fn should_stop(&mut self, t: f64, last: u32, stop: Option<StopFn>) -> bool {
        if self.status.is_some() {
            return true;
        }
        if self.cfg.stop_when_watched_hit && !self.cfg.watch.is_empty() && self.n_watched_hit == self.cfg.watch.len() {
            self.status = Some(Status::Stopped);
            return true;
        }
        if let Some(f) = stop {
            if f(&self.view(t, last)) {
                self.status = Some(Status::Stopped);
                return true;
            }
        }
        false
    }

    fn into_record(mut self, seed: u64, restricted: bool, stop_time: f64) -> RunRecord {
        let status = self.status.unwrap_or(Status::Horizon);
        self.finish_snapshots(status);
        let sink_hits = self.sink_hits.iter().map(|&(v, t)| (self.tree.word(v), t)).collect();
        RunRecord {
            seed,
            status,
            restricted,
            horizon: self.cfg.horizon,
            stop_time,
            extinction_time: (status == Status::Extinct).then_some(stop_time),
            root_reinfections: self.root_reinfections,
            snapshots: self.snapshots,
            counts: self.counts,
            max_depth: self.max_depth,
            sink_hits,
            watch: self.cfg.watch.clone(),
            watched_first_hit: self.watched_first_hit,
            tree: self.tree,
        }
    }
}

fn restricted(cfg: &RunConfig, region: &Region) -> bool {
    region.is_restricted() || cfg.truncate_depth.is_some()
}

pub(super) fn gillespie(
    rates: &Rates,
    cfg: &RunConfig,
    region: &Region,
    rng_seed: u64,
    stop: Option<StopFn>,
    seed: u64,
) -> Result<RunRecord> {
    let mut rng = SimRng::seed_from_u64(rng_seed);
    let mut st = State::new(rates, cfg, region);
    let lam: Vec<f64> = rates.expanded().to_vec();
    let per_site = 1.0 + rates.total();
    let mut t = region.start_time;
    st.snapshots_before(t);
    st.infect(0, t);
    if st.status.is_some() {
        return Ok(st.into_record(seed, restricted(cfg, region), t));
    }
    loop {
        let n = st.active.len();
        if n == 0 {
            st.status = Some(Status::Extinct);
            break;
        }
        let dt = -unit_open(rng.next_u64()).ln() / (n as f64 * per_site);
        let t_next = t + dt;
        if t_next > cfg.horizon {
            t = cfg.horizon;
            st.status = Some(Status::Horizon);
            break;
        }
        st.snapshots_before(t_next);
        t = t_next;
        st.counts.events += 1;
        let v = st.active[rng.random_range(0..n)];
        let mut x = rng.random::<f64>() * per_site;
        if x < 1.0 {
            st.counts.recoveries += 1;
            st.recover(v);
            if st.should_stop(t, v, stop) {
                break;
            }
            continue;
        }
        x -= 1.0;
        let mut letter = lam.len() - 1;
        for (i, &l) in lam.iter().enumerate() {
            if x < l {
                letter = i;
                break;
            }
            x -= l;
        }
        // skip zero-rate letters that float rounding could land on
        while lam[letter] == 0.0 && letter > 0 {
            letter -= 1;
        }
        st.counts.attempts += 1;
        let letter = letter as Letter;
        let target = match st.tree.neighbor_depth(v, letter) {
            Some(_) => st.tree.neighbor(v, letter),
            None => {
                st.counts.discarded += 1;
                continue;
            }
        };
        st.infect(target, t);
        if st.should_stop(t, target, stop) {
            break;
        }
    }
    Ok(st.into_record(seed, restricted(cfg, region), t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    time: f64,
    node: u32,
    clock: u8,
    epoch: u32,
    keep: f64,
    thin: f64,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.node.cmp(&self.node))
            .then_with(|| other.clock.cmp(&self.clock))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Scheduler<'w> {
    window: &'w PercolationWindow,
    heap: BinaryHeap<Pending>,
    scratch: Vec<super::window::Arrival>,
    lam: Vec<f64>,
}

impl Scheduler<'_> {
    fn push(&mut self, st: &State, v: u32, clock: usize, after: f64) {
        let node = &st.tree.nodes[v as usize];
        let a = self.window.first_after(node.key, clock, after, &mut self.scratch);
        self.heap.push(Pending {
            time: a.time,
            node: v,
            clock: clock as u8,
            epoch: node.epoch,
            keep: a.keep,
            thin: a.thin,
        });
    }

    fn on_infected(&mut self, st: &State, v: u32, t: f64) {
        self.push(st, v, 0, t);
        for i in 0..self.lam.len() {
            if self.lam[i] > 0.0 && st.tree.neighbor_depth(v, i as Letter).is_some() {
                self.push(st, v, 1 + i, t);
            }
        }
    }
}

pub(super) fn percolation(
    rates: &Rates,
    cfg: &RunConfig,
    region: &Region,
    window: &PercolationWindow,
    thinning: Option<f64>,
    stop: Option<StopFn>,
    seed: u64,
) -> Result<RunRecord> {
    let mut st = State::new(rates, cfg, region);
    let mut sched = Scheduler { window, heap: BinaryHeap::new(), scratch: Vec::new(), lam: rates.expanded().to_vec() };
    let mut t = region.start_time;
    st.snapshots_before(t);
    if let Outcome::Infected = st.infect(0, t) {
        sched.on_infected(&st, 0, t);
    }
    if st.status.is_some() {
        return Ok(st.into_record(seed, restricted(cfg, region), t));
    }
    loop {
        if st.active.is_empty() {
            st.status = Some(Status::Extinct);
            break;
        }
        let Some(ev) = sched.heap.pop() else {
            st.status = Some(Status::Extinct);
            break;
        };
        let node = &st.tree.nodes[ev.node as usize];
        if !node.infected || node.epoch != ev.epoch {
            continue;
        }
        if ev.time > cfg.horizon {
            t = cfg.horizon;
            st.status = Some(Status::Horizon);
            break;
        }
        st.snapshots_before(ev.time);
        t = ev.time;
        st.counts.events += 1;
        let v = ev.node;
        if ev.clock == 0 {
            st.counts.recoveries += 1;
            st.recover(v);
            if st.should_stop(t, v, stop) {
                break;
            }
            continue;
        }
        let letter = ev.clock as usize - 1;
        if ev.keep * window.ref_rate(ev.clock as usize) >= sched.lam[letter] {
            st.counts.inactive += 1;
            sched.push(&st, v, ev.clock as usize, t);
            continue;
        }
        st.counts.attempts += 1;
        if let Some(p) = thinning {
            if ev.thin >= p {
                st.counts.thinned += 1;
                st.recover(v);
                if st.should_stop(t, v, stop) {
                    break;
                }
                continue;
            }
        }
        sched.push(&st, v, ev.clock as usize, t);
        let target = st.tree.neighbor(v, letter as Letter);
        if let Outcome::Infected = st.infect(target, t) {
            sched.on_infected(&st, target, t);
        }
        if st.should_stop(t, target, stop) {
            break;
        }
    }
    Ok(st.into_record(seed, restricted(cfg, region), t))
}
