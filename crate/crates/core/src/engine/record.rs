//! Observables of one trajectory.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};

use super::tree::Tree;
use crate::cayley::{Letter, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// The infected set emptied before the horizon.
    Extinct,
    /// Still alive at the horizon.
    Horizon,
    /// A stop predicate (or the watch list) ended the run.
    Stopped,
    /// A vertex beyond the depth cap was infected.
    DepthCap,
    /// The infected set exceeded the population cap.
    PopulationCap,
}

impl Status {
    /// Ended by a safety cap while still alive.
    pub fn capped(self) -> bool {
        matches!(self, Status::DepthCap | Status::PopulationCap)
    }
}

/// State of the infected set at a fixed time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub population: usize,
    /// Smallest distance to `1` among infected sites.
    pub r_t: Option<u32>,
    /// Largest distance to `1` among infected sites.
    #[serde(rename = "R_t")]
    pub big_r_t: Option<u32>,
    /// `level_counts[n] = |A_t ∩ G_n|`.
    pub level_counts: Vec<u32>,
    pub root_infected: bool,
    /// Membership of each watched vertex in `A_t`.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub watched: Vec<bool>,
    /// Keys of the infected vertices, sorted; only when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infected: Option<Vec<u64>>,
}

impl Snapshot {
    pub(crate) fn empty(t: f64, n_watch: usize, keys: bool) -> Self {
        Self {
            t,
            population: 0,
            r_t: None,
            big_r_t: None,
            level_counts: Vec::new(),
            root_infected: false,
            watched: vec![false; n_watch],
            infected: keys.then(Vec::new),
        }
    }

    pub fn level(&self, n: usize) -> u32 {
        self.level_counts.get(n).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EventCounts {
    /// Clock rings consumed from the random streams.
    pub events: u64,
    pub recoveries: u64,
    /// Infection attempts (arrows), successful or not.
    pub attempts: u64,
    pub infections: u64,
    /// Attempts onto infected vertices or outside the region.
    pub discarded: u64,
    /// Attempts absorbed by sink vertices.
    pub absorbed: u64,
    /// Arrows turned into recovery marks by thinning.
    pub thinned: u64,
    /// Arrow-clock rings that are not arrows at the run's rates.
    pub inactive: u64,
}

/// One simulated trajectory.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub seed: u64,
    pub status: Status,
    pub restricted: bool,
    pub horizon: f64,
    /// Time at which the simulation stopped.
    pub stop_time: f64,
    pub extinction_time: Option<f64>,
    /// Times at which `1` re-entered the infected set.
    pub root_reinfections: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub counts: EventCounts,
    pub max_depth: u32,
    /// Sink vertices reached, in order of arrival.
    pub sink_hits: Vec<(Word, f64)>,
    pub watch: Vec<Word>,
    pub watched_first_hit: Vec<Option<f64>>,
    pub(crate) tree: Tree,
}

/// Ever-infected vertex as seen by estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitVertex {
    pub key: u64,
    pub depth: u32,
    pub first: Letter,
    pub last: Letter,
    pub time: f64,
}

impl RunRecord {
    /// First infection time of `x`, if it was infected.
    pub fn first_hit(&self, x: &Word) -> Option<f64> {
        let v = self.tree.find(x)?;
        let t = self.tree.nodes[v as usize].first_hit;
        t.is_finite().then_some(t)
    }

    /// Ever-infected vertices (including sinks), in materialization order.
    pub fn hits(&self) -> impl Iterator<Item = HitVertex> + '_ {
        self.tree.nodes.iter().filter(|n| n.first_hit.is_finite()).map(|n| HitVertex {
            key: n.key,
            depth: n.depth,
            first: n.first,
            last: n.letter,
            time: n.first_hit,
        })
    }

    /// Ever-infected vertices with their words, sorted by word.
    pub fn first_hit_map(&self) -> BTreeMap<Word, f64> {
        (0..self.tree.len() as u32)
            .filter(|&v| self.tree.nodes[v as usize].first_hit.is_finite())
            .map(|v| (self.tree.word(v), self.tree.nodes[v as usize].first_hit))
            .collect()
    }

    /// Infected set when the run stopped, sorted.
    pub fn final_state(&self) -> Vec<Word> {
        let mut out: Vec<Word> = (0..self.tree.len() as u32)
            .filter(|&v| self.tree.nodes[v as usize].infected)
            .map(|v| self.tree.word(v))
            .collect();
        out.sort();
        out
    }

    pub fn ever_infected_count(&self) -> usize {
        self.tree.nodes.iter().filter(|n| n.first_hit.is_finite()).count()
    }

    /// Number of vertices the run materialized.
    pub fn explored(&self) -> usize {
        self.tree.len()
    }

    pub fn survived(&self) -> bool {
        self.status != Status::Extinct
    }

    /// The snapshot taken at time `t`, if any.
    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.t == t)
    }

    /// Snapshot series as CSV with columns `t,r_t,R_t,n,N_n` (one row per
    /// occupied level; an empty state gives a single row with `n` blank).
    pub fn snapshots_csv(&self) -> String {
        let mut out = String::from("t,r_t,R_t,n,N_n\n");
        for s in &self.snapshots {
            let r = s.r_t.map(|v| v.to_string()).unwrap_or_default();
            let big = s.big_r_t.map(|v| v.to_string()).unwrap_or_default();
            if s.population == 0 {
                let _ = writeln!(out, "{},{},{},,0", s.t, r, big);
                continue;
            }
            for (n, &c) in s.level_counts.iter().enumerate().filter(|(_, c)| **c > 0) {
                let _ = writeln!(out, "{},{},{},{},{}", s.t, r, big, n, c);
            }
        }
        out
    }
}

struct FirstHits<'a>(&'a RunRecord);

impl Serialize for FirstHits<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let map = self.0.first_hit_map();
        let mut m = s.serialize_map(Some(map.len()))?;
        for (w, t) in &map {
            m.serialize_entry(&w.to_string(), t)?;
        }
        m.end()
    }
}

impl Serialize for RunRecord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("RunRecord", 13)?;
        st.serialize_field("seed", &self.seed)?;
        st.serialize_field("status", &self.status)?;
        st.serialize_field("restricted", &self.restricted)?;
        st.serialize_field("horizon", &self.horizon)?;
        st.serialize_field("stop_time", &self.stop_time)?;
        st.serialize_field("extinction_time", &self.extinction_time)?;
        st.serialize_field("root_reinfections", &self.root_reinfections)?;
        st.serialize_field("counts", &self.counts)?;
        st.serialize_field("max_depth", &self.max_depth)?;
        st.serialize_field("first_hit", &FirstHits(self))?;
        let sinks: Vec<(String, f64)> = self.sink_hits.iter().map(|(w, t)| (w.to_string(), *t)).collect();
        st.serialize_field("sink_hits", &sinks)?;
        let watched: Vec<(String, Option<f64>)> =
            self.watch.iter().zip(&self.watched_first_hit).map(|(w, t)| (w.to_string(), *t)).collect();
        st.serialize_field("watched_first_hit", &watched)?;
        st.serialize_field("snapshots", &self.snapshots)?;
        st.end()
    }
}
