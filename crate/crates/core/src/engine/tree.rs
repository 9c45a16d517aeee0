//! Lazily materialized region of the tree.

use crate::cayley::{Alphabet, Letter, Word};
use crate::rng::{child_key, ROOT_KEY};

pub(crate) const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub parent: u32,
    /// Letter on the edge from the parent; unused for the origin.
    pub letter: Letter,
    /// Distance to the root `1` of the whole tree.
    pub depth: u32,
    /// First letter of the vertex's word (meaningless for the root `1`).
    pub first: Letter,
    pub key: u64,
    pub first_hit: f64,
    pub infected: bool,
    pub slot: u32,
    /// Bumped on every infection; invalidates stale scheduled events.
    pub epoch: u32,
}

/// The part of the tree explored by one run, rooted at `origin`.
///
/// `blocked` is the letter at the origin whose branch lies outside the
/// region; vertices deeper than `truncate` do not exist.
#[derive(Debug, Clone)]
pub(crate) struct Tree {
    pub alphabet: Alphabet,
    pub origin: Word,
    pub blocked: Option<Letter>,
    pub truncate: Option<u32>,
    pub nodes: Vec<Node>,
    children: Vec<u32>,
}

pub(crate) fn word_key(w: &Word) -> u64 {
    w.letters().iter().fold(ROOT_KEY, |k, &l| child_key(k, l))
}

impl Tree {
    pub fn new(alphabet: Alphabet, origin: Word, blocked: Option<Letter>, truncate: Option<u32>) -> Self {
        let key = word_key(&origin);
        let root = Node {
            parent: NONE,
            letter: 0,
            depth: origin.len() as u32,
            first: origin.first().unwrap_or(0),
            key,
            first_hit: f64::INFINITY,
            infected: false,
            slot: NONE,
            epoch: 0,
        };
        Self { alphabet, origin, blocked, truncate, nodes: vec![root], children: vec![NONE; alphabet.size()] }
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.alphabet.size()
    }

    /// Depth of the vertex adjacent to `v` along `letter`, if it is in the region.
    #[inline]
    pub fn neighbor_depth(&self, v: u32, letter: Letter) -> Option<u32> {
        let node = &self.nodes[v as usize];
        if v == 0 {
            if self.blocked == Some(letter) {
                return None;
            }
            if self.origin.last() == Some(self.alphabet.inv(letter)) {
                // the origin's own parent lies outside the region
                return None;
            }
        } else if letter == self.alphabet.inv(node.letter) {
            return Some(node.depth - 1);
        }
        let depth = node.depth + 1;
        match self.truncate {
            Some(t) if depth > t => None,
            _ => Some(depth),
        }
    }

    /// Resolves (creating if needed) the neighbour of `v` along `letter`.
    /// Call only when `neighbor_depth` returned `Some`.
    #[inline]
    pub fn neighbor(&mut self, v: u32, letter: Letter) -> u32 {
        let deg = self.degree();
        let node = &self.nodes[v as usize];
        if v != 0 && letter == self.alphabet.inv(node.letter) {
            return node.parent;
        }
        let slot = v as usize * deg + letter as usize;
        let c = self.children[slot];
        if c != NONE {
            return c;
        }
        let id = self.nodes.len() as u32;
        let child = Node {
            parent: v,
            letter,
            depth: node.depth + 1,
            first: if node.depth == 0 { letter } else { node.first },
            key: child_key(node.key, letter),
            first_hit: f64::INFINITY,
            infected: false,
            slot: NONE,
            epoch: 0,
        };
        self.nodes.push(child);
        self.children.extend(std::iter::repeat_n(NONE, deg));
        self.children[slot] = id;
        id
    }

    pub fn word(&self, mut v: u32) -> Word {
        let mut rev = Vec::new();
        while v != 0 {
            let n = &self.nodes[v as usize];
            rev.push(n.letter);
            v = n.parent;
        }
        let mut w = self.origin.clone();
        for &l in rev.iter().rev() {
            w.push(l);
        }
        w
    }

    /// Looks up an already materialized vertex.
    pub fn find(&self, w: &Word) -> Option<u32> {
        if !self.origin.is_prefix_of(w) {
            return None;
        }
        let deg = self.degree();
        let mut v = 0u32;
        for &l in &w.letters()[self.origin.len()..] {
            let c = self.children[v as usize * deg + l as usize];
            if c == NONE {
                return None;
            }
            v = c;
        }
        Some(v)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }
}
