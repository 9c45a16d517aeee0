//! Reduced words over the free group on `d` generators.
//!
//! The homogeneous tree of degree `2d` is the Cayley graph of the free group
//! `F_d`; its vertices are reduced words and the root is the empty word.
//! Letters are indexed `0..2d` with `a_{k+1} = k` and `a_{k+1}^{-1} = k + d`,
//! so that the inverse of letter `i` is `(i + d) mod 2d`.
//!
//! Words print as dot-separated names with an apostrophe for inverses,
//! e.g. `a1.a2'.a1`; the root prints as `1`.

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Letter = u8;

/// The `2d`-letter alphabet `{a_1, …, a_d, a_1^{-1}, …, a_d^{-1}}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    d: u8,
}

impl Alphabet {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 || d > 63 {
            return Err(Error::Parameter(format!("d must be in 1..=63, got {d}")));
        }
        Ok(Self { d: d as u8 })
    }

    #[inline]
    pub fn d(self) -> usize {
        self.d as usize
    }

    /// Number of letters, which is also the degree of the tree.
    #[inline]
    pub fn size(self) -> usize {
        2 * self.d as usize
    }

    #[inline]
    pub fn inv(self, letter: Letter) -> Letter {
        (letter + self.d) % (2 * self.d)
    }

    pub fn letters(self) -> impl Iterator<Item = Letter> {
        0..(2 * self.d)
    }

    pub fn check(self, letter: usize) -> Result<Letter> {
        if letter < self.size() {
            Ok(letter as Letter)
        } else {
            Err(Error::LetterOutOfRange { letter, size: self.size() })
        }
    }

    pub fn root(self) -> Word {
        Word { d: self.d, letters: Vec::new() }
    }

    /// Free reduction of an arbitrary letter sequence.
    pub fn reduce(self, seq: &[usize]) -> Result<Word> {
        let mut letters: Vec<Letter> = Vec::with_capacity(seq.len());
        for &raw in seq {
            let l = self.check(raw)?;
            match letters.last() {
                Some(&top) if top == self.inv(l) => {
                    letters.pop();
                }
                _ => letters.push(l),
            }
        }
        Ok(Word { d: self.d, letters })
    }

    /// Builds a word from letters that must already be reduced.
    pub fn word(self, letters: &[Letter]) -> Result<Word> {
        for (k, &l) in letters.iter().enumerate() {
            self.check(l as usize)?;
            if k > 0 && letters[k - 1] == self.inv(l) {
                return Err(Error::Parameter(format!("letters are not reduced at position {k}")));
            }
        }
        Ok(Word { d: self.d, letters: letters.to_vec() })
    }

    pub fn concat(self, x: &Word, y: &Word) -> Word {
        debug_assert!(x.d == self.d && y.d == self.d);
        let mut letters = x.letters.clone();
        for &l in &y.letters {
            match letters.last() {
                Some(&top) if top == self.inv(l) => {
                    letters.pop();
                }
                _ => letters.push(l),
            }
        }
        Word { d: self.d, letters }
    }

    pub fn inverse(self, x: &Word) -> Word {
        Word { d: self.d, letters: x.letters.iter().rev().map(|&l| self.inv(l)).collect() }
    }

    /// `|G_n| = 2d (2d-1)^{n-1}` for `n >= 1`, and 1 for the root.
    pub fn sphere_size(self, n: usize) -> Result<u64> {
        if n == 0 {
            return Ok(1);
        }
        let branch = (self.size() - 1) as u64;
        let exp = u32::try_from(n - 1).map_err(|_| Error::Overflow(n))?;
        branch.checked_pow(exp).and_then(|p| p.checked_mul(self.size() as u64)).ok_or(Error::Overflow(n))
    }

    /// Lexicographic enumeration of the sphere `G_n`.
    pub fn enumerate_sphere(self, n: usize) -> SphereIter {
        SphereIter { alphabet: self, current: None, n, done: false }
    }

    /// Words of length `n` in the subtree that avoids the branch through
    /// `blocked` at the root. There are `(2d-1)^n` of them.
    pub fn enumerate_level_avoiding(self, n: usize, blocked: Letter) -> impl Iterator<Item = Word> {
        self.enumerate_sphere(n).filter(move |w| w.letters.first().is_none_or(|&f| f != blocked))
    }

    pub fn letter_name(self, l: Letter) -> String {
        if l < self.d {
            format!("a{}", l + 1)
        } else {
            format!("a{}'", l - self.d + 1)
        }
    }

    pub fn parse_letter(self, s: &str) -> Result<Letter> {
        let bad = || Error::ParseWord(s.to_string());
        let (body, inverse) = match s.strip_suffix('\'') {
            Some(b) => (b, true),
            None => (s, false),
        };
        let idx: usize = body.strip_prefix('a').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if idx == 0 || idx > self.d() {
            return Err(bad());
        }
        let base = (idx - 1) as Letter;
        Ok(if inverse { base + self.d } else { base })
    }

    /// Parses `a1.a2'.a1`; `1` or the empty string is the root.
    pub fn parse_word(self, s: &str) -> Result<Word> {
        let s = s.trim();
        if s.is_empty() || s == "1" {
            return Ok(self.root());
        }
        let letters = s.split('.').map(|tok| self.parse_letter(tok)).collect::<Result<Vec<_>>>()?;
        self.word(&letters).map_err(|_| Error::ParseWord(s.to_string()))
    }
}

/// A reduced word, i.e. a vertex of the tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    d: u8,
    letters: Vec<Letter>,
}

impl Word {
    pub fn alphabet(&self) -> Alphabet {
        Alphabet { d: self.d }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_root(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn first(&self) -> Option<Letter> {
        self.letters.first().copied()
    }

    pub fn last(&self) -> Option<Letter> {
        self.letters.last().copied()
    }

    /// Appends a letter, reducing if it cancels the last one.
    pub fn push(&mut self, l: Letter) {
        let a = self.alphabet();
        match self.letters.last() {
            Some(&top) if top == a.inv(l) => {
                self.letters.pop();
            }
            _ => self.letters.push(l),
        }
    }

    pub fn child(&self, l: Letter) -> Word {
        let mut w = self.clone();
        w.push(l);
        w
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word { d: self.d, letters: self.letters[..n.min(self.letters.len())].to_vec() }
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.letters.starts_with(&self.letters)
    }

    /// `a^n` for a single letter.
    pub fn power(alphabet: Alphabet, l: Letter, n: usize) -> Word {
        Word { d: alphabet.d, letters: vec![l; n] }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return f.write_str("1");
        }
        let a = self.alphabet();
        for (k, &l) in self.letters.iter().enumerate() {
            if k > 0 {
                f.write_str(".")?;
            }
            f.write_str(&a.letter_name(l))?;
        }
        Ok(())
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub struct SphereIter {
    alphabet: Alphabet,
    current: Option<Vec<Letter>>,
    n: usize,
    done: bool,
}

impl SphereIter {
    fn first_from(&self, prefix: &mut Vec<Letter>) {
        while prefix.len() < self.n {
            let next = (0..self.alphabet.size() as Letter)
                .find(|&l| prefix.last().is_none_or(|&p| p != self.alphabet.inv(l)))
                .expect("d >= 1 always leaves an admissible letter");
            prefix.push(next);
        }
    }
}

impl Iterator for SphereIter {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        if self.done {
            return None;
        }
        let a = self.alphabet;
        let size = a.size() as Letter;
        match self.current.take() {
            None => {
                let mut w = Vec::with_capacity(self.n);
                self.first_from(&mut w);
                self.current = Some(w.clone());
                if self.n == 0 {
                    self.done = true;
                }
                Some(Word { d: a.d, letters: w })
            }
            Some(mut w) => {
                // odometer: bump the deepest position that has an admissible successor
                while let Some(l) = w.pop() {
                    let prev = w.last().copied();
                    let succ = (l + 1..size).find(|&c| prev.is_none_or(|p| p != a.inv(c)));
                    if let Some(c) = succ {
                        w.push(c);
                        self.first_from(&mut w);
                        self.current = Some(w.clone());
                        return Some(Word { d: a.d, letters: w });
                    }
                }
                self.done = true;
                None
            }
        }
    }
}

/// A semi-infinite reduced word, held as a finite prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundaryWord {
    prefix: Word,
}

impl BoundaryWord {
    pub fn new(prefix: Word) -> Self {
        Self { prefix }
    }

    pub fn prefix(&self, n: usize) -> Word {
        self.prefix.prefix(n)
    }

    pub fn depth(&self) -> usize {
        self.prefix.len()
    }

    pub fn as_word(&self) -> &Word {
        &self.prefix
    }
}

/// The ultrametric `d_alpha(w, w') = alpha^N`, `N` the length of the longest
/// common prefix. Identical prefixes are declared equal and have distance 0.
pub fn d_alpha(x: &[Letter], y: &[Letter], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if x == y {
        return Ok(0.0);
    }
    let shared = x.len().min(y.len());
    match (0..shared).find(|&k| x[k] != y[k]) {
        Some(n) => Ok(alpha.powi(n as i32)),
        None => Err(Error::InsufficientDepth { depth: shared }),
    }
}
