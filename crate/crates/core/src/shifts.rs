//! Two-symbol sequences, labelled vertex graphs and their entropy.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShiftError {
    #[error("power iteration did not converge")]
    NoConvergence,
    #[error("vertex {0} has no outgoing edge")]
    DeadEnd(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("symbol {0} is not in {{0, 1}}")]
    BadSymbol(u8),
    #[error("unknown built-in graph {0}")]
    UnknownGraph(String),
}

/// Bi-infinite sequence over `{0, 1}`: periodic left tail, finite core
/// occupying indices `start..start + core.len()`, periodic right tail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSequence {
    pub left: Vec<u8>,
    pub core: Vec<u8>,
    pub right: Vec<u8>,
    pub start: i64,
}

impl SymbolSequence {
    pub fn constant(s: u8) -> Self {
        SymbolSequence { left: vec![s], core: vec![], right: vec![s], start: 0 }
    }

    /// Core placed at `start` with zero tails.
    pub fn with_zero_tails(core: &[u8], start: i64) -> Self {
        SymbolSequence { left: vec![0], core: core.to_vec(), right: vec![0], start }
    }

    pub fn end(&self) -> i64 {
        self.start + self.core.len() as i64
    }

    pub fn get(&self, i: i64) -> u8 {
        if i < self.start {
            let n = self.left.len() as i64;
            // The left tail is read backwards from the core.
            let d = self.start - 1 - i;
            self.left[(n - 1 - d.rem_euclid(n)) as usize]
        } else if i >= self.end() {
            let n = self.right.len() as i64;
            self.right[(i - self.end()).rem_euclid(n) as usize]
        } else {
            self.core[(i - self.start) as usize]
        }
    }

    /// Symbols at indices `lo..=hi`.
    pub fn window(&self, lo: i64, hi: i64) -> Vec<u8> {
        (lo..=hi).map(|i| self.get(i)).collect()
    }

    /// Smallest `[lo, hi]` outside of which the sequence is zero, if both
    /// tails are zero.
    pub fn support(&self) -> Option<(i64, i64)> {
        if self.left.iter().any(|&s| s != 0) || self.right.iter().any(|&s| s != 0) {
            return None;
        }
        let first = self.core.iter().position(|&s| s != 0)?;
        let last = self.core.iter().rposition(|&s| s != 0)?;
        Some((self.start + first as i64, self.start + last as i64))
    }

    fn horizon(&self) -> i64 {
        let l = self.left.len() as i64;
        let r = self.right.len() as i64;
        self.start.abs() + self.end().abs() + 2 * l * r + 2
    }
}

impl fmt::Display for SymbolSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = |v: &[u8]| v.iter().map(|s| char::from(b'0' + s)).collect::<String>();
        write!(f, "({})^inf [{}]@{} ({})^inf", w(&self.left), w(&self.core), self.start, w(&self.right))
    }
}

/// `sigma^k`: `(sigma^k x)_i = x_{i+k}`.
pub fn shift(seq: &SymbolSequence, k: i64) -> SymbolSequence {
    let mut s = seq.clone();
    s.start -= k;
    // Keep the tails aligned with the moved core.
    s
}

/// `2^{-k}` with `k` the smallest `|i|` where the sequences differ.
pub fn metric(x: &SymbolSequence, y: &SymbolSequence) -> f64 {
    let h = x.horizon().max(y.horizon());
    for k in 0..=h {
        if x.get(k) != y.get(k) || x.get(-k) != y.get(-k) {
            return 2f64.powi(-(k as i32));
        }
    }
    0.0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub label: u8,
}

/// Labelled directed graph presenting a sofic shift. `origin`, when given,
/// lists the vertices a path may occupy just before index 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexGraph {
    pub vertices: Vec<String>,
    pub edges: Vec<Edge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

type StateSet = BTreeSet<usize>;

impl VertexGraph {
    pub fn new(vertices: &[&str], edges: &[(&str, &str, u8)]) -> Result<Self, ShiftError> {
        let g = VertexGraph {
            vertices: vertices.iter().map(|s| s.to_string()).collect(),
            edges: edges.iter().map(|(a, b, l)| Edge { from: a.to_string(), to: b.to_string(), label: *l }).collect(),
            origin: None,
            note: None,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), ShiftError> {
        for e in &self.edges {
            if e.label > 1 {
                return Err(ShiftError::BadSymbol(e.label));
            }
            for v in [&e.from, &e.to] {
                if !self.vertices.contains(v) {
                    return Err(ShiftError::UnknownVertex(v.clone()));
                }
            }
        }
        for v in self.origin.iter().flatten() {
            if !self.vertices.contains(v) {
                return Err(ShiftError::UnknownVertex(v.clone()));
            }
        }
        for v in &self.vertices {
            if !self.edges.iter().any(|e| &e.from == v) {
                return Err(ShiftError::DeadEnd(v.clone()));
            }
        }
        Ok(())
    }

    /// Single vertex with both loops.
    pub fn full_shift() -> Self {
        Self::new(&["A"], &[("A", "A", 0), ("A", "A", 1)]).expect("valid")
    }

    /// `A -0-> A`, `A -1-> B`, `B -0-> A`: no two consecutive ones.
    pub fn golden_mean() -> Self {
        Self::new(&["A", "B"], &[("A", "A", 0), ("A", "B", 1), ("B", "A", 0)]).expect("valid")
    }

    /// Symbol changes `0 -> 1` only at even indices and `1 -> 0` only at
    /// odd ones. Vertex `sP` remembers the last symbol `s` and the parity
    /// `P` of the next index.
    pub fn parity() -> Self {
        let mut g = Self::new(
            &["0e", "1e", "0o", "1o"],
            &[
                ("0e", "0o", 0),
                ("0e", "1o", 1),
                ("1e", "1o", 1),
                ("0o", "0e", 0),
                ("1o", "1e", 1),
                ("1o", "0e", 0),
            ],
        )
        .expect("valid");
        g.origin = Some(vec!["0e".into(), "1e".into()]);
        g
    }

    /// The default presentation; its square has entropy `ln((3 + sqrt 5)/2)`.
    pub fn default_candidate() -> Self {
        let mut g = Self::parity();
        g.note = Some("candidate: entropy-matched and consistent with the window parity of the corridors".into());
        g
    }

    pub fn builtin(name: &str) -> Result<Self, ShiftError> {
        match name {
            "full" | "full2" => Ok(Self::full_shift()),
            "golden" | "golden-mean" => Ok(Self::golden_mean()),
            "parity" | "default" => Ok(Self::default_candidate()),
            _ => Err(ShiftError::UnknownGraph(name.into())),
        }
    }

    pub fn from_json(s: &str) -> Result<Self, String> {
        let g: VertexGraph = serde_json::from_str(s).map_err(|e| e.to_string())?;
        g.validate().map_err(|e| e.to_string())?;
        Ok(g)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    fn idx(&self, v: &str) -> usize {
        self.vertices.iter().position(|x| x == v).expect("validated")
    }

    /// Adjacency matrix counting parallel edges.
    pub fn adjacency(&self) -> Vec<Vec<f64>> {
        let n = self.vertices.len();
        let mut a = vec![vec![0.0; n]; n];
        for e in &self.edges {
            a[self.idx(&e.from)][self.idx(&e.to)] += 1.0;
        }
        a
    }

    fn all(&self) -> StateSet {
        (0..self.vertices.len()).collect()
    }

    fn step(&self, s: &StateSet, label: Option<u8>) -> StateSet {
        self.edges
            .iter()
            .filter(|e| label.is_none_or(|l| e.label == l) && s.contains(&self.idx(&e.from)))
            .map(|e| self.idx(&e.to))
            .collect()
    }

    fn step_back(&self, s: &StateSet, label: Option<u8>) -> StateSet {
        self.edges
            .iter()
            .filter(|e| label.is_none_or(|l| e.label == l) && s.contains(&self.idx(&e.to)))
            .map(|e| self.idx(&e.from))
            .collect()
    }

    /// Vertices a path may occupy just before index `i`.
    fn states_at(&self, i: i64) -> StateSet {
        let Some(o) = &self.origin else { return self.all() };
        let mut s: StateSet = o.iter().map(|v| self.idx(v)).collect();
        for _ in 0..i.max(0) {
            s = self.step(&s, None);
        }
        for _ in 0..(-i).max(0) {
            s = self.step_back(&s, None);
        }
        s
    }

    /// Vertices with arbitrarily long incoming (`back`) or outgoing zero paths.
    fn zero_core(&self, back: bool) -> StateSet {
        let mut s = self.all();
        for _ in 0..=self.vertices.len() {
            s = if back { self.step(&s, Some(0)) } else { self.step_back(&s, Some(0)) };
        }
        s
    }

    /// Placement-aware check that `seq` (with zero tails) labels a path.
    pub fn admissible_sequence(&self, seq: &SymbolSequence) -> bool {
        if seq.support().is_none() && !(seq.left == [0] && seq.right == [0]) {
            return false;
        }
        let pad = 2 * self.vertices.len() as i64 + 2;
        let lo = seq.start - pad;
        let mut s: StateSet = self.states_at(lo).intersection(&self.zero_core(true)).copied().collect();
        for i in lo..seq.end() + pad {
            s = self.step(&s, Some(seq.get(i)));
            if s.is_empty() {
                return false;
            }
        }
        s.intersection(&self.zero_core(false)).next().is_some()
    }
}

/// True iff `word` labels some path of `graph`.
pub fn admissible(graph: &VertexGraph, word: &[u8]) -> bool {
    let mut s = graph.all();
    for &c in word {
        s = graph.step(&s, Some(c));
        if s.is_empty() {
            return false;
        }
    }
    true
}

/// Placement of `word` with zero tails near the origin that is admissible,
/// trying starts `-(len/2)`, then neighbours.
pub fn place_word(graph: &VertexGraph, word: &[u8]) -> Option<SymbolSequence> {
    let base = -(word.len() as i64 / 2);
    for d in [0, -1, 1, -2, 2] {
        let s = SymbolSequence::with_zero_tails(word, base + d);
        if graph.admissible_sequence(&s) {
            return Some(s);
        }
    }
    None
}

/// `ln` of the spectral radius of `A^p`, by power iteration on `A^p + I`.
pub fn graph_entropy(graph: &VertexGraph, p: u32) -> Result<f64, ShiftError> {
    let a = graph.adjacency();
    let n = a.len();
    let mut m = identity(n);
    for _ in 0..p {
        m = matmul(&m, &a);
    }
    for (i, row) in m.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let mut v = vec![1.0; n];
    for _ in 0..100_000 {
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m[i][j] * v[j]).sum()).collect();
        // Collatz-Wielandt bounds on the Perron root.
        let ratios: Vec<f64> = (0..n).filter(|&i| v[i] > 0.0).map(|i| w[i] / v[i]).collect();
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let norm = w.iter().copied().fold(0.0, f64::max);
        v = w.iter().map(|x| x / norm).collect();
        if hi - lo <= 1e-13 * hi {
            return Ok((0.5 * (lo + hi) - 1.0).ln());
        }
    }
    Err(ShiftError::NoConvergence)
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

/// Admissible sequences with `x_j = 0` for every `|j| >= n`.
pub fn homoclinic_words(graph: &VertexGraph, n: u32) -> Vec<SymbolSequence> {
    if n == 0 {
        return vec![SymbolSequence::with_zero_tails(&[], 0)];
    }
    let len = 2 * n as usize - 1;
    let start = -(n as i64 - 1);
    (0..1u64 << len)
        .map(|bits| (0..len).map(|i| ((bits >> (len - 1 - i)) & 1) as u8).collect::<Vec<u8>>())
        .map(|core| SymbolSequence::with_zero_tails(&core, start))
        .filter(|s| graph.admissible_sequence(s))
        .collect()
}

/// Parses a `0/1` string.
pub fn parse_word(s: &str) -> Result<Vec<u8>, ShiftError> {
    s.bytes()
        .map(|b| match b {
            b'0' => Ok(0),
            b'1' => Ok(1),
            other => Err(ShiftError::BadSymbol(other)),
        })
        .collect()
}

pub fn word_string(w: &[u8]) -> String {
    w.iter().map(|s| char::from(b'0' + s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tails_and_shift() {
        let x = SymbolSequence::with_zero_tails(&[1, 1, 0], 0);
        assert_eq!(x.window(-2, 4), vec![0, 0, 1, 1, 0, 0, 0]);
        let y = shift(&x, 2);
        assert_eq!(y.get(-2), 1);
        assert_eq!(shift(&y, -2), x);
        let per = SymbolSequence { left: vec![0, 1], core: vec![], right: vec![1], start: 0 };
        assert_eq!(per.window(-4, 1), vec![0, 1, 0, 1, 1, 1]);
    }

    #[test]
    fn metric_examples() {
        let z = SymbolSequence::constant(0);
        assert_eq!(metric(&z, &z), 0.0);
        assert_eq!(metric(&z, &SymbolSequence::with_zero_tails(&[1], 0)), 1.0);
        assert_eq!(metric(&z, &SymbolSequence::with_zero_tails(&[1], -3)), 0.125);
    }

    #[test]
    fn golden_mean_words() {
        let g = VertexGraph::golden_mean();
        assert!(admissible(&g, &[0, 0, 0]));
        assert!(!admissible(&g, &[1, 1]));
        assert!(admissible(&VertexGraph::full_shift(), &[1, 1, 0, 1]));
    }

    #[test]
    fn parity_blocks_of_ones_are_odd() {
        let g = VertexGraph::parity();
        assert!(place_word(&g, &[1, 1]).is_none());
        assert!(place_word(&g, &[1, 1, 1]).is_some());
        assert!(place_word(&g, &[1, 0, 0, 1]).is_none());
        assert!(place_word(&g, &[1, 0, 1]).is_some());
    }
}
