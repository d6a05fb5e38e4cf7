//! Finite cone of a homogeneous tree of order `q + 1`.
//!
//! The truncation keeps one apex vertex and the `depth` generations below
//! it. Vertices are addressed by words over `{0, …, q-1}` (the empty word is
//! the apex) and stored densely in breadth-first order, so the descendants
//! of a vertex at a fixed relative depth occupy one contiguous index range.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Number of children of every vertex above the bottom level.
    pub q: u32,
    /// Number of generations below the apex.
    pub depth: u32,
    /// Level `ℓ` of the apex; the bottom level is `apex_level - depth`.
    pub apex_level: i64,
}

impl TreeConfig {
    /// Cone with the bottom level normalized to `ℓ = 0`.
    pub fn new(q: u32, depth: u32) -> Self {
        TreeConfig {
            q,
            depth,
            apex_level: depth as i64,
        }
    }

    pub fn with_apex_level(mut self, apex_level: i64) -> Self {
        self.apex_level = apex_level;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.q < 2 {
            return Err(Error::InvalidConfig(format!("q = {} (need q >= 2)", self.q)));
        }
        if self.depth < 1 {
            return Err(Error::InvalidConfig("depth must be at least 1".into()));
        }
        let n = (self.q as f64).powi(self.depth as i32 + 1);
        if n > 5e7 {
            return Err(Error::InvalidConfig(format!(
                "q = {}, depth = {} gives too many vertices",
                self.q, self.depth
            )));
        }
        Ok(())
    }

    /// `(q^{D+1} - 1)/(q - 1)`.
    pub fn vertex_count(&self) -> usize {
        let q = self.q as usize;
        (q.pow(self.depth + 1) - 1) / (q - 1)
    }
}

/// Dense breadth-first index of a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId(pub u32);

impl VertexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Digit string locating a vertex below the apex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(pub Vec<u32>);

impl Word {
    pub fn apex() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl fmt::Display for Word {
    /// Digits are written without separators when `q ≤ 10`, otherwise dot separated.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        let wide = self.0.iter().any(|&d| d > 9);
        for (i, d) in self.0.iter().enumerate() {
            if wide && i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "ε" || s == "-" {
            return Ok(Word::apex());
        }
        let parse = |t: &str| {
            t.parse::<u32>()
                .map_err(|_| Error::InvalidParameter(format!("bad word {s:?}")))
        };
        let digits = if s.contains('.') {
            s.split('.').map(parse).collect::<Result<Vec<_>>>()?
        } else {
            s.chars()
                .map(|c| {
                    c.to_digit(10)
                        .ok_or_else(|| Error::InvalidParameter(format!("bad word {s:?}")))
                })
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Word(digits))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    config: TreeConfig,
    /// `level_start[d]` is the index of the first vertex at depth `d`; one extra
    /// entry holds the vertex count.
    level_start: Vec<usize>,
    depth_of: Vec<u8>,
}

impl Tree {
    pub fn new(config: TreeConfig) -> Result<Self> {
        config.validate()?;
        let q = config.q as usize;
        let mut level_start = Vec::with_capacity(config.depth as usize + 2);
        let mut start = 0usize;
        let mut width = 1usize;
        for _ in 0..=config.depth {
            level_start.push(start);
            start += width;
            width *= q;
        }
        level_start.push(start);
        let mut depth_of = vec![0u8; start];
        for d in 0..=config.depth as usize {
            depth_of[level_start[d]..level_start[d + 1]].fill(d as u8);
        }
        Ok(Tree {
            config,
            level_start,
            depth_of,
        })
    }

    pub fn config(&self) -> &TreeConfig {
        &self.config
    }

    pub fn q(&self) -> u32 {
        self.config.q
    }

    pub fn max_depth(&self) -> u32 {
        self.config.depth
    }

    pub fn len(&self) -> usize {
        self.depth_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth_of.is_empty()
    }

    pub fn apex(&self) -> VertexId {
        VertexId(0)
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.len() as u32).map(VertexId)
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v.index() < self.len()
    }

    pub fn check(&self, v: VertexId) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange(format!("#{}", v.0)))
        }
    }

    /// Distance from the apex (length of the word).
    pub fn depth(&self, v: VertexId) -> u32 {
        self.depth_of[v.index()] as u32
    }

    /// Level function `ℓ(v) = apex_level − depth(v)`.
    pub fn level(&self, v: VertexId) -> i64 {
        self.config.apex_level - self.depth(v) as i64
    }

    /// Generations available below `v` inside the truncation.
    pub fn room(&self, v: VertexId) -> u32 {
        self.config.depth - self.depth(v)
    }

    /// Position of `v` among the vertices at its depth.
    pub fn rank(&self, v: VertexId) -> usize {
        v.index() - self.level_start[self.depth(v) as usize]
    }

    pub fn level_range(&self, depth: u32) -> Range<usize> {
        self.level_start[depth as usize]..self.level_start[depth as usize + 1]
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        let d = self.depth(v);
        if d == 0 {
            return None;
        }
        let r = self.rank(v) / self.config.q as usize;
        Some(VertexId((self.level_start[d as usize - 1] + r) as u32))
    }

    /// Ancestor `k` steps above `v`, if it lies in the truncation.
    pub fn ancestor(&self, v: VertexId, k: u32) -> Option<VertexId> {
        let d = self.depth(v);
        if k > d {
            return None;
        }
        let r = self.rank(v) / (self.config.q as usize).pow(k);
        Some(VertexId((self.level_start[(d - k) as usize] + r) as u32))
    }

    pub fn children(&self, v: VertexId) -> impl Iterator<Item = VertexId> {
        self.descendant_range(v, 1)
            .unwrap_or(0..0)
            .map(|i| VertexId(i as u32))
    }

    /// Indices of the descendants of `v` exactly `delta` generations below it.
    pub fn descendant_range(&self, v: VertexId, delta: u32) -> Option<Range<usize>> {
        let d = self.depth(v) + delta;
        if d > self.config.depth {
            return None;
        }
        let span = (self.config.q as usize).pow(delta);
        let start = self.level_start[d as usize] + self.rank(v) * span;
        Some(start..start + span)
    }

    /// Parent (if any) followed by the children (if any).
    pub fn neighbors(&self, v: VertexId) -> Result<Vec<VertexId>> {
        self.check(v)?;
        Ok(self.parent(v).into_iter().chain(self.children(v)).collect())
    }

    /// Graph distance via the deepest common ancestor.
    pub fn distance(&self, x: VertexId, y: VertexId) -> Result<u32> {
        self.check(x)?;
        self.check(y)?;
        let (dx, dy) = (self.depth(x), self.depth(y));
        let mut common = dx.min(dy);
        let mut a = self.ancestor(x, dx - common).expect("depth");
        let mut b = self.ancestor(y, dy - common).expect("depth");
        while a != b {
            a = self.parent(a).expect("common apex");
            b = self.parent(b).expect("common apex");
            common -= 1;
        }
        Ok((dx - common) + (dy - common))
    }

    /// `true` iff `y` lies above `x`, i.e. `ℓ(x) = ℓ(y) − d(x, y)`.
    pub fn lies_below(&self, x: VertexId, y: VertexId) -> Result<bool> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.is_ancestor_or_self(y, x))
    }

    /// `true` iff `a` is `v` or an ancestor of `v`.
    pub fn is_ancestor_or_self(&self, a: VertexId, v: VertexId) -> bool {
        let (da, dv) = (self.depth(a), self.depth(v));
        da <= dv && self.ancestor(v, dv - da) == Some(a)
    }

    pub fn word(&self, v: VertexId) -> Word {
        let q = self.config.q as usize;
        let mut r = self.rank(v);
        let mut digits = vec![0u32; self.depth(v) as usize];
        for slot in digits.iter_mut().rev() {
            *slot = (r % q) as u32;
            r /= q;
        }
        Word(digits)
    }

    pub fn vertex(&self, word: &Word) -> Result<VertexId> {
        let d = word.len();
        if d > self.config.depth as usize || word.0.iter().any(|&c| c >= self.config.q) {
            return Err(Error::VertexOutOfRange(word.to_string()));
        }
        let q = self.config.q as usize;
        let rank = word.0.iter().fold(0usize, |acc, &c| acc * q + c as usize);
        Ok(VertexId((self.level_start[d] + rank) as u32))
    }

    pub fn label(&self, v: VertexId) -> String {
        if self.contains(v) {
            self.word(v).to_string()
        } else {
            format!("#{}", v.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    fn tree(q: u32, depth: u32) -> Tree {
        Tree::new(TreeConfig::new(q, depth)).unwrap()
    }

    fn v(t: &Tree, w: &str) -> VertexId {
        t.vertex(&w.parse().unwrap()).unwrap()
    }

    fn bfs(t: &Tree, s: VertexId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; t.len()];
        dist[s.index()] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for y in t.neighbors(x).unwrap() {
                if dist[y.index()] == u32::MAX {
                    dist[y.index()] = dist[x.index()] + 1;
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    #[test]
    fn config_validation() {
        assert!(Tree::new(TreeConfig::new(1, 3)).is_err());
        assert!(Tree::new(TreeConfig::new(2, 0)).is_err());
        for (q, d) in [(2, 1), (2, 6), (3, 4), (5, 3)] {
            let t = tree(q, d);
            let expected = ((q as usize).pow(d + 1) - 1) / (q as usize - 1);
            assert_eq!(t.len(), expected);
            assert_eq!(t.config().vertex_count(), expected);
        }
    }

    #[test]
    fn neighbor_counts() {
        let t = tree(3, 3);
        assert_eq!(t.neighbors(t.apex()).unwrap().len(), 3);
        let interior = v(&t, "12");
        let nb = t.neighbors(interior).unwrap();
        assert_eq!(nb.len(), 4);
        assert_eq!(nb.iter().filter(|&&y| t.level(y) == t.level(interior) + 1).count(), 1);
        assert_eq!(nb.iter().filter(|&&y| t.level(y) == t.level(interior) - 1).count(), 3);

        let t2 = tree(2, 3);
        assert_eq!(t2.neighbors(v(&t2, "010")).unwrap(), vec![v(&t2, "01")]);
        assert!(t2.neighbors(VertexId(999)).is_err());
    }

    #[test]
    fn distance_examples() {
        let t = tree(3, 3);
        let x = v(&t, "00");
        assert_eq!(t.distance(x, x).unwrap(), 0);
        assert_eq!(t.distance(v(&t, "0"), v(&t, "1")).unwrap(), 2);
        assert_eq!(t.distance(v(&t, "00"), v(&t, "1")).unwrap(), 3);
        assert_eq!(bfs(&t, v(&t, "00"))[v(&t, "1").index()], 3);
    }

    #[test]
    fn lies_below_examples() {
        let t = tree(3, 3);
        let x = v(&t, "01");
        assert!(t.lies_below(x, x).unwrap());
        assert!(t.lies_below(x, v(&t, "0")).unwrap());
        assert!(!t.lies_below(v(&t, "0"), v(&t, "1")).unwrap());
        assert!(!t.lies_below(v(&t, "0"), x).unwrap());
    }

    #[test]
    fn word_roundtrip_and_bfs_order() {
        let t = tree(3, 4);
        for x in t.vertices() {
            assert_eq!(t.vertex(&t.word(x)).unwrap(), x);
            if let Some(p) = t.parent(x) {
                assert_eq!(t.level(p), t.level(x) + 1);
                assert!(t.word(p).is_prefix_of(&t.word(x)));
                assert!(p < x);
            }
        }
        assert!(t.vertex(&"3".parse().unwrap()).is_err());
        assert!(t.vertex(&"00000".parse().unwrap()).is_err());
        assert_eq!(t.level(t.apex()), 4);
        assert_eq!("1.12.3".parse::<Word>().unwrap().0, vec![1, 12, 3]);
    }

    #[test]
    fn exhaustive_metric_and_level_identity() {
        for q in [2, 3] {
            for depth in 1..=if q == 2 { 6 } else { 4 } {
                let t = tree(q, depth);
                let rows: Vec<Vec<u32>> = t.vertices().map(|s| bfs(&t, s)).collect();
                for x in t.vertices() {
                    for y in t.vertices() {
                        let d = t.distance(x, y).unwrap();
                        assert_eq!(d, rows[x.index()][y.index()]);
                        assert_eq!(d, t.distance(y, x).unwrap());
                        let below = t.lies_below(x, y).unwrap();
                        assert_eq!(below, t.level(x) == t.level(y) - d as i64);
                        assert_eq!(below, t.word(y).is_prefix_of(&t.word(x)));
                    }
                }
                if t.len() <= 200 {
                    for x in t.vertices() {
                        for y in t.vertices() {
                            for z in t.vertices() {
                                assert!(
                                    rows[x.index()][z.index()]
                                        <= rows[x.index()][y.index()] + rows[y.index()][z.index()]
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn descendant_ranges_are_contiguous() {
        let t = tree(2, 5);
        let x = v(&t, "10");
        let r = t.descendant_range(x, 2).unwrap();
        let words: Vec<String> = r.map(|i| t.word(VertexId(i as u32)).to_string()).collect();
        assert_eq!(words, ["1000", "1001", "1010", "1011"]);
        assert!(t.descendant_range(x, 4).is_none());
    }
}
