//! Admissible trapezoids, Calderón–Zygmund sets and their dilates.
//!
//! All three families consist of the descendants of a root vertex whose
//! relative depth `δ = ℓ(root) − ℓ(x)` lies in a half-open band, so they are
//! represented by a [`Band`]. Sets are geometric objects of the infinite tree:
//! their measure does not depend on the truncation, and the strict
//! enumeration methods fail with [`Error::Containment`] when part of the set
//! lies below the bottom level.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{q_pow, WeightedMeasure};
use crate::tree::{Tree, VertexId};

/// Descendants of `root` at relative depths `lo..hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Band {
    pub root: VertexId,
    pub lo: u32,
    pub hi: u32,
}

impl Band {
    pub fn new(root: VertexId, lo: u32, hi: u32) -> Self {
        debug_assert!(lo < hi);
        Band { root, lo, hi }
    }

    pub fn levels(&self) -> u32 {
        self.hi - self.lo
    }

    /// Whether every vertex of the band lies inside the truncation.
    pub fn fits(&self, tree: &Tree) -> bool {
        tree.contains(self.root) && self.hi - 1 <= tree.room(self.root)
    }

    fn require_fit(&self, tree: &Tree) -> Result<()> {
        tree.check(self.root)?;
        if self.fits(tree) {
            Ok(())
        } else {
            Err(Error::Containment {
                root: tree.label(self.root),
                lo: self.lo,
                hi: self.hi,
            })
        }
    }

    /// Relative depths that exist inside the truncation.
    pub fn clipped_levels(&self, tree: &Tree) -> std::ops::Range<u32> {
        let room = tree.room(self.root);
        self.lo.min(room + 1)..self.hi.min(room + 1)
    }

    /// `μ` on the infinite tree: each level of the band carries `q^{ℓ(root)}`.
    pub fn measure(&self, m: &WeightedMeasure) -> BigRational {
        m.weight(self.root) * BigRational::from_integer(BigInt::from(self.levels()))
    }

    /// Measure of the part inside the truncation.
    pub fn clipped_measure(&self, m: &WeightedMeasure) -> BigRational {
        let r = self.clipped_levels(m.tree());
        m.weight(self.root) * BigRational::from_integer(BigInt::from(r.end - r.start))
    }

    pub fn contains(&self, tree: &Tree, v: VertexId) -> bool {
        let (dr, dv) = (tree.depth(self.root), tree.depth(v));
        dv >= dr + self.lo && dv < dr + self.hi && tree.is_ancestor_or_self(self.root, v)
    }

    /// Vertices in breadth-first order; errors if the band leaves the truncation.
    pub fn vertices(&self, tree: &Tree) -> Result<Vec<VertexId>> {
        self.require_fit(tree)?;
        Ok(self.vertices_clipped(tree))
    }

    /// Vertices of the band that lie inside the truncation.
    pub fn vertices_clipped(&self, tree: &Tree) -> Vec<VertexId> {
        self.clipped_levels(tree)
            .flat_map(|d| tree.descendant_range(self.root, d).expect("clipped"))
            .map(|i| VertexId(i as u32))
            .collect()
    }

    /// Absolute depth interval occupied inside the truncation.
    fn abs_span(&self, tree: &Tree) -> (u32, u32) {
        let r = self.clipped_levels(tree);
        let d = tree.depth(self.root);
        (d + r.start, d + r.end)
    }

    /// Whether the two bands share a vertex of the truncation.
    pub fn intersects(&self, other: &Band, tree: &Tree) -> bool {
        let related = tree.is_ancestor_or_self(self.root, other.root)
            || tree.is_ancestor_or_self(other.root, self.root);
        if !related {
            return false;
        }
        let (a0, a1) = self.abs_span(tree);
        let (b0, b1) = other.abs_span(tree);
        a0.max(b0) < a1.min(b1)
    }

    /// Whether every vertex of `self` inside the truncation belongs to `other`.
    pub fn is_subset_of(&self, other: &Band, tree: &Tree) -> bool {
        let (a0, a1) = self.abs_span(tree);
        if a0 >= a1 {
            return true;
        }
        if !tree.is_ancestor_or_self(other.root, self.root) {
            return false;
        }
        let d = tree.depth(other.root);
        a0 >= d + other.lo && a1 <= d + other.hi
    }
}

/// Admissible trapezoid: `{x below x_R : h ≤ δ < 2h}` or the single vertex `{x_R}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trapezoid {
    pub root: VertexId,
    pub h: u32,
    pub degenerate: bool,
}

impl Trapezoid {
    pub fn new(root: VertexId, h: u32) -> Result<Self> {
        if h == 0 {
            return Err(Error::InvalidParameter("trapezoid height must be >= 1".into()));
        }
        Ok(Trapezoid {
            root,
            h,
            degenerate: false,
        })
    }

    pub fn single(root: VertexId) -> Self {
        Trapezoid {
            root,
            h: 1,
            degenerate: true,
        }
    }

    pub fn band(&self) -> Band {
        if self.degenerate {
            Band::new(self.root, 0, 1)
        } else {
            Band::new(self.root, self.h, 2 * self.h)
        }
    }

    /// `w(R) = q^{ℓ(x_R)}`.
    pub fn width(&self, m: &WeightedMeasure) -> BigRational {
        m.weight(self.root).clone()
    }

    /// `μ(R) = h(R) w(R)`.
    pub fn measure(&self, m: &WeightedMeasure) -> BigRational {
        self.band().measure(m)
    }

    pub fn fits(&self, tree: &Tree) -> bool {
        self.band().fits(tree)
    }

    pub fn contains(&self, tree: &Tree, v: VertexId) -> bool {
        self.band().contains(tree, v)
    }

    pub fn vertices(&self, tree: &Tree) -> Result<Vec<VertexId>> {
        self.band().vertices(tree)
    }

    pub fn envelope(&self) -> CzSet {
        CzSet {
            root: self.root,
            h: self.h,
            degenerate: self.degenerate,
        }
    }

    /// Position in the fixed enumeration: root index, the single vertex first, then `h`.
    pub fn ordering_key(&self) -> (VertexId, u8, u32) {
        (self.root, u8::from(!self.degenerate), self.h)
    }

    /// Every admissible trapezoid contained in the truncation, in canonical order.
    ///
    /// Breadth-first roots come in order of decreasing width, so this is also
    /// the "largest width, earliest in the ordering" order of the covering.
    pub fn all_in(tree: &Tree) -> Vec<Trapezoid> {
        let mut out = Vec::new();
        for root in tree.vertices() {
            out.push(Trapezoid::single(root));
            let room = tree.room(root);
            for h in 1..=(room + 1) / 2 {
                out.push(Trapezoid {
                    root,
                    h,
                    degenerate: false,
                });
            }
        }
        out
    }

    /// Admissible trapezoids containing `x` (and inside the truncation).
    pub fn containing(tree: &Tree, x: VertexId) -> Vec<Trapezoid> {
        let mut out = vec![Trapezoid::single(x)];
        for delta in 1..=tree.depth(x) {
            let root = tree.ancestor(x, delta).expect("depth");
            for h in delta / 2 + 1..=delta {
                let t = Trapezoid {
                    root,
                    h,
                    degenerate: false,
                };
                if t.fits(tree) {
                    out.push(t);
                }
            }
        }
        out
    }
}

impl PartialOrd for Trapezoid {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Trapezoid {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ordering_key().cmp(&other.ordering_key())
    }
}

/// Envelope `R̃ = {x below x_R : h/2 ≤ δ < 4h}` of an admissible trapezoid.
///
/// The lower bound is read over the integers as `δ ≥ ⌈h/2⌉`; since the root
/// itself is never part of a non-degenerate envelope this is `δ ≥ 1` for `h = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CzSet {
    pub root: VertexId,
    pub h: u32,
    pub degenerate: bool,
}

impl CzSet {
    pub fn new(root: VertexId, h: u32) -> Result<Self> {
        Ok(Trapezoid::new(root, h)?.envelope())
    }

    pub fn single(root: VertexId) -> Self {
        Trapezoid::single(root).envelope()
    }

    pub fn band(&self) -> Band {
        if self.degenerate {
            Band::new(self.root, 0, 1)
        } else {
            Band::new(self.root, self.h.div_ceil(2).max(1), 4 * self.h)
        }
    }

    /// The admissible trapezoid this set is the envelope of.
    pub fn trapezoid(&self) -> Trapezoid {
        Trapezoid {
            root: self.root,
            h: self.h,
            degenerate: self.degenerate,
        }
    }

    pub fn measure(&self, m: &WeightedMeasure) -> BigRational {
        self.band().measure(m)
    }

    pub fn fits(&self, tree: &Tree) -> bool {
        self.band().fits(tree)
    }

    pub fn contains(&self, tree: &Tree, v: VertexId) -> bool {
        self.band().contains(tree, v)
    }

    pub fn vertices(&self, tree: &Tree) -> Result<Vec<VertexId>> {
        self.band().vertices(tree)
    }

    pub fn vertices_clipped(&self, tree: &Tree) -> Vec<VertexId> {
        self.band().vertices_clipped(tree)
    }

    pub fn dilate(&self) -> DilatedCzSet {
        DilatedCzSet { base: *self }
    }

    /// Every Calderón–Zygmund set contained in the truncation.
    pub fn all_in(tree: &Tree) -> Vec<CzSet> {
        let mut out = Vec::new();
        for root in tree.vertices() {
            out.push(CzSet::single(root));
            let room = tree.room(root);
            for h in 1..=(room + 1) / 4 {
                out.push(CzSet {
                    root,
                    h,
                    degenerate: false,
                });
            }
        }
        out
    }

    pub fn record(&self, tree: &Tree) -> CzSetRecord {
        CzSetRecord {
            root_word: tree.label(self.root),
            h: self.h,
            degenerate: self.degenerate,
        }
    }
}

/// Serialized form `{root_word, h}` of a set rooted at a vertex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CzSetRecord {
    pub root_word: String,
    pub h: u32,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
}

impl CzSetRecord {
    pub fn from_trapezoid(t: &Trapezoid, tree: &Tree) -> Self {
        t.envelope().record(tree)
    }

    pub fn resolve(&self, tree: &Tree) -> Result<CzSet> {
        let root = tree.vertex(&self.root_word.parse()?)?;
        if self.degenerate {
            Ok(CzSet::single(root))
        } else {
            CzSet::new(root, self.h)
        }
    }
}

/// `R̃* = {x : d(x, R̃) < h/4}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DilatedCzSet {
    pub base: CzSet,
}

impl DilatedCzSet {
    /// Vertices off the descendant cone of the root are at distance `> h/2`
    /// from `R̃`, so the dilate widens the band by `⌊(h−1)/4⌋` levels each way.
    pub fn band(&self) -> Band {
        let b = self.base.band();
        if self.base.degenerate {
            return b;
        }
        let k = (self.base.h - 1) / 4;
        Band::new(b.root, b.lo - k.min(b.lo), b.hi + k)
    }

    pub fn measure(&self, m: &WeightedMeasure) -> BigRational {
        self.band().measure(m)
    }

    pub fn fits(&self, tree: &Tree) -> bool {
        self.band().fits(tree)
    }

    pub fn contains(&self, tree: &Tree, v: VertexId) -> bool {
        self.band().contains(tree, v)
    }

    pub fn vertices(&self, tree: &Tree) -> Result<Vec<VertexId>> {
        self.band().vertices(tree)
    }

    /// `μ(R̃*)/μ(R̃)`.
    pub fn measure_ratio(&self, m: &WeightedMeasure) -> BigRational {
        self.measure(m) / self.base.measure(m)
    }
}

/// Exact check of `μ(R̃) ≤ 4μ(R)` on the enumerated vertex sets.
pub fn envelope_measure_bound_check(r: &Trapezoid, m: &WeightedMeasure) -> Result<bool> {
    let tree = m.tree();
    let mu_r = m.mu_set(r.vertices(tree)?)?;
    let mu_env = m.mu_set(r.envelope().vertices(tree)?)?;
    Ok(mu_env <= mu_r * BigRational::from_integer(BigInt::from(4)))
}

/// If `R₁ ∩ R₂ ≠ ∅` and `w(R₁) ≥ w(R₂)` then `R₂ ⊂ R̃₁`; returns whether the implication holds.
pub fn inclusion_lemma_check(r1: &Trapezoid, r2: &Trapezoid, tree: &Tree) -> Result<bool> {
    for r in [r1, r2] {
        if !r.fits(tree) {
            let b = r.band();
            return Err(Error::Containment {
                root: tree.label(b.root),
                lo: b.lo,
                hi: b.hi,
            });
        }
    }
    // widths compare through levels
    let wider = tree.depth(r1.root) <= tree.depth(r2.root);
    if !wider || !r1.band().intersects(&r2.band(), tree) {
        return Ok(true);
    }
    let env = r1.envelope();
    Ok(r2.vertices(tree)?.iter().all(|&v| env.contains(tree, v)))
}

/// Largest pairwise distance inside a set (0 for singletons).
///
/// Tree metrics admit the double sweep: the point farthest from any start is
/// an endpoint of a diameter.
pub fn diameter(tree: &Tree, set: &[VertexId]) -> u32 {
    let farthest = |from: VertexId| {
        set.iter()
            .map(|&y| (tree.distance(from, y).expect("in tree"), y))
            .max_by_key(|&(d, y)| (d, std::cmp::Reverse(y)))
    };
    let Some(&start) = set.first() else {
        return 0;
    };
    let (_, end) = farthest(start).expect("nonempty");
    farthest(end).expect("nonempty").0
}

/// Every pair of points of `R̃` is at distance at most `8h − 2`.
pub fn ball_inclusion_check(set: &CzSet, tree: &Tree) -> Result<bool> {
    let v = set.vertices(tree)?;
    Ok(diameter(tree, &v) as i64 <= 8 * set.h as i64 - 2)
}

/// Largest `μ(R̃*)/μ(R̃)` over all sets whose dilate fits the truncation.
pub fn empirical_dilate_constant(m: &WeightedMeasure) -> Option<(CzSet, BigRational)> {
    CzSet::all_in(m.tree())
        .into_iter()
        .filter(|s| s.dilate().fits(m.tree()))
        .map(|s| (s, s.dilate().measure_ratio(m)))
        .max_by(|a, b| a.1.cmp(&b.1))
}

/// Width `q^{ℓ}` of a root at the given level, handy for closed-form checks.
pub fn width_at_level(q: u32, level: i64) -> BigRational {
    q_pow(q, level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{Exact, Scalar};
    use crate::tree::TreeConfig;
    use std::collections::{HashSet, VecDeque};

    fn measure(q: u32, depth: u32) -> WeightedMeasure {
        WeightedMeasure::new(Tree::new(TreeConfig::new(q, depth)).unwrap())
    }

    fn int(n: i64) -> Exact {
        <Exact as Scalar>::from_i64(n)
    }

    /// Brute-force membership straight from the defining inequalities.
    fn brute_band(tree: &Tree, root: VertexId, keep: impl Fn(i64) -> bool) -> Vec<VertexId> {
        tree.vertices()
            .filter(|&x| {
                tree.lies_below(x, root).unwrap() && keep(tree.level(root) - tree.level(x))
            })
            .collect()
    }

    fn multi_bfs(tree: &Tree, sources: &[VertexId]) -> Vec<u32> {
        let mut dist = vec![u32::MAX; tree.len()];
        let mut queue = VecDeque::new();
        for &s in sources {
            dist[s.index()] = 0;
            queue.push_back(s);
        }
        while let Some(x) = queue.pop_front() {
            for y in tree.neighbors(x).unwrap() {
                if dist[y.index()] == u32::MAX {
                    dist[y.index()] = dist[x.index()] + 1;
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    #[test]
    fn enumerate_examples() {
        let m = measure(3, 8);
        let t = m.tree();
        let root = t.vertex(&"0".parse().unwrap()).unwrap();
        let w = m.weight(root).clone();

        let single = Trapezoid::single(root);
        assert_eq!(single.vertices(t).unwrap(), vec![root]);
        assert_eq!(m.mu_set(single.vertices(t).unwrap()).unwrap(), w);

        let r2 = Trapezoid::new(root, 2).unwrap();
        let verts = r2.vertices(t).unwrap();
        assert!(verts.iter().all(|&x| [2, 3].contains(&(t.level(root) - t.level(x)))));
        assert_eq!(m.mu_set(verts).unwrap(), int(2) * &w);
        assert_eq!(r2.measure(&m), int(2) * &w);

        let env = r2.envelope();
        let levels: HashSet<i64> = env
            .vertices_clipped(t)
            .iter()
            .map(|&x| t.level(root) - t.level(x))
            .collect();
        assert_eq!(levels, (1..=7).collect());
        assert_eq!(env.measure(&m), int(7) * &w);
        assert!(env.measure(&m) <= int(4) * r2.measure(&m));
    }

    #[test]
    fn envelope_examples() {
        let m = measure(2, 16);
        let t = m.tree();
        let root = t.apex();
        let w = m.weight(root).clone();
        assert_eq!(CzSet::single(root).measure(&m), w);
        let e1 = Trapezoid::new(root, 1).unwrap().envelope();
        assert_eq!(e1.band(), Band::new(root, 1, 4));
        assert_eq!(e1.measure(&m), int(3) * &w);
        let e4 = Trapezoid::new(root, 4).unwrap().envelope();
        assert_eq!(e4.band(), Band::new(root, 2, 16));
        assert_eq!(e4.measure(&m), int(14) * &w);
        for r in [Trapezoid::single(root), Trapezoid::new(root, 1).unwrap(), Trapezoid::new(root, 4).unwrap()] {
            assert!(envelope_measure_bound_check(&r, &m).unwrap());
        }
    }

    #[test]
    fn containment_errors() {
        let m = measure(2, 4);
        let t = m.tree();
        let deep = t.vertex(&"000".parse().unwrap()).unwrap();
        let r = Trapezoid::new(deep, 1).unwrap();
        assert!(r.vertices(t).is_ok());
        assert!(matches!(
            r.envelope().vertices(t),
            Err(Error::Containment { .. })
        ));
        assert_eq!(r.envelope().vertices_clipped(t).len(), 2);
        assert!(envelope_measure_bound_check(&r, &m).is_err());
    }

    #[test]
    fn sets_match_brute_force_definitions() {
        let m = measure(2, 7);
        let t = m.tree();
        for root in t.vertices() {
            for h in 1..=4u32 {
                let r = Trapezoid::new(root, h).unwrap();
                let hh = h as i64;
                if r.fits(t) {
                    let brute = brute_band(t, root, |d| hh <= d && d < 2 * hh);
                    assert_eq!(r.vertices(t).unwrap(), brute);
                }
                let env = r.envelope();
                if env.fits(t) {
                    let brute = brute_band(t, root, |d| 2 * d >= hh && d >= 1 && d < 4 * hh);
                    assert_eq!(env.vertices(t).unwrap(), brute);
                    let dil = env.dilate();
                    if dil.fits(t) {
                        let dist = multi_bfs(t, &env.vertices(t).unwrap());
                        let brute: Vec<VertexId> = t
                            .vertices()
                            .filter(|x| (4 * dist[x.index()] as i64) < hh)
                            .collect();
                        assert_eq!(dil.vertices(t).unwrap(), brute);
                    }
                }
            }
        }
    }

    #[test]
    fn exhaustive_small_geometry() {
        let m = measure(2, 6);
        let t = m.tree();
        let traps = Trapezoid::all_in(t);
        for r in &traps {
            let v = r.vertices(t).unwrap();
            assert_eq!(m.mu_set(v.clone()).unwrap(), r.measure(&m));
            assert_eq!(r.measure(&m), int(r.h as i64) * r.width(&m));
            if r.envelope().fits(t) {
                assert!(envelope_measure_bound_check(r, &m).unwrap());
                assert!(ball_inclusion_check(&r.envelope(), t).unwrap());
                let env = r.envelope();
                assert!(v.iter().all(|&x| env.contains(t, x)));
                assert!(v.iter().all(|&x| env.dilate().contains(t, x)));
            }
        }
        for r1 in &traps {
            for r2 in &traps {
                assert!(inclusion_lemma_check(r1, r2, t).unwrap());
                let brute = r1
                    .vertices(t)
                    .unwrap()
                    .iter()
                    .any(|x| r2.vertices(t).unwrap().contains(x));
                assert_eq!(r1.band().intersects(&r2.band(), t), brute);
            }
        }
    }

    #[test]
    fn containing_lists_every_trapezoid_through_a_vertex() {
        let t = Tree::new(TreeConfig::new(3, 5)).unwrap();
        let all = Trapezoid::all_in(&t);
        for x in t.vertices() {
            let mut a = Trapezoid::containing(&t, x);
            a.sort();
            let b: Vec<_> = all.iter().copied().filter(|r| r.contains(&t, x)).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn dilate_examples() {
        let m = measure(2, 3);
        let root = m.tree().apex();
        for h in 1..=4 {
            let s = CzSet::new(root, h).unwrap();
            assert_eq!(s.dilate().band(), s.band());
            assert_eq!(s.dilate().measure_ratio(&m), int(1));
        }
        let s8 = CzSet::new(root, 8).unwrap();
        // band 4..32 widens to 3..33
        assert_eq!(s8.dilate().band(), Band::new(root, 3, 33));
        assert_eq!(s8.dilate().measure_ratio(&m), <Exact as Scalar>::from_ratio(30, 28));
    }

    #[test]
    fn ordering_is_width_then_enumeration() {
        let t = Tree::new(TreeConfig::new(2, 5)).unwrap();
        let all = Trapezoid::all_in(&t);
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
        for pair in all.windows(2) {
            assert!(t.depth(pair[0].root) <= t.depth(pair[1].root));
        }
    }

    #[test]
    fn records_roundtrip() {
        let t = Tree::new(TreeConfig::new(3, 6)).unwrap();
        for s in CzSet::all_in(&t) {
            assert_eq!(s.record(&t).resolve(&t).unwrap(), s);
        }
    }
}
