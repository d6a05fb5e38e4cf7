//! The weighted counting measure `μ({x}) = q^{ℓ(x)}` and functions on the tree.

use std::ops::{Index, IndexMut};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{Exact, Exponent, Scalar};
use crate::tree::{Tree, VertexId};

/// `q^level` as an exact rational (negative levels give reciprocals).
pub fn q_pow(q: u32, level: i64) -> BigRational {
    let p = num_traits::pow(BigInt::from(q), level.unsigned_abs() as usize);
    if level >= 0 {
        BigRational::from_integer(p)
    } else {
        BigRational::new(BigInt::one(), p)
    }
}

/// Closed form `μ(S_r(x₀)) = q^{ℓ₀+r−1}(1+q)` for `r ≥ 1`, and `q^{ℓ₀}` for `r = 0`.
pub fn sphere_formula(q: u32, level: i64, r: u32) -> BigRational {
    if r == 0 {
        return q_pow(q, level);
    }
    q_pow(q, level + r as i64 - 1) * BigRational::from_integer(BigInt::from(1 + q))
}

/// Closed form `μ(B_r(x₀)) = q^{ℓ₀}(q^{r+1} + q^r − 2)/(q − 1)`.
pub fn ball_formula(q: u32, level: i64, r: u32) -> BigRational {
    let qi = BigInt::from(q);
    let num = num_traits::pow(qi.clone(), r as usize + 1) + num_traits::pow(qi.clone(), r as usize)
        - BigInt::from(2);
    q_pow(q, level) * BigRational::new(num, qi - BigInt::one())
}

/// Local doubling constant `C_R = (q^{2R+1}+q^{2R}−2)/(q^{R+1}+q^R−2)`.
pub fn local_doubling_constant(q: u32, big_r: u32) -> BigRational {
    ball_formula(q, 0, 2 * big_r) / ball_formula(q, 0, big_r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMeasure {
    tree: Tree,
    depth_weights: Vec<BigRational>,
    depth_weights_f64: Vec<f64>,
    total: BigRational,
}

impl WeightedMeasure {
    pub fn new(tree: Tree) -> Self {
        let q = tree.q();
        let depth_weights: Vec<BigRational> = (0..=tree.max_depth())
            .map(|d| q_pow(q, tree.config().apex_level - d as i64))
            .collect();
        let depth_weights_f64 = depth_weights.iter().map(Scalar::to_f64).collect();
        // every generation carries the apex weight
        let total = &depth_weights[0] * BigRational::from_integer(BigInt::from(tree.max_depth() + 1));
        WeightedMeasure {
            tree,
            depth_weights,
            depth_weights_f64,
            total,
        }
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn weight(&self, v: VertexId) -> &BigRational {
        &self.depth_weights[self.tree.depth(v) as usize]
    }

    pub fn weight_f64(&self, v: VertexId) -> f64 {
        self.depth_weights_f64[self.tree.depth(v) as usize]
    }

    /// Weight of a single vertex at the given depth below the apex.
    pub fn depth_weight(&self, depth: u32) -> &BigRational {
        &self.depth_weights[depth as usize]
    }

    /// Per-depth weights converted to the scalar backend.
    pub fn depth_weights<T: Scalar>(&self) -> Vec<T> {
        self.depth_weights.iter().map(T::from_rational).collect()
    }

    /// Per-vertex weights converted to the scalar backend.
    pub fn vertex_weights<T: Scalar>(&self) -> Vec<T> {
        let per_depth = self.depth_weights::<T>();
        self.tree
            .vertices()
            .map(|v| per_depth[self.tree.depth(v) as usize].clone())
            .collect()
    }

    pub fn total(&self) -> &BigRational {
        &self.total
    }

    /// Exact measure of a vertex set (duplicates are counted once).
    pub fn mu_set<I: IntoIterator<Item = VertexId>>(&self, set: I) -> Result<BigRational> {
        let mut seen = vec![false; self.tree.len()];
        let mut counts = vec![0u64; self.tree.max_depth() as usize + 1];
        for v in set {
            self.tree.check(v)?;
            if !std::mem::replace(&mut seen[v.index()], true) {
                counts[self.tree.depth(v) as usize] += 1;
            }
        }
        Ok(counts
            .iter()
            .zip(&self.depth_weights)
            .filter(|(c, _)| **c > 0)
            .fold(BigRational::zero(), |acc, (c, w)| {
                acc + w * BigRational::from_integer(BigInt::from(*c))
            }))
    }

    /// Whether `S_r(x₀)` and `B_r(x₀)` of the infinite tree lie inside the truncation.
    pub fn ball_contained(&self, x0: VertexId, r: u32) -> bool {
        self.tree.contains(x0) && self.tree.depth(x0) >= r && self.tree.room(x0) >= r
    }

    fn require_ball(&self, x0: VertexId, r: u32) -> Result<()> {
        self.tree.check(x0)?;
        if self.ball_contained(x0, r) {
            Ok(())
        } else {
            Err(Error::BallNotContained {
                center: self.tree.label(x0),
                radius: r,
            })
        }
    }

    pub fn mu_sphere(&self, x0: VertexId, r: u32) -> Result<BigRational> {
        self.require_ball(x0, r)?;
        Ok(sphere_formula(self.tree.q(), self.tree.level(x0), r))
    }

    pub fn mu_ball(&self, x0: VertexId, r: u32) -> Result<BigRational> {
        self.require_ball(x0, r)?;
        Ok(ball_formula(self.tree.q(), self.tree.level(x0), r))
    }

    /// `μ(S_r(x₀) ∩ truncation)` for every `r`, by walking all vertices.
    pub fn sphere_masses(&self, x0: VertexId) -> Result<Vec<BigRational>> {
        self.tree.check(x0)?;
        let span = 2 * self.tree.max_depth() as usize + 1;
        let mut counts = vec![vec![0u64; self.tree.max_depth() as usize + 1]; span];
        for v in self.tree.vertices() {
            let d = self.tree.distance(x0, v)? as usize;
            counts[d][self.tree.depth(v) as usize] += 1;
        }
        Ok(counts
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.depth_weights)
                    .fold(BigRational::zero(), |acc, (c, w)| acc + w * BigRational::from_integer(BigInt::from(*c)))
            })
            .collect())
    }

    /// `μ(B_{2r}(x₀)) / μ(B_r(x₀))`.
    pub fn doubling_ratio(&self, x0: VertexId, r: u32) -> Result<BigRational> {
        let big = self.mu_ball(x0, 2 * r)?;
        let small = self.mu_ball(x0, r)?;
        Ok(big / small)
    }

    pub fn integral<T: Scalar>(&self, f: &TreeFunction<T>) -> Result<T> {
        self.check_len(f)?;
        let w = self.depth_weights::<T>();
        Ok(sum_weighted(self.tree(), &w, f.values.iter().enumerate().map(|(i, x)| (i, x.clone()))))
    }

    /// `∑ |f(x)|^p μ(x)` for finite `p`.
    pub fn lp_norm_pow<T: Scalar>(&self, f: &TreeFunction<T>, p: Exponent) -> Result<T> {
        self.check_len(f)?;
        if p.is_infinite() {
            return Err(Error::InvalidExponent(p.value()));
        }
        let w = self.depth_weights::<T>();
        let mut terms = Vec::with_capacity(f.len());
        for (i, x) in f.values.iter().enumerate() {
            if !x.is_zero() {
                terms.push((i, x.abs_pow(p)?));
            }
        }
        Ok(sum_weighted(self.tree(), &w, terms.into_iter()))
    }

    /// `‖f‖_{L^p(μ)}` as a float; `p = ∞` gives the sup norm.
    pub fn lp_norm<T: Scalar>(&self, f: &TreeFunction<T>, p: Exponent) -> Result<f64> {
        self.check_len(f)?;
        if p.is_infinite() {
            return Ok(f.sup_norm().to_f64());
        }
        if T::EXACT && p.as_integer().is_some() {
            return Ok(self.lp_norm_pow(f, p)?.to_f64().powf(1.0 / p.value()));
        }
        let s: f64 = f
            .values
            .iter()
            .enumerate()
            .map(|(i, x)| x.to_f64().abs().powf(p.value()) * self.weight_f64(VertexId(i as u32)))
            .sum();
        Ok(s.powf(1.0 / p.value()))
    }

    /// Integral of `|f|^p` over a vertex set.
    pub fn set_lp_pow<T: Scalar>(
        &self,
        f: &TreeFunction<T>,
        set: &[VertexId],
        p: Exponent,
    ) -> Result<T> {
        let w = self.depth_weights::<T>();
        let mut terms = Vec::with_capacity(set.len());
        for &v in set {
            let x = &f.values[v.index()];
            if !x.is_zero() {
                terms.push((v.index(), x.abs_pow(p)?));
            }
        }
        Ok(sum_weighted(self.tree(), &w, terms.into_iter()))
    }

    pub fn check_len<T>(&self, f: &TreeFunction<T>) -> Result<()> {
        if f.len() != self.tree.len() {
            return Err(Error::LengthMismatch {
                expected: self.tree.len(),
                got: f.len(),
            });
        }
        Ok(())
    }
}

/// `∑ value · weight(depth)` grouping by depth so exact sums multiply once per level.
fn sum_weighted<T: Scalar>(tree: &Tree, w: &[T], terms: impl Iterator<Item = (usize, T)>) -> T {
    let mut per_depth = vec![T::zero(); w.len()];
    for (i, x) in terms {
        per_depth[tree.depth(VertexId(i as u32)) as usize] += x;
    }
    per_depth
        .into_iter()
        .zip(w)
        .fold(T::zero(), |acc, (s, wd)| acc + s * wd.clone())
}

/// Dense real-valued function on the vertices of a truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeFunction<T> {
    pub values: Vec<T>,
}

pub type ExactFunction = TreeFunction<Exact>;

impl<T> TreeFunction<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl<T: Scalar> TreeFunction<T> {
    pub fn zeros(n: usize) -> Self {
        TreeFunction {
            values: vec![T::zero(); n],
        }
    }

    pub fn constant(n: usize, c: T) -> Self {
        TreeFunction { values: vec![c; n] }
    }

    pub fn from_values(values: Vec<T>) -> Self {
        TreeFunction { values }
    }

    pub fn indicator<I: IntoIterator<Item = VertexId>>(n: usize, set: I) -> Self {
        let mut f = Self::zeros(n);
        for v in set {
            f.values[v.index()] = T::one();
        }
        f
    }


    pub fn is_zero(&self) -> bool {
        self.values.iter().all(Zero::is_zero)
    }

    pub fn support(&self) -> Vec<VertexId> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, x)| !x.is_zero())
            .map(|(i, _)| VertexId(i as u32))
            .collect()
    }

    pub fn sup_norm(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |m, x| T::max_of(m, x.abs()))
    }

    pub fn abs(&self) -> Self {
        self.map(|x| x.abs())
    }

    pub fn map(&self, f: impl Fn(&T) -> T) -> Self {
        TreeFunction {
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn scale(&self, c: &T) -> Self {
        self.map(|x| x.clone() * c.clone())
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn sub_assign(&mut self, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a -= b.clone();
        }
    }

    pub fn to_f64(&self) -> TreeFunction<f64> {
        TreeFunction {
            values: self.values.iter().map(Scalar::to_f64).collect(),
        }
    }
}

impl<T> Index<VertexId> for TreeFunction<T> {
    type Output = T;

    fn index(&self, v: VertexId) -> &T {
        &self.values[v.index()]
    }
}

impl<T> IndexMut<VertexId> for TreeFunction<T> {
    fn index_mut(&mut self, v: VertexId) -> &mut T {
        &mut self.values[v.index()]
    }
}
