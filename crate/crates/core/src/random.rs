//! Seeded generators for functions, sets and atoms.
//!
//! Values are small dyadic rationals so that exact and float runs see the
//! same inputs.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::geometry::{CzSet, Trapezoid};
use crate::hardy::{atom_scale, Atom};
use crate::measure::{TreeFunction, WeightedMeasure};
use crate::scalar::{Exponent, Scalar};
use crate::tree::{Tree, VertexId};

/// `k/4` with `k` uniform in `-8..=8`.
pub fn random_value<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::from_ratio(rng.random_range(-8..=8), 4)
}

pub fn random_function<T: Scalar, R: Rng + ?Sized>(tree: &Tree, rng: &mut R) -> TreeFunction<T> {
    TreeFunction::from_values((0..tree.len()).map(|_| random_value(rng)).collect())
}

/// Random values on `set`, zero elsewhere.
pub fn random_function_on<T: Scalar, R: Rng + ?Sized>(
    tree: &Tree,
    set: &[VertexId],
    rng: &mut R,
) -> TreeFunction<T> {
    let mut f = TreeFunction::zeros(tree.len());
    for &x in set {
        f[x] = random_value(rng);
    }
    f
}

/// Uniform admissible trapezoid inside the truncation.
pub fn random_trapezoid<R: Rng + ?Sized>(all: &[Trapezoid], rng: &mut R) -> Trapezoid {
    *all.choose(rng).expect("nonempty")
}

/// Uniform non-degenerate Calderón–Zygmund set inside the truncation.
pub fn random_cz_set<R: Rng + ?Sized>(tree: &Tree, rng: &mut R) -> Option<CzSet> {
    let all: Vec<CzSet> = CzSet::all_in(tree).into_iter().filter(|s| !s.degenerate).collect();
    all.choose(rng).copied()
}

/// Random mean-zero atom on a random set, scaled to the size bound for `p`.
///
/// Panics when the truncation holds no non-degenerate set (depth below 3).
pub fn random_atom<T: Scalar, R: Rng + ?Sized>(m: &WeightedMeasure, p: Exponent, rng: &mut R) -> Atom<T> {
    let support = random_cz_set(m.tree(), rng).expect("truncation too shallow for an atom");
    random_atom_on(m, support, p, rng)
}

pub fn random_atom_on<T: Scalar, R: Rng + ?Sized>(
    m: &WeightedMeasure,
    support: CzSet,
    p: Exponent,
    rng: &mut R,
) -> Atom<T> {
    let tree = m.tree();
    let verts = support.vertices(tree).expect("set inside the truncation");
    let mu = support.measure(m);
    loop {
        let mut f: TreeFunction<T> = random_function_on(tree, &verts, rng);
        let mean = m.integral(&f).expect("length") / T::from_rational(&mu);
        for &x in &verts {
            f[x] -= mean.clone();
        }
        if f.is_zero() {
            continue;
        }
        let scale = if p.is_infinite() {
            T::one() / (f.sup_norm() * T::from_rational(&mu))
        } else {
            let lp = m.lp_norm_pow(&f, p).expect("finite p");
            atom_scale(&lp, &mu, p) / T::from_rational(&mu)
        };
        return Atom {
            support,
            values: f.scale(&scale),
            p,
        };
    }
}
