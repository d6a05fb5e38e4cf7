//! Maximal functions over admissible trapezoids and the greedy
//! largest-width Calderón–Zygmund covering of their level sets.

use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::geometry::{Band, CzSet, Trapezoid};
use crate::measure::{TreeFunction, WeightedMeasure};
use crate::scalar::{Exponent, Scalar};
use crate::tree::{Tree, VertexId};

/// `∫_R g dμ` and `μ(R)` for every admissible trapezoid inside the truncation.
///
/// Slot 0 of a root is the single vertex, slot `h` the trapezoid of height `h`.
pub struct TrapezoidTable<T> {
    offsets: Vec<usize>,
    integrals: Vec<T>,
    measures: Vec<T>,
}

impl<T: Scalar> TrapezoidTable<T> {
    /// Builds the table for a nonnegative density `g`.
    pub fn new(g: &TreeFunction<T>, m: &WeightedMeasure) -> Result<Self> {
        m.check_len(g)?;
        let tree = m.tree();
        // descendant sets at a fixed relative depth are contiguous in BFS order
        let mut prefix = Vec::with_capacity(g.len() + 1);
        prefix.push(T::zero());
        for x in &g.values {
            let next = prefix.last().unwrap().clone() + x.clone();
            prefix.push(next);
        }
        let weights = m.depth_weights::<T>();
        let mut offsets = Vec::with_capacity(tree.len() + 1);
        let mut integrals = Vec::new();
        let mut measures = Vec::new();
        for root in tree.vertices() {
            offsets.push(integrals.len());
            let d = tree.depth(root) as usize;
            let room = tree.room(root);
            let level_mass: Vec<T> = (0..=room)
                .map(|delta| {
                    let r = tree.descendant_range(root, delta).expect("room");
                    (prefix[r.end].clone() - prefix[r.start].clone()) * weights[d + delta as usize].clone()
                })
                .collect();
            integrals.push(level_mass[0].clone());
            measures.push(weights[d].clone());
            for h in 1..=(room + 1) / 2 {
                let mut s = T::zero();
                for mass in &level_mass[h as usize..2 * h as usize] {
                    s += mass;
                }
                integrals.push(s);
                measures.push(weights[d].clone() * T::from_i64(h as i64));
            }
        }
        offsets.push(integrals.len());
        Ok(TrapezoidTable {
            offsets,
            integrals,
            measures,
        })
    }

    fn slot(&self, r: &Trapezoid) -> usize {
        let i = self.offsets[r.root.index()] + if r.degenerate { 0 } else { r.h as usize };
        debug_assert!(i < self.offsets[r.root.index() + 1]);
        i
    }

    pub fn integral(&self, r: &Trapezoid) -> &T {
        &self.integrals[self.slot(r)]
    }

    pub fn measure(&self, r: &Trapezoid) -> &T {
        &self.measures[self.slot(r)]
    }

    pub fn average(&self, r: &Trapezoid) -> T {
        let i = self.slot(r);
        self.integrals[i].clone() / self.measures[i].clone()
    }

    /// `∫_R g ≥ t μ(R)`.
    pub fn reaches(&self, r: &Trapezoid, t: &T) -> bool {
        let i = self.slot(r);
        self.integrals[i] >= t.clone() * self.measures[i].clone()
    }

    /// `∫_R g > t μ(R)`.
    pub fn exceeds(&self, r: &Trapezoid, t: &T) -> bool {
        let i = self.slot(r);
        self.integrals[i] > t.clone() * self.measures[i].clone()
    }
}

/// Trapezoids through `x` allowed by the optional restriction.
fn candidates_through(tree: &Tree, x: VertexId, within: Option<&Band>) -> Vec<Trapezoid> {
    let mut out = Trapezoid::containing(tree, x);
    if let Some(q) = within {
        out.retain(|r| r.band().is_subset_of(q, tree));
    }
    out
}

fn maximal_of_density<T: Scalar>(
    g: &TreeFunction<T>,
    m: &WeightedMeasure,
    within: Option<&CzSet>,
) -> Result<TreeFunction<T>> {
    let table = TrapezoidTable::new(g, m)?;
    let tree = m.tree();
    let band = within.map(|q| q.band());
    let mut out = TreeFunction::zeros(tree.len());
    for x in tree.vertices() {
        if let Some(b) = &band {
            if !b.contains(tree, x) {
                continue;
            }
        }
        let mut best = T::zero();
        for r in candidates_through(tree, x, band.as_ref()) {
            best = T::max_of(best, table.average(&r));
        }
        out[x] = best;
    }
    Ok(out)
}

/// `Mf(x) = sup_{R ∋ x} μ(R)⁻¹ ∫_R |f| dμ` over admissible trapezoids inside the truncation.
pub fn maximal_function<T: Scalar>(f: &TreeFunction<T>, m: &WeightedMeasure) -> Result<TreeFunction<T>> {
    maximal_of_density(&f.abs(), m, None)
}

/// `M_Q̃ f`: as [`maximal_function`] over trapezoids inside `Q̃`, and zero off `Q̃`.
pub fn restricted_maximal_function<T: Scalar>(
    f: &TreeFunction<T>,
    m: &WeightedMeasure,
    q_tilde: &CzSet,
) -> Result<TreeFunction<T>> {
    maximal_of_density(&f.abs(), m, Some(q_tilde))
}

/// `|f|^p` pointwise.
pub fn abs_pow_function<T: Scalar>(f: &TreeFunction<T>, p: Exponent) -> Result<TreeFunction<T>> {
    let values = f.values.iter().map(|x| x.abs_pow(p)).collect::<Result<Vec<_>>>()?;
    Ok(TreeFunction::from_values(values))
}

/// Exact outcome checks of a covering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct CoveringCertificate {
    /// Selected trapezoids are pairwise disjoint.
    pub disjoint: bool,
    /// `Ω ⊂ ⋃ R̃ᵢ`.
    pub level_set_covered: bool,
    /// `∑ μ(Rᵢ) ≤ λ^{-p} ‖f‖_p^p`.
    pub selected_mass_bound: bool,
    /// `∑ μ(R̃ᵢ) ≤ 4 ∑ μ(Rᵢ)`.
    pub envelope_ratio_bound: bool,
    /// `μ(E) ≤ 4 λ^{-p} ‖f‖_p^p`.
    pub union_mass_bound: bool,
    /// Every candidate meets a selected trapezoid at least as wide and lies in its envelope.
    pub candidates_absorbed: bool,
}

impl CoveringCertificate {
    pub fn all_hold(&self) -> bool {
        self.disjoint
            && self.level_set_covered
            && self.selected_mass_bound
            && self.envelope_ratio_bound
            && self.union_mass_bound
            && self.candidates_absorbed
    }
}

#[derive(Debug, Clone)]
pub struct CoveringResult<T> {
    pub p: Exponent,
    pub lambda: T,
    pub lambda_p: T,
    pub restrict: Option<CzSet>,
    /// `|S₀|`.
    pub candidates: usize,
    pub selected: Vec<Trapezoid>,
    pub envelopes: Vec<CzSet>,
    /// `Ω_{λ^p}`, the vertices where the maximal function of `|f|^p` exceeds `λ^p`.
    pub level_set: Vec<VertexId>,
    /// `‖f‖_p^p`.
    pub lp_pow: T,
    pub sum_mu_selected: BigRational,
    /// `∑ μ(R̃ᵢ)` on the infinite tree; bounds `μ(E)`.
    pub sum_mu_envelopes: BigRational,
    /// Exact measure of `E = ⋃ R̃ᵢ` inside the truncation.
    pub mu_union: BigRational,
    pub certificate: CoveringCertificate,
}

impl<T: Scalar> CoveringResult<T> {
    /// Index of the first selected envelope holding `x`.
    pub fn envelope_of(&self, tree: &Tree, x: VertexId) -> Option<usize> {
        self.envelopes.iter().position(|e| e.contains(tree, x))
    }
}

/// Greedy covering of `Ω_{λ^p}`.
///
/// `S₀` collects the admissible trapezoids (inside `Q̃` when given) with
/// `∫_R |f|^p ≥ λ^p μ(R)`. Scanning them in canonical order and keeping each
/// one disjoint from those already kept runs the largest-width induction: the
/// canonical order lists wider trapezoids first and breaks ties by the fixed
/// enumeration. The truncation makes `S₀` finite, so the loop ends once the
/// list is exhausted.
pub fn cz_covering<T: Scalar>(
    f: &TreeFunction<T>,
    m: &WeightedMeasure,
    p: Exponent,
    lambda: &T,
    q_tilde: Option<&CzSet>,
) -> Result<CoveringResult<T>> {
    m.check_len(f)?;
    if p.is_infinite() {
        return Err(Error::InvalidExponent(p.value()));
    }
    if *lambda <= T::zero() {
        return Err(Error::InvalidParameter("threshold must be positive".into()));
    }
    let tree = m.tree();
    let band = q_tilde.map(|q| q.band());
    if let Some(b) = &band {
        if let Some(x) = f.support().into_iter().find(|&x| !b.contains(tree, x)) {
            return Err(Error::SupportNotContained(tree.label(x)));
        }
    }
    let g = abs_pow_function(f, p)?;
    let lambda_p = lambda.abs_pow(p)?;
    let table = TrapezoidTable::new(&g, m)?;
    let lp_pow = m.integral(&g)?;

    let s0: Vec<Trapezoid> = Trapezoid::all_in(tree)
        .into_iter()
        .filter(|r| band.as_ref().is_none_or(|b| r.band().is_subset_of(b, tree)))
        .filter(|r| table.reaches(r, &lambda_p))
        .collect();

    let mut selected: Vec<Trapezoid> = Vec::new();
    for r in &s0 {
        if selected.iter().all(|s| !s.band().intersects(&r.band(), tree)) {
            selected.push(*r);
        }
    }
    let envelopes: Vec<CzSet> = selected.iter().map(Trapezoid::envelope).collect();

    let level_set: Vec<VertexId> = tree
        .vertices()
        .filter(|&x| band.as_ref().is_none_or(|b| b.contains(tree, x)))
        .filter(|&x| {
            candidates_through(tree, x, band.as_ref())
                .iter()
                .any(|r| table.exceeds(r, &lambda_p))
        })
        .collect();

    let sum_mu_selected = selected
        .iter()
        .fold(BigRational::zero(), |acc, r| acc + r.measure(m));
    let sum_mu_envelopes = envelopes
        .iter()
        .fold(BigRational::zero(), |acc, e| acc + e.measure(m));
    let mut in_union = vec![false; tree.len()];
    for e in &envelopes {
        for x in e.vertices_clipped(tree) {
            in_union[x.index()] = true;
        }
    }
    let mu_union = m.mu_set(tree.vertices().filter(|x| in_union[x.index()]))?;

    let disjoint = selected.iter().enumerate().all(|(i, a)| {
        selected[i + 1..]
            .iter()
            .all(|b| !a.band().intersects(&b.band(), tree))
    });
    let level_set_covered = level_set.iter().all(|x| in_union[x.index()]);
    let mass = |mu: &BigRational| lambda_p.clone() * T::from_rational(mu);
    let four = BigRational::from_integer(4.into());
    let selected_mass_bound = mass(&sum_mu_selected).certified_le(&lp_pow);
    let envelope_ratio_bound = sum_mu_envelopes <= &four * &sum_mu_selected;
    let union_mass_bound = mass(&mu_union).certified_le(&(T::from_i64(4) * lp_pow.clone()))
        && mass(&sum_mu_envelopes).certified_le(&(T::from_i64(4) * lp_pow.clone()));
    let candidates_absorbed = s0.iter().all(|r| {
        selected.iter().any(|s| {
            tree.depth(s.root) <= tree.depth(r.root)
                && s.band().intersects(&r.band(), tree)
                && r.band().is_subset_of(&s.envelope().band(), tree)
        })
    });

    Ok(CoveringResult {
        p,
        lambda: lambda.clone(),
        lambda_p,
        restrict: q_tilde.copied(),
        candidates: s0.len(),
        selected,
        envelopes,
        level_set,
        lp_pow,
        sum_mu_selected,
        sum_mu_envelopes,
        mu_union,
        certificate: CoveringCertificate {
            disjoint,
            level_set_covered,
            selected_mass_bound,
            envelope_ratio_bound,
            union_mass_bound,
            candidates_absorbed,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_function;
    use crate::scalar::Exact;
    use crate::tree::TreeConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn measure(q: u32, depth: u32) -> WeightedMeasure {
        WeightedMeasure::new(Tree::new(TreeConfig::new(q, depth)).unwrap())
    }

    fn brute_maximal(f: &TreeFunction<Exact>, m: &WeightedMeasure, within: Option<&CzSet>) -> TreeFunction<Exact> {
        let t = m.tree();
        let mut out = TreeFunction::zeros(t.len());
        let all = Trapezoid::all_in(t);
        for x in t.vertices() {
            if within.is_some_and(|q| !q.contains(t, x)) {
                continue;
            }
            for r in &all {
                let verts = r.vertices(t).unwrap();
                if !verts.contains(&x) {
                    continue;
                }
                if let Some(q) = within {
                    if !verts.iter().all(|&v| q.contains(t, v)) {
                        continue;
                    }
                }
                let s: Exact = verts
                    .iter()
                    .map(|&v| Scalar::abs(&f[v]) * m.weight(v))
                    .fold(Exact::zero(), |a, b| a + b);
                let avg = s / m.mu_set(verts).unwrap();
                if avg > out[x] {
                    out[x] = avg;
                }
            }
        }
        out
    }

    #[test]
    fn constant_and_spike() {
        let m = measure(3, 4);
        let n = m.tree().len();
        let one = TreeFunction::<Exact>::constant(n, Exact::from_i64(1));
        assert_eq!(maximal_function(&one, &m).unwrap(), one);
        let v = m.tree().vertex(&"01".parse().unwrap()).unwrap();
        let spike = TreeFunction::<Exact>::indicator(n, [v]);
        assert_eq!(maximal_function(&spike, &m).unwrap()[v], Exact::from_i64(1));
    }

    #[test]
    fn matches_brute_force() {
        let m = measure(2, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let f: TreeFunction<Exact> = random_function(m.tree(), &mut rng);
            assert_eq!(maximal_function(&f, &m).unwrap(), brute_maximal(&f, &m, None));
            for q in CzSet::all_in(m.tree()) {
                let g = TreeFunction::from_values(
                    f.values
                        .iter()
                        .enumerate()
                        .map(|(i, x)| if q.contains(m.tree(), VertexId(i as u32)) { x.clone() } else { Exact::zero() })
                        .collect(),
                );
                let restricted = restricted_maximal_function(&g, &m, &q).unwrap();
                assert_eq!(restricted, brute_maximal(&g, &m, Some(&q)));
                let full = maximal_function(&g, &m).unwrap();
                assert!(restricted.values.iter().zip(&full.values).all(|(a, b)| a <= b));
            }
        }
    }

    #[test]
    fn restricted_constant() {
        let m = measure(2, 6);
        let t = m.tree();
        let q = CzSet::new(t.apex(), 1).unwrap();
        let f = TreeFunction::<Exact>::indicator(t.len(), q.vertices(t).unwrap());
        let mf = restricted_maximal_function(&f, &m, &q).unwrap();
        assert_eq!(mf, f);
    }

    #[test]
    fn zero_function_has_empty_covering() {
        let m = measure(3, 4);
        let f = TreeFunction::<Exact>::zeros(m.tree().len());
        let c = cz_covering(&f, &m, Exponent::ONE, &Exact::from_i64(1), None).unwrap();
        assert!(c.selected.is_empty() && c.level_set.is_empty());
        assert!(c.certificate.all_hold());
    }

    #[test]
    fn spike_covering() {
        let m = measure(2, 4);
        let t = m.tree();
        let v = t.vertex(&"01".parse().unwrap()).unwrap();
        let f = TreeFunction::<Exact>::indicator(t.len(), [v]);
        let half = <Exact as Scalar>::from_ratio(1, 2);
        let c = cz_covering(&f, &m, Exponent::ONE, &half, None).unwrap();
        assert!(c.certificate.all_hold());
        assert!(c.level_set.contains(&v));
        assert!(c.candidates >= 1);
        // the widest candidate through v wins
        let widest = Trapezoid::containing(t, v)
            .into_iter()
            .filter(|r| {
                let table = TrapezoidTable::new(&f, &m).unwrap();
                table.reaches(r, &half)
            })
            .min()
            .unwrap();
        assert_eq!(c.selected[0], widest);
    }

    #[test]
    fn support_outside_restriction_is_rejected() {
        let m = measure(2, 6);
        let t = m.tree();
        let q = CzSet::new(t.vertex(&"0".parse().unwrap()).unwrap(), 1).unwrap();
        let f = TreeFunction::<Exact>::indicator(t.len(), [t.apex()]);
        assert!(matches!(
            cz_covering(&f, &m, Exponent::ONE, &Exact::from_i64(1), Some(&q)),
            Err(Error::SupportNotContained(_))
        ));
    }

    #[test]
    fn float_backend_agrees_with_exact() {
        let m = measure(3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f: TreeFunction<Exact> = random_function(m.tree(), &mut rng);
        let lambda = <Exact as Scalar>::from_ratio(1, 3);
        let a = cz_covering(&f, &m, Exponent::TWO, &lambda, None).unwrap();
        let b = cz_covering(&f.to_f64(), &m, Exponent::TWO, &lambda.to_f64(), None).unwrap();
        assert_eq!(a.selected, b.selected);
        assert_eq!(a.level_set, b.level_set);
        assert!(b.certificate.all_hold());
    }
}
