//! Atoms, the recursive atomic decomposition of `(1,p)`-atoms into
//! `(1,∞)`-atoms, and certified upper bounds for the `H¹` norm.
//!
//! The decomposition works on `b = μ(Q̃) a`. Stage `k` covers every pending
//! piece `f` (supported in a set `S`) with the restricted covering at
//! threshold `α^k`, splits off the bad parts
//! `fᵢ = hᵢ − μ(Rᵢ)⁻¹(∫hᵢ)χ_{Rᵢ}` with `hᵢ = f χ_{Uᵢ}` and
//! `Uᵢ = R̃ᵢ \ ⋃_{j<i} R̃ⱼ`, and emits the bounded remainder `g = f − ∑ fᵢ`
//! as a multiple of a `(1,∞)`-atom supported in `S`.
//!
//! Coefficients are the tight ones, `‖g‖_∞ μ(S)`; that they never exceed the
//! proof's `4(6q)^{1/p} α^k μ(S)` is part of the certificate.

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::CzSet;
use crate::maximal::cz_covering;
use crate::measure::{TreeFunction, WeightedMeasure};
use crate::scalar::{rational_below, Exponent, Scalar};
use crate::tree::{Tree, VertexId};

/// A function supported in a Calderón–Zygmund set, to be checked against the atom axioms.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom<T> {
    pub support: CzSet,
    pub values: TreeFunction<T>,
    pub p: Exponent,
}

/// Outcome of the three atom axioms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AtomCheck {
    pub supported: bool,
    pub size: bool,
    pub mean_zero: bool,
}

impl AtomCheck {
    pub fn is_valid(&self) -> bool {
        self.supported && self.size && self.mean_zero
    }
}

/// Checks support, `‖a‖_p ≤ μ(R̃)^{1/p−1}` and `∫ a dμ = 0`.
///
/// Exact for `p = ∞` and for integer `p` with exact scalars.
pub fn validate_atom<T: Scalar>(a: &Atom<T>, m: &WeightedMeasure) -> Result<AtomCheck> {
    m.check_len(&a.values)?;
    let tree = m.tree();
    let band = a.support.band();
    let supported = a.values.support().iter().all(|&x| band.contains(tree, x));
    let mu = a.support.measure(m);
    let size = if a.p.is_infinite() {
        (a.values.sup_norm() * T::from_rational(&mu)).certified_le(&T::one())
    } else if let Some(n) = a.p.as_integer() {
        // ‖a‖_p^p μ^{p−1} ≤ 1
        (m.lp_norm_pow(&a.values, a.p)? * T::from_rational(&mu).powi(n - 1)).certified_le(&T::one())
    } else {
        let lhs = m.lp_norm(&a.values, a.p)?;
        let rhs = crate::scalar::rational_to_f64(&mu).powf(1.0 / a.p.value() - 1.0);
        lhs.certified_le(&rhs)
    };
    let integral = m.integral(&a.values)?;
    let mean_zero = if T::EXACT {
        integral.is_zero()
    } else {
        let scale = m.lp_norm(&a.values, Exponent::ONE)?;
        integral.to_f64().abs() <= crate::scalar::FLOAT_SLACK * scale.max(f64::MIN_POSITIVE)
    };
    Ok(AtomCheck {
        supported,
        size,
        mean_zero,
    })
}

/// `2[24q(1+4^p)]^{1/(p−1)}`; any admissible `α` must exceed it.
pub fn alpha_threshold(q: u32, p: Exponent) -> f64 {
    let p = p.value();
    2.0 * (24.0 * q as f64 * (1.0 + 4f64.powf(p))).powf(1.0 / (p - 1.0))
}

/// `α > 2[24q(1+4^p)]^{1/(p−1)}`, decided exactly for integer `p` with exact scalars.
pub fn alpha_is_admissible<T: Scalar>(alpha: &T, q: u32, p: Exponent) -> bool {
    match p.as_integer() {
        Some(n) if n >= 2 => {
            let half = alpha.clone() / T::from_i64(2);
            let base = T::from_i64(24 * q as i64 * (1 + 4i64.pow(n)));
            half.powi(n - 1) > base
        }
        _ => alpha.to_f64() > alpha_threshold(q, p),
    }
}

/// Twice the threshold; rounded up to an integer for exact scalars.
pub fn default_alpha<T: Scalar>(q: u32, p: Exponent) -> T {
    let a = 2.0 * alpha_threshold(q, p);
    if !T::EXACT {
        return T::from_rational(&rational_below(a));
    }
    let mut alpha = T::from_i64(a.ceil() as i64);
    while !alpha_is_admissible(&alpha, q, p) {
        alpha += T::one();
    }
    alpha
}

/// `r = 2^{p+1}·6q·(1+4^p)·α^{1−p}`, ratio of the geometric series behind `C_p`.
pub fn series_ratio(q: u32, p: Exponent, alpha: f64) -> f64 {
    let p = p.value();
    2f64.powf(p + 1.0) * 6.0 * q as f64 * (1.0 + 4f64.powf(p)) * alpha.powf(1.0 - p)
}

/// `C_p = ∑_ℓ 4(6q)^{1/p} α^{ℓ+1} 4^{ℓ+1} [2^{p−1}6q(1+4^p)]^ℓ α^{−ℓp}`; infinite when the series diverges.
pub fn proof_constant(q: u32, p: Exponent, alpha: f64) -> f64 {
    let r = series_ratio(q, p, alpha);
    if r >= 1.0 {
        return f64::INFINITY;
    }
    16.0 * (6.0 * q as f64).powf(1.0 / p.value()) * alpha / (1.0 - r)
}

#[derive(Debug, Clone)]
pub struct DecomposeOptions<T> {
    /// Defaults to [`default_alpha`].
    pub alpha: Option<T>,
    pub max_depth: u32,
    /// Stop once the residual `L¹` norm drops below this.
    pub tolerance: f64,
    /// Accept `α` below the threshold; the certificates still apply but convergence does not.
    pub allow_subcritical: bool,
    /// Extra thresholds tried by the `H¹` bounds. Any explicit decomposition
    /// bounds the norm, so each is run with `allow_subcritical` and the
    /// smallest certified total wins. Small values peel spikes over many
    /// scales where the admissible `α` produces one coarse atom.
    pub refine_alphas: Vec<T>,
}

impl<T> Default for DecomposeOptions<T> {
    fn default() -> Self {
        DecomposeOptions {
            alpha: None,
            max_depth: 4,
            tolerance: 0.0,
            allow_subcritical: false,
            refine_alphas: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AtomTerm<T> {
    /// Coefficient in the decomposition of the input.
    pub coefficient: T,
    pub atom: Atom<T>,
    pub stage: u32,
}

/// A pending bad part: mean zero, supported in `support`.
#[derive(Debug, Clone)]
pub struct Piece<T> {
    pub support: CzSet,
    pub values: TreeFunction<T>,
}

/// Per-stage checks, with `n` the stage index and `b` the rescaled input.
#[derive(Debug, Clone, Serialize)]
pub struct StageReport {
    pub stage: u32,
    pub pieces_in: usize,
    pub atoms: usize,
    pub pieces_out: usize,
    /// `∫_{Uᵢ} |hᵢ|^p ≤ 6q α^{kp} μ(R̃ᵢ)` for every split.
    pub mean_bound: bool,
    /// `‖g‖_∞ ≤ 4(6q)^{1/p} α^k`, or `‖g‖_∞ ≤ α^k` when nothing was split off.
    pub good_part_bound: bool,
    /// Emitted coefficient `≤ 4(6q)^{1/p} α^k μ(S)`.
    pub coefficient_bound: bool,
    /// Emitted atoms are `(1,∞)`-atoms.
    pub atoms_valid: bool,
    /// New pieces are mean zero and supported in their envelopes.
    pub pieces_valid: bool,
    /// Property (iii): `μ(R̃)⁻¹ ∫|f|^p ≤ 2^{p−1} 6q (1+4^p) α^{np}`.
    pub piece_size: bool,
    /// Property (iv): `|f(x)| ≤ |b(x)| + 4(6q)^{1/p} n α^n`.
    pub piece_pointwise: bool,
    /// Property (v): `∑ μ(R̃) ≤ 4^{n+1} [2^{p−1} 6q (1+4^p)]^n α^{−np} ‖b‖_p^p`.
    pub envelope_mass: bool,
    /// Input equals emitted terms plus pending pieces.
    pub reconstruction: bool,
    /// `‖∑ f‖_{L¹}` after the stage, in units of the input.
    pub residual_l1: f64,
    /// `∑ μ(R̃)^{1/p'} ‖f‖_p` over the pending pieces.
    pub residual_holder: f64,
    /// `4^{n+1}[2^{p−1}6q(1+4^p)]^n α^{−np} ‖b‖_p^p · 2^{1−1/p}(6q)^{1/p}(1+4^p)^{1/p} α^n`.
    pub residual_bound: f64,
}

impl StageReport {
    pub fn all_hold(&self) -> bool {
        self.mean_bound
            && self.good_part_bound
            && self.coefficient_bound
            && self.atoms_valid
            && self.pieces_valid
            && self.piece_size
            && self.piece_pointwise
            && self.envelope_mass
            && self.reconstruction
            && self.residual_l1 <= self.residual_holder * (1.0 + 1e-9)
            && self.residual_holder <= self.residual_bound * (1.0 + 1e-9)
    }
}

#[derive(Debug, Clone)]
pub struct AtomicDecomposition<T> {
    pub terms: Vec<AtomTerm<T>>,
    /// Pending pieces after the last stage, in units of the input.
    pub residual: Vec<Piece<T>>,
    pub depth: u32,
    pub alpha: T,
    pub p: Exponent,
    /// `μ(Q̃)`, the factor between the input and `b`.
    pub scale: BigRational,
    pub stages: Vec<StageReport>,
    /// `C_p` for this `α`.
    pub proof_constant: f64,
}

impl<T: Scalar> AtomicDecomposition<T> {
    pub fn coefficient_sum(&self) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |acc, t| acc + Scalar::abs(&t.coefficient))
    }

    pub fn residual_function(&self, n: usize) -> TreeFunction<T> {
        let mut out = TreeFunction::zeros(n);
        for piece in &self.residual {
            out.add_assign(&piece.values);
        }
        out
    }

    /// Coefficients plus `‖f‖_∞ μ(S)` for every residual piece; bounds the `H¹` norm of the input.
    pub fn h1_bound(&self, m: &WeightedMeasure) -> f64 {
        let residual: f64 = self
            .residual
            .iter()
            .map(|piece| piece.values.sup_norm().to_f64() * piece.support.measure(m).to_f64())
            .sum();
        self.coefficient_sum().to_f64() + residual
    }

    pub fn certified(&self) -> bool {
        self.stages.iter().all(StageReport::all_hold)
    }

    /// Sum of all terms and the residual.
    pub fn reconstruct(&self, n: usize) -> TreeFunction<T> {
        let mut out = self.residual_function(n);
        for t in &self.terms {
            out.add_assign(&t.atom.values.scale(&t.coefficient));
        }
        out
    }
}

/// `x ≤ c · base^{1/p}` for `x, c ≥ 0`, in the `p`-th power domain when `p` is an integer.
fn le_times_root<T: Scalar>(x: &T, c: &T, base: i64, p: Exponent) -> bool {
    if *x <= T::zero() {
        return true;
    }
    match p.as_integer() {
        Some(n) => x.powi(n).certified_le(&(c.powi(n) * T::from_i64(base))),
        None => x
            .to_f64()
            .certified_le(&(c.to_f64() * (base as f64).powf(1.0 / p.value()))),
    }
}

/// The split of one pending piece at threshold `α^k`.
struct Split<T> {
    good: TreeFunction<T>,
    children: Vec<Piece<T>>,
    mean_bound: bool,
}

fn split_piece<T: Scalar>(
    piece: &Piece<T>,
    m: &WeightedMeasure,
    p: Exponent,
    threshold: &T,
) -> Result<Split<T>> {
    let tree = m.tree();
    let cov = cz_covering(&piece.values, m, p, threshold, Some(&piece.support))?;
    let mut good = piece.values.clone();
    let mut children = Vec::with_capacity(cov.selected.len());
    let mut taken = vec![false; tree.len()];
    let mut mean_bound = true;
    let six_q = T::from_i64(6 * tree.q() as i64);
    for (r, env) in cov.selected.iter().zip(&cov.envelopes) {
        let mut h = TreeFunction::zeros(tree.len());
        for x in env.vertices_clipped(tree) {
            if !std::mem::replace(&mut taken[x.index()], true) {
                h[x] = piece.values[x].clone();
            }
        }
        let mu_env = T::from_rational(&env.measure(m));
        mean_bound &= m
            .lp_norm_pow(&h, p)?
            .certified_le(&(six_q.clone() * cov.lambda_p.clone() * mu_env));
        let avg = m.integral(&h)? / T::from_rational(&r.measure(m));
        let mut f = h;
        for x in r.vertices(tree)? {
            f[x] -= avg.clone();
        }
        good.sub_assign(&f);
        children.push(Piece {
            support: *env,
            values: f,
        });
    }
    Ok(Split {
        good,
        children,
        mean_bound,
    })
}

/// Decomposes `values`, assumed mean zero and supported in `support`, as `b = μ(support)·values`.
pub fn decompose_function<T: Scalar>(
    values: &TreeFunction<T>,
    support: &CzSet,
    p: Exponent,
    m: &WeightedMeasure,
    opts: &DecomposeOptions<T>,
) -> Result<AtomicDecomposition<T>> {
    m.check_len(values)?;
    if p.is_infinite() || p.value() <= 1.0 {
        return Err(Error::InvalidExponent(p.value()));
    }
    if T::EXACT && p.as_integer().is_none() {
        return Err(Error::NonIntegerExponent(p.value()));
    }
    let tree = m.tree();
    let q = tree.q();
    let alpha = opts.alpha.clone().unwrap_or_else(|| default_alpha(q, p));
    if alpha <= T::zero() || (!opts.allow_subcritical && !alpha_is_admissible(&alpha, q, p)) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {} must exceed 2[24q(1+4^p)]^(1/(p-1)) = {}",
            alpha.to_f64(),
            alpha_threshold(q, p)
        )));
    }
    let band = support.band();
    if let Some(x) = values.support().into_iter().find(|&x| !band.contains(tree, x)) {
        return Err(Error::SupportNotContained(tree.label(x)));
    }
    let scale = support.measure(m);
    let scale_t = T::from_rational(&scale);
    let b = values.scale(&scale_t);
    let b_abs = b.abs();
    let b_lp = m.lp_norm_pow(&b, p)?;
    let n_int = p.as_integer();
    let pv = p.value();
    let six_q = 6 * q as i64;
    // 2^{p−1}·6q·(1+4^p), exact when p is an integer
    let piece_const: T = match n_int {
        Some(n) => T::from_i64(2i64.pow(n - 1) * six_q * (1 + 4i64.pow(n))),
        None => T::from_rational(&rational_below(
            2f64.powf(pv - 1.0) * six_q as f64 * (1.0 + 4f64.powf(pv)) * (1.0 + 1e-12),
        )),
    };
    let alpha_pow_p = |k: u32| -> Result<T> { alpha.powi(k).abs_pow(p) };

    let mut pending = vec![Piece {
        support: *support,
        values: b.clone(),
    }];
    let mut terms = Vec::new();
    let mut stages = Vec::new();
    let mut depth = 0;
    let four = T::from_i64(4);

    for k in 1..=opts.max_depth {
        if pending.iter().all(|piece| piece.values.is_zero()) {
            break;
        }
        depth = k;
        let threshold = alpha.powi(k);
        let mut report_mean = true;
        let mut good_bound = true;
        let mut coeff_bound = true;
        let mut atoms_valid = true;
        let mut atoms = 0;
        let mut next = Vec::new();
        let pieces_in = pending.len();
        for piece in &pending {
            if piece.values.is_zero() {
                continue;
            }
            let split = split_piece(piece, m, p, &threshold)?;
            report_mean &= split.mean_bound;
            let sup = split.good.sup_norm();
            good_bound &= if split.children.is_empty() {
                sup.certified_le(&threshold)
            } else {
                le_times_root(&sup, &(four.clone() * threshold.clone()), six_q, p)
            };
            if !sup.is_zero() {
                let mu = T::from_rational(&piece.support.measure(m));
                let lambda = sup.clone() * mu.clone();
                coeff_bound &= le_times_root(&lambda, &(four.clone() * threshold.clone() * mu), six_q, p);
                let atom = Atom {
                    support: piece.support,
                    values: split.good.scale(&(T::one() / lambda.clone())),
                    p: Exponent::INFINITY,
                };
                atoms_valid &= validate_atom(&atom, m)?.is_valid();
                atoms += 1;
                terms.push(AtomTerm {
                    coefficient: lambda / scale_t.clone(),
                    atom,
                    stage: k,
                });
            }
            next.extend(split.children);
        }

        // properties of the new pieces with n = k
        let mut pieces_valid = true;
        let mut piece_size = true;
        let mut piece_pointwise = true;
        let mut env_sum = BigRational::zero();
        let mut holder = 0.0;
        let kth = alpha_pow_p(k)?;
        let pointwise_c = four.clone() * T::from_i64(k as i64) * threshold.clone();
        for piece in &next {
            let mu = piece.support.measure(m);
            env_sum += &mu;
            let band = piece.support.band();
            pieces_valid &= piece.values.support().iter().all(|&x| band.contains(tree, x));
            let integral = m.integral(&piece.values)?;
            pieces_valid &= if T::EXACT {
                integral.is_zero()
            } else {
                integral.to_f64().abs() <= 1e-9 * m.lp_norm(&piece.values, Exponent::ONE)?.max(1e-300)
            };
            let lp = m.lp_norm_pow(&piece.values, p)?;
            piece_size &= lp.certified_le(&(T::from_rational(&mu) * piece_const.clone() * kth.clone()));
            for x in band.vertices_clipped(tree) {
                let excess = Scalar::abs(&piece.values[x]) - b_abs[x].clone();
                piece_pointwise &= le_times_root(&excess, &pointwise_c, six_q, p);
            }
            let mu_f = mu.to_f64();
            holder += mu_f.powf(1.0 - 1.0 / pv) * lp.to_f64().powf(1.0 / pv);
        }
        // 4^{n+1} [2^{p−1}6q(1+4^p)]^n α^{−np} ‖b‖_p^p
        let env_rhs = four.powi(k + 1) * piece_const.powi(k) * b_lp.clone() / kth.clone();
        let envelope_mass = T::from_rational(&env_sum).certified_le(&env_rhs);

        let mut sum = TreeFunction::<T>::zeros(tree.len());
        for t in &terms {
            sum.add_assign(&t.atom.values.scale(&(t.coefficient.clone() * scale_t.clone())));
        }
        let mut residual = TreeFunction::<T>::zeros(tree.len());
        for piece in &next {
            residual.add_assign(&piece.values);
        }
        sum.add_assign(&residual);
        let reconstruction = if T::EXACT {
            sum == b
        } else {
            let mut d = sum.clone();
            d.sub_assign(&b);
            d.sup_norm().to_f64() <= 1e-9 * b.sup_norm().to_f64().max(1e-300)
        };
        let residual_l1 = m.lp_norm(&residual, Exponent::ONE)?;
        let kf = k as f64;
        let closed_form = 4f64.powf(kf + 1.0)
            * piece_const.to_f64().powf(kf)
            * alpha.to_f64().powf(-kf * pv)
            * b_lp.to_f64()
            * piece_const.to_f64().powf(1.0 / pv)
            * alpha.to_f64().powf(kf);
        let scale_f = scale.to_f64();
        stages.push(StageReport {
            stage: k,
            pieces_in,
            atoms,
            pieces_out: next.len(),
            mean_bound: report_mean,
            good_part_bound: good_bound,
            coefficient_bound: coeff_bound,
            atoms_valid,
            pieces_valid,
            piece_size,
            piece_pointwise,
            envelope_mass,
            reconstruction,
            residual_l1: residual_l1 / scale_f,
            residual_holder: holder / scale_f,
            residual_bound: closed_form / scale_f,
        });
        pending = next;
        if residual_l1 / scale_f < opts.tolerance {
            break;
        }
    }

    let residual = pending
        .into_iter()
        .filter(|piece| !piece.values.is_zero())
        .map(|piece| Piece {
            support: piece.support,
            values: piece.values.scale(&(T::one() / scale_t.clone())),
        })
        .collect();
    Ok(AtomicDecomposition {
        terms,
        residual,
        depth,
        proof_constant: proof_constant(q, p, alpha.to_f64()),
        alpha,
        p,
        scale,
        stages,
    })
}

/// Recursive decomposition of a `(1,p)`-atom into `(1,∞)`-atoms.
pub fn atomic_decompose<T: Scalar>(
    a: &Atom<T>,
    m: &WeightedMeasure,
    opts: &DecomposeOptions<T>,
) -> Result<AtomicDecomposition<T>> {
    let check = validate_atom(a, m)?;
    if !check.mean_zero {
        return Err(Error::NonZeroMean);
    }
    if !check.supported {
        return Err(Error::SupportNotContained(a.support.record(m.tree()).root_word));
    }
    if !check.size {
        return Err(Error::InvalidParameter("atom exceeds its size bound".into()));
    }
    decompose_function(&a.values, &a.support, a.p, m, opts)
}

/// Smallest-measure Calderón–Zygmund set whose in-truncation part holds `set`.
///
/// Sets leaving the truncation are allowed; ties go to the canonical order.
pub fn smallest_cz_set(tree: &Tree, m: &WeightedMeasure, set: &[VertexId]) -> Option<CzSet> {
    if set.is_empty() {
        return None;
    }
    let top = set.iter().map(|&x| tree.depth(x)).min()?;
    let bottom = set.iter().map(|&x| tree.depth(x)).max()?;
    let mut best: Option<(BigRational, CzSet)> = None;
    let anchor = set[0];
    let mut consider = |s: CzSet| {
        if set.iter().all(|&x| s.contains(tree, x)) {
            let mu = s.measure(m);
            if best.as_ref().is_none_or(|(b, _)| mu < *b) {
                best = Some((mu, s));
            }
        }
    };
    if set.iter().all(|&x| x == anchor) {
        consider(CzSet::single(anchor));
    }
    for up in 1..=tree.depth(anchor) {
        let root = tree.ancestor(anchor, up).expect("depth");
        let d = tree.depth(root);
        if d >= top {
            continue;
        }
        let (lo, hi) = (top - d, bottom - d);
        // ⌈h/2⌉ ≤ lo and 4h > hi
        let h_min = hi / 4 + 1;
        let h_max = 2 * lo;
        for h in h_min..=h_max {
            consider(CzSet::new(root, h).expect("h ≥ 1"));
        }
    }
    best.map(|(_, s)| s)
}

/// Mean-zero pieces of `f`, each supported in a Calderón–Zygmund set.
///
/// A piece that fits in no set is split along the children of its top vertex
/// `v`: every child subtree keeps its own values minus its mass placed on the
/// child, and the child masses are balanced against `v` by a piece supported
/// in `{v} ∪ children(v)`. At the apex that balancing piece lives on the
/// children alone, which requires `f(apex) = 0`.
pub fn split_into_cz_pieces<T: Scalar>(
    f: &TreeFunction<T>,
    m: &WeightedMeasure,
) -> Result<Vec<(CzSet, TreeFunction<T>)>> {
    let tree = m.tree();
    let mut out = Vec::new();
    let mut stack = vec![(tree.apex(), f.clone())];
    while let Some((v, g)) = stack.pop() {
        let support = g.support();
        if support.is_empty() {
            continue;
        }
        if let Some(s) = smallest_cz_set(tree, m, &support) {
            out.push((s, g));
            continue;
        }
        if v == tree.apex() && !g[v].is_zero() {
            return Err(Error::InvalidParameter(
                "a mean-zero function with mass at the apex has no atomic decomposition inside the cone".into(),
            ));
        }
        let wv = T::from_rational(m.weight(v));
        let mut balance = TreeFunction::zeros(g.len());
        let mut total = T::zero();
        for c in tree.children(v) {
            let wc = T::from_rational(m.weight(c));
            let mut sub = TreeFunction::zeros(g.len());
            let mut mass = T::zero();
            let depth_c = tree.depth(c);
            for d in 0..=tree.room(c) {
                let r = tree.descendant_range(c, d).expect("room");
                let w = T::from_rational(m.depth_weight(depth_c + d));
                let mut level = T::zero();
                for i in r {
                    let x = VertexId(i as u32);
                    sub[x] = g[x].clone();
                    level += &g[x];
                }
                mass += level * w;
            }
            let avg = mass.clone() / wc;
            sub[c] -= avg.clone();
            balance[c] = avg;
            total += mass;
            stack.push((c, sub));
        }
        if v != tree.apex() {
            balance[v] = -(total / wv);
        }
        stack.push((v, balance));
    }
    out.sort_by_key(|(s, _)| (s.root, s.degenerate, s.h));
    Ok(out)
}

/// Upper bound for `‖f‖_{H¹}` and how it was obtained.
#[derive(Debug, Clone, Serialize)]
pub struct H1Bound {
    pub bound: f64,
    /// Sum of emitted coefficients.
    pub coefficient_sum: f64,
    /// `∑ ‖f_j‖_∞ μ(R̃_j)` over residual pieces.
    pub residual_bound: f64,
    pub pieces: usize,
    pub proof_constant: f64,
    pub certified: bool,
}

/// Largest rational `s` (up to `2^{-40}`) with `s^p ‖f‖_p^p ≤ μ`.
pub(crate) fn atom_scale<T: Scalar>(lp_pow: &T, mu: &BigRational, p: Exponent) -> T {
    let guess = (mu.to_f64() / lp_pow.to_f64()).powf(1.0 / p.value());
    let mut s = T::from_rational(&rational_below(guess * (1.0 - 1e-12)));
    let target = T::from_rational(mu);
    let check = |s: &T| -> bool {
        match p.as_integer() {
            Some(n) => (s.powi(n) * lp_pow.clone()) <= target,
            None => s.to_f64().powf(p.value()) * lp_pow.to_f64() <= target.to_f64(),
        }
    };
    while !check(&s) {
        s = s * T::from_ratio(1, 2);
    }
    s
}

/// `H¹` bound of one mean-zero function supported in `support`.
pub fn h1_bound_on<T: Scalar>(
    f: &TreeFunction<T>,
    support: &CzSet,
    p: Exponent,
    m: &WeightedMeasure,
    opts: &DecomposeOptions<T>,
) -> Result<H1Bound> {
    if f.is_zero() {
        return Ok(H1Bound {
            bound: 0.0,
            coefficient_sum: 0.0,
            residual_bound: 0.0,
            pieces: 0,
            proof_constant: 0.0,
            certified: true,
        });
    }
    let mu = support.measure(m);
    let lp = m.lp_norm_pow(f, p)?;
    // s f / μ(S) is a (1,p)-atom
    let s = atom_scale(&lp, &mu, p);
    let b = f.scale(&s);
    let s_f = s.to_f64();
    let summarize = |dec: &AtomicDecomposition<T>| {
        let coefficient_sum = dec.coefficient_sum().to_f64() / s_f;
        let residual_bound = (dec.h1_bound(m) - dec.coefficient_sum().to_f64()) / s_f;
        H1Bound {
            bound: coefficient_sum + residual_bound,
            coefficient_sum,
            residual_bound,
            pieces: 1,
            proof_constant: dec.proof_constant,
            certified: dec.certified(),
        }
    };
    let mut best = summarize(&decompose_function(&b, support, p, m, opts)?);
    for alpha in &opts.refine_alphas {
        let alt = DecomposeOptions {
            alpha: Some(alpha.clone()),
            allow_subcritical: true,
            refine_alphas: Vec::new(),
            ..opts.clone()
        };
        let cand = summarize(&decompose_function(&b, support, p, m, &alt)?);
        if cand.certified && cand.bound < best.bound {
            best = cand;
        }
    }
    Ok(best)
}

/// Certified upper bound for `‖f‖_{H^{1,∞}}` of a mean-zero function.
pub fn h1_norm_upper_bound<T: Scalar>(
    f: &TreeFunction<T>,
    p: Exponent,
    m: &WeightedMeasure,
    opts: &DecomposeOptions<T>,
) -> Result<H1Bound> {
    m.check_len(f)?;
    let integral = m.integral(f)?;
    let zero_mean = if T::EXACT {
        integral.is_zero()
    } else {
        integral.to_f64().abs() <= 1e-9 * m.lp_norm(f, Exponent::ONE)?.max(1e-300)
    };
    if !zero_mean {
        return Err(Error::NonZeroMean);
    }
    let mut total = H1Bound {
        bound: 0.0,
        coefficient_sum: 0.0,
        residual_bound: 0.0,
        pieces: 0,
        proof_constant: 0.0,
        certified: true,
    };
    for (support, piece) in split_into_cz_pieces(f, m)? {
        let b = h1_bound_on(&piece, &support, p, m, opts)?;
        total.bound += b.bound;
        total.coefficient_sum += b.coefficient_sum;
        total.residual_bound += b.residual_bound;
        total.pieces += 1;
        total.proof_constant = b.proof_constant;
        total.certified &= b.certified;
    }
    Ok(total)
}

/// `H¹` bound of a mean-zero function with no decomposition: `‖f‖_∞ μ(S)`.
pub fn trivial_h1_bound<T: Scalar>(f: &TreeFunction<T>, support: &CzSet, m: &WeightedMeasure) -> f64 {
    f.sup_norm().to_f64() * support.measure(m).to_f64()
}
