//! Upper bounds for the K-functional of the couple `(H¹, L^{p₁})`.
//!
//! For every `λ` the function splits as `f = g^λ + b^λ`, where `b^λ = ∑ fᵢ`
//! collects mean-zero pieces built on the covering of `Ω_{λ^p}`. The bad
//! part is measured with certified `H¹` bounds from [`crate::hardy`], so
//! `min_λ (‖b^λ‖_{H¹} + t‖g^λ‖_{p₁})` bounds `K(t, f)` from above.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hardy::{h1_bound_on, DecomposeOptions, Piece};
use crate::maximal::cz_covering;
use crate::measure::{TreeFunction, WeightedMeasure};
use crate::scalar::{Exponent, Scalar};

/// Constants measured on one decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct KBounds {
    pub lambda: f64,
    /// `‖g^λ‖_∞ / λ`.
    pub good_sup_ratio: f64,
    /// `‖g^λ‖_{p₁}^{p₁} / (λ^{p₁−p} ‖f‖_p^p)` for finite `p₁`.
    pub good_lp1_ratio: Option<f64>,
    /// `∑ ‖fᵢ‖_{H¹} / (λ^{1−p} ‖f‖_p^p)`.
    pub bad_h1_ratio: f64,
    /// Largest `μ(Rᵢ)⁻¹ ∫_{Rᵢ} |hᵢ|^p / λ^p`.
    pub mean_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct KDecomposition<T> {
    pub lambda: T,
    pub good: TreeFunction<T>,
    pub bad_terms: Vec<Piece<T>>,
    /// Certified `H¹` bound of every bad piece.
    pub bad_h1: Vec<f64>,
    /// `g^λ + ∑ fᵢ = f`, exactly for exact scalars.
    pub reconstruction: bool,
    /// Every bad piece is mean zero and lies in its set.
    pub pieces_valid: bool,
    pub bounds: KBounds,
}

impl<T: Scalar> KDecomposition<T> {
    pub fn bad_h1_total(&self) -> f64 {
        self.bad_h1.iter().sum()
    }
}

/// `f = g^λ + b^λ` with `hᵢ = f χ_{Uᵢ}` and `fᵢ = hᵢ − μ(Rᵢ)⁻¹(∫hᵢ)χ_{Rᵢ}`.
pub fn k_decompose<T: Scalar>(
    f: &TreeFunction<T>,
    m: &WeightedMeasure,
    p: Exponent,
    p1: Exponent,
    lambda: &T,
    opts: &DecomposeOptions<T>,
) -> Result<KDecomposition<T>> {
    if *lambda <= T::zero() {
        return Err(Error::InvalidParameter("lambda must be positive".into()));
    }
    if p.is_infinite() || p.value() <= 1.0 || p1 <= p {
        return Err(Error::InvalidParameter(format!("need 1 < p < p1, got p = {p}, p1 = {p1}")));
    }
    let tree = m.tree();
    let cov = cz_covering(f, m, p, lambda, None)?;
    let mut good = f.clone();
    let mut bad_terms = Vec::with_capacity(cov.selected.len());
    let mut taken = vec![false; tree.len()];
    let mut mean_ratio: f64 = 0.0;
    let lambda_p = cov.lambda_p.to_f64();
    for (r, env) in cov.selected.iter().zip(&cov.envelopes) {
        let mut h = TreeFunction::zeros(tree.len());
        for x in env.vertices_clipped(tree) {
            if !std::mem::replace(&mut taken[x.index()], true) {
                h[x] = f[x].clone();
            }
        }
        let rv = r.vertices(tree)?;
        let mu_r = T::from_rational(&r.measure(m));
        mean_ratio = mean_ratio.max(m.set_lp_pow(&h, &rv, p)?.to_f64() / mu_r.to_f64() / lambda_p);
        let avg = m.integral(&h)? / mu_r;
        let mut piece = h;
        for &x in &rv {
            piece[x] -= avg.clone();
        }
        good.sub_assign(&piece);
        bad_terms.push(Piece {
            support: *env,
            values: piece,
        });
    }

    let mut sum = good.clone();
    let mut pieces_valid = true;
    let mut bad_h1 = Vec::with_capacity(bad_terms.len());
    for piece in &bad_terms {
        sum.add_assign(&piece.values);
        let band = piece.support.band();
        pieces_valid &= piece.values.support().iter().all(|&x| band.contains(tree, x));
        let integral = m.integral(&piece.values)?;
        pieces_valid &= if T::EXACT {
            integral.is_zero()
        } else {
            integral.to_f64().abs() <= 1e-9 * m.lp_norm(&piece.values, Exponent::ONE)?.max(1e-300)
        };
        bad_h1.push(h1_bound_on(&piece.values, &piece.support, p, m, opts)?.bound);
    }
    let reconstruction = if T::EXACT {
        sum == *f
    } else {
        let mut d = sum;
        d.sub_assign(f);
        d.sup_norm().to_f64() <= 1e-9 * f.sup_norm().to_f64().max(1e-300)
    };

    let lam = lambda.to_f64();
    let lp_pow = cov.lp_pow.to_f64();
    let pv = p.value();
    let good_lp1_ratio = if p1.is_infinite() || lp_pow == 0.0 {
        None
    } else {
        let g = m.lp_norm(&good, p1)?.powf(p1.value());
        Some(g / (lam.powf(p1.value() - pv) * lp_pow))
    };
    let bad_total: f64 = bad_h1.iter().sum();
    let bounds = KBounds {
        lambda: lam,
        good_sup_ratio: good.sup_norm().to_f64() / lam,
        good_lp1_ratio,
        bad_h1_ratio: if lp_pow == 0.0 { 0.0 } else { bad_total / (lam.powf(1.0 - pv) * lp_pow) },
        mean_ratio,
    };
    Ok(KDecomposition {
        lambda: lambda.clone(),
        good,
        bad_terms,
        bad_h1,
        reconstruction,
        pieces_valid,
        bounds,
    })
}

/// Geometric grid with `per_decade` points per decade covering `[lo, hi]`.
pub fn geometric_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    if !(lo > 0.0 && hi >= lo) {
        return Vec::new();
    }
    let steps = ((hi / lo).log10() * per_decade as f64).ceil() as usize;
    (0..=steps)
        .map(|i| lo * 10f64.powf(i as f64 / per_decade as f64))
        .collect()
}

/// The default `λ` grid: 32 points per decade over `[‖f‖_p / μ(𝒱), 2‖f‖_∞]`.
pub fn default_lambda_grid<T: Scalar>(f: &TreeFunction<T>, m: &WeightedMeasure, p: Exponent) -> Result<Vec<f64>> {
    let lp = m.lp_norm(f, p)?;
    let sup = f.sup_norm().to_f64();
    // below the mean of |f|^p every covering is empty
    let floor = lp * m.total().to_f64().powf(-1.0 / p.value());
    Ok(geometric_grid(0.5 * floor.min(sup), 2.0 * sup, 32))
}

/// One grid point: `‖b^λ‖_{H¹}` bound and `‖g^λ‖_{p₁}`.
#[derive(Debug, Clone, Serialize)]
pub struct KSample {
    pub lambda: f64,
    pub h1: f64,
    pub good: f64,
    pub good_sup_ratio: f64,
}

/// Decompositions of `f` over a `λ` grid; evaluates the K-functional bound at any `t`.
#[derive(Debug, Clone, Serialize)]
pub struct KProfile {
    pub p: Exponent,
    pub p1: Exponent,
    pub lp_norm: f64,
    pub samples: Vec<KSample>,
}

impl KProfile {
    pub fn new<T: Scalar>(
        f: &TreeFunction<T>,
        m: &WeightedMeasure,
        p: Exponent,
        p1: Exponent,
        grid: &[f64],
        opts: &DecomposeOptions<T>,
    ) -> Result<Self> {
        let lp_norm = m.lp_norm(f, p)?;
        let one = |lambda: f64| -> Result<KSample> {
            let l = T::from_rational(&crate::scalar::rational_below(lambda));
            let d = k_decompose(f, m, p, p1, &l, opts)?;
            Ok(KSample {
                lambda,
                h1: d.bad_h1_total(),
                good: m.lp_norm(&d.good, p1)?,
                good_sup_ratio: d.bounds.good_sup_ratio,
            })
        };
        #[cfg(feature = "parallel")]
        let samples = {
            use rayon::prelude::*;
            grid.par_iter().map(|&l| one(l)).collect::<Result<Vec<_>>>()?
        };
        #[cfg(not(feature = "parallel"))]
        let samples = grid.iter().map(|&l| one(l)).collect::<Result<Vec<_>>>()?;
        Ok(KProfile {
            p,
            p1,
            lp_norm,
            samples,
        })
    }

    /// `min_λ (‖b^λ‖_{H¹} + t ‖g^λ‖_{p₁})` and the minimizing `λ`.
    pub fn evaluate(&self, t: f64) -> (f64, f64) {
        self.samples
            .iter()
            .map(|s| (s.h1 + t * s.good, s.lambda))
            .fold((f64::INFINITY, 0.0), |best, x| if x.0 < best.0 { x } else { best })
    }
}

/// Upper bound for `K(t, f; H¹, L^{p₁})` over the given `λ` grid.
pub fn k_functional_upper<T: Scalar>(
    f: &TreeFunction<T>,
    m: &WeightedMeasure,
    p: Exponent,
    p1: Exponent,
    t: f64,
    lambda_grid: &[f64],
    opts: &DecomposeOptions<T>,
) -> Result<f64> {
    if lambda_grid.is_empty() {
        if f.is_zero() {
            return Ok(0.0);
        }
        return Err(Error::InvalidParameter("empty lambda grid".into()));
    }
    Ok(KProfile::new(f, m, p, p1, lambda_grid, opts)?.evaluate(t).0)
}

/// `θ` with `1/p = 1 − θ + θ/p₁`.
pub fn theta(p: Exponent, p1: Exponent) -> f64 {
    (1.0 - 1.0 / p.value()) / (1.0 - 1.0 / p1.value())
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Dyadic `t` values `2^lo, …, 2^hi`.
pub fn dyadic_ts(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(k)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct InterpolationReport {
    pub p: Exponent,
    pub p1: Exponent,
    pub theta: f64,
    pub lp_norm: f64,
    pub ts: Vec<f64>,
    pub k_bounds: Vec<f64>,
    pub minimizers: Vec<f64>,
    pub slope: f64,
    /// `sup_t t^{−θ} K(t) / ‖f‖_p`.
    pub theta_infinity_ratio: f64,
    /// Largest `‖g^λ‖_∞ / λ` over the grid.
    pub good_sup_constant: f64,
    pub nondecreasing: bool,
    pub concave: bool,
}

/// Slope of the K-bound over `ts`, and the `‖f‖_{θ,∞}` proxy.
pub fn interpolation_exponent_report<T: Scalar>(
    f: &TreeFunction<T>,
    m: &WeightedMeasure,
    p: Exponent,
    p1: Exponent,
    ts: &[f64],
    opts: &DecomposeOptions<T>,
) -> Result<InterpolationReport> {
    let th = theta(p, p1);
    if f.is_zero() {
        return Ok(InterpolationReport {
            p,
            p1,
            theta: th,
            lp_norm: 0.0,
            ts: ts.to_vec(),
            k_bounds: vec![0.0; ts.len()],
            minimizers: vec![0.0; ts.len()],
            slope: 0.0,
            theta_infinity_ratio: 0.0,
            good_sup_constant: 0.0,
            nondecreasing: true,
            concave: true,
        });
    }
    let grid = default_lambda_grid(f, m, p)?;
    let profile = KProfile::new(f, m, p, p1, &grid, opts)?;
    let (k_bounds, minimizers): (Vec<f64>, Vec<f64>) = ts.iter().map(|&t| profile.evaluate(t)).unzip();
    let slope = loglog_slope(ts, &k_bounds);
    let theta_infinity_ratio = ts
        .iter()
        .zip(&k_bounds)
        .map(|(t, k)| t.powf(-th) * k / profile.lp_norm)
        .fold(0.0, f64::max);
    let good_sup_constant = profile.samples.iter().map(|s| s.good_sup_ratio).fold(0.0, f64::max);
    let nondecreasing = k_bounds.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-12));
    // K is an infimum of affine functions of t: check midpoints
    let concave = ts.windows(2).all(|w| {
        let mid = profile.evaluate(0.5 * (w[0] + w[1])).0;
        let chord = 0.5 * (profile.evaluate(w[0]).0 + profile.evaluate(w[1]).0);
        mid >= chord * (1.0 - 1e-12)
    });
    Ok(InterpolationReport {
        p,
        p1,
        theta: th,
        lp_norm: profile.lp_norm,
        ts: ts.to_vec(),
        k_bounds,
        minimizers,
        slope,
        theta_infinity_ratio,
        good_sup_constant,
        nondecreasing,
        concave,
    })
}
