//! The distinguished Laplacian, its spectral calculus, the Riesz transform
//! and the Hörmander integral of their kernels.
//!
//! Operators are dense. An [`OperatorMatrix`] stores the kernel in the
//! measure convention `(Tf)(x) = Σ_y K(x,y) f(y) μ(y)`, or the conjugate
//! `D^{1/2} T D^{-1/2}` when `symmetrized` is set (`D = diag μ`).

use faer::{Mat, Side};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::CzSet;
use crate::hardy::Atom;
use crate::measure::{TreeFunction, WeightedMeasure};
use crate::scalar::rational_to_f64;
use crate::tree::{Tree, VertexId};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub entries: Mat<f64>,
    pub symmetrized: bool,
    weights: Vec<f64>,
}

impl OperatorMatrix {
    /// Wraps a kernel in the measure convention.
    pub fn from_kernel(entries: Mat<f64>, m: &WeightedMeasure) -> Result<Self> {
        let weights = m.vertex_weights::<f64>();
        if entries.nrows() != weights.len() || entries.ncols() != weights.len() {
            return Err(Error::LengthMismatch {
                expected: weights.len(),
                got: entries.nrows(),
            });
        }
        Ok(OperatorMatrix {
            entries,
            symmetrized: false,
            weights,
        })
    }

    /// Kernel of the plain matrix action `(Tf)(x) = Σ_y A(x,y) f(y)`.
    pub fn from_action(action: &Mat<f64>, m: &WeightedMeasure) -> Result<Self> {
        let w = m.vertex_weights::<f64>();
        let k = Mat::from_fn(action.nrows(), action.ncols(), |i, j| action[(i, j)] / w[j]);
        Self::from_kernel(k, m)
    }

    pub fn identity(m: &WeightedMeasure) -> Self {
        let n = m.tree().len();
        Self::from_action(&Mat::identity(n, n), m).expect("square")
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `K(x, y)` in the measure convention regardless of storage.
    pub fn kernel(&self, x: usize, y: usize) -> f64 {
        if self.symmetrized {
            self.entries[(x, y)] / (self.weights[x] * self.weights[y]).sqrt()
        } else {
            self.entries[(x, y)]
        }
    }

    pub fn to_kernel(&self) -> OperatorMatrix {
        if !self.symmetrized {
            return self.clone();
        }
        OperatorMatrix {
            entries: Mat::from_fn(self.dim(), self.dim(), |i, j| self.kernel(i, j)),
            symmetrized: false,
            weights: self.weights.clone(),
        }
    }

    /// `S(x,y) = μ(x)^{1/2} K(x,y) μ(y)^{1/2}`.
    pub fn to_symmetrized(&self) -> OperatorMatrix {
        if self.symmetrized {
            return self.clone();
        }
        let w = &self.weights;
        OperatorMatrix {
            entries: Mat::from_fn(self.dim(), self.dim(), |i, j| self.entries[(i, j)] * (w[i] * w[j]).sqrt()),
            symmetrized: true,
            weights: self.weights.clone(),
        }
    }

    /// The plain matrix `A(x,y) = K(x,y) μ(y)`.
    pub fn action(&self) -> Mat<f64> {
        Mat::from_fn(self.dim(), self.dim(), |i, j| self.kernel(i, j) * self.weights[j])
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                got: f.len(),
            });
        }
        let n = self.dim();
        let fw: Vec<f64> = (0..n).map(|y| f[y] * self.weights[y]).collect();
        Ok((0..n).map(|x| (0..n).map(|y| self.kernel(x, y) * fw[y]).sum()).collect())
    }

    pub fn is_finite(&self) -> bool {
        (0..self.dim()).all(|j| self.entries.col(j).iter().all(|v| v.is_finite()))
    }

    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> f64 {
        let (a, b) = (self.to_kernel(), other.to_kernel());
        let mut d: f64 = 0.0;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                d = d.max((a.entries[(i, j)] - b.entries[(i, j)]).abs());
            }
        }
        d
    }
}

/// `𝓛f(x) = f(x) − (2√q)^{-1} Σ_{y~x} q^{(ℓ(y)−ℓ(x))/2} f(y)`, with
/// neighbours outside the truncation dropped.
pub fn laplacian(m: &WeightedMeasure) -> OperatorMatrix {
    let tree = m.tree();
    let n = tree.len();
    let q = tree.q() as f64;
    let c = 1.0 / (2.0 * q.sqrt());
    let mut a = Mat::<f64>::identity(n, n);
    for x in tree.vertices().skip(1) {
        let parent = tree.parent(x).expect("non-apex");
        // ℓ(parent) = ℓ(x) + 1
        a[(x.index(), parent.index())] = -c * q.sqrt();
        a[(parent.index(), x.index())] = -c / q.sqrt();
    }
    OperatorMatrix::from_action(&a, m).expect("square")
}

/// Exact form of the symmetry `A(x,y)q^{ℓ(x)} = A(y,x)q^{ℓ(y)}`: with
/// `A(x,y) = c q^{(ℓ(y)−ℓ(x))/2}` both sides are `c q^{(ℓ(x)+ℓ(y))/2}`, so the
/// doubled exponents must agree on every edge.
pub fn laplacian_symmetry_check(tree: &Tree) -> bool {
    tree.vertices().skip(1).all(|x| {
        let y = tree.parent(x).expect("non-apex");
        let (lx, ly) = (tree.level(x), tree.level(y));
        (ly - lx) + 2 * lx == (lx - ly) + 2 * ly
    })
}

/// `⟨f, g⟩_μ`.
pub fn inner_product(f: &[f64], g: &[f64], m: &WeightedMeasure) -> f64 {
    let w = m.vertex_weights::<f64>();
    f.iter().zip(g).zip(&w).map(|((a, b), w)| a * b * w).sum()
}

/// `|⟨𝓛f,g⟩ − ⟨f,𝓛g⟩| / (‖f‖₂‖g‖₂)`.
pub fn self_adjointness_residual(op: &OperatorMatrix, f: &[f64], g: &[f64], m: &WeightedMeasure) -> Result<f64> {
    let lf = op.apply(f)?;
    let lg = op.apply(g)?;
    let lhs = inner_product(&lf, g, m);
    let rhs = inner_product(f, &lg, m);
    let nf = inner_product(f, f, m).sqrt();
    let ng = inner_product(g, g, m).sqrt();
    Ok((lhs - rhs).abs() / (nf * ng))
}

/// Extreme eigenvalues of the symmetrized truncated Laplacian in closed form:
/// the adjacency of a rooted tree with `q` children per vertex and `D+1` levels
/// has top eigenvalue `2√q cos(π/(D+2))`, and the spectrum is symmetric.
pub fn extreme_eigenvalues_formula(depth: u32) -> (f64, f64) {
    let c = (std::f64::consts::PI / (depth as f64 + 2.0)).cos();
    (1.0 - c, 1.0 + c)
}

/// Eigendecomposition `S = V Λ Vᵀ` of the symmetrized operator.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Nondecreasing.
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
    weights: Vec<f64>,
}

impl Spectrum {
    pub fn new(op: &OperatorMatrix) -> Result<Self> {
        let s = op.to_symmetrized();
        let evd = s
            .entries
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let values: Vec<f64> = evd.S().column_vector().iter().copied().collect();
        Ok(Spectrum {
            values,
            vectors: evd.U().to_owned(),
            weights: op.weights.clone(),
        })
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("nonempty")
    }

    /// Distance of the spectrum from `{0, 2}`.
    pub fn margin(&self) -> f64 {
        self.min().min(2.0 - self.max())
    }

    /// `D^{-1/2} v_k`, the `k`-th eigenfunction of the unsymmetrized operator.
    pub fn eigenfunction(&self, k: usize) -> Vec<f64> {
        (0..self.weights.len())
            .map(|i| self.vectors[(i, k)] / self.weights[i].sqrt())
            .collect()
    }

    /// `M(𝓛) = D^{-1/2} V M(Λ) Vᵀ D^{1/2}`, returned as a kernel.
    pub fn multiplier(&self, mult: &Multiplier) -> Result<OperatorMatrix> {
        let mv: Vec<f64> = self.values.iter().map(|&l| mult.eval(l)).collect();
        if let Some(bad) = mv.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "multiplier {} is not finite at eigenvalue {}",
                mult.name(),
                self.values[bad]
            )));
        }
        let n = self.values.len();
        let scaled = Mat::from_fn(n, n, |i, k| self.vectors[(i, k)] * mv[k]);
        let s = &scaled * self.vectors.transpose();
        Ok(OperatorMatrix {
            entries: s,
            symmetrized: true,
            weights: self.weights.clone(),
        }
        .to_kernel())
    }
}

/// Real part or imaginary part of a complex multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Re,
    Im,
}

/// A scalar function of the spectral variable.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Multiplier {
    One,
    Zero,
    Identity,
    /// `e^{−tλ}`.
    Heat { t: f64 },
    /// `(1 − λ/2)^m`.
    Polynomial { m: u32 },
    /// Indicator of `[a, b)`.
    Cutoff { a: f64, b: f64 },
    /// Real or imaginary part of `λ^{is}`.
    ImaginaryPower { s: f64, part: Part },
    /// `λ^r`; unbounded near 0 when `r < 0`.
    Power { r: f64 },
    Product(Vec<Multiplier>),
}

impl Multiplier {
    pub fn eval(&self, l: f64) -> f64 {
        match self {
            Multiplier::One => 1.0,
            Multiplier::Zero => 0.0,
            Multiplier::Identity => l,
            Multiplier::Heat { t } => (-t * l).exp(),
            Multiplier::Polynomial { m } => (1.0 - l / 2.0).powi(*m as i32),
            Multiplier::Cutoff { a, b } => {
                if *a <= l && l < *b {
                    1.0
                } else {
                    0.0
                }
            }
            Multiplier::ImaginaryPower { s, part } => {
                let phase = s * l.ln();
                match part {
                    Part::Re => phase.cos(),
                    Part::Im => phase.sin(),
                }
            }
            Multiplier::Power { r } => l.powf(*r),
            Multiplier::Product(ms) => ms.iter().map(|m| m.eval(l)).product(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Multiplier::One => "one".into(),
            Multiplier::Zero => "zero".into(),
            Multiplier::Identity => "identity".into(),
            Multiplier::Heat { t } => format!("heat(t={t})"),
            Multiplier::Polynomial { m } => format!("poly(m={m})"),
            Multiplier::Cutoff { a, b } => format!("cutoff[{a},{b})"),
            Multiplier::ImaginaryPower { s, part } => format!("{part:?}(lambda^(i{s}))").to_lowercase(),
            Multiplier::Power { r } => format!("lambda^{r}"),
            Multiplier::Product(ms) => ms.iter().map(|m| m.name()).collect::<Vec<_>>().join("*"),
        }
    }

    /// Bounded on `[0, 2]`.
    pub fn is_bounded(&self) -> bool {
        match self {
            Multiplier::Power { r } => *r >= 0.0,
            Multiplier::Product(ms) => ms.iter().all(|m| m.is_bounded()),
            _ => true,
        }
    }
}

/// Builds the operator for `mult` from a fresh eigendecomposition.
pub fn spectral_multiplier(op: &OperatorMatrix, mult: &Multiplier) -> Result<OperatorMatrix> {
    Spectrum::new(op)?.multiplier(mult)
}

/// `Σ_{k ≤ terms} (−t𝓛)^k / k!` by repeated products with the action matrix.
pub fn heat_taylor(op: &OperatorMatrix, t: f64, terms: u32) -> OperatorMatrix {
    let a = op.action();
    let n = a.nrows();
    let mut term = Mat::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=terms {
        term = &term * &a * (-t / k as f64);
        sum += &term;
    }
    OperatorMatrix {
        entries: Mat::from_fn(n, n, |i, j| sum[(i, j)] / op.weights[j]),
        symmetrized: false,
        weights: op.weights.clone(),
    }
}

/// `(∇f)(x) = Σ_{y~x} |f(y) − f(x)|` over neighbours in the truncation.
pub fn gradient(f: &[f64], tree: &Tree) -> Vec<f64> {
    let mut g = vec![0.0; f.len()];
    for x in tree.vertices().skip(1) {
        let y = tree.parent(x).expect("non-apex");
        let d = (f[x.index()] - f[y.index()]).abs();
        g[x.index()] += d;
        g[y.index()] += d;
    }
    g
}

/// A singular integral built from a kernel: either `T` itself or `∇T`.
#[derive(Debug, Clone)]
pub enum SingularIntegral {
    Scalar(OperatorMatrix),
    /// `f ↦ ∇(T f)`; with `T = 𝓛^{-1/2}` this is the Riesz transform.
    Gradient(OperatorMatrix),
}

impl SingularIntegral {
    pub fn kernel(&self) -> &OperatorMatrix {
        match self {
            SingularIntegral::Scalar(k) | SingularIntegral::Gradient(k) => k,
        }
    }

    /// Pointwise size `|Tf(x)|`, vector `ℓ¹` size for the gradient form.
    pub fn apply_abs(&self, f: &[f64], tree: &Tree) -> Result<Vec<f64>> {
        let u = self.kernel().apply(f)?;
        Ok(self.size(&u, tree))
    }

    fn size(&self, u: &[f64], tree: &Tree) -> Vec<f64> {
        match self {
            SingularIntegral::Scalar(_) => u.iter().map(|v| v.abs()).collect(),
            SingularIntegral::Gradient(_) => gradient(u, tree),
        }
    }

    /// `∫_{(R̃*)^c} |K(x,y) − K(x,z)| dμ(x)`, with `|·|` the size above.
    pub fn hormander_integral(&self, set: &CzSet, y: VertexId, z: VertexId, tree: &Tree) -> Result<f64> {
        if !set.contains(tree, y) || !set.contains(tree, z) {
            return Err(Error::SupportNotContained(format!("{}", set.record(tree).root_word)));
        }
        let ctx = HormanderContext::new(set, tree)?;
        Ok(self.hormander_with(&ctx, y.index(), z.index()))
    }

    fn hormander_with(&self, ctx: &HormanderContext, y: usize, z: usize) -> f64 {
        if y == z {
            return 0.0;
        }
        let k = self.kernel();
        let w = k.weights();
        match self {
            SingularIntegral::Scalar(_) => ctx
                .outside
                .iter()
                .map(|&x| (k.kernel(x, y) - k.kernel(x, z)).abs() * w[x])
                .sum(),
            SingularIntegral::Gradient(_) => ctx
                .outside
                .iter()
                .zip(&ctx.neighbors)
                .map(|(&x, nb)| {
                    let dx = k.kernel(x, y) - k.kernel(x, z);
                    let g: f64 = nb.iter().map(|&n| (k.kernel(n, y) - k.kernel(n, z) - dx).abs()).sum();
                    g * w[x]
                })
                .sum(),
        }
    }
}

struct HormanderContext {
    inside: Vec<usize>,
    outside: Vec<usize>,
    /// Truncation neighbours of each vertex in `outside`.
    neighbors: Vec<Vec<usize>>,
}

impl HormanderContext {
    fn new(set: &CzSet, tree: &Tree) -> Result<Self> {
        let dilate = set.dilate();
        let band = dilate.band();
        if !band.fits(tree) {
            return Err(Error::Containment {
                root: tree.label(band.root),
                lo: band.lo,
                hi: band.hi,
            });
        }
        let inside = set.vertices(tree)?.into_iter().map(|v| v.index()).collect();
        let outside = tree
            .vertices()
            .filter(|&v| !dilate.contains(tree, v))
            .map(|v| v.index())
            .collect();
        Ok(HormanderContext::with_outside(inside, outside, tree))
    }

    fn with_outside(inside: Vec<usize>, outside: Vec<usize>, tree: &Tree) -> Self {
        let neighbors = outside
            .iter()
            .map(|&x| {
                let v = VertexId(x as u32);
                tree.parent(v).into_iter().chain(tree.children(v)).map(|n| n.index()).collect()
            })
            .collect();
        HormanderContext {
            inside,
            outside,
            neighbors,
        }
    }
}

/// Sets whose dilate lies inside the truncation.
pub fn interior_cz_sets(tree: &Tree) -> Vec<CzSet> {
    CzSet::all_in(tree).into_iter().filter(|s| s.dilate().fits(tree)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct HormanderSweep {
    pub sets: usize,
    pub pairs: u64,
    pub sup: f64,
    /// `(root, h, y, z)` attaining the sup.
    pub argmax: Option<(String, u32, String, String)>,
}

/// Exhaustive sup of the Hörmander integral over `sets` and all pairs in each.
pub fn hormander_sweep(op: &SingularIntegral, sets: &[CzSet], tree: &Tree) -> Result<HormanderSweep> {
    let one = |set: &CzSet| -> Result<(u64, f64, (usize, usize))> {
        let ctx = HormanderContext::new(set, tree)?;
        let mut best = (0.0, (0, 0));
        let mut pairs = 0u64;
        for (i, &y) in ctx.inside.iter().enumerate() {
            for &z in &ctx.inside[i + 1..] {
                pairs += 1;
                let v = op.hormander_with(&ctx, y, z);
                if v > best.0 {
                    best = (v, (y, z));
                }
            }
        }
        Ok((pairs, best.0, best.1))
    };
    #[cfg(feature = "parallel")]
    let results: Vec<_> = sets.par_iter().map(one).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = sets.iter().map(one).collect::<Result<_>>()?;

    let mut out = HormanderSweep {
        sets: sets.len(),
        pairs: 0,
        sup: 0.0,
        argmax: None,
    };
    for (set, (pairs, v, (y, z))) in sets.iter().zip(results) {
        out.pairs += pairs;
        if v > out.sup {
            out.sup = v;
            out.argmax = Some((
                tree.label(set.root),
                set.h,
                tree.label(VertexId(y as u32)),
                tree.label(VertexId(z as u32)),
            ));
        }
    }
    Ok(out)
}

/// `‖Ta‖₁` for one atom, with the two-piece split around `R̃*`.
#[derive(Debug, Clone, Serialize)]
pub struct AtomImage {
    pub root: String,
    pub h: u32,
    pub l1: f64,
    /// `∫_{R̃*} |Ta| dμ`.
    pub near: f64,
    /// `‖Ta‖₂ μ(R̃*)^{1/2}`.
    pub near_bound: f64,
    /// `∫_{(R̃*)^c} |Ta| dμ`.
    pub tail: f64,
    /// `‖a‖₁ sup_{y ∈ supp a} ∫_{(R̃*)^c} |K(x,y) − K(x,x_R)| dμ(x)`.
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct H1L1Report {
    pub atoms: usize,
    pub max_ratio: f64,
    pub argmax: Option<usize>,
    pub images: Vec<AtomImage>,
}

/// The base point `x_R`: first vertex of the trapezoid under the atom's set.
fn base_point(set: &CzSet, tree: &Tree) -> Result<VertexId> {
    Ok(set.trapezoid().vertices(tree)?[0])
}

/// Max of `‖Ta‖₁` over the atoms. Dilates are clipped to the truncation.
pub fn h1_to_l1_ratio(op: &SingularIntegral, atoms: &[Atom<f64>], m: &WeightedMeasure) -> Result<H1L1Report> {
    let tree = m.tree();
    let w = m.vertex_weights::<f64>();
    let one = |a: &Atom<f64>| -> Result<AtomImage> {
        m.check_len(&a.values)?;
        let size = op.apply_abs(&a.values.values, tree)?;
        let dilate = a.support.dilate();
        let near_set = dilate.band().vertices_clipped(tree);
        let mut in_near = vec![false; tree.len()];
        for v in &near_set {
            in_near[v.index()] = true;
        }
        let (mut near, mut tail, mut l2) = (0.0, 0.0, 0.0);
        for x in 0..tree.len() {
            let v = size[x] * w[x];
            if in_near[x] {
                near += v;
            } else {
                tail += v;
            }
            l2 += size[x] * size[x] * w[x];
        }
        let mu_near = rational_to_f64(&dilate.band().clipped_measure(m));
        let base = base_point(&a.support, tree)?.index();
        let outside: Vec<usize> = (0..tree.len()).filter(|&x| !in_near[x]).collect();
        let ctx = HormanderContext::with_outside(Vec::new(), outside, tree);
        let mut sup_h: f64 = 0.0;
        let mut a_l1 = 0.0;
        for y in a.values.support() {
            sup_h = sup_h.max(op.hormander_with(&ctx, y.index(), base));
            a_l1 += a.values[y].abs() * w[y.index()];
        }
        Ok(AtomImage {
            root: tree.label(a.support.root),
            h: a.support.h,
            l1: near + tail,
            near,
            near_bound: l2.sqrt() * mu_near.sqrt(),
            tail,
            tail_bound: a_l1 * sup_h,
        })
    };
    #[cfg(feature = "parallel")]
    let images: Vec<AtomImage> = atoms.par_iter().map(one).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let images: Vec<AtomImage> = atoms.iter().map(one).collect::<Result<_>>()?;
    let mut out = H1L1Report {
        atoms: atoms.len(),
        max_ratio: 0.0,
        argmax: None,
        images: Vec::new(),
    };
    for (i, im) in images.iter().enumerate() {
        if im.l1 > out.max_ratio || out.argmax.is_none() {
            out.max_ratio = im.l1;
            out.argmax = Some(i);
        }
    }
    out.images = images;
    Ok(out)
}

/// `f ↦ ∇(𝓛^{-1/2} f)`.
pub fn riesz_transform(spectrum: &Spectrum) -> Result<SingularIntegral> {
    Ok(SingularIntegral::Gradient(spectrum.multiplier(&Multiplier::Power { r: -0.5 })?))
}

/// `∇(𝓛^{-1/2} f)` for one function.
pub fn riesz_apply(spectrum: &Spectrum, f: &TreeFunction<f64>, tree: &Tree) -> Result<Vec<f64>> {
    let inv = spectrum.multiplier(&Multiplier::Power { r: -0.5 })?;
    Ok(gradient(&inv.apply(&f.values)?, tree))
}

#[derive(Debug, Clone, Serialize)]
pub struct MikhlinOptions {
    pub samples: usize,
    /// Dyadic exponents of `t`.
    pub t_min_log2: i32,
    pub t_max_log2: i32,
}

impl Default for MikhlinOptions {
    fn default() -> Self {
        MikhlinOptions {
            samples: 4096,
            t_min_log2: -6,
            t_max_log2: 6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MikhlinReport {
    pub s: f64,
    pub samples: usize,
    /// `s ≤ 3/2` is below the smoothness the multiplier condition asks for.
    pub outside_hypothesis: bool,
    pub per_t: Vec<(f64, f64)>,
    pub max: f64,
}

/// Smooth bump on `(1/2, 4)`.
pub fn bump(l: f64) -> f64 {
    if l <= 0.5 || l >= 4.0 {
        0.0
    } else {
        (-1.0 / ((l - 0.5) * (4.0 - l))).exp()
    }
}

/// Discrete `W^s_2` norm of `(D_t M) φ` for dyadic `t`, maximized over `t`.
///
/// `im` is the imaginary part when the multiplier is complex. The signal is
/// sampled on `[1/2, 4)` and weighted by `(1+|ξ|²)^{s/2}` in frequency.
pub fn mikhlin_hormander_estimate(
    re: &Multiplier,
    im: Option<&Multiplier>,
    s: f64,
    opts: &MikhlinOptions,
) -> MikhlinReport {
    let n = opts.samples;
    let len = 3.5;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut per_t = Vec::new();
    for k in opts.t_min_log2..=opts.t_max_log2 {
        let t = 2f64.powi(k);
        let mut buf: Vec<Complex<f64>> = (0..n)
            .map(|j| {
                let l = 0.5 + len * j as f64 / n as f64;
                let phi = bump(l);
                Complex::new(re.eval(t * l) * phi, im.map_or(0.0, |m| m.eval(t * l)) * phi)
            })
            .collect();
        fft.process(&mut buf);
        let mut norm2 = 0.0;
        for (j, c) in buf.iter().enumerate() {
            let freq = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            let xi = 2.0 * std::f64::consts::PI * freq / len;
            norm2 += (1.0 + xi * xi).powf(s) * c.norm_sqr();
        }
        per_t.push((t, (norm2 * len / (n as f64 * n as f64)).sqrt()));
    }
    let max = per_t.iter().map(|p| p.1).fold(0.0, f64::max);
    MikhlinReport {
        s,
        samples: n,
        outside_hypothesis: s <= 1.5,
        per_t,
        max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::TreeConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn measure(q: u32, d: u32) -> WeightedMeasure {
        WeightedMeasure::new(Tree::new(TreeConfig::new(q, d)).unwrap())
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn symmetrized_laplacian_is_identity_minus_scaled_adjacency() {
        let m = measure(3, 4);
        let tree = m.tree();
        let s = laplacian(&m).to_symmetrized();
        let c = 1.0 / (2.0 * 3f64.sqrt());
        for x in tree.vertices() {
            for y in tree.vertices() {
                let adjacent = tree.distance(x, y).unwrap() == 1;
                let want = if x == y {
                    1.0
                } else if adjacent {
                    -c
                } else {
                    0.0
                };
                assert!((s.entries[(x.index(), y.index())] - want).abs() < 1e-14);
            }
        }
        assert!(laplacian_symmetry_check(tree));
    }

    #[test]
    fn laplacian_is_self_adjoint() {
        let m = measure(2, 6);
        let l = laplacian(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let f = random_vec(l.dim(), &mut rng);
            let g = random_vec(l.dim(), &mut rng);
            assert!(self_adjointness_residual(&l, &f, &g, &m).unwrap() < 1e-10);
        }
    }

    #[test]
    fn spectrum_extremes_match_the_path_formula() {
        for (q, d) in [(2, 5), (3, 4)] {
            let spec = Spectrum::new(&laplacian(&measure(q, d))).unwrap();
            let (lo, hi) = extreme_eigenvalues_formula(d);
            assert!((spec.min() - lo).abs() < 1e-9, "{} {lo}", spec.min());
            assert!((spec.max() - hi).abs() < 1e-9);
        }
    }

    #[test]
    fn calculus_reproduces_identity_and_laplacian() {
        let m = measure(2, 5);
        let l = laplacian(&m);
        let spec = Spectrum::new(&l).unwrap();
        let id = spec.multiplier(&Multiplier::One).unwrap();
        assert!(id.max_abs_diff(&OperatorMatrix::identity(&m)) < 1e-10);
        assert!(spec.multiplier(&Multiplier::Identity).unwrap().max_abs_diff(&l) < 1e-10);
    }

    #[test]
    fn heat_matches_taylor_series() {
        let m = measure(2, 5);
        let l = laplacian(&m);
        let heat = spectral_multiplier(&l, &Multiplier::Heat { t: 1.0 }).unwrap();
        let taylor = heat_taylor(&l, 1.0, 30);
        assert!(heat.max_abs_diff(&taylor) < 1e-8);
    }

    #[test]
    fn gradient_of_level_function() {
        let m = measure(3, 4);
        let tree = m.tree();
        let f: Vec<f64> = tree.vertices().map(|v| tree.level(v) as f64).collect();
        let g = gradient(&f, tree);
        for v in tree.vertices() {
            let d = tree.depth(v);
            if d > 0 && d < 4 {
                assert_eq!(g[v.index()], 4.0);
            }
        }
        assert!(gradient(&vec![2.5; tree.len()], tree).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn riesz_on_eigenfunction() {
        let m = measure(2, 4);
        let tree = m.tree();
        let spec = Spectrum::new(&laplacian(&m)).unwrap();
        let k = 3;
        let v = spec.eigenfunction(k);
        let got = riesz_apply(&spec, &TreeFunction::from_values(v.clone()), tree).unwrap();
        let scaled: Vec<f64> = v.iter().map(|x| x / spec.values[k].sqrt()).collect();
        let want = gradient(&scaled, tree);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn hormander_vanishes_on_the_diagonal() {
        let m = measure(2, 6);
        let tree = m.tree();
        let op = SingularIntegral::Scalar(OperatorMatrix::identity(&m));
        let set = interior_cz_sets(tree).into_iter().find(|s| !s.degenerate).unwrap();
        let vs = set.vertices(tree).unwrap();
        assert_eq!(op.hormander_integral(&set, vs[0], vs[0], tree).unwrap(), 0.0);
        // the identity kernel lives on the diagonal, inside R̃*
        assert_eq!(op.hormander_integral(&set, vs[0], vs[1], tree).unwrap(), 0.0);
    }

    #[test]
    fn mikhlin_trends() {
        let opts = MikhlinOptions::default();
        assert_eq!(mikhlin_hormander_estimate(&Multiplier::Zero, None, 2.0, &opts).max, 0.0);
        let power = |s| {
            mikhlin_hormander_estimate(
                &Multiplier::ImaginaryPower { s, part: Part::Re },
                Some(&Multiplier::ImaginaryPower { s, part: Part::Im }),
                2.0,
                &opts,
            )
            .max
        };
        let (a, b) = (power(1.0), power(4.0));
        assert!(a.is_finite() && a < b);
        let step = Multiplier::Cutoff { a: 0.0, b: 1.0 };
        let coarse = mikhlin_hormander_estimate(&step, None, 2.0, &MikhlinOptions { samples: 1024, ..opts.clone() });
        let fine = mikhlin_hormander_estimate(&step, None, 2.0, &opts);
        assert!(fine.max > 2.0 * coarse.max);
    }
}
