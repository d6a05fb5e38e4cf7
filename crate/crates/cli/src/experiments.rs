//! One function per subcommand. Each resolves defaults, runs, and collects
//! the witnesses of anything that should have held.

use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use czhardy::geometry::{
    ball_inclusion_check, empirical_dilate_constant, envelope_measure_bound_check, inclusion_lemma_check, CzSetRecord,
};
use czhardy::hardy::{atomic_decompose, validate_atom, Atom, DecomposeOptions};
use czhardy::interpolation::{dyadic_ts, interpolation_exponent_report, theta};
use czhardy::maximal::cz_covering;
use czhardy::measure::{ball_formula, sphere_formula};
use czhardy::operators::{
    extreme_eigenvalues_formula, h1_to_l1_ratio, hormander_sweep, interior_cz_sets, laplacian,
    mikhlin_hormander_estimate, riesz_transform, self_adjointness_residual, MikhlinOptions, Multiplier, Part,
    SingularIntegral, Spectrum,
};
use czhardy::random::{random_atom, random_function};
use czhardy::scalar::{format_rational, parse_rational};
use czhardy::{Exact, Exponent, Scalar, Trapezoid, Tree, TreeConfig, WeightedMeasure};

use crate::{
    CoveringArgs, DecomposeArgs, GeometryArgs, HormanderArgs, InterpolateArgs, MikhlinArgs, Report, RieszArgs,
    RunError, RunResult, SpectrumArgs,
};

/// Witness lists stop growing here; counts keep going.
const MAX_WITNESSES: usize = 20;

pub fn build_measure(q: u32, depth: u32) -> RunResult<WeightedMeasure> {
    let cfg = TreeConfig::new(q, depth);
    cfg.validate()?;
    Ok(WeightedMeasure::new(Tree::new(cfg)?))
}

fn rat(r: &BigRational) -> String {
    format_rational(r)
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

fn exponent(p: f64) -> RunResult<Exponent> {
    Exponent::new(p).map_err(|e| RunError::Usage(e.to_string()))
}

fn parse_exponent(s: &str) -> RunResult<Exponent> {
    match s.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => Ok(Exponent::INFINITY),
        other => exponent(
            other
                .parse()
                .map_err(|_| RunError::Usage(format!("bad exponent {s:?}")))?,
        ),
    }
}

fn parse_rat(s: &str, what: &str) -> RunResult<BigRational> {
    parse_rational(s).ok_or_else(|| RunError::Usage(format!("bad {what} {s:?}")))
}

#[derive(Debug, Clone, Copy, Default, Serialize, PartialEq, Eq)]
pub struct CheckCount {
    pub checked: u64,
    pub violations: u64,
}

impl CheckCount {
    fn record(&mut self, ok: bool, witnesses: &mut Vec<Value>, witness: impl FnOnce() -> Value) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
            if witnesses.len() < MAX_WITNESSES {
                witnesses.push(witness());
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureSweep {
    pub q: u32,
    pub depth: u32,
    pub spheres: CheckCount,
    pub balls: CheckCount,
}

/// Closed-form sphere and ball measures against enumeration, for every
/// centre and radius whose ball lies inside the truncation.
pub fn measure_formula_sweep(q: u32, depth: u32, witnesses: &mut Vec<Value>) -> RunResult<MeasureSweep> {
    let m = build_measure(q, depth)?;
    let t = m.tree();
    let mut out = MeasureSweep {
        q,
        depth,
        spheres: CheckCount::default(),
        balls: CheckCount::default(),
    };
    for x0 in t.vertices() {
        if !m.ball_contained(x0, 1) {
            continue;
        }
        let masses = m.sphere_masses(x0)?;
        let mut ball = masses[0].clone();
        for r in 1..=depth {
            if !m.ball_contained(x0, r) {
                break;
            }
            ball += &masses[r as usize];
            let level = t.level(x0);
            let s_formula = sphere_formula(q, level, r);
            out.spheres.record(masses[r as usize] == s_formula, witnesses, || {
                json!({"check": "sphere", "q": q, "center": t.label(x0), "r": r,
                       "enumerated": rat(&masses[r as usize]), "formula": rat(&s_formula)})
            });
            let b_formula = ball_formula(q, level, r);
            out.balls.record(ball == b_formula, witnesses, || {
                json!({"check": "ball", "q": q, "center": t.label(x0), "r": r,
                       "enumerated": rat(&ball), "formula": rat(&b_formula)})
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometrySweep {
    pub q: u32,
    pub depth: u32,
    pub mode: String,
    pub trapezoids: usize,
    pub measure_formulas: MeasureSweep,
    pub trapezoid_measure: CheckCount,
    pub envelope_bound: CheckCount,
    pub diameter: CheckCount,
    pub inclusion: CheckCount,
    /// Largest `μ(R̃*)/μ(R̃)` over sets whose dilate fits.
    pub dilate_constant: Option<String>,
}

pub fn geometry_sweep(a: &GeometryArgs) -> RunResult<Report> {
    let (q, depth) = (a.q.unwrap_or(2), a.depth.unwrap_or(6));
    let m = build_measure(q, depth)?;
    let t = m.tree();
    let mut w = Vec::new();
    let measure_formulas = measure_formula_sweep(q, depth, &mut w)?;
    let traps = Trapezoid::all_in(t);
    let (mut tm, mut env, mut diam, mut incl) = Default::default();
    let label = |r: &Trapezoid| json!({"root": t.label(r.root), "h": r.h, "degenerate": r.degenerate});
    for r in &traps {
        let h = if r.degenerate { 1 } else { r.h };
        let enumerated = m.mu_set(r.vertices(t)?)?;
        let formula = r.width(&m) * BigRational::from_integer(h.into());
        CheckCount::record(&mut tm, enumerated == formula, &mut w, || {
            json!({"check": "trapezoid_measure", "trapezoid": label(r), "enumerated": rat(&enumerated)})
        });
        if r.envelope().fits(t) {
            let ok = envelope_measure_bound_check(r, &m)?;
            CheckCount::record(&mut env, ok, &mut w, || json!({"check": "envelope_bound", "trapezoid": label(r)}));
            let ok = ball_inclusion_check(&r.envelope(), t)?;
            CheckCount::record(&mut diam, ok, &mut w, || json!({"check": "diameter", "trapezoid": label(r)}));
        }
    }
    let mode = match a.samples {
        None => {
            for r1 in &traps {
                for r2 in &traps {
                    let ok = inclusion_lemma_check(r1, r2, t)?;
                    CheckCount::record(&mut incl, ok, &mut w, || {
                        json!({"check": "inclusion", "r1": label(r1), "r2": label(r2)})
                    });
                }
            }
            "exhaustive".to_string()
        }
        Some(n) => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(0));
            for _ in 0..n {
                let r1 = &traps[rng.random_range(0..traps.len())];
                let r2 = &traps[rng.random_range(0..traps.len())];
                let ok = inclusion_lemma_check(r1, r2, t)?;
                CheckCount::record(&mut incl, ok, &mut w, || {
                    json!({"check": "inclusion", "r1": label(r1), "r2": label(r2)})
                });
            }
            format!("random({n})")
        }
    };
    let sweep = GeometrySweep {
        q,
        depth,
        mode,
        trapezoids: traps.len(),
        measure_formulas,
        trapezoid_measure: tm,
        envelope_bound: env,
        diameter: diam,
        inclusion: incl,
        dilate_constant: empirical_dilate_constant(&m).map(|(_, r)| rat(&r)),
    };
    let mut json = serde_json::to_value(&sweep).expect("serializable");
    json["violations"] = Value::Array(w.clone());
    Ok(Report {
        json,
        csv: None,
        violations: w,
    })
}

pub fn covering(a: &CoveringArgs) -> RunResult<Report> {
    let (q, depth) = (a.q.unwrap_or(3), a.depth.unwrap_or(6));
    let p = a.p.unwrap_or(2);
    if p == 0 {
        return Err(RunError::Usage("p must be at least 1".into()));
    }
    let lambda: Exact = parse_rat(a.lambda.as_deref().unwrap_or("1/4"), "lambda")?;
    let m = build_measure(q, depth)?;
    let t = m.tree();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(7));
    let mut results = Vec::new();
    let mut w = Vec::new();
    let lambda_p = (0..p).fold(BigRational::one(), |acc, _| acc * &lambda);
    for i in 0..a.functions.unwrap_or(1) {
        let f: czhardy::TreeFunction<Exact> = random_function(t, &mut rng);
        let c = cz_covering(&f, &m, exponent(p as f64)?, &lambda, None)?;
        let selected_bound = &c.lp_pow / &lambda_p;
        let union_bound = &selected_bound * BigRational::from_integer(4.into());
        let item = json!({
            "function": i,
            "candidates": c.candidates,
            "selected": c.selected.iter().map(|r| CzSetRecord::from_trapezoid(r, t)).collect::<Vec<_>>(),
            "level_set_size": c.level_set.len(),
            "lp_pow": rat(&c.lp_pow),
            "sum_mu_selected": rat(&c.sum_mu_selected),
            "selected_bound": rat(&selected_bound),
            "sum_mu_envelopes": rat(&c.sum_mu_envelopes),
            "mu_union": rat(&c.mu_union),
            "union_bound": rat(&union_bound),
            "certificate": c.certificate,
        });
        if !c.certificate.all_hold() && w.len() < MAX_WITNESSES {
            w.push(json!({"check": "covering", "function": i, "values": f.values.iter().map(rat).collect::<Vec<_>>(), "certificate": c.certificate}));
        }
        results.push(item);
    }
    let json = json!({
        "q": q, "depth": depth, "p": p, "lambda": rat(&lambda),
        "results": results,
        "violations": w,
    });
    Ok(Report {
        json,
        csv: None,
        violations: w,
    })
}

pub fn decompose(a: &DecomposeArgs) -> RunResult<Report> {
    let (q, depth) = (a.q.unwrap_or(3), a.depth.unwrap_or(6));
    let p = exponent(a.p.unwrap_or(2) as f64)?;
    let m = build_measure(q, depth)?;
    let opts = DecomposeOptions::<Exact> {
        alpha: a.alpha.as_deref().map(|s| parse_rat(s, "alpha")).transpose()?,
        max_depth: a.max_depth.unwrap_or(4),
        allow_subcritical: a.allow_subcritical.unwrap_or(false),
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(0));
    let n = m.tree().len();
    let mut results = Vec::new();
    let mut w = Vec::new();
    for i in 0..a.atoms.unwrap_or(25) {
        let atom: Atom<Exact> = random_atom(&m, p, &mut rng);
        let d = atomic_decompose(&atom, &m, &opts)?;
        let reconstructs = d.reconstruct(n) == atom.values;
        let mut emitted_valid = true;
        for term in &d.terms {
            emitted_valid &= validate_atom(&term.atom, &m)?.is_valid();
        }
        let coefficient_sum = d.coefficient_sum();
        let within_constant = coefficient_sum.to_f64() <= d.proof_constant;
        let ok = d.certified() && reconstructs && emitted_valid && within_constant;
        let item = json!({
            "atom": i,
            "support": atom.support.record(m.tree()),
            "terms": d.terms.len(),
            "residual_pieces": d.residual.len(),
            "coefficient_sum": rat(&coefficient_sum),
            "proof_constant": d.proof_constant,
            "alpha": rat(&d.alpha),
            "certified": d.certified(),
            "reconstructs": reconstructs,
            "emitted_atoms_valid": emitted_valid,
            "within_constant": within_constant,
            "stages": d.stages,
        });
        if !ok && w.len() < MAX_WITNESSES {
            w.push(item.clone());
        }
        results.push(item);
    }
    let json = json!({
        "q": q, "depth": depth, "p": p.value(),
        "max_depth": opts.max_depth,
        "results": results,
        "violations": w,
    });
    Ok(Report {
        json,
        csv: None,
        violations: w,
    })
}

pub fn interpolate(a: &InterpolateArgs) -> RunResult<Report> {
    let (q, depth) = (a.q.unwrap_or(3), a.depth.unwrap_or(6));
    let p = exponent(a.p.unwrap_or(2.0))?;
    let p1 = parse_exponent(a.p1.as_deref().unwrap_or("inf"))?;
    if p1.value() <= p.value() {
        return Err(RunError::Usage("p1 must exceed p".into()));
    }
    let (lo, hi) = (a.t_min.unwrap_or(-6), a.t_max.unwrap_or(6));
    if lo >= hi {
        return Err(RunError::Usage("t-min must be below t-max".into()));
    }
    let m = build_measure(q, depth)?;
    let opts = DecomposeOptions::<f64> {
        refine_alphas: a.refine_alpha.clone().unwrap_or_default(),
        ..Default::default()
    };
    let ts = dyadic_ts(lo, hi);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(0));
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    let mut w = Vec::new();
    for i in 0..a.functions.unwrap_or(3) {
        let f = random_function::<f64, _>(m.tree(), &mut rng);
        let r = interpolation_exponent_report(&f, &m, p, p1, &ts, &opts)?;
        for ((t, k), l) in r.ts.iter().zip(&r.k_bounds).zip(&r.minimizers) {
            rows.push(format!("{i},{t},{k},{l},{}", r.slope));
        }
        if (!r.nondecreasing || !r.concave) && w.len() < MAX_WITNESSES {
            w.push(json!({"check": "k_shape", "function": i, "nondecreasing": r.nondecreasing, "concave": r.concave}));
        }
        reports.push(r);
    }
    let json = json!({
        "q": q, "depth": depth, "theta": theta(p, p1),
        "reports": reports,
        "violations": w,
    });
    Ok(Report {
        json,
        csv: Some(csv("function,t,k_bound,minimizer,slope", rows)),
        violations: w,
    })
}

fn depth_rows(rows: &mut Vec<String>, depth: u32, stats: &[(&str, f64)]) {
    for (name, v) in stats {
        rows.push(format!("{depth},{name},{v}"));
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRow {
    pub depth: u32,
    pub dim: usize,
    pub min: f64,
    pub max: f64,
    pub margin: f64,
    pub formula_min: f64,
    pub formula_max: f64,
    pub self_adjoint_residual: f64,
}

pub fn spectrum(a: &SpectrumArgs) -> RunResult<Report> {
    let q = a.q.unwrap_or(3);
    let depths = a.depths.clone().unwrap_or_else(|| vec![5, 6, 7]);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(0));
    let mut table = Vec::new();
    let mut rows = Vec::new();
    let mut w = Vec::new();
    for &d in &depths {
        let m = build_measure(q, d)?;
        let l = laplacian(&m);
        let spec = Spectrum::new(&l)?;
        let mut residual: f64 = 0.0;
        for _ in 0..3 {
            let f: Vec<f64> = (0..l.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..l.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            residual = residual.max(self_adjointness_residual(&l, &f, &g, &m)?);
        }
        let (fmin, fmax) = extreme_eigenvalues_formula(d);
        let row = SpectrumRow {
            depth: d,
            dim: l.dim(),
            min: spec.min(),
            max: spec.max(),
            margin: spec.margin(),
            formula_min: fmin,
            formula_max: fmax,
            self_adjoint_residual: residual,
        };
        depth_rows(
            &mut rows,
            d,
            &[
                ("dim", row.dim as f64),
                ("min", row.min),
                ("max", row.max),
                ("margin", row.margin),
                ("formula_min", fmin),
                ("formula_max", fmax),
                ("self_adjoint_residual", residual),
            ],
        );
        if row.margin <= 0.0 || residual > 1e-10 {
            w.push(json!({"check": "spectrum", "row": row}));
        }
        table.push(row);
    }
    let mut sorted = table.clone();
    sorted.sort_by_key(|r| r.depth);
    let monotone = sorted.windows(2).all(|p| p[1].min < p[0].min && p[1].max > p[0].max);
    if !monotone {
        w.push(json!({"check": "monotone_extremes"}));
    }
    let json = json!({"q": q, "rows": table, "monotone": monotone, "violations": w});
    Ok(Report {
        json,
        csv: Some(csv("depth,statistic,value", rows)),
        violations: w,
    })
}

/// A scalar multiplier, or the Riesz transform.
#[derive(Debug, Clone)]
pub enum OperatorSpec {
    Multiplier(Multiplier),
    Riesz,
}

impl OperatorSpec {
    pub fn parse(name: &str, t: Option<f64>, m: Option<u32>, s: Option<f64>) -> RunResult<Self> {
        Ok(match name {
            "riesz" => OperatorSpec::Riesz,
            "heat" => OperatorSpec::Multiplier(Multiplier::Heat { t: t.unwrap_or(1.0) }),
            "poly" => OperatorSpec::Multiplier(Multiplier::Polynomial { m: m.unwrap_or(4) }),
            "cutoff" => OperatorSpec::Multiplier(Multiplier::Cutoff { a: 0.0, b: 1.0 }),
            "imag-re" | "imag-im" => OperatorSpec::Multiplier(Multiplier::ImaginaryPower {
                s: s.unwrap_or(1.0),
                part: if name == "imag-re" { Part::Re } else { Part::Im },
            }),
            other => return Err(RunError::Usage(format!("unknown multiplier {other:?}"))),
        })
    }

    pub fn name(&self) -> String {
        match self {
            OperatorSpec::Multiplier(m) => m.name(),
            OperatorSpec::Riesz => "riesz".into(),
        }
    }

    pub fn build(&self, spec: &Spectrum) -> RunResult<SingularIntegral> {
        Ok(match self {
            OperatorSpec::Multiplier(m) => SingularIntegral::Scalar(spec.multiplier(m)?),
            OperatorSpec::Riesz => riesz_transform(spec)?,
        })
    }
}

/// `|b/a − 1|`.
fn relative_change(a: f64, b: f64) -> f64 {
    (b / a - 1.0).abs()
}

pub fn hormander(a: &HormanderArgs) -> RunResult<Report> {
    let q = a.q.unwrap_or(3);
    let depths = a.depths.clone().unwrap_or_else(|| vec![6, 7]);
    let op = OperatorSpec::parse(a.multiplier.as_deref().unwrap_or("heat"), a.t, a.m, a.s)?;
    let mut rows = Vec::new();
    let mut sweeps = Vec::new();
    let mut w = Vec::new();
    for &d in &depths {
        let m = build_measure(q, d)?;
        let spec = Spectrum::new(&laplacian(&m))?;
        let t = op.build(&spec)?;
        let sets = interior_cz_sets(m.tree());
        let s = hormander_sweep(&t, &sets, m.tree())?;
        depth_rows(
            &mut rows,
            d,
            &[("sets", s.sets as f64), ("pairs", s.pairs as f64), ("sup", s.sup)],
        );
        if !s.sup.is_finite() {
            w.push(json!({"check": "finite_sup", "depth": d}));
        }
        sweeps.push(json!({"depth": d, "sweep": s}));
    }
    let sups: Vec<f64> = sweeps.iter().map(|s| s["sweep"]["sup"].as_f64().unwrap_or(f64::NAN)).collect();
    let changes: Vec<f64> = sups.windows(2).map(|p| relative_change(p[0], p[1])).collect();
    let json = json!({
        "q": q, "operator": op.name(),
        "sweeps": sweeps, "relative_changes": changes,
        "violations": w,
    });
    Ok(Report {
        json,
        csv: Some(csv("depth,statistic,value", rows)),
        violations: w,
    })
}

pub fn riesz_ratio(a: &RieszArgs) -> RunResult<Report> {
    let q = a.q.unwrap_or(3);
    let depths = a.depths.clone().unwrap_or_else(|| vec![6, 7]);
    let op = OperatorSpec::parse(a.multiplier.as_deref().unwrap_or("riesz"), a.t, a.m, a.s)?;
    let count = a.atoms.unwrap_or(200);
    let mut rows = Vec::new();
    let mut per_depth = Vec::new();
    let mut w = Vec::new();
    for &d in &depths {
        let m = build_measure(q, d)?;
        let spec = Spectrum::new(&laplacian(&m))?;
        let t = op.build(&spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(42));
        let atoms: Vec<Atom<f64>> = (0..count).map(|_| random_atom(&m, Exponent::INFINITY, &mut rng)).collect();
        let r = h1_to_l1_ratio(&t, &atoms, &m)?;
        let split_ok = r
            .images
            .iter()
            .all(|im| im.near <= im.near_bound * (1.0 + 1e-9) && im.tail <= im.tail_bound * (1.0 + 1e-9) + 1e-12);
        if !r.max_ratio.is_finite() || !split_ok {
            w.push(json!({"check": "atom_images", "depth": d, "finite": r.max_ratio.is_finite(), "split_bounds": split_ok}));
        }
        let mut stats = vec![("atoms", count as f64), ("max_ratio", r.max_ratio)];
        if let Some(i) = r.argmax {
            let im = &r.images[i];
            stats.extend([
                ("near", im.near),
                ("near_bound", im.near_bound),
                ("tail", im.tail),
                ("tail_bound", im.tail_bound),
            ]);
        }
        depth_rows(&mut rows, d, &stats);
        per_depth.push(json!({
            "depth": d,
            "max_ratio": r.max_ratio,
            "argmax": r.argmax.map(|i| &r.images[i]),
        }));
    }
    let maxes: Vec<f64> = per_depth.iter().map(|v| v["max_ratio"].as_f64().unwrap_or(f64::NAN)).collect();
    let growth: Vec<f64> = maxes.windows(2).map(|p| p[1] / p[0] - 1.0).collect();
    let json = json!({
        "q": q, "operator": op.name(), "atoms": count,
        "depths": per_depth, "growth": growth,
        "violations": w,
    });
    Ok(Report {
        json,
        csv: Some(csv("depth,statistic,value", rows)),
        violations: w,
    })
}

pub fn mikhlin(a: &MikhlinArgs) -> RunResult<Report> {
    let name = a.multiplier.as_deref().unwrap_or("imag");
    let s = a.sobolev.unwrap_or(2.0);
    let (re, im) = match name {
        "imag" => {
            let s0 = a.s0.unwrap_or(1.0);
            (
                Multiplier::ImaginaryPower { s: s0, part: Part::Re },
                Some(Multiplier::ImaginaryPower { s: s0, part: Part::Im }),
            )
        }
        other => match OperatorSpec::parse(other, a.t, a.m, a.s0)? {
            OperatorSpec::Multiplier(m) => (m, None),
            OperatorSpec::Riesz => return Err(RunError::Usage("riesz is not a multiplier of the spectral variable".into())),
        },
    };
    let opts = MikhlinOptions {
        samples: a.samples.unwrap_or(4096),
        ..Default::default()
    };
    if opts.samples < 16 {
        return Err(RunError::Usage("samples must be at least 16".into()));
    }
    let r = mikhlin_hormander_estimate(&re, im.as_ref(), s, &opts);
    let rows = r.per_t.iter().map(|(t, v)| format!("{t},{v}"));
    let table = csv("t,value", rows);
    let json = json!({"multiplier": name, "report": r, "violations": []});
    Ok(Report {
        json,
        csv: Some(table),
        violations: Vec::new(),
    })
}
