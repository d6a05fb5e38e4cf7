use czhardy::hardy::Atom;
use czhardy::operators::*;
use czhardy::random::random_atom;
use czhardy::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn measure(q: u32, d: u32) -> WeightedMeasure {
    WeightedMeasure::new(Tree::new(TreeConfig::new(q, d)).unwrap())
}

/// Gradient straight from the definition, via `neighbors`.
fn gradient_oracle(f: &[f64], tree: &Tree) -> Vec<f64> {
    tree.vertices()
        .map(|x| {
            tree.neighbors(x)
                .unwrap()
                .iter()
                .map(|y| (f[y.index()] - f[x.index()]).abs())
                .sum()
        })
        .collect()
}

#[test]
fn spectrum_is_interior_and_widens_with_depth() {
    for q in [2, 3] {
        let mut prev: Option<(f64, f64)> = None;
        for d in [3, 4, 5] {
            let s = Spectrum::new(&laplacian(&measure(q, d))).unwrap();
            assert!(s.margin() > 1e-6);
            if let Some((lo, hi)) = prev {
                assert!(s.min() < lo && s.max() > hi);
            }
            prev = Some((s.min(), s.max()));
        }
    }
}

#[test]
fn identity_maps_atoms_to_at_most_one() {
    let m = measure(3, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let atoms: Vec<Atom<f64>> = (0..20).map(|_| random_atom(&m, Exponent::INFINITY, &mut rng)).collect();
    let id = SingularIntegral::Scalar(OperatorMatrix::identity(&m));
    let r = h1_to_l1_ratio(&id, &atoms, &m).unwrap();
    assert!(r.max_ratio <= 1.0 + 1e-12);
    for im in &r.images {
        assert!(im.tail.abs() < 1e-15);
        assert!(im.near <= im.near_bound * (1.0 + 1e-12));
    }
}

#[test]
fn zero_operator_gives_zero() {
    let m = measure(2, 5);
    let spec = Spectrum::new(&laplacian(&m)).unwrap();
    let zero = SingularIntegral::Scalar(spec.multiplier(&Multiplier::Zero).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let atoms: Vec<Atom<f64>> = (0..5).map(|_| random_atom(&m, Exponent::INFINITY, &mut rng)).collect();
    assert_eq!(h1_to_l1_ratio(&zero, &atoms, &m).unwrap().max_ratio, 0.0);
}

#[test]
fn heat_split_bounds_hold() {
    let m = measure(2, 6);
    let spec = Spectrum::new(&laplacian(&m)).unwrap();
    let heat = SingularIntegral::Scalar(spec.multiplier(&Multiplier::Heat { t: 1.0 }).unwrap());
    let riesz = riesz_transform(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let atoms: Vec<Atom<f64>> = (0..20).map(|_| random_atom(&m, Exponent::INFINITY, &mut rng)).collect();
    for op in [&heat, &riesz] {
        let r = h1_to_l1_ratio(op, &atoms, &m).unwrap();
        assert!(r.max_ratio.is_finite());
        for im in &r.images {
            assert!(im.near <= im.near_bound * (1.0 + 1e-9));
            assert!(im.tail <= im.tail_bound * (1.0 + 1e-9) + 1e-12);
        }
    }
}

#[test]
fn sweep_reports_a_finite_sup() {
    let m = measure(2, 6);
    let t = m.tree();
    let heat = SingularIntegral::Scalar(spectral_multiplier(&laplacian(&m), &Multiplier::Heat { t: 1.0 }).unwrap());
    let sets = interior_cz_sets(t);
    let s = hormander_sweep(&heat, &sets, t).unwrap();
    assert!(s.sup.is_finite() && s.sup > 0.0);
    assert!(s.argmax.is_some());
}

#[test]
fn containment_errors_are_reported() {
    let m = measure(2, 3);
    let t = m.tree();
    let op = SingularIntegral::Scalar(OperatorMatrix::identity(&m));
    let set = CzSet::new(t.apex(), 2).unwrap();
    let x = VertexId(1);
    assert!(op.hormander_integral(&set, x, x, t).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn calculus_is_multiplicative(t1 in 0.1f64..3.0, m1 in 1u32..5) {
        let m = measure(2, 4);
        let spec = Spectrum::new(&laplacian(&m)).unwrap();
        let a = Multiplier::Heat { t: t1 };
        let b = Multiplier::Polynomial { m: m1 };
        let ab = spec.multiplier(&Multiplier::Product(vec![a.clone(), b.clone()])).unwrap();
        let (ma, mb) = (spec.multiplier(&a).unwrap(), spec.multiplier(&b).unwrap());
        let composed = OperatorMatrix::from_action(&(ma.action() * mb.action()), &m).unwrap();
        prop_assert!(ab.max_abs_diff(&composed) < 1e-9);
    }

    #[test]
    fn laplacian_is_symmetric_in_l2_mu(seed in any::<u64>(), q in 2u32..4) {
        let m = measure(q, 4);
        let l = laplacian(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = (0..l.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..l.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        prop_assert!(self_adjointness_residual(&l, &f, &g, &m).unwrap() <= 1e-10);
    }

    #[test]
    fn gradient_matches_the_definition(seed in any::<u64>()) {
        let t = Tree::new(TreeConfig::new(3, 4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f: Vec<f64> = (0..t.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (a, b) = (gradient(&f, &t), gradient_oracle(&f, &t));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn hormander_integral_is_symmetric_and_zero_on_the_diagonal(a in any::<prop::sample::Index>(), i in any::<prop::sample::Index>(), j in any::<prop::sample::Index>()) {
        let m = measure(2, 6);
        let t = m.tree();
        let op = SingularIntegral::Scalar(spectral_multiplier(&laplacian(&m), &Multiplier::Polynomial { m: 3 }).unwrap());
        let sets = interior_cz_sets(t);
        let s = sets[a.index(sets.len())];
        let vs = s.vertices(t).unwrap();
        let (y, z) = (vs[i.index(vs.len())], vs[j.index(vs.len())]);
        prop_assert_eq!(op.hormander_integral(&s, y, y, t).unwrap(), 0.0);
        let yz = op.hormander_integral(&s, y, z, t).unwrap();
        let zy = op.hormander_integral(&s, z, y, t).unwrap();
        prop_assert!((yz - zy).abs() <= 1e-12 * yz.max(1.0));
    }
}
