use czhardy::geometry::{
    ball_inclusion_check, empirical_dilate_constant, envelope_measure_bound_check, inclusion_lemma_check,
};
use czhardy::*;
use num_rational::BigRational;
use proptest::prelude::*;

fn measure(q: u32, d: u32) -> WeightedMeasure {
    WeightedMeasure::new(Tree::new(TreeConfig::new(q, d)).unwrap())
}

#[test]
fn exhaustive_pairs_on_a_small_tree() {
    let m = measure(2, 4);
    let t = m.tree();
    let all = Trapezoid::all_in(t);
    for r1 in &all {
        if r1.envelope().fits(t) {
            assert!(envelope_measure_bound_check(r1, &m).unwrap());
        }
        for r2 in &all {
            assert!(inclusion_lemma_check(r1, r2, t).unwrap(), "{r1:?} {r2:?}");
        }
    }
}

#[test]
fn dilate_constant_is_bounded() {
    let m = measure(2, 8);
    let (_, ratio) = empirical_dilate_constant(&m).unwrap();
    assert!(ratio <= BigRational::from_integer(4.into()));
}

#[test]
fn canonical_order_is_total_and_root_first() {
    let t = Tree::new(TreeConfig::new(3, 5)).unwrap();
    let all = Trapezoid::all_in(&t);
    for w in all.windows(2) {
        assert!(w[0] < w[1]);
        assert!(w[0].root <= w[1].root);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn trapezoid_measure_is_height_times_width(a in any::<prop::sample::Index>()) {
        let m = measure(3, 7);
        let t = m.tree();
        let all = Trapezoid::all_in(t);
        let r = all[a.index(all.len())];
        let enumerated = m.mu_set(r.vertices(t).unwrap()).unwrap();
        let h = if r.degenerate { 1 } else { r.h };
        prop_assert_eq!(&enumerated, &(r.width(&m) * BigRational::from_integer(h.into())));
        prop_assert_eq!(enumerated, r.measure(&m));
    }

    #[test]
    fn random_pairs_satisfy_the_inclusion_lemma(a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>()) {
        let m = measure(3, 8);
        let t = m.tree();
        let all = Trapezoid::all_in(t);
        let (r1, r2) = (all[a.index(all.len())], all[b.index(all.len())]);
        prop_assert!(inclusion_lemma_check(&r1, &r2, t).unwrap());
        if r1.envelope().fits(t) {
            prop_assert!(envelope_measure_bound_check(&r1, &m).unwrap());
        }
        // the infinite-tree formula needs no containment
        prop_assert!(r1.envelope().measure(&m) <= r1.measure(&m) * BigRational::from_integer(4.into()));
    }

    #[test]
    fn envelopes_contain_their_trapezoid_and_have_small_diameter(a in any::<prop::sample::Index>()) {
        let m = measure(2, 8);
        let t = m.tree();
        let sets: Vec<CzSet> = CzSet::all_in(t).into_iter().filter(|s| !s.degenerate).collect();
        let s = sets[a.index(sets.len())];
        let env = s.vertices(t).unwrap();
        for v in s.trapezoid().vertices(t).unwrap() {
            prop_assert!(env.contains(&v));
        }
        prop_assert!(ball_inclusion_check(&s, t).unwrap());
        prop_assert!(s.band().is_subset_of(&s.dilate().band(), t));
    }

    #[test]
    fn containing_lists_exactly_the_covering_trapezoids(a in any::<prop::sample::Index>()) {
        let t = Tree::new(TreeConfig::new(2, 6)).unwrap();
        let x = VertexId(a.index(t.len()) as u32);
        let mut listed = Trapezoid::containing(&t, x);
        let mut brute: Vec<Trapezoid> = Trapezoid::all_in(&t).into_iter().filter(|r| r.contains(&t, x)).collect();
        listed.sort();
        brute.sort();
        prop_assert_eq!(listed, brute);
    }
}

proptest! {
    #[test]
    fn double_sweep_diameter_matches_all_pairs(seed in any::<u64>(), k in 1usize..40) {
        use rand::{seq::IndexedRandom, SeedableRng};
        let t = Tree::new(TreeConfig::new(3, 4)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let all: Vec<VertexId> = t.vertices().collect();
        let set: Vec<VertexId> = all.choose_multiple(&mut rng, k).copied().collect();
        let mut brute = 0;
        for &x in &set {
            for &y in &set {
                brute = brute.max(t.distance(x, y).unwrap());
            }
        }
        prop_assert_eq!(czhardy::geometry::diameter(&t, &set), brute);
    }
}
