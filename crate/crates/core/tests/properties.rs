use proptest::prelude::*;
use sandpile1d::series::{apply_l, bound_ln, iterate_ln, LocalFunction, SeriesOptions, INTERVAL_LEN_CAP};
use sandpile1d::sim::{order_violations, sample_rng, simulate_coupled, Accumulator, AvalancheChain, Coupling};
use sandpile1d::{
    interval_decomposition, stabilize, stabilize_bruteforce, topple_add, topple_add_finite, CriticalSet, GrainField,
    HeightConfig, Tail,
};

fn window(max_width: usize) -> impl Strategy<Value = HeightConfig> {
    (-6i64..=0, prop::collection::vec(1u8..=2, 1..=max_width))
        .prop_map(|(lo, heights)| HeightConfig::new(lo, heights, Tail::AllOnes).unwrap())
}

fn builtin(which: u8) -> LocalFunction {
    match which {
        0 => LocalFunction::occ0(),
        1 => LocalFunction::pair01(),
        _ => LocalFunction::interval_len(0, INTERVAL_LEN_CAP),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn text_form_round_trips(eta in window(16), tail in 0u8..3) {
        let tail = [Tail::AllOnes, Tail::AllTwos, Tail::Unspecified][tail as usize];
        let eta = eta.restrict(eta.lo(), eta.hi(), tail).unwrap();
        let text = eta.to_string();
        prop_assert_eq!(text.parse::<HeightConfig>().unwrap(), eta.clone());
        let json = serde_json::to_string(&eta).unwrap();
        prop_assert_eq!(serde_json::from_str::<HeightConfig>(&json).unwrap(), eta);
    }

    #[test]
    fn critical_sets_round_trip(sites in prop::collection::btree_set(-20i64..20, 0..12)) {
        let set: CriticalSet = sites.iter().copied().collect();
        prop_assert_eq!(HeightConfig::from_critical_set(&set).critical_set().unwrap(), set);
    }

    #[test]
    fn grain_fields_round_trip(lo in -10i64..10, counts in prop::collection::vec(0u64..9, 1..12)) {
        let g = GrainField::new(lo, counts).unwrap();
        prop_assert_eq!(g.to_string().parse::<GrainField>().unwrap(), g);
    }

    #[test]
    fn additions_commute(eta in window(24), a in 0usize..24, b in 0usize..24) {
        let width = eta.heights().len();
        let (i, j) = (eta.lo() + (a % width) as i64, eta.lo() + (b % width) as i64);
        let ij = topple_add(i, &topple_add(j, &eta).unwrap().config).unwrap().config;
        let ji = topple_add(j, &topple_add(i, &eta).unwrap().config).unwrap().config;
        prop_assert_eq!(ij.trimmed(), ji.trimmed());
    }

    #[test]
    fn finite_additions_commute(n in 0u32..10, bits in any::<u32>(), a in any::<u32>(), b in any::<u32>()) {
        let width = 2 * n as usize + 1;
        let heights = (0..width).map(|k| 1 + ((bits >> (k % 32)) & 1) as u8).collect();
        let eta = HeightConfig::new(-(n as i64), heights, Tail::AllOnes).unwrap();
        let i = (a % width as u32) as i64 - n as i64;
        let j = (b % width as u32) as i64 - n as i64;
        let ij = topple_add_finite(n, i, &topple_add_finite(n, j, &eta).unwrap()).unwrap();
        let ji = topple_add_finite(n, j, &topple_add_finite(n, i, &eta).unwrap()).unwrap();
        prop_assert_eq!(ij, ji);
    }

    #[test]
    fn stabilize_matches_bruteforce(n in 0u32..15, counts in prop::collection::vec(1u64..8, 31), seed in any::<u64>()) {
        let field = GrainField::new(-(n as i64), counts[..2 * n as usize + 1].to_vec()).unwrap();
        prop_assert_eq!(stabilize(n, &field).unwrap(), stabilize_bruteforce(n, &field, seed).unwrap());
    }

    #[test]
    fn avalanche_jump_adds_one_critical_site(sites in prop::collection::btree_set(-15i64..15, 1..12), seed in any::<u64>()) {
        let set: CriticalSet = sites.into_iter().collect();
        let mut chain = AvalancheChain::new(&set);
        let mut rng = sample_rng(seed, 0);
        for step in 1..=5 {
            chain.jump(&mut rng).unwrap();
            prop_assert_eq!(chain.size(), set.len() + step);
            prop_assert_eq!(chain.critical_set().len(), chain.size());
        }
    }

    #[test]
    fn couplings_preserve_order(
        upper in prop::collection::btree_set(-6i64..=6, 0..10),
        keep in any::<u16>(),
        kind in 0u8..3,
        n in 0u32..4,
        seed in any::<u64>(),
    ) {
        let lower: CriticalSet = upper.iter().copied().enumerate().filter(|(k, _)| keep >> (k % 16) & 1 == 1).map(|(_, x)| x).collect();
        let upper: CriticalSet = upper.into_iter().collect();
        let coupling = [Coupling::Avalanche, Coupling::Birth { n }, Coupling::NestedBirth { n }][kind as usize];
        let traj = simulate_coupled(
            coupling,
            &HeightConfig::from_critical_set(&upper),
            &HeightConfig::from_critical_set(&lower),
            1.5,
            seed,
        ).unwrap();
        prop_assert_eq!(order_violations(&traj).unwrap(), 0);
        prop_assert!(traj.times_are_valid());
    }

    #[test]
    fn generator_is_local(eta in window(14), which in 0u8..3, noise in prop::collection::vec(1u8..=2, 12)) {
        let f = builtin(which);
        let big = f.locality() as i64 + 1;
        let dec = interval_decomposition(&eta, -big - 1, big).unwrap();
        let span = dec.span(-big, big);
        // keep every site of the intervals -N-1..N+1 and the one closing interval -N-2
        let keep_lo = dec.one(-big - 1);
        let mut other = eta.clone();
        other.extend_to(keep_lo - 6, span.end() + 6).unwrap();
        let mut heights = other.heights().to_vec();
        for (k, x) in (other.lo()..=other.hi()).enumerate() {
            if x < keep_lo || x > *span.end() {
                heights[k] = noise[k % noise.len()];
            }
        }
        let other = HeightConfig::new(other.lo(), heights, Tail::AllOnes).unwrap();
        prop_assert_eq!(apply_l(&f, &eta).unwrap().value, apply_l(&f, &other).unwrap().value);
    }

    #[test]
    fn memoized_iterates_match_plain(eta in window(8), which in 0u8..3, depth in 0usize..4) {
        let f = builtin(which);
        let memo = SeriesOptions { memoize: true, ..SeriesOptions::default() };
        let plain = SeriesOptions { memoize: false, ..SeriesOptions::default() };
        prop_assert_eq!(iterate_ln(&f, &eta, depth, &memo).unwrap(), iterate_ln(&f, &eta, depth, &plain).unwrap());
    }

    #[test]
    fn iterates_respect_bound(eta in window(10), which in 0u8..3, depth in 0usize..5) {
        let f = builtin(which);
        let value = iterate_ln(&f, &eta, depth, &SeriesOptions::default()).unwrap();
        prop_assert!(value.abs() <= bound_ln(&f, &eta, depth).unwrap());
    }

    #[test]
    fn accumulator_merge_matches_sequential(xs in prop::collection::vec(-100.0f64..100.0, 2..60), cut in 0usize..60) {
        let cut = cut % xs.len();
        let all: Accumulator = xs.iter().copied().collect();
        let left: Accumulator = xs[..cut].iter().copied().collect();
        let right: Accumulator = xs[cut..].iter().copied().collect();
        let merged = left.merge(&right);
        prop_assert_eq!(merged.count(), all.count());
        prop_assert!((merged.mean() - all.mean()).abs() < 1e-9);
        prop_assert!((merged.variance() - all.variance()).abs() < 1e-7 * (1.0 + all.variance()));
    }
}
