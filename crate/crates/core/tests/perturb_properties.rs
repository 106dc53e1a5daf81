use proptest::prelude::*;
use tsape_core::perturb::{
    apply_perturbation, make_schedule, parse_strategies, rank_scores, replacement_series, Direction,
    PerturbationSchedule, PerturbationStrategy, CONSTANT_GRID,
};
use tsape_core::rng::instance_seed;

fn series() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, 2..64)
}

fn any_strategy() -> impl Strategy<Value = PerturbationStrategy> {
    prop_oneof![
        Just(PerturbationStrategy::Gauss),
        Just(PerturbationStrategy::Unif),
        Just(PerturbationStrategy::Opp),
        Just(PerturbationStrategy::Inv),
        (0.01..=1.0f64).prop_map(|k| PerturbationStrategy::sub_mean(k).unwrap()),
        Just(PerturbationStrategy::Zero),
        (-3.0..3.0f64).prop_map(|c| PerturbationStrategy::constant(c).unwrap()),
    ]
}

fn has_spread(x: &[f64]) -> bool {
    x.iter().any(|&v| v != x[0])
}

proptest! {
    #[test]
    fn replacement_is_pure(x in series(), strategy in any_strategy(), seed in any::<u64>()) {
        prop_assume!(has_spread(&x));
        let a = replacement_series(&strategy, &x, seed).unwrap();
        let b = replacement_series(&strategy, &x, seed).unwrap();
        prop_assert_eq!(a.len(), x.len());
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn constant_zero_matches_zero(x in series(), seed in any::<u64>()) {
        let zero = replacement_series(&PerturbationStrategy::Zero, &x, seed).unwrap();
        let c0 = replacement_series(&PerturbationStrategy::constant(0.0).unwrap(), &x, seed).unwrap();
        let cneg = replacement_series(&PerturbationStrategy::constant(-0.0).unwrap(), &x, seed).unwrap();
        prop_assert_eq!(zero.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), c0.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(&c0, &cneg);
    }

    #[test]
    fn opp_twice_is_identity(x in series()) {
        let once = replacement_series(&PerturbationStrategy::Opp, &x, 0).unwrap();
        let twice = replacement_series(&PerturbationStrategy::Opp, &once, 0).unwrap();
        prop_assert_eq!(twice, x);
    }

    #[test]
    fn inv_max_is_range(x in series()) {
        let inv = replacement_series(&PerturbationStrategy::Inv, &x, 0).unwrap();
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = x.iter().copied().fold(f64::INFINITY, f64::min);
        let inv_max = inv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let inv_min = inv.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(inv_max, max - min);
        prop_assert_eq!(inv_min, 0.0);
    }

    #[test]
    fn unif_stays_in_range(x in series(), seed in any::<u64>()) {
        let u = replacement_series(&PerturbationStrategy::Unif, &x, seed).unwrap();
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = x.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(u.iter().all(|&v| v >= min && v <= max));
    }

    #[test]
    fn submean_is_order_independent(x in series(), k in 0.01..=1.0f64, perm_seed in any::<u64>()) {
        let strategy = PerturbationStrategy::sub_mean(k).unwrap();
        let replacement = replacement_series(&strategy, &x, 0).unwrap();
        let n = x.len();
        let forward: Vec<usize> = (0..n).collect();
        let mut shuffled = forward.clone();
        let mut rng = tsape_core::rng::DetRng::new(perm_seed);
        for i in (1..n).rev() {
            shuffled.swap(i, rng.below(i + 1));
        }
        let mut by_steps = x.clone();
        for &i in &shuffled {
            by_steps = apply_perturbation(&by_steps, &replacement, &[i]).unwrap();
        }
        prop_assert_eq!(&by_steps, &apply_perturbation(&x, &replacement, &forward).unwrap());
        prop_assert_eq!(by_steps, replacement);
    }

    #[test]
    fn submean_entries_are_trailing_means(x in series(), k in 0.01..=1.0f64) {
        let n = x.len();
        let len = ((k * n as f64) - 1e-9 * k * n as f64).ceil().max(1.0) as usize;
        let r = replacement_series(&PerturbationStrategy::sub_mean(k).unwrap(), &x, 0).unwrap();
        for i in 0..n {
            let lo = (i + 1).saturating_sub(len);
            let mean = x[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64;
            prop_assert!((r[i] - mean).abs() <= 1e-12);
        }
    }

    #[test]
    fn schedule_shape(n in 2usize..2000) {
        let schedule = PerturbationSchedule::with_defaults(n).unwrap();
        let s = schedule.step_size();
        let t = schedule.coverage_target();
        let steps = schedule.cumulative_steps();
        prop_assert_eq!(s, (n * 2).div_ceil(100));
        prop_assert_eq!(t, n.div_ceil(2));
        prop_assert_eq!(schedule.m(), t.div_ceil(s));
        prop_assert_eq!(steps.len(), schedule.m());
        prop_assert_eq!(*steps.last().unwrap(), t);
        prop_assert!(steps.windows(2).all(|w| w[0] < w[1]));
        for (j, &c) in steps.iter().enumerate() {
            prop_assert_eq!(c, ((j + 1) * s).min(t));
        }
        let gaps: Vec<usize> = std::iter::once(steps[0]).chain(steps.windows(2).map(|w| w[1] - w[0])).collect();
        prop_assert!(gaps[..gaps.len() - 1].iter().all(|&g| g == s));
        prop_assert!(*gaps.last().unwrap() <= s);
    }

    #[test]
    fn ranking_is_a_sorted_permutation(scores in prop::collection::vec(prop_oneof![-3.0..3.0f64, Just(0.0), Just(1.0)], 1..50)) {
        for direction in [Direction::MoRF, Direction::LeRF] {
            let order = rank_scores(&scores, direction).order;
            let mut seen = order.clone();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..scores.len()).collect::<Vec<_>>());
            for w in order.windows(2) {
                let (a, b) = (scores[w[0]], scores[w[1]]);
                match direction {
                    Direction::MoRF => prop_assert!(a > b || (a == b && w[0] < w[1])),
                    Direction::LeRF => prop_assert!(a < b || (a == b && w[0] < w[1])),
                }
            }
        }
    }

    #[test]
    fn distinct_scores_reverse_between_directions(scores in prop::collection::hash_set(-1_000_000i64..1_000_000, 1..50)) {
        let scores: Vec<f64> = scores.into_iter().map(|v| v as f64 / 1000.0).collect();
        let morf = rank_scores(&scores, Direction::MoRF).order;
        let mut lerf = rank_scores(&scores, Direction::LeRF).order;
        lerf.reverse();
        prop_assert_eq!(morf, lerf);
    }

    #[test]
    fn instance_seeds_depend_on_id(seed in any::<u64>(), a in "[a-z0-9]{1,8}", b in "[a-z0-9]{1,8}") {
        prop_assume!(a != b);
        prop_assert_eq!(instance_seed(seed, &a), instance_seed(seed, &a));
        prop_assert_ne!(instance_seed(seed, &a), instance_seed(seed, &b));
    }
}

#[test]
fn schedule_reference_lengths() {
    for (n, s, t, m) in [(500, 10, 250, 25), (152, 4, 76, 19), (96, 2, 48, 24)] {
        let schedule = make_schedule(n, 0.02, 0.5).unwrap();
        assert_eq!(
            (schedule.step_size(), schedule.coverage_target(), schedule.m()),
            (s, t, m)
        );
    }
    let schedule = make_schedule(500, 0.02, 0.5).unwrap();
    assert_eq!(schedule.fraction(0), 0.02);
}

#[test]
fn strategy_names_round_trip() {
    let names = [
        "gauss",
        "unif",
        "opp",
        "inv",
        "submean",
        "submean:0.25",
        "zero",
        "constant:-1.5",
    ];
    let parsed = parse_strategies(&names).unwrap();
    let shown: Vec<String> = parsed.iter().map(ToString::to_string).collect();
    assert_eq!(shown, names);
    let grid = parse_strategies(&["constant-grid"]).unwrap();
    assert_eq!(grid.len(), CONSTANT_GRID.len());
    assert_eq!(parse_strategies(&["zero", "constant:0"]).unwrap().len(), 2);
    assert!(parse_strategies(&["zero", "zero"]).is_err());
    assert!(parse_strategies(&["median"]).is_err());
    assert!(parse_strategies(&["submean:0"]).is_err());
    assert!(parse_strategies(&["constant:nan"]).is_err());
}

#[test]
fn gauss_on_constant_series_is_degenerate() {
    assert!(replacement_series(&PerturbationStrategy::Gauss, &[2.0; 8], 1).is_err());
}
