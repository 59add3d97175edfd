//! Property tests for the simplex primitives, the capacity solver, and the
//! dataset metrics.

use proptest::collection::vec;
use proptest::prelude::*;

use rkit_core::{
    ambiguity, argmax_class, ba_capacity, discrepancy, entropy, filter_rashomon_set,
    kl_divergence, BaConfig64, ProbVector64, RashomonMode, RashomonSpec64, ScoreSet64,
    ScoreTensor64,
};

fn raw_scores(c: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(1e-6f64..1.0, c..=c)
}

fn prob_vector(c: usize) -> impl Strategy<Value = ProbVector64> {
    raw_scores(c).prop_map(|raw| ProbVector64::from_scores(raw).unwrap())
}

fn channel(m: usize, c: usize) -> impl Strategy<Value = ScoreSet64> {
    vec(prob_vector(c), m..=m).prop_map(|rows| {
        let ids = (0..rows.len()).map(|j| format!("m{j}")).collect();
        ScoreSet64::new(rows, ids).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kl_is_nonnegative_and_zero_only_at_equality(
        p in prob_vector(4),
        q in prob_vector(4),
    ) {
        let d = kl_divergence(&p, &q).unwrap();
        prop_assert!(d >= 0.0);
        if p.approx_eq(&q, 1e-12) {
            prop_assert!(d <= 1e-9);
        }
        prop_assert!(kl_divergence(&p, &p).unwrap() <= 1e-12);
    }

    #[test]
    fn kl_asymmetry_is_the_norm(pairs in vec((raw_scores(3), raw_scores(3)), 8)) {
        // Random pairs routinely have kl(p,q) != kl(q,p); none of them is
        // an error.
        for (raw_p, raw_q) in pairs {
            let p = ProbVector64::from_scores(raw_p).unwrap();
            let q = ProbVector64::from_scores(raw_q).unwrap();
            let forward = kl_divergence(&p, &q).unwrap();
            let backward = kl_divergence(&q, &p).unwrap();
            prop_assert!(forward.is_finite() && backward.is_finite());
        }
    }

    #[test]
    fn entropy_is_bounded_by_log_c(p in prob_vector(5)) {
        let h = entropy(&p);
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (5.0f64).log2() + 1e-12);
    }

    #[test]
    fn uniform_maximizes_entropy(c in 2usize..6) {
        let uniform = ProbVector64::new(vec![1.0 / c as f64; c]).unwrap();
        prop_assert!((entropy(&uniform) - (c as f64).log2()).abs() < 1e-12);
    }

    #[test]
    fn construction_from_raw_scores_always_validates(raw in vec(0.0f64..10.0, 2..8)) {
        prop_assume!(raw.iter().sum::<f64>() > 0.0);
        let p = ProbVector64::from_scores(raw).unwrap();
        let sum: f64 = p.values().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
        prop_assert!(p.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn capacity_is_within_proposition_bounds(set in (2usize..7, 2usize..5)
        .prop_flat_map(|(m, c)| channel(m, c)))
    {
        let result = ba_capacity(&set, &BaConfig64::default());
        let c = set.num_classes() as f64;
        prop_assert!(result.capacity_bits >= 0.0);
        prop_assert!(result.capacity_bits <= c.log2() + 1e-9);
        prop_assert!(result.multiplicity >= 1.0);
        prop_assert!(result.multiplicity <= c + 1e-6);
        // m_c is exactly the exponential of the capacity.
        let rel = (result.multiplicity - result.capacity_bits.exp2()).abs()
            / result.multiplicity;
        prop_assert!(rel <= 1e-12);
    }

    #[test]
    fn capacity_is_invariant_under_consistent_permutations(
        set in channel(4, 3),
        row_swap in (0usize..4, 0usize..4),
        col_shift in 0usize..3,
    ) {
        let config = BaConfig64::default();
        let original = ba_capacity(&set, &config).capacity_bits;

        let mut rows: Vec<ProbVector64> = set.rows().to_vec();
        rows.swap(row_swap.0, row_swap.1);
        let rows: Vec<ProbVector64> = rows
            .into_iter()
            .map(|r| {
                let v = r.values();
                let rotated: Vec<f64> =
                    (0..v.len()).map(|k| v[(k + col_shift) % v.len()]).collect();
                ProbVector64::new(rotated).unwrap()
            })
            .collect();
        let ids = (0..rows.len()).map(|j| format!("m{j}")).collect();
        let permuted = ScoreSet64::new(rows, ids).unwrap();
        let shuffled = ba_capacity(&permuted, &config).capacity_bits;
        prop_assert!((original - shuffled).abs() <= 2.0 * config.tolerance + 1e-9);
    }

    #[test]
    fn discrepancy_never_exceeds_ambiguity(
        rows in vec(raw_scores(3), 12),
        losses in vec(0.1f64..0.9, 4),
        epsilon in 0.0f64..0.8,
    ) {
        // 3 samples × 4 models over 3 classes.
        let scores: Vec<ProbVector64> = rows
            .into_iter()
            .map(|r| ProbVector64::from_scores(r).unwrap())
            .collect();
        let tensor = ScoreTensor64::new(
            (0..3).map(|i| format!("s{i}")).collect(),
            (0..4).map(|j| format!("m{j}")).collect(),
            scores,
            Some(losses),
        )
        .unwrap();
        let spec = RashomonSpec64::new(RashomonMode::Relative, epsilon).unwrap();
        let a = ambiguity(&tensor, &spec).unwrap();
        let d = discrepancy(&tensor, &spec).unwrap();
        prop_assert!(d <= a);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn metrics_are_monotone_in_epsilon(
        rows in vec(raw_scores(2), 15),
        losses in vec(0.1f64..0.9, 5),
        eps in (0.0f64..0.4, 0.0f64..0.4),
    ) {
        let (e_small, e_delta) = eps;
        let e_large = e_small + e_delta;
        let scores: Vec<ProbVector64> = rows
            .into_iter()
            .map(|r| ProbVector64::from_scores(r).unwrap())
            .collect();
        let tensor = ScoreTensor64::new(
            (0..3).map(|i| format!("s{i}")).collect(),
            (0..5).map(|j| format!("m{j}")).collect(),
            scores,
            Some(losses),
        )
        .unwrap();
        let narrow = RashomonSpec64::new(RashomonMode::Relative, e_small).unwrap();
        let wide = RashomonSpec64::new(RashomonMode::Relative, e_large).unwrap();
        prop_assert!(ambiguity(&tensor, &narrow).unwrap() <= ambiguity(&tensor, &wide).unwrap());
        prop_assert!(
            discrepancy(&tensor, &narrow).unwrap() <= discrepancy(&tensor, &wide).unwrap()
        );

        let config = BaConfig64::default();
        let sub_narrow = filter_rashomon_set(&tensor, &narrow).unwrap();
        let sub_wide = filter_rashomon_set(&tensor, &wide).unwrap();
        for i in 0..3 {
            let small = ba_capacity(
                &tensor.score_set_for_sample(i, &sub_narrow).unwrap(),
                &config,
            )
            .capacity_bits;
            let large = ba_capacity(
                &tensor.score_set_for_sample(i, &sub_wide).unwrap(),
                &config,
            )
            .capacity_bits;
            prop_assert!(small <= large + config.tolerance);
        }
    }

    #[test]
    fn argmax_is_stable_under_positive_scaling(raw in raw_scores(4)) {
        let p = ProbVector64::from_scores(raw.clone()).unwrap();
        let doubled = ProbVector64::from_scores(raw.iter().map(|v| v * 2.0).collect()).unwrap();
        prop_assert_eq!(argmax_class(&p), argmax_class(&doubled));
    }
}
