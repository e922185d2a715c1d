use proptest::prelude::*;
use sharpkit::metrics::{gap, plcc, srcc, EvalRecord, Split};

/// Rank by counting: average rank = (#less) + (#equal + 1)/2.
fn count_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let less = v.iter().filter(|y| *y < x).count() as f64;
            let equal = v.iter().filter(|y| *y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn textbook_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

fn non_constant(v: &[f64]) -> bool {
    v.iter().any(|x| *x != v[0])
}

fn tied_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..=64).prop_flat_map(|n| {
        (prop::collection::vec(-4i32..4, n), prop::collection::vec(-100.0f64..100.0, n))
    })
    .prop_map(|(a, b)| (a.into_iter().map(f64::from).collect(), b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn srcc_matches_count_rank_oracle((p, s) in tied_pair()) {
        prop_assume!(non_constant(&p) && non_constant(&s));
        let oracle = textbook_pearson(&count_ranks(&p), &count_ranks(&s));
        prop_assert!((srcc(&p, &s).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn srcc_is_invariant_under_increasing_maps(
        (p, s) in (2usize..=40).prop_flat_map(|n| (
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
        ))
    ) {
        prop_assume!(non_constant(&p) && non_constant(&s));
        let base = srcc(&p, &s).unwrap();
        let mapped: Vec<f64> = p.iter().map(|x| x.exp() + x * x * x).collect();
        prop_assert_eq!(srcc(&mapped, &s).unwrap(), base);
        let mapped: Vec<f64> = s.iter().map(|x| 5.0 * x - 2.0).collect();
        prop_assert_eq!(srcc(&p, &mapped).unwrap(), base);
        prop_assert!((-1.0..=1.0).contains(&base));
    }

    #[test]
    fn plcc_affine_and_sign(
        (p, s) in (2usize..=40).prop_flat_map(|n| (
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
        )),
        a in 0.1f64..10.0,
        b in -10.0f64..10.0,
    ) {
        prop_assume!(non_constant(&p) && non_constant(&s));
        let base = plcc(&p, &s).unwrap();
        let moved: Vec<f64> = p.iter().map(|x| a * x + b).collect();
        prop_assert!((plcc(&moved, &s).unwrap() - base).abs() < 1e-12);
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        prop_assert!((plcc(&p, &neg).unwrap() + base).abs() < 1e-12);
    }

    #[test]
    fn srcc_equals_plcc_on_permutations(seed in any::<u64>(), n in 2usize..40) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut a: Vec<f64> = (1..=n).map(|v| v as f64).collect();
        let mut b = a.clone();
        a.shuffle(&mut rng);
        b.shuffle(&mut rng);
        prop_assert_eq!(srcc(&a, &b).unwrap(), plcc(&a, &b).unwrap());
    }

    #[test]
    fn gap_is_exact_difference(tr in -1.0f64..1.0, te in -1.0f64..1.0, tp in -1.0f64..1.0, sp in -1.0f64..1.0) {
        let train = EvalRecord { split: Split::Train, srcc: tr, plcc: tp, epoch: 4 };
        let test = EvalRecord { split: Split::Test, srcc: te, plcc: sp, epoch: 4 };
        let g = gap(&train, &test).unwrap();
        prop_assert_eq!(g.srcc_gap, tr - te);
        prop_assert_eq!(g.plcc_gap, tp - sp);
    }
}

#[test]
fn srcc_seeded_oracle() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let p: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
    let s: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
    let oracle = textbook_pearson(&count_ranks(&p), &count_ranks(&s));
    assert!((srcc(&p, &s).unwrap() - oracle).abs() < 1e-12);
}

#[test]
fn srcc_tie_example() {
    // ranks [1.5, 1.5, 3] against [1, 2, 3]
    let expected = textbook_pearson(&[1.5, 1.5, 3.0], &[1.0, 2.0, 3.0]);
    assert_eq!(srcc(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), expected);
}

#[test]
fn monotone_extremes() {
    let s = [0.1, 0.5, 0.7, 2.0];
    let up = [1.0, 4.0, 9.0, 16.0];
    let down = [-1.0, -4.0, -9.0, -16.0];
    assert_eq!(srcc(&up, &s).unwrap(), 1.0);
    assert_eq!(srcc(&down, &s).unwrap(), -1.0);
    assert!(srcc(&[1.0, 1.0, 1.0, 1.0], &s).is_err());
    assert!(plcc(&s, &[2.0; 4]).is_err());
}
