use proptest::prelude::*;
use sharpkit::losses::{combined_loss, mae_loss, plcc_loss, rank_loss, smooth_l1_loss};
use sharpkit::metrics::plcc;
use sharpkit::{LossKind, LossSpec};

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

fn pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2..=max_len).prop_flat_map(|n| {
        (
            prop::collection::vec(-10.0f64..10.0, n),
            prop::collection::vec(-10.0f64..10.0, n),
        )
    })
}

fn brute_rank(pred: &[f64], scores: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..pred.len() {
        for j in 0..pred.len() {
            if i == j {
                continue;
            }
            let s = (scores[j] - scores[i]).signum() * ((scores[j] != scores[i]) as u8 as f64);
            total += ((pred[i] - pred[j]) * s).max(0.0);
        }
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn plcc_loss_is_affine_invariant((p, s) in pair(32), a in 0.1f64..10.0, b in -5.0f64..5.0) {
        prop_assume!(spread(&p) > 1e-3 && spread(&s) > 1e-3);
        let base = plcc_loss(&p, &s).unwrap();
        let moved: Vec<f64> = p.iter().map(|x| a * x + b).collect();
        prop_assert!((plcc_loss(&moved, &s).unwrap() - base).abs() < 1e-10);
        let neg: Vec<f64> = p.iter().map(|x| -x).collect();
        prop_assert!((plcc_loss(&neg, &s).unwrap() - (1.0 - base)).abs() < 1e-10);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn plcc_loss_agrees_with_plcc_metric((p, s) in pair(64)) {
        prop_assume!(spread(&p) > 1e-3 && spread(&s) > 1e-3);
        let r = plcc(&p, &s).unwrap();
        prop_assert!((plcc_loss(&p, &s).unwrap() - (1.0 - r) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn rank_loss_ignores_monotone_score_transforms((p, s) in pair(32)) {
        let base = rank_loss(&p, &s).unwrap();
        let cubed: Vec<f64> = s.iter().map(|x| x * x * x + 2.0 * x).collect();
        let shifted: Vec<f64> = s.iter().map(|x| x.exp()).collect();
        prop_assert_eq!(rank_loss(&p, &cubed).unwrap(), base);
        prop_assert_eq!(rank_loss(&p, &shifted).unwrap(), base);
    }

    #[test]
    fn rank_loss_matches_pair_enumeration_on_dyadic_batches(
        raw in (2usize..=64).prop_flat_map(|n| (
            prop::collection::vec(-512i32..512, n),
            prop::collection::vec(-8i32..8, n),
        ))
    ) {
        // Multiples of 1/64 keep every pair term and partial sum exact, so the
        // enumeration and the library must agree to the last bit.
        let (p, s) = raw;
        let p: Vec<f64> = p.into_iter().map(|v| v as f64 / 64.0).collect();
        let s: Vec<f64> = s.into_iter().map(f64::from).collect();
        prop_assert_eq!(rank_loss(&p, &s).unwrap(), brute_rank(&p, &s));
    }

    #[test]
    fn rank_loss_matches_pair_enumeration((p, s) in pair(64)) {
        let lib = rank_loss(&p, &s).unwrap();
        let brute = brute_rank(&p, &s);
        prop_assert!((lib - brute).abs() <= 1e-14 * brute.max(1.0));
    }

    #[test]
    fn losses_are_permutation_equivariant((p, s) in pair(48), seed in any::<u64>()) {
        prop_assume!(spread(&p) > 1e-3 && spread(&s) > 1e-3);
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut idx: Vec<usize> = (0..p.len()).collect();
        idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let pp: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
        let ss: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        prop_assert!(close(plcc_loss(&p, &s).unwrap(), plcc_loss(&pp, &ss).unwrap()));
        prop_assert!(close(rank_loss(&p, &s).unwrap(), rank_loss(&pp, &ss).unwrap()));
        prop_assert!(close(mae_loss(&p, &s).unwrap(), mae_loss(&pp, &ss).unwrap()));
        prop_assert!(close(smooth_l1_loss(&p, &s, 0.5).unwrap(), smooth_l1_loss(&pp, &ss, 0.5).unwrap()));
        for kind in [LossKind::PlccRank, LossKind::MaeRank] {
            let spec = LossSpec::of_kind(kind);
            prop_assert!(close(combined_loss(&spec, &p, &s).unwrap(), combined_loss(&spec, &pp, &ss).unwrap()));
        }
    }

    #[test]
    fn rank_loss_is_zero_for_agreeing_order(s in prop::collection::vec(-10.0f64..10.0, 2..32)) {
        let pred: Vec<f64> = s.iter().map(|x| 3.0 * x + 1.0).collect();
        prop_assert_eq!(rank_loss(&pred, &s).unwrap(), 0.0);
        let flat = vec![1.0; s.len()];
        prop_assert_eq!(rank_loss(&s, &flat).unwrap(), 0.0);
    }

    #[test]
    fn losses_are_nonnegative((p, s) in pair(32), delta in 0.01f64..5.0) {
        prop_assert!(mae_loss(&p, &s).unwrap() >= 0.0);
        prop_assert!(smooth_l1_loss(&p, &s, delta).unwrap() >= 0.0);
        prop_assert!(rank_loss(&p, &s).unwrap() >= 0.0);
    }
}

#[test]
fn mae_seeded_oracle() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let p: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
    let s: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
    let direct = p.iter().zip(&s).map(|(a, b)| (a - b).abs()).sum::<f64>() / 16.0;
    assert!((mae_loss(&p, &s).unwrap() - direct).abs() < 1e-15);
    assert_eq!(mae_loss(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
}

#[test]
fn plcc_direct_formula_oracle() {
    let p = [1.0, 2.0, 3.0];
    let s = [3.0, 1.0, 2.0];
    // centered: [-1,0,1] and [1,-1,0]; dot -1, norms sqrt(2) each
    let r: f64 = -1.0 / 2.0;
    assert!((plcc_loss(&p, &s).unwrap() - (1.0 - r) / 2.0).abs() < 1e-10);
}
