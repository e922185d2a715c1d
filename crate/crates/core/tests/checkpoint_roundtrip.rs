mod common;

use proptest::prelude::*;
use sharpkit::{checkpoint, MlpModel};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_is_bit_exact(seed in any::<u64>(), scale in prop::sample::select(vec![1e-300, 1e-8, 1.0, 1e8, 1e300])) {
        let mut r = common::rng(seed);
        let (mlp, params) = common::small_model(&mut r);
        let model = MlpModel::new(mlp, params.scale(scale)).unwrap();
        let text = checkpoint::to_string(&model);
        let back = checkpoint::from_str(&text).unwrap();
        prop_assert_eq!(&back.mlp, &model.mlp);
        let same = back.params.iter_values().zip(model.params.iter_values()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
        prop_assert_eq!(checkpoint::to_string(&back), text);
    }
}
