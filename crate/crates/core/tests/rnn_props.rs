use moduli::pruning::{MaskSet, PruneMask};
use moduli::rnn::{softmax, OptimizerConfig, OptimizerState, RnnParams, TensorId};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{analytic, bptt_max_rel_error, case};

fn hidden_masks(params: &RnnParams, seed: u64) -> MaskSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = MaskSet::default();
    for (k, layer) in params.layers.iter().enumerate() {
        let (r, c) = layer.w_hh.dim();
        let mask = Array2::from_shape_simple_fn((r, c), || u8::from(rng.random_bool(0.6)));
        set.insert(TensorId::HiddenWeights(k), PruneMask::from_mask(mask, 40.0));
    }
    set
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn bptt_matches_central_differences(seed in any::<u64>(), relu in any::<bool>(), two in any::<bool>(), ce in any::<bool>()) {
        let c = case(seed, relu, two, ce);
        let (worst, skipped) = bptt_max_rel_error(&c);
        prop_assert!(worst < 1e-4, "max relative error {}", worst);
        prop_assert!(skipped <= 2, "{} entries straddle a kink", skipped);
    }

    #[test]
    fn training_is_bitwise_deterministic(seed in any::<u64>(), ce in any::<bool>()) {
        let run = || {
            let mut c = case(seed, true, true, ce);
            let masks = hidden_masks(&c.params, seed);
            masks.apply(&mut c.params).unwrap();
            let mut opt = OptimizerState::new(OptimizerConfig::adam(1e-2).with_clip(0.5), &c.params).unwrap();
            for _ in 0..5 {
                let mut g = analytic(&c);
                opt.step(&mut c.params, &mut g, Some(&masks)).unwrap();
            }
            c.params
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn masked_entries_absorb_every_update(seed in any::<u64>(), adam in any::<bool>(), steps in 1usize..8) {
        let mut c = case(seed, false, true, false);
        let masks = hidden_masks(&c.params, seed ^ 9);
        let cfg = if adam { OptimizerConfig::adam(5e-2) } else { OptimizerConfig::sgd(0.3) };
        let mut opt = OptimizerState::new(cfg, &c.params).unwrap();
        for _ in 0..steps {
            let mut g = analytic(&c);
            opt.step(&mut c.params, &mut g, Some(&masks)).unwrap();
        }
        for (id, mask) in masks.iter() {
            let w = c.params.matrix(*id).unwrap();
            let leaked: f64 = w
                .iter()
                .zip(mask.mask().iter())
                .filter(|(_, &m)| m == 0)
                .map(|(v, _)| v * v)
                .sum();
            prop_assert_eq!(leaked, 0.0);
        }
    }
}

proptest! {
    #[test]
    fn softmax_is_a_distribution(v in prop::collection::vec(-800.0f64..800.0, 1..40)) {
        let s = softmax(&v).unwrap();
        prop_assert!(s.iter().all(|&x| x >= 0.0));
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}
