use proptest::prelude::*;
use vortmix_core::partition::{classify, phi, verify_lemma41, KVector, Label, PartitionParams};

fn large_units(kv: &KVector, p: &PartitionParams) -> Vec<bool> {
    let part = classify(kv, p).unwrap();
    let mut out = vec![false; kv.len()];
    for b in part.blocks.iter().filter(|b| b.label == Label::Large) {
        out[b.start..b.end].iter_mut().for_each(|u| *u = true);
    }
    out
}

fn kv_strategy() -> impl Strategy<Value = (usize, Vec<u32>)> {
    prop_oneof![Just(1usize), Just(2), Just(3), Just(4)]
        .prop_flat_map(|t| (Just(t), 1usize..7))
        .prop_flat_map(|(t, blocks)| (Just(t), prop::collection::vec(0u32..7, t * blocks)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn phi_sums_to_one(x in 0.0f64..1e6, r in 0.05f64..20.0) {
        let total: f64 = (0..40).map(|k| phi(k, x, r)).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn classification_tiles_the_window(
        (t, values) in kv_strategy(),
        beta in 0.5f64..30.0,
        frac in 0.01f64..1.0,
    ) {
        let kv = KVector::new(values).unwrap();
        let p = PartitionParams::new(t, beta, beta * frac, 1.0).unwrap();
        let part = classify(&kv, &p).unwrap();
        prop_assert_eq!(part.check_invariants(), Ok(()));
        prop_assert_eq!(part.blocks.first().unwrap().start, 0);
        prop_assert_eq!(part.blocks.last().unwrap().end, kv.len());
        prop_assert!(verify_lemma41(&part, &kv, &p).holds());
    }

    #[test]
    fn raising_classes_never_shrinks_large_set(
        (t, values) in kv_strategy(),
        bumps in prop::collection::vec(0u32..4, 24),
        beta in 0.5f64..30.0,
        frac in 0.01f64..1.0,
    ) {
        let p = PartitionParams::new(t, beta, beta * frac, 1.0).unwrap();
        let raised: Vec<u32> = values.iter().zip(&bumps).map(|(v, b)| v + b).collect();
        let before = large_units(&KVector::new(values).unwrap(), &p);
        let after = large_units(&KVector::new(raised).unwrap(), &p);
        prop_assert!(before.iter().zip(&after).all(|(b, a)| !b || *a));
    }

    #[test]
    fn zero_classes_are_all_small((t, values) in kv_strategy(), beta in 2.0f64..30.0) {
        // 2^0 = 1 must not exceed β′T
        let kv = KVector::new(vec![0; values.len()]).unwrap();
        let p = PartitionParams::new(t, beta, beta / 2.0, 1.0).unwrap();
        prop_assert!(classify(&kv, &p).unwrap().is_all_small());
    }
}

#[test]
fn large_blocks_are_separated_by_small_ones() {
    let p = PartitionParams::new(2, 6.0, 3.0, 1.0).unwrap();
    let kv = KVector::new(vec![0, 0, 5, 0, 0, 0, 0, 0, 0, 5, 0, 0]).unwrap();
    let part = classify(&kv, &p).unwrap();
    for pair in part.blocks.windows(2) {
        assert!(!(pair[0].label == Label::Large && pair[1].label == Label::Large));
    }
    assert!(part.blocks.iter().any(|b| b.label == Label::Large));
}
