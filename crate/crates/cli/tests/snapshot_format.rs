use std::path::Path;

use nlsdecay::snapshot::{decode, encode};
use nlsdecay_core::{make_geometry, Complex64, Field, Mode};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn geometry_strategy() -> impl Strategy<Value = (usize, Vec<usize>, Vec<f64>, Mode)> {
    prop_oneof![
        (prop::sample::select(vec![8usize, 16, 32]), 1.0f64..500.0)
            .prop_map(|(n, r)| (1, vec![n], vec![r], Mode::Radial3d)),
        (1usize..=3).prop_flat_map(|d| {
            (
                prop::collection::vec(prop::sample::select(vec![8usize, 16]), d),
                prop::collection::vec(0.5f64..100.0, d),
            )
                .prop_map(move |(s, l)| (d, s, l, Mode::PeriodicCartesian))
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encode_decode_is_lossless(
        (dim, sizes, lengths, mode) in geometry_strategy(),
        time in -1e6f64..1e6,
        seed in any::<u64>(),
    ) {
        let g = make_geometry(dim, &sizes, &lengths, mode).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<Complex64> = (0..g.len())
            .map(|_| Complex64::new(rng.gen_range(-1e3..1e3), rng.gen::<f64>() * 1e-300))
            .collect();
        let field = Field::new(g, time, values).unwrap();
        let bytes = encode(&field);
        let back = decode(&bytes, Path::new("mem")).unwrap();
        prop_assert!(back.geometry().same_as(field.geometry()));
        prop_assert_eq!(back.time().to_bits(), field.time().to_bits());
        for (a, b) in field.values().iter().zip(back.values()) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        prop_assert_eq!(encode(&back), bytes);
    }
}
