use layered3d::io;
use layered3d::layered3d_core::{ImageBuffer, Plane};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pfm_round_trip_is_bit_exact(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
        let mut s = seed;
        let data: Vec<f32> = (0..w * h)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                f32::from_bits((s >> 32) as u32)
            })
            .collect();
        let plane = Plane::from_vec(w, h, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.pfm");
        io::write_pfm(&p, &plane).unwrap();
        let back = io::read_pfm(&p).unwrap();
        prop_assert_eq!(back.dims(), (w, h));
        for (a, b) in back.data().iter().zip(plane.data()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn png_loads_stay_in_unit_range_and_within_quantization(
        (w, h, ch, data) in (1usize..12, 1usize..12, prop::sample::select(vec![1usize, 3, 4]))
            .prop_flat_map(|(w, h, ch)| (Just(w), Just(h), Just(ch), prop::collection::vec(0.0f32..=1.0, w * h * ch)))
    ) {
        let img = ImageBuffer::from_vec(w, h, ch, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (p16, p8) = (dir.path().join("a.png"), dir.path().join("b.png"));
        io::save_png16(&p16, &img).unwrap();
        io::save_png8(&p8, &img).unwrap();
        let a = io::load_image(&p16).unwrap();
        let b = io::load_image(&p8).unwrap();
        prop_assert_eq!(a.channels(), ch);
        for ((x, y), z) in a.data().iter().zip(b.data()).zip(img.data()) {
            prop_assert!((0.0..=1.0).contains(x) && (0.0..=1.0).contains(y));
            prop_assert!((x - z).abs() <= 0.5 / 65535.0 + 1e-7);
            prop_assert!((y - z).abs() <= 0.5 / 255.0 + 1e-7);
        }
    }
}
