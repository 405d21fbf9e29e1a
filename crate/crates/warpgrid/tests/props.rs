//! Property tests for the algebraic invariants.

use num_complex::Complex64;
use proptest::prelude::*;
use warpgrid::*;

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pad_crop_adjoint_identity(
        data in complex_vec(8 * 8),
        target in complex_vec(20 * 12),
    ) {
        let x = ComplexGrid::new(vec![8, 8], Space::Image, data).unwrap();
        let y = ComplexGrid::new(vec![20, 12], Space::Image, target).unwrap();
        let lhs = inner(zero_pad(&x, &[20, 12]).unwrap().data(), y.data());
        let rhs = inner(x.data(), crop_center(&y, &[8, 8]).unwrap().data());
        let denom = (norm2(x.data()) * norm2(y.data())).max(1e-12);
        prop_assert!((lhs - rhs).norm() / denom < 1e-14);
        // and the pair is a bit-exact round trip
        let roundtrip = crop_center(&zero_pad(&x, &[20, 12]).unwrap(), &[8, 8]).unwrap();
        prop_assert_eq!(roundtrip.data(), x.data());
    }

    #[test]
    fn soft_threshold_shrinks_magnitude_and_keeps_phase(
        values in complex_vec(32),
        t in 0.0f64..2.0,
    ) {
        let mut out = values.clone();
        soft_threshold(&mut out, t);
        for (before, after) in values.iter().zip(&out) {
            let want = (before.norm() - t).max(0.0);
            prop_assert!((after.norm() - want).abs() < 1e-12);
            if after.norm() > 1e-12 {
                let phase_diff = (after / before).arg();
                prop_assert!(phase_diff.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn phase_shift_preserves_magnitude_and_cancels(
        values in complex_vec(24),
        sx in -3.0f64..3.0,
        sy in -3.0f64..3.0,
    ) {
        let coords: Vec<f64> = (0..48).map(|i| (i as f64 * 0.37).sin() * 7.0).collect();
        let set = NonCartesianSet::new(2, coords.clone(), values.clone()).unwrap();
        let shifted = apply_phase_shift(&set, &[sx, sy], &[16, 16]).unwrap();
        for (a, b) in shifted.iter().zip(&values) {
            prop_assert!((a.norm() - b.norm()).abs() <= 1e-15 * b.norm().max(1e-30));
        }
        let set2 = NonCartesianSet::new(2, coords, shifted).unwrap();
        let back = apply_phase_shift(&set2, &[-sx, -sy], &[16, 16]).unwrap();
        let denom = norm2(&values).max(1e-12);
        let diff: f64 = back
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        prop_assert!(diff / denom < 1e-13);
    }

    #[test]
    fn haar_roundtrip_and_energy(
        data in complex_vec(16 * 16),
        levels in 1usize..4,
    ) {
        let w = HaarWavelet::new(levels).unwrap();
        let coeffs = w.forward(&data, &[16, 16]).unwrap();
        prop_assert!((norm2(&coeffs) - norm2(&data)).abs() <= 1e-13 * norm2(&data).max(1e-12));
        let back = w.inverse(&coeffs, &[16, 16]).unwrap();
        let denom = norm2(&data).max(1e-12);
        let diff: f64 = back
            .iter()
            .zip(&data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        prop_assert!(diff / denom < 1e-13);
    }

    #[test]
    fn kernel_is_even_and_compactly_supported(d in 0.0f64..4.0) {
        let spec = KernelSpec::default();
        prop_assert_eq!(kernel_eval(&spec, d), kernel_eval(&spec, -d));
        if d > 2.0 {
            prop_assert_eq!(kernel_eval(&spec, d), 0.0);
        } else {
            prop_assert!(kernel_eval(&spec, d) >= 0.0);
        }
    }

    #[test]
    fn fft_unitarity_on_random_grids(data in complex_vec(16 * 16)) {
        let g = ComplexGrid::new(vec![16, 16], Space::Image, data).unwrap();
        let f = fft_unitary(&g, Direction::Forward).unwrap();
        prop_assert!((norm2(f.data()) - norm2(g.data())).abs() <= 1e-13 * norm2(g.data()).max(1e-12));
        let back = fft_unitary(&f, Direction::Inverse).unwrap();
        let denom = norm2(g.data()).max(1e-12);
        let diff: f64 = back
            .data()
            .iter()
            .zip(g.data())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        prop_assert!(diff / denom < 1e-13);
    }
}
