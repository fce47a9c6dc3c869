use proptest::prelude::*;

use twoway_relay::balance::{delta_scale, BisectionConfig};
use twoway_relay::bench::format_float;
use twoway_relay::channel::{correlation_matrix, psd_sqrt};
use twoway_relay::lm::{complexify_vector, realify_matrix, realify_vector};
use twoway_relay::sinr::{unvec, vec};
use twoway_relay::{CMatrix, CVector, RVector, C64};

fn cmatrix(n: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n)
        .prop_map(move |v| CMatrix::from_iterator(n, n, v.into_iter().map(|(re, im)| C64::new(re, im))))
}

proptest! {
    #[test]
    fn vec_unvec_round_trip(m in (1usize..7).prop_flat_map(cmatrix)) {
        prop_assert_eq!(unvec(&vec(&m)).unwrap(), m);
    }

    #[test]
    fn realified_quadratic_form_matches(m in cmatrix(4), v in prop::collection::vec(-1.0..1.0f64, 8)) {
        let w_hat = RVector::from_vec(v);
        let w: CVector = complexify_vector(&w_hat);
        let h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let complex = w.dotc(&(&h * &w)).re;
        let real = w_hat.dot(&(realify_matrix(&h) * &w_hat));
        prop_assert!((complex - real).abs() <= 1e-12 * (1.0 + complex.abs()));
        prop_assert_eq!(realify_vector(&w), w_hat);
    }

    #[test]
    fn correlation_square_root_squares_back(rho in 0.0..0.99f64, n in 1usize..8) {
        let theta = correlation_matrix(rho, n).unwrap();
        let root = psd_sqrt(&theta).unwrap();
        prop_assert!((&root * &root - &theta).amax() < 1e-10);
        prop_assert!((&root - root.transpose()).amax() < 1e-12);
    }

    #[test]
    fn delta_stays_in_range(snr in -50.0..80.0f64) {
        let d = delta_scale(snr, &BisectionConfig::default());
        prop_assert!((0.6..=1.0).contains(&d));
    }

    #[test]
    fn formatted_floats_parse_back(x in prop::num::f64::NORMAL) {
        let back: f64 = format_float(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-9 * x.abs());
    }
}
