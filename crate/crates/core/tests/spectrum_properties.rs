use delaylab::spectrum::{compute_spectrum_with_grid, count_roots, SpectralWindow};
use delaylab::Quasipolynomial;
use proptest::prelude::*;

prop_compose! {
    fn retarded_qp()(n in 1usize..4)(
        a in prop::collection::vec(-4.0f64..4.0, n),
        m in 0..n,
        b in prop::collection::vec(-3.0f64..3.0, n),
        tau in 0.1f64..1.5,
    ) -> Quasipolynomial {
        Quasipolynomial::new(a, b[..=m].to_vec(), tau).unwrap()
    }
}

prop_compose! {
    fn window()(x_min in -6.0f64..-1.0, width in 1.5f64..6.0, y_max in 2.0f64..12.0) -> SpectralWindow {
        SpectralWindow::new(x_min, x_min + width, y_max).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn winding_count_equals_located_multiplicities(qp in retarded_qp(), w in window()) {
        let spectrum = compute_spectrum_with_grid(&qp, &w, (160, 160)).unwrap();
        let located: usize = spectrum.roots.iter().map(|r| r.weight()).sum();
        prop_assert_eq!(located, spectrum.certified_count);
        prop_assert_eq!(count_roots(&qp, &spectrum.window).unwrap(), spectrum.certified_count as i64);
    }

    #[test]
    fn spectra_are_conjugate_symmetric(qp in retarded_qp(), w in window()) {
        let spectrum = compute_spectrum_with_grid(&qp, &w, (160, 160)).unwrap();
        for r in &spectrum.roots {
            prop_assert!(r.im >= 0.0);
            let s = r.value();
            let up = qp.evaluate(s).unwrap();
            let down = qp.evaluate(s.conj()).unwrap();
            prop_assert!((up.value.conj() - down.value).norm() <= 1e-14 * up.scale);
            if r.multiplicity == 1 {
                prop_assert!(down.value.norm() <= 1e-8 * down.scale, "{:?}", r);
            }
        }
        // non-real roots come in pairs, so the certified count has the parity of the real ones
        let real: usize = spectrum.roots.iter().filter(|r| r.is_real()).map(|r| r.multiplicity).sum();
        prop_assert_eq!((spectrum.certified_count - real) % 2, 0);
    }
}
