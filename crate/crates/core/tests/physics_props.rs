use mwmodem::physics::{
    coherence_length, contrast_envelope, de_broglie_wavelength, wien_curve_fwhm, wien_longitudinal_shift,
    BeamParameters, Interferometer, OverlapModel, WienFilterState,
};
use proptest::prelude::*;

#[test]
fn wavelength_is_relativistic() {
    let nonrel = |u: f64| {
        let (h, m, e) = (6.626_070_15e-34, 9.109_383_701_5e-31, 1.602_176_634e-19);
        h / (2.0 * m * e * u).sqrt()
    };
    let lam = de_broglie_wavelength(1000.0).unwrap();
    assert!(lam < nonrel(1000.0));
    // correction factor 1 / sqrt(1 + eU / 2mc^2)
    let corr = (1.0f64 + 1000.0 / (2.0 * 510_998.95)).sqrt();
    assert!((lam * corr / nonrel(1000.0) - 1.0).abs() < 1e-6);
    assert!(de_broglie_wavelength(0.0).is_err());
}

#[test]
fn reference_beam_working_point() {
    let ifm = Interferometer::reference();
    let hi = ifm.contrast_at(-15.0);
    let lo = ifm.contrast_at(-45.0);
    assert!((hi - 0.6).abs() < 1e-12);
    assert!((lo - 0.271).abs() < 0.002, "{lo}");
    assert!((lo / hi - 0.451).abs() < 0.003);
}

#[test]
fn fwhm_halves_when_separation_doubles() {
    let beam = BeamParameters::reference();
    let wien = WienFilterState::reference(&beam);
    let wide = beam.with_beam_separation(2.0 * beam.beam_separation()).unwrap();
    let ratio = wien_curve_fwhm(&wien, &wide) / wien_curve_fwhm(&wien, &beam);
    assert!((ratio - 0.5).abs() < 1e-12);
}

proptest! {
    #[test]
    fn envelope_symmetric_about_centre(d in -500e-9f64..500e-9, centre in -100e-9f64..100e-9, cmax in 0.0f64..=1.0) {
        let m = OverlapModel::new(65e-9, centre).unwrap();
        let a = contrast_envelope(centre + d, &m, cmax);
        let b = contrast_envelope(centre - d, &m, cmax);
        prop_assert!((a - b).abs() <= 1e-14);
        prop_assert!(a <= cmax + 1e-15 && a >= 0.0);
    }

    #[test]
    fn envelope_decreases_away_from_centre(d1 in 0.0f64..300e-9, extra in 1e-12f64..300e-9) {
        let m = OverlapModel::new(65e-9, 0.0).unwrap();
        prop_assert!(contrast_envelope(d1 + extra, &m, 0.6) <= contrast_envelope(d1, &m, 0.6));
    }

    #[test]
    fn shift_is_linear_in_voltage(u in -100.0f64..100.0, du in -50.0f64..50.0, sep in 1e-6f64..50e-6) {
        let beam = BeamParameters::reference().with_beam_separation(sep).unwrap();
        let wien = WienFilterState::reference(&beam);
        let s = |v: f64| wien_longitudinal_shift(&wien.at_voltage(v), &beam);
        let step = s(u + du) - s(u);
        let expect = wien.shift_per_volt(&beam) * du;
        prop_assert!((step - expect).abs() <= 1e-9 * expect.abs().max(1e-12) + 1e-18);
        prop_assert!(s(wien.matched_voltage(&beam)).abs() < 1e-15);
    }

    #[test]
    fn coherence_length_scales_inversely_with_spread(factor in 0.1f64..10.0) {
        let beam = BeamParameters::reference();
        let wider = BeamParameters::new(
            beam.acceleration_voltage(),
            beam.energy_spread_ev() * factor,
            beam.beam_separation(),
            beam.max_contrast(),
            beam.source_rate(),
            beam.pattern_rate(),
        ).unwrap();
        let r = coherence_length(&beam) / coherence_length(&wider);
        prop_assert!((r - factor).abs() < 1e-9 * factor);
    }
}
