use mwmodem::channel::{
    passive_tap, surface_attenuation, transmit_with_tap, DecoherenceProfile, LinkMonitor, LinkStatus, Tap,
    DEFAULT_DETECTION_THRESHOLD, MONITOR_WINDOW,
};
use mwmodem::codec::ThresholdMode;
use mwmodem::config::ExperimentConfig;
use mwmodem::experiment;
use mwmodem::link::TransmissionSetup;
use proptest::prelude::*;

proptest! {
    #[test]
    fn attenuation_is_monotone(h in 0.0f64..40e-6, dh in 0.0f64..10e-6, h0 in 0.5e-6f64..5e-6, p in 1.0f64..3.0) {
        let profile = DecoherenceProfile { scale_height: h0, exponent: p, ..DecoherenceProfile::default() };
        let a = surface_attenuation(h, &profile).unwrap();
        let b = surface_attenuation(h + dh, &profile).unwrap();
        prop_assert!(b >= a);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn taps_compose(c in proptest::collection::vec(0.0f64..=1.0, 1..50), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let twice = passive_tap(&passive_tap(&c, a).unwrap(), b).unwrap();
        let once = passive_tap(&c, a * b).unwrap();
        for (x, y) in twice.iter().zip(&once) {
            prop_assert!((x - y).abs() <= 2.0 * f64::EPSILON * y.abs());
        }
        prop_assert_eq!(passive_tap(&c, 1.0).unwrap(), c);
    }
}

#[test]
fn monitor_waits_for_a_full_window() {
    let mut m = LinkMonitor::new(DEFAULT_DETECTION_THRESHOLD, 0.6);
    for _ in 0..MONITOR_WINDOW - 1 {
        assert!(m.push(0.0));
    }
    assert!(!m.push(0.0));
    let mut m = LinkMonitor::new(DEFAULT_DETECTION_THRESHOLD, 0.6);
    assert!((0..1000).all(|i| m.push(if i % 2 == 0 { 0.271 } else { 0.6 }) || i < MONITOR_WINDOW));
}

#[test]
fn strong_tap_terminates_and_clean_link_stays_up() {
    let setup = TransmissionSetup::reference();
    for seed in 0..8 {
        let tapped =
            transmit_with_tap("Key", &setup, &Tap::Passive { rho: 0.1 }, DEFAULT_DETECTION_THRESHOLD, seed).unwrap();
        assert!(
            matches!(tapped.link, LinkStatus::Terminated { at_bin } if at_bin < 20),
            "seed {seed}: {:?}",
            tapped.link
        );
        assert!(tapped.decoded.is_err());
        let clean = transmit_with_tap("Key", &setup, &Tap::None, DEFAULT_DETECTION_THRESHOLD, seed).unwrap();
        assert_eq!(clean.link, LinkStatus::Up, "seed {seed}");
    }
}

#[test]
fn surface_tap_depends_on_distance() {
    // a lone "a" has too few 1 bits for the mean-fraction cutoff
    let mut setup = TransmissionSetup::reference();
    setup.framing.threshold_mode = ThresholdMode::TwoCluster;
    let profile = DecoherenceProfile::default();
    let near = Tap::Surface { distance: 1e-6, profile };
    let far = Tap::Surface { distance: 10e-6, profile };
    assert!(matches!(
        transmit_with_tap("a", &setup, &near, DEFAULT_DETECTION_THRESHOLD, 4).unwrap().link,
        LinkStatus::Terminated { .. }
    ));
    // single fit outliers can still defeat the start-pulse locator on some seeds
    let mut exact = 0;
    for seed in 0..10 {
        let out = transmit_with_tap("a", &setup, &far, DEFAULT_DETECTION_THRESHOLD, seed).unwrap();
        assert_eq!(out.link, LinkStatus::Up, "seed {seed}");
        exact += out.decoded.is_ok_and(|d| d.text == "a") as usize;
    }
    assert!(exact >= 8, "{exact}/10");
    assert!(transmit_with_tap("a", &setup, &Tap::Passive { rho: 2.0 }, 0.35, 0).is_err());
}

#[test]
fn surface_scan_recovers_profile() {
    let out = experiment::surface_scan(&ExperimentConfig::default()).unwrap();
    let s = &out.summary;
    assert!(s.max_deviation <= 0.1, "{}", s.max_deviation);
    assert!((s.fitted_profile.scale_height / 2e-6 - 1.0).abs() < 0.15);
    assert!(out.profile.points[0].contrast.unwrap() <= 0.1);
    let last = out.profile.points.last().unwrap();
    assert!((last.contrast.unwrap() - 1.0).abs() < 0.1);
}
