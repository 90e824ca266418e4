mod common;

use mwmodem::detector::{
    self, dark_fringe_exclusion_probability, AcquisitionConfig, FrameSampler, FringeModel, PositionSampler, Window,
};

fn window() -> Window {
    Window::new(0.0, 5.0).unwrap()
}

#[test]
fn bin_counts_are_poisson() {
    let acq = AcquisitionConfig::default();
    let s = FrameSampler::new(&FringeModel::centered(0.6, 5.0).unwrap(), &acq).unwrap();
    let counts: Vec<f64> = (0..1000).map(|b| s.frame(b, 77).len() as f64).collect();
    let mean = counts.iter().sum::<f64>() / 1000.0;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / 999.0;
    assert!((mean - 1250.0).abs() < 3.0 * (1250.0f64 / 1000.0).sqrt(), "mean {mean}");
    let dispersion = var / mean;
    assert!((0.9..=1.1).contains(&dispersion), "dispersion {dispersion}");
}

#[test]
fn positions_follow_intensity() {
    for c in [0.0, 0.3, 1.0] {
        let model = FringeModel::centered(c, 5.0).unwrap();
        let sampler = PositionSampler::new(&model, window()).unwrap();
        let mut rng = mwmodem::rng::stream_rng(5, 0);
        let mut xs: Vec<f64> = (0..100_000).map(|_| sampler.sample(&mut rng)).collect();
        let (grid, cdf) = common::reference_cdf(&model, 0.0, 5.0, 20_000);
        let d = common::ks_distance(&mut xs, &grid, &cdf);
        assert!(d < 0.01, "C = {c}: KS {d}");
    }
}

#[test]
fn tabulated_density_is_normalized() {
    for c in [0.0, 0.6, 1.0] {
        let model = FringeModel::centered(c, 5.0).unwrap();
        let s = PositionSampler::new(&model, window()).unwrap();
        let n = 200_000;
        let h = 5.0 / n as f64;
        let integral: f64 = (0..n).map(|i| s.density((i as f64 + 0.5) * h)).sum::<f64>() * h;
        assert!((integral - 1.0).abs() < 1e-6, "C = {c}: {integral}");
        assert!((s.cdf(5.0) - 1.0).abs() < 1e-12 && s.cdf(0.0).abs() < 1e-12);
    }
}

#[test]
fn frames_are_reproducible_per_bin() {
    let acq = AcquisitionConfig::default();
    let model = FringeModel::centered(0.4, 5.0).unwrap();
    let a = detector::sample_frame(&model, &acq, 12, 3).unwrap();
    let b = FrameSampler::new(&model, &acq).unwrap().frame(12, 3);
    assert_eq!(a, b);
    assert_ne!(a, detector::sample_frame(&model, &acq, 13, 3).unwrap());
    assert!(a.events.iter().all(|e| (12.0..13.0).contains(&e.t) && window().contains(e.x)));
}

#[test]
fn height_map_modulates_contrast() {
    let model = FringeModel::centered(0.0, 5.0).unwrap();
    let acq = AcquisitionConfig { pattern_rate: 200_000.0, ..AcquisitionConfig::default() };
    // no fringes in the lower half, full contrast in the upper half
    let map = |y: f64| if y < 0.5 { 0.0 } else { 1.0 };
    let frame = detector::sample_frame_with_map(&model, &map, &acq, 0, 9).unwrap();
    let fixed = model.with_contrast(1.0);
    for (half, expect) in [(false, 0.0), (true, 1.0)] {
        let xs = frame.events.iter().filter(|e| (e.y >= 0.5) == half).map(|e| e.x);
        let hist = detector::Histogram::from_positions(xs, acq.window, 100);
        let c = mwmodem::demod::estimate_contrast_fixed_geometry(&hist, &fixed).unwrap();
        assert!((c - expect).abs() < 0.03, "half {half}: {c}");
    }
}

#[test]
fn dark_fringe_probability_vanishes_at_full_contrast() {
    let full = FringeModel::centered(1.0, 5.0).unwrap();
    let widths = [0.1, 0.05, 0.025, 0.0125, 0.00625];
    let p: Vec<f64> =
        widths.iter().map(|&hw| dark_fringe_exclusion_probability(&full, window(), hw).unwrap()).collect();
    assert!(p.windows(2).all(|w| w[1] < w[0]));
    assert!(p[4] < 1e-5);
    // intensity is quadratic at a dark centre, so halving the width divides by 8
    let ratio = p[3] / p[4];
    assert!((ratio - 8.0).abs() < 0.2, "ratio {ratio}");
    // any lost contrast leaves a finite floor proportional to the width
    let partial = FringeModel::centered(0.9, 5.0).unwrap();
    let q = dark_fringe_exclusion_probability(&partial, window(), 0.00625).unwrap();
    assert!(q > 100.0 * p[4]);
    assert!(dark_fringe_exclusion_probability(&full, window(), 0.3).is_err());
}

#[test]
fn histogram_rejects_too_few_bins() {
    let acq = AcquisitionConfig { histogram_bins: 10, ..AcquisitionConfig::default() };
    let frame =
        detector::sample_frame(&FringeModel::centered(0.5, 5.0).unwrap(), &AcquisitionConfig::default(), 0, 1).unwrap();
    assert!(detector::histogram(&frame, &acq).is_err());
}
