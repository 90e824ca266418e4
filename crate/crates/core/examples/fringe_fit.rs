//! Sample one detector frame and recover the fringe contrast, freely and
//! with the geometry held fixed.
//!
//!     cargo run --release --example fringe_fit -- 0.45 1250

use mwmodem::demod;
use mwmodem::detector::{self, AcquisitionConfig, FringeModel};

fn main() {
    let mut args = std::env::args().skip(1);
    let contrast: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.6);
    let rate: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1250.0);

    let model = FringeModel::centered(contrast, 5.0).unwrap();
    let acq = AcquisitionConfig { pattern_rate: rate, ..AcquisitionConfig::default() };
    let frame = detector::sample_frame(&model, &acq, 0, 42).unwrap();
    let hist = detector::histogram(&frame, &acq).unwrap();
    println!("{} events in {} bins", hist.total(), hist.bins());

    let guess = demod::initial_guess(&hist);
    println!("spectral guess: C = {:.3}, period = {:.3}", guess.contrast, guess.period);

    let fit = demod::fit_fringe(&hist, None).unwrap();
    println!(
        "fit: C = {:.3}, period = {:.4}, phase = {:.3}, {} iterations, converged {}",
        fit.contrast, fit.period, fit.phase, fit.iterations, fit.converged
    );
    println!("reduced Pearson residual {:.2}", fit.residual_norm);

    let fixed = demod::estimate_contrast_fixed_geometry(&hist, &model).unwrap();
    println!("fixed geometry: C = {fixed:.3} (true {contrast})");

    // counts against the fitted model
    let best = fit.model();
    let w = hist.bin_width();
    for (x, c) in hist.pairs().step_by(5) {
        let m = w * detector::intensity_profile(&best, x);
        println!("x = {x:.3}  counts {c:>4}  model {m:>7.1}");
    }
}
