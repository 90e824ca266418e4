//! Contrast profile above a conducting surface: events are generated with a
//! height-dependent contrast, fitted slice by slice and normalized.
//!
//!     cargo run --release --example surface_scan

use mwmodem::channel;
use mwmodem::config::ExperimentConfig;
use mwmodem::experiment;

fn main() {
    let cfg = ExperimentConfig::default();
    let out = experiment::surface_scan(&cfg).unwrap();
    let truth = cfg.channel.profile;

    println!("{} events, undisturbed C = {:.3}", out.summary.events, out.summary.undisturbed_contrast);
    println!("  h [µm]  measured  model");
    for p in out.profile.points.iter().step_by(4) {
        let model = channel::surface_attenuation(p.distance, &truth).unwrap();
        match p.contrast {
            Some(c) => println!("  {:6.2}  {c:8.3}  {model:.3}", p.distance * 1e6),
            None => println!("  {:6.2}      -     {model:.3}", p.distance * 1e6),
        }
    }
    let f = out.summary.fitted_profile;
    println!(
        "fitted h0 = {:.2} µm, p = {:.2} (true {:.2} µm, {:.2})",
        f.scale_height * 1e6,
        f.exponent,
        truth.scale_height * 1e6,
        truth.exponent
    );
    println!("max |measured - model| = {:.3}", out.summary.max_deviation);
}
