//! Key distribution sessions: clean channel, intercept-resend attacker, and
//! contrast-mode measurement through the detector model.
//!
//!     cargo run --release --example key_distribution

use mwmodem::keydist::{self, ContrastReadout, Eavesdropper, MeasureMode, SessionConfig};
use mwmodem::physics::BeamParameters;

fn show(name: &str, s: &keydist::Session) {
    let r = &s.result;
    println!(
        "{name:<16} sifted {:>5}/{}  disclosed {:>5}  mismatches {:>4} ({:.3})  key {} bits, {} errors  detected {}",
        r.sifted,
        r.rounds,
        r.disclosed,
        r.mismatches,
        r.mismatch_fraction,
        r.sender_key.len(),
        r.key_errors(),
        r.eavesdropper_detected
    );
}

fn main() {
    let bits = keydist::random_bits(10_000, 7);

    let clean = SessionConfig { disclosure_fraction: 0.2, seed: 1, ..Default::default() };
    show("clean", &keydist::run_session(&bits, &clean).unwrap());

    let attacked = SessionConfig { eavesdropper: Some(Eavesdropper::default()), ..clean };
    let s = keydist::run_session(&bits, &attacked).unwrap();
    show("intercept-resend", &s);
    let ones: Vec<_> = s.records.iter().filter_map(|r| r.eavesdropper_action).filter(|a| a.measured_bit).collect();
    let right = ones.iter().filter(|a| a.forward_correct).count();
    println!(
        "E measured '1' in {} rounds and guessed the sent bit in {:.3} of them",
        ones.len(),
        right as f64 / ones.len() as f64
    );

    let readout = ContrastReadout::for_beam(&BeamParameters::reference(), 3.0, 1000).unwrap();
    let contrast = SessionConfig {
        mode: MeasureMode::Contrast(readout),
        mismatch_threshold: keydist::CONTRAST_MODE_MISMATCH_THRESHOLD,
        ..clean
    };
    show("contrast mode", &keydist::run_session(&bits[..1000], &contrast).unwrap());

    let first = &s.records[0];
    println!("\nfirst transcript line: {}", serde_json::to_string(first).unwrap());
}
