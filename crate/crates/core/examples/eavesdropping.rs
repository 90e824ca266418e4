//! A passive tap lowers the contrast; the receiver's sliding-mean monitor
//! notices and cuts the link.
//!
//!     cargo run --release --example eavesdropping

use mwmodem::channel::{self, DecoherenceProfile, Tap, DEFAULT_DETECTION_THRESHOLD};
use mwmodem::link::TransmissionSetup;

fn main() {
    let setup = TransmissionSetup::reference();
    let message = "Matterwave modulation";
    let profile = DecoherenceProfile::default();
    let taps = [
        ("clean channel", Tap::None),
        ("rho = 0.8", Tap::Passive { rho: 0.8 }),
        ("rho = 0.1", Tap::Passive { rho: 0.1 }),
        ("surface at 2 µm", Tap::Surface { distance: 2e-6, profile }),
        ("surface at 10 µm", Tap::Surface { distance: 10e-6, profile }),
    ];
    for (name, tap) in taps {
        let out = channel::transmit_with_tap(message, &setup, &tap, DEFAULT_DETECTION_THRESHOLD, 3).unwrap();
        let text = match &out.decoded {
            Ok(d) => format!("{:?}", d.text),
            Err(e) => format!("<{e}>"),
        };
        println!("{name:<18} factor {:.3}  {:?}  {} bins  {text}", out.attenuation, out.link, out.trace.len());
    }

    let regions = channel::BeamlineRegions::default();
    for z in [0.01, 0.05, 0.12] {
        println!("z = {:>4.0} mm: {:?}", z * 1e3, regions.region_at(z).unwrap());
    }
}
