//! Send a message through the simulated interferometer and decode it from
//! fitted fringe contrasts.
//!
//!     cargo run --release --example transmit_message -- "Hello" 7

use mwmodem::codec;
use mwmodem::link::{self, TransmissionSetup};

fn main() {
    let mut args = std::env::args().skip(1);
    let message = args.next().unwrap_or_else(|| "Matterwave modulation".to_string());
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    let setup = TransmissionSetup::reference();
    let schedule = codec::encode_message(&message, &setup.framing).unwrap();
    println!("{} bits, {} bins of {} s", schedule.bits.len(), schedule.len_bins(), setup.acquisition.bin_duration);
    println!("high C = {:.3}, low C = {:.3}", setup.high_contrast(), setup.low_contrast());

    let tx = link::transmit(&message, &setup, seed).unwrap();
    let failed = tx.result.trace.failed_bins().count();
    println!("fitted {} bins ({failed} failed fits)", tx.result.trace.len());

    match tx.decoded {
        Ok(d) => {
            println!("bit length {} bins, cutoff {:.3} (mean {:.3})", d.bins_per_bit, d.cutoff, d.mean_contrast);
            for (bar, bit) in d.bars.iter().zip(&d.bits.0).take(14) {
                println!("  {:.3} {}", bar, if *bit { '1' } else { '0' });
            }
            println!("  ...");
            println!("decoded: {:?}", d.text);
            println!("exact:   {}", d.text == message);
        }
        Err(e) => println!("decode failed: {e}"),
    }
}
