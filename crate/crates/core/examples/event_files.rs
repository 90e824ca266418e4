//! Write simulated detector events to CSV, read them back, and rebuild the
//! contrast trace from the file.
//!
//!     cargo run --release --example event_files

use mwmodem::demod;
use mwmodem::detector::{AcquisitionConfig, FrameSampler, FringeModel};
use mwmodem::io::{self, EventRow};

fn main() {
    let acq = AcquisitionConfig::default();
    let dir = std::env::temp_dir().join("mwmodem-event-files");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("events.csv");

    let frames: Vec<_> = [0.6, 0.6, 0.27, 0.6, 0.27]
        .iter()
        .enumerate()
        .map(|(bin, &c)| {
            FrameSampler::new(&FringeModel::centered(c, 5.0).unwrap(), &acq).unwrap().frame(bin as u64, 11)
        })
        .collect();
    io::write_csv_file(&path, "events", io::event_rows(&frames)).unwrap();
    println!("wrote {}", path.display());

    let rows: Vec<EventRow> = io::read_csv_file(&path, "events").unwrap();
    let back = io::frames_from_rows(&rows);
    println!("read {} events in {} frames", rows.len(), back.len());

    let trace = demod::contrast_trace(&back, &acq).unwrap();
    for e in &trace.entries {
        println!("bin {}  C = {:.3}", e.bin, e.contrast);
    }
    let trace_path = dir.join("trace.csv");
    io::write_csv_file(&trace_path, "trace", io::trace_rows(&trace)).unwrap();
    println!("wrote {}", trace_path.display());
}
