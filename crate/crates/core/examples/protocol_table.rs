//! The 27 shift combinations and what an eavesdropper can infer from one
//! measurement.
//!
//!     cargo run --example protocol_table

use mwmodem::keydist::{self, ShiftChoice};

fn main() {
    print!("{}", keydist::render_table());

    let kept = keydist::enumerate_table().into_iter().filter(|e| keydist::sift(e.ws, e.wr)).count();
    println!("\n{kept} of 27 combinations survive sifting\n");

    for e in ShiftChoice::ALL {
        for bit in [false, true] {
            let cells: Vec<String> =
                keydist::eavesdropper_consistent_cells(e, bit).iter().map(|c| c.to_string()).collect();
            println!("E shift {:>2}, measures {}: {}", e.label(), u8::from(bit), cells.join(" "));
        }
    }
}
