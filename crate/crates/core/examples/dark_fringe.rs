//! Single-electron thought experiment: at full contrast no electron lands
//! at a dark-fringe centre, so one hit there reveals lost contrast.
//!
//!     cargo run --example dark_fringe

use mwmodem::detector::{dark_fringe_exclusion_probability, FringeModel, Window};

fn main() {
    let window = Window::new(0.0, 5.0).unwrap();
    println!("halfwidth   C = 1.0     C = 0.9     C = 0.5");
    for hw in [0.2, 0.1, 0.05, 0.02, 0.01, 0.005] {
        let p: Vec<f64> = [1.0, 0.9, 0.5]
            .iter()
            .map(|&c| dark_fringe_exclusion_probability(&FringeModel::centered(c, 5.0).unwrap(), window, hw).unwrap())
            .collect();
        println!("{hw:>9}   {:.3e}   {:.3e}   {:.3e}", p[0], p[1], p[2]);
    }
    // per-electron detection chance of a tap that drops C from 1 to 0.9
    let m = FringeModel::centered(0.9, 5.0).unwrap();
    let p = dark_fringe_exclusion_probability(&m, window, 0.05).unwrap();
    println!("\nelectrons until a dark-region hit is expected at C = 0.9: {:.0}", 1.0 / p);
}
