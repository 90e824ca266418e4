//! Contrast versus Wien filter voltage for the reference beam, and the two
//! operating points used for transmission.
//!
//!     cargo run --example wien_curve

use mwmodem::physics::{self, coherence_length, Interferometer};

fn main() {
    let ifm = Interferometer::reference();
    let (beam, wien) = (ifm.beam, ifm.wien);

    println!("wavelength       {:.2} pm", beam.wavelength() * 1e12);
    println!("coherence length {:.2} nm", coherence_length(&beam) * 1e9);
    println!("shift per 30 V   {:.2} nm", wien.shift_per_volt(&beam) * 30.0 * 1e9);
    println!("curve FWHM       {:.1} V", physics::wien_curve_fwhm(&wien, &beam));

    let grid: Vec<f64> = (-12..=6).map(|i| i as f64 * 5.0).collect();
    println!("\nU_WF   contrast");
    for (u, c) in physics::wien_curve(&wien, &beam, &grid).unwrap() {
        println!("{u:>5.0}  {c:.3}  {}", "#".repeat((c * 60.0).round() as usize));
    }

    let (hi, lo) = (ifm.contrast_at(-15.0), ifm.contrast_at(-45.0));
    println!("\nstate B (-15 V) C = {hi:.3}, state A (-45 V) C = {lo:.3}, ratio {:.3}", lo / hi);

    // a wider path separation shifts faster per volt, so the curve narrows
    let wide = beam.with_beam_separation(2.0 * beam.beam_separation()).unwrap();
    println!("FWHM at Δx = {:.1} µm: {:.1} V", wide.beam_separation() * 1e6, physics::wien_curve_fwhm(&wien, &wide));
}
