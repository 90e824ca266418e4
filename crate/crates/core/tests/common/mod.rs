//! Oracles written independently of the library internals.
#![allow(dead_code)]

use mwmodem::detector::{intensity_profile, FringeModel};

/// Exact intercept-resend statistics by enumerating every
/// (bit, encoding, ws, wr, E shift, E interpretation) tuple with its
/// probability. Positions are plain integers; cells are (ws, encoded) pairs.
#[derive(Debug, Clone, Copy)]
pub struct InterceptStats {
    pub sifted: f64,
    pub mismatch_given_sifted: f64,
    pub correct_forward_given_one: f64,
}

pub fn intercept_resend_oracle() -> InterceptStats {
    let shifts = [-1i64, 0, 1];
    let cells: Vec<(i64, i64)> = shifts.iter().flat_map(|&ws| [-1i64, 0, 1].map(move |enc| (ws, enc))).collect();
    let (mut p_sift, mut p_bad) = (0.0, 0.0);
    let (mut p_one, mut p_one_right) = (0.0, 0.0);
    for bit in [0u8, 1] {
        let encodings: Vec<(i64, f64)> = if bit == 1 { vec![(0, 1.0)] } else { vec![(-1, 0.5), (1, 0.5)] };
        for &(enc, p_enc) in &encodings {
            for &ws in &shifts {
                for &wr in &shifts {
                    for &e in &shifts {
                        let tx = enc + ws;
                        let seen_one = tx + e == 0;
                        let consistent: Vec<&(i64, i64)> =
                            cells.iter().filter(|(cws, cenc)| (cenc + cws + e == 0) == seen_one).collect();
                        for (cws, cenc) in &consistent {
                            let p = 0.5 * p_enc / 27.0 / consistent.len() as f64;
                            let forwarded = cenc + cws;
                            let received_one = forwarded + wr == 0;
                            if ws + wr == 0 {
                                p_sift += p;
                                if received_one != (bit == 1) {
                                    p_bad += p;
                                }
                            }
                            if seen_one {
                                p_one += p;
                                if (*cenc == 0) == (bit == 1) {
                                    p_one_right += p;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    InterceptStats {
        sifted: p_sift,
        mismatch_given_sifted: p_bad / p_sift,
        correct_forward_given_one: p_one_right / p_one,
    }
}

/// Normalized CDF of the fringe intensity on `[lo, hi]` by composite
/// Simpson integration on a fine grid; returns the grid and CDF values.
pub fn reference_cdf(model: &FringeModel, lo: f64, hi: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let n = panels * 2;
    let h = (hi - lo) / n as f64;
    let f: Vec<f64> = (0..=n).map(|i| intensity_profile(model, lo + i as f64 * h)).collect();
    let mut xs = vec![lo];
    let mut cdf = vec![0.0];
    let mut acc = 0.0;
    for k in 0..panels {
        let (a, b, c) = (f[2 * k], f[2 * k + 1], f[2 * k + 2]);
        acc += h / 3.0 * (a + 4.0 * b + c);
        xs.push(lo + (2 * k + 2) as f64 * h);
        cdf.push(acc);
    }
    let total = acc;
    (xs, cdf.into_iter().map(|v| v / total).collect())
}

/// Kolmogorov–Smirnov distance between samples and a tabulated CDF
/// (linear interpolation between knots).
pub fn ks_distance(samples: &mut [f64], xs: &[f64], cdf: &[f64]) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let eval = |x: f64| {
        let i = xs.partition_point(|&k| k <= x).clamp(1, xs.len() - 1);
        let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
        cdf[i - 1] + t.clamp(0.0, 1.0) * (cdf[i] - cdf[i - 1])
    };
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = eval(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Expected shift table, transcribed by hand: for each (ws row, sender column) the transmitted
/// state and the receiver outcomes for wr = -Δ, no, +Δ.
pub const SHIFT_TABLE: [[(&str, [&str; 3]); 3]; 3] = [
    [("0₋₋", ["0₋₋₋", "0₋₋", "0₋"]), ("0₋", ["0₋₋", "0₋", "1"]), ("1", ["0₋", "1", "0₊"])],
    [("0₋", ["0₋₋", "0₋", "1"]), ("1", ["0₋", "1", "0₊"]), ("0₊", ["1", "0₊", "0₊₊"])],
    [("1", ["0₋", "1", "0₊"]), ("0₊", ["1", "0₊", "0₊₊"]), ("0₊₊", ["0₊", "0₊₊", "0₊₊₊"])],
];

/// Cells an eavesdropper cannot rule out, transcribed by hand: (E shift, measured bit, cells).
pub const EAVESDROPPER_CASES: [(i64, bool, &[(u8, u8)]); 6] = [
    (0, false, &[(1, 1), (1, 2), (2, 1), (2, 3), (3, 2), (3, 3)]),
    (0, true, &[(1, 3), (2, 2), (3, 1)]),
    (-1, false, &[(1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (3, 1), (3, 3)]),
    (-1, true, &[(2, 3), (3, 2)]),
    (1, false, &[(1, 1), (1, 3), (2, 2), (2, 3), (3, 1), (3, 2), (3, 3)]),
    (1, true, &[(1, 2), (2, 1)]),
];
