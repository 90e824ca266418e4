//! Contrast recovery from detector histograms.
//!
//! The full fit estimates all six fringe parameters by weighted nonlinear
//! least squares; the fixed-geometry estimator solves a two-term linear
//! problem when period, phases and envelope are already calibrated.

pub mod lm;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{
    histogram, sinc, sinc_derivative, AcquisitionConfig, DetectorError, DetectorFrame, FringeModel, Histogram,
    MIN_HISTOGRAM_BINS,
};
use lm::LmOptions;

/// Minimum number of counts for a histogram to be fitted.
pub const MIN_FIT_COUNTS: u64 = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DemodError {
    #[error("histogram has {bins} bins and {counts} counts; need at least {MIN_HISTOGRAM_BINS} bins and {MIN_FIT_COUNTS} counts")]
    InsufficientData { bins: usize, counts: u64 },
    #[error("all counts fall into a single bin")]
    Degenerate,
    #[error("normal equations are singular")]
    Singular,
    #[error("no frames to analyse")]
    EmptySequence,
    #[error("frame bin indices are not contiguous: expected {expected}, got {got}")]
    NonContiguous { expected: u64, got: u64 },
    #[error("slice height must be positive, got {0}")]
    InvalidSlice(f64),
    #[error("no fitted slices beyond the normalization distance {0} m")]
    NoNormalizationData(f64),
    #[error(transparent)]
    Detector(#[from] DetectorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub mean_intensity: f64,
    /// Fitted contrast, clamped to `[0, 1]`.
    pub contrast: f64,
    pub period: f64,
    pub phase: f64,
    pub envelope_width: f64,
    pub envelope_phase: f64,
    /// Reduced weighted residual norm.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn model(&self) -> FringeModel {
        FringeModel {
            mean_intensity: self.mean_intensity.max(0.0),
            contrast: self.contrast,
            period: self.period,
            phase: self.phase,
            envelope_width: self.envelope_width,
            envelope_phase: self.envelope_phase,
        }
    }
}

/// Poisson likelihood of histogram counts under the fringe model, expressed
/// as the deviance `Σ m - c + c ln(c/m)` with Fisher-scoring curvature.
struct PoissonFringe<'a> {
    x: Vec<f64>,
    counts: &'a [u64],
    bin_width: f64,
}

impl PoissonFringe<'_> {
    /// Expected count in each bin and its gradient with respect to the
    /// parameters `[I0, C, s, φ0, s1, φ1]`.
    fn expected(&self, p: &[f64], x: f64) -> (f64, [f64; 6]) {
        let (i0, c, s, s1) = (p[0], p[1], p[2], p[4]);
        let theta = 2.0 * PI * x / s + p[3];
        let u = 2.0 * PI * x / s1 + p[5];
        let sc = sinc(u);
        let env = sc * sc;
        let denv = 2.0 * sc * sinc_derivative(u);
        let (sin_t, cos_t) = theta.sin_cos();
        let f = 1.0 + c * cos_t;
        let w = self.bin_width;
        let m = w * i0 * f * env;
        let grad = [
            w * f * env,
            w * i0 * cos_t * env,
            w * i0 * c * sin_t * (2.0 * PI * x / (s * s)) * env,
            -w * i0 * c * sin_t * env,
            w * i0 * f * denv * (-2.0 * PI * x / (s1 * s1)),
            w * i0 * f * denv,
        ];
        (m, grad)
    }

    fn pearson(&self, p: &[f64]) -> f64 {
        self.x
            .iter()
            .zip(self.counts)
            .map(|(&x, &c)| {
                let m = self.expected(p, x).0.max(MIN_EXPECTED);
                (c as f64 - m).powi(2) / m
            })
            .sum()
    }
}

// Floor on the expected count in the curvature weights.
const MIN_EXPECTED: f64 = 1e-3;

impl lm::Objective for PoissonFringe<'_> {
    fn params(&self) -> usize {
        6
    }

    fn cost(&self, p: &[f64]) -> f64 {
        let mut dev = 0.0;
        for (&x, &c) in self.x.iter().zip(self.counts) {
            let m = self.expected(p, x).0;
            let c = c as f64;
            if c > 0.0 {
                if !(m > 0.0) {
                    return f64::INFINITY;
                }
                dev += m - c + c * (c / m).ln();
            } else {
                if m < 0.0 {
                    return f64::INFINITY;
                }
                dev += m;
            }
        }
        dev
    }

    fn linearize(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut fisher = vec![0.0; 36];
        let mut grad = vec![0.0; 6];
        for (&x, &c) in self.x.iter().zip(self.counts) {
            let (m, dm) = self.expected(p, x);
            let m = m.max(MIN_EXPECTED);
            let g = 1.0 - c as f64 / m;
            for a in 0..6 {
                grad[a] += g * dm[a];
                for b in a..6 {
                    fisher[a * 6 + b] += dm[a] * dm[b] / m;
                }
            }
        }
        for a in 0..6 {
            for b in 0..a {
                fisher[a * 6 + b] = fisher[b * 6 + a];
            }
        }
        (fisher, grad)
    }
}

fn check_fittable(hist: &Histogram) -> Result<(), DemodError> {
    let total = hist.total();
    if hist.bins() < MIN_HISTOGRAM_BINS || total < MIN_FIT_COUNTS {
        return Err(DemodError::InsufficientData { bins: hist.bins(), counts: total });
    }
    if hist.counts.iter().filter(|&&c| c > 0).count() <= 1 {
        return Err(DemodError::Degenerate);
    }
    Ok(())
}

/// Fourier component `Σ c_j exp(-i 2π x_j / period)` as `(re, im)`.
fn fourier(hist: &Histogram, period: f64) -> (f64, f64) {
    // bin centres are evenly spaced, so the phasor advances by a fixed rotation
    let (s0, c0) = (2.0 * PI * hist.center(0) / period).sin_cos();
    let (sd, cd) = (2.0 * PI * hist.bin_width() / period).sin_cos();
    let (mut pr, mut pi) = (c0, -s0);
    let mut re = 0.0;
    let mut im = 0.0;
    for &c in &hist.counts {
        re += c as f64 * pr;
        im += c as f64 * pi;
        (pr, pi) = (pr * cd + pi * sd, pi * cd - pr * sd);
    }
    (re, im)
}

/// Spectral initial guess: dominant spatial frequency, its phase and
/// normalized amplitude, plus an envelope centred on the count centroid.
pub fn initial_guess(hist: &Histogram) -> FringeModel {
    let w = hist.window.len();
    let power = |cycles: f64| {
        let (re, im) = fourier(hist, w / cycles);
        re * re + im * im
    };
    // at least two fringes in the window; lower frequencies are envelope
    let max_cycles = (hist.bins() / 2) as f64;
    let mut best = 2.0;
    let mut best_power = power(best);
    let mut k = 3.0;
    while k <= max_cycles {
        let pw = power(k);
        if pw > best_power {
            best = k;
            best_power = pw;
        }
        k += 1.0;
    }
    let mut refined = best;
    let mut f = best - 0.5;
    while f <= best + 0.5 {
        let pw = power(f);
        if f >= 2.0 && pw > best_power {
            refined = f;
            best_power = pw;
        }
        f += 0.02;
    }
    let period = w / refined;
    let total = hist.total() as f64;
    let (re, im) = fourier(hist, period);
    let contrast = (2.0 * (re * re + im * im).sqrt() / total).min(0.99);
    let phase = im.atan2(re);

    let centroid = hist.pairs().map(|(x, c)| x * c as f64).sum::<f64>() / total;
    let envelope_width = 2.0 * w;
    let envelope_phase = -2.0 * PI * centroid / envelope_width;
    let mut guess = FringeModel { mean_intensity: 1.0, contrast, period, phase, envelope_width, envelope_phase };
    guess.mean_intensity = rescale_intensity(hist, &guess);
    guess
}

/// Least-squares `I0` for a fixed shape.
fn rescale_intensity(hist: &Histogram, shape: &FringeModel) -> f64 {
    let unit = FringeModel { mean_intensity: 1.0, ..*shape };
    let predicted: f64 =
        hist.centers().iter().map(|&x| crate::detector::intensity_profile(&unit, x)).sum::<f64>() * hist.bin_width();
    if predicted > 0.0 {
        hist.total() as f64 / predicted
    } else {
        hist.total() as f64 / hist.window.len()
    }
}

fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    p
}

/// Fit the fringe intensity to a histogram.
///
/// This is a damped Gauss–Newton (Levenberg–Marquardt) iteration on the
/// Poisson likelihood: every step is a weighted least-squares solve with
/// weights `1 / model`, i.e. iteratively reweighted least squares. Without an
/// initial guess the starting point comes from [`initial_guess`]; with one,
/// its shape is kept and only the intensity scale is re-estimated.
pub fn fit_fringe(hist: &Histogram, initial: Option<&FringeModel>) -> Result<FitResult, DemodError> {
    check_fittable(hist)?;
    let start = match initial {
        Some(g) => {
            let mut g = *g;
            g.mean_intensity = rescale_intensity(hist, &g);
            g
        }
        None => initial_guess(hist),
    };
    let problem = PoissonFringe { x: hist.centers(), counts: &hist.counts, bin_width: hist.bin_width() };
    let p0 =
        [start.mean_intensity, start.contrast, start.period, start.phase, start.envelope_width, start.envelope_phase];
    let report = lm::minimize_objective(&problem, &p0, &LmOptions::default());
    let p = &report.params;
    let (mut contrast, mut period, mut phase) = (p[1], p[2], p[3]);
    let (mut envelope_width, mut envelope_phase) = (p[4], p[5]);
    if period < 0.0 {
        period = -period;
        phase = -phase;
    }
    if contrast < 0.0 {
        contrast = -contrast;
        phase += PI;
    }
    if envelope_width < 0.0 {
        envelope_width = -envelope_width;
        envelope_phase = -envelope_phase;
    }
    let dof = (problem.x.len() as f64 - 6.0).max(1.0);
    let residual_norm = (problem.pearson(&report.params) / dof).sqrt();
    Ok(FitResult {
        mean_intensity: p[0],
        contrast: contrast.clamp(0.0, 1.0),
        period,
        phase: wrap_phase(phase),
        envelope_width,
        envelope_phase,
        residual_norm,
        converged: report.converged && residual_norm.is_finite(),
        iterations: report.iterations,
    })
}

/// Contrast from a linear fit on `{envelope, envelope·cos(fringe)}` with the
/// fringe geometry held fixed.
pub fn estimate_contrast_fixed_geometry(hist: &Histogram, geometry: &FringeModel) -> Result<f64, DemodError> {
    let (mut see, mut seg, mut sgg, mut sec, mut sgc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, c) in hist.pairs() {
        let e = geometry.envelope(x);
        let g = e * geometry.fringe_argument(x).cos();
        let c = c as f64;
        see += e * e;
        seg += e * g;
        sgg += g * g;
        sec += e * c;
        sgc += g * c;
    }
    let det = see * sgg - seg * seg;
    if !(det.abs() > 1e-12 * see * sgg) {
        return Err(DemodError::Singular);
    }
    let a = (sec * sgg - sgc * seg) / det;
    let b = (see * sgc - seg * sec) / det;
    if !(a > 0.0) {
        return Err(DemodError::Singular);
    }
    Ok((b / a).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub bin: u64,
    pub contrast: f64,
    pub converged: bool,
}

/// One fitted contrast per time bin.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ContrastTrace {
    pub entries: Vec<TraceEntry>,
}

impl ContrastTrace {
    pub fn from_values(first_bin: u64, values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .map(|(i, &c)| TraceEntry { bin: first_bin + i as u64, contrast: c.clamp(0.0, 1.0), converged: true })
            .collect();
        Self { entries }
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.contrast).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn failed_bins(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().filter(|e| !e.converged).map(|e| e.bin)
    }
}

/// Fit one frame; failures become a flagged zero-contrast entry.
pub fn fit_frame(frame: &DetectorFrame, acq: &AcquisitionConfig) -> Result<TraceEntry, DemodError> {
    let hist = histogram(frame, acq)?;
    Ok(match fit_fringe(&hist, None) {
        Ok(fit) => TraceEntry { bin: frame.bin_index, contrast: fit.contrast, converged: fit.converged },
        Err(_) => TraceEntry { bin: frame.bin_index, contrast: 0.0, converged: false },
    })
}

pub fn contrast_trace(frames: &[DetectorFrame], acq: &AcquisitionConfig) -> Result<ContrastTrace, DemodError> {
    if frames.is_empty() {
        return Err(DemodError::EmptySequence);
    }
    let mut order: Vec<&DetectorFrame> = frames.iter().collect();
    order.sort_by_key(|f| f.bin_index);
    for pair in order.windows(2) {
        if pair[1].bin_index != pair[0].bin_index + 1 {
            return Err(DemodError::NonContiguous { expected: pair[0].bin_index + 1, got: pair[1].bin_index });
        }
    }
    let entries = order.into_iter().map(|f| fit_frame(f, acq)).collect::<Result<Vec<_>, _>>()?;
    Ok(ContrastTrace { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    /// Slice centre height above the surface, meters.
    pub distance: f64,
    pub events: usize,
    /// Fitted contrast; `None` for slices with too few events.
    pub raw_contrast: Option<f64>,
    /// Contrast relative to the undisturbed value.
    pub contrast: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastProfile {
    pub slice_height: f64,
    pub undisturbed_contrast: f64,
    pub points: Vec<ProfilePoint>,
}

/// Contrast versus height above a surface from horizontal slices of a frame.
///
/// Event `y` is the distance from the surface. The fringe geometry is first
/// calibrated on all events beyond `normalization_distance` and used as the
/// starting point of each slice fit; contrasts are normalized to the mean
/// over fitted slices beyond that distance.
pub fn contrast_profile_vs_distance(
    frame: &DetectorFrame,
    acq: &AcquisitionConfig,
    slice_height: f64,
    normalization_distance: f64,
) -> Result<ContrastProfile, DemodError> {
    if !(slice_height.is_finite() && slice_height > 0.0) {
        return Err(DemodError::InvalidSlice(slice_height));
    }
    if acq.histogram_bins < MIN_HISTOGRAM_BINS {
        return Err(DetectorError::TooFewBins { min: MIN_HISTOGRAM_BINS, got: acq.histogram_bins }.into());
    }
    let far = Histogram::from_positions(
        frame.events.iter().filter(|e| e.y > normalization_distance).map(|e| e.x),
        acq.window,
        acq.histogram_bins,
    );
    let calibration = fit_fringe(&far, None).map_err(|e| match e {
        DemodError::InsufficientData { .. } | DemodError::Degenerate => {
            DemodError::NoNormalizationData(normalization_distance)
        }
        other => other,
    })?;
    let geometry = calibration.model();

    let n_slices = (acq.height / slice_height).ceil() as usize;
    let mut slices: Vec<Vec<f64>> = vec![Vec::new(); n_slices];
    for e in &frame.events {
        if e.y >= 0.0 {
            let k = (e.y / slice_height) as usize;
            if k < n_slices {
                slices[k].push(e.x);
            }
        }
    }
    let mut points = Vec::with_capacity(n_slices);
    for (k, xs) in slices.into_iter().enumerate() {
        let distance = (k as f64 + 0.5) * slice_height;
        let events = xs.len();
        let hist = Histogram::from_positions(xs, acq.window, acq.histogram_bins);
        let (raw, converged) = if hist.total() < MIN_FIT_COUNTS {
            (None, false)
        } else {
            match fit_fringe(&hist, Some(&geometry)) {
                Ok(fit) => (Some(fit.contrast), fit.converged),
                Err(_) => (None, false),
            }
        };
        points.push(ProfilePoint { distance, events, raw_contrast: raw, contrast: None, converged });
    }
    let far_values: Vec<f64> =
        points.iter().filter(|p| p.distance > normalization_distance).filter_map(|p| p.raw_contrast).collect();
    if far_values.is_empty() {
        return Err(DemodError::NoNormalizationData(normalization_distance));
    }
    let undisturbed = far_values.iter().sum::<f64>() / far_values.len() as f64;
    if !(undisturbed > 0.0) {
        return Err(DemodError::NoNormalizationData(normalization_distance));
    }
    for p in &mut points {
        p.contrast = p.raw_contrast.map(|c| c / undisturbed);
    }
    Ok(ContrastProfile { slice_height, undisturbed_contrast: undisturbed, points })
}
