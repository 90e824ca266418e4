//! Single-electron detection events.
//!
//! Positions are drawn from the fringe intensity profile over a fixed
//! analysis window, event counts per time bin are Poisson distributed, and
//! the resulting frames can be histogrammed along the fringe direction.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream_rng, SimRng};

/// Number of knots in the tabulated inverse CDF.
pub const CDF_KNOTS: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("invalid fringe model: {0}")]
    InvalidModel(String),
    #[error("invalid acquisition config: {0}")]
    InvalidAcquisition(String),
    #[error("intensity profile integrates to zero over the window")]
    Unnormalizable,
    #[error("histogram needs at least {min} bins, got {got}")]
    TooFewBins { min: usize, got: usize },
    #[error("dark-region half-width must lie in (0, 0.25), got {0}")]
    InvalidHalfwidth(f64),
}

/// `sin(u)/u`, with `sinc(0) = 1`.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

/// Derivative of [`sinc`].
pub fn sinc_derivative(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        -u / 3.0
    } else {
        (u * u.cos() - u.sin()) / (u * u)
    }
}

/// Parameters of the fringe intensity
/// `I(x) = I0 (1 + C cos(2πx/s + φ0)) sinc²(2πx/s1 + φ1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeModel {
    pub mean_intensity: f64,
    pub contrast: f64,
    pub period: f64,
    pub phase: f64,
    pub envelope_width: f64,
    pub envelope_phase: f64,
}

impl FringeModel {
    pub fn new(
        mean_intensity: f64,
        contrast: f64,
        period: f64,
        phase: f64,
        envelope_width: f64,
        envelope_phase: f64,
    ) -> Result<Self, DetectorError> {
        let model = Self { mean_intensity, contrast, period, phase, envelope_width, envelope_phase };
        model.validate()?;
        Ok(model)
    }

    /// Unit-period fringes over `[0, periods]` with the sinc envelope centred
    /// in the window and its first zeros one full window width apart.
    pub fn centered(contrast: f64, periods: f64) -> Result<Self, DetectorError> {
        let envelope_width = 2.0 * periods;
        Self::new(1.0, contrast, 1.0, 0.0, envelope_width, -PI * periods / envelope_width)
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        let bad = |msg: &str| Err(DetectorError::InvalidModel(msg.to_string()));
        if !(0.0..=1.0).contains(&self.contrast) {
            return bad("contrast must lie in [0, 1]");
        }
        if !(self.period.is_finite() && self.period > 0.0) {
            return bad("fringe period must be positive");
        }
        if !(self.envelope_width.is_finite() && self.envelope_width > 0.0) {
            return bad("envelope width must be positive");
        }
        if !(self.mean_intensity.is_finite() && self.mean_intensity >= 0.0) {
            return bad("mean intensity must be non-negative");
        }
        if !(self.phase.is_finite() && self.envelope_phase.is_finite()) {
            return bad("phases must be finite");
        }
        Ok(())
    }

    pub fn with_contrast(self, contrast: f64) -> Self {
        Self { contrast, ..self }
    }

    pub fn fringe_argument(&self, x: f64) -> f64 {
        2.0 * PI * x / self.period + self.phase
    }

    pub fn envelope(&self, x: f64) -> f64 {
        let s = sinc(2.0 * PI * x / self.envelope_width + self.envelope_phase);
        s * s
    }
}

pub fn intensity_profile(model: &FringeModel, x: f64) -> f64 {
    model.mean_intensity * (1.0 + model.contrast * model.fringe_argument(x).cos()) * model.envelope(x)
}

/// Half-open interval `[lo, hi)` along the fringe direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self, DetectorError> {
        if lo.is_finite() && hi.is_finite() && hi > lo {
            Ok(Self { lo, hi })
        } else {
            Err(DetectorError::InvalidAcquisition(format!("empty window [{lo}, {hi})")))
        }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x < self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    /// Seconds per time bin.
    pub bin_duration: f64,
    /// Mean events per second inside the analysis window.
    pub pattern_rate: f64,
    pub window: Window,
    pub histogram_bins: usize,
    /// Extent of the detector along the fringe direction (y), `[0, height)`.
    pub height: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            bin_duration: 1.0,
            pattern_rate: 1250.0,
            window: Window { lo: 0.0, hi: 5.0 },
            histogram_bins: 100,
            height: 1.0,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<(), DetectorError> {
        let bad = |msg: String| Err(DetectorError::InvalidAcquisition(msg));
        if !(self.bin_duration.is_finite() && self.bin_duration > 0.0) {
            return bad(format!("bin duration must be positive, got {}", self.bin_duration));
        }
        if !(self.pattern_rate.is_finite() && self.pattern_rate > 0.0) {
            return bad(format!("pattern rate must be positive, got {}", self.pattern_rate));
        }
        if !(self.height.is_finite() && self.height > 0.0) {
            return bad(format!("detector height must be positive, got {}", self.height));
        }
        Window::new(self.window.lo, self.window.hi)?;
        if self.histogram_bins == 0 {
            return bad("histogram needs at least one bin".into());
        }
        Ok(())
    }

    pub fn mean_events_per_bin(&self) -> f64 {
        self.pattern_rate * self.bin_duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorFrame {
    pub bin_index: u64,
    pub events: Vec<Event>,
}

impl DetectorFrame {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Inverse-CDF sampler over a tabulated, normalized intensity profile.
#[derive(Debug, Clone)]
pub struct PositionSampler {
    window: Window,
    knots: Vec<f64>,
    cdf: Vec<f64>,
    norm: f64,
    model: FringeModel,
    // guide[j] is the last knot index whose CDF is <= j / guide.len()
    guide: Vec<u32>,
}

impl PositionSampler {
    pub fn new(model: &FringeModel, window: Window) -> Result<Self, DetectorError> {
        Self::with_knots(model, window, CDF_KNOTS)
    }

    pub fn with_knots(model: &FringeModel, window: Window, knots: usize) -> Result<Self, DetectorError> {
        model.validate()?;
        let knots = knots.max(2);
        let dx = window.len() / (knots - 1) as f64;
        let xs: Vec<f64> = (0..knots).map(|i| window.lo + i as f64 * dx).collect();
        // cumulative Simpson per knot interval (midpoint included)
        let mut cdf = Vec::with_capacity(knots);
        cdf.push(0.0);
        let mut acc = 0.0;
        let mut left = intensity_profile(model, xs[0]);
        for &x in &xs[1..] {
            let right = intensity_profile(model, x);
            let mid = intensity_profile(model, x - 0.5 * dx);
            acc += dx * (left + 4.0 * mid + right) / 6.0;
            cdf.push(acc);
            left = right;
        }
        if !(acc.is_finite() && acc > 0.0) {
            return Err(DetectorError::Unnormalizable);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        let guide_len = knots;
        let mut guide = Vec::with_capacity(guide_len);
        let mut k = 0usize;
        for j in 0..guide_len {
            let target = j as f64 / guide_len as f64;
            while k + 1 < knots - 1 && cdf[k + 1] <= target {
                k += 1;
            }
            guide.push(k as u32);
        }
        Ok(Self { window, knots: xs, cdf, norm: acc, model: *model, guide })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// Normalized sampling density at `x` (zero outside the window).
    pub fn density(&self, x: f64) -> f64 {
        if self.window.contains(x) {
            intensity_profile(&self.model, x) / self.norm
        } else {
            0.0
        }
    }

    /// Tabulated CDF, linear between knots.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.window.lo {
            return 0.0;
        }
        if x >= self.window.hi {
            return 1.0;
        }
        let dx = self.knots[1] - self.knots[0];
        let pos = (x - self.window.lo) / dx;
        let i = (pos.floor() as usize).min(self.knots.len() - 2);
        let f = pos - i as f64;
        self.cdf[i] + f * (self.cdf[i + 1] - self.cdf[i])
    }

    /// Map a uniform variate in `[0, 1)` to a position.
    pub fn invert(&self, u: f64) -> f64 {
        let g = ((u * self.guide.len() as f64) as usize).min(self.guide.len() - 1);
        let mut i = self.guide[g] as usize;
        let last = self.knots.len() - 2;
        while i < last && self.cdf[i + 1] <= u {
            i += 1;
        }
        let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
        let f = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        let x = self.knots[i] + f * (self.knots[i + 1] - self.knots[i]);
        x.min(self.window.hi - f64::EPSILON * self.window.hi.abs().max(1.0))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.invert(rng.random::<f64>())
    }
}

/// Height-dependent contrast, e.g. a beam passing close to a surface.
pub trait ContrastMap {
    fn contrast_at(&self, y: f64) -> f64;
}

impl<F: Fn(f64) -> f64> ContrastMap for F {
    fn contrast_at(&self, y: f64) -> f64 {
        self(y)
    }
}

/// Frame generator that caches the tabulated profile between bins.
#[derive(Debug, Clone)]
pub struct FrameSampler {
    sampler: PositionSampler,
    acq: AcquisitionConfig,
    count: Poisson<f64>,
}

impl FrameSampler {
    pub fn new(model: &FringeModel, acq: &AcquisitionConfig) -> Result<Self, DetectorError> {
        acq.validate()?;
        let sampler = PositionSampler::new(model, acq.window)?;
        let count =
            Poisson::new(acq.mean_events_per_bin()).map_err(|e| DetectorError::InvalidAcquisition(e.to_string()))?;
        Ok(Self { sampler, acq: *acq, count })
    }

    pub fn sampler(&self) -> &PositionSampler {
        &self.sampler
    }

    /// Poisson-distributed frame for `bin_index`, reproducible from `seed`.
    pub fn frame(&self, bin_index: u64, seed: u64) -> DetectorFrame {
        let mut rng = stream_rng(seed, bin_index);
        let n = self.count.sample(&mut rng) as usize;
        self.frame_with_count(bin_index, n, &mut rng)
    }

    /// Frame with exactly `n` events.
    pub fn frame_with_count(&self, bin_index: u64, n: usize, rng: &mut SimRng) -> DetectorFrame {
        let t0 = bin_index as f64 * self.acq.bin_duration;
        let events = (0..n)
            .map(|_| {
                let x = self.sampler.sample(rng);
                Event { t: bin_time(t0, self.acq.bin_duration, rng), x, y: rng.random::<f64>() * self.acq.height }
            })
            .collect();
        DetectorFrame { bin_index, events }
    }
}

fn bin_time(t0: f64, duration: f64, rng: &mut SimRng) -> f64 {
    let t = t0 + rng.random::<f64>() * duration;
    // rounding can land exactly on the next bin edge
    if t >= t0 + duration {
        t0 + duration * (1.0 - f64::EPSILON)
    } else {
        t
    }
}

pub fn sample_frame(
    model: &FringeModel,
    acq: &AcquisitionConfig,
    bin_index: u64,
    seed: u64,
) -> Result<DetectorFrame, DetectorError> {
    Ok(FrameSampler::new(model, acq)?.frame(bin_index, seed))
}

/// Frame whose contrast depends on the event height `y`.
///
/// `model.contrast` is ignored; each event takes its contrast from `map` at
/// a uniformly drawn height, and its position is drawn by rejection from the
/// contrast-free envelope.
pub fn sample_frame_with_map(
    model: &FringeModel,
    map: &dyn ContrastMap,
    acq: &AcquisitionConfig,
    bin_index: u64,
    seed: u64,
) -> Result<DetectorFrame, DetectorError> {
    acq.validate()?;
    let envelope = PositionSampler::new(&model.with_contrast(0.0), acq.window)?;
    let count =
        Poisson::new(acq.mean_events_per_bin()).map_err(|e| DetectorError::InvalidAcquisition(e.to_string()))?;
    let mut rng = stream_rng(seed, bin_index);
    let n = count.sample(&mut rng) as usize;
    let t0 = bin_index as f64 * acq.bin_duration;
    let mut events = Vec::with_capacity(n);
    for _ in 0..n {
        let y = rng.random::<f64>() * acq.height;
        let c = map.contrast_at(y).clamp(0.0, 1.0);
        let x = loop {
            let x = envelope.sample(&mut rng);
            let accept = (1.0 + c * model.fringe_argument(x).cos()) / (1.0 + c);
            if rng.random::<f64>() < accept {
                break x;
            }
        };
        events.push(Event { t: bin_time(t0, acq.bin_duration, &mut rng), x, y });
    }
    Ok(DetectorFrame { bin_index, events })
}

/// Event counts along the fringe direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub window: Window,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn from_positions<I: IntoIterator<Item = f64>>(positions: I, window: Window, bins: usize) -> Self {
        let mut counts = vec![0u64; bins];
        let scale = bins as f64 / window.len();
        for x in positions {
            if window.contains(x) {
                let i = (((x - window.lo) * scale) as usize).min(bins - 1);
                counts[i] += 1;
            }
        }
        Self { window, counts }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        self.window.len() / self.counts.len() as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.window.lo + (i as f64 + 0.5) * self.bin_width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins()).map(|i| self.center(i)).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(bin_center, count)` pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.counts.iter().enumerate().map(|(i, &c)| (self.center(i), c))
    }
}

/// Minimum bins for a histogram that is to be fitted.
pub const MIN_HISTOGRAM_BINS: usize = 20;

pub fn histogram(frame: &DetectorFrame, acq: &AcquisitionConfig) -> Result<Histogram, DetectorError> {
    if acq.histogram_bins < MIN_HISTOGRAM_BINS {
        return Err(DetectorError::TooFewBins { min: MIN_HISTOGRAM_BINS, got: acq.histogram_bins });
    }
    Ok(Histogram::from_positions(frame.events.iter().map(|e| e.x), acq.window, acq.histogram_bins))
}

/// Probability that a single electron lands within `±halfwidth·s` of a
/// dark-fringe centre inside `window`.
pub fn dark_fringe_exclusion_probability(
    model: &FringeModel,
    window: Window,
    halfwidth: f64,
) -> Result<f64, DetectorError> {
    if !(halfwidth > 0.0 && halfwidth < 0.25) {
        return Err(DetectorError::InvalidHalfwidth(halfwidth));
    }
    model.validate()?;
    let f = |x: f64| intensity_profile(model, x);
    let total = simpson(f, window.lo, window.hi, 20_000);
    if !(total.is_finite() && total > 0.0) {
        return Err(DetectorError::Unnormalizable);
    }
    let s = model.period;
    let half = halfwidth * s;
    // dark centres where the fringe argument equals π (mod 2π)
    let first = ((window.lo - half) / s - (PI - model.phase) / (2.0 * PI)).ceil() as i64;
    let mut k = first;
    let mut dark = 0.0;
    loop {
        let centre = ((PI - model.phase) / (2.0 * PI) + k as f64) * s;
        if centre - half >= window.hi {
            break;
        }
        let a = (centre - half).max(window.lo);
        let b = (centre + half).min(window.hi);
        if b > a {
            dark += simpson(f, a, b, 400);
        }
        k += 1;
    }
    Ok((dark / total).clamp(0.0, 1.0))
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) & !1;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(c: f64) -> FringeModel {
        FringeModel::centered(c, 5.0).unwrap()
    }

    #[test]
    fn dark_fringe_centre_is_dark_at_full_contrast() {
        let m = model(1.0);
        // fringe argument π at x = 0.5 with zero phase
        assert!(intensity_profile(&m, 0.5).abs() < 1e-15);
    }

    #[test]
    fn contrast_free_profile_ignores_fringes() {
        let a = FringeModel::new(2.0, 0.0, 1.0, 0.3, 10.0, -1.0).unwrap();
        let b = FringeModel::new(2.0, 0.0, 0.37, -2.0, 10.0, -1.0).unwrap();
        for x in [0.1, 1.3, 2.5, 4.9] {
            assert_eq!(intensity_profile(&a, x), intensity_profile(&b, x));
            assert_eq!(intensity_profile(&a, x), 2.0 * a.envelope(x));
        }
    }

    #[test]
    fn bright_centre_value() {
        let m = FringeModel::new(3.0, 0.7, 1.0, 0.0, 10.0, 0.0).unwrap();
        assert!((intensity_profile(&m, 0.0) - 1.7 * 3.0).abs() < 1e-12);
    }

    #[test]
    fn model_validation() {
        assert!(FringeModel::new(1.0, 1.1, 1.0, 0.0, 1.0, 0.0).is_err());
        assert!(FringeModel::new(1.0, 0.5, 0.0, 0.0, 1.0, 0.0).is_err());
        assert!(FringeModel::new(1.0, 0.5, 1.0, 0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn zero_intensity_cannot_be_sampled() {
        let m = FringeModel::new(0.0, 0.5, 1.0, 0.0, 10.0, 0.0).unwrap();
        let acq = AcquisitionConfig::default();
        assert_eq!(sample_frame(&m, &acq, 0, 1).unwrap_err(), DetectorError::Unnormalizable);
    }

    #[test]
    fn frame_times_stay_in_bin() {
        let acq = AcquisitionConfig { bin_duration: 0.5, ..Default::default() };
        let f = sample_frame(&model(0.5), &acq, 7, 11).unwrap();
        assert!(!f.is_empty());
        for e in &f.events {
            assert!(e.t >= 3.5 && e.t < 4.0);
            assert!(acq.window.contains(e.x));
            assert!(e.y >= 0.0 && e.y < acq.height);
        }
    }

    #[test]
    fn identical_seeds_identical_frames() {
        let acq = AcquisitionConfig::default();
        let a = sample_frame(&model(0.7), &acq, 3, 99).unwrap();
        let b = sample_frame(&model(0.7), &acq, 3, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_frame(&model(0.7), &acq, 3, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn histogram_edge_cases() {
        let acq = AcquisitionConfig::default();
        let empty = DetectorFrame { bin_index: 0, events: vec![] };
        let h = histogram(&empty, &acq).unwrap();
        assert_eq!(h.bins(), 100);
        assert!(h.counts.iter().all(|&c| c == 0));

        let one = DetectorFrame { bin_index: 0, events: vec![Event { t: 0.1, x: 2.52, y: 0.3 }] };
        let h = histogram(&one, &acq).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts[50], 1);
        assert!((h.bin_width() - 0.05).abs() < 1e-15);

        let outside = DetectorFrame {
            bin_index: 0,
            events: vec![Event { t: 0.0, x: -0.1, y: 0.0 }, Event { t: 0.0, x: 5.0, y: 0.0 }],
        };
        assert_eq!(histogram(&outside, &acq).unwrap().total(), 0);

        let coarse = AcquisitionConfig { histogram_bins: 10, ..Default::default() };
        assert!(matches!(histogram(&one, &coarse), Err(DetectorError::TooFewBins { .. })));
    }

    #[test]
    fn halfwidth_bounds() {
        let w = Window::new(0.0, 5.0).unwrap();
        assert!(dark_fringe_exclusion_probability(&model(1.0), w, 0.0).is_err());
        assert!(dark_fringe_exclusion_probability(&model(1.0), w, 0.25).is_err());
    }

    #[test]
    fn dark_probability_monotone_in_contrast() {
        let w = Window::new(0.0, 5.0).unwrap();
        let p = |c| dark_fringe_exclusion_probability(&model(c), w, 0.1).unwrap();
        let (p0, p5, p1) = (p(0.0), p(0.5), p(1.0));
        assert!(p1 < p5 && p5 < p0, "{p1} {p5} {p0}");
    }

    #[test]
    fn sampler_cdf_endpoints() {
        let s = PositionSampler::new(&model(0.7), Window::new(0.0, 5.0).unwrap()).unwrap();
        assert_eq!(s.cdf(-1.0), 0.0);
        assert_eq!(s.cdf(5.0), 1.0);
        assert!(s.invert(0.0) >= 0.0);
        assert!(s.invert(0.999_999_999) < 5.0);
    }
}
