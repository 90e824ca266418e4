//! The transmission medium between Wien filter and detector.
//!
//! Passive eavesdropping is modelled as contrast attenuation: a conducting
//! surface near the separated paths decoheres the electrons, and so does any
//! measuring device in the secure region. The attenuation near a surface
//! follows the saturating exponential `1 - exp(-(h/h0)^p)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, CodecError, Decoded};
use crate::demod::lm::{self, LeastSquares, LmOptions};
use crate::demod::{ContrastProfile, ContrastTrace, TraceEntry};
use crate::detector::{ContrastMap, FringeModel};
use crate::link::{self, LinkError, TransmissionSetup};

/// Sliding-window length of the link monitor, in bins.
pub const MONITOR_WINDOW: usize = 10;
/// Default monitor threshold as a fraction of the expected high contrast.
///
/// Must stay below the low/high contrast ratio of the two Wien states
/// (about 0.45 for the reference setup), or runs of zeros trip the monitor.
pub const DEFAULT_DETECTION_THRESHOLD: f64 = 0.35;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("distance from the surface must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("attenuation factor must lie in [0, 1], got {0}")]
    InvalidFactor(f64),
    #[error("invalid decoherence profile: {0}")]
    InvalidProfile(String),
    #[error("invalid beamline regions: {0}")]
    InvalidRegions(String),
    #[error("position {0} m lies outside the beamline")]
    OutsideBeamline(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileForm {
    #[default]
    SaturatingExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoherenceProfile {
    pub form: ProfileForm,
    /// Height at which the attenuation reaches `1 - 1/e`, meters.
    pub scale_height: f64,
    pub exponent: f64,
    /// Contrast far away from the surface.
    pub undisturbed_contrast: f64,
}

impl Default for DecoherenceProfile {
    fn default() -> Self {
        Self {
            form: ProfileForm::SaturatingExponential,
            scale_height: 2.0e-6,
            exponent: 2.0,
            undisturbed_contrast: 0.7,
        }
    }
}

impl DecoherenceProfile {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.scale_height.is_finite() && self.scale_height > 0.0) {
            return Err(ChannelError::InvalidProfile(format!("scale height {}", self.scale_height)));
        }
        if !(self.exponent.is_finite() && self.exponent > 0.0) {
            return Err(ChannelError::InvalidProfile(format!("exponent {}", self.exponent)));
        }
        if !(0.0..=1.0).contains(&self.undisturbed_contrast) {
            return Err(ChannelError::InvalidProfile(format!("undisturbed contrast {}", self.undisturbed_contrast)));
        }
        Ok(())
    }

    /// Attenuation without argument checks; `h` is clamped at zero.
    pub fn factor(&self, h: f64) -> f64 {
        match self.form {
            ProfileForm::SaturatingExponential => 1.0 - (-(h.max(0.0) / self.scale_height).powf(self.exponent)).exp(),
        }
    }
}

/// Contrast retained at height `h` above the surface.
pub fn surface_attenuation(h: f64, profile: &DecoherenceProfile) -> Result<f64, ChannelError> {
    if !(h >= 0.0) {
        return Err(ChannelError::NegativeDistance(h));
    }
    profile.validate()?;
    Ok(profile.factor(h))
}

/// `(h, attenuation)` samples for export.
pub fn profile_table(profile: &DecoherenceProfile, heights: &[f64]) -> Result<Vec<(f64, f64)>, ChannelError> {
    heights.iter().map(|&h| Ok((h, surface_attenuation(h, profile)?))).collect()
}

/// Multiply every contrast by `rho`.
pub fn passive_tap(contrasts: &[f64], rho: f64) -> Result<Vec<f64>, ChannelError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(ChannelError::InvalidFactor(rho));
    }
    Ok(contrasts.iter().map(|c| c * rho).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Between the Wien filter and the beam overlap: partial waves are
    /// still separated and carry no readable pattern.
    Secure,
    /// Between overlap and detector: the fringe pattern already exists.
    Insecure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeamlineRegions {
    pub secure_length: f64,
    pub insecure_length: f64,
    pub total: f64,
}

impl Default for BeamlineRegions {
    fn default() -> Self {
        Self { secure_length: 0.038, insecure_length: 0.102, total: 0.140 }
    }
}

impl BeamlineRegions {
    pub fn new(secure_length: f64, insecure_length: f64) -> Result<Self, ChannelError> {
        let r = Self { secure_length, insecure_length, total: secure_length + insecure_length };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.secure_length >= 0.0 && self.insecure_length >= 0.0) {
            return Err(ChannelError::InvalidRegions("lengths must be non-negative".into()));
        }
        if (self.secure_length + self.insecure_length - self.total).abs() > 1e-12 * self.total.abs().max(1.0) {
            return Err(ChannelError::InvalidRegions(format!(
                "secure {} + insecure {} != total {}",
                self.secure_length, self.insecure_length, self.total
            )));
        }
        Ok(())
    }

    /// Region at distance `z` downstream of the Wien filter centre.
    pub fn region_at(&self, z: f64) -> Result<Region, ChannelError> {
        if !(0.0..=self.total).contains(&z) {
            return Err(ChannelError::OutsideBeamline(z));
        }
        Ok(if z < self.secure_length { Region::Secure } else { Region::Insecure })
    }
}

/// Fringe pattern whose contrast depends on the height above a surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceScene {
    pub base: FringeModel,
    pub profile: DecoherenceProfile,
}

impl SurfaceScene {
    pub fn contrast_at_height(&self, y: f64) -> f64 {
        self.profile.undisturbed_contrast * self.profile.factor(y)
    }

    pub fn model_at(&self, y: f64) -> FringeModel {
        self.base.with_contrast(self.contrast_at_height(y))
    }
}

impl ContrastMap for SurfaceScene {
    fn contrast_at(&self, y: f64) -> f64 {
        self.contrast_at_height(y)
    }
}

/// Scene for a surface below the beam; also returns the fringe model at
/// each requested distance.
pub fn build_surface_scene(
    base: &FringeModel,
    distances: &[f64],
    profile: &DecoherenceProfile,
) -> Result<(SurfaceScene, Vec<(f64, FringeModel)>), ChannelError> {
    profile.validate()?;
    let scene = SurfaceScene { base: *base, profile: *profile };
    let models = distances
        .iter()
        .map(|&h| if h < 0.0 { Err(ChannelError::NegativeDistance(h)) } else { Ok((h, scene.model_at(h))) })
        .collect::<Result<_, _>>()?;
    Ok((scene, models))
}

struct ProfileFit<'a> {
    points: &'a [(f64, f64)],
}

impl LeastSquares for ProfileFit<'_> {
    fn params(&self) -> usize {
        2
    }
    fn observations(&self) -> usize {
        self.points.len()
    }
    // parameters: ln h0 (h0 in µm), ln p
    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let (h0, k) = (p[0].exp(), p[1].exp());
        for (o, &(h, y)) in out.iter_mut().zip(self.points) {
            *o = 1.0 - (-(h / h0).powf(k)).exp() - y;
        }
    }
    fn jacobian(&self, p: &[f64], out: &mut [f64]) {
        let (h0, k) = (p[0].exp(), p[1].exp());
        for (i, &(h, _)) in self.points.iter().enumerate() {
            let z = h / h0;
            if z <= 0.0 {
                out[2 * i] = 0.0;
                out[2 * i + 1] = 0.0;
                continue;
            }
            let zk = z.powf(k);
            let e = (-zk).exp();
            out[2 * i] = -e * zk * k;
            out[2 * i + 1] = e * zk * z.ln() * k;
        }
    }
}

/// Least-squares fit of the saturating-exponential profile to normalized
/// contrast-versus-height points (heights in meters).
pub fn fit_profile(profile: &ContrastProfile) -> Option<DecoherenceProfile> {
    let points: Vec<(f64, f64)> =
        profile.points.iter().filter_map(|p| p.contrast.map(|c| (p.distance * 1e6, c))).collect();
    if points.len() < 3 {
        return None;
    }
    let h_guess = points.iter().find(|(_, c)| *c >= 1.0 - (-1.0f64).exp()).map(|(h, _)| *h).unwrap_or(1.0);
    let report =
        lm::minimize(&ProfileFit { points: &points }, &[h_guess.max(1e-3).ln(), 2f64.ln()], &LmOptions::default());
    if !report.params.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some(DecoherenceProfile {
        form: ProfileForm::SaturatingExponential,
        scale_height: report.params[0].exp() * 1e-6,
        exponent: report.params[1].exp(),
        undisturbed_contrast: profile.undisturbed_contrast,
    })
}

/// What an eavesdropper does to the beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tap {
    None,
    /// Uniform contrast attenuation by `rho`.
    Passive {
        rho: f64,
    },
    /// A conducting surface at `distance` meters from the beam paths.
    Surface {
        distance: f64,
        profile: DecoherenceProfile,
    },
}

impl Tap {
    pub fn attenuation(&self) -> Result<f64, ChannelError> {
        match *self {
            Tap::None => Ok(1.0),
            Tap::Passive { rho } => {
                if (0.0..=1.0).contains(&rho) {
                    Ok(rho)
                } else {
                    Err(ChannelError::InvalidFactor(rho))
                }
            }
            Tap::Surface { distance, profile } => surface_attenuation(distance, &profile),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LinkStatus {
    Up,
    /// The monitor tripped after fitting bin `at_bin`; nothing after it was sent.
    Terminated {
        at_bin: u64,
    },
}

/// Flags a link whose sliding-mean contrast falls below
/// `threshold × expected high contrast`.
#[derive(Debug, Clone)]
pub struct LinkMonitor {
    level: f64,
    window: std::collections::VecDeque<f64>,
    sum: f64,
}

impl LinkMonitor {
    pub fn new(threshold: f64, expected_high: f64) -> Self {
        Self { level: threshold * expected_high, window: Default::default(), sum: 0.0 }
    }

    /// Feed one bin; returns false once the link should be terminated.
    pub fn push(&mut self, contrast: f64) -> bool {
        self.window.push_back(contrast);
        self.sum += contrast;
        if self.window.len() > MONITOR_WINDOW {
            self.sum -= self.window.pop_front().unwrap_or(0.0);
        }
        self.window.len() < MONITOR_WINDOW || self.sum / MONITOR_WINDOW as f64 >= self.level
    }
}

#[derive(Debug)]
pub struct TapOutcome {
    pub attenuation: f64,
    pub link: LinkStatus,
    pub trace: ContrastTrace,
    pub decoded: Result<Decoded, CodecError>,
}

/// Full pipeline with the tap applied and the link monitor armed.
pub fn transmit_with_tap(
    message: &str,
    setup: &TransmissionSetup,
    tap: &Tap,
    detection_threshold: f64,
    seed: u64,
) -> Result<TapOutcome, LinkError> {
    let attenuation = tap.attenuation()?;
    let schedule = codec::encode_message(message, &setup.framing)?;
    let mut monitor = LinkMonitor::new(detection_threshold, setup.high_contrast());
    let mut tripped = None;
    let result = link::simulate(setup, &schedule, attenuation, seed, |e: &TraceEntry| {
        if monitor.push(e.contrast) {
            true
        } else {
            tripped = Some(e.bin);
            false
        }
    })?;
    let link = match tripped {
        Some(at_bin) => LinkStatus::Terminated { at_bin },
        None => LinkStatus::Up,
    };
    let decoded = codec::decode_trace(&result.trace, &setup.framing, None);
    Ok(TapOutcome { attenuation, link, trace: result.trace, decoded })
}
