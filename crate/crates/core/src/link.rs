//! End-to-end transmission: text → Wien setpoints → fringe contrast →
//! detector frames → fitted contrast trace → decoded text.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, BitSchedule, CodecError, Decoded, FramingConfig};
use crate::demod::{self, ContrastTrace, DemodError, TraceEntry};
use crate::detector::{AcquisitionConfig, DetectorError, DetectorFrame, FrameSampler, FringeModel};
use crate::physics::Interferometer;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Demod(#[from] DemodError),
    #[error("attenuation factor must lie in [0, 1], got {0}")]
    InvalidAttenuation(f64),
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
}

/// Everything the sender and receiver agree on before a transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionSetup {
    pub interferometer: Interferometer,
    /// Fringe geometry on the detector; its contrast is overwritten per bin.
    pub fringe: FringeModel,
    pub acquisition: AcquisitionConfig,
    pub framing: FramingConfig,
    /// Deflector voltage for bit `1` (state 2).
    pub high_voltage: f64,
    /// Deflector voltage for bit `0` (state 1).
    pub low_voltage: f64,
}

impl TransmissionSetup {
    /// The reference transmission: -15 V / -45 V states, 1250 events per
    /// 1 s bin inside five fringes, five bins per bit.
    pub fn reference() -> Self {
        let interferometer = Interferometer::reference();
        Self {
            interferometer,
            fringe: FringeModel::centered(interferometer.beam.max_contrast(), 5.0).expect("valid geometry"),
            acquisition: AcquisitionConfig {
                pattern_rate: interferometer.beam.pattern_rate(),
                ..AcquisitionConfig::default()
            },
            framing: FramingConfig::default(),
            high_voltage: -15.0,
            low_voltage: -45.0,
        }
    }

    pub fn high_contrast(&self) -> f64 {
        self.interferometer.contrast_at(self.high_voltage)
    }

    pub fn low_contrast(&self) -> f64 {
        self.interferometer.contrast_at(self.low_voltage)
    }

    /// Per-bin contrast the detector would see without any disturbance.
    pub fn bin_contrasts(&self, schedule: &BitSchedule) -> Vec<f64> {
        codec::schedule_to_setpoints(schedule, self.high_voltage, self.low_voltage)
            .into_iter()
            .map(|u| self.interferometer.contrast_at(u))
            .collect()
    }
}

/// Produces detector frames for a sequence of per-bin contrasts, reusing
/// the tabulated sampler for repeated contrast values.
pub struct FrameSource<'a> {
    setup: &'a TransmissionSetup,
    cache: Vec<(f64, FrameSampler)>,
}

impl<'a> FrameSource<'a> {
    pub fn new(setup: &'a TransmissionSetup) -> Self {
        Self { setup, cache: Vec::new() }
    }

    pub fn frame(&mut self, bin: u64, contrast: f64, seed: u64) -> Result<DetectorFrame, DetectorError> {
        let contrast = contrast.clamp(0.0, 1.0);
        if let Some((_, s)) = self.cache.iter().find(|(c, _)| *c == contrast) {
            return Ok(s.frame(bin, seed));
        }
        let sampler = FrameSampler::new(&self.setup.fringe.with_contrast(contrast), &self.setup.acquisition)?;
        let frame = sampler.frame(bin, seed);
        self.cache.push((contrast, sampler));
        Ok(frame)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionResult {
    pub schedule: BitSchedule,
    /// Contrast that reached the detector in each bin.
    pub true_contrast: Vec<f64>,
    pub trace: ContrastTrace,
    /// Events recorded per bin.
    pub events: Vec<usize>,
}

/// Simulate a transmission, stopping early when `keep_going` returns false
/// for a freshly fitted bin.
pub fn simulate<F>(
    setup: &TransmissionSetup,
    schedule: &BitSchedule,
    attenuation: f64,
    seed: u64,
    mut keep_going: F,
) -> Result<TransmissionResult, LinkError>
where
    F: FnMut(&TraceEntry) -> bool,
{
    if !(0.0..=1.0).contains(&attenuation) {
        return Err(LinkError::InvalidAttenuation(attenuation));
    }
    let contrasts: Vec<f64> = setup.bin_contrasts(schedule).into_iter().map(|c| c * attenuation).collect();
    let mut source = FrameSource::new(setup);
    let mut entries = Vec::with_capacity(contrasts.len());
    let mut events = Vec::with_capacity(contrasts.len());
    for (bin, &c) in contrasts.iter().enumerate() {
        let frame = source.frame(bin as u64, c, seed)?;
        events.push(frame.len());
        let entry = demod::fit_frame(&frame, &setup.acquisition)?;
        entries.push(entry);
        if !keep_going(&entry) {
            break;
        }
    }
    let sent = entries.len();
    Ok(TransmissionResult {
        schedule: schedule.clone(),
        true_contrast: contrasts[..sent].to_vec(),
        trace: ContrastTrace { entries },
        events,
    })
}

#[derive(Debug)]
pub struct Transmission {
    pub result: TransmissionResult,
    pub decoded: Result<Decoded, CodecError>,
}

/// Send `message` through an undisturbed channel and decode it.
pub fn transmit(message: &str, setup: &TransmissionSetup, seed: u64) -> Result<Transmission, LinkError> {
    let schedule = codec::encode_message(message, &setup.framing)?;
    let result = simulate(setup, &schedule, 1.0, seed, |_| true)?;
    let decoded = codec::decode_trace(&result.trace, &setup.framing, None);
    Ok(Transmission { result, decoded })
}
