//! Experiment configuration file (TOML).
//!
//! Every section and key is optional; missing values take the reference
//! experiment's settings. `ExperimentConfig::default()` serialized with
//! `to_toml` is a complete, documented-by-example config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{BeamlineRegions, DecoherenceProfile, Tap, DEFAULT_DETECTION_THRESHOLD};
use crate::codec::FramingConfig;
use crate::detector::{AcquisitionConfig, FringeModel, Window};
use crate::keydist::{ContrastReadout, Eavesdropper, MeasureMode, SessionConfig, CONTRAST_MODE_MISMATCH_THRESHOLD};
use crate::link::TransmissionSetup;
use crate::physics::{BeamParameters, Interferometer, WienFilterState};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid [{section}]: {message}")]
    Invalid { section: &'static str, message: String },
}

fn invalid(section: &'static str, e: impl ToString) -> ConfigError {
    ConfigError::Invalid { section, message: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSection {
    /// Tip voltage, V.
    pub acceleration_voltage: f64,
    /// Source energy width, eV.
    pub energy_spread_ev: f64,
    /// Lateral path separation in the Wien filter, m.
    pub beam_separation: f64,
    pub max_contrast: f64,
    /// Counts per second on the whole screen.
    pub source_rate: f64,
    /// Counts per second inside the analysed fringes.
    pub pattern_rate: f64,
}

impl Default for BeamSection {
    fn default() -> Self {
        Self {
            acceleration_voltage: 1000.0,
            energy_spread_ev: 0.377,
            beam_separation: 2.9e-6,
            max_contrast: 0.6,
            source_rate: 4500.0,
            pattern_rate: 1250.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WienSection {
    pub plate_length: f64,
    pub plate_distance: f64,
    /// Voltage of full packet overlap, V.
    pub matched_voltage: f64,
    /// Setpoint for bit `1`.
    pub high_voltage: f64,
    /// Setpoint for bit `0`.
    pub low_voltage: f64,
    pub sweep_start: f64,
    pub sweep_stop: f64,
    pub sweep_points: usize,
    /// Add simulated measurements (fit of `pictures × events`) to the sweep.
    pub simulate_measurements: bool,
    pub measurement_pictures: usize,
    pub measurement_events: usize,
    /// Spacing of simulated measurement voltages, V.
    pub measurement_step: f64,
}

impl Default for WienSection {
    fn default() -> Self {
        Self {
            plate_length: 11.75e-3,
            plate_distance: 8.75e-3,
            matched_voltage: -15.0,
            high_voltage: -15.0,
            low_voltage: -45.0,
            sweep_start: -75.0,
            sweep_stop: 45.0,
            sweep_points: 241,
            simulate_measurements: false,
            measurement_pictures: 5,
            measurement_events: 250_000,
            measurement_step: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionSection {
    /// Seconds per time bin.
    pub bin_duration: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    pub histogram_bins: usize,
    /// Detector extent along y.
    pub height: f64,
    /// Fringe periods inside the sinc envelope's central lobe.
    pub fringe_periods: f64,
}

impl Default for AcquisitionSection {
    fn default() -> Self {
        Self {
            bin_duration: 1.0,
            window_lo: 0.0,
            window_hi: 5.0,
            histogram_bins: 100,
            height: 1.0,
            fringe_periods: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransmitSection {
    pub message: String,
}

impl Default for TransmitSection {
    fn default() -> Self {
        Self { message: "Matterwave modulation".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub profile: DecoherenceProfile,
    pub regions: BeamlineRegions,
    pub tap: Tap,
    /// Link monitor threshold, fraction of the expected high contrast.
    pub detection_threshold: f64,
    /// Surface scan: slice height, scanned height and total events, SI units.
    pub scan_slice_height: f64,
    pub scan_height: f64,
    pub scan_events: usize,
    /// Heights above this normalize the scanned profile.
    pub normalization_distance: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            profile: DecoherenceProfile::default(),
            regions: BeamlineRegions::default(),
            tap: Tap::None,
            detection_threshold: DEFAULT_DETECTION_THRESHOLD,
            scan_slice_height: 400e-9,
            scan_height: 30e-6,
            scan_events: 600_000,
            normalization_distance: 20e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    Ideal,
    Contrast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub rounds: usize,
    pub disclosure_fraction: f64,
    pub announce_encoding: bool,
    pub mode: ModeName,
    /// Δ in coherence lengths (contrast mode).
    pub shift_quantum_lc: f64,
    pub events_per_measurement: usize,
    /// Omit for a clean channel.
    pub eavesdropper: Option<Eavesdropper>,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            rounds: 10_000,
            disclosure_fraction: 1.0,
            announce_encoding: false,
            mode: ModeName::Ideal,
            shift_quantum_lc: 3.0,
            events_per_measurement: 1000,
            eavesdropper: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    /// Events CSV to fit; a simulated frame is used when absent.
    pub events: Option<PathBuf>,
    /// Contrast and event count of the simulated frame.
    pub contrast: f64,
    pub simulated_events: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        Self { events: None, contrast: 0.6, simulated_events: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub beam: BeamSection,
    pub wien: WienSection,
    pub acquisition: AcquisitionSection,
    pub framing: FramingConfig,
    pub transmit: TransmitSection,
    pub channel: ChannelSection,
    pub protocol: ProtocolSection,
    pub fit: FitSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_dir: PathBuf::from("out"),
            beam: BeamSection::default(),
            wien: WienSection::default(),
            acquisition: AcquisitionSection::default(),
            framing: FramingConfig::default(),
            transmit: TransmitSection::default(),
            channel: ChannelSection::default(),
            protocol: ProtocolSection::default(),
            fit: FitSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.interferometer()?;
        self.acquisition_config()?;
        self.fringe()?;
        self.framing.validate().map_err(|e| invalid("framing", e))?;
        let w = &self.wien;
        if !(w.sweep_points >= 2 && w.sweep_stop > w.sweep_start) {
            return Err(invalid("wien", "sweep needs sweep_stop > sweep_start and at least 2 points"));
        }
        if w.simulate_measurements && (w.measurement_pictures == 0 || w.measurement_events == 0) {
            return Err(invalid("wien", "simulated measurements need pictures and events"));
        }
        if w.simulate_measurements && !(w.measurement_step > 0.0) {
            return Err(invalid("wien", "measurement_step must be positive"));
        }
        let c = &self.channel;
        c.profile.validate().map_err(|e| invalid("channel", e))?;
        c.regions.validate().map_err(|e| invalid("channel", e))?;
        c.tap.attenuation().map_err(|e| invalid("channel", e))?;
        if !(c.detection_threshold >= 0.0 && c.detection_threshold <= 1.0) {
            return Err(invalid("channel", "detection_threshold must lie in [0, 1]"));
        }
        if !(c.scan_slice_height > 0.0 && c.scan_height > c.scan_slice_height && c.scan_events > 0) {
            return Err(invalid("channel", "scan needs scan_height > scan_slice_height > 0 and events"));
        }
        if !(c.normalization_distance > 0.0 && c.normalization_distance < c.scan_height) {
            return Err(invalid("channel", "normalization_distance must lie inside the scanned height"));
        }
        if self.protocol.rounds == 0 {
            return Err(invalid("protocol", "rounds must be positive"));
        }
        self.session_config()?;
        if !(0.0..=1.0).contains(&self.fit.contrast) || self.fit.simulated_events == 0 {
            return Err(invalid("fit", "contrast must lie in [0, 1] and simulated_events be positive"));
        }
        Ok(())
    }

    pub fn beam(&self) -> Result<BeamParameters, ConfigError> {
        let b = &self.beam;
        BeamParameters::new(
            b.acceleration_voltage,
            b.energy_spread_ev,
            b.beam_separation,
            b.max_contrast,
            b.source_rate,
            b.pattern_rate,
        )
        .map_err(|e| invalid("beam", e))
    }

    pub fn interferometer(&self) -> Result<Interferometer, ConfigError> {
        let beam = self.beam()?;
        let w = &self.wien;
        let wien = WienFilterState::calibrated(w.plate_length, w.plate_distance, &beam, w.matched_voltage)
            .map_err(|e| invalid("wien", e))?;
        Ok(Interferometer::new(beam, wien))
    }

    pub fn acquisition_config(&self) -> Result<AcquisitionConfig, ConfigError> {
        let a = &self.acquisition;
        let acq = AcquisitionConfig {
            bin_duration: a.bin_duration,
            pattern_rate: self.beam.pattern_rate,
            window: Window::new(a.window_lo, a.window_hi).map_err(|e| invalid("acquisition", e))?,
            histogram_bins: a.histogram_bins,
            height: a.height,
        };
        acq.validate().map_err(|e| invalid("acquisition", e))?;
        if acq.histogram_bins < crate::detector::MIN_HISTOGRAM_BINS {
            return Err(invalid("acquisition", "histogram_bins must be at least 20"));
        }
        Ok(acq)
    }

    /// Fringe geometry filling the acquisition window.
    pub fn fringe(&self) -> Result<FringeModel, ConfigError> {
        let a = &self.acquisition;
        if !(a.fringe_periods > 0.0 && a.window_hi > a.window_lo) {
            return Err(invalid("acquisition", "fringe_periods must be positive"));
        }
        let period = (a.window_hi - a.window_lo) / a.fringe_periods;
        let s1 = 2.0 * (a.window_hi - a.window_lo);
        let m = FringeModel::new(
            1.0,
            self.beam.max_contrast,
            period,
            -2.0 * std::f64::consts::PI * a.window_lo / period,
            s1,
            -std::f64::consts::PI * (a.window_lo + a.window_hi) / s1,
        )
        .map_err(|e| invalid("acquisition", e))?;
        Ok(m)
    }

    pub fn transmission_setup(&self) -> Result<TransmissionSetup, ConfigError> {
        Ok(TransmissionSetup {
            interferometer: self.interferometer()?,
            fringe: self.fringe()?,
            acquisition: self.acquisition_config()?,
            framing: self.framing.clone(),
            high_voltage: self.wien.high_voltage,
            low_voltage: self.wien.low_voltage,
        })
    }

    pub fn session_config(&self) -> Result<SessionConfig, ConfigError> {
        let p = &self.protocol;
        if !(p.disclosure_fraction > 0.0 && p.disclosure_fraction <= 1.0) {
            return Err(invalid("protocol", "disclosure_fraction must lie in (0, 1]"));
        }
        if let Some(e) = &p.eavesdropper {
            if !(0.0..=1.0).contains(&e.intercept_fraction) {
                return Err(invalid("protocol", "eavesdropper.intercept_fraction must lie in [0, 1]"));
            }
        }
        let (mode, mismatch_threshold) = match p.mode {
            ModeName::Ideal => (MeasureMode::Ideal, 0.0),
            ModeName::Contrast => {
                let mut r = ContrastReadout::for_beam(&self.beam()?, p.shift_quantum_lc, p.events_per_measurement)
                    .map_err(|e| invalid("protocol", e))?;
                r.fringe = self.fringe()?;
                r.acquisition = self.acquisition_config()?;
                (MeasureMode::Contrast(r), CONTRAST_MODE_MISMATCH_THRESHOLD)
            }
        };
        Ok(SessionConfig {
            eavesdropper: p.eavesdropper,
            disclosure_fraction: p.disclosure_fraction,
            announce_encoding: p.announce_encoding,
            mode,
            mismatch_threshold,
            seed: self.seed,
        })
    }
}
