//! Closed-form interferometer physics.
//!
//! Electron wavelength, longitudinal coherence length, the longitudinal
//! wave-packet shift introduced by a matched Wien filter, and the Gaussian
//! contrast envelope that maps that shift onto fringe visibility.
//!
//! All quantities are SI: volts, meters, electron-volts for the energy spread.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Planck constant, J s (CODATA 2018, exact).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Electron rest mass, kg (CODATA 2018).
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
/// Elementary charge, C (CODATA 2018, exact).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfUnitRange { name: &'static str, value: f64 },
    #[error("voltage grid is empty")]
    EmptyGrid,
}

fn positive(name: &'static str, value: f64) -> Result<f64, PhysicsError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(PhysicsError::NonPositive { name, value })
    }
}

fn unit_range(name: &'static str, value: f64) -> Result<f64, PhysicsError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(PhysicsError::OutOfUnitRange { name, value })
    }
}

/// Relativistically corrected de Broglie wavelength of an electron
/// accelerated through `acceleration_voltage` volts.
pub fn de_broglie_wavelength(acceleration_voltage: f64) -> Result<f64, PhysicsError> {
    let u = positive("acceleration voltage", acceleration_voltage)?;
    let kinetic = ELEMENTARY_CHARGE * u;
    let rest = ELECTRON_MASS * SPEED_OF_LIGHT * SPEED_OF_LIGHT;
    let momentum = (2.0 * ELECTRON_MASS * kinetic * (1.0 + kinetic / (2.0 * rest))).sqrt();
    Ok(PLANCK / momentum)
}

/// Source and beamline constants.
///
/// The wavelength is always derived from the acceleration voltage, so it
/// cannot drift out of sync with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamParameters {
    acceleration_voltage: f64,
    energy_spread_ev: f64,
    beam_separation: f64,
    wavelength: f64,
    max_contrast: f64,
    source_rate: f64,
    pattern_rate: f64,
}

impl BeamParameters {
    pub fn new(
        acceleration_voltage: f64,
        energy_spread_ev: f64,
        beam_separation: f64,
        max_contrast: f64,
        source_rate: f64,
        pattern_rate: f64,
    ) -> Result<Self, PhysicsError> {
        let wavelength = de_broglie_wavelength(acceleration_voltage)?;
        Ok(Self {
            acceleration_voltage,
            energy_spread_ev: positive("energy spread", energy_spread_ev)?,
            beam_separation: positive("beam separation", beam_separation)?,
            wavelength,
            max_contrast: unit_range("max contrast", max_contrast)?,
            source_rate: positive("source rate", source_rate)?,
            pattern_rate: positive("pattern rate", pattern_rate)?,
        })
    }

    /// The transmission setup of the reference experiment: 1 kV tip,
    /// 0.377 eV energy spread, 2.9 µm path separation, 4500 counts/s on
    /// the screen and 1250 counts/s inside five fringes.
    pub fn reference() -> Self {
        Self::new(1000.0, 0.377, 2.9e-6, 0.6, 4500.0, 1250.0).expect("reference beam is valid")
    }

    pub fn acceleration_voltage(&self) -> f64 {
        self.acceleration_voltage
    }
    pub fn energy_spread_ev(&self) -> f64 {
        self.energy_spread_ev
    }
    pub fn beam_separation(&self) -> f64 {
        self.beam_separation
    }
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
    pub fn max_contrast(&self) -> f64 {
        self.max_contrast
    }
    pub fn source_rate(&self) -> f64 {
        self.source_rate
    }
    pub fn pattern_rate(&self) -> f64 {
        self.pattern_rate
    }

    /// Fraction of all screen counts that land inside the analyzed fringes.
    pub fn capture_fraction(&self) -> f64 {
        self.pattern_rate / self.source_rate
    }

    pub fn with_beam_separation(self, beam_separation: f64) -> Result<Self, PhysicsError> {
        Self::new(
            self.acceleration_voltage,
            self.energy_spread_ev,
            beam_separation,
            self.max_contrast,
            self.source_rate,
            self.pattern_rate,
        )
    }

    pub fn with_max_contrast(self, max_contrast: f64) -> Result<Self, PhysicsError> {
        Ok(Self { max_contrast: unit_range("max contrast", max_contrast)?, ..self })
    }
}

/// Longitudinal coherence length `2 U λ / (π ΔE)` with U in volts and ΔE in eV.
pub fn coherence_length(beam: &BeamParameters) -> f64 {
    2.0 * beam.acceleration_voltage * beam.wavelength / (std::f64::consts::PI * beam.energy_spread_ev)
}

/// Wien filter geometry and setpoint. Always operated in the matched mode,
/// so neither deflection nor fringe phase depend on the voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WienFilterState {
    pub plate_length: f64,
    pub plate_distance: f64,
    /// Residual packet shift from upstream deflectors at zero Wien voltage.
    pub baseline_offset: f64,
    pub deflector_voltage: f64,
}

impl WienFilterState {
    pub fn new(plate_length: f64, plate_distance: f64, baseline_offset: f64) -> Result<Self, PhysicsError> {
        if !baseline_offset.is_finite() {
            return Err(PhysicsError::NonPositive { name: "baseline offset", value: baseline_offset });
        }
        Ok(Self {
            plate_length: positive("plate length", plate_length)?,
            plate_distance: positive("plate distance", plate_distance)?,
            baseline_offset,
            deflector_voltage: 0.0,
        })
    }

    /// Geometry with the baseline offset chosen so the packets fully overlap
    /// (zero total shift) at `matched_voltage`.
    pub fn calibrated(
        plate_length: f64,
        plate_distance: f64,
        beam: &BeamParameters,
        matched_voltage: f64,
    ) -> Result<Self, PhysicsError> {
        let mut wien = Self::new(plate_length, plate_distance, 0.0)?;
        wien.baseline_offset = -wien.shift_per_volt(beam) * matched_voltage;
        Ok(wien)
    }

    /// The reference filter: 11.75 mm plates 8.75 mm apart, maximum
    /// contrast at -15 V.
    pub fn reference(beam: &BeamParameters) -> Self {
        Self::calibrated(11.75e-3, 8.75e-3, beam, -15.0).expect("reference Wien filter is valid")
    }

    pub fn matched(self) -> bool {
        true
    }

    pub fn at_voltage(self, deflector_voltage: f64) -> Self {
        Self { deflector_voltage, ..self }
    }

    /// `L Δx / (2 D U_tip)`: meters of longitudinal shift per deflector volt.
    pub fn shift_per_volt(&self, beam: &BeamParameters) -> f64 {
        self.plate_length * beam.beam_separation / (2.0 * self.plate_distance * beam.acceleration_voltage)
    }

    /// Voltage at which the total longitudinal shift vanishes.
    pub fn matched_voltage(&self, beam: &BeamParameters) -> f64 {
        -self.baseline_offset / self.shift_per_volt(beam)
    }
}

/// Total longitudinal packet shift at the filter's current setpoint.
pub fn wien_longitudinal_shift(wien: &WienFilterState, beam: &BeamParameters) -> f64 {
    wien.baseline_offset + wien.shift_per_volt(beam) * wien.deflector_voltage
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeForm {
    #[default]
    Gaussian,
}

/// How contrast decays with the longitudinal overlap mismatch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapModel {
    pub coherence_length: f64,
    pub envelope_form: EnvelopeForm,
    pub center_shift: f64,
}

impl OverlapModel {
    pub fn new(coherence_length: f64, center_shift: f64) -> Result<Self, PhysicsError> {
        Ok(Self {
            coherence_length: positive("coherence length", coherence_length)?,
            envelope_form: EnvelopeForm::Gaussian,
            center_shift,
        })
    }

    pub fn for_beam(beam: &BeamParameters) -> Self {
        Self::new(coherence_length(beam), 0.0).expect("coherence length of a valid beam is positive")
    }
}

/// `C_max exp(-((shift - center) / l_c)^2)`; `l_c` is the 1/e half-width.
pub fn contrast_envelope(total_shift: f64, model: &OverlapModel, max_contrast: f64) -> f64 {
    match model.envelope_form {
        EnvelopeForm::Gaussian => {
            let z = (total_shift - model.center_shift) / model.coherence_length;
            max_contrast * (-z * z).exp()
        }
    }
}

/// Beam, Wien filter and overlap model bundled for voltage -> contrast lookups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interferometer {
    pub beam: BeamParameters,
    pub wien: WienFilterState,
    pub overlap: OverlapModel,
}

impl Interferometer {
    pub fn new(beam: BeamParameters, wien: WienFilterState) -> Self {
        Self { beam, wien, overlap: OverlapModel::for_beam(&beam) }
    }

    pub fn reference() -> Self {
        let beam = BeamParameters::reference();
        Self::new(beam, WienFilterState::reference(&beam))
    }

    pub fn shift_at(&self, voltage: f64) -> f64 {
        wien_longitudinal_shift(&self.wien.at_voltage(voltage), &self.beam)
    }

    pub fn contrast_at(&self, voltage: f64) -> f64 {
        contrast_envelope(self.shift_at(voltage), &self.overlap, self.beam.max_contrast)
    }
}

/// Contrast versus deflector voltage for a fixed geometry.
pub fn wien_curve(
    wien: &WienFilterState,
    beam: &BeamParameters,
    voltage_grid: &[f64],
) -> Result<Vec<(f64, f64)>, PhysicsError> {
    if voltage_grid.is_empty() {
        return Err(PhysicsError::EmptyGrid);
    }
    let ifm = Interferometer::new(*beam, *wien);
    Ok(voltage_grid.iter().map(|&u| (u, ifm.contrast_at(u))).collect())
}

/// Full width at half maximum of the Wien curve, in volts.
pub fn wien_curve_fwhm(wien: &WienFilterState, beam: &BeamParameters) -> f64 {
    let l_c = coherence_length(beam);
    2.0 * std::f64::consts::LN_2.sqrt() * l_c / wien.shift_per_volt(beam)
}
