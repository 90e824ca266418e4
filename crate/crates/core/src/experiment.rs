//! Runners behind the `mwmodem` subcommands. Each returns its data and can
//! write it to an output directory; nothing here prints.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::channel::{self, DecoherenceProfile, LinkStatus, SurfaceScene, Tap};
use crate::codec::{CodecError, Decoded};
use crate::config::{ConfigError, ExperimentConfig};
use crate::demod::{self, ContrastProfile, DemodError, FitResult};
use crate::detector::{self, AcquisitionConfig, DetectorError, FrameSampler, Histogram};
use crate::io::{self, IoError, ProfileRow, WienMeasurementRow, WienRow};
use crate::keydist::{self, KeyDistError, ProtocolResult, SessionRecord, TableEntry};
use crate::link::{self, LinkError};
use crate::physics::{self, coherence_length};
use crate::rng::stream_rng;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Demod(#[from] DemodError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    KeyDist(#[from] KeyDistError),
    #[error("decode failed: {0}")]
    Decode(#[from] CodecError),
    #[error("profile fit failed")]
    ProfileFit,
}

impl From<std::io::Error> for ExperimentError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(IoError::Io(e))
    }
}

impl ExperimentError {
    /// 2 for framing and decode failures, 3 for bad configuration, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 3,
            ExperimentError::Decode(_) => 2,
            ExperimentError::Link(LinkError::Codec(_)) => 2,
            _ => 1,
        }
    }
}

fn prepare(dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct WienSummary {
    pub matched_voltage: f64,
    pub shift_per_volt: f64,
    pub coherence_length: f64,
    pub fwhm_volts: f64,
    pub high_voltage: f64,
    pub high_contrast: f64,
    pub low_voltage: f64,
    pub low_contrast: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WienCurveOutput {
    pub curve: Vec<WienRow>,
    pub measurements: Vec<WienMeasurementRow>,
    pub summary: WienSummary,
}

pub fn wien_curve(cfg: &ExperimentConfig) -> Result<WienCurveOutput, ExperimentError> {
    let ifm = cfg.interferometer()?;
    let w = &cfg.wien;
    let n = w.sweep_points;
    let grid: Vec<f64> =
        (0..n).map(|i| w.sweep_start + (w.sweep_stop - w.sweep_start) * i as f64 / (n - 1) as f64).collect();
    let curve = physics::wien_curve(&ifm.wien, &ifm.beam, &grid)
        .expect("validated grid")
        .into_iter()
        .map(|(u_wf, contrast)| WienRow { u_wf, contrast })
        .collect();

    let mut measurements = Vec::new();
    if w.simulate_measurements {
        let fringe = cfg.fringe()?;
        let acq = cfg.acquisition_config()?;
        // geometry from one picture at full overlap, then contrast only
        let calibration = {
            let sampler = FrameSampler::new(&fringe.with_contrast(ifm.beam.max_contrast()), &acq)?;
            let mut rng = stream_rng(cfg.seed, u64::MAX);
            let frame = sampler.frame_with_count(0, w.measurement_events, &mut rng);
            demod::fit_fringe(&detector::histogram(&frame, &acq)?, None)?.model()
        };
        let steps = ((w.sweep_stop - w.sweep_start) / w.measurement_step).floor() as usize;
        for (i, u) in (0..=steps).map(|i| (i, w.sweep_start + i as f64 * w.measurement_step)) {
            let sampler = FrameSampler::new(&fringe.with_contrast(ifm.contrast_at(u)), &acq)?;
            let mut values = Vec::with_capacity(w.measurement_pictures);
            for p in 0..w.measurement_pictures {
                let mut rng = stream_rng(cfg.seed, (i * w.measurement_pictures + p) as u64);
                let frame = sampler.frame_with_count(p as u64, w.measurement_events, &mut rng);
                let hist = detector::histogram(&frame, &acq)?;
                values.push(demod::estimate_contrast_fixed_geometry(&hist, &calibration)?);
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let var = if values.len() > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64
            } else {
                0.0
            };
            measurements.push(WienMeasurementRow { u_wf: u, contrast: mean, contrast_sd: var.sqrt() });
        }
    }

    let summary = WienSummary {
        matched_voltage: ifm.wien.matched_voltage(&ifm.beam),
        shift_per_volt: ifm.wien.shift_per_volt(&ifm.beam),
        coherence_length: coherence_length(&ifm.beam),
        fwhm_volts: physics::wien_curve_fwhm(&ifm.wien, &ifm.beam),
        high_voltage: w.high_voltage,
        high_contrast: ifm.contrast_at(w.high_voltage),
        low_voltage: w.low_voltage,
        low_contrast: ifm.contrast_at(w.low_voltage),
    };
    Ok(WienCurveOutput { curve, measurements, summary })
}

impl WienCurveOutput {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        prepare(dir)?;
        let mut files = vec![dir.join("wien_curve.csv"), dir.join("wien_summary.json")];
        io::write_csv_file(&files[0], "wien-curve", &self.curve)?;
        io::write_json(&files[1], &self.summary)?;
        if !self.measurements.is_empty() {
            let p = dir.join("wien_measurements.csv");
            io::write_csv_file(&p, "wien-measurements", &self.measurements)?;
            files.push(p);
        }
        Ok(files)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TransmitSummary {
    pub message: String,
    pub seed: u64,
    pub bins: usize,
    pub attenuation: f64,
    pub link: LinkStatus,
    pub decoded_text: Option<String>,
    pub exact: bool,
    pub decoded: Option<Decoded>,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct TransmitOutput {
    pub trace: demod::ContrastTrace,
    pub summary: TransmitSummary,
    pub decoded: Result<Decoded, CodecError>,
}

/// Send the configured message; the tap in `[channel]` applies when set.
pub fn transmit(cfg: &ExperimentConfig) -> Result<TransmitOutput, ExperimentError> {
    let setup = cfg.transmission_setup()?;
    let message = &cfg.transmit.message;
    let (trace, decoded, link, attenuation) = match cfg.channel.tap {
        Tap::None => {
            let t = link::transmit(message, &setup, cfg.seed)?;
            (t.result.trace, t.decoded, LinkStatus::Up, 1.0)
        }
        tap => {
            let o = channel::transmit_with_tap(message, &setup, &tap, cfg.channel.detection_threshold, cfg.seed)?;
            (o.trace, o.decoded, o.link, o.attenuation)
        }
    };
    let summary = TransmitSummary {
        message: message.clone(),
        seed: cfg.seed,
        bins: trace.len(),
        attenuation,
        link,
        decoded_text: decoded.as_ref().ok().map(|d| d.text.clone()),
        exact: decoded.as_ref().is_ok_and(|d| &d.text == message),
        decoded: decoded.as_ref().ok().cloned(),
        error: decoded.as_ref().err().map(|e| e.to_string()),
    };
    Ok(TransmitOutput { trace, summary, decoded })
}

impl TransmitOutput {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        prepare(dir)?;
        let files = vec![dir.join("trace.csv"), dir.join("transmit.json")];
        io::write_csv_file(&files[0], "trace", io::trace_rows(&self.trace))?;
        io::write_json(&files[1], &self.summary)?;
        Ok(files)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceSummary {
    pub events: usize,
    pub undisturbed_contrast: f64,
    pub true_profile: DecoherenceProfile,
    pub fitted_profile: DecoherenceProfile,
    /// Largest |measured − true| attenuation over fitted slices.
    pub max_deviation: f64,
    pub secure_length: f64,
    pub insecure_length: f64,
}

#[derive(Debug, Clone)]
pub struct SurfaceScanOutput {
    pub profile: ContrastProfile,
    pub summary: SurfaceSummary,
}

/// Acquisition used for the surface scene: `y` spans the scanned height in
/// meters and one bin holds all requested events.
pub fn surface_acquisition(cfg: &ExperimentConfig) -> Result<AcquisitionConfig, ExperimentError> {
    Ok(AcquisitionConfig {
        bin_duration: 1.0,
        pattern_rate: cfg.channel.scan_events as f64,
        height: cfg.channel.scan_height,
        ..cfg.acquisition_config()?
    })
}

pub fn surface_scan(cfg: &ExperimentConfig) -> Result<SurfaceScanOutput, ExperimentError> {
    let c = &cfg.channel;
    let scene = SurfaceScene { base: cfg.fringe()?, profile: c.profile };
    let acq = surface_acquisition(cfg)?;
    let frame = detector::sample_frame_with_map(&scene.base, &scene, &acq, 0, cfg.seed)?;
    let profile = demod::contrast_profile_vs_distance(&frame, &acq, c.scan_slice_height, c.normalization_distance)?;
    let fitted_profile = channel::fit_profile(&profile).ok_or(ExperimentError::ProfileFit)?;
    let max_deviation = profile
        .points
        .iter()
        .filter_map(|p| p.contrast.map(|m| (m - c.profile.factor(p.distance)).abs()))
        .fold(0.0, f64::max);
    let summary = SurfaceSummary {
        events: frame.len(),
        undisturbed_contrast: profile.undisturbed_contrast,
        true_profile: c.profile,
        fitted_profile,
        max_deviation,
        secure_length: c.regions.secure_length,
        insecure_length: c.regions.insecure_length,
    };
    Ok(SurfaceScanOutput { profile, summary })
}

impl SurfaceScanOutput {
    /// Measured profile as `h_m,attenuation`; slices without a fit are skipped.
    pub fn rows(&self) -> Vec<ProfileRow> {
        self.profile
            .points
            .iter()
            .filter_map(|p| p.contrast.map(|a| ProfileRow { h_m: p.distance, attenuation: a }))
            .collect()
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        prepare(dir)?;
        let files = vec![dir.join("profile.csv"), dir.join("profile_model.csv"), dir.join("surface_scan.json")];
        io::write_csv_file(&files[0], "surface-profile", self.rows())?;
        let model: Vec<ProfileRow> = self
            .profile
            .points
            .iter()
            .map(|p| ProfileRow { h_m: p.distance, attenuation: self.summary.true_profile.factor(p.distance) })
            .collect();
        io::write_csv_file(&files[1], "surface-profile", model)?;
        io::write_json(&files[2], &self.summary)?;
        Ok(files)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KeyDistSummary {
    pub seed: u64,
    pub result: ProtocolResult,
    pub sifted_fraction: f64,
    pub intercepted: usize,
    /// Share of intercepted rounds where E measured `1` and assumed the
    /// sender's actual bit.
    pub correct_forward_given_one: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct KeyDistOutput {
    pub records: Vec<SessionRecord>,
    pub summary: KeyDistSummary,
}

pub fn keydist(cfg: &ExperimentConfig) -> Result<KeyDistOutput, ExperimentError> {
    let session_cfg = cfg.session_config()?;
    let bits = keydist::random_bits(cfg.protocol.rounds, cfg.seed);
    let session = keydist::run_session(&bits, &session_cfg)?;
    let actions: Vec<_> = session.records.iter().filter_map(|r| r.eavesdropper_action).collect();
    let ones: Vec<_> = actions.iter().filter(|a| a.measured_bit).collect();
    let summary = KeyDistSummary {
        seed: cfg.seed,
        sifted_fraction: session.result.sifted as f64 / session.result.rounds as f64,
        intercepted: actions.len(),
        correct_forward_given_one: (!ones.is_empty())
            .then(|| ones.iter().filter(|a| a.forward_correct).count() as f64 / ones.len() as f64),
        result: session.result,
    };
    Ok(KeyDistOutput { records: session.records, summary })
}

impl KeyDistOutput {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        prepare(dir)?;
        let files = vec![dir.join("transcript.jsonl"), dir.join("keydist_summary.json")];
        io::write_jsonl(std::io::BufWriter::new(fs::File::create(&files[0])?), &self.records)?;
        io::write_json(&files[1], &self.summary)?;
        Ok(files)
    }
}

#[derive(Debug, Clone)]
pub struct TableOutput {
    pub entries: Vec<TableEntry>,
    pub rendered: String,
}

pub fn table() -> TableOutput {
    TableOutput { entries: keydist::enumerate_table(), rendered: keydist::render_table() }
}

impl TableOutput {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        prepare(dir)?;
        let files = vec![dir.join("table.txt"), dir.join("table.json")];
        fs::write(&files[0], &self.rendered)?;
        io::write_json(&files[1], &self.entries)?;
        Ok(files)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub source: String,
    pub events: u64,
    pub fit: FitResult,
    /// Contrast with period and envelope held at the fitted values.
    pub fixed_geometry_contrast: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub histogram: Histogram,
    pub summary: FitSummary,
}

#[derive(Debug, Clone, Copy, Serialize)]
struct HistogramRow {
    x: f64,
    counts: u64,
}

/// Fit all events of the configured events file (or a simulated frame) as
/// one histogram.
pub fn fit(cfg: &ExperimentConfig) -> Result<FitOutput, ExperimentError> {
    let acq = cfg.acquisition_config()?;
    let (xs, source): (Vec<f64>, String) = match &cfg.fit.events {
        Some(path) => {
            let rows: Vec<io::EventRow> = io::read_csv_file(path, "events")?;
            (rows.iter().map(|r| r.x).collect(), path.display().to_string())
        }
        None => {
            let sampler = FrameSampler::new(&cfg.fringe()?.with_contrast(cfg.fit.contrast), &acq)?;
            let mut rng = stream_rng(cfg.seed, 0);
            let frame = sampler.frame_with_count(0, cfg.fit.simulated_events, &mut rng);
            (frame.events.iter().map(|e| e.x).collect(), format!("simulated C = {}", cfg.fit.contrast))
        }
    };
    let histogram = Histogram::from_positions(xs, acq.window, acq.histogram_bins);
    let fit = demod::fit_fringe(&histogram, None)?;
    let fixed_geometry_contrast = demod::estimate_contrast_fixed_geometry(&histogram, &fit.model()).ok();
    let summary = FitSummary { source, events: histogram.total(), fit, fixed_geometry_contrast };
    Ok(FitOutput { histogram, summary })
}

impl FitOutput {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        prepare(dir)?;
        let files = vec![dir.join("histogram.csv"), dir.join("fit.json")];
        let rows = self.histogram.pairs().map(|(x, counts)| HistogramRow { x, counts });
        io::write_csv_file(&files[0], "histogram", rows)?;
        io::write_json(&files[1], &self.summary)?;
        Ok(files)
    }
}
