//! Matterwave key distribution.
//!
//! Wave-packet positions are integer multiples `k` of the shift quantum Δ.
//! Only `k = 0` (full overlap) reads as `1`; every other position is
//! background contrast and reads as `0`. The sender encodes a `1` at `k = 0`
//! and a `0` at `k = ±1`, then applies a random shift `ws`. The receiver
//! applies a random shift `wr` before measuring. Rounds where `wr` undoes
//! `ws` are kept.

use std::fmt;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demod;
use crate::detector::{self, AcquisitionConfig, FrameSampler, FringeModel};
use crate::physics::{contrast_envelope, BeamParameters, OverlapModel};
use crate::rng::{stream_rng, SimRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KeyDistError {
    #[error("key must contain at least one bit")]
    EmptyKey,
    #[error("disclosure fraction must lie in (0, 1], got {0}")]
    InvalidDisclosure(f64),
    #[error("intercept fraction must lie in [0, 1], got {0}")]
    InvalidIntercept(f64),
    #[error("invalid contrast readout: {0}")]
    InvalidReadout(String),
}

/// Wave-packet position in units of the shift quantum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PacketPosition(pub i64);

impl PacketPosition {
    pub const ONE: Self = Self(0);

    /// `1`, `0₋`, `0₊₊`, ... as used in the protocol tables.
    pub fn label(self) -> String {
        match self.0 {
            0 => "1".to_string(),
            k if k < 0 => format!("0{}", "₋".repeat(k.unsigned_abs() as usize)),
            k => format!("0{}", "₊".repeat(k as usize)),
        }
    }
}

impl fmt::Display for PacketPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftChoice {
    Minus,
    #[serde(rename = "none")]
    NoShift,
    Plus,
}

impl ShiftChoice {
    pub const ALL: [ShiftChoice; 3] = [ShiftChoice::Minus, ShiftChoice::NoShift, ShiftChoice::Plus];

    pub fn delta(self) -> i64 {
        match self {
            ShiftChoice::Minus => -1,
            ShiftChoice::NoShift => 0,
            ShiftChoice::Plus => 1,
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::ALL[rng.random_range(0..3)]
    }

    pub fn label(self) -> &'static str {
        match self {
            ShiftChoice::Minus => "-Δ",
            ShiftChoice::NoShift => "no",
            ShiftChoice::Plus => "+Δ",
        }
    }
}

pub fn encode_round<R: Rng + ?Sized>(bit: bool, rng: &mut R) -> PacketPosition {
    if bit {
        PacketPosition::ONE
    } else if rng.random::<bool>() {
        PacketPosition(-1)
    } else {
        PacketPosition(1)
    }
}

pub fn apply_shift(position: PacketPosition, choice: ShiftChoice) -> PacketPosition {
    PacketPosition(position.0 + choice.delta())
}

pub fn sift(ws: ShiftChoice, wr: ShiftChoice) -> bool {
    ws.delta() + wr.delta() == 0
}

/// Contrast readout of a position: sample a detector frame at the contrast
/// of shift `kΔ`, fit its contrast with the known fringe geometry, and
/// compare with a cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastReadout {
    pub overlap: OverlapModel,
    pub max_contrast: f64,
    /// Δ in meters of longitudinal shift.
    pub shift_quantum: f64,
    pub events: usize,
    /// Fringe geometry; contrast is replaced per position.
    pub fringe: FringeModel,
    pub acquisition: AcquisitionConfig,
    /// Bit is `1` when the fitted contrast reaches `cutoff_fraction × C_max`.
    pub cutoff_fraction: f64,
}

impl ContrastReadout {
    /// Readout with Δ = `quantum_in_lc` coherence lengths.
    pub fn for_beam(beam: &BeamParameters, quantum_in_lc: f64, events: usize) -> Result<Self, KeyDistError> {
        let overlap = OverlapModel::for_beam(beam);
        let r = Self {
            overlap,
            max_contrast: beam.max_contrast(),
            shift_quantum: quantum_in_lc * overlap.coherence_length,
            events,
            fringe: FringeModel::centered(beam.max_contrast(), 5.0)
                .map_err(|e| KeyDistError::InvalidReadout(e.to_string()))?,
            acquisition: AcquisitionConfig::default(),
            cutoff_fraction: 0.5,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), KeyDistError> {
        let bad = |m: String| Err(KeyDistError::InvalidReadout(m));
        if !(self.shift_quantum > 0.0 && self.shift_quantum.is_finite()) {
            return bad(format!("shift quantum {}", self.shift_quantum));
        }
        if self.events < demod::MIN_FIT_COUNTS as usize {
            return bad(format!("need at least {} events, got {}", demod::MIN_FIT_COUNTS, self.events));
        }
        if !(0.0..1.0).contains(&self.cutoff_fraction) {
            return bad(format!("cutoff fraction {}", self.cutoff_fraction));
        }
        self.acquisition.validate().map_err(|e| KeyDistError::InvalidReadout(e.to_string()))?;
        Ok(())
    }

    pub fn contrast_of(&self, position: PacketPosition) -> f64 {
        contrast_envelope(position.0 as f64 * self.shift_quantum, &self.overlap, self.max_contrast)
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff_fraction * self.max_contrast
    }

    fn read(&self, sampler: &FrameSampler, rng: &mut SimRng) -> bool {
        let frame = sampler.frame_with_count(0, self.events, rng);
        let Ok(hist) = detector::histogram(&frame, &self.acquisition) else {
            return false;
        };
        // the receiver's fringe geometry is calibrated, only contrast is unknown
        match demod::estimate_contrast_fixed_geometry(&hist, &self.fringe) {
            Ok(c) => c >= self.cutoff(),
            Err(_) => false,
        }
    }

    fn sampler(&self, position: PacketPosition) -> FrameSampler {
        FrameSampler::new(&self.fringe.with_contrast(self.contrast_of(position)), &self.acquisition)
            .expect("validated readout")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureMode {
    Ideal,
    Contrast(ContrastReadout),
}

pub fn measure_bit(position: PacketPosition, mode: &MeasureMode, rng: &mut SimRng) -> bool {
    match mode {
        MeasureMode::Ideal => position.0 == 0,
        MeasureMode::Contrast(r) => r.read(&r.sampler(position), rng),
    }
}

/// Measures many positions, keeping one tabulated sampler per position.
struct Meter<'a> {
    mode: &'a MeasureMode,
    samplers: Vec<(PacketPosition, FrameSampler)>,
}

impl<'a> Meter<'a> {
    fn new(mode: &'a MeasureMode) -> Self {
        Self { mode, samplers: Vec::new() }
    }

    fn measure(&mut self, position: PacketPosition, rng: &mut SimRng) -> bool {
        let MeasureMode::Contrast(r) = self.mode else {
            return position.0 == 0;
        };
        let idx = match self.samplers.iter().position(|(p, _)| *p == position) {
            Some(i) => i,
            None => {
                self.samplers.push((position, r.sampler(position)));
                self.samplers.len() - 1
            }
        };
        r.read(&self.samplers[idx].1, rng)
    }
}

/// One cell of the 3×3 protocol matrix: row = sender shift `ws`, column =
/// encoded position `0₋`, `1`, `0₊`. Both are numbered 1..=3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: u8,
    pub col: u8,
}

impl Cell {
    pub fn new(ws: ShiftChoice, encoded: PacketPosition) -> Self {
        Self { row: (ws.delta() + 2) as u8, col: (encoded.0 + 2) as u8 }
    }

    pub fn all() -> impl Iterator<Item = Cell> {
        (1..=3).flat_map(|row| (1..=3).map(move |col| Cell { row, col }))
    }

    pub fn ws(self) -> ShiftChoice {
        ShiftChoice::ALL[self.row as usize - 1]
    }

    pub fn encoded(self) -> PacketPosition {
        PacketPosition(self.col as i64 - 2)
    }

    pub fn sender_bit(self) -> bool {
        self.col == 2
    }

    pub fn transmitted(self) -> PacketPosition {
        apply_shift(self.encoded(), self.ws())
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}{})", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub encoded: PacketPosition,
    pub ws: ShiftChoice,
    pub wr: ShiftChoice,
    pub transmitted: PacketPosition,
    pub received: PacketPosition,
}

/// All 27 combinations of encoded position, sender shift and receiver shift,
/// ordered row (ws), column (encoded), then wr.
pub fn enumerate_table() -> Vec<TableEntry> {
    let mut out = Vec::with_capacity(27);
    for cell in Cell::all() {
        for wr in ShiftChoice::ALL {
            let transmitted = cell.transmitted();
            out.push(TableEntry {
                encoded: cell.encoded(),
                ws: cell.ws(),
                wr,
                transmitted,
                received: apply_shift(transmitted, wr),
            });
        }
    }
    out
}

/// Plain-text rendering of the 3×3 table: each cell shows the transmitted
/// state followed by the receiver outcome for `-Δ`, `no`, `+Δ`.
pub fn render_table() -> String {
    let entries = enumerate_table();
    let mut out = String::from("ws \\ sent | 0₋ | 1 | 0₊\n");
    for (r, ws) in ShiftChoice::ALL.iter().enumerate() {
        let cells: Vec<String> = (0..3)
            .map(|c| {
                let e = &entries[(r * 3 + c) * 3..(r * 3 + c) * 3 + 3];
                format!(
                    "{} -> {}",
                    e[0].transmitted,
                    e.iter().map(|x| format!("{}:{}", x.wr.label(), x.received)).collect::<Vec<_>>().join(" ")
                )
            })
            .collect();
        out.push_str(&format!("{} | {}\n", ws.label(), cells.join(" | ")));
    }
    out
}

/// Cells whose transmitted state, after E's own shift, reads as `measured`.
pub fn eavesdropper_consistent_cells(e_choice: ShiftChoice, measured: bool) -> Vec<Cell> {
    Cell::all().filter(|c| (apply_shift(c.transmitted(), e_choice).0 == 0) == measured).collect()
}

/// Prior weight of a cell: bit uniform, `0` split evenly over `0₋`/`0₊`,
/// shift uniform.
fn cell_prior(cell: Cell) -> f64 {
    (if cell.sender_bit() { 0.5 } else { 0.25 }) / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EveShift {
    #[default]
    Uniform,
    Fixed {
        shift: ShiftChoice,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardPolicy {
    /// Pick one of the consistent cells uniformly.
    #[default]
    UniformConsistent,
    /// Pick the consistent cell with the largest prior; ties uniformly.
    MaximumPosterior,
}

/// Intercept-resend attacker between sender and receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Eavesdropper {
    pub shift: EveShift,
    pub forward: ForwardPolicy,
    /// Fraction of rounds intercepted.
    pub intercept_fraction: f64,
}

impl Default for Eavesdropper {
    fn default() -> Self {
        Self { shift: EveShift::Uniform, forward: ForwardPolicy::UniformConsistent, intercept_fraction: 1.0 }
    }
}

impl Eavesdropper {
    /// Choose which cell to assume the sender used.
    pub fn interpret<R: Rng + ?Sized>(&self, e_choice: ShiftChoice, measured: bool, rng: &mut R) -> Cell {
        let mut cells = eavesdropper_consistent_cells(e_choice, measured);
        if self.forward == ForwardPolicy::MaximumPosterior {
            let best = cells.iter().map(|c| cell_prior(*c)).fold(0.0, f64::max);
            cells.retain(|c| cell_prior(*c) == best);
        }
        *cells.choose(rng).expect("every measurement has a consistent cell")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EavesdropperAction {
    pub shift: ShiftChoice,
    pub measured_bit: bool,
    pub interpretation: Cell,
    pub forwarded: PacketPosition,
    /// The assumed cell carries the sender's actual bit.
    pub forward_correct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub round: u64,
    pub sender_bit: bool,
    pub sender_encode_position: PacketPosition,
    pub ws: ShiftChoice,
    pub wr: ShiftChoice,
    /// Set when the sender also announces the encoding position publicly.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub announced_encoding: Option<PacketPosition>,
    pub eavesdropper_action: Option<EavesdropperAction>,
    pub received_position: PacketPosition,
    pub receiver_bit: bool,
    pub sifted: bool,
    pub disclosed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionConfig {
    pub eavesdropper: Option<Eavesdropper>,
    /// Fraction of sifted rounds published for comparison; the rest is key.
    pub disclosure_fraction: f64,
    /// Publish the encoding position along with `ws`.
    pub announce_encoding: bool,
    pub mode: MeasureMode,
    /// Mismatch fraction on disclosed rounds above which an eavesdropper is
    /// declared; `0` means any mismatch.
    pub mismatch_threshold: f64,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            eavesdropper: None,
            disclosure_fraction: 1.0,
            announce_encoding: false,
            mode: MeasureMode::Ideal,
            mismatch_threshold: 0.0,
            seed: 0,
        }
    }
}

/// Mismatch threshold used in contrast mode.
pub const CONTRAST_MODE_MISMATCH_THRESHOLD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub rounds: usize,
    pub sifted: usize,
    pub sender_key: Vec<bool>,
    pub receiver_key: Vec<bool>,
    pub disclosed: usize,
    pub mismatches: usize,
    pub mismatch_fraction: f64,
    pub eavesdropper_detected: bool,
}

impl ProtocolResult {
    pub fn key_errors(&self) -> usize {
        self.sender_key.iter().zip(&self.receiver_key).filter(|(a, b)| a != b).count()
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    pub records: Vec<SessionRecord>,
    pub result: ProtocolResult,
}

pub fn random_bits(n: usize, seed: u64) -> Vec<bool> {
    let mut rng = stream_rng(seed, u64::MAX);
    (0..n).map(|_| rng.random()).collect()
}

/// Run one round per key bit. Round `i` draws from stream `i` of the seed.
pub fn run_session(key_bits: &[bool], config: &SessionConfig) -> Result<Session, KeyDistError> {
    if key_bits.is_empty() {
        return Err(KeyDistError::EmptyKey);
    }
    if !(config.disclosure_fraction > 0.0 && config.disclosure_fraction <= 1.0) {
        return Err(KeyDistError::InvalidDisclosure(config.disclosure_fraction));
    }
    if let Some(e) = &config.eavesdropper {
        if !(0.0..=1.0).contains(&e.intercept_fraction) {
            return Err(KeyDistError::InvalidIntercept(e.intercept_fraction));
        }
    }
    if let MeasureMode::Contrast(r) = &config.mode {
        r.validate()?;
    }

    let mut meter = Meter::new(&config.mode);
    let mut records = Vec::with_capacity(key_bits.len());
    for (i, &bit) in key_bits.iter().enumerate() {
        let mut rng = stream_rng(config.seed, i as u64);
        let encoded = encode_round(bit, &mut rng);
        let ws = ShiftChoice::random(&mut rng);
        let wr = ShiftChoice::random(&mut rng);
        let disclose_draw: f64 = rng.random();
        let transmitted = apply_shift(encoded, ws);

        let mut action = None;
        let mut arriving = transmitted;
        if let Some(eve) = &config.eavesdropper {
            if rng.random::<f64>() < eve.intercept_fraction {
                let shift = match eve.shift {
                    EveShift::Uniform => ShiftChoice::random(&mut rng),
                    EveShift::Fixed { shift } => shift,
                };
                let measured_bit = meter.measure(apply_shift(transmitted, shift), &mut rng);
                let interpretation = eve.interpret(shift, measured_bit, &mut rng);
                arriving = interpretation.transmitted();
                action = Some(EavesdropperAction {
                    shift,
                    measured_bit,
                    interpretation,
                    forwarded: arriving,
                    forward_correct: interpretation.sender_bit() == bit,
                });
            }
        }

        let received_position = apply_shift(arriving, wr);
        let receiver_bit = meter.measure(received_position, &mut rng);
        let sifted = sift(ws, wr);
        records.push(SessionRecord {
            round: i as u64,
            sender_bit: bit,
            sender_encode_position: encoded,
            ws,
            wr,
            announced_encoding: config.announce_encoding.then_some(encoded),
            eavesdropper_action: action,
            received_position,
            receiver_bit,
            sifted,
            disclosed: sifted && disclose_draw < config.disclosure_fraction,
        });
    }

    let result = summarize(&records, config.mismatch_threshold);
    Ok(Session { records, result })
}

fn summarize(records: &[SessionRecord], threshold: f64) -> ProtocolResult {
    let sifted: Vec<&SessionRecord> = records.iter().filter(|r| r.sifted).collect();
    let (disclosed, key): (Vec<&SessionRecord>, Vec<&SessionRecord>) = sifted.iter().partition(|r| r.disclosed);
    let mismatches = disclosed.iter().filter(|r| r.sender_bit != r.receiver_bit).count();
    let mismatch_fraction = if disclosed.is_empty() { 0.0 } else { mismatches as f64 / disclosed.len() as f64 };
    ProtocolResult {
        rounds: records.len(),
        sifted: sifted.len(),
        sender_key: key.iter().map(|r| r.sender_bit).collect(),
        receiver_key: key.iter().map(|r| r.receiver_bit).collect(),
        disclosed: disclosed.len(),
        mismatches,
        mismatch_fraction,
        eavesdropper_detected: mismatches > 0 && mismatch_fraction > threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(k: i64) -> PacketPosition {
        PacketPosition(k)
    }

    #[test]
    fn labels() {
        assert_eq!(p(0).label(), "1");
        assert_eq!(p(-1).label(), "0₋");
        assert_eq!(p(2).label(), "0₊₊");
        assert_eq!(p(-3).label(), "0₋₋₋");
    }

    #[test]
    fn shifts_and_sifting() {
        assert_eq!(apply_shift(p(0), ShiftChoice::Minus), p(-1));
        assert_eq!(apply_shift(p(-1), ShiftChoice::Plus), p(0));
        assert_eq!(apply_shift(p(7), ShiftChoice::NoShift), p(7));
        assert!(sift(ShiftChoice::NoShift, ShiftChoice::NoShift));
        assert!(sift(ShiftChoice::Minus, ShiftChoice::Plus));
        assert!(!sift(ShiftChoice::Minus, ShiftChoice::Minus));
        assert!(!sift(ShiftChoice::NoShift, ShiftChoice::Plus));
    }

    #[test]
    fn ideal_measurement() {
        let mut rng = stream_rng(0, 0);
        assert!(measure_bit(p(0), &MeasureMode::Ideal, &mut rng));
        assert!(!measure_bit(p(-2), &MeasureMode::Ideal, &mut rng));
        assert!(!measure_bit(p(3), &MeasureMode::Ideal, &mut rng));
    }

    #[test]
    fn encoding_split() {
        let mut rng = stream_rng(11, 0);
        assert_eq!(encode_round(true, &mut rng), p(0));
        let plus = (0..1000).filter(|_| encode_round(false, &mut rng) == p(1)).count();
        assert!((450..=550).contains(&plus), "{plus}");
    }

    #[test]
    fn table_has_27_entries() {
        let t = enumerate_table();
        assert_eq!(t.len(), 27);
        let find = |enc, ws, wr| t.iter().find(|e| e.encoded == p(enc) && e.ws == ws && e.wr == wr).unwrap().received;
        assert_eq!(find(-1, ShiftChoice::Minus, ShiftChoice::Plus), p(-1));
        assert_eq!(find(0, ShiftChoice::NoShift, ShiftChoice::NoShift), p(0));
        assert_eq!(find(1, ShiftChoice::Plus, ShiftChoice::Plus), p(3));
        assert!(render_table().contains("0₊₊ -> -Δ:0₊ no:0₊₊ +Δ:0₊₊₊"));
    }

    #[test]
    fn sifted_rounds_reverse_sender_shift() {
        for e in enumerate_table().iter().filter(|e| sift(e.ws, e.wr)) {
            assert_eq!(e.received, e.encoded);
        }
    }

    #[test]
    fn consistent_cells_partition_matrix() {
        for e in ShiftChoice::ALL {
            let mut all = eavesdropper_consistent_cells(e, true);
            all.extend(eavesdropper_consistent_cells(e, false));
            all.sort();
            assert_eq!(all, Cell::all().collect::<Vec<_>>());
        }
    }

    #[test]
    fn clean_session_agrees() {
        let bits = random_bits(500, 3);
        let cfg = SessionConfig { disclosure_fraction: 0.3, seed: 5, ..Default::default() };
        let s = run_session(&bits, &cfg).unwrap();
        assert_eq!(s.result.mismatches, 0);
        assert_eq!(s.result.key_errors(), 0);
        assert!(!s.result.eavesdropper_detected);
        assert_eq!(s.result.sifted, s.result.disclosed + s.result.sender_key.len());
        let kept: Vec<bool> = s.records.iter().filter(|r| r.sifted && !r.disclosed).map(|r| r.sender_bit).collect();
        assert_eq!(kept, s.result.sender_key);
    }

    #[test]
    fn session_errors() {
        assert_eq!(run_session(&[], &SessionConfig::default()).unwrap_err(), KeyDistError::EmptyKey);
        let cfg = SessionConfig { disclosure_fraction: 0.0, ..Default::default() };
        assert!(matches!(run_session(&[true], &cfg), Err(KeyDistError::InvalidDisclosure(_))));
    }

    #[test]
    fn intercept_resend_is_caught() {
        let bits = random_bits(2000, 1);
        let cfg = SessionConfig { eavesdropper: Some(Eavesdropper::default()), seed: 2, ..Default::default() };
        let s = run_session(&bits, &cfg).unwrap();
        assert!(s.result.eavesdropper_detected);
        assert!(s.records.iter().all(|r| r.eavesdropper_action.is_some()));
    }

    #[test]
    fn deterministic_under_seed() {
        let bits = random_bits(100, 9);
        let cfg = SessionConfig { eavesdropper: Some(Eavesdropper::default()), seed: 4, ..Default::default() };
        assert_eq!(run_session(&bits, &cfg).unwrap().records, run_session(&bits, &cfg).unwrap().records);
    }
}
