//! Text ⇄ Wien setpoint schedules, and contrast traces back to text.
//!
//! Characters are sent MSB first as fixed-width Latin-1 codes between a
//! start and an end sequence. Every bit occupies `bins_per_bit` time bins;
//! a `1` drives the filter to the high-contrast state, a `0` to the low one.
//! The decoder averages groups of bins into bars and compares them with a
//! cutoff set relative to the mean contrast of the whole transmission.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demod::ContrastTrace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodecError {
    #[error("character {0:?} cannot be encoded in the configured character width")]
    Unencodable(char),
    #[error("invalid framing config: {0}")]
    InvalidFraming(String),
    #[error("invalid bit string {0:?}")]
    InvalidBits(String),
    #[error("trace has {got} bins, too short for start and end sequences ({needed} bins)")]
    TraceTooShort { got: usize, needed: usize },
    #[error("no start pulse found in the trace")]
    NoStartPulse,
    #[error("start sequence not found; bits: {bits}")]
    StartNotFound { bits: BitString },
    #[error("end sequence not found; bits: {bits}")]
    EndNotFound { bits: BitString },
}

impl CodecError {
    /// Best-effort bit dump for framing failures.
    pub fn bits(&self) -> Option<&BitString> {
        match self {
            CodecError::StartNotFound { bits } | CodecError::EndNotFound { bits } => Some(bits),
            _ => None,
        }
    }

    pub fn is_framing(&self) -> bool {
        matches!(
            self,
            CodecError::NoStartPulse
                | CodecError::StartNotFound { .. }
                | CodecError::EndNotFound { .. }
                | CodecError::TraceTooShort { .. }
        )
    }
}

/// Sequence of bits, written as a string of `0`/`1`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct BitString(pub Vec<bool>);

impl BitString {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl FromStr for BitString {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(CodecError::InvalidBits(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

impl TryFrom<String> for BitString {
    type Error = CodecError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<BitString> for String {
    fn from(b: BitString) -> Self {
        b.to_string()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// How bars are split into `0` and `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// `cutoff_factor × mean contrast of all bins`.
    #[default]
    MeanFraction,
    /// Midpoint between the two centroids of a 1-D two-means clustering of bars.
    TwoCluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FramingConfig {
    pub start_sequence: BitString,
    pub end_sequence: BitString,
    pub bins_per_bit: usize,
    pub cutoff_factor: f64,
    pub char_width: usize,
    pub threshold_mode: ThresholdMode,
}

impl Default for FramingConfig {
    fn default() -> Self {
        Self {
            start_sequence: "000010".parse().expect("literal"),
            end_sequence: "110000".parse().expect("literal"),
            bins_per_bit: 5,
            cutoff_factor: 0.8,
            char_width: 8,
            threshold_mode: ThresholdMode::MeanFraction,
        }
    }
}

impl FramingConfig {
    pub fn validate(&self) -> Result<(), CodecError> {
        let bad = |m: &str| Err(CodecError::InvalidFraming(m.to_string()));
        if self.start_sequence.is_empty() || self.end_sequence.is_empty() {
            return bad("start and end sequences must be non-empty");
        }
        if self.bins_per_bit == 0 {
            return bad("bins_per_bit must be at least 1");
        }
        if !(self.cutoff_factor > 0.0 && self.cutoff_factor < 1.0) {
            return bad("cutoff_factor must lie in (0, 1)");
        }
        if !(1..=8).contains(&self.char_width) {
            return bad("char_width must lie in 1..=8");
        }
        Ok(())
    }

    /// Bins needed for a message of `chars` characters.
    pub fn schedule_bins(&self, chars: usize) -> usize {
        (self.start_sequence.len() + self.char_width * chars + self.end_sequence.len()) * self.bins_per_bit
    }
}

/// Wien filter setpoint for one time bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WienState {
    /// State 1: packets shifted apart, low contrast, bit `0`.
    Low,
    /// State 2: full overlap, high contrast, bit `1`.
    High,
}

impl From<bool> for WienState {
    fn from(bit: bool) -> Self {
        if bit {
            WienState::High
        } else {
            WienState::Low
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitSchedule {
    pub bits: BitString,
    pub bins_per_bit: usize,
}

impl BitSchedule {
    pub fn bins(&self) -> Vec<WienState> {
        self.bits.0.iter().flat_map(|&b| std::iter::repeat_n(WienState::from(b), self.bins_per_bit)).collect()
    }

    pub fn len_bins(&self) -> usize {
        self.bits.len() * self.bins_per_bit
    }
}

fn char_bits(c: char, width: usize) -> Result<impl Iterator<Item = bool>, CodecError> {
    let code = c as u32;
    if code >= 1 << width {
        return Err(CodecError::Unencodable(c));
    }
    Ok((0..width).rev().map(move |i| (code >> i) & 1 == 1))
}

pub fn encode_message(text: &str, framing: &FramingConfig) -> Result<BitSchedule, CodecError> {
    framing.validate()?;
    let mut bits = framing.start_sequence.0.clone();
    for c in text.chars() {
        bits.extend(char_bits(c, framing.char_width)?);
    }
    bits.extend_from_slice(&framing.end_sequence.0);
    Ok(BitSchedule { bits: BitString(bits), bins_per_bit: framing.bins_per_bit })
}

/// One deflector voltage per bin.
pub fn schedule_to_setpoints(schedule: &BitSchedule, high_voltage: f64, low_voltage: f64) -> Vec<f64> {
    schedule
        .bins()
        .into_iter()
        .map(|s| match s {
            WienState::High => high_voltage,
            WienState::Low => low_voltage,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub text: String,
    /// Payload bits between start and end sequences.
    pub payload: BitString,
    /// Every thresholded bar, framing included.
    pub bits: BitString,
    /// Mean contrast of each bit period.
    pub bars: Vec<f64>,
    pub mean_contrast: f64,
    pub cutoff: f64,
    pub bins_per_bit: usize,
    /// Trace bin where the first bar starts.
    pub offset: usize,
}

/// Width of the first high-contrast pulse and the bin where it starts.
///
/// A bin belongs to a pulse when it rises above `min + 0.5 (max - min)`.
pub fn estimate_bins_per_bit(values: &[f64]) -> Result<(usize, usize), CodecError> {
    let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(max > min) || !(max - min > 1e-9 * max.abs().max(1e-300)) {
        return Err(CodecError::NoStartPulse);
    }
    let level = min + 0.5 * (max - min);
    let start = values.iter().position(|&v| v >= level).ok_or(CodecError::NoStartPulse)?;
    let width = values[start..].iter().take_while(|&&v| v >= level).count();
    Ok((width, start))
}

fn two_cluster_threshold(bars: &[f64]) -> f64 {
    let (mut lo, mut hi) = bars.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let (mut sl, mut nl, mut sh, mut nh) = (0.0, 0usize, 0.0, 0usize);
        for &v in bars {
            if v >= mid {
                sh += v;
                nh += 1;
            } else {
                sl += v;
                nl += 1;
            }
        }
        let new_lo = if nl > 0 { sl / nl as f64 } else { lo };
        let new_hi = if nh > 0 { sh / nh as f64 } else { hi };
        if new_lo == lo && new_hi == hi {
            break;
        }
        lo = new_lo;
        hi = new_hi;
    }
    0.5 * (lo + hi)
}

pub fn decode_trace(
    trace: &ContrastTrace,
    framing: &FramingConfig,
    bins_per_bit: Option<usize>,
) -> Result<Decoded, CodecError> {
    decode_values(&trace.values(), framing, bins_per_bit)
}

/// Decode per-bin contrast values.
///
/// Without `bins_per_bit` the bit length is taken from the width of the
/// first pulse (the `1` of the start sequence) and the bar grid is aligned
/// to it; with it, bars start at bin 0.
pub fn decode_values(
    values: &[f64],
    framing: &FramingConfig,
    bins_per_bit: Option<usize>,
) -> Result<Decoded, CodecError> {
    framing.validate()?;
    let framing_bits = framing.start_sequence.len() + framing.end_sequence.len();
    let (bpb, offset) = match bins_per_bit {
        Some(0) => return Err(CodecError::InvalidFraming("bins_per_bit must be at least 1".into())),
        Some(b) => (b, 0),
        None => {
            let first_one = framing.start_sequence.0.iter().position(|&b| b).ok_or_else(|| {
                CodecError::InvalidFraming("start sequence has no 1 to measure the bit length".into())
            })?;
            let (width, pulse) = estimate_bins_per_bit(values)?;
            let lead = first_one * width;
            if pulse < lead {
                return Err(CodecError::StartNotFound { bits: BitString::default() });
            }
            (width, pulse - lead)
        }
    };
    let needed = framing_bits * bpb;
    if values.len() < offset + needed {
        return Err(CodecError::TraceTooShort { got: values.len(), needed: offset + needed });
    }
    let n_bars = (values.len() - offset) / bpb;
    let used = &values[offset..offset + n_bars * bpb];
    let bars: Vec<f64> = used.chunks(bpb).map(|c| c.iter().sum::<f64>() / bpb as f64).collect();
    let mean_contrast = used.iter().sum::<f64>() / used.len() as f64;
    let cutoff = match framing.threshold_mode {
        ThresholdMode::MeanFraction => framing.cutoff_factor * mean_contrast,
        ThresholdMode::TwoCluster => two_cluster_threshold(&bars),
    };
    // ties go to 1
    let bits = BitString(bars.iter().map(|&b| b >= cutoff).collect());

    let start_len = framing.start_sequence.len();
    if bits.0[..start_len] != framing.start_sequence.0[..] {
        return Err(CodecError::StartNotFound { bits });
    }
    let end = &framing.end_sequence.0;
    let cw = framing.char_width;
    let end_at = (0..)
        .map(|k| start_len + k * cw)
        .take_while(|&i| i + end.len() <= bits.len())
        .filter(|&i| bits.0[i..i + end.len()] == end[..])
        .last();
    let Some(end_at) = end_at else {
        return Err(CodecError::EndNotFound { bits });
    };
    let payload = BitString(bits.0[start_len..end_at].to_vec());
    let text = payload
        .0
        .chunks(cw)
        .map(|chunk| {
            let code = chunk.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
            char::from_u32(code).expect("codes below 256 are valid chars")
        })
        .collect();
    Ok(Decoded { text, payload, bits, bars, mean_contrast, cutoff, bins_per_bit: bpb, offset })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal(schedule: &BitSchedule, high: f64, low: f64) -> Vec<f64> {
        schedule.bins().into_iter().map(|s| if s == WienState::High { high } else { low }).collect()
    }

    #[test]
    fn encodes_single_character() {
        let f = FramingConfig::default();
        let s = encode_message("M", &f).unwrap();
        assert_eq!(s.bits.to_string(), "000010".to_owned() + "01001101" + "110000");
        assert_eq!(s.len_bins(), 20 * 5);
    }

    #[test]
    fn empty_message_is_framing_only() {
        let s = encode_message("", &FramingConfig::default()).unwrap();
        assert_eq!(s.bits.to_string(), "000010110000");
    }

    #[test]
    fn reference_message_length() {
        let f = FramingConfig::default();
        let s = encode_message("Matterwave modulation", &f).unwrap();
        assert_eq!(s.len_bins(), 900);
        assert_eq!(f.schedule_bins(21), 900);
    }

    #[test]
    fn rejects_unencodable() {
        let f = FramingConfig::default();
        assert_eq!(encode_message("a€", &f).unwrap_err(), CodecError::Unencodable('€'));
        let seven = FramingConfig { char_width: 7, ..Default::default() };
        assert!(encode_message("é", &seven).is_err());
        assert!(encode_message("e", &seven).is_ok());
    }

    #[test]
    fn setpoints_per_bin() {
        let f = FramingConfig::default();
        let s = BitSchedule { bits: "10".parse().unwrap(), bins_per_bit: f.bins_per_bit };
        let v = schedule_to_setpoints(&s, -15.0, -45.0);
        assert_eq!(v, vec![-15.0, -15.0, -15.0, -15.0, -15.0, -45.0, -45.0, -45.0, -45.0, -45.0]);
        let empty = BitSchedule { bits: BitString::default(), bins_per_bit: 5 };
        assert!(schedule_to_setpoints(&empty, -15.0, -45.0).is_empty());
    }

    #[test]
    fn ideal_round_trip() {
        let f = FramingConfig::default();
        let s = encode_message("Matterwave modulation", &f).unwrap();
        let d = decode_values(&ideal(&s, 0.6, 0.25), &f, None).unwrap();
        assert_eq!(d.text, "Matterwave modulation");
        assert_eq!(d.bins_per_bit, 5);
        assert_eq!(d.bars.len(), 180);
        assert!(d.cutoff > 0.25 && d.cutoff < 0.6);
    }

    #[test]
    fn all_high_trace_has_no_start() {
        let f = FramingConfig::default();
        let err = decode_values(&[0.6; 100], &f, None).unwrap_err();
        assert_eq!(err, CodecError::NoStartPulse);
        assert!(err.is_framing());
        let err = decode_values(&[0.6; 100], &f, Some(5)).unwrap_err();
        assert!(matches!(err, CodecError::StartNotFound { .. }));
        assert_eq!(err.bits().unwrap().to_string(), "1".repeat(20));
    }

    #[test]
    fn missing_end_sequence() {
        let f = FramingConfig::default();
        let s = BitSchedule { bits: "00001001001101000000".parse().unwrap(), bins_per_bit: 5 };
        let err = decode_values(&ideal(&s, 0.6, 0.25), &f, None).unwrap_err();
        assert!(matches!(err, CodecError::EndNotFound { .. }), "{err:?}");
    }

    #[test]
    fn tie_at_cutoff_reads_one() {
        let f = FramingConfig {
            start_sequence: "01".parse().unwrap(),
            end_sequence: "1".parse().unwrap(),
            bins_per_bit: 1,
            char_width: 1,
            ..Default::default()
        };
        // mean 0.625, cutoff 0.5 lands exactly on the payload bar
        let d = decode_values(&[0.0, 1.0, 0.5, 1.0], &f, Some(1)).unwrap();
        assert_eq!(d.cutoff, 0.5);
        assert_eq!(d.payload.to_string(), "1");
    }

    #[test]
    fn leading_idle_bins_are_skipped() {
        let f = FramingConfig::default();
        let s = encode_message("Hi", &f).unwrap();
        let mut v = vec![0.25; 3];
        v.extend(ideal(&s, 0.6, 0.25));
        let d = decode_values(&v, &f, None).unwrap();
        assert_eq!(d.offset, 3);
        assert_eq!(d.text, "Hi");
    }

    #[test]
    fn framing_validation() {
        let f = FramingConfig { cutoff_factor: 1.0, ..Default::default() };
        assert!(f.validate().is_err());
        let f = FramingConfig { bins_per_bit: 0, ..Default::default() };
        assert!(encode_message("x", &f).is_err());
        let f = FramingConfig { start_sequence: BitString::default(), ..Default::default() };
        assert!(f.validate().is_err());
        assert!("0120".parse::<BitString>().is_err());
    }

    #[test]
    fn too_short_trace() {
        let f = FramingConfig::default();
        let err = decode_values(&[0.1, 0.2, 0.3], &f, Some(5)).unwrap_err();
        assert!(matches!(err, CodecError::TraceTooShort { .. }));
    }
}
