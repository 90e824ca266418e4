//! File formats: CSV tables with a `# mwmodem <kind> v1` first line,
//! pretty JSON summaries and JSON-lines transcripts.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demod::{ContrastTrace, TraceEntry};
use crate::detector::{DetectorFrame, Event};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("expected header `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
}

pub fn header_line(kind: &str) -> String {
    format!("# mwmodem {kind} v{FORMAT_VERSION}")
}

pub fn write_csv<W, T, I>(out: W, kind: &str, rows: I) -> Result<(), IoError>
where
    W: Write,
    T: Serialize,
    I: IntoIterator<Item = T>,
{
    let mut out = out;
    writeln!(out, "{}", header_line(kind))?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read, T: DeserializeOwned>(input: R, kind: &str) -> Result<Vec<T>, IoError> {
    let mut input = BufReader::new(input);
    let mut first = String::new();
    input.read_line(&mut first)?;
    let expected = header_line(kind);
    if first.trim_end() != expected {
        return Err(IoError::Header { expected, found: first.trim_end().to_string() });
    }
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(IoError::from)).collect()
}

pub fn write_csv_file<T: Serialize, I: IntoIterator<Item = T>>(
    path: &Path,
    kind: &str,
    rows: I,
) -> Result<(), IoError> {
    write_csv(BufWriter::new(File::create(path)?), kind, rows)
}

pub fn read_csv_file<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<Vec<T>, IoError> {
    read_csv(File::open(path)?, kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub bin: u64,
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub bin: u64,
    pub contrast: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub h_m: f64,
    pub attenuation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WienRow {
    #[serde(rename = "U_WF")]
    pub u_wf: f64,
    pub contrast: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WienMeasurementRow {
    #[serde(rename = "U_WF")]
    pub u_wf: f64,
    pub contrast: f64,
    pub contrast_sd: f64,
}

pub fn event_rows(frames: &[DetectorFrame]) -> impl Iterator<Item = EventRow> + '_ {
    frames.iter().flat_map(|f| f.events.iter().map(move |e| EventRow { bin: f.bin_index, t: e.t, x: e.x, y: e.y }))
}

/// Regroup event rows into frames, in order of first appearance of each bin.
pub fn frames_from_rows(rows: &[EventRow]) -> Vec<DetectorFrame> {
    let mut frames: Vec<DetectorFrame> = Vec::new();
    for r in rows {
        let ev = Event { t: r.t, x: r.x, y: r.y };
        match frames.iter_mut().rev().find(|f| f.bin_index == r.bin) {
            Some(f) => f.events.push(ev),
            None => frames.push(DetectorFrame { bin_index: r.bin, events: vec![ev] }),
        }
    }
    frames
}

pub fn trace_rows(trace: &ContrastTrace) -> impl Iterator<Item = TraceRow> + '_ {
    trace.entries.iter().map(|e| TraceRow { bin: e.bin, contrast: e.contrast, converged: e.converged })
}

pub fn trace_from_rows(rows: &[TraceRow]) -> ContrastTrace {
    ContrastTrace {
        entries: rows.iter().map(|r| TraceEntry { bin: r.bin, contrast: r.contrast, converged: r.converged }).collect(),
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn write_jsonl<W: Write, T: Serialize>(out: W, records: &[T]) -> Result<(), IoError> {
    let mut out = out;
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<R: Read, T: DeserializeOwned>(input: R) -> Result<Vec<T>, IoError> {
    BufReader::new(input)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}
