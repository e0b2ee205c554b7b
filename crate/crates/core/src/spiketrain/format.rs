//! Sparse-event dataset files.
//!
//! ```text
//! SKIPSNN-DATASET v1 P=<int> T=<int> C=<int> N=<int>
//! SAMPLE <index> LABEL <class> EVENTS <count>
//! <t> <channel>
//! ...
//! ```
//!
//! Events are 0-based and strictly ascending by `t` then `channel`; readers
//! reject anything else.

use std::fmt::Write as _;
use std::path::Path;

use super::SpikeTrain;
use crate::error::{Error, Result};

pub const FORMAT_MAGIC: &str = "SKIPSNN-DATASET";
const VERSION: &str = "v1";

/// A list of spike trains sharing the same shape and class count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikeDataset {
    pub num_channels: usize,
    pub horizon: usize,
    pub num_classes: usize,
    pub trains: Vec<SpikeTrain>,
}

impl SpikeDataset {
    pub fn new(num_channels: usize, horizon: usize, num_classes: usize, trains: Vec<SpikeTrain>) -> Result<Self> {
        for (i, tr) in trains.iter().enumerate() {
            if tr.channels() != num_channels || tr.steps() != horizon {
                return Err(Error::Shape(format!(
                    "sample {i} is {}x{}, dataset is {num_channels}x{horizon}",
                    tr.channels(),
                    tr.steps()
                )));
            }
            if tr.label() >= num_classes {
                return Err(Error::InvalidArgument(format!(
                    "sample {i} has label {} but only {num_classes} classes",
                    tr.label()
                )));
            }
        }
        Ok(Self {
            num_channels,
            horizon,
            num_classes,
            trains,
        })
    }

    pub fn encode(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{FORMAT_MAGIC} {VERSION} P={} T={} C={} N={}",
            self.num_channels,
            self.horizon,
            self.num_classes,
            self.trains.len()
        );
        for (i, tr) in self.trains.iter().enumerate() {
            let _ = writeln!(out, "SAMPLE {i} LABEL {} EVENTS {}", tr.label(), tr.spike_count());
            for (t, c) in tr.events() {
                let _ = writeln!(out, "{t} {c}");
            }
        }
        out
    }

    pub fn decode(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (ln, header) = lines.next().ok_or_else(|| fmt_err(1, "empty file, missing header"))?;
        let (p, t, c, n) = parse_header(ln, header)?;
        if p == 0 || t == 0 {
            return Err(fmt_err(ln, "P and T must be positive"));
        }
        let mut trains = Vec::with_capacity(n);
        let mut last_line = ln;
        for expected_index in 0..n {
            let (ln, line) = lines.next().ok_or_else(|| {
                fmt_err(last_line + 1, format!("truncated file: expected SAMPLE {expected_index}"))
            })?;
            let (index, label, count) = parse_sample_header(ln, line)?;
            if index != expected_index {
                return Err(fmt_err(ln, format!("expected sample index {expected_index}, found {index}")));
            }
            if label >= c {
                return Err(fmt_err(ln, format!("label {label} out of range for C={c}")));
            }
            let mut train = SpikeTrain::zeros(p, t, label).map_err(|e| fmt_err(ln, e.to_string()))?;
            let mut prev: Option<(usize, usize)> = None;
            last_line = ln;
            for k in 0..count {
                let (ln, line) = lines.next().ok_or_else(|| {
                    fmt_err(last_line + 1, format!("truncated file: sample {index} has {k} of {count} events"))
                })?;
                let (et, ec) = parse_event(ln, line)?;
                if et >= t || ec >= p {
                    return Err(fmt_err(ln, format!("event ({et}, {ec}) out of range for P={p} T={t}")));
                }
                if prev.is_some_and(|pv| pv >= (et, ec)) {
                    return Err(fmt_err(ln, "events not strictly ascending by (t, channel)"));
                }
                prev = Some((et, ec));
                train.set(et, ec);
                last_line = ln;
            }
            trains.push(train);
        }
        for (ln, line) in lines {
            if !line.trim().is_empty() {
                return Err(fmt_err(ln, "trailing content after last sample"));
            }
        }
        Ok(Self {
            num_channels: p,
            horizon: t,
            num_classes: c,
            trains,
        })
    }
}

pub fn write_dataset(path: impl AsRef<Path>, dataset: &SpikeDataset) -> Result<()> {
    std::fs::write(path, dataset.encode())?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<SpikeDataset> {
    let text = std::fs::read_to_string(path)?;
    SpikeDataset::decode(&text)
}

fn fmt_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        line,
        msg: msg.into(),
    }
}

fn parse_usize(ln: usize, s: &str, what: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| fmt_err(ln, format!("malformed {what}: `{s}`")))
}

fn parse_kv(ln: usize, tok: Option<&str>, key: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| fmt_err(ln, format!("malformed header: missing {key}=")))?;
    let val = tok
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| fmt_err(ln, format!("malformed header: expected {key}=<int>, found `{tok}`")))?;
    parse_usize(ln, val, key)
}

fn parse_header(ln: usize, line: &str) -> Result<(usize, usize, usize, usize)> {
    let mut toks = line.split_ascii_whitespace();
    if toks.next() != Some(FORMAT_MAGIC) {
        return Err(fmt_err(ln, format!("malformed header: expected `{FORMAT_MAGIC}`")));
    }
    match toks.next() {
        Some(VERSION) => {}
        other => {
            return Err(fmt_err(
                ln,
                format!("unsupported format version {:?}", other.unwrap_or("")),
            ))
        }
    }
    let p = parse_kv(ln, toks.next(), "P")?;
    let t = parse_kv(ln, toks.next(), "T")?;
    let c = parse_kv(ln, toks.next(), "C")?;
    let n = parse_kv(ln, toks.next(), "N")?;
    if toks.next().is_some() {
        return Err(fmt_err(ln, "malformed header: trailing tokens"));
    }
    Ok((p, t, c, n))
}

fn parse_sample_header(ln: usize, line: &str) -> Result<(usize, usize, usize)> {
    let toks: Vec<&str> = line.split_ascii_whitespace().collect();
    match toks.as_slice() {
        ["SAMPLE", i, "LABEL", l, "EVENTS", n] => Ok((
            parse_usize(ln, i, "sample index")?,
            parse_usize(ln, l, "label")?,
            parse_usize(ln, n, "event count")?,
        )),
        _ => Err(fmt_err(ln, format!("malformed sample header: `{line}`"))),
    }
}

fn parse_event(ln: usize, line: &str) -> Result<(usize, usize)> {
    let toks: Vec<&str> = line.split_ascii_whitespace().collect();
    match toks.as_slice() {
        [t, c] => Ok((parse_usize(ln, t, "event time")?, parse_usize(ln, c, "event channel")?)),
        _ => Err(fmt_err(ln, format!("malformed event line: `{line}`"))),
    }
}
