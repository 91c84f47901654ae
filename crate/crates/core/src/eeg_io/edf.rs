// EDF (European Data Format) reader/writer.
// Layout: https://www.edfplus.info/specs/edf.html

use thiserror::Error;

use super::{EegRecording, RecordingError};

const FIXED_HEADER: usize = 256;
const SIGNAL_HEADER: usize = 256;
const DIGITAL_MIN: i32 = -32768;
const DIGITAL_MAX: i32 = 32767;

#[derive(Debug, Error, PartialEq)]
pub enum EdfError {
    #[error("invalid EDF header at byte {offset}: {reason}")]
    InvalidHeader { offset: usize, reason: String },
    #[error("truncated EDF data: header declares {expected} data bytes, file holds {actual}")]
    TruncatedData { expected: usize, actual: usize },
    #[error("unsupported EDF layout: {0}")]
    UnsupportedLayout(String),
    #[error(transparent)]
    Recording(#[from] RecordingError),
}

fn invalid(offset: usize, reason: impl Into<String>) -> EdfError {
    EdfError::InvalidHeader { offset, reason: reason.into() }
}

/// Per-signal calibration pulled from the signal header block.
#[derive(Debug, Clone)]
struct SignalHeader {
    label: String,
    physical_min: f64,
    physical_max: f64,
    digital_min: i32,
    digital_max: i32,
    samples_per_record: usize,
}

impl SignalHeader {
    fn gain(&self) -> f64 {
        (self.physical_max - self.physical_min) / (self.digital_max - self.digital_min) as f64
    }
}

struct Fields<'a> {
    bytes: &'a [u8],
}

impl Fields<'_> {
    fn text(&self, offset: usize, len: usize) -> Result<&str, EdfError> {
        let raw = &self.bytes[offset..offset + len];
        if !raw.iter().all(|b| (0x20..0x7f).contains(b)) {
            return Err(invalid(offset, "non-printable ASCII in header field"));
        }
        // printable ASCII is valid UTF-8
        Ok(std::str::from_utf8(raw).unwrap_or_default().trim())
    }

    fn number<N: std::str::FromStr>(&self, offset: usize, len: usize, what: &str) -> Result<N, EdfError> {
        let text = self.text(offset, len)?;
        text.parse::<N>()
            .map_err(|_| invalid(offset, format!("{what}: cannot parse {text:?}")))
    }
}

/// Parses a complete EDF byte stream. Channels keep file order; annotations
/// are left empty (seizure times come from the CSV sidecar).
pub fn parse_edf(bytes: &[u8]) -> Result<EegRecording, EdfError> {
    if bytes.len() < FIXED_HEADER {
        return Err(invalid(bytes.len(), "file shorter than the 256-byte fixed header"));
    }
    if &bytes[0..8] != b"0       " {
        return Err(invalid(0, "version field must be \"0\" padded to 8 bytes"));
    }
    let f = Fields { bytes };
    let header_bytes: usize = f.number(184, 8, "header byte count")?;
    let num_records: i64 = f.number(236, 8, "number of data records")?;
    let record_duration: f64 = f.number(244, 8, "data record duration")?;
    let ns: usize = f.number(252, 4, "number of signals")?;

    if ns == 0 {
        return Err(invalid(252, "no signals declared"));
    }
    if header_bytes != FIXED_HEADER + ns * SIGNAL_HEADER {
        return Err(invalid(
            184,
            format!("header byte count {header_bytes} inconsistent with {ns} signals"),
        ));
    }
    if bytes.len() < header_bytes {
        return Err(invalid(bytes.len(), format!("file shorter than declared header ({header_bytes} bytes)")));
    }
    if num_records < -1 {
        return Err(invalid(236, format!("negative record count {num_records}")));
    }
    if !(record_duration.is_finite() && record_duration > 0.0) {
        return Err(invalid(244, format!("record duration must be positive, got {record_duration}")));
    }

    // Signal header fields are stored field-major: all labels, then all
    // transducers, and so on.
    let field_offset = |widths_before: usize, width: usize, i: usize| {
        FIXED_HEADER + widths_before * ns + i * width
    };
    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        let label = f.text(field_offset(0, 16, i), 16)?.to_string();
        let physical_min: f64 = f.number(field_offset(104, 8, i), 8, "physical minimum")?;
        let physical_max: f64 = f.number(field_offset(112, 8, i), 8, "physical maximum")?;
        let digital_min: i32 = f.number(field_offset(120, 8, i), 8, "digital minimum")?;
        let digital_max: i32 = f.number(field_offset(128, 8, i), 8, "digital maximum")?;
        let samples_per_record: usize = f.number(field_offset(216, 8, i), 8, "samples per record")?;
        if !(physical_min.is_finite() && physical_max.is_finite()) || physical_min == physical_max {
            return Err(invalid(field_offset(104, 8, i), format!("signal {i}: degenerate physical range")));
        }
        if digital_max <= digital_min || digital_min < DIGITAL_MIN || digital_max > DIGITAL_MAX {
            return Err(invalid(field_offset(120, 8, i), format!("signal {i}: invalid digital range")));
        }
        if samples_per_record == 0 {
            return Err(invalid(field_offset(216, 8, i), format!("signal {i}: zero samples per record")));
        }
        signals.push(SignalHeader {
            label,
            physical_min,
            physical_max,
            digital_min,
            digital_max,
            samples_per_record,
        });
    }

    let spr = signals[0].samples_per_record;
    if let Some(bad) = signals.iter().find(|s| s.samples_per_record != spr) {
        return Err(EdfError::UnsupportedLayout(format!(
            "signal {:?} has {} samples per record, expected {spr} (non-uniform sample rates)",
            bad.label, bad.samples_per_record
        )));
    }

    let record_bytes = ns * spr * 2;
    let data = &bytes[header_bytes..];
    let records = if num_records == -1 {
        if data.len() % record_bytes != 0 {
            return Err(EdfError::TruncatedData {
                expected: (data.len() / record_bytes + 1) * record_bytes,
                actual: data.len(),
            });
        }
        data.len() / record_bytes
    } else {
        num_records as usize
    };
    let expected = records * record_bytes;
    if data.len() < expected {
        return Err(EdfError::TruncatedData { expected, actual: data.len() });
    }

    let num_samples = records * spr;
    let mut samples = vec![0f32; ns * num_samples];
    for r in 0..records {
        let record = &data[r * record_bytes..(r + 1) * record_bytes];
        for (s, sig) in signals.iter().enumerate() {
            let gain = sig.gain();
            let block = &record[s * spr * 2..(s + 1) * spr * 2];
            let out = &mut samples[s * num_samples + r * spr..s * num_samples + (r + 1) * spr];
            for (dst, pair) in out.iter_mut().zip(block.chunks_exact(2)) {
                let digital = i16::from_le_bytes([pair[0], pair[1]]) as i32;
                *dst = (sig.physical_min + (digital - sig.digital_min) as f64 * gain) as f32;
            }
        }
    }

    let labels = signals.into_iter().map(|s| s.label).collect();
    Ok(EegRecording::from_flat(labels, spr as f64 / record_duration, num_samples, samples)?)
}

/// Formats `x` into at most 8 ASCII characters, rounding away from the
/// interior of the range (`up` for maxima) so the written range still covers
/// the data.
fn format_bound(x: f64, up: bool) -> String {
    for decimals in (0..=7).rev() {
        let scale = 10f64.powi(decimals);
        let v = if up { (x * scale).ceil() / scale } else { (x * scale).floor() / scale };
        let mut s = format!("{v:.prec$}", prec = decimals as usize);
        if s.contains('.') {
            s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        }
        if s == "-0" {
            s = "0".into();
        }
        if s.len() <= 8 {
            return s;
        }
    }
    // out of EDF range; clamp to the widest representable value
    if up { "99999999".into() } else { "-9999999".into() }
}

fn put(buf: &mut Vec<u8>, text: &str, width: usize) {
    let mut field: Vec<u8> = text.bytes().filter(|b| (0x20..0x7f).contains(b)).take(width).collect();
    field.resize(width, b' ');
    buf.extend_from_slice(&field);
}

/// Serialises a recording as EDF with one data record per second and a
/// per-channel calibration spanning the channel's sample range.
pub fn write_edf(rec: &EegRecording) -> Result<Vec<u8>, EdfError> {
    let rate = rec.sample_rate_hz();
    let spr = rate.round() as usize;
    if (rate - spr as f64).abs() > 1e-9 || spr == 0 {
        return Err(EdfError::UnsupportedLayout(format!(
            "one-second records need an integral sample rate, got {rate}"
        )));
    }
    if rec.num_samples() % spr != 0 {
        return Err(EdfError::UnsupportedLayout(format!(
            "{} samples is not a whole number of one-second records",
            rec.num_samples()
        )));
    }
    let ns = rec.num_channels();
    let records = rec.num_samples() / spr;
    let header_bytes = FIXED_HEADER + ns * SIGNAL_HEADER;

    let ranges: Vec<(String, String, f64, f64)> = (0..ns)
        .map(|c| {
            let (lo, hi) = rec
                .channel(c)
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                    (lo.min(x as f64), hi.max(x as f64))
                });
            let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
            let hi = if hi <= lo { lo + 1.0 } else { hi };
            let (smin, smax) = (format_bound(lo, false), format_bound(hi, true));
            // calibrate from the text actually written
            let pmin: f64 = smin.parse().unwrap_or(lo);
            let pmax: f64 = smax.parse().unwrap_or(hi);
            (smin, smax, pmin, pmax)
        })
        .collect();

    let mut out = Vec::with_capacity(header_bytes + records * ns * spr * 2);
    put(&mut out, "0", 8);
    put(&mut out, "X X X X", 80);
    put(&mut out, "Startdate X X X X", 80);
    put(&mut out, "01.01.00", 8);
    put(&mut out, "00.00.00", 8);
    put(&mut out, &header_bytes.to_string(), 8);
    put(&mut out, "", 44);
    put(&mut out, &records.to_string(), 8);
    put(&mut out, "1", 8);
    put(&mut out, &ns.to_string(), 4);

    for label in rec.channel_labels() {
        put(&mut out, label, 16);
    }
    for _ in 0..ns {
        put(&mut out, "", 80);
    }
    for _ in 0..ns {
        put(&mut out, "uV", 8);
    }
    for (smin, _, _, _) in &ranges {
        put(&mut out, smin, 8);
    }
    for (_, smax, _, _) in &ranges {
        put(&mut out, smax, 8);
    }
    for _ in 0..ns {
        put(&mut out, &DIGITAL_MIN.to_string(), 8);
    }
    for _ in 0..ns {
        put(&mut out, &DIGITAL_MAX.to_string(), 8);
    }
    for _ in 0..ns {
        put(&mut out, "", 80);
    }
    for _ in 0..ns {
        put(&mut out, &spr.to_string(), 8);
    }
    for _ in 0..ns {
        put(&mut out, "", 32);
    }
    debug_assert_eq!(out.len(), header_bytes);

    let span = (DIGITAL_MAX - DIGITAL_MIN) as f64;
    for r in 0..records {
        for (c, &(_, _, pmin, pmax)) in ranges.iter().enumerate() {
            for &x in &rec.channel(c)[r * spr..(r + 1) * spr] {
                let d = ((x as f64 - pmin) / (pmax - pmin) * span + DIGITAL_MIN as f64).round();
                let d = d.clamp(DIGITAL_MIN as f64, DIGITAL_MAX as f64) as i16;
                out.extend_from_slice(&d.to_le_bytes());
            }
        }
    }
    Ok(out)
}
