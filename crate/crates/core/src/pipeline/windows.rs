use super::{Label, PipelineError, Segment};
use crate::eeg_io::{EegRecording, SeizureAnnotation};

#[derive(Debug, Clone, PartialEq)]
pub struct WindowingConfig {
    pub window_s: f64,
    pub preictal_horizon_s: f64,
    pub merge_gap_s: f64,
    pub stride_preictal_s: f64,
    pub stride_other_s: f64,
}

impl WindowingConfig {
    /// 4 s non-overlapping windows, the network input.
    pub fn network() -> Self {
        Self::with_window(4.0)
    }

    /// 5 s non-overlapping windows, used for channel selection.
    pub fn selection() -> Self {
        Self::with_window(5.0)
    }

    pub fn with_window(window_s: f64) -> Self {
        Self {
            window_s,
            preictal_horizon_s: 1800.0,
            merge_gap_s: 1800.0,
            stride_preictal_s: window_s,
            stride_other_s: window_s,
        }
    }

    fn validate(&self) -> Result<(), PipelineError> {
        let fields = [
            ("window_s", self.window_s),
            ("preictal_horizon_s", self.preictal_horizon_s),
            ("merge_gap_s", self.merge_gap_s),
            ("stride_preictal_s", self.stride_preictal_s),
            ("stride_other_s", self.stride_other_s),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(PipelineError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn window_samples(&self, rate: f64) -> Result<usize, PipelineError> {
        let w = self.window_s * rate;
        if (w - w.round()).abs() > 1e-6 || w.round() < 1.0 {
            return Err(PipelineError::NonIntegralWindow { window_s: self.window_s, rate });
        }
        Ok(w.round() as usize)
    }
}

/// Fuses consecutive seizures separated by less than `merge_gap_s`.
pub fn merge_seizures(annotations: &[SeizureAnnotation], merge_gap_s: f64) -> Vec<SeizureAnnotation> {
    let mut out: Vec<SeizureAnnotation> = Vec::with_capacity(annotations.len());
    for a in annotations {
        match out.last_mut() {
            Some(prev) if a.onset_s - prev.offset_s < merge_gap_s => {
                prev.offset_s = prev.offset_s.max(a.offset_s);
            }
            _ => out.push(*a),
        }
    }
    out
}

/// Sample-index intervals `[start, end)` for each class.
struct Zones {
    preictal: Vec<(usize, usize)>,
    other: Vec<(usize, usize)>,
}

fn zones(n: usize, rate: f64, merged: &[SeizureAnnotation], horizon: f64) -> Zones {
    let to_floor = |t: f64| ((t * rate).floor().max(0.0) as usize).min(n);
    let to_ceil = |t: f64| ((t * rate).ceil().max(0.0) as usize).min(n);

    let mut preictal = Vec::new();
    let mut prev_offset = 0.0f64;
    for e in merged {
        let start = (e.onset_s - horizon).max(0.0).max(prev_offset);
        let (a, b) = (to_ceil(start), to_floor(e.onset_s));
        if b > a {
            preictal.push((a, b));
        }
        prev_offset = e.offset_s;
    }

    // Other: everything outside every [onset - horizon, offset] band.
    let mut other = Vec::new();
    let mut cursor = 0usize;
    for e in merged {
        let band_start = to_floor((e.onset_s - horizon).max(0.0));
        let band_end = to_ceil(e.offset_s);
        if band_start > cursor {
            other.push((cursor, band_start));
        }
        cursor = cursor.max(band_end);
    }
    if n > cursor {
        other.push((cursor, n));
    }
    Zones { preictal, other }
}

fn window_starts(zones: &[(usize, usize)], window: usize, stride: usize) -> Vec<usize> {
    let mut starts = Vec::new();
    for &(a, b) in zones {
        let mut s = a;
        while s + window <= b {
            starts.push(s);
            s += stride;
        }
    }
    starts
}

fn stride_samples(stride_s: f64, rate: f64) -> usize {
    ((stride_s * rate).round() as usize).max(1)
}

/// Labels windows without requiring both classes. Used when several
/// recordings are pooled and only the combined set must be usable.
pub fn label_windows_unchecked(
    rec: &EegRecording,
    merged: &[SeizureAnnotation],
    cfg: &WindowingConfig,
    recording_id: &str,
) -> Result<Vec<Segment>, PipelineError> {
    cfg.validate()?;
    let rate = rec.sample_rate_hz();
    let w = cfg.window_samples(rate)?;
    let z = zones(rec.num_samples(), rate, merged, cfg.preictal_horizon_s);
    let mut starts: Vec<(usize, Label)> = window_starts(&z.preictal, w, stride_samples(cfg.stride_preictal_s, rate))
        .into_iter()
        .map(|s| (s, Label::PreIctal))
        .chain(
            window_starts(&z.other, w, stride_samples(cfg.stride_other_s, rate))
                .into_iter()
                .map(|s| (s, Label::Other)),
        )
        .collect();
    starts.sort_by_key(|&(s, _)| s);

    let c = rec.num_channels();
    Ok(starts
        .into_iter()
        .map(|(s, label)| {
            let mut data = Vec::with_capacity(c * w);
            for ch in 0..c {
                data.extend_from_slice(&rec.channel(ch)[s..s + w]);
            }
            Segment {
                data,
                num_channels: c,
                window_samples: w,
                label,
                source_time_s: s as f64 / rate,
                source_recording: recording_id.to_string(),
            }
        })
        .collect())
}

/// Pre-ictal windows inside `[onset - horizon, onset)` of each merged event,
/// Other windows clear of every `[onset - horizon, offset]` band. Ictal
/// windows are dropped, and windows never straddle a class boundary.
pub fn label_windows(
    rec: &EegRecording,
    merged: &[SeizureAnnotation],
    cfg: &WindowingConfig,
) -> Result<Vec<Segment>, PipelineError> {
    let segs = label_windows_unchecked(rec, merged, cfg, "recording")?;
    for class in [Label::PreIctal, Label::Other] {
        if !segs.iter().any(|s| s.label == class) {
            return Err(PipelineError::EmptyClass(class));
        }
    }
    Ok(segs)
}

/// Smallest pre-ictal stride (whole samples) whose window count does not
/// exceed the Other count at `cfg.stride_other_s`.
pub fn balanced_preictal_stride(
    rec: &EegRecording,
    merged: &[SeizureAnnotation],
    cfg: &WindowingConfig,
) -> Result<f64, PipelineError> {
    cfg.validate()?;
    let rate = rec.sample_rate_hz();
    let w = cfg.window_samples(rate)?;
    let z = zones(rec.num_samples(), rate, merged, cfg.preictal_horizon_s);
    let other = window_starts(&z.other, w, stride_samples(cfg.stride_other_s, rate)).len();
    let count = |stride: usize| -> usize {
        z.preictal
            .iter()
            .map(|&(a, b)| if b - a >= w { (b - a - w) / stride + 1 } else { 0 })
            .sum()
    };
    if other == 0 {
        return Err(PipelineError::EmptyClass(Label::Other));
    }
    if count(1) == 0 {
        return Err(PipelineError::EmptyClass(Label::PreIctal));
    }
    let (mut lo, mut hi) = (1usize, rec.num_samples().max(1));
    while lo < hi {
        let mid = (lo + hi) / 2;
        if count(mid) <= other {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo as f64 / rate)
}
