//! From annotated recordings to labelled windows, partitions and the binary
//! dataset cache.

mod cache;
mod split;
mod windows;

pub use cache::{read_cache, write_cache, CacheError, CACHE_MAGIC};
pub use split::{make_split, PlanKind, SplitPlan};
pub use windows::{
    balanced_preictal_stride, label_windows, label_windows_unchecked, merge_seizures, WindowingConfig,
};

use thiserror::Error;

use crate::eeg_io::EegRecording;

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("no {0:?} windows: the recording cannot be used for training")]
    EmptyClass(Label),
    #[error("window of {window_s} s is not a whole number of samples at {rate} Hz")]
    NonIntegralWindow { window_s: f64, rate: f64 },
    #[error("invalid windowing config: {0}")]
    InvalidConfig(String),
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("dataset mismatch: {0}")]
    Mismatch(String),
}

/// Binary target. `PreIctal` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Other = 0,
    PreIctal = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Label::Other),
            1 => Some(Label::PreIctal),
            _ => None,
        }
    }
}

/// One labelled window over all channels of a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// `[channels × window_samples]`, channel-major.
    pub data: Vec<f32>,
    pub num_channels: usize,
    pub window_samples: usize,
    pub label: Label,
    pub source_time_s: f64,
    pub source_recording: String,
}

/// Labelled windows of several recordings pooled into one dataset. With
/// `balance`, each recording's pre-ictal stride is shrunk until its
/// pre-ictal count matches (without exceeding) its Other count; recordings
/// without Other windows keep the configured stride.
pub fn build_dataset(
    recs: &[(&EegRecording, &str)],
    cfg: &WindowingConfig,
    balance: bool,
) -> Result<Dataset, PipelineError> {
    let first = recs.first().ok_or_else(|| PipelineError::TooFewSamples("no recordings".into()))?.0;
    let w = cfg.window_samples(first.sample_rate_hz())?;
    let mut ds = Dataset::empty(first.channel_labels().to_vec(), first.sample_rate_hz(), w);
    for (rec, id) in recs {
        let merged = merge_seizures(rec.annotations(), cfg.merge_gap_s);
        let mut local = cfg.clone();
        if balance {
            match balanced_preictal_stride(rec, &merged, cfg) {
                Ok(stride) => local.stride_preictal_s = stride,
                Err(PipelineError::EmptyClass(_)) => {}
                Err(e) => return Err(e),
            }
        }
        let segs = label_windows_unchecked(rec, &merged, &local, id)?;
        let mut part = Dataset::empty(rec.channel_labels().to_vec(), rec.sample_rate_hz(), w);
        part.extend(&segs);
        ds.append(&part)?;
    }
    for class in [Label::Other, Label::PreIctal] {
        if !ds.labels.contains(&class) {
            return Err(PipelineError::EmptyClass(class));
        }
    }
    Ok(ds)
}

/// A flat collection of equally shaped segments, `[n × channels × samples]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub channel_labels: Vec<String>,
    pub sample_rate_hz: f64,
    pub window_samples: usize,
    pub data: Vec<f32>,
    pub labels: Vec<Label>,
    pub source_times_s: Vec<f64>,
}

impl Dataset {
    pub fn empty(channel_labels: Vec<String>, sample_rate_hz: f64, window_samples: usize) -> Self {
        Self {
            channel_labels,
            sample_rate_hz,
            window_samples,
            data: Vec::new(),
            labels: Vec::new(),
            source_times_s: Vec::new(),
        }
    }

    pub fn from_segments(rec: &EegRecording, segments: &[Segment], window_samples: usize) -> Self {
        let mut ds = Self::empty(rec.channel_labels().to_vec(), rec.sample_rate_hz(), window_samples);
        ds.extend(segments);
        ds
    }

    pub fn extend(&mut self, segments: &[Segment]) {
        for s in segments {
            debug_assert_eq!(s.data.len(), self.segment_len());
            self.data.extend_from_slice(&s.data);
            self.labels.push(s.label);
            self.source_times_s.push(s.source_time_s);
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_channels(&self) -> usize {
        self.channel_labels.len()
    }

    pub fn segment_len(&self) -> usize {
        self.num_channels() * self.window_samples
    }

    pub fn segment(&self, i: usize) -> &[f32] {
        let l = self.segment_len();
        &self.data[i * l..(i + 1) * l]
    }

    /// Samples of one channel of segment `i`.
    pub fn channel_window(&self, i: usize, channel: usize) -> &[f32] {
        let seg = self.segment(i);
        &seg[channel * self.window_samples..(channel + 1) * self.window_samples]
    }

    /// (Other, PreIctal) counts.
    pub fn class_counts(&self) -> [usize; 2] {
        let pre = self.labels.iter().filter(|&&l| l == Label::PreIctal).count();
        [self.labels.len() - pre, pre]
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut out = Self::empty(self.channel_labels.clone(), self.sample_rate_hz, self.window_samples);
        out.data.reserve(indices.len() * self.segment_len());
        for &i in indices {
            out.data.extend_from_slice(self.segment(i));
            out.labels.push(self.labels[i]);
            out.source_times_s.push(self.source_times_s[i]);
        }
        out
    }

    /// Keeps `channels` in the given order.
    pub fn select_channels(&self, channels: &[usize]) -> Result<Self, PipelineError> {
        if let Some(&c) = channels.iter().find(|&&c| c >= self.num_channels()) {
            return Err(PipelineError::Mismatch(format!("channel {c} out of range")));
        }
        let w = self.window_samples;
        let mut out = Self::empty(
            channels.iter().map(|&c| self.channel_labels[c].clone()).collect(),
            self.sample_rate_hz,
            w,
        );
        out.data.reserve(self.len() * channels.len() * w);
        for i in 0..self.len() {
            for &c in channels {
                out.data.extend_from_slice(self.channel_window(i, c));
            }
        }
        out.labels = self.labels.clone();
        out.source_times_s = self.source_times_s.clone();
        Ok(out)
    }

    /// Concatenates datasets with identical channel layout.
    pub fn append(&mut self, other: &Dataset) -> Result<(), PipelineError> {
        if other.channel_labels != self.channel_labels
            || other.window_samples != self.window_samples
            || other.sample_rate_hz != self.sample_rate_hz
        {
            return Err(PipelineError::Mismatch(
                "recordings differ in channels, window length or sample rate".into(),
            ));
        }
        self.data.extend_from_slice(&other.data);
        self.labels.extend_from_slice(&other.labels);
        self.source_times_s.extend_from_slice(&other.source_times_s);
        Ok(())
    }
}
