//! EEG ingestion: EDF files, seizure annotation sidecars and a synthetic
//! recording generator.

mod annotations;
mod edf;
mod synth;

pub use annotations::{format_annotations, load_annotations, AnnotationError};
pub use edf::{parse_edf, write_edf, EdfError};
pub use synth::{synth_eeg, SynthConfig, SynthError, CHB_MIT_MONTAGE};

use thiserror::Error;

/// One seizure (ictal interval), seconds from recording start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeizureAnnotation {
    pub onset_s: f64,
    pub offset_s: f64,
}

impl SeizureAnnotation {
    pub fn new(onset_s: f64, offset_s: f64) -> Self {
        Self { onset_s, offset_s }
    }

    pub fn duration_s(&self) -> f64 {
        self.offset_s - self.onset_s
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RecordingError {
    #[error("recording needs at least one channel")]
    NoChannels,
    #[error("sample rate must be positive and finite, got {0}")]
    BadSampleRate(f64),
    #[error("channel {channel} has {got} samples, expected {expected}")]
    RaggedChannels { channel: usize, expected: usize, got: usize },
    #[error("{labels} channel labels for {channels} channels")]
    LabelCount { labels: usize, channels: usize },
    #[error("annotation {index} ({onset_s}..{offset_s} s) is invalid: {reason}")]
    BadAnnotation { index: usize, onset_s: f64, offset_s: f64, reason: &'static str },
}

/// Multichannel recording with its seizure annotations.
///
/// Samples are stored channel-major: channel `c` occupies
/// `samples[c * num_samples..(c + 1) * num_samples]`, in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct EegRecording {
    channel_labels: Vec<String>,
    sample_rate_hz: f64,
    num_samples: usize,
    samples: Vec<f32>,
    annotations: Vec<SeizureAnnotation>,
}

impl EegRecording {
    pub fn new(
        channel_labels: Vec<String>,
        sample_rate_hz: f64,
        channels: Vec<Vec<f32>>,
    ) -> Result<Self, RecordingError> {
        if channels.is_empty() {
            return Err(RecordingError::NoChannels);
        }
        if channel_labels.len() != channels.len() {
            return Err(RecordingError::LabelCount {
                labels: channel_labels.len(),
                channels: channels.len(),
            });
        }
        let num_samples = channels[0].len();
        for (channel, row) in channels.iter().enumerate() {
            if row.len() != num_samples {
                return Err(RecordingError::RaggedChannels {
                    channel,
                    expected: num_samples,
                    got: row.len(),
                });
            }
        }
        let samples = channels.concat();
        Self::from_flat(channel_labels, sample_rate_hz, num_samples, samples)
    }

    pub fn from_flat(
        channel_labels: Vec<String>,
        sample_rate_hz: f64,
        num_samples: usize,
        samples: Vec<f32>,
    ) -> Result<Self, RecordingError> {
        if channel_labels.is_empty() {
            return Err(RecordingError::NoChannels);
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(RecordingError::BadSampleRate(sample_rate_hz));
        }
        if samples.len() != channel_labels.len() * num_samples {
            return Err(RecordingError::RaggedChannels {
                channel: 0,
                expected: channel_labels.len() * num_samples,
                got: samples.len(),
            });
        }
        Ok(Self {
            channel_labels,
            sample_rate_hz,
            num_samples,
            samples,
            annotations: Vec::new(),
        })
    }

    /// Attaches annotations after checking they are sorted, disjoint and
    /// inside the recording.
    pub fn with_annotations(
        mut self,
        annotations: Vec<SeizureAnnotation>,
    ) -> Result<Self, RecordingError> {
        let duration = self.duration_s();
        let mut prev_offset = f64::NEG_INFINITY;
        for (index, a) in annotations.iter().enumerate() {
            let bad = |reason| RecordingError::BadAnnotation {
                index,
                onset_s: a.onset_s,
                offset_s: a.offset_s,
                reason,
            };
            if !(a.onset_s >= 0.0 && a.offset_s > a.onset_s) {
                return Err(bad("need 0 <= onset < offset"));
            }
            if a.offset_s > duration {
                return Err(bad("offset past end of recording"));
            }
            if a.onset_s < prev_offset {
                return Err(bad("overlaps or precedes the previous annotation"));
            }
            prev_offset = a.offset_s;
        }
        self.annotations = annotations;
        Ok(self)
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.channel_labels
    }

    pub fn num_channels(&self) -> usize {
        self.channel_labels.len()
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.num_samples as f64 / self.sample_rate_hz
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        &self.samples[c * self.num_samples..(c + 1) * self.num_samples]
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn annotations(&self) -> &[SeizureAnnotation] {
        &self.annotations
    }

    /// Index of the channel whose label matches `label` (trimmed,
    /// case-insensitive).
    pub fn channel_index(&self, label: &str) -> Option<usize> {
        let want = label.trim();
        self.channel_labels
            .iter()
            .position(|l| l.trim().eq_ignore_ascii_case(want))
    }

    /// Restricts to `channels`, in the given order. Annotations are kept.
    pub fn select_channels(&self, channels: &[usize]) -> Option<Self> {
        let mut labels = Vec::with_capacity(channels.len());
        let mut samples = Vec::with_capacity(channels.len() * self.num_samples);
        for &c in channels {
            if c >= self.num_channels() {
                return None;
            }
            labels.push(self.channel_labels[c].clone());
            samples.extend_from_slice(self.channel(c));
        }
        Some(Self {
            channel_labels: labels,
            sample_rate_hz: self.sample_rate_hz,
            num_samples: self.num_samples,
            samples,
            annotations: self.annotations.clone(),
        })
    }
}
