//! Deterministic synthetic EEG.
//!
//! Background activity on every channel is AR(1) noise with a 2 Hz corner.
//! Informative channels additionally carry a 4-8 Hz sinusoid during the
//! pre-ictal horizon before each seizure, with amplitude ramping from half to
//! full strength as onset approaches. Seizures themselves are a 3 Hz
//! high-amplitude rhythm on all channels.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use super::{EegRecording, SeizureAnnotation};
use crate::rng::SeedStream;

/// Bipolar montage labels in CHB-MIT file order.
pub const CHB_MIT_MONTAGE: [&str; 23] = [
    "FP1-F7", "F7-T7", "T7-P7", "P7-O1", "FP1-F3", "F3-C3", "C3-P3", "P3-O1", "FP2-F4", "F4-C4",
    "C4-P4", "P4-O2", "FP2-F8", "F8-T8", "T8-P8", "P8-O2", "FZ-CZ", "CZ-PZ", "P7-T7", "T7-FT9",
    "FT9-FT10", "FT10-T8", "T8-P8-1",
];

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_channels: usize,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub informative_channels: BTreeSet<usize>,
    /// Seizure onsets; the pre-ictal signature precedes each one.
    pub preictal_onsets_s: Vec<f64>,
    /// Stationary standard deviation of the background, in microvolts.
    pub noise_sigma: f64,
    pub seed: u64,
    pub ictal_duration_s: f64,
    /// Peak amplitude of the pre-ictal sinusoid, in microvolts.
    pub signature_amplitude: f64,
    pub preictal_horizon_s: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_channels: 8,
            duration_s: 7200.0,
            sample_rate_hz: 128.0,
            informative_channels: [1, 3].into_iter().collect(),
            preictal_onsets_s: vec![1900.0, 3800.0, 5700.0],
            noise_sigma: 20.0,
            seed: 0,
            ictal_duration_s: 60.0,
            signature_amplitude: 20.0,
            preictal_horizon_s: 1800.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.num_channels == 0 {
            return bad("num_channels must be >= 1".into());
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration_s must be positive, got {}", self.duration_s));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad(format!("sample_rate_hz must be positive, got {}", self.sample_rate_hz));
        }
        if let Some(&c) = self.informative_channels.iter().find(|&&c| c >= self.num_channels) {
            return bad(format!("informative channel {c} out of range 0..{}", self.num_channels));
        }
        if !(self.noise_sigma >= 0.0 && self.signature_amplitude >= 0.0) {
            return bad("noise_sigma and signature_amplitude must be non-negative".into());
        }
        if !(self.ictal_duration_s > 0.0 && self.preictal_horizon_s > 0.0) {
            return bad("ictal_duration_s and preictal_horizon_s must be positive".into());
        }
        for w in self.preictal_onsets_s.windows(2) {
            if w[1] <= w[0] {
                return bad("preictal_onsets_s must be strictly increasing".into());
            }
            if w[1] < w[0] + self.ictal_duration_s {
                return bad(format!("seizures at {} s and {} s overlap", w[0], w[1]));
            }
        }
        if let Some(&t) = self.preictal_onsets_s.iter().find(|&&t| !(0.0..self.duration_s).contains(&t)) {
            return bad(format!("onset {t} s outside the recording"));
        }
        Ok(())
    }

    pub fn channel_label(c: usize) -> String {
        CHB_MIT_MONTAGE
            .get(c)
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("CH{c:02}"))
    }
}

pub fn synth_eeg(cfg: &SynthConfig) -> Result<EegRecording, SynthError> {
    cfg.validate()?;
    let rate = cfg.sample_rate_hz;
    let n = (cfg.duration_s * rate).round() as usize;
    let root = SeedStream::new(cfg.seed);
    let phi = (-2.0 * PI * 2.0 / rate).exp();
    let innovation = cfg.noise_sigma * (1.0 - phi * phi).sqrt();

    let annotations: Vec<SeizureAnnotation> = cfg
        .preictal_onsets_s
        .iter()
        .map(|&on| SeizureAnnotation::new(on, (on + cfg.ictal_duration_s).min(n as f64 / rate)))
        .collect();

    let mut channels = Vec::with_capacity(cfg.num_channels);
    for c in 0..cfg.num_channels {
        let stream = root.split(c as u64);
        let mut rng = stream.named("background").rng();
        let mut row = vec![0f32; n];
        let mut x = cfg.noise_sigma * rng.sample::<f64, _>(StandardNormal);
        for v in row.iter_mut() {
            *v = x as f32;
            x = phi * x + innovation * rng.sample::<f64, _>(StandardNormal);
        }

        if cfg.informative_channels.contains(&c) {
            for (e, &onset) in cfg.preictal_onsets_s.iter().enumerate() {
                let mut erng = stream.split(e as u64).rng();
                let freq = erng.random_range(4.0..8.0);
                let phase = erng.random_range(0.0..2.0 * PI);
                let start = onset - cfg.preictal_horizon_s;
                let i0 = (start.max(0.0) * rate).ceil() as usize;
                let i1 = ((onset * rate).ceil() as usize).min(n);
                for (i, v) in row.iter_mut().enumerate().take(i1).skip(i0) {
                    let t = i as f64 / rate;
                    let ramp = 0.5 + 0.5 * (t - start) / cfg.preictal_horizon_s;
                    *v += (cfg.signature_amplitude * ramp * (2.0 * PI * freq * t + phase).sin()) as f32;
                }
            }
        }

        for a in &annotations {
            let i0 = (a.onset_s * rate).floor() as usize;
            let i1 = ((a.offset_s * rate).ceil() as usize).min(n);
            for (i, v) in row.iter_mut().enumerate().take(i1).skip(i0) {
                let t = i as f64 / rate - a.onset_s;
                *v += (4.0 * cfg.noise_sigma.max(1.0) * (2.0 * PI * 3.0 * t).sin().powi(3)) as f32;
            }
        }
        channels.push(row);
    }

    let labels = (0..cfg.num_channels).map(SynthConfig::channel_label).collect();
    let rec = EegRecording::new(labels, rate, channels)
        .and_then(|r| r.with_annotations(annotations))
        .map_err(|e| SynthError::Invalid(e.to_string()))?;
    Ok(rec)
}
