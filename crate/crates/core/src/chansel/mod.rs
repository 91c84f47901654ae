//! Channel ranking by repeated single-channel classification.
//!
//! Each iteration splits the 5 s windows of a recording into train and test,
//! fits PCA + SMOTE + a decision tree on every channel alone, and ranks the
//! channels by test accuracy. The channels that most often land in an
//! iteration's top `k` are selected.

mod report;

pub use report::{parse_report, write_report, ReportError};

use rayon::prelude::*;
use thiserror::Error;

use crate::eeg_io::EegRecording;
use crate::mlcore::{pca_fit, pca_transform, smote, tree_fit, tree_predict, Components, Matrix, MlError};
use crate::pipeline::{label_windows, make_split, merge_seizures, Dataset, PipelineError, PlanKind, WindowingConfig};
use crate::rng::SeedStream;

#[derive(Debug, Error, PartialEq)]
pub enum ChanselError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error("invalid selection config: {0}")]
    InvalidConfig(String),
    #[error("channel index {index} out of range for {channels} channels")]
    Index { index: usize, channels: usize },
    #[error("channel index {0} listed twice")]
    Duplicate(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub k: usize,
    pub m: usize,
    pub windowing: WindowingConfig,
    pub test_fraction: f64,
    pub components: Components,
    pub smote_k: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            k: 8,
            m: 30,
            windowing: WindowingConfig::selection(),
            test_fraction: 0.2,
            components: Components::default(),
            smote_k: 5,
            max_depth: 10,
            min_leaf: 5,
            seed: 0,
        }
    }
}

impl SelectionConfig {
    fn validate(&self, channels: usize) -> Result<(), ChanselError> {
        if self.k == 0 || self.k > channels {
            return Err(ChanselError::InvalidConfig(format!("k = {} must lie in 1..={channels}", self.k)));
        }
        if self.m == 0 {
            return Err(ChanselError::InvalidConfig("m must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTally {
    /// `[m][C]` test accuracy per iteration and channel.
    pub per_channel_accuracy: Vec<Vec<f64>>,
    /// How often each channel was in an iteration's top k.
    pub appearance_counts: Vec<usize>,
    /// Channels ordered by (appearances desc, mean accuracy desc, index asc).
    pub ranking: Vec<usize>,
    /// First `k` entries of `ranking`.
    pub selected: Vec<usize>,
}

impl ChannelTally {
    pub fn num_channels(&self) -> usize {
        self.appearance_counts.len()
    }

    pub fn mean_accuracy(&self) -> Vec<f64> {
        let m = self.per_channel_accuracy.len() as f64;
        (0..self.num_channels())
            .map(|c| self.per_channel_accuracy.iter().map(|row| row[c]).sum::<f64>() / m)
            .collect()
    }

    /// Top `k` of the overall ranking. Nested in `k` by construction.
    pub fn top(&self, k: usize) -> &[usize] {
        &self.ranking[..k.min(self.ranking.len())]
    }
}

/// Windows a recording for selection.
pub fn selection_windows(rec: &EegRecording, cfg: &SelectionConfig) -> Result<Dataset, ChanselError> {
    let merged = merge_seizures(rec.annotations(), cfg.windowing.merge_gap_s);
    let segs = label_windows(rec, &merged, &cfg.windowing)?;
    Ok(Dataset::from_segments(rec, &segs, cfg.windowing.window_samples(rec.sample_rate_hz())?))
}

fn channel_matrix(ds: &Dataset, rows: &[usize], channel: usize) -> Matrix<f64> {
    let w = ds.window_samples;
    let mut data = Vec::with_capacity(rows.len() * w);
    for &i in rows {
        data.extend(ds.channel_window(i, channel).iter().map(|&v| v as f64));
    }
    Matrix::from_vec(rows.len(), w, data)
}

fn tree_labels(ds: &Dataset, rows: &[usize]) -> Vec<u8> {
    rows.iter().map(|&i| ds.labels[i].index() as u8).collect()
}

/// Test accuracy of one channel under a given train/test partition.
fn accuracy_on_split(
    ds: &Dataset,
    channel: usize,
    train: &[usize],
    test: &[usize],
    cfg: &SelectionConfig,
    smote_seed: u64,
) -> Result<f64, ChanselError> {
    let xtr = channel_matrix(ds, train, channel);
    let ytr = tree_labels(ds, train);
    let pca = pca_fit(&xtr, cfg.components)?;
    let ztr = pca_transform(&pca, &xtr)?;
    let zte = pca_transform(&pca, &channel_matrix(ds, test, channel))?;

    // oversample the minority class up to parity
    let pre = ytr.iter().filter(|&&y| y == 1).count();
    let other = ytr.len() - pre;
    let minority = u8::from(pre < other);
    let gap = pre.abs_diff(other);
    let (zbal, ybal) = if gap > 0 {
        let rows: Vec<usize> = (0..ytr.len()).filter(|&i| ytr[i] == minority).collect();
        let synth = smote(&ztr.select_rows(&rows), gap, cfg.smote_k, smote_seed)?;
        let mut y = ytr.clone();
        y.extend(std::iter::repeat_n(minority, gap));
        (ztr.vstack(&synth), y)
    } else {
        (ztr, ytr)
    };

    let tree = tree_fit(&zbal, &ybal, cfg.max_depth, cfg.min_leaf)?;
    let pred = tree_predict(&tree, &zte)?;
    let yte = tree_labels(ds, test);
    let hits = pred.iter().zip(&yte).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / yte.len() as f64)
}

fn iteration_split(ds: &Dataset, cfg: &SelectionConfig, iteration_seed: u64) -> Result<(Vec<usize>, Vec<usize>), ChanselError> {
    let plan = make_split(&ds.labels, PlanKind::Holdout(cfg.test_fraction), iteration_seed)?;
    Ok(plan.folds().remove(0))
}

fn smote_seed(iteration_seed: u64, channel: usize) -> u64 {
    SeedStream::new(iteration_seed).named("smote").split(channel as u64).seed()
}

/// Accuracy of a single channel under one iteration seed.
pub fn channel_accuracy(
    rec: &EegRecording,
    channel: usize,
    cfg: &SelectionConfig,
    iteration_seed: u64,
) -> Result<f64, ChanselError> {
    if channel >= rec.num_channels() {
        return Err(ChanselError::Index { index: channel, channels: rec.num_channels() });
    }
    let ds = selection_windows(rec, cfg)?;
    channel_accuracy_on(&ds, channel, cfg, iteration_seed)
}

/// As [`channel_accuracy`], on windows prepared once by [`selection_windows`].
pub fn channel_accuracy_on(
    ds: &Dataset,
    channel: usize,
    cfg: &SelectionConfig,
    iteration_seed: u64,
) -> Result<f64, ChanselError> {
    let (train, test) = iteration_split(ds, cfg, iteration_seed)?;
    accuracy_on_split(ds, channel, &train, &test, cfg, smote_seed(iteration_seed, channel))
}

/// Seed of iteration `i` derived from the master seed.
pub fn iteration_seed(master: u64, i: usize) -> u64 {
    SeedStream::new(master).named("iteration").split(i as u64).seed()
}

pub fn select_channels(rec: &EegRecording, cfg: &SelectionConfig) -> Result<ChannelTally, ChanselError> {
    cfg.validate(rec.num_channels())?;
    let ds = selection_windows(rec, cfg)?;
    select_channels_on(&ds, cfg)
}

/// Channel selection over prepared windows. Jobs run on the current rayon
/// pool; results are reduced in (iteration, channel) order.
pub fn select_channels_on(ds: &Dataset, cfg: &SelectionConfig) -> Result<ChannelTally, ChanselError> {
    let c = ds.num_channels();
    cfg.validate(c)?;
    let splits: Vec<(u64, (Vec<usize>, Vec<usize>))> = (0..cfg.m)
        .map(|i| {
            let s = iteration_seed(cfg.seed, i);
            iteration_split(ds, cfg, s).map(|tt| (s, tt))
        })
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.m).flat_map(|i| (0..c).map(move |ch| (i, ch))).collect();
    let acc: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, ch)| {
            let (seed, (train, test)) = &splits[i];
            accuracy_on_split(ds, ch, train, test, cfg, smote_seed(*seed, ch))
        })
        .collect::<Result<_, _>>()?;
    let per_channel_accuracy: Vec<Vec<f64>> = acc.chunks(c).map(<[f64]>::to_vec).collect();
    Ok(tally(per_channel_accuracy, cfg.k))
}

/// Voting over a precomputed accuracy table.
pub fn tally(per_channel_accuracy: Vec<Vec<f64>>, k: usize) -> ChannelTally {
    let c = per_channel_accuracy.first().map_or(0, Vec::len);
    let m = per_channel_accuracy.len().max(1) as f64;
    let mean: Vec<f64> =
        (0..c).map(|ch| per_channel_accuracy.iter().map(|row| row[ch]).sum::<f64>() / m).collect();
    let by_mean_then_index = |a: &usize, b: &usize| mean[*b].total_cmp(&mean[*a]).then(a.cmp(b));

    let mut counts = vec![0usize; c];
    for row in &per_channel_accuracy {
        let mut order: Vec<usize> = (0..c).collect();
        order.sort_by(|a, b| row[*b].total_cmp(&row[*a]).then_with(|| by_mean_then_index(a, b)));
        for &ch in &order[..k] {
            counts[ch] += 1;
        }
    }
    let mut ranking: Vec<usize> = (0..c).collect();
    ranking.sort_by(|a, b| counts[*b].cmp(&counts[*a]).then_with(|| by_mean_then_index(a, b)));
    let selected = ranking[..k].to_vec();
    ChannelTally { per_channel_accuracy, appearance_counts: counts, ranking, selected }
}

/// Restricts a recording to `selected`, in that order.
pub fn apply_channel_mask(rec: &EegRecording, selected: &[usize]) -> Result<EegRecording, ChanselError> {
    let mut seen = vec![false; rec.num_channels()];
    for &c in selected {
        if c >= rec.num_channels() {
            return Err(ChanselError::Index { index: c, channels: rec.num_channels() });
        }
        if std::mem::replace(&mut seen[c], true) {
            return Err(ChanselError::Duplicate(c));
        }
    }
    if selected.is_empty() {
        return Err(ChanselError::InvalidConfig("no channels selected".into()));
    }
    Ok(rec.select_channels(selected).expect("indices validated"))
}
