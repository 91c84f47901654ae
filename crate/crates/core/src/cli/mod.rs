//! Command-line front end.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage error (bad flags,
//! missing input files), 3 data error (unreadable or unusable recordings).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::chansel::{parse_report, select_channels_on, write_report, ChanselError, SelectionConfig};
use crate::eeg_io::{format_annotations, load_annotations, parse_edf, synth_eeg, write_edf, EegRecording, SynthConfig};
use crate::mlcore::{compute_metrics, Components};
use crate::model::{
    channel_sweep, dataset_hash, evaluate, gather, metrics_csv, run_manifest, sweep_csv, EvalResult, ModelConfig,
    ModelError, NetTrainer, TrainData, TrainState,
};
use crate::nn::{read_checkpoint, write_checkpoint, MambaConfig, NnError};
use crate::pipeline::{build_dataset, make_split, read_cache, write_cache, Dataset, Label, PipelineError, PlanKind, WindowingConfig};

#[derive(Debug, Parser)]
#[command(name = "slimseiz", version, about = "EEG seizure prediction: channel selection and a compact CNN-Mamba classifier")]
pub struct Cli {
    /// Worker threads for channel selection and cross-validation folds.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic recording as an EDF file plus a CSV annotation file.
    Synth(SynthArgs),
    /// Window annotated recordings into a dataset cache.
    Ingest(IngestArgs),
    /// Rank channels and write a selection report.
    Select(SelectArgs),
    /// Train the network on a cache and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint, or cross-validate its configuration.
    Eval(EvalArgs),
    /// Cross-validate the network for several channel counts.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; receives NAME.edf and NAME.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "synth")]
    pub name: String,
    #[arg(long, default_value_t = 8)]
    pub channels: usize,
    /// Duration in seconds.
    #[arg(long, default_value_t = 7200.0)]
    pub duration: f64,
    /// Sample rate in Hz (must be an integer for EDF output).
    #[arg(long, default_value_t = 128.0)]
    pub rate: f64,
    /// Channels carrying the pre-ictal signature.
    #[arg(long, value_delimiter = ',', default_value = "1,3")]
    pub informative: Vec<usize>,
    /// Seizure onsets in seconds.
    #[arg(long, value_delimiter = ',', default_value = "1900,3800,5700")]
    pub onsets: Vec<f64>,
    /// Background standard deviation (µV).
    #[arg(long, default_value_t = 20.0)]
    pub noise: f64,
    /// Peak pre-ictal signature amplitude (µV).
    #[arg(long, default_value_t = 20.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 60.0)]
    pub ictal_duration: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct RecordingArgs {
    /// EDF recordings.
    #[arg(long = "edf", required = true)]
    pub edf: Vec<PathBuf>,
    /// Annotation CSVs, one per EDF in the same order.
    #[arg(long = "annotations", required = true)]
    pub annotations: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub recordings: RecordingArgs,
    /// Output cache file.
    #[arg(long)]
    pub out: PathBuf,
    /// Window length in seconds.
    #[arg(long, default_value_t = 4.0)]
    pub window: f64,
    /// Keep the pre-ictal stride equal to the window instead of balancing classes.
    #[arg(long)]
    pub no_balance: bool,
}

#[derive(Debug, Args)]
pub struct SelectionFlags {
    /// Channels to select.
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    /// Repetitions of the per-channel ranking.
    #[arg(long, default_value_t = 30)]
    pub m: usize,
    /// Held-out fraction per repetition.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Explained-variance target for PCA.
    #[arg(long, default_value_t = 0.95)]
    pub pca_variance: f64,
    /// Maximum number of PCA components.
    #[arg(long, default_value_t = 32)]
    pub pca_cap: usize,
    #[arg(long, default_value_t = 5)]
    pub smote_k: usize,
    #[arg(long, default_value_t = 10)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 5)]
    pub min_leaf: usize,
    /// Selection window length in seconds.
    #[arg(long, default_value_t = 5.0)]
    pub selection_window: f64,
}

impl SelectionFlags {
    fn config(&self, seed: u64) -> SelectionConfig {
        SelectionConfig {
            k: self.k,
            m: self.m,
            windowing: WindowingConfig::with_window(self.selection_window),
            test_fraction: self.test_fraction,
            components: Components::Variance { target: self.pca_variance, cap: self.pca_cap },
            smote_k: self.smote_k,
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Dataset cache to rank (used as windowed).
    #[arg(long, conflicts_with_all = ["edf", "annotations"])]
    pub cache: Option<PathBuf>,
    /// EDF recordings, windowed with --selection-window.
    #[arg(long = "edf", requires = "annotations")]
    pub edf: Vec<PathBuf>,
    #[arg(long = "annotations")]
    pub annotations: Vec<PathBuf>,
    #[command(flatten)]
    pub selection: SelectionFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output report.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HyperFlags {
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Weight of the supervised contrastive term.
    #[arg(long = "lambda", default_value_t = 1.0)]
    pub loss_lambda: f64,
    /// Contrastive temperature.
    #[arg(long, default_value_t = 0.07)]
    pub tau: f64,
}

#[derive(Debug, Args)]
pub struct ArchFlags {
    #[arg(long, default_value_t = 21)]
    pub front_kernel: usize,
    #[arg(long, default_value_t = 32)]
    pub trunk: usize,
    /// Bottleneck width inside the residual blocks.
    #[arg(long, default_value_t = 12)]
    pub res_mid: usize,
    #[arg(long, value_delimiter = ',', default_value = "5,3,3")]
    pub res1_kernels: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "5,3,3")]
    pub res2_kernels: Vec<usize>,
    /// Max-pool window (= stride) after the front conv and after the first block.
    #[arg(long, value_delimiter = ',', default_value = "4,4")]
    pub pools: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    pub d_inner: usize,
    #[arg(long, default_value_t = 8)]
    pub d_state: usize,
    #[arg(long, default_value_t = 4)]
    pub dt_rank: usize,
    #[arg(long, default_value_t = 4)]
    pub mamba_conv: usize,
    /// Drop the Mamba gate branch.
    #[arg(long)]
    pub no_gate: bool,
}

fn model_config(a: &ArchFlags, h: &HyperFlags, seed: u64, in_channels: usize, input_len: usize) -> Result<ModelConfig, CliError> {
    let triple = |v: &[usize], name: &str| -> Result<[usize; 3], CliError> {
        v.try_into().map_err(|_| CliError::Usage(format!("--{name} needs three kernel sizes")))
    };
    if a.pools.len() != 2 {
        return Err(CliError::Usage("--pools needs two values".into()));
    }
    let cfg = ModelConfig {
        in_channels,
        input_len,
        front_kernel: a.front_kernel,
        trunk_channels: a.trunk,
        res_mid_channels: a.res_mid,
        res_kernels: [triple(&a.res1_kernels, "res1-kernels")?, triple(&a.res2_kernels, "res2-kernels")?],
        pools: [(a.pools[0], a.pools[0]), (a.pools[1], a.pools[1])],
        mamba: MambaConfig {
            d_model: a.trunk,
            d_inner: a.d_inner,
            d_state: a.d_state,
            dt_rank: a.dt_rank,
            conv_kernel: a.mamba_conv,
            gate: !a.no_gate,
        },
        num_classes: 2,
        loss_lambda: h.loss_lambda,
        tau: h.tau,
        lr: h.lr,
        epochs: h.epochs,
        batch_size: h.batch_size,
        seed,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub cache: PathBuf,
    /// Selection report; without it every cache channel is used.
    #[arg(long)]
    pub selection: Option<PathBuf>,
    /// Output directory for model.slszw, manifest.txt, loss.csv and metrics.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperFlags,
    #[command(flatten)]
    pub arch: ArchFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub cache: PathBuf,
    /// Cross-validate the checkpoint's configuration with K folds.
    #[arg(long, conflicts_with = "holdout")]
    pub kfold: Option<usize>,
    /// Cross-validate with a single stratified hold-out of this fraction.
    #[arg(long)]
    pub holdout: Option<f64>,
    #[command(flatten)]
    pub hyper: HyperFlags,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output metrics CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub recordings: RecordingArgs,
    #[arg(long, value_delimiter = ',', default_value = "4,6,8,10")]
    pub k_values: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub kfold: usize,
    #[command(flatten)]
    pub selection: SelectionFlags,
    #[command(flatten)]
    pub hyper: HyperFlags,
    #[command(flatten)]
    pub arch: ArchFlags,
    #[arg(long, default_value_t = 4.0)]
    pub window: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::InvalidConfig(_) | PipelineError::NonIntegralWindow { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ChanselError> for CliError {
    fn from(e: ChanselError) -> Self {
        match e {
            ChanselError::InvalidConfig(_) | ChanselError::Index { .. } | ChanselError::Duplicate(_) => {
                CliError::Usage(e.to_string())
            }
            ChanselError::Pipeline(p) => p.into(),
            ChanselError::Ml(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidConfig(_) | ModelError::BudgetExceeded(_) => CliError::Usage(e.to_string()),
            ModelError::Pipeline(p) => p.into(),
            ModelError::Chansel(c) => c.into(),
            ModelError::Checkpoint(_) | ModelError::Shape(_) | ModelError::Ml(_) => CliError::Data(e.to_string()),
            ModelError::NonFinite(_) | ModelError::Nn(_) => CliError::Internal(e.to_string()),
        }
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    String::from_utf8(read_input(path)?).map_err(|_| CliError::Data(format!("{} is not UTF-8 text", path.display())))
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

fn load_recording(edf: &Path, csv: &Path) -> Result<EegRecording, CliError> {
    // check both paths before parsing so a missing file is reported as such
    let bytes = read_input(edf)?;
    let text = read_text(csv)?;
    let rec = parse_edf(&bytes).map_err(|e| CliError::Data(format!("{}: {e}", edf.display())))?;
    let ann = load_annotations(&text).map_err(|e| CliError::Data(format!("{}: {e}", csv.display())))?;
    rec.with_annotations(ann).map_err(|e| CliError::Data(format!("{}: {e}", csv.display())))
}

fn load_recordings(r: &RecordingArgs) -> Result<Vec<(EegRecording, String)>, CliError> {
    if r.edf.len() != r.annotations.len() {
        return Err(CliError::Usage(format!(
            "{} EDF files but {} annotation files; pass one --annotations per --edf",
            r.edf.len(),
            r.annotations.len()
        )));
    }
    let recs: Vec<(EegRecording, String)> = r
        .edf
        .iter()
        .zip(&r.annotations)
        .map(|(e, a)| Ok((load_recording(e, a)?, e.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()))))
        .collect::<Result<_, CliError>>()?;
    let first = &recs[0].0;
    for (rec, id) in &recs[1..] {
        if rec.channel_labels() != first.channel_labels() || rec.sample_rate_hz() != first.sample_rate_hz() {
            return Err(CliError::Data(format!("{id}: channels or sample rate differ from the first recording")));
        }
    }
    Ok(recs)
}

fn windows(recs: &[(EegRecording, String)], cfg: &WindowingConfig, balance: bool) -> Result<Dataset, CliError> {
    let refs: Vec<(&EegRecording, &str)> = recs.iter().map(|(r, id)| (r, id.as_str())).collect();
    Ok(build_dataset(&refs, cfg, balance)?)
}

fn load_cache(path: &Path) -> Result<Dataset, CliError> {
    read_cache(&read_input(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn cmd_synth(a: &SynthArgs) -> Result<String, CliError> {
    let cfg = SynthConfig {
        num_channels: a.channels,
        duration_s: a.duration,
        sample_rate_hz: a.rate,
        informative_channels: a.informative.iter().copied().collect(),
        preictal_onsets_s: a.onsets.clone(),
        noise_sigma: a.noise,
        seed: a.seed,
        ictal_duration_s: a.ictal_duration,
        signature_amplitude: a.amplitude,
        ..SynthConfig::default()
    };
    let rec = synth_eeg(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let edf = write_edf(&rec).map_err(|e| CliError::Usage(e.to_string()))?;
    let edf_path = a.out_dir.join(format!("{}.edf", a.name));
    let csv_path = a.out_dir.join(format!("{}.csv", a.name));
    write_output(&edf_path, &edf)?;
    write_output(&csv_path, format_annotations(rec.annotations()).as_bytes())?;
    Ok(format!("wrote {} and {}\n", edf_path.display(), csv_path.display()))
}

fn class_summary(ds: &Dataset) -> String {
    let [other, pre] = ds.class_counts();
    format!("windows: {} (other {other}, preictal {pre}), channels {}, samples/window {}\n", ds.len(), ds.num_channels(), ds.window_samples)
}

fn cmd_ingest(a: &IngestArgs) -> Result<String, CliError> {
    let recs = load_recordings(&a.recordings)?;
    let ds = windows(&recs, &WindowingConfig::with_window(a.window), !a.no_balance)?;
    write_output(&a.out, &write_cache(&ds))?;
    Ok(format!("{}wrote {}\n", class_summary(&ds), a.out.display()))
}

fn cmd_select(a: &SelectArgs) -> Result<String, CliError> {
    let cfg = a.selection.config(a.seed);
    let ds = match &a.cache {
        Some(path) => load_cache(path)?,
        None if !a.edf.is_empty() => {
            let recs = load_recordings(&RecordingArgs { edf: a.edf.clone(), annotations: a.annotations.clone() })?;
            windows(&recs, &cfg.windowing, false)?
        }
        None => return Err(CliError::Usage("select needs --cache or --edf with --annotations".into())),
    };
    if cfg.k == 0 || cfg.k > ds.num_channels() {
        return Err(CliError::Usage(format!("--k {} exceeds the {} available channels", cfg.k, ds.num_channels())));
    }
    let tally = select_channels_on(&ds, &cfg)?;
    let report = write_report(&tally, &ds.channel_labels, cfg.k, cfg.m, a.seed);
    write_output(&a.out, report.as_bytes())?;
    let names: Vec<&str> = tally.selected.iter().map(|&c| ds.channel_labels[c].as_str()).collect();
    Ok(format!("selected: {}\nwrote {}\n", names.join(", "), a.out.display()))
}

fn selected_channels(path: Option<&PathBuf>, ds: &Dataset) -> Result<Vec<usize>, CliError> {
    let Some(path) = path else {
        return Ok((0..ds.num_channels()).collect());
    };
    let ch = parse_report(&read_text(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if let Some(&c) = ch.iter().find(|&&c| c >= ds.num_channels()) {
        return Err(CliError::Data(format!("{}: channel {c} not in the cache", path.display())));
    }
    if ch.is_empty() {
        return Err(CliError::Data(format!("{}: no channels selected", path.display())));
    }
    Ok(ch)
}

fn cmd_train(a: &TrainArgs) -> Result<String, CliError> {
    let full = load_cache(&a.cache)?;
    let (mut state, channels) = match &a.resume {
        Some(path) => {
            let store = read_checkpoint(&read_input(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let cfg = model_config(&a.arch, &a.hyper, a.seed, 1, full.window_samples)?;
            TrainState::<f32>::from_checkpoint(&store, &cfg, a.seed)?
        }
        None => {
            let channels = selected_channels(a.selection.as_ref(), &full)?;
            let cfg = model_config(&a.arch, &a.hyper, a.seed, channels.len(), full.window_samples)?;
            let ds = full.select_channels(&channels)?;
            let all: Vec<usize> = (0..ds.len()).collect();
            let (raw, labels) = gather(&ds, &all);
            (TrainState::new(&cfg, a.seed, TrainData { raw: &raw, labels: &labels })?, channels)
        }
    };
    let ds = full.select_channels(&channels)?;
    if ds.window_samples != state.model.config.input_len {
        return Err(CliError::Data(format!(
            "cache windows have {} samples, the model expects {}",
            ds.window_samples, state.model.config.input_len
        )));
    }
    let all: Vec<usize> = (0..ds.len()).collect();
    let (raw, labels) = gather(&ds, &all);
    let data = TrainData { raw: &raw, labels: &labels };
    let stats = state.train_until(data, a.hyper.epochs)?;

    let cfg = state.model.config.clone();
    let pred = state.model.predict(&raw, ds.len(), cfg.batch_size)?;
    let pred: Vec<Label> = pred.into_iter().map(|c| Label::from_index(c).expect("binary")).collect();
    let report = compute_metrics(&pred, &ds.labels).map_err(|e| CliError::Internal(e.to_string()))?;
    let result = EvalResult::from_folds(vec![report], a.seed);

    let mut loss_csv = String::from("epoch,loss,acc\n");
    for s in &stats {
        loss_csv += &format!("{},{:.9},{:.6}\n", s.epoch, s.loss, s.accuracy);
    }
    let ch_list: Vec<String> = channels.iter().map(usize::to_string).collect();
    let manifest = run_manifest(
        &cfg,
        &dataset_hash(&full),
        &[("channels", ch_list.join(",")), ("epochs_completed", state.epoch.to_string()), ("adam_steps", state.optim.step.to_string())],
    );
    write_output(&a.out_dir.join("model.slszw"), &write_checkpoint(&state.to_checkpoint(&channels)))?;
    write_output(&a.out_dir.join("loss.csv"), loss_csv.as_bytes())?;
    write_output(&a.out_dir.join("metrics.csv"), metrics_csv(&result).as_bytes())?;
    write_output(&a.out_dir.join("manifest.txt"), manifest.as_bytes())?;
    Ok(format!(
        "parameters: {}\nepochs: {}\ntrain accuracy: {:.4}\nwrote {}\n",
        cfg.num_params(),
        state.epoch,
        result.mean_accuracy,
        a.out_dir.display()
    ))
}

fn cmd_eval(a: &EvalArgs) -> Result<String, CliError> {
    let store = read_checkpoint(&read_input(&a.checkpoint)?)
        .map_err(|e: NnError| CliError::Data(format!("{}: {e}", a.checkpoint.display())))?;
    let full = load_cache(&a.cache)?;
    let hyper_cfg = ModelConfig {
        lr: a.hyper.lr,
        epochs: a.hyper.epochs,
        batch_size: a.hyper.batch_size,
        loss_lambda: a.hyper.loss_lambda,
        tau: a.hyper.tau,
        ..ModelConfig::default()
    };
    let (state, channels) = TrainState::<f32>::from_checkpoint(&store, &hyper_cfg, a.seed)?;
    if let Some(&c) = channels.iter().find(|&&c| c >= full.num_channels()) {
        return Err(CliError::Data(format!("checkpoint uses channel {c}, cache has {}", full.num_channels())));
    }
    let ds = full.select_channels(&channels)?;
    if ds.window_samples != state.model.config.input_len {
        return Err(CliError::Data(format!(
            "cache windows have {} samples, the model expects {}",
            ds.window_samples, state.model.config.input_len
        )));
    }
    let kind = match (a.kfold, a.holdout) {
        (Some(k), _) => Some(PlanKind::KFold(k)),
        (None, Some(f)) => Some(PlanKind::Holdout(f)),
        (None, None) => None,
    };
    let result = match kind {
        Some(kind) => {
            let plan = make_split(&ds.labels, kind, a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
            let trainer = NetTrainer { config: ModelConfig { seed: a.seed, ..state.model.config.clone() } };
            evaluate(&ds, &plan, &trainer)?
        }
        None => {
            let all: Vec<usize> = (0..ds.len()).collect();
            let (raw, _) = gather(&ds, &all);
            let pred = state.model.predict(&raw, ds.len(), state.model.config.batch_size)?;
            let pred: Vec<Label> = pred.into_iter().map(|c| Label::from_index(c).expect("binary")).collect();
            let m = compute_metrics(&pred, &ds.labels).map_err(|e| CliError::Internal(e.to_string()))?;
            EvalResult::from_folds(vec![m], a.seed)
        }
    };
    let csv = metrics_csv(&result);
    write_output(&a.out, csv.as_bytes())?;
    Ok(format!(
        "mean acc {:.4} sens {:.4} spec {:.4} over {} fold(s)\nwrote {}\n",
        result.mean_accuracy,
        result.mean_sensitivity,
        result.mean_specificity,
        result.folds.len(),
        a.out.display()
    ))
}

fn cmd_sweep(a: &SweepArgs) -> Result<String, CliError> {
    let recs = load_recordings(&a.recordings)?;
    let sel_cfg = a.selection.config(a.seed);
    let sel = windows(&recs, &sel_cfg.windowing, false)?;
    let net = windows(&recs, &WindowingConfig::with_window(a.window), true)?;
    let cfg = model_config(&a.arch, &a.hyper, a.seed, net.num_channels(), net.window_samples)?;
    if let Some(&k) = a.k_values.iter().find(|&&k| k == 0 || k > net.num_channels()) {
        return Err(CliError::Usage(format!("k = {k} outside 1..={}", net.num_channels())));
    }
    let rows = channel_sweep(&sel, &net, &sel_cfg, &NetTrainer { config: cfg }, &a.k_values, PlanKind::KFold(a.kfold), a.seed)?;
    let csv = sweep_csv(&rows, &net.channel_labels);
    write_output(&a.out, csv.as_bytes())?;
    Ok(format!("{csv}wrote {}\n", a.out.display()))
}

/// Runs a parsed command on a pool of `cli.jobs` threads; returns stdout text.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.max(1))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Select(a) => cmd_select(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
    })
}

/// Parses `args` (including the program name), runs the command, prints its
/// output or error, and returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
