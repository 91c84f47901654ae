use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{ModelConfig, ModelError, TrainData, TrainState};
use crate::chansel::{select_channels_on, SelectionConfig};
use crate::mlcore::{compute_metrics, MetricsReport};
use crate::pipeline::{make_split, write_cache, Dataset, Label, PlanKind, SplitPlan};
use crate::rng::SeedStream;

/// Anything that can be trained on some windows and predict others.
pub trait FoldTrainer: Sync {
    fn fit_predict(&self, ds: &Dataset, train: &[usize], test: &[usize], fold: usize) -> Result<Vec<Label>, ModelError>;
}

/// Windows of `ds` at `idx`, concatenated, with class indices.
pub fn gather(ds: &Dataset, idx: &[usize]) -> (Vec<f32>, Vec<usize>) {
    let mut raw = Vec::with_capacity(idx.len() * ds.segment_len());
    for &i in idx {
        raw.extend_from_slice(ds.segment(i));
    }
    (raw, idx.iter().map(|&i| ds.labels[i].index()).collect())
}

/// Trains the network from scratch on each fold.
#[derive(Debug, Clone)]
pub struct NetTrainer {
    pub config: ModelConfig,
}

impl NetTrainer {
    pub fn fold_seed(&self, fold: usize) -> u64 {
        SeedStream::new(self.config.seed).named("fold").split(fold as u64).seed()
    }
}

impl FoldTrainer for NetTrainer {
    fn fit_predict(&self, ds: &Dataset, train: &[usize], test: &[usize], fold: usize) -> Result<Vec<Label>, ModelError> {
        let cfg = ModelConfig { in_channels: ds.num_channels(), input_len: ds.window_samples, ..self.config.clone() };
        let (raw, labels) = gather(ds, train);
        let data = TrainData { raw: &raw, labels: &labels };
        let mut state = TrainState::<f32>::new(&cfg, self.fold_seed(fold), data)?;
        state.train_until(data, cfg.epochs)?;
        let (test_raw, _) = gather(ds, test);
        let pred = state.model.predict(&test_raw, test.len(), cfg.batch_size)?;
        Ok(pred.into_iter().map(|c| Label::from_index(c).expect("binary head")).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub folds: Vec<MetricsReport>,
    pub mean_accuracy: f64,
    pub mean_sensitivity: f64,
    pub mean_specificity: f64,
    pub seed: u64,
}

fn mean_defined(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.filter(|x| !x.is_nan()).fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl EvalResult {
    /// Means over folds; an undefined ratio in one fold is left out of its mean.
    pub fn from_folds(folds: Vec<MetricsReport>, seed: u64) -> Self {
        Self {
            mean_accuracy: mean_defined(folds.iter().map(|m| m.accuracy)),
            mean_sensitivity: mean_defined(folds.iter().map(|m| m.sensitivity)),
            mean_specificity: mean_defined(folds.iter().map(|m| m.specificity)),
            folds,
            seed,
        }
    }
}

/// Trains and tests every fold of `plan`. Folds run on the current rayon
/// pool and are reported in fold order.
pub fn evaluate(ds: &Dataset, plan: &SplitPlan, trainer: &dyn FoldTrainer) -> Result<EvalResult, ModelError> {
    if plan.len() != ds.len() {
        return Err(ModelError::InvalidConfig(format!("plan covers {} windows, dataset has {}", plan.len(), ds.len())));
    }
    let folds = plan.folds();
    let reports: Vec<MetricsReport> = folds
        .par_iter()
        .enumerate()
        .map(|(f, (train, test))| {
            let pred = trainer.fit_predict(ds, train, test, f)?;
            let truth: Vec<Label> = test.iter().map(|&i| ds.labels[i]).collect();
            Ok(compute_metrics(&pred, &truth)?)
        })
        .collect::<Result<_, ModelError>>()?;
    Ok(EvalResult::from_folds(reports, plan.seed()))
}

fn fmt_metric(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6}")
    }
}

/// `fold,acc,sens,spec` rows plus a `mean` row.
pub fn metrics_csv(result: &EvalResult) -> String {
    let mut out = String::from("fold,acc,sens,spec\n");
    for (i, m) in result.folds.iter().enumerate() {
        out += &format!("{i},{},{},{}\n", fmt_metric(m.accuracy), fmt_metric(m.sensitivity), fmt_metric(m.specificity));
    }
    out += &format!(
        "mean,{},{},{}\n",
        fmt_metric(result.mean_accuracy),
        fmt_metric(result.mean_sensitivity),
        fmt_metric(result.mean_specificity)
    );
    out
}

/// SHA-256 of the dataset's cache encoding, hex.
pub fn dataset_hash(ds: &Dataset) -> String {
    Sha256::digest(write_cache(ds)).iter().map(|b| format!("{b:02x}")).collect()
}

/// Plain `key=value` lines describing a run.
pub fn run_manifest(cfg: &ModelConfig, dataset_hash: &str, extra: &[(&str, String)]) -> String {
    let m = &cfg.mamba;
    let rk = |k: [usize; 3]| format!("{},{},{}", k[0], k[1], k[2]);
    let mut lines = vec![
        ("seed", cfg.seed.to_string()),
        ("dataset_sha256", dataset_hash.to_string()),
        ("in_channels", cfg.in_channels.to_string()),
        ("input_len", cfg.input_len.to_string()),
        ("front_kernel", cfg.front_kernel.to_string()),
        ("trunk_channels", cfg.trunk_channels.to_string()),
        ("res_mid_channels", cfg.res_mid_channels.to_string()),
        ("res_kernels_1", rk(cfg.res_kernels[0])),
        ("res_kernels_2", rk(cfg.res_kernels[1])),
        ("pools", format!("{}x{},{}x{}", cfg.pools[0].0, cfg.pools[0].1, cfg.pools[1].0, cfg.pools[1].1)),
        ("mamba", format!("{}-{}-{} N={} dt_rank={} conv={} gate={}", m.d_model, m.d_inner, m.d_model, m.d_state, m.dt_rank, m.conv_kernel, m.gate)),
        ("parameters", cfg.num_params().to_string()),
        ("loss_lambda", cfg.loss_lambda.to_string()),
        ("tau", cfg.tau.to_string()),
        ("lr", cfg.lr.to_string()),
        ("epochs", cfg.epochs.to_string()),
        ("batch_size", cfg.batch_size.to_string()),
    ];
    lines.extend(extra.iter().map(|(k, v)| (*k, v.clone())));
    lines.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub channels: Vec<usize>,
    pub result: EvalResult,
}

/// Evaluates the network on the top-k channels of one shared tally for each
/// `k`, plus all channels as a reference row. `selection` holds the 5 s
/// windows used for ranking and `windows` the network input windows of the
/// same recording(s).
pub fn channel_sweep(
    selection: &Dataset,
    windows: &Dataset,
    sel_cfg: &SelectionConfig,
    trainer: &dyn FoldTrainer,
    k_values: &[usize],
    plan: PlanKind,
    seed: u64,
) -> Result<Vec<SweepRow>, ModelError> {
    let c = windows.num_channels();
    if let Some(&k) = k_values.iter().find(|&&k| k == 0 || k > c) {
        return Err(ModelError::InvalidConfig(format!("k = {k} outside 1..={c}")));
    }
    let k_max = k_values.iter().copied().max().unwrap_or(c);
    let tally = select_channels_on(selection, &SelectionConfig { k: k_max, ..sel_cfg.clone() })?;
    let mut ks: Vec<usize> = k_values.to_vec();
    if !ks.contains(&c) {
        ks.push(c);
    }
    let split = make_split(&windows.labels, plan, seed)?;
    ks.into_iter()
        .map(|k| {
            let channels: Vec<usize> = if k == c { (0..c).collect() } else { tally.top(k).to_vec() };
            let ds = windows.select_channels(&channels)?;
            let result = evaluate(&ds, &split, trainer)?;
            Ok(SweepRow { k, channels, result })
        })
        .collect()
}

/// `k,channels,acc,sens,spec` table.
pub fn sweep_csv(rows: &[SweepRow], labels: &[String]) -> String {
    let mut out = String::from("k,channels,acc,sens,spec\n");
    for r in rows {
        let names: Vec<&str> = r.channels.iter().map(|&c| labels[c].as_str()).collect();
        out += &format!(
            "{},{},{},{},{}\n",
            r.k,
            names.join(" "),
            fmt_metric(r.result.mean_accuracy),
            fmt_metric(r.result.mean_sensitivity),
            fmt_metric(r.result.mean_specificity)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::Label::{Other, PreIctal};

    fn dataset(labels: &[Label]) -> Dataset {
        let mut ds = Dataset::empty(vec!["A".into(), "B".into(), "C".into()], 1.0, 2);
        for (i, &l) in labels.iter().enumerate() {
            ds.data.extend([i as f32; 6]);
            ds.labels.push(l);
            ds.source_times_s.push(i as f64);
        }
        ds
    }

    struct Oracle;
    impl FoldTrainer for Oracle {
        fn fit_predict(&self, ds: &Dataset, _: &[usize], test: &[usize], _: usize) -> Result<Vec<Label>, ModelError> {
            Ok(test.iter().map(|&i| ds.labels[i]).collect())
        }
    }

    struct Constant(Label);
    impl FoldTrainer for Constant {
        fn fit_predict(&self, _: &Dataset, _: &[usize], test: &[usize], _: usize) -> Result<Vec<Label>, ModelError> {
            Ok(vec![self.0; test.len()])
        }
    }

    fn labels(pre: usize, other: usize) -> Vec<Label> {
        let mut v = vec![PreIctal; pre];
        v.extend(vec![Other; other]);
        v
    }

    #[test]
    fn perfect_classifier() {
        let ds = dataset(&labels(30, 30));
        let plan = make_split(&ds.labels, PlanKind::KFold(10), 0).unwrap();
        let r = evaluate(&ds, &plan, &Oracle).unwrap();
        assert_eq!(r.folds.len(), 10);
        assert_eq!((r.mean_accuracy, r.mean_sensitivity, r.mean_specificity), (1.0, 1.0, 1.0));
    }

    #[test]
    fn constant_predictor() {
        let ds = dataset(&labels(20, 60));
        let plan = make_split(&ds.labels, PlanKind::KFold(5), 1).unwrap();
        let r = evaluate(&ds, &plan, &Constant(Other)).unwrap();
        assert!((r.mean_accuracy - 0.75).abs() < 1e-12);
        assert_eq!((r.mean_sensitivity, r.mean_specificity), (0.0, 1.0));
        let r = evaluate(&ds, &plan, &Constant(PreIctal)).unwrap();
        assert!((r.mean_accuracy - 0.25).abs() < 1e-12);
        assert_eq!(r.mean_specificity, 0.0);
    }

    #[test]
    fn means_are_fold_means() {
        let folds = vec![MetricsReport::from_counts(1, 1, 1, 1), MetricsReport::from_counts(2, 0, 2, 0)];
        let r = EvalResult::from_folds(folds, 0);
        assert!((r.mean_accuracy - 0.75).abs() < 1e-15);
    }

    #[test]
    fn csv_rows() {
        let ds = dataset(&labels(30, 30));
        let plan = make_split(&ds.labels, PlanKind::KFold(10), 0).unwrap();
        let csv = metrics_csv(&evaluate(&ds, &plan, &Oracle).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 12);
        assert_eq!(lines[0], "fold,acc,sens,spec");
        assert_eq!(lines[11], "mean,1.000000,1.000000,1.000000");
    }

    #[test]
    fn plan_must_cover_dataset() {
        let ds = dataset(&labels(5, 5));
        let plan = make_split(&labels(6, 6), PlanKind::KFold(2), 0).unwrap();
        assert!(evaluate(&ds, &plan, &Oracle).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = dataset(&labels(3, 3));
        let mut b = a.clone();
        assert_eq!(dataset_hash(&a), dataset_hash(&b));
        b.data[0] = 9.0;
        assert_ne!(dataset_hash(&a), dataset_hash(&b));
        assert_eq!(dataset_hash(&a).len(), 64);
    }
}
