use rand::seq::SliceRandom;

use super::{Label, PipelineError};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanKind {
    KFold(usize),
    Holdout(f64),
}

/// Segment-level partition, stratified by class.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitPlan {
    KFold { k: usize, fold_of: Vec<usize>, seed: u64 },
    Holdout { train: Vec<usize>, test: Vec<usize>, seed: u64 },
}

impl SplitPlan {
    pub fn seed(&self) -> u64 {
        match self {
            SplitPlan::KFold { seed, .. } | SplitPlan::Holdout { seed, .. } => *seed,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SplitPlan::KFold { fold_of, .. } => fold_of.len(),
            SplitPlan::Holdout { train, test, .. } => train.len() + test.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_folds(&self) -> usize {
        match self {
            SplitPlan::KFold { k, .. } => *k,
            SplitPlan::Holdout { .. } => 1,
        }
    }

    /// `(train, test)` index lists, one pair per fold, each sorted.
    pub fn folds(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        match self {
            SplitPlan::KFold { k, fold_of, .. } => (0..*k)
                .map(|f| {
                    let (test, train): (Vec<usize>, Vec<usize>) =
                        (0..fold_of.len()).partition(|&i| fold_of[i] == f);
                    (train, test)
                })
                .collect(),
            SplitPlan::Holdout { train, test, .. } => vec![(train.clone(), test.clone())],
        }
    }
}

fn shuffled_classes(labels: &[Label], stream: SeedStream) -> [Vec<usize>; 2] {
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, l) in labels.iter().enumerate() {
        by_class[l.index()].push(i);
    }
    for (c, idx) in by_class.iter_mut().enumerate() {
        idx.shuffle(&mut stream.split(c as u64).rng());
    }
    by_class
}

/// Stratified k-fold or hold-out split over segments.
pub fn make_split(labels: &[Label], kind: PlanKind, seed: u64) -> Result<SplitPlan, PipelineError> {
    let n = labels.len();
    let stream = SeedStream::new(seed).named("split");
    match kind {
        PlanKind::KFold(k) => {
            if k < 2 {
                return Err(PipelineError::TooFewSamples(format!("k-fold needs k >= 2, got {k}")));
            }
            if n < k {
                return Err(PipelineError::TooFewSamples(format!("{n} segments for {k} folds")));
            }
            let mut fold_of = vec![0usize; n];
            // deal class by class, continuing the fold cursor so totals stay within one
            let mut cursor = 0usize;
            for class in shuffled_classes(labels, stream) {
                for i in class {
                    fold_of[i] = cursor % k;
                    cursor += 1;
                }
            }
            Ok(SplitPlan::KFold { k, fold_of, seed })
        }
        PlanKind::Holdout(frac) => {
            if !(frac > 0.0 && frac < 1.0) {
                return Err(PipelineError::TooFewSamples(format!("test fraction {frac} outside (0, 1)")));
            }
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for class in shuffled_classes(labels, stream) {
                let n_test = (frac * class.len() as f64).round() as usize;
                test.extend_from_slice(&class[..n_test]);
                train.extend_from_slice(&class[n_test..]);
            }
            if train.is_empty() || test.is_empty() {
                return Err(PipelineError::TooFewSamples(format!(
                    "{n} segments cannot fill both sides of a {frac} hold-out"
                )));
            }
            train.sort_unstable();
            test.sort_unstable();
            Ok(SplitPlan::Holdout { train, test, seed })
        }
    }
}
