use super::MlError;
use crate::pipeline::Label;

/// Binary confusion counts with PreIctal as the positive class.
///
/// A ratio whose denominator is zero is NaN and its `*_defined` flag is false.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub sensitivity_defined: bool,
    pub specificity_defined: bool,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (f64::NAN, false)
    } else {
        (num as f64 / den as f64, true)
    }
}

impl MetricsReport {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let (accuracy, _) = ratio(tp + tn, tp + tn + fp + fn_);
        let (sensitivity, sensitivity_defined) = ratio(tp, tp + fn_);
        let (specificity, specificity_defined) = ratio(tn, tn + fp);
        Self { tp, fp, tn, fn_, accuracy, sensitivity, specificity, sensitivity_defined, specificity_defined }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn compute_metrics(pred: &[Label], truth: &[Label]) -> Result<MetricsReport, MlError> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(MlError::LengthMismatch(pred.len(), truth.len()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (Label::PreIctal, Label::PreIctal) => tp += 1,
            (Label::PreIctal, Label::Other) => fp += 1,
            (Label::Other, Label::Other) => tn += 1,
            (Label::Other, Label::PreIctal) => fn_ += 1,
        }
    }
    Ok(MetricsReport::from_counts(tp, fp, tn, fn_))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    #[test]
    fn perfect() {
        let y = [Other, PreIctal, PreIctal];
        let m = compute_metrics(&y, &y).unwrap();
        assert_eq!((m.accuracy, m.sensitivity, m.specificity), (1.0, 1.0, 1.0));
    }

    #[test]
    fn headline_counts() {
        let m = MetricsReport::from_counts(955, 60, 940, 45);
        assert!((m.sensitivity - 0.955).abs() < 1e-12);
        assert!((m.specificity - 0.940).abs() < 1e-12);
        assert!((m.accuracy - 0.9475).abs() < 1e-12);
    }

    #[test]
    fn undefined_specificity() {
        let m = compute_metrics(&[PreIctal, Other], &[PreIctal, PreIctal]).unwrap();
        assert!(!m.specificity_defined && m.specificity.is_nan());
        assert!(m.sensitivity_defined);
        assert_eq!(compute_metrics(&[Other], &[]), Err(MlError::LengthMismatch(1, 0)));
    }
}
