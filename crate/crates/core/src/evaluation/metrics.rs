use crate::model::ClassLabel;

use super::EvalError;

/// `K × K` counts, rows are the true class and columns the predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        Self { k, counts: vec![0; k * k] }
    }

    /// Row-major counts.
    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self, EvalError> {
        if k == 0 || counts.len() != k * k {
            return Err(EvalError::LengthMismatch { truth: k * k, predicted: counts.len() });
        }
        Ok(Self { k, counts })
    }

    pub fn from_rows<const N: usize>(rows: [[u64; N]; N]) -> Self {
        Self { k: N, counts: rows.iter().flatten().copied().collect() }
    }

    /// The binary layout `[[tp, fn], [fp, tn]]`, class 0 positive.
    pub fn binary(counts: BinaryCounts) -> Self {
        Self::from_rows([[counts.tp, counts.fn_], [counts.fp, counts.tn]])
    }

    pub fn n_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.k + predicted]
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.k + predicted] += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        (0..self.k).map(|j| self.get(truth, j)).sum()
    }

    pub fn column_total(&self, predicted: usize) -> u64 {
        (0..self.k).map(|i| self.get(i, predicted)).sum()
    }

    /// `trace / total`, zero for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        ratio(self.trace(), self.total())
    }

    /// Class `c` against all others.
    pub fn one_vs_rest(&self, c: usize) -> BinaryCounts {
        let tp = self.get(c, c);
        let fn_ = self.row_total(c) - tp;
        let fp = self.column_total(c) - tp;
        BinaryCounts { tp, tn: self.total() - tp - fn_ - fp, fp, fn_ }
    }

    /// Relabels class `i` as `perm[i]` in both rows and columns.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = Self::new(self.k);
        for i in 0..self.k {
            for j in 0..self.k {
                out.counts[perm[i] * self.k + perm[j]] = self.get(i, j);
            }
        }
        out
    }

    pub fn class_metrics(&self) -> Vec<ClassMetrics> {
        (0..self.k)
            .map(|c| {
                let b = self.one_vs_rest(c);
                ClassMetrics {
                    class: c,
                    support: b.tp + b.fn_,
                    recall: b.recall(),
                    specificity: b.specificity(),
                    f1: b.f1(),
                    undefined: b.tp + b.fn_ == 0 || b.tn + b.fp == 0,
                }
            })
            .collect()
    }
}

/// Counts a labelled prediction list.
pub fn confusion(truth: &[ClassLabel], predicted: &[ClassLabel]) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch { truth: truth.len(), predicted: predicted.len() });
    }
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut cm = ConfusionMatrix::new(ClassLabel::COUNT);
    for (t, p) in truth.iter().zip(predicted) {
        cm.add(t.index(), p.index());
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl BinaryCounts {
    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn_)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }

    /// `TP / (TP + ½(FP + FN))`.
    pub fn f1(&self) -> f64 {
        let den = self.tp as f64 + 0.5 * (self.fp + self.fn_) as f64;
        if den == 0.0 {
            0.0
        } else {
            self.tp as f64 / den
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class: usize,
    pub support: u64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    /// Some ratio was 0/0 and evaluated to zero.
    pub undefined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSet {
    pub accuracy: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    /// Classes whose metrics involved a 0/0 ratio.
    pub flagged_classes: Vec<usize>,
}

impl MetricSet {
    pub fn values(&self) -> [f64; 4] {
        [self.accuracy, self.recall, self.specificity, self.f1]
    }
}

/// Accuracy is `trace / total`. A two-class matrix is scored with the binary
/// formulas, class 0 positive. With three or more classes recall,
/// specificity and F1 are one-vs-rest per class and macro-averaged over the
/// classes that occur in the truth; a class with no true epochs is flagged
/// and left out of the mean.
pub fn metrics_from_confusion(cm: &ConfusionMatrix) -> MetricSet {
    let accuracy = cm.accuracy();
    let per_class = cm.class_metrics();
    let flagged_classes: Vec<usize> = per_class.iter().filter(|m| m.undefined).map(|m| m.class).collect();
    if cm.n_classes() == 2 {
        let b = cm.one_vs_rest(0);
        return MetricSet { accuracy, recall: b.recall(), specificity: b.specificity(), f1: b.f1(), flagged_classes };
    }
    let present: Vec<&ClassMetrics> = per_class.iter().filter(|m| m.support > 0).collect();
    let mean = |f: fn(&ClassMetrics) -> f64| {
        if present.is_empty() {
            0.0
        } else {
            present.iter().map(|m| f(m)).sum::<f64>() / present.len() as f64
        }
    };
    MetricSet {
        accuracy,
        recall: mean(|m| m.recall),
        specificity: mean(|m| m.specificity),
        f1: mean(|m| m.f1),
        flagged_classes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use ClassLabel::*;

    #[test]
    fn hand_counted_confusion() {
        let truth = [Left, Left, Right, Rest, Rest, Rest];
        let pred = [Left, Right, Right, Rest, Left, Rest];
        let cm = confusion(&truth, &pred).unwrap();
        assert_eq!(cm, ConfusionMatrix::from_rows([[1, 1, 0], [0, 1, 0], [1, 0, 2]]));
        assert_eq!(cm.trace(), 4);
    }

    #[test]
    fn confusion_preconditions() {
        assert!(matches!(confusion(&[Left], &[]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(confusion(&[], &[]), Err(EvalError::Empty)));
    }

    #[test]
    fn all_predicted_as_one_class() {
        let truth: Vec<_> = (0..12).map(|i| ClassLabel::from_index(i % 3).unwrap()).collect();
        let cm = confusion(&truth, &[Left; 12]).unwrap();
        for i in 0..3 {
            assert_eq!(cm.get(i, 0), 4);
            assert_eq!(cm.get(i, 1) + cm.get(i, 2), 0);
        }
    }

    #[test]
    fn binary_hand_case() {
        let cm = ConfusionMatrix::binary(BinaryCounts { tp: 50, tn: 40, fp: 5, fn_: 5 });
        let m = metrics_from_confusion(&cm);
        assert_eq!(m.accuracy, 0.9);
        assert_eq!(m.recall, 50.0 / 55.0);
        assert_eq!(m.specificity, 40.0 / 45.0);
        assert_eq!(m.f1, 50.0 / 55.0);
    }

    #[test]
    fn perfect_and_worst() {
        let m = metrics_from_confusion(&ConfusionMatrix::from_rows([[7, 0, 0], [0, 6, 0], [0, 0, 7]]));
        assert_eq!(m.values(), [1.0; 4]);
        assert!(m.flagged_classes.is_empty());
        let m = metrics_from_confusion(&ConfusionMatrix::from_rows([[0, 3, 4], [2, 0, 5], [1, 6, 0]]));
        assert_eq!(m.accuracy, 0.0);
        assert_eq!(m.recall, 0.0);
    }

    #[test]
    fn absent_class_is_flagged_and_excluded() {
        let cm = ConfusionMatrix::from_rows([[5, 0, 0], [0, 5, 0], [0, 0, 0]]);
        let m = metrics_from_confusion(&cm);
        assert_eq!(m.recall, 1.0);
        assert_eq!(m.flagged_classes, vec![2]);
        assert_eq!(cm.class_metrics()[2].recall, 0.0);
    }

    fn cm3() -> impl Strategy<Value = ConfusionMatrix> {
        prop::collection::vec(0u64..20, 9)
            .prop_filter("non-empty", |c| c.iter().sum::<u64>() > 0)
            .prop_map(|c| ConfusionMatrix::from_counts(3, c).unwrap())
    }

    proptest! {
        #[test]
        fn metrics_are_bounded(cm in cm3()) {
            let m = metrics_from_confusion(&cm);
            for v in m.values() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn accuracy_matches_binary_formula_per_class(cm in cm3()) {
            // Every one-vs-rest view sees the same totals; global accuracy is
            // trace/total regardless of which class is positive.
            let total = cm.total();
            for c in 0..3 {
                let b = cm.one_vs_rest(c);
                prop_assert_eq!(b.tp + b.tn + b.fp + b.fn_, total);
            }
            prop_assert_eq!(metrics_from_confusion(&cm).accuracy, cm.trace() as f64 / total as f64);
        }

        #[test]
        fn macro_metrics_ignore_class_order(cm in cm3(), perm in Just(vec![0usize, 1, 2]).prop_shuffle()) {
            let a = metrics_from_confusion(&cm);
            let b = metrics_from_confusion(&cm.permuted(&perm));
            prop_assert_eq!(a.accuracy, b.accuracy);
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-15);
            }
        }
    }
}
