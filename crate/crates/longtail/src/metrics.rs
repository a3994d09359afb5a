//! Worst-category evaluation: per-class recall and its arithmetic, geometric,
//! and harmonic means, the lowest recall, and the Many/Medium/Few subset
//! breakdown.
//!
//! The arithmetic mean barely moves when one class collapses to zero recall;
//! the harmonic mean crashes, and the geometric mean sits in between. As an
//! illustration, for recalls (0.01, 0.99) the arithmetic mean is 0.5 while
//! HM = 0.0198 and GM = 0.0995. The report therefore carries all three plus
//! the raw minimum.
//!
//! Zero recalls would zero out GM and HM entirely, so both are computed on a
//! copy of the vector with zeros replaced by a small epsilon (1e-3 by
//! default); the arithmetic mean and the reported lowest recall always use
//! the raw values, and a flag records whether substitution happened.

use serde::{Deserialize, Serialize};

use crate::dataset::ClassCounts;
use crate::error::{Error, Result};

/// Default substitution value for zero recalls in GM/HM.
pub const DEFAULT_EPSILON: f64 = 1e-3;

/// Per-class recall values, each in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct RecallVector {
    recalls: Vec<f64>,
}

impl RecallVector {
    pub fn new(recalls: Vec<f64>) -> Result<Self> {
        if recalls.is_empty() {
            return Err(Error::invalid_argument("recall vector must be non-empty"));
        }
        if let Some(&bad) = recalls.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::invalid_argument(format!(
                "recall {bad} outside [0, 1]"
            )));
        }
        Ok(Self { recalls })
    }

    pub fn recalls(&self) -> &[f64] {
        &self.recalls
    }

    /// Number of classes; at least 1 by construction.
    pub fn len(&self) -> usize {
        self.recalls.len()
    }
}

/// Per-bucket mean recalls for the Many (>100 training samples), Medium
/// (20..=100), and Few (<20) class subsets. Empty buckets are absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetMeans {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub many: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub medium: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub few: Option<f64>,
}

/// Summary of a recall vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Mean of the raw recalls; equals overall accuracy on a balanced test set.
    pub arithmetic_mean: f64,
    /// Geometric mean of the epsilon-substituted recalls.
    pub geometric_mean: f64,
    /// Harmonic mean of the epsilon-substituted recalls.
    pub harmonic_mean: f64,
    /// Raw minimum recall, never substituted.
    pub lowest_recall: f64,
    pub epsilon_used: f64,
    /// True when at least one zero recall was replaced by epsilon.
    pub zero_substituted: bool,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub subset_means: Option<SubsetMeans>,
}

impl MetricsReport {
    /// Column order of the CSV serialization.
    pub fn csv_header() -> &'static str {
        "accuracy,gmean,hmean,lowest,epsilon,substituted,many,medium,few"
    }

    /// One CSV row in [`Self::csv_header`] order; absent buckets serialize as
    /// empty cells.
    pub fn to_csv_row(&self) -> String {
        let bucket = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let subsets = self.subset_means.unwrap_or(SubsetMeans {
            many: None,
            medium: None,
            few: None,
        });
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.arithmetic_mean,
            self.geometric_mean,
            self.harmonic_mean,
            self.lowest_recall,
            self.epsilon_used,
            self.zero_substituted,
            bucket(subsets.many),
            bucket(subsets.medium),
            bucket(subsets.few),
        )
    }

    /// Flat JSON object with all summary fields.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics report serializes")
    }
}

/// Per-class recall: the fraction of each class's samples predicted
/// correctly. Every class must appear in the labels at least once, otherwise
/// its recall is undefined.
pub fn per_class_recall(
    predictions: &[usize],
    labels: &[usize],
    num_classes: usize,
) -> Result<RecallVector> {
    if labels.is_empty() {
        return Err(Error::invalid_argument("labels must be non-empty"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::invalid_argument(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if num_classes == 0 {
        return Err(Error::invalid_argument("num_classes must be >= 1"));
    }
    let mut totals = vec![0usize; num_classes];
    let mut correct = vec![0usize; num_classes];
    for (&pred, &label) in predictions.iter().zip(labels) {
        if label >= num_classes {
            return Err(Error::invalid_argument(format!(
                "label {label} out of range for {num_classes} classes"
            )));
        }
        totals[label] += 1;
        if pred == label {
            correct[label] += 1;
        }
    }
    if let Some(empty) = totals.iter().position(|&t| t == 0) {
        return Err(Error::invalid_argument(format!(
            "class {empty} has no test samples; its recall is undefined"
        )));
    }
    RecallVector::new(
        correct
            .iter()
            .zip(&totals)
            .map(|(&c, &t)| c as f64 / t as f64)
            .collect(),
    )
}

/// Fraction of predictions that match their labels.
pub fn overall_accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::invalid_argument("labels must be non-empty"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::invalid_argument(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Summarize a recall vector. GM and HM are computed on the vector with
/// zeros replaced by `epsilon`; the arithmetic mean and lowest recall use the
/// raw values. The GM runs in log space so long vectors do not underflow.
pub fn summarize(recalls: &RecallVector, epsilon: f64) -> MetricsReport {
    assert!(
        epsilon.is_finite() && epsilon > 0.0,
        "epsilon must be a finite value > 0"
    );
    let raw = recalls.recalls();
    let n = raw.len() as f64;

    let arithmetic_mean = raw.iter().sum::<f64>() / n;
    let lowest_recall = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let zero_substituted = raw.iter().any(|&r| r == 0.0);

    let mut log_sum = 0.0;
    let mut reciprocal_sum = 0.0;
    for &r in raw {
        let r = if r == 0.0 { epsilon } else { r };
        log_sum += r.ln();
        reciprocal_sum += 1.0 / r;
    }

    MetricsReport {
        arithmetic_mean,
        geometric_mean: (log_sum / n).exp(),
        harmonic_mean: n / reciprocal_sum,
        lowest_recall,
        epsilon_used: epsilon,
        zero_substituted,
        subset_means: None,
    }
}

/// Mean recall within each training-frequency bucket: Many holds classes
/// with more than 100 training samples, Few those with fewer than 20, and
/// Medium the rest (boundaries 100 and 20 are Medium).
pub fn subset_report(recalls: &RecallVector, train_counts: &ClassCounts) -> Result<SubsetMeans> {
    if recalls.len() != train_counts.num_classes() {
        return Err(Error::invalid_argument(format!(
            "{} recalls vs {} class counts",
            recalls.len(),
            train_counts.num_classes()
        )));
    }
    let mut sums = [0.0f64; 3];
    let mut sizes = [0usize; 3];
    for (&recall, &count) in recalls.recalls().iter().zip(train_counts.counts()) {
        let bucket = if count > 100 {
            0
        } else if count < 20 {
            2
        } else {
            1
        };
        sums[bucket] += recall;
        sizes[bucket] += 1;
    }
    let mean = |b: usize| (sizes[b] > 0).then(|| sums[b] / sizes[b] as f64);
    Ok(SubsetMeans {
        many: mean(0),
        medium: mean(1),
        few: mean(2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn recall_of_perfect_predictions_is_all_ones() {
        let labels = vec![0, 1, 2, 0, 1, 2];
        let r = per_class_recall(&labels, &labels, 3).unwrap();
        assert_eq!(r.recalls(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn recall_counts_per_class_hits() {
        let r = per_class_recall(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(r.recalls(), &[0.5, 1.0]);
    }

    #[test]
    fn collapsed_predictor_has_zero_tail_recall() {
        let r = per_class_recall(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(r.recalls(), &[1.0, 0.0]);
    }

    #[test]
    fn recall_requires_every_class_in_the_test_set() {
        assert!(matches!(
            per_class_recall(&[0, 0], &[0, 0], 2),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn summarize_matches_hand_evaluation() {
        let r = RecallVector::new(vec![0.01, 0.99]).unwrap();
        let report = summarize(&r, DEFAULT_EPSILON);
        assert_eq!(report.arithmetic_mean, 0.5);
        assert!((report.harmonic_mean - 0.0198).abs() < 1e-6);
        assert!((report.geometric_mean - 0.099498743710662).abs() < 1e-6);
        assert_eq!(report.lowest_recall, 0.01);
        assert!(!report.zero_substituted);
    }

    #[test]
    fn summarize_collapses_for_equal_recalls() {
        for r in [0.25, 0.5, 1.0] {
            let v = RecallVector::new(vec![r; 7]).unwrap();
            let report = summarize(&v, DEFAULT_EPSILON);
            assert!((report.arithmetic_mean - r).abs() < 1e-12);
            assert!((report.geometric_mean - r).abs() < 1e-12);
            assert!((report.harmonic_mean - r).abs() < 1e-12);
        }
    }

    #[test]
    fn summarize_substitutes_zeros_only_for_gm_and_hm() {
        let v = RecallVector::new(vec![0.0, 0.5]).unwrap();
        let report = summarize(&v, 1e-3);
        assert!(report.zero_substituted);
        assert_eq!(report.lowest_recall, 0.0);
        assert_eq!(report.arithmetic_mean, 0.25);
        assert!((report.geometric_mean - 0.022360679774997897).abs() < 1e-12);
        assert!((report.harmonic_mean - 0.001996007984031936).abs() < 1e-12);
    }

    #[test]
    fn summarize_without_zeros_is_independent_of_epsilon() {
        let v = RecallVector::new(vec![0.3, 0.8, 0.55]).unwrap();
        let a = summarize(&v, 1e-3);
        let b = summarize(&v, 0.5);
        assert_eq!(a.geometric_mean, b.geometric_mean);
        assert_eq!(a.harmonic_mean, b.harmonic_mean);
    }

    #[test]
    fn mean_chain_holds_on_substituted_vector() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        for _ in 0..500 {
            let n = rng.random_range(1..40);
            let recalls: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random_range(0..10) == 0 {
                        0.0
                    } else {
                        rng.random_range(0.0..1.0)
                    }
                })
                .collect();
            let v = RecallVector::new(recalls.clone()).unwrap();
            let report = summarize(&v, DEFAULT_EPSILON);
            let substituted_am = recalls
                .iter()
                .map(|&r| if r == 0.0 { DEFAULT_EPSILON } else { r })
                .sum::<f64>()
                / n as f64;
            assert!(report.harmonic_mean <= report.geometric_mean + 1e-12);
            assert!(report.geometric_mean <= substituted_am + 1e-12);
        }
    }

    #[test]
    fn summaries_are_permutation_invariant() {
        let v = RecallVector::new(vec![0.9, 0.1, 0.5, 0.0]).unwrap();
        let w = RecallVector::new(vec![0.0, 0.5, 0.9, 0.1]).unwrap();
        let a = summarize(&v, DEFAULT_EPSILON);
        let b = summarize(&w, DEFAULT_EPSILON);
        assert_eq!(a.arithmetic_mean, b.arithmetic_mean);
        assert_eq!(a.geometric_mean, b.geometric_mean);
        assert_eq!(a.harmonic_mean, b.harmonic_mean);
        assert_eq!(a.lowest_recall, b.lowest_recall);
    }

    #[test]
    fn accuracy_equals_mean_recall_on_balanced_labels() {
        let labels = vec![0, 0, 0, 1, 1, 1, 2, 2, 2];
        let preds = vec![0, 0, 1, 1, 1, 0, 2, 2, 2];
        let acc = overall_accuracy(&preds, &labels).unwrap();
        let recall = per_class_recall(&preds, &labels, 3).unwrap();
        let am = recall.recalls().iter().sum::<f64>() / 3.0;
        assert!((acc - am).abs() < 1e-12);
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(overall_accuracy(&[1, 2], &[1, 2]).unwrap(), 1.0);
        assert_eq!(overall_accuracy(&[1, 0], &[1, 2]).unwrap(), 0.5);
    }

    #[test]
    fn subset_report_buckets_by_training_count() {
        let recalls = RecallVector::new(vec![0.9, 0.6, 0.3]).unwrap();
        let counts = ClassCounts::new(vec![500, 50, 5]);
        let s = subset_report(&recalls, &counts).unwrap();
        assert_eq!(s.many, Some(0.9));
        assert_eq!(s.medium, Some(0.6));
        assert_eq!(s.few, Some(0.3));
    }

    #[test]
    fn subset_boundaries_are_medium() {
        let recalls = RecallVector::new(vec![0.4, 0.8]).unwrap();
        let counts = ClassCounts::new(vec![100, 20]);
        let s = subset_report(&recalls, &counts).unwrap();
        assert_eq!(s.many, None);
        assert_eq!(s.few, None);
        assert!((s.medium.unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn all_head_classes_leave_other_buckets_absent() {
        let recalls = RecallVector::new(vec![0.5, 0.7]).unwrap();
        let counts = ClassCounts::new(vec![500, 500]);
        let s = subset_report(&recalls, &counts).unwrap();
        assert!((s.many.unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(s.medium, None);
        assert_eq!(s.few, None);
    }

    #[test]
    fn report_serializes_to_flat_json_and_csv() {
        let mut report = summarize(
            &RecallVector::new(vec![0.0, 0.5]).unwrap(),
            DEFAULT_EPSILON,
        );
        report.subset_means = Some(SubsetMeans {
            many: Some(0.25),
            medium: None,
            few: Some(0.5),
        });
        let json = report.to_json();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["arithmetic_mean"], 0.25);
        assert_eq!(parsed["many"], 0.25);
        assert!(parsed.get("medium").is_none());
        assert_eq!(parsed["zero_substituted"], true);

        let row = report.to_csv_row();
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 9);
        assert_eq!(cells[0], "0.25");
        assert_eq!(cells[5], "true");
        assert_eq!(cells[7], "");

        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.arithmetic_mean, report.arithmetic_mean);
    }
}
