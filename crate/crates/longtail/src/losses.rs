//! Classification losses: plain and re-weighted softmax, cross entropy, the
//! balanced-softmax cross entropy (BSCE), and the geometric mean loss (GML).
//!
//! The GML drives the classifier re-training stage. For a mini-batch it
//! averages the true-class probability within each class that appears in the
//! batch,
//!
//! ```text
//! p_bar[c] = mean over batch samples of class c of p[i][y[i]]
//! ```
//!
//! and takes the negative mean log across those classes,
//!
//! ```text
//! loss = -(1/P) * sum over present classes c of ln(p_bar[c])
//! ```
//!
//! so `exp(-loss)` is exactly the geometric mean of the per-class batch
//! probabilities. Head and tail classes contribute one term each regardless
//! of how many samples they have, which is what pushes up the worst
//! categories.
//!
//! Under re-weighting, probabilities come from a softmax whose exponentials
//! are scaled by the training-set class frequencies,
//!
//! ```text
//! p[i][j] = N[j] * exp(o[i][j]) / sum_c N[c] * exp(o[i][c])
//! ```
//!
//! which corrects the label-prior shift between the imbalanced training set
//! and a balanced test set. All losses are computed with per-row max-shift
//! stabilization; the frequency scaling folds in as a log-count bias on the
//! logits.

use std::collections::BTreeMap;

use crate::dataset::ClassCounts;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Floor applied to per-class average probabilities before the logarithm.
pub const CLASS_PROB_FLOOR: f64 = 1e-12;

/// Row-stochastic class probabilities for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchProbabilities<S> {
    probs: Matrix<S>,
}

impl<S: Scalar> BatchProbabilities<S> {
    pub(crate) fn from_matrix(probs: Matrix<S>) -> Self {
        Self { probs }
    }

    pub fn probs(&self) -> &Matrix<S> {
        &self.probs
    }

    pub fn into_matrix(self) -> Matrix<S> {
        self.probs
    }
}

/// Mean true-class probability per class present in a batch, keyed by class
/// index. Classes without samples in the batch are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBatchAverages<S> {
    values: BTreeMap<usize, S>,
}

impl<S: Scalar> ClassBatchAverages<S> {
    pub fn get(&self, class: usize) -> Option<S> {
        self.values.get(&class).copied()
    }

    pub fn present_classes(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, S)> + '_ {
        self.values.iter().map(|(&c, &v)| (c, v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Plain row-wise softmax with max-shift stabilization.
pub fn softmax<S: Scalar>(logits: &Matrix<S>) -> BatchProbabilities<S> {
    BatchProbabilities::from_matrix(softmax_rows(logits, None))
}

/// Softmax with exponentials scaled by training-set class frequencies.
///
/// Every class count must be at least 1; the scaling is applied in the log
/// domain, where a zero count has no finite representation.
pub fn reweighted_softmax<S: Scalar>(
    logits: &Matrix<S>,
    counts: &ClassCounts,
) -> Result<BatchProbabilities<S>> {
    let bias = log_count_bias(logits.cols(), counts)?;
    Ok(BatchProbabilities::from_matrix(softmax_rows(
        logits,
        Some(&bias),
    )))
}

/// The geometric mean loss and its gradient with respect to the logits.
///
/// Returns the loss, `d loss / d logits`, and the per-class batch averages
/// the loss was computed from. With `reweight` set, probabilities come from
/// [`reweighted_softmax`] under the given training-set counts; otherwise from
/// the plain softmax and `counts` is not consulted.
pub fn gml_loss_and_grad<S: Scalar>(
    logits: &Matrix<S>,
    labels: &[usize],
    counts: &ClassCounts,
    reweight: bool,
) -> Result<(S, Matrix<S>, ClassBatchAverages<S>)> {
    validate_batch(logits, labels)?;
    let probs = if reweight {
        reweighted_softmax(logits, counts)?.into_matrix()
    } else {
        softmax_rows(logits, None)
    };

    // In-batch class membership; the per-class averages use the number of
    // samples from that class in this batch, not the dataset-level counts.
    let mut batch_count: BTreeMap<usize, usize> = BTreeMap::new();
    let mut prob_sum: BTreeMap<usize, S> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        *batch_count.entry(y).or_insert(0) += 1;
        *prob_sum.entry(y).or_insert_with(S::zero) += probs.get(i, y);
    }

    let mut averages = BTreeMap::new();
    for (&class, &sum) in &prob_sum {
        averages.insert(class, sum / S::of(batch_count[&class] as f64));
    }

    let present = S::of(averages.len() as f64);
    let floor = S::of(CLASS_PROB_FLOOR);
    let mut loss = S::zero();
    for &p_bar in averages.values() {
        loss -= p_bar.max(floor).ln();
    }
    loss = loss / present;

    // d loss / d p_bar[c] = -1 / (P * p_bar[c]) when above the floor, zero
    // when the floor clamps; then through the softmax,
    // d p[i][y] / d o[i][j] = p[i][y] * (1[j == y] - p[i][j]).
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    for (i, &y) in labels.iter().enumerate() {
        let p_bar = averages[&y];
        if p_bar <= floor {
            continue;
        }
        let coeff = -(S::one() / (present * S::of(batch_count[&y] as f64) * p_bar));
        let q = probs.get(i, y);
        let grad_row = grad.row_mut(i);
        let prob_row = probs.row(i);
        for j in 0..prob_row.len() {
            let indicator = if j == y { S::one() } else { S::zero() };
            grad_row[j] = coeff * q * (indicator - prob_row[j]);
        }
    }

    Ok((loss, grad, ClassBatchAverages { values: averages }))
}

/// Mean cross entropy under the plain softmax, with its gradient.
pub fn ce_loss_and_grad<S: Scalar>(logits: &Matrix<S>, labels: &[usize]) -> Result<(S, Matrix<S>)> {
    validate_batch(logits, labels)?;
    let probs = softmax_rows(logits, None);
    Ok(nll_and_grad(&probs, labels))
}

/// Mean cross entropy under the re-weighted softmax (balanced softmax cross
/// entropy), with its gradient.
pub fn bsce_loss_and_grad<S: Scalar>(
    logits: &Matrix<S>,
    labels: &[usize],
    counts: &ClassCounts,
) -> Result<(S, Matrix<S>)> {
    validate_batch(logits, labels)?;
    let probs = reweighted_softmax(logits, counts)?.into_matrix();
    Ok(nll_and_grad(&probs, labels))
}

/// Mean negative log likelihood of the true class plus the standard
/// `(p - onehot) / B` gradient, shared by the two cross-entropy variants.
fn nll_and_grad<S: Scalar>(probs: &Matrix<S>, labels: &[usize]) -> (S, Matrix<S>) {
    let batch = S::of(labels.len() as f64);
    let mut loss = S::zero();
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    for (i, &y) in labels.iter().enumerate() {
        loss -= probs.get(i, y).ln();
        let grad_row = grad.row_mut(i);
        let prob_row = probs.row(i);
        for j in 0..prob_row.len() {
            let indicator = if j == y { S::one() } else { S::zero() };
            grad_row[j] = (prob_row[j] - indicator) / batch;
        }
    }
    (loss / batch, grad)
}

pub(crate) fn softmax_rows<S: Scalar>(logits: &Matrix<S>, bias: Option<&[S]>) -> Matrix<S> {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let in_row = logits.row(r);
        let out_row = out.row_mut(r);
        let mut max = S::neg_infinity();
        for j in 0..in_row.len() {
            let z = match bias {
                Some(b) => in_row[j] + b[j],
                None => in_row[j],
            };
            out_row[j] = z;
            if z > max {
                max = z;
            }
        }
        let mut sum = S::zero();
        for v in out_row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in out_row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

fn log_count_bias<S: Scalar>(num_classes: usize, counts: &ClassCounts) -> Result<Vec<S>> {
    if counts.num_classes() != num_classes {
        return Err(Error::invalid_argument(format!(
            "class counts cover {} classes but logits have {}",
            counts.num_classes(),
            num_classes
        )));
    }
    counts
        .counts()
        .iter()
        .map(|&n| {
            if n == 0 {
                Err(Error::invalid_argument(
                    "re-weighting requires every class count >= 1",
                ))
            } else {
                Ok(S::of((n as f64).ln()))
            }
        })
        .collect()
}

fn validate_batch<S: Scalar>(logits: &Matrix<S>, labels: &[usize]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::invalid_argument("batch must be non-empty"));
    }
    if logits.rows() != labels.len() {
        return Err(Error::invalid_argument(format!(
            "logits have {} rows but batch has {} labels",
            logits.rows(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= logits.cols()) {
        return Err(Error::invalid_argument(format!(
            "label {bad} out of range for {} classes",
            logits.cols()
        )));
    }
    Ok(())
}
