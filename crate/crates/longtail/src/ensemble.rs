//! Temperature-calibrated two-head ensembling.
//!
//! The fine-tuned bundle keeps the pre-trained head next to the re-trained
//! one, so inference can average their probabilities. Because the two heads
//! can be calibrated very differently, each is softmaxed with its own
//! temperature first:
//!
//! ```text
//! p = (softmax(o_new / t_new) + softmax(o_old / t_old)) / 2
//! ```
//!
//! Temperatures are hand-tuned or grid-swept; no fitting is involved, so a
//! sweep is just a batch of independent evaluations.

use crate::dataset::LabeledFeatureSet;
use crate::error::{Error, Result};
use crate::losses::{softmax_rows, BatchProbabilities};
use crate::matrix::{argmax, Matrix};
use crate::metrics::{self, MetricsReport};
use crate::model::{HeadKind, ModelBundle};
use crate::scalar::Scalar;

/// Softmax temperatures for the old and new heads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperaturePair<S> {
    t_old: S,
    t_new: S,
}

impl<S: Scalar> TemperaturePair<S> {
    pub fn new(t_old: S, t_new: S) -> Result<Self> {
        for (name, t) in [("t_old", t_old), ("t_new", t_new)] {
            if !(t.is_finite() && t > S::zero()) {
                return Err(Error::invalid_argument(format!(
                    "{name} must be a finite value > 0, got {t}"
                )));
            }
        }
        Ok(Self { t_old, t_new })
    }

    pub fn t_old(&self) -> S {
        self.t_old
    }

    pub fn t_new(&self) -> S {
        self.t_new
    }

    /// The 3x3 grid {1,2,3} x {1,2,3}, old-head temperature varying slowest.
    pub fn default_grid() -> Vec<Self> {
        let ts = [1.0, 2.0, 3.0];
        let mut grid = Vec::with_capacity(9);
        for &t_old in &ts {
            for &t_new in &ts {
                grid.push(Self {
                    t_old: S::of(t_old),
                    t_new: S::of(t_new),
                });
            }
        }
        grid
    }
}

/// Row-wise `softmax(logits / t)`, max-shift stabilized.
pub fn temperature_softmax<S: Scalar>(
    logits: &Matrix<S>,
    temperature: S,
) -> Result<BatchProbabilities<S>> {
    if !(temperature.is_finite() && temperature > S::zero()) {
        return Err(Error::invalid_argument(format!(
            "temperature must be a finite value > 0, got {temperature}"
        )));
    }
    let mut scaled = logits.clone();
    for v in scaled.as_mut_slice() {
        *v /= temperature;
    }
    Ok(BatchProbabilities::from_matrix(softmax_rows(&scaled, None)))
}

/// Average the temperature-softmaxed probabilities of both heads and predict
/// the per-row argmax (ties resolve to the lowest class index).
pub fn ensemble_predict<S: Scalar>(
    logits_old: &Matrix<S>,
    logits_new: &Matrix<S>,
    temps: &TemperaturePair<S>,
) -> Result<(BatchProbabilities<S>, Vec<usize>)> {
    if logits_old.rows() != logits_new.rows() || logits_old.cols() != logits_new.cols() {
        return Err(Error::invalid_argument(format!(
            "head logits disagree on shape: {}x{} vs {}x{}",
            logits_old.rows(),
            logits_old.cols(),
            logits_new.rows(),
            logits_new.cols()
        )));
    }
    let p_old = temperature_softmax(logits_old, temps.t_old)?.into_matrix();
    let p_new = temperature_softmax(logits_new, temps.t_new)?.into_matrix();

    let half = S::of(0.5);
    let mut combined = Matrix::zeros(p_old.rows(), p_old.cols());
    for (out, (a, b)) in combined
        .as_mut_slice()
        .iter_mut()
        .zip(p_new.as_slice().iter().zip(p_old.as_slice()))
    {
        *out = (*a + *b) * half;
    }
    let predictions = combined.row_iter().map(argmax).collect();
    Ok((BatchProbabilities::from_matrix(combined), predictions))
}

/// Evaluate the two-head ensemble over a grid of temperature pairs.
///
/// Each pair is scored independently on the dataset with the default metric
/// epsilon; the result preserves grid order.
pub fn sweep_temperatures<S: Scalar>(
    bundle: &ModelBundle<S>,
    dataset: &LabeledFeatureSet<S>,
    grid: &[TemperaturePair<S>],
) -> Result<Vec<(TemperaturePair<S>, MetricsReport)>> {
    if !bundle.has_old_head() {
        return Err(Error::invalid_state(
            "temperature sweep needs a bundle with both heads",
        ));
    }
    let logits_old = bundle.forward(HeadKind::Old, dataset.features())?;
    let logits_new = bundle.forward(HeadKind::New, dataset.features())?;

    let mut rows = Vec::with_capacity(grid.len());
    for &pair in grid {
        let (_, predictions) = ensemble_predict(&logits_old, &logits_new, &pair)?;
        let recalls =
            metrics::per_class_recall(&predictions, dataset.labels(), dataset.num_classes())?;
        let report = metrics::summarize(&recalls, metrics::DEFAULT_EPSILON);
        rows.push((pair, report));
    }
    Ok(rows)
}

/// CSV serialization of a sweep table: `t_old,t_new,accuracy,gmean,hmean,lowest`.
pub fn sweep_to_csv<S: Scalar>(rows: &[(TemperaturePair<S>, MetricsReport)]) -> String {
    let mut out = String::from("t_old,t_new,accuracy,gmean,hmean,lowest\n");
    for (pair, report) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            pair.t_old().as_f64(),
            pair.t_new().as_f64(),
            report.arithmetic_mean,
            report.geometric_mean,
            report.harmonic_mean,
            report.lowest_recall,
        ));
    }
    out
}
