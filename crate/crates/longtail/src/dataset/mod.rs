//! Synthetic long-tailed datasets, feature-file persistence, and batching.
//!
//! Long-tailed training sets are described by a [`LongTailProfile`]: the
//! per-class sample counts, most frequent class first. Profiles come from
//! either an exponential decay (head count and imbalance ratio) or a
//! Pareto-shaped decay (head count and power), and are materialized into
//! feature data by sampling a Gaussian mixture with one component per class.

mod io;

pub use io::{read_features, read_features_csv, write_features, FEATURE_FORMAT_VERSION, FEATURE_MAGIC};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Per-class training-set sample counts, non-increasing across class index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LongTailProfile {
    counts: Vec<usize>,
}

impl LongTailProfile {
    /// Validates that counts are non-empty, non-increasing, and at least 1.
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid_argument("profile needs at least one class"));
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::invalid_argument("every profile count must be >= 1"));
        }
        if counts.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid_argument(
                "profile counts must be non-increasing across class index",
            ));
        }
        Ok(Self { counts })
    }

    /// A balanced profile: every class gets `count` samples.
    pub fn uniform(num_classes: usize, count: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::invalid_argument("num_classes must be >= 1"));
        }
        Self::new(vec![count; num_classes])
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Head count divided by tail count.
    pub fn imbalance_ratio(&self) -> f64 {
        self.counts[0] as f64 / self.counts[self.counts.len() - 1] as f64
    }
}

/// Exponentially decaying profile: class `i` gets
/// `floor(head_count * ratio^(-i/(C-1)))` samples, clamped below at 1, so the
/// head class has exactly `head_count` samples and the tail class has
/// `head_count / ratio` when that divides evenly.
pub fn exponential_profile(
    num_classes: usize,
    head_count: usize,
    imbalance_ratio: f64,
) -> Result<LongTailProfile> {
    if num_classes == 0 {
        return Err(Error::invalid_argument("num_classes must be >= 1"));
    }
    if head_count == 0 {
        return Err(Error::invalid_argument("head_count must be >= 1"));
    }
    if !imbalance_ratio.is_finite() || imbalance_ratio < 1.0 {
        return Err(Error::invalid_argument(format!(
            "imbalance_ratio must be a finite value >= 1, got {imbalance_ratio}"
        )));
    }

    let c = num_classes;
    let head = head_count as f64;
    let mut counts = Vec::with_capacity(c);
    for i in 0..c {
        let raw = if i == 0 {
            head
        } else if i == c - 1 {
            // Exact division at the tail; `powf` can land one ulp below an
            // integer quotient and flooring would then lose a whole sample.
            head / imbalance_ratio
        } else {
            head * imbalance_ratio.powf(-(i as f64) / (c as f64 - 1.0))
        };
        counts.push((raw.floor() as usize).max(1));
    }
    LongTailProfile::new(counts)
}

/// Pareto-shaped profile: class `i` gets
/// `max(1, round(max_count * (1 + i*s)^(-alpha)))` samples, where the scale
/// `s` (see [`pareto_scale`]) is set so the tail class lands at one sample.
pub fn pareto_profile(num_classes: usize, max_count: usize, alpha: f64) -> Result<LongTailProfile> {
    if num_classes == 0 {
        return Err(Error::invalid_argument("num_classes must be >= 1"));
    }
    if max_count == 0 {
        return Err(Error::invalid_argument("max_count must be >= 1"));
    }
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::invalid_argument(format!(
            "alpha must be a finite value > 0, got {alpha}"
        )));
    }

    let s = pareto_scale(num_classes, max_count, alpha);
    let max = max_count as f64;
    let counts = (0..num_classes)
        .map(|i| {
            let raw = max * (1.0 + i as f64 * s).powf(-alpha);
            (raw.round() as usize).max(1)
        })
        .collect();
    LongTailProfile::new(counts)
}

/// Scale parameter used by [`pareto_profile`]:
/// `s = (max_count^(1/alpha) - 1) / (num_classes - 1)`, chosen so the decay
/// reaches a single sample at the tail class. Zero for a single class.
pub fn pareto_scale(num_classes: usize, max_count: usize, alpha: f64) -> f64 {
    if num_classes <= 1 {
        return 0.0;
    }
    ((max_count as f64).powf(1.0 / alpha) - 1.0) / (num_classes as f64 - 1.0)
}

/// Feature vectors with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatureSet<S> {
    features: Matrix<S>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl<S: Scalar> LabeledFeatureSet<S> {
    pub fn new(features: Matrix<S>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::invalid_argument(format!(
                "feature rows ({}) and label count ({}) differ",
                features.rows(),
                labels.len()
            )));
        }
        if num_classes == 0 {
            return Err(Error::invalid_argument("num_classes must be >= 1"));
        }
        if features.cols() == 0 {
            return Err(Error::invalid_argument("feature dimension must be >= 1"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::invalid_argument(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn features(&self) -> &Matrix<S> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature dimensionality.
    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Gather a mini-batch of (features, labels) by sample index.
    pub fn select(&self, indices: &[usize]) -> (Matrix<S>, Vec<usize>) {
        let feats = self.features.select_rows(indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        (feats, labels)
    }
}

/// Per-class sample frequencies of a training set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts {
    counts: Vec<usize>,
}

impl ClassCounts {
    pub fn new(counts: Vec<usize>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Count how many samples of each class the dataset holds.
pub fn count_classes<S: Scalar>(dataset: &LabeledFeatureSet<S>) -> ClassCounts {
    let mut counts = vec![0usize; dataset.num_classes()];
    for &label in dataset.labels() {
        counts[label] += 1;
    }
    ClassCounts::new(counts)
}

/// Deterministic class means for Gaussian synthesis: one unit direction per
/// class, drawn from the seeded generator and scaled by `separation`.
pub fn class_means<S: Scalar>(
    num_classes: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Matrix<S>> {
    validate_synthesis_params(num_classes, dim, separation)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Ok(draw_means(&mut rng, num_classes, dim, separation))
}

/// Sample a Gaussian-mixture dataset: class `c` contributes `profile[c]`
/// points from an isotropic unit-variance Gaussian centered on its mean.
/// Labels are grouped contiguously by class. Bit-identical for equal inputs.
pub fn synthesize_gaussian<S: Scalar>(
    profile: &LongTailProfile,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<LabeledFeatureSet<S>> {
    validate_synthesis_params(profile.num_classes(), dim, separation)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let means = draw_means(&mut rng, profile.num_classes(), dim, separation);
    sample_around_means(&mut rng, &means, profile)
}

/// Like [`synthesize_gaussian`] but with externally supplied means, so that
/// several datasets (e.g. an imbalanced train split and a balanced test
/// split) can share one mixture while using independent noise seeds.
pub fn synthesize_from_means<S: Scalar>(
    means: &Matrix<S>,
    profile: &LongTailProfile,
    noise_seed: u64,
) -> Result<LabeledFeatureSet<S>> {
    if means.rows() != profile.num_classes() {
        return Err(Error::invalid_argument(format!(
            "means has {} rows but profile has {} classes",
            means.rows(),
            profile.num_classes()
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(noise_seed);
    sample_around_means(&mut rng, means, profile)
}

fn validate_synthesis_params(num_classes: usize, dim: usize, separation: f64) -> Result<()> {
    if num_classes == 0 {
        return Err(Error::invalid_argument("num_classes must be >= 1"));
    }
    if dim == 0 {
        return Err(Error::invalid_argument("dim must be >= 1"));
    }
    if !separation.is_finite() || separation <= 0.0 {
        return Err(Error::invalid_argument(format!(
            "separation must be a finite value > 0, got {separation}"
        )));
    }
    Ok(())
}

fn draw_means<S: Scalar>(
    rng: &mut ChaCha12Rng,
    num_classes: usize,
    dim: usize,
    separation: f64,
) -> Matrix<S> {
    let mut means = Matrix::zeros(num_classes, dim);
    for c in 0..num_classes {
        let mut direction = vec![0.0f64; dim];
        let mut norm_sq = 0.0;
        for d in direction.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *d = z;
            norm_sq += z * z;
        }
        let norm = norm_sq.sqrt().max(f64::MIN_POSITIVE);
        let row = means.row_mut(c);
        for (dst, d) in row.iter_mut().zip(&direction) {
            *dst = S::of(separation * d / norm);
        }
    }
    means
}

fn sample_around_means<S: Scalar>(
    rng: &mut ChaCha12Rng,
    means: &Matrix<S>,
    profile: &LongTailProfile,
) -> Result<LabeledFeatureSet<S>> {
    let dim = means.cols();
    let total = profile.total();
    let mut features = Matrix::zeros(total, dim);
    let mut labels = Vec::with_capacity(total);
    let mut row = 0;
    for (class, &count) in profile.counts().iter().enumerate() {
        let mean = means.row(class).to_vec();
        for _ in 0..count {
            let out = features.row_mut(row);
            for (j, m) in mean.iter().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                out[j] = *m + S::of(z);
            }
            labels.push(class);
            row += 1;
        }
    }
    LabeledFeatureSet::new(features, labels, profile.num_classes())
}

/// Mini-batch construction strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchStrategy {
    /// A seeded permutation of all indices split into consecutive batches;
    /// the last batch may be short.
    Shuffled,
    /// Each entry drawn by first sampling a class uniformly (among classes
    /// that have samples), then a sample uniformly within it, with
    /// replacement. `ceil(N / batch_size)` full batches per epoch.
    ClassBalanced,
}

/// Build one epoch worth of index batches.
pub fn make_batches<S: Scalar>(
    dataset: &LabeledFeatureSet<S>,
    batch_size: usize,
    strategy: BatchStrategy,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if dataset.is_empty() {
        return Err(Error::invalid_argument("cannot batch an empty dataset"));
    }
    if batch_size == 0 {
        return Err(Error::invalid_argument("batch_size must be >= 1"));
    }

    let n = dataset.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    match strategy {
        BatchStrategy::Shuffled => {
            let mut indices: Vec<usize> = (0..n).collect();
            indices.shuffle(&mut rng);
            Ok(indices.chunks(batch_size).map(|c| c.to_vec()).collect())
        }
        BatchStrategy::ClassBalanced => {
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes()];
            for (i, &label) in dataset.labels().iter().enumerate() {
                members[label].push(i);
            }
            let present: Vec<&Vec<usize>> = members.iter().filter(|m| !m.is_empty()).collect();
            let num_batches = n.div_ceil(batch_size);
            let mut batches = Vec::with_capacity(num_batches);
            for _ in 0..num_batches {
                let mut batch = Vec::with_capacity(batch_size);
                for _ in 0..batch_size {
                    let class = present[rng.random_range(0..present.len())];
                    batch.push(class[rng.random_range(0..class.len())]);
                }
                batches.push(batch);
            }
            Ok(batches)
        }
    }
}
