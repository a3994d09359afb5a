//! Long-tailed classification with classifier re-training and worst-category metrics.
//!
//! Models trained on class-imbalanced data tend to have wildly uneven per-class
//! recall: average accuracy can look fine while the worst categories sit at zero.
//! This crate implements a three-stage pipeline that targets the worst categories
//! directly, together with the evaluation suite needed to see them:
//!
//! 1. **Pre-training** — train a small MLP backbone plus linear head from scratch
//!    with cross entropy (see [`trainer::pretrain`]).
//! 2. **Classifier re-training** — freeze the backbone, re-initialize the head,
//!    and fine-tune it under the geometric mean loss (GML), which maximizes the
//!    geometric mean of per-class batch probabilities instead of the plain
//!    average (see [`losses::gml_loss_and_grad`] and [`trainer::finetune`]).
//! 3. **Optional ensembling** — keep the old head around and average the
//!    temperature-calibrated probabilities of both heads at inference
//!    (see [`ensemble::ensemble_predict`]).
//!
//! Evaluation reports per-class recall and its arithmetic, geometric, and
//! harmonic means plus the lowest recall ([`metrics`]), the quantities that
//! expose left-behind categories.
//!
//! The numeric kernels are generic over the scalar type via [`scalar::Scalar`]
//! (`f32` or `f64`); the crate-root aliases fix the default pipeline precision
//! to `f64`.

pub mod dataset;
pub mod ensemble;
mod error;
pub mod losses;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default scalar type for the end-to-end pipeline.
pub type Real = f64;

/// A feature dataset at the default precision.
pub type FeatureSet = dataset::LabeledFeatureSet<Real>;

/// A trained backbone-plus-heads bundle at the default precision.
pub type Bundle = model::ModelBundle<Real>;

/// A training checkpoint at the default precision.
pub type PipelineCheckpoint = trainer::Checkpoint<Real>;
