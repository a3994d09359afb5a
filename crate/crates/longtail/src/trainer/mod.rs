//! SGD training: the pre-training stage, the frozen-backbone fine-tuning
//! stage, and checkpoint persistence.
//!
//! The staged pipeline:
//!
//! 1. [`pretrain`] — randomly initialize backbone and head, train both from
//!    scratch (cross entropy by default).
//! 2. [`finetune`] — freeze the backbone, keep the trained head as the "old"
//!    head, re-initialize a fresh head, and train only that head (geometric
//!    mean loss by default). The backbone comes out bit-identical.
//!
//! Every run is a pure function of (dataset, config): all randomness flows
//! from a single seeded generator, so identical inputs give bit-identical
//! checkpoints. Each epoch emits `epoch=<n> lr=<x> loss=<y>` on stdout.

mod checkpoint;

pub use checkpoint::{
    checkpoint_bytes, load_checkpoint, save_checkpoint, CHECKPOINT_FORMAT_VERSION,
    CHECKPOINT_MAGIC,
};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::dataset::{count_classes, make_batches, BatchStrategy, ClassCounts, LabeledFeatureSet};
use crate::error::{Error, Result};
use crate::losses;
use crate::matrix::Matrix;
use crate::model::{backward_through, LinearHead, MlpBackbone, ModelBundle};
use crate::scalar::Scalar;

/// Which loss drives the parameter updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Plain cross entropy.
    Ce,
    /// Balanced softmax cross entropy.
    Bsce,
    /// Geometric mean loss with frequency re-weighting.
    Gml,
    /// Geometric mean loss without re-weighting (ablation variant).
    GmlUnweighted,
}

/// Pipeline stage a checkpoint was produced by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Pretrained,
    Finetuned,
}

/// Training hyperparameters.
///
/// Defaults follow the reference recipe for the small-image configuration:
/// 40 epochs of SGD at batch size 128, initial learning rate 0.05 decayed by
/// a factor of 0.2 at epoch 10, momentum 0.9, weight decay 5e-4.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Width of the backbone's hidden layer (used when a backbone is built).
    pub hidden_dim: usize,
    pub initial_lr: f64,
    /// Multiplier applied to the learning rate from `lr_decay_epoch` onward.
    pub lr_decay_factor: f64,
    pub lr_decay_epoch: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub loss_kind: LossKind,
    pub sampler: BatchStrategy,
    pub freeze_backbone: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 128,
            hidden_dim: 64,
            initial_lr: 0.05,
            lr_decay_factor: 0.2,
            lr_decay_epoch: 10,
            momentum: 0.9,
            weight_decay: 5e-4,
            seed: 0,
            loss_kind: LossKind::Ce,
            sampler: BatchStrategy::Shuffled,
            freeze_backbone: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid_argument("epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid_argument("batch_size must be >= 1"));
        }
        if self.hidden_dim == 0 {
            return Err(Error::invalid_argument("hidden_dim must be >= 1"));
        }
        if !self.initial_lr.is_finite() || self.initial_lr <= 0.0 {
            return Err(Error::invalid_argument("initial_lr must be > 0"));
        }
        if !self.lr_decay_factor.is_finite()
            || self.lr_decay_factor <= 0.0
            || self.lr_decay_factor > 1.0
        {
            return Err(Error::invalid_argument("lr_decay_factor must be in (0, 1]"));
        }
        if !self.momentum.is_finite() || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid_argument("momentum must be in [0, 1)"));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::invalid_argument("weight_decay must be >= 0"));
        }
        Ok(())
    }
}

/// Step schedule: the initial rate before `lr_decay_epoch`, the decayed rate
/// at and after it.
pub fn lr_at_epoch(config: &TrainConfig, epoch: usize) -> f64 {
    if epoch < config.lr_decay_epoch {
        config.initial_lr
    } else {
        config.initial_lr * config.lr_decay_factor
    }
}

/// One classical-momentum SGD step with coupled weight decay:
///
/// ```text
/// v <- momentum * v + (grad + weight_decay * param)
/// param <- param - lr * v
/// ```
pub fn sgd_update<S: Scalar>(
    params: &mut [S],
    grads: &[S],
    velocity: &mut [S],
    lr: S,
    momentum: S,
    weight_decay: S,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(Error::invalid_argument(format!(
            "sgd_update shapes disagree: {} params, {} grads, {} velocity entries",
            params.len(),
            grads.len(),
            velocity.len()
        )));
    }
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v + (g + weight_decay * *p);
        *p = *p - lr * *v;
    }
    Ok(())
}

/// Momentum buffers, one per parameter tensor, zero-initialized.
#[derive(Debug, Clone)]
pub struct SgdState<S> {
    buffers: Vec<Vec<S>>,
}

impl<S: Scalar> SgdState<S> {
    pub fn zeros(tensor_sizes: &[usize]) -> Self {
        Self {
            buffers: tensor_sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
        }
    }

    pub fn buffer_mut(&mut self, tensor: usize) -> &mut [S] {
        &mut self.buffers[tensor]
    }
}

/// A serializable snapshot of one pipeline stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<S> {
    pub bundle: ModelBundle<S>,
    pub config: TrainConfig,
    pub stage: Stage,
}

/// Stage 1: train backbone and head from scratch.
///
/// The loss defaults to cross entropy in the standard recipe, but any
/// [`LossKind`] is accepted (training from scratch under the geometric mean
/// loss is a supported variant).
pub fn pretrain<S: Scalar>(
    dataset: &LabeledFeatureSet<S>,
    config: &TrainConfig,
) -> Result<Checkpoint<S>> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::invalid_argument("cannot train on an empty dataset"));
    }
    let counts = count_classes(dataset);

    let mut seeder = ChaCha12Rng::seed_from_u64(config.seed);
    let backbone_seed = seeder.next_u64();
    let head_seed = seeder.next_u64();

    let mut backbone = MlpBackbone::random(dataset.dim(), config.hidden_dim, backbone_seed);
    let mut head = LinearHead::init(dataset.num_classes(), config.hidden_dim, head_seed);

    run_training(
        &mut backbone,
        &mut head,
        dataset,
        config,
        &counts,
        &mut seeder,
    )?;

    Ok(Checkpoint {
        bundle: ModelBundle::new(backbone, None, head, counts)?,
        config: config.clone(),
        stage: Stage::Pretrained,
    })
}

/// Stages 2-3 of the pipeline: freeze the backbone, keep the pre-trained
/// head as the old head, and train a freshly initialized head.
///
/// Requires a checkpoint tagged [`Stage::Pretrained`] and a config with
/// `freeze_backbone` set. Class counts for re-weighting come from the
/// fine-tuning dataset.
pub fn finetune<S: Scalar>(
    pretrained: &Checkpoint<S>,
    dataset: &LabeledFeatureSet<S>,
    config: &TrainConfig,
) -> Result<Checkpoint<S>> {
    if pretrained.stage != Stage::Pretrained {
        return Err(Error::invalid_state(
            "fine-tuning requires a checkpoint from the pre-training stage",
        ));
    }
    config.validate()?;
    if !config.freeze_backbone {
        return Err(Error::invalid_argument(
            "fine-tuning requires freeze_backbone = true",
        ));
    }
    if dataset.is_empty() {
        return Err(Error::invalid_argument("cannot train on an empty dataset"));
    }
    if dataset.dim() != pretrained.bundle.backbone().input_dim() {
        return Err(Error::invalid_argument(format!(
            "dataset dimension {} does not match backbone input {}",
            dataset.dim(),
            pretrained.bundle.backbone().input_dim()
        )));
    }
    if dataset.num_classes() != pretrained.bundle.num_classes() {
        return Err(Error::invalid_argument(format!(
            "dataset has {} classes but the pre-trained model has {}",
            dataset.num_classes(),
            pretrained.bundle.num_classes()
        )));
    }

    let counts = count_classes(dataset);
    let mut seeder = ChaCha12Rng::seed_from_u64(config.seed);
    let head_seed = seeder.next_u64();

    let mut backbone = pretrained.bundle.backbone().clone();
    let old_head = pretrained.bundle.new_head().clone();
    let mut new_head =
        LinearHead::init(dataset.num_classes(), backbone.hidden_dim(), head_seed);

    run_training(
        &mut backbone,
        &mut new_head,
        dataset,
        config,
        &counts,
        &mut seeder,
    )?;

    Ok(Checkpoint {
        bundle: ModelBundle::new(backbone, Some(old_head), new_head, counts)?,
        config: config.clone(),
        stage: Stage::Finetuned,
    })
}

/// The shared epoch loop. Updates the head always and the backbone only when
/// it has parameters and the config does not freeze it.
fn run_training<S: Scalar>(
    backbone: &mut MlpBackbone<S>,
    head: &mut LinearHead<S>,
    dataset: &LabeledFeatureSet<S>,
    config: &TrainConfig,
    counts: &ClassCounts,
    seeder: &mut ChaCha12Rng,
) -> Result<()> {
    let train_backbone = !config.freeze_backbone && !backbone.is_passthrough();
    let backbone_sizes = match backbone.weight() {
        Some(w) if train_backbone => vec![w.rows() * w.cols(), w.rows()],
        _ => vec![],
    };
    let mut sizes = vec![
        head.num_classes() * head.input_dim(),
        head.num_classes(),
    ];
    sizes.extend(&backbone_sizes);
    let mut sgd = SgdState::zeros(&sizes);

    let momentum = S::of(config.momentum);
    let weight_decay = S::of(config.weight_decay);

    for epoch in 0..config.epochs {
        let lr = lr_at_epoch(config, epoch);
        let lr_s = S::of(lr);
        let epoch_seed = seeder.next_u64();
        let batches = make_batches(dataset, config.batch_size, config.sampler, epoch_seed)?;

        let mut loss_sum = 0.0f64;
        let mut sample_count = 0usize;
        for batch in &batches {
            let (features, labels) = dataset.select(batch);
            let hidden = backbone.forward(&features);
            let logits = head.forward(&hidden);
            let (loss, logit_grad) = batch_loss(config.loss_kind, &logits, &labels, counts)?;
            let grads = backward_through(
                backbone,
                head,
                &features,
                &logit_grad,
                !train_backbone,
            )?;

            sgd_update(
                head.weight_mut().as_mut_slice(),
                grads.head_weight.as_slice(),
                sgd.buffer_mut(0),
                lr_s,
                momentum,
                weight_decay,
            )?;
            sgd_update(
                head.bias_mut(),
                &grads.head_bias,
                sgd.buffer_mut(1),
                lr_s,
                momentum,
                weight_decay,
            )?;
            if let Some(bb) = &grads.backbone {
                sgd_update(
                    backbone.weight_mut().expect("trainable backbone").as_mut_slice(),
                    bb.weight.as_slice(),
                    sgd.buffer_mut(2),
                    lr_s,
                    momentum,
                    weight_decay,
                )?;
                sgd_update(
                    backbone.bias_mut().expect("trainable backbone"),
                    &bb.bias,
                    sgd.buffer_mut(3),
                    lr_s,
                    momentum,
                    weight_decay,
                )?;
            }

            loss_sum += loss.as_f64() * batch.len() as f64;
            sample_count += batch.len();
        }

        let mean_loss = loss_sum / sample_count as f64;
        println!("epoch={epoch} lr={lr} loss={mean_loss}");
    }
    Ok(())
}

fn batch_loss<S: Scalar>(
    kind: LossKind,
    logits: &Matrix<S>,
    labels: &[usize],
    counts: &ClassCounts,
) -> Result<(S, Matrix<S>)> {
    match kind {
        LossKind::Ce => losses::ce_loss_and_grad(logits, labels),
        LossKind::Bsce => losses::bsce_loss_and_grad(logits, labels, counts),
        LossKind::Gml => {
            losses::gml_loss_and_grad(logits, labels, counts, true).map(|(l, g, _)| (l, g))
        }
        LossKind::GmlUnweighted => {
            losses::gml_loss_and_grad(logits, labels, counts, false).map(|(l, g, _)| (l, g))
        }
    }
}
