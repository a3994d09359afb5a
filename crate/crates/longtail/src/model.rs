//! A one-hidden-layer MLP backbone with linear classification heads.
//!
//! The backbone is the trainable feature extractor that the re-training stage
//! freezes; a passthrough variant (identity, no parameters) exists for linear
//! probes. Bundles carry up to two heads: the pre-trained head and the
//! re-trained one, so both stay usable at inference.
//!
//! Forward and backward are pure with respect to the bundle; the trainer owns
//! all parameter mutation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::dataset::ClassCounts;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Feature extractor: either `relu(W1 x + b1)` or the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpBackbone<S> {
    input_dim: usize,
    layer: Option<HiddenLayer<S>>,
}

#[derive(Debug, Clone, PartialEq)]
struct HiddenLayer<S> {
    weight: Matrix<S>, // hidden x input
    bias: Vec<S>,      // hidden
}

impl<S: Scalar> MlpBackbone<S> {
    /// Identity backbone; hidden dimension equals the input dimension.
    pub fn passthrough(input_dim: usize) -> Self {
        Self {
            input_dim,
            layer: None,
        }
    }

    /// Randomly initialized hidden layer: weights uniform in
    /// `[-1/sqrt(D), 1/sqrt(D)]`, biases zero, deterministic in the seed.
    pub fn random(input_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let bound = 1.0 / (input_dim as f64).sqrt();
        let data = (0..hidden_dim * input_dim)
            .map(|_| S::of(rng.random_range(-bound..=bound)))
            .collect();
        Self {
            input_dim,
            layer: Some(HiddenLayer {
                weight: Matrix::from_vec(hidden_dim, input_dim, data),
                bias: vec![S::zero(); hidden_dim],
            }),
        }
    }

    /// Rebuild a hidden-layer backbone from its tensors.
    pub fn from_parts(weight: Matrix<S>, bias: Vec<S>) -> Result<Self> {
        if weight.rows() != bias.len() {
            return Err(Error::invalid_argument(format!(
                "backbone weight has {} rows but bias has {} entries",
                weight.rows(),
                bias.len()
            )));
        }
        Ok(Self {
            input_dim: weight.cols(),
            layer: Some(HiddenLayer { weight, bias }),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        match &self.layer {
            Some(layer) => layer.weight.rows(),
            None => self.input_dim,
        }
    }

    pub fn is_passthrough(&self) -> bool {
        self.layer.is_none()
    }

    pub fn weight(&self) -> Option<&Matrix<S>> {
        self.layer.as_ref().map(|l| &l.weight)
    }

    pub fn bias(&self) -> Option<&[S]> {
        self.layer.as_ref().map(|l| l.bias.as_slice())
    }

    pub fn weight_mut(&mut self) -> Option<&mut Matrix<S>> {
        self.layer.as_mut().map(|l| &mut l.weight)
    }

    pub fn bias_mut(&mut self) -> Option<&mut [S]> {
        self.layer.as_mut().map(|l| l.bias.as_mut_slice())
    }

    /// Hidden activations for a batch (rows are samples).
    pub fn forward(&self, features: &Matrix<S>) -> Matrix<S> {
        self.hidden_states(features).1
    }

    /// Pre-activation (None in passthrough mode) and post-activation values.
    fn hidden_states(&self, features: &Matrix<S>) -> (Option<Matrix<S>>, Matrix<S>) {
        assert_eq!(features.cols(), self.input_dim, "feature dimension mismatch");
        match &self.layer {
            None => (None, features.clone()),
            Some(layer) => {
                let batch = features.rows();
                let hidden = layer.weight.rows();
                let mut pre = Matrix::zeros(batch, hidden);
                let mut post = Matrix::zeros(batch, hidden);
                for i in 0..batch {
                    let x = features.row(i);
                    let pre_row = pre.row_mut(i);
                    for h in 0..hidden {
                        let w = layer.weight.row(h);
                        let mut z = layer.bias[h];
                        for (wv, xv) in w.iter().zip(x) {
                            z += *wv * *xv;
                        }
                        pre_row[h] = z;
                    }
                    let post_row = post.row_mut(i);
                    for h in 0..hidden {
                        post_row[h] = pre.get(i, h).max(S::zero());
                    }
                }
                (Some(pre), post)
            }
        }
    }
}

/// Linear classifier on top of the backbone output.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead<S> {
    weight: Matrix<S>, // classes x hidden
    bias: Vec<S>,      // classes
}

impl<S: Scalar> LinearHead<S> {
    /// Fresh head: weights uniform in `[-1/sqrt(H), 1/sqrt(H)]`, biases zero,
    /// deterministic in the seed.
    pub fn init(num_classes: usize, input_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let bound = 1.0 / (input_dim as f64).sqrt();
        let data = (0..num_classes * input_dim)
            .map(|_| S::of(rng.random_range(-bound..=bound)))
            .collect();
        Self {
            weight: Matrix::from_vec(num_classes, input_dim, data),
            bias: vec![S::zero(); num_classes],
        }
    }

    pub fn from_parts(weight: Matrix<S>, bias: Vec<S>) -> Result<Self> {
        if weight.rows() != bias.len() {
            return Err(Error::invalid_argument(format!(
                "head weight has {} rows but bias has {} entries",
                weight.rows(),
                bias.len()
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn num_classes(&self) -> usize {
        self.weight.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn weight(&self) -> &Matrix<S> {
        &self.weight
    }

    pub fn bias(&self) -> &[S] {
        &self.bias
    }

    pub fn weight_mut(&mut self) -> &mut Matrix<S> {
        &mut self.weight
    }

    pub fn bias_mut(&mut self) -> &mut [S] {
        self.bias.as_mut_slice()
    }

    /// Logits for a batch of backbone outputs.
    pub fn forward(&self, hidden: &Matrix<S>) -> Matrix<S> {
        assert_eq!(hidden.cols(), self.input_dim(), "hidden dimension mismatch");
        let batch = hidden.rows();
        let classes = self.num_classes();
        let mut logits = Matrix::zeros(batch, classes);
        for i in 0..batch {
            let a = hidden.row(i);
            let out = logits.row_mut(i);
            for c in 0..classes {
                let w = self.weight.row(c);
                let mut z = self.bias[c];
                for (wv, av) in w.iter().zip(a) {
                    z += *wv * *av;
                }
                out[c] = z;
            }
        }
        logits
    }
}

/// Which classifier head to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    /// The head that came with the pre-trained model.
    Old,
    /// The re-trained head.
    New,
}

/// Backbone plus heads plus the training-set class frequencies they were
/// trained against. The old head is present only on fine-tuned bundles.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle<S> {
    backbone: MlpBackbone<S>,
    old_head: Option<LinearHead<S>>,
    new_head: LinearHead<S>,
    class_counts: ClassCounts,
}

impl<S: Scalar> ModelBundle<S> {
    pub fn new(
        backbone: MlpBackbone<S>,
        old_head: Option<LinearHead<S>>,
        new_head: LinearHead<S>,
        class_counts: ClassCounts,
    ) -> Result<Self> {
        let hidden = backbone.hidden_dim();
        for head in std::iter::once(&new_head).chain(old_head.iter()) {
            if head.input_dim() != hidden {
                return Err(Error::invalid_argument(format!(
                    "head expects {} inputs but backbone produces {hidden}",
                    head.input_dim()
                )));
            }
        }
        if let Some(old) = &old_head {
            if old.num_classes() != new_head.num_classes() {
                return Err(Error::invalid_argument(
                    "old and new heads disagree on the number of classes",
                ));
            }
        }
        if class_counts.num_classes() != new_head.num_classes() {
            return Err(Error::invalid_argument(format!(
                "class counts cover {} classes but heads have {}",
                class_counts.num_classes(),
                new_head.num_classes()
            )));
        }
        Ok(Self {
            backbone,
            old_head,
            new_head,
            class_counts,
        })
    }

    pub fn backbone(&self) -> &MlpBackbone<S> {
        &self.backbone
    }

    pub fn new_head(&self) -> &LinearHead<S> {
        &self.new_head
    }

    pub fn old_head(&self) -> Option<&LinearHead<S>> {
        self.old_head.as_ref()
    }

    pub fn has_old_head(&self) -> bool {
        self.old_head.is_some()
    }

    pub fn class_counts(&self) -> &ClassCounts {
        &self.class_counts
    }

    pub fn num_classes(&self) -> usize {
        self.new_head.num_classes()
    }

    pub fn head(&self, kind: HeadKind) -> Result<&LinearHead<S>> {
        match kind {
            HeadKind::New => Ok(&self.new_head),
            HeadKind::Old => self.old_head.as_ref().ok_or_else(|| {
                Error::invalid_state("bundle has no old head (not produced by fine-tuning)")
            }),
        }
    }

    /// Logits for a batch of raw features through the selected head.
    pub fn forward(&self, kind: HeadKind, features: &Matrix<S>) -> Result<Matrix<S>> {
        let head = self.head(kind)?;
        if features.cols() != self.backbone.input_dim() {
            return Err(Error::invalid_argument(format!(
                "features have dimension {} but backbone expects {}",
                features.cols(),
                self.backbone.input_dim()
            )));
        }
        Ok(head.forward(&self.backbone.forward(features)))
    }

    /// Chain-rule gradients of a scalar loss given `d loss / d logits`.
    ///
    /// With `freeze_backbone` set (or a passthrough backbone) no backbone
    /// gradients are produced.
    pub fn backward(
        &self,
        kind: HeadKind,
        features: &Matrix<S>,
        logit_grad: &Matrix<S>,
        freeze_backbone: bool,
    ) -> Result<ModelGradients<S>> {
        let head = self.head(kind)?;
        backward_through(&self.backbone, head, features, logit_grad, freeze_backbone)
    }
}

/// Gradients produced by one backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients<S> {
    pub head_weight: Matrix<S>,
    pub head_bias: Vec<S>,
    /// Absent when the backbone is frozen or has no parameters.
    pub backbone: Option<BackboneGradients<S>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackboneGradients<S> {
    pub weight: Matrix<S>,
    pub bias: Vec<S>,
}

/// Exact chain-rule gradients through `head(relu(W1 x + b1))`.
pub(crate) fn backward_through<S: Scalar>(
    backbone: &MlpBackbone<S>,
    head: &LinearHead<S>,
    features: &Matrix<S>,
    logit_grad: &Matrix<S>,
    freeze_backbone: bool,
) -> Result<ModelGradients<S>> {
    if features.cols() != backbone.input_dim() {
        return Err(Error::invalid_argument(format!(
            "features have dimension {} but backbone expects {}",
            features.cols(),
            backbone.input_dim()
        )));
    }
    if logit_grad.rows() != features.rows() || logit_grad.cols() != head.num_classes() {
        return Err(Error::invalid_argument(format!(
            "logit gradient is {}x{} but expected {}x{}",
            logit_grad.rows(),
            logit_grad.cols(),
            features.rows(),
            head.num_classes()
        )));
    }

    let (pre, act) = backbone.hidden_states(features);
    let batch = features.rows();
    let hidden = backbone.hidden_dim();
    let classes = head.num_classes();

    // Head: dW[c][h] = sum_i G[i][c] * A[i][h]; db[c] = sum_i G[i][c].
    let mut head_weight = Matrix::zeros(classes, hidden);
    let mut head_bias = vec![S::zero(); classes];
    for i in 0..batch {
        let g = logit_grad.row(i);
        let a = act.row(i);
        for c in 0..classes {
            let gc = g[c];
            head_bias[c] += gc;
            let wrow = head_weight.row_mut(c);
            for h in 0..hidden {
                wrow[h] += gc * a[h];
            }
        }
    }

    let backbone_grads = match (&pre, freeze_backbone) {
        (Some(pre), false) => {
            let input_dim = backbone.input_dim();
            let mut weight = Matrix::zeros(hidden, input_dim);
            let mut bias = vec![S::zero(); hidden];
            for i in 0..batch {
                let g = logit_grad.row(i);
                let x = features.row(i);
                for h in 0..hidden {
                    // dA[i][h] = sum_c G[i][c] * W[c][h], masked by relu'.
                    if pre.get(i, h) <= S::zero() {
                        continue;
                    }
                    let mut da = S::zero();
                    for c in 0..classes {
                        da += g[c] * head.weight().get(c, h);
                    }
                    bias[h] += da;
                    let wrow = weight.row_mut(h);
                    for (wv, xv) in wrow.iter_mut().zip(x) {
                        *wv += da * *xv;
                    }
                }
            }
            Some(BackboneGradients { weight, bias })
        }
        _ => None,
    };

    Ok(ModelGradients {
        head_weight,
        head_bias,
        backbone: backbone_grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_matrix(rng: &mut ChaCha12Rng, rows: usize, cols: usize, scale: f64) -> Matrix<f64> {
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-scale..scale))
            .collect();
        Matrix::from_vec(rows, cols, data)
    }

    fn test_bundle(seed: u64) -> ModelBundle<f64> {
        let backbone = MlpBackbone::random(6, 5, seed);
        let head = LinearHead::init(4, 5, seed + 1);
        ModelBundle::new(backbone, None, head, ClassCounts::new(vec![1; 4])).unwrap()
    }

    #[test]
    fn zero_head_gives_zero_logits() {
        let backbone = MlpBackbone::random(3, 4, 0);
        let head = LinearHead::from_parts(Matrix::zeros(2, 4), vec![0.0, 0.0]).unwrap();
        let bundle = ModelBundle::new(backbone, None, head, ClassCounts::new(vec![1, 1])).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let x = random_matrix(&mut rng, 5, 3, 2.0);
        let logits = bundle.forward(HeadKind::New, &x).unwrap();
        assert!(logits.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn passthrough_with_identity_head_reproduces_input() {
        let dim = 3;
        let backbone = MlpBackbone::passthrough(dim);
        let mut weight = Matrix::zeros(dim, dim);
        for i in 0..dim {
            weight.set(i, i, 1.0);
        }
        let head = LinearHead::from_parts(weight, vec![0.0; dim]).unwrap();
        let bundle =
            ModelBundle::new(backbone, None, head, ClassCounts::new(vec![1; dim])).unwrap();
        let x = Matrix::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, -0.25]);
        let logits = bundle.forward(HeadKind::New, &x).unwrap();
        assert_eq!(logits, x);
    }

    #[test]
    fn forward_matches_straight_line_reimplementation() {
        let bundle = test_bundle(11);
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let x = random_matrix(&mut rng, 8, 6, 1.5);
        let logits = bundle.forward(HeadKind::New, &x).unwrap();

        let w1 = bundle.backbone().weight().unwrap();
        let b1 = bundle.backbone().bias().unwrap();
        let head = bundle.new_head();
        for i in 0..x.rows() {
            for c in 0..head.num_classes() {
                let mut expected = head.bias()[c];
                for h in 0..w1.rows() {
                    let mut z = b1[h];
                    for d in 0..x.cols() {
                        z += w1.get(h, d) * x.get(i, d);
                    }
                    let a = if z > 0.0 { z } else { 0.0 };
                    expected += head.weight().get(c, h) * a;
                }
                assert!((logits.get(i, c) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_is_linear_in_head_parameters() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for _ in 0..20 {
            let bundle = test_bundle(rng.random_range(0..1000));
            let x = random_matrix(&mut rng, 4, 6, 2.0);
            let alpha: f64 = rng.random_range(0.1..3.0);

            let scaled_head = {
                let head = bundle.new_head();
                let mut weight = head.weight().clone();
                for v in weight.as_mut_slice() {
                    *v *= alpha;
                }
                let bias = head.bias().iter().map(|&b| b * alpha).collect();
                LinearHead::from_parts(weight, bias).unwrap()
            };
            let scaled = ModelBundle::new(
                bundle.backbone().clone(),
                None,
                scaled_head,
                bundle.class_counts().clone(),
            )
            .unwrap();

            let base = bundle.forward(HeadKind::New, &x).unwrap();
            let scaled_out = scaled.forward(HeadKind::New, &x).unwrap();
            for (a, b) in base.as_slice().iter().zip(scaled_out.as_slice()) {
                assert!((a * alpha - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_logit_grad_gives_zero_gradients() {
        let bundle = test_bundle(2);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let x = random_matrix(&mut rng, 4, 6, 1.0);
        let grads = bundle
            .backward(HeadKind::New, &x, &Matrix::zeros(4, 4), false)
            .unwrap();
        assert!(grads.head_weight.as_slice().iter().all(|&v| v == 0.0));
        assert!(grads.head_bias.iter().all(|&v| v == 0.0));
        let bb = grads.backbone.unwrap();
        assert!(bb.weight.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences_of_composed_loss() {
        // C=4, D=6, H=5, B=8 instance; central differences with step 1e-5.
        let mut bundle = test_bundle(21);
        let mut rng = ChaCha12Rng::seed_from_u64(22);
        let x = random_matrix(&mut rng, 8, 6, 1.5);
        let labels: Vec<usize> = (0..8).map(|_| rng.random_range(0..4)).collect();

        let loss_of = |b: &ModelBundle<f64>| {
            let logits = b.forward(HeadKind::New, &x).unwrap();
            crate::losses::ce_loss_and_grad(&logits, &labels).unwrap().0
        };
        let logits = bundle.forward(HeadKind::New, &x).unwrap();
        let (_, logit_grad) = crate::losses::ce_loss_and_grad(&logits, &labels).unwrap();
        let grads = bundle
            .backward(HeadKind::New, &x, &logit_grad, false)
            .unwrap();

        let h = 1e-5;
        let rel_ok = |analytic: f64, numeric: f64| {
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                rel < 1e-4,
                "rel err {rel}: analytic {analytic}, numeric {numeric}"
            );
        };

        for idx in 0..4 * 5 {
            let orig = bundle.new_head.weight.as_slice()[idx];
            bundle.new_head.weight.as_mut_slice()[idx] = orig + h;
            let up = loss_of(&bundle);
            bundle.new_head.weight.as_mut_slice()[idx] = orig - h;
            let down = loss_of(&bundle);
            bundle.new_head.weight.as_mut_slice()[idx] = orig;
            rel_ok(grads.head_weight.as_slice()[idx], (up - down) / (2.0 * h));
        }
        for c in 0..4 {
            let orig = bundle.new_head.bias[c];
            bundle.new_head.bias[c] = orig + h;
            let up = loss_of(&bundle);
            bundle.new_head.bias[c] = orig - h;
            let down = loss_of(&bundle);
            bundle.new_head.bias[c] = orig;
            rel_ok(grads.head_bias[c], (up - down) / (2.0 * h));
        }
        let bb = grads.backbone.as_ref().unwrap();
        for idx in 0..5 * 6 {
            let orig = bundle.backbone.weight().unwrap().as_slice()[idx];
            bundle.backbone.weight_mut().unwrap().as_mut_slice()[idx] = orig + h;
            let up = loss_of(&bundle);
            bundle.backbone.weight_mut().unwrap().as_mut_slice()[idx] = orig - h;
            let down = loss_of(&bundle);
            bundle.backbone.weight_mut().unwrap().as_mut_slice()[idx] = orig;
            rel_ok(bb.weight.as_slice()[idx], (up - down) / (2.0 * h));
        }
        for hh in 0..5 {
            let orig = bundle.backbone.bias().unwrap()[hh];
            bundle.backbone.bias_mut().unwrap()[hh] = orig + h;
            let up = loss_of(&bundle);
            bundle.backbone.bias_mut().unwrap()[hh] = orig - h;
            let down = loss_of(&bundle);
            bundle.backbone.bias_mut().unwrap()[hh] = orig;
            rel_ok(bb.bias[hh], (up - down) / (2.0 * h));
        }
    }

    #[test]
    fn frozen_backward_omits_backbone_gradients() {
        let bundle = test_bundle(5);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let x = random_matrix(&mut rng, 4, 6, 1.0);
        let g = random_matrix(&mut rng, 4, 4, 0.5);
        let frozen = bundle.backward(HeadKind::New, &x, &g, true).unwrap();
        assert!(frozen.backbone.is_none());
        let unfrozen = bundle.backward(HeadKind::New, &x, &g, false).unwrap();
        let bb = unfrozen.backbone.unwrap();
        assert!(bb.weight.as_slice().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn passthrough_backbone_has_no_gradients() {
        let backbone = MlpBackbone::passthrough(3);
        let head = LinearHead::init(2, 3, 0);
        let bundle = ModelBundle::new(backbone, None, head, ClassCounts::new(vec![1, 1])).unwrap();
        let x = Matrix::from_vec(1, 3, vec![1.0, 2.0, 3.0]);
        let g = Matrix::from_vec(1, 2, vec![0.5, -0.5]);
        let grads = bundle.backward(HeadKind::New, &x, &g, false).unwrap();
        assert!(grads.backbone.is_none());
    }

    #[test]
    fn head_init_is_deterministic_with_zero_bias() {
        let a: LinearHead<f64> = LinearHead::init(4, 9, 123);
        let b: LinearHead<f64> = LinearHead::init(4, 9, 123);
        assert_eq!(a, b);
        assert!(a.bias().iter().all(|&v| v == 0.0));
        let c: LinearHead<f64> = LinearHead::init(4, 9, 124);
        assert_ne!(a, c);
    }

    #[test]
    fn head_init_weights_have_near_zero_mean() {
        // 10^4 uniform draws in [-b, b]: the empirical mean should land
        // within 3 standard errors of zero, se = b / sqrt(3 * n).
        let hidden = 25;
        let head: LinearHead<f64> = LinearHead::init(400, hidden, 7);
        let n = (400 * hidden) as f64;
        let mean: f64 = head.weight().as_slice().iter().sum::<f64>() / n;
        let bound = 1.0 / (hidden as f64).sqrt();
        let se = bound / (3.0 * n).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} exceeds 3 se {se}");
        assert!(head
            .weight()
            .as_slice()
            .iter()
            .all(|&w| (-bound..=bound).contains(&w)));
    }

    #[test]
    fn missing_old_head_is_an_invalid_state() {
        let bundle = test_bundle(8);
        let x = Matrix::zeros(1, 6);
        assert!(matches!(
            bundle.forward(HeadKind::Old, &x),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn dimension_mismatch_is_an_invalid_argument() {
        let bundle = test_bundle(9);
        let x = Matrix::zeros(1, 7);
        assert!(matches!(
            bundle.forward(HeadKind::New, &x),
            Err(Error::InvalidArgument(_))
        ));
        let x = Matrix::zeros(2, 6);
        let bad_grad = Matrix::zeros(2, 3);
        assert!(matches!(
            bundle.backward(HeadKind::New, &x, &bad_grad, false),
            Err(Error::InvalidArgument(_))
        ));
    }
}
