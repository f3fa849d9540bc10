//! The discriminator `f = f2 ∘ f1`.
//!
//! `f1`: `lin1 → bn1 → leaky → lin2 → bn2 → leaky` gives the embedding `z`;
//! `f2`: `lin3 → sigmoid` gives `ŷ`, near 1 for normal data. All linear layers
//! are biasless and every batch-norm is non-affine. A non-affine input
//! batch-norm on the raw features runs before both the classifier and the
//! perturbator; it lives here because inference needs its running statistics.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PlumeError, Result};
use crate::tensor::{
    batch_norm_backward, leaky_relu, leaky_relu_backward, sigmoid, BatchNormCache, BatchNormState,
    Linear, Matrix, Mode, Parameter, LEAKY_SLOPE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierShape {
    pub dim: usize,
    pub hidden1: usize,
    pub hidden2: usize,
}

impl ClassifierShape {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            hidden1: 1024,
            hidden2: 512,
        }
    }

    pub fn param_count(&self) -> usize {
        self.dim * self.hidden1 + self.hidden1 * self.hidden2 + self.hidden2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub input_norm: BatchNormState,
    pub lin1: Linear,
    pub bn1: BatchNormState,
    pub lin2: Linear,
    pub bn2: BatchNormState,
    pub lin3: Linear,
}

pub const CLASSIFIER_TENSORS: [&str; 3] = [
    "classifier.lin1.weight",
    "classifier.lin2.weight",
    "classifier.lin3.weight",
];

/// Train-mode activations of `f1` for one batch.
#[derive(Debug, Clone)]
pub struct EmbedPass {
    pub input: Matrix,
    pub pre1: Matrix,
    pub bn1: BatchNormCache,
    pub act1: Matrix,
    pub pre2: Matrix,
    pub bn2: BatchNormCache,
    pub embedding: Matrix,
}

impl Classifier {
    pub fn init<R: Rng + ?Sized>(shape: ClassifierShape, rng: &mut R) -> Self {
        Self {
            input_norm: BatchNormState::new(shape.dim),
            lin1: Linear::init_uniform(shape.dim, shape.hidden1, false, rng),
            bn1: BatchNormState::new(shape.hidden1),
            lin2: Linear::init_uniform(shape.hidden1, shape.hidden2, false, rng),
            bn2: BatchNormState::new(shape.hidden2),
            lin3: Linear::init_uniform(shape.hidden2, 1, false, rng),
        }
    }

    pub fn zeros(shape: ClassifierShape) -> Self {
        Self {
            input_norm: BatchNormState::new(shape.dim),
            lin1: Linear::zeros(shape.dim, shape.hidden1, false),
            bn1: BatchNormState::new(shape.hidden1),
            lin2: Linear::zeros(shape.hidden1, shape.hidden2, false),
            bn2: BatchNormState::new(shape.hidden2),
            lin3: Linear::zeros(shape.hidden2, 1, false),
        }
    }

    pub fn shape(&self) -> ClassifierShape {
        ClassifierShape {
            dim: self.lin1.fan_in(),
            hidden1: self.lin1.fan_out(),
            hidden2: self.lin2.fan_out(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.lin1.param_count() + self.lin2.param_count() + self.lin3.param_count()
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.lin1.weight, &self.lin2.weight, &self.lin3.weight]
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.lin1.weight, &mut self.lin2.weight, &mut self.lin3.weight]
    }

    pub fn zero_grad(&mut self) {
        self.parameters_mut().into_iter().for_each(Parameter::zero_grad);
    }

    pub fn is_trained(&self) -> bool {
        self.input_norm.is_initialized() && self.bn1.is_initialized() && self.bn2.is_initialized()
    }

    /// `f1` in train mode, without folding statistics into the running state.
    pub fn embed_train(&self, x: &Matrix) -> Result<EmbedPass> {
        let pre1 = self.lin1.forward(x)?;
        let bn1 = self.bn1.forward_train(&pre1)?;
        let act1 = leaky_relu(&bn1.normalized, LEAKY_SLOPE);
        let pre2 = self.lin2.forward(&act1)?;
        let bn2 = self.bn2.forward_train(&pre2)?;
        let embedding = leaky_relu(&bn2.normalized, LEAKY_SLOPE);
        Ok(EmbedPass {
            input: x.clone(),
            pre1,
            bn1,
            act1,
            pre2,
            bn2,
            embedding,
        })
    }

    pub fn commit_stats(&mut self, pass: &EmbedPass) {
        self.bn1.update(&pass.bn1);
        self.bn2.update(&pass.bn2);
    }

    /// `f1` in eval mode, using running statistics.
    pub fn embed_eval(&self, x: &Matrix) -> Result<Matrix> {
        let a = leaky_relu(&self.bn1.forward_eval(&self.lin1.forward(x)?)?, LEAKY_SLOPE);
        Ok(leaky_relu(
            &self.bn2.forward_eval(&self.lin2.forward(&a)?)?,
            LEAKY_SLOPE,
        ))
    }

    /// `f1`; train mode updates the running statistics and needs at least two rows.
    pub fn embed(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        match mode {
            Mode::Train => {
                let pass = self.embed_train(x)?;
                self.commit_stats(&pass);
                Ok(pass.embedding)
            }
            Mode::Eval => self.embed_eval(x),
        }
    }

    /// `lin3(z)`, one logit per row.
    pub fn logits(&self, z: &Matrix) -> Result<Vec<f64>> {
        Ok(self.lin3.forward(z)?.into_vec())
    }

    /// `f2`: `sigmoid(lin3(z))` per row; near 1 means normal.
    pub fn decide(&self, z: &Matrix) -> Result<Vec<f64>> {
        Ok(self.logits(z)?.into_iter().map(sigmoid).collect())
    }

    /// Eval-mode `ŷ` for raw (not yet input-normalized) features.
    pub fn score_batch(&self, x: &Matrix) -> Result<Vec<f64>> {
        if !self.is_trained() {
            return Err(PlumeError::ModelNotTrained(
                "batch-norm running statistics were never populated",
            ));
        }
        let normalized = self.input_norm.forward_eval(x)?;
        self.decide(&self.embed_eval(&normalized)?)
    }

    /// User-facing anomaly score `1 − ŷ`.
    pub fn anomaly_scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.score_batch(x)?.into_iter().map(|y| 1.0 - y).collect())
    }

    /// Backpropagates through `f = f2 ∘ f1`, accumulating weight gradients.
    /// `grad_logits` is `∂L/∂lin3(z)` per row and `grad_embedding` any extra
    /// `∂L/∂z` (from the contrastive term). Returns `∂L/∂x`.
    pub fn backward(
        &mut self,
        pass: &EmbedPass,
        grad_logits: &[f64],
        grad_embedding: Option<&Matrix>,
    ) -> Result<Matrix> {
        let g_logit = Matrix::new(grad_logits.len(), 1, grad_logits.to_vec())?;
        let mut gz = self.lin3.backward(&g_logit, &pass.embedding)?;
        if let Some(extra) = grad_embedding {
            gz.add_assign(extra)?;
        }
        let g_bn2 = leaky_relu_backward(&gz, &pass.bn2.normalized, LEAKY_SLOPE)?;
        let g_pre2 = batch_norm_backward(&g_bn2, &pass.bn2)?;
        let g_act1 = self.lin2.backward(&g_pre2, &pass.act1)?;
        let g_bn1 = leaky_relu_backward(&g_act1, &pass.bn1.normalized, LEAKY_SLOPE)?;
        let g_pre1 = batch_norm_backward(&g_bn1, &pass.bn1)?;
        self.lin1.backward(&g_pre1, &pass.input)
    }
}
