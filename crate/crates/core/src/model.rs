//! Joint forward/backward over one training batch.
//!
//! A batch `B⁺` of raw normal features is normalized by the input batch-norm,
//! perturbed into `B̃⁻`, and the classifier sees `B⁺ ∪ B̃⁻` (normal rows first,
//! label 1; pseudo-anomalies second, label 0).

use rand::Rng;

use crate::classifier::{Classifier, ClassifierShape, EmbedPass, CLASSIFIER_TENSORS};
use crate::error::{PlumeError, Result};
use crate::losses::{bce_logit_grad, Guidance, LossBreakdown, LossInputs, LossWeights};
use crate::perturbator::{
    draw_standard_normal, PerturbationStrategy, Perturbator, PerturbatorPass, StrategyKind,
    PERTURBATOR_TENSORS,
};
use crate::tensor::{sigmoid, BatchNormCache, Matrix, NamedTensor, Parameter};

/// The random draws consumed by one step, kept so a step can be replayed.
#[derive(Debug, Clone, PartialEq)]
pub enum StepNoise {
    /// Reparameterization `eps` for the adaptive strategies.
    Latent(Matrix),
    /// Standard-normal draws scaled by `gaussian_sigma`.
    Gaussian(Matrix),
}

impl StepNoise {
    pub fn draw<R: Rng + ?Sized>(kind: StrategyKind, rows: usize, dim: usize, rng: &mut R) -> Self {
        let m = draw_standard_normal(rows, dim, rng);
        if kind.is_adaptive() {
            StepNoise::Latent(m)
        } else {
            StepNoise::Gaussian(m)
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlumeModel {
    pub classifier: Classifier,
    pub perturbator: Option<Perturbator>,
    pub strategy: PerturbationStrategy,
    pub weights: LossWeights,
    pub guidance: Guidance,
}

/// Everything a forward pass produced.
pub struct ForwardState {
    pub input_norm: BatchNormCache,
    pub perturbation: Option<PerturbatorPass>,
    pub classifier_pass: EmbedPass,
    pub scores: Vec<f64>,
    pub labels: Vec<f64>,
    pub loss: LossBreakdown,
    contrastive_grads: Option<(Matrix, Matrix)>,
}

impl PlumeModel {
    pub fn init<R: Rng + ?Sized>(
        shape: ClassifierShape,
        strategy: PerturbationStrategy,
        weights: LossWeights,
        guidance: Guidance,
        rng: &mut R,
    ) -> Result<Self> {
        strategy.validate()?;
        let classifier = Classifier::init(shape, rng);
        let perturbator = if strategy.kind.is_adaptive() {
            Some(Perturbator::init(shape.dim, strategy.kind, rng)?)
        } else {
            None
        };
        Ok(Self {
            classifier,
            perturbator,
            strategy,
            weights,
            guidance,
        })
    }

    pub fn dim(&self) -> usize {
        self.classifier.shape().dim
    }

    pub fn draw_noise<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> StepNoise {
        StepNoise::draw(self.strategy.kind, rows, self.dim(), rng)
    }

    /// Pure forward pass; running statistics are left untouched.
    pub fn forward(&self, batch: &Matrix, noise: &StepNoise) -> Result<ForwardState> {
        let n = batch.rows();
        let input_norm = self.classifier.input_norm.forward_train(batch)?;
        let normal = &input_norm.normalized;

        let (perturbation, pseudo) = match (&self.perturbator, noise) {
            (Some(p), StepNoise::Latent(eps)) => {
                let pass = p.forward(normal, eps)?;
                let pseudo = pass.perturbed.clone();
                (Some(pass), pseudo)
            }
            (None, StepNoise::Gaussian(draws)) => {
                let sigma = self.strategy.gaussian_sigma;
                (None, normal.zip_map(draws, |x, e| x + sigma * e)?)
            }
            _ => {
                return Err(PlumeError::Config(format!(
                    "noise kind does not match strategy {}",
                    self.strategy.kind
                )))
            }
        };

        let mixed = Matrix::vstack(normal, &pseudo)?;
        let classifier_pass = self.classifier.embed_train(&mixed)?;
        let scores: Vec<f64> = self
            .classifier
            .logits(&classifier_pass.embedding)?
            .into_iter()
            .map(sigmoid)
            .collect();
        let labels: Vec<f64> = (0..2 * n).map(|i| if i < n { 1.0 } else { 0.0 }).collect();

        let emb = &classifier_pass.embedding;
        let normal_emb = emb.slice_rows(0..n);
        let pseudo_emb = emb.slice_rows(n..2 * n);
        let contrastive = self.guidance.contrastive(&normal_emb, &pseudo_emb, self.weights.tau)?;

        let loss = crate::losses::total_loss(
            &LossInputs {
                scores: &scores,
                labels: &labels,
                noise_params: perturbation.as_ref().map(|p| (&p.output.alpha, &p.output.beta)),
                latent: perturbation.as_ref().map(|p| (&p.latent.mu, &p.latent.logvar)),
                normal_embeddings: &normal_emb,
                pseudo_embeddings: &pseudo_emb,
            },
            &self.weights,
            Guidance::None,
        )?;
        let c_loss = contrastive.as_ref().map_or(0.0, |c| c.loss);
        let loss = LossBreakdown::combine(loss.ce, loss.noise, loss.kl, c_loss, &self.weights);
        if !loss.is_finite() {
            return Err(PlumeError::NonFinite(format!("training loss {loss:?}")));
        }
        Ok(ForwardState {
            input_norm,
            perturbation,
            classifier_pass,
            scores,
            labels,
            loss,
            contrastive_grads: contrastive.map(|c| (c.grad_normal, c.grad_pseudo)),
        })
    }

    /// Zeroes gradients, runs forward and backward, and leaves the gradients
    /// of the total loss in every parameter's `grad` slot.
    pub fn forward_backward(&mut self, batch: &Matrix, noise: &StepNoise) -> Result<ForwardState> {
        self.zero_grad();
        let state = self.forward(batch, noise)?;
        let n = batch.rows();
        let rows = state.scores.len() as f64;
        let grad_logits: Vec<f64> = state
            .scores
            .iter()
            .zip(&state.labels)
            .map(|(&p, &y)| bce_logit_grad(p, y) / rows)
            .collect();
        let grad_embedding = match (&state.contrastive_grads, self.weights.gamma) {
            (Some((gn, gp)), gamma) if gamma != 0.0 => {
                let mut g = Matrix::vstack(gn, gp)?;
                g.scale_in_place(gamma);
                Some(g)
            }
            _ => None,
        };
        let grad_mixed = self
            .classifier
            .backward(&state.classifier_pass, &grad_logits, grad_embedding.as_ref())?;
        if let (Some(p), Some(pass)) = (self.perturbator.as_mut(), state.perturbation.as_ref()) {
            let grad_pseudo = grad_mixed.slice_rows(n..2 * n);
            let inv_n = 1.0 / n as f64;
            p.backward(
                pass,
                &grad_pseudo,
                self.weights.lambda * inv_n,
                self.weights.nu * inv_n,
            )?;
        }
        Ok(state)
    }

    /// Folds the batch statistics of a train-mode pass into the running statistics.
    pub fn commit_stats(&mut self, state: &ForwardState) {
        self.classifier.input_norm.update(&state.input_norm);
        self.classifier.commit_stats(&state.classifier_pass);
    }

    pub fn zero_grad(&mut self) {
        self.parameters_mut().into_iter().for_each(Parameter::zero_grad);
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        let mut p = self.classifier.parameters();
        if let Some(pert) = &self.perturbator {
            p.extend(pert.parameters());
        }
        p
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.classifier.parameters_mut();
        if let Some(pert) = self.perturbator.as_mut() {
            p.extend(pert.parameters_mut());
        }
        p
    }

    pub fn tensor_names(&self) -> Vec<&'static str> {
        let mut names = CLASSIFIER_TENSORS.to_vec();
        if self.perturbator.is_some() {
            names.extend(PERTURBATOR_TENSORS);
        }
        names
    }

    /// Flat copies of every parameter with its current gradient.
    pub fn named_tensors(&self) -> Vec<NamedTensor> {
        self.tensor_names()
            .into_iter()
            .zip(self.parameters())
            .map(|(name, p)| NamedTensor {
                name: name.to_string(),
                values: p.value.as_slice().to_vec(),
                grad: p.grad.as_slice().to_vec(),
            })
            .collect()
    }

    /// Overwrites parameter values from flat tensors (same order as [`Self::named_tensors`]).
    pub fn load_tensor_values(&mut self, values: &[Vec<f64>]) -> Result<()> {
        let params = self.parameters_mut();
        if params.len() != values.len() {
            return Err(PlumeError::Config(format!(
                "expected {} tensors, got {}",
                params.len(),
                values.len()
            )));
        }
        for (p, v) in params.into_iter().zip(values) {
            if p.value.len() != v.len() {
                return Err(PlumeError::Dimension {
                    op: "load_tensor_values",
                    left: p.value.shape(),
                    right: (v.len(), 1),
                });
            }
            p.value.as_mut_slice().copy_from_slice(v);
        }
        Ok(())
    }

    pub fn trainable_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }
}
