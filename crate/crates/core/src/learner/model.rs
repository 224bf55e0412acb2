use std::borrow::Borrow;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::drift_env::{batch_mean, DatasetState, LabeledSample};
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, norm, norm_sq, Scalar};

/// Model parameters θ. For the classifier the layout is the row-major
/// `num_classes × feature_dim` weight matrix followed by one bias per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<S> {
    pub theta: Vec<S>,
}

impl<S: Scalar> ModelParams<S> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            theta: vec![S::zero(); dim],
        }
    }

    pub fn from_vec(theta: Vec<S>) -> Result<Self> {
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("model parameters must be finite"));
        }
        Ok(Self { theta })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

/// The per-step objective.
#[derive(Debug, Clone, PartialEq)]
pub enum LossSpec<S> {
    /// Softmax cross-entropy, each sample's loss capped at `clamp_b`.
    SoftmaxCrossEntropyClamped {
        num_classes: usize,
        feature_dim: usize,
        clamp_b: S,
    },
    /// ½‖θ − c_t‖² for the current target `c_t`; ignores the data.
    QuadraticTracking { target: Vec<S> },
}

impl<S: Scalar> LossSpec<S> {
    /// Default cap `10 · ln(num_classes)`.
    pub fn classifier(num_classes: usize, feature_dim: usize) -> Self {
        LossSpec::SoftmaxCrossEntropyClamped {
            num_classes,
            feature_dim,
            clamp_b: S::of(10.0 * (num_classes as f64).ln()),
        }
    }

    pub fn is_classifier(&self) -> bool {
        matches!(self, LossSpec::SoftmaxCrossEntropyClamped { .. })
    }

    /// Upper bound on the loss, if one exists.
    pub fn loss_bound(&self) -> Option<S> {
        match self {
            LossSpec::SoftmaxCrossEntropyClamped { clamp_b, .. } => Some(*clamp_b),
            LossSpec::QuadraticTracking { .. } => None,
        }
    }
}

pub fn param_dim<S: Scalar>(spec: &LossSpec<S>) -> usize {
    match spec {
        LossSpec::SoftmaxCrossEntropyClamped {
            num_classes,
            feature_dim,
            ..
        } => num_classes * feature_dim + num_classes,
        LossSpec::QuadraticTracking { target } => target.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig<S> {
    pub alpha: S,
    pub steps_per_update: usize,
    pub batch_size: usize,
}

impl<S: Scalar> LearnerConfig<S> {
    /// Checks positivity and the step-size condition `alpha < 2 / L`.
    pub fn validate(&self, l_smooth: S) -> Result<()> {
        if !(self.alpha >= S::zero()) || !self.alpha.is_finite() {
            return Err(Error::invalid("alpha must be finite and nonnegative"));
        }
        if self.steps_per_update == 0 || self.batch_size == 0 {
            return Err(Error::invalid("steps_per_update and batch_size must be >= 1"));
        }
        if self.alpha * l_smooth >= S::of(2.0) {
            return Err(Error::invalid(format!(
                "alpha = {} violates alpha < 2/L with L = {}",
                self.alpha, l_smooth
            )));
        }
        Ok(())
    }
}

fn check_params<S: Scalar>(params: &ModelParams<S>, spec: &LossSpec<S>) -> Result<()> {
    let want = param_dim(spec);
    if params.dim() != want {
        return Err(Error::DimensionMismatch {
            expected: want,
            got: params.dim(),
        });
    }
    Ok(())
}

fn sample_of<S, B: Borrow<LabeledSample<S>>>(b: &B) -> &LabeledSample<S> {
    b.borrow()
}

fn logits<S: Scalar>(theta: &[S], x: &[S], num_classes: usize, feature_dim: usize) -> Vec<S> {
    let (w, b) = theta.split_at(num_classes * feature_dim);
    (0..num_classes)
        .map(|c| crate::scalar::dot(&w[c * feature_dim..(c + 1) * feature_dim], x) + b[c])
        .collect()
}

/// Per-sample clamped cross-entropy; accumulates `scale · ∇` into `grad_acc`
/// when given and the sample is not saturated.
fn ce_sample<S: Scalar>(
    theta: &[S],
    s: &LabeledSample<S>,
    num_classes: usize,
    feature_dim: usize,
    clamp_b: S,
    grad_acc: Option<(&mut [S], S)>,
) -> S {
    let z = logits(theta, &s.x, num_classes, feature_dim);
    let lse = log_sum_exp(&z);
    let ce = lse - z[s.y];
    if ce > clamp_b {
        return clamp_b;
    }
    if let Some((g, scale)) = grad_acc {
        let (gw, gb) = g.split_at_mut(num_classes * feature_dim);
        for c in 0..num_classes {
            let mut delta = (z[c] - lse).exp();
            if c == s.y {
                delta = delta - S::one();
            }
            let delta = delta * scale;
            gw[c * feature_dim..(c + 1) * feature_dim]
                .iter_mut()
                .zip(&s.x)
                .for_each(|(gi, &xi)| *gi = *gi + delta * xi);
            gb[c] = gb[c] + delta;
        }
    }
    ce.max(S::zero())
}

/// Mean loss and its gradient over a batch.
pub fn loss_and_grad<S, B>(params: &ModelParams<S>, batch: &[B], spec: &LossSpec<S>) -> Result<(S, Vec<S>)>
where
    S: Scalar,
    B: Borrow<LabeledSample<S>>,
{
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    check_params(params, spec)?;
    match spec {
        LossSpec::SoftmaxCrossEntropyClamped {
            num_classes,
            feature_dim,
            clamp_b,
        } => {
            let scale = S::one() / S::of(batch.len() as f64);
            let mut g = vec![S::zero(); params.dim()];
            let mut total = S::zero();
            for b in batch {
                let s = b.borrow();
                if s.x.len() != *feature_dim {
                    return Err(Error::DimensionMismatch {
                        expected: *feature_dim,
                        got: s.x.len(),
                    });
                }
                total = total
                    + ce_sample(
                        &params.theta,
                        s,
                        *num_classes,
                        *feature_dim,
                        *clamp_b,
                        Some((&mut g, scale)),
                    );
            }
            Ok((total * scale, g))
        }
        LossSpec::QuadraticTracking { target } => {
            let g: Vec<S> = params.theta.iter().zip(target).map(|(&p, &c)| p - c).collect();
            Ok((S::half() * norm_sq(&g), g))
        }
    }
}

/// Mean per-sample loss over a non-empty batch.
pub fn loss<S, B>(params: &ModelParams<S>, batch: &[B], spec: &LossSpec<S>) -> Result<S>
where
    S: Scalar,
    B: Borrow<LabeledSample<S>>,
{
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    check_params(params, spec)?;
    match spec {
        LossSpec::SoftmaxCrossEntropyClamped {
            num_classes,
            feature_dim,
            clamp_b,
        } => {
            if let Some(s) = batch.iter().map(sample_of).find(|s| s.x.len() != *feature_dim) {
                return Err(Error::DimensionMismatch {
                    expected: *feature_dim,
                    got: s.x.len(),
                });
            }
            Ok(batch_mean(batch, |s: &LabeledSample<S>| {
                ce_sample(&params.theta, s, *num_classes, *feature_dim, *clamp_b, None)
            }))
        }
        LossSpec::QuadraticTracking { .. } => loss_and_grad(params, batch, spec).map(|(l, _)| l),
    }
}

/// Analytic gradient of [`loss`]; saturated samples contribute nothing.
pub fn grad<S, B>(params: &ModelParams<S>, batch: &[B], spec: &LossSpec<S>) -> Result<Vec<S>>
where
    S: Scalar,
    B: Borrow<LabeledSample<S>>,
{
    loss_and_grad(params, batch, spec).map(|(_, g)| g)
}

/// Gradient over the whole pool.
pub fn full_gradient<S: Scalar>(params: &ModelParams<S>, ds: &DatasetState<S>, spec: &LossSpec<S>) -> Result<Vec<S>> {
    grad(params, &ds.pool, spec)
}

/// Loss over the whole pool.
pub fn pool_loss<S: Scalar>(params: &ModelParams<S>, ds: &DatasetState<S>, spec: &LossSpec<S>) -> Result<S> {
    loss(params, &ds.pool, spec)
}

/// Result of one model update.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdOutcome<S> {
    pub params: ModelParams<S>,
    /// Stochastic gradient of the first of the `n` steps, taken at the
    /// parameters the update decision was made with.
    pub first_grad: Vec<S>,
    pub first_grad_norm: S,
}

/// `steps_per_update` SGD steps `θ ← θ − α ∇f(θ; ξ)`, each on a fresh batch.
/// A batch size at least the pool size uses the full pool.
pub fn sgd_update<S: Scalar, R: Rng + ?Sized>(
    params: &ModelParams<S>,
    ds: &DatasetState<S>,
    cfg: &LearnerConfig<S>,
    spec: &LossSpec<S>,
    rng: &mut R,
) -> Result<SgdOutcome<S>> {
    if cfg.steps_per_update == 0 || cfg.batch_size == 0 {
        return Err(Error::invalid("steps_per_update and batch_size must be >= 1"));
    }
    let mut theta = params.clone();
    let mut first: Option<Vec<S>> = None;
    for _ in 0..cfg.steps_per_update {
        let g = if cfg.batch_size >= ds.pool.len() {
            grad(&theta, &ds.pool, spec)?
        } else {
            let batch = ds.sample_batch(cfg.batch_size, rng)?;
            grad(&theta, &batch, spec)?
        };
        theta
            .theta
            .iter_mut()
            .zip(&g)
            .for_each(|(p, &gi)| *p = *p - cfg.alpha * gi);
        if first.is_none() {
            first = Some(g);
        }
    }
    let first_grad = first.expect("at least one step");
    let first_grad_norm = norm(&first_grad);
    Ok(SgdOutcome {
        params: theta,
        first_grad,
        first_grad_norm,
    })
}

/// Fraction of samples whose argmax logit matches the label.
pub fn accuracy<S, B>(params: &ModelParams<S>, holdout: &[B], spec: &LossSpec<S>) -> Result<S>
where
    S: Scalar,
    B: Borrow<LabeledSample<S>>,
{
    let LossSpec::SoftmaxCrossEntropyClamped {
        num_classes,
        feature_dim,
        ..
    } = spec
    else {
        return Err(Error::UnsupportedMode("accuracy needs the classifier"));
    };
    if holdout.is_empty() {
        return Err(Error::EmptyBatch);
    }
    check_params(params, spec)?;
    let correct = holdout
        .iter()
        .map(sample_of)
        .filter(|s| {
            let z = logits(&params.theta, &s.x, *num_classes, *feature_dim);
            let mut best = 0;
            for c in 1..z.len() {
                if z[c] > z[best] {
                    best = c;
                }
            }
            best == s.y
        })
        .count();
    Ok(S::of(correct as f64 / holdout.len() as f64))
}

/// Smoothness constant L of the loss. For the classifier this is the
/// conservative bound `½ · data_bound² + 1`, where `data_bound` bounds the
/// feature norm.
pub fn smoothness_constant<S: Scalar>(spec: &LossSpec<S>, data_bound: S) -> S {
    match spec {
        LossSpec::QuadraticTracking { .. } => S::one(),
        LossSpec::SoftmaxCrossEntropyClamped { .. } => S::half() * data_bound * data_bound + S::one(),
    }
}
