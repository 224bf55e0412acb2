use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Gradient information recorded when the model is updated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientRecord<S> {
    pub step: usize,
    /// Norm of the stochastic gradient of the update's first SGD step.
    pub norm: S,
    /// `|f_t − f_{t−1}|` at the update step, absent at `t = 0`.
    pub loss_delta: Option<S>,
}

/// Loss, gradient and decision histories of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Histories<S> {
    losses: Vec<S>,
    running_min: S,
    gradients: Vec<GradientRecord<S>>,
    decisions: Vec<bool>,
}

impl<S: Scalar> Default for Histories<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Histories<S> {
    pub fn new() -> Self {
        Self {
            losses: Vec::new(),
            running_min: S::infinity(),
            gradients: Vec::new(),
            decisions: Vec::new(),
        }
    }

    pub fn push_loss(&mut self, f: S) {
        self.running_min = self.running_min.min(f);
        self.losses.push(f);
    }

    /// Records the gradient norm of an update taken at `step`.
    pub fn record_gradient(&mut self, step: usize, norm: S) {
        let loss_delta = match (step.checked_sub(1), self.losses.get(step)) {
            (Some(prev), Some(&now)) => self.losses.get(prev).map(|&p| (now - p).abs()),
            _ => None,
        };
        self.gradients.push(GradientRecord {
            step,
            norm,
            loss_delta,
        });
    }

    pub fn push_decision(&mut self, update: bool) {
        self.decisions.push(update);
    }

    pub fn losses(&self) -> &[S] {
        &self.losses
    }

    /// Minimum over all recorded losses (+∞ when empty).
    pub fn running_min_loss(&self) -> S {
        self.running_min
    }

    pub fn gradients(&self) -> &[GradientRecord<S>] {
        &self.gradients
    }

    pub fn decisions(&self) -> &[bool] {
        &self.decisions
    }

    pub fn update_count(&self) -> usize {
        self.decisions.iter().filter(|&&d| d).count()
    }

    pub fn last_loss(&self) -> Option<S> {
        self.losses.last().copied()
    }
}
