use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dist_sq, Scalar};

/// A source of labeled data: one isotropic Gaussian per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec<S> {
    pub id: usize,
    pub class_means: Vec<Vec<S>>,
    /// Per-coordinate variance of every class-conditional Gaussian.
    pub class_cov_scale: S,
    pub num_classes: usize,
    pub feature_dim: usize,
}

/// One observation. `domain` and `id` are bookkeeping carried along with the
/// pair so that pool composition and stream identity stay exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample<S> {
    pub x: Vec<S>,
    pub y: usize,
    pub domain: usize,
    pub id: u64,
}

impl<S: Scalar> DomainSpec<S> {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::invalid(format!(
                "domain {}: num_classes must be >= 2, got {}",
                self.id, self.num_classes
            )));
        }
        if self.feature_dim == 0 {
            return Err(Error::invalid(format!("domain {}: feature_dim must be >= 1", self.id)));
        }
        if !(self.class_cov_scale > S::zero()) || !self.class_cov_scale.is_finite() {
            return Err(Error::invalid(format!(
                "domain {}: class_cov_scale must be positive and finite",
                self.id
            )));
        }
        if self.class_means.len() != self.num_classes {
            return Err(Error::DimensionMismatch {
                expected: self.num_classes,
                got: self.class_means.len(),
            });
        }
        for m in &self.class_means {
            if m.len() != self.feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.feature_dim,
                    got: m.len(),
                });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("domain {}: non-finite class mean", self.id)));
            }
        }
        Ok(())
    }

    /// Draws a sample with a uniformly chosen class label.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, id: u64) -> LabeledSample<S> {
        let y = rng.random_range(0..self.num_classes);
        let sd = self.class_cov_scale.sqrt();
        let x = self.class_means[y]
            .iter()
            .map(|&m| {
                let z: f64 = rng.sample(StandardNormal);
                m + sd * S::of(z)
            })
            .collect();
        LabeledSample {
            x,
            y,
            domain: self.id,
            id,
        }
    }

    /// Largest class-mean norm; used to size the feature bound.
    pub fn max_mean_norm(&self) -> S {
        self.class_means
            .iter()
            .map(|m| crate::scalar::norm(m))
            .fold(S::zero(), S::max)
    }
}

/// Places `num_classes` class means uniformly in a cube, rejecting candidates
/// closer than `separation` to an already placed mean. The cube widens if
/// placement stalls, so the call always terminates.
pub fn make_domain<S: Scalar>(
    id: usize,
    num_classes: usize,
    feature_dim: usize,
    separation: S,
    cov_scale: S,
    rng_seed: u64,
) -> Result<DomainSpec<S>> {
    if num_classes < 2 {
        return Err(Error::invalid(format!("num_classes must be >= 2, got {num_classes}")));
    }
    if feature_dim == 0 {
        return Err(Error::invalid("feature_dim must be >= 1"));
    }
    if !(separation > S::zero()) || !separation.is_finite() {
        return Err(Error::invalid("separation must be positive"));
    }
    if !(cov_scale > S::zero()) || !cov_scale.is_finite() {
        return Err(Error::invalid("cov_scale must be positive"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let sep = separation.to_real();
    let sep_sq = separation * separation;
    let mut half_width = sep * (num_classes as f64).powf(1.0 / feature_dim as f64).max(1.0);
    let mut means: Vec<Vec<S>> = Vec::with_capacity(num_classes);
    let mut failures = 0usize;
    while means.len() < num_classes {
        let cand: Vec<S> = (0..feature_dim)
            .map(|_| S::of(rng.random_range(-half_width..=half_width)))
            .collect();
        if means.iter().all(|m| dist_sq(m, &cand) >= sep_sq) {
            means.push(cand);
            failures = 0;
        } else {
            failures += 1;
            if failures >= 1000 {
                half_width *= 1.5;
                failures = 0;
            }
        }
    }

    let spec = DomainSpec {
        id,
        class_means: means,
        class_cov_scale: cov_scale,
        num_classes,
        feature_dim,
    };
    spec.validate()?;
    Ok(spec)
}
