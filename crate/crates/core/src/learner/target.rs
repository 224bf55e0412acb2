use serde::{Deserialize, Serialize};

use crate::drift_env::DriftSchedule;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How the quadratic tracking target `c_t` moves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetPath {
    /// `c_t = start + t · velocity`.
    Linear { start: Vec<f64>, velocity: Vec<f64> },
    /// The target follows the drift schedule: whenever a fraction `r` of the
    /// data is replaced by domain `k`, `c ← c + r (anchors[k] − c)`.
    Anchored {
        start: Vec<f64>,
        anchors: Vec<Vec<f64>>,
    },
}

impl TargetPath {
    pub fn dim(&self) -> usize {
        match self {
            TargetPath::Linear { start, .. } | TargetPath::Anchored { start, .. } => start.len(),
        }
    }

    /// Targets for steps `0..=T`.
    pub fn resolve<S: Scalar>(&self, schedule: &DriftSchedule) -> Result<Vec<Vec<S>>> {
        let horizon = schedule.horizon();
        let conv = |v: &[f64]| v.iter().map(|&x| S::of(x)).collect::<Vec<S>>();
        match self {
            TargetPath::Linear { start, velocity } => {
                if start.len() != velocity.len() {
                    return Err(Error::DimensionMismatch {
                        expected: start.len(),
                        got: velocity.len(),
                    });
                }
                Ok((0..=horizon)
                    .map(|t| {
                        start
                            .iter()
                            .zip(velocity)
                            .map(|(&s, &v)| S::of(s + t as f64 * v))
                            .collect()
                    })
                    .collect())
            }
            TargetPath::Anchored { start, anchors } => {
                if let Some(a) = anchors.iter().find(|a| a.len() != start.len()) {
                    return Err(Error::DimensionMismatch {
                        expected: start.len(),
                        got: a.len(),
                    });
                }
                let mut c = conv(start);
                let mut out = Vec::with_capacity(horizon + 1);
                out.push(c.clone());
                for t in 0..horizon {
                    let step = schedule.step(t)?;
                    if let Some(k) = step.incoming.filter(|_| step.rate > 0.0) {
                        let anchor = anchors.get(k).ok_or_else(|| {
                            Error::invalid(format!("no target anchor for domain {k}"))
                        })?;
                        let r = S::of(step.rate);
                        c.iter_mut()
                            .zip(anchor)
                            .for_each(|(ci, &a)| *ci = *ci + r * (S::of(a) - *ci));
                    }
                    out.push(c.clone());
                }
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift_env::ScheduleKind;

    #[test]
    fn linear_path() {
        let s = DriftSchedule::new(ScheduleKind::Constant, 3).unwrap();
        let p = TargetPath::Linear {
            start: vec![1.0],
            velocity: vec![0.5],
        };
        let c: Vec<Vec<f64>> = p.resolve(&s).unwrap();
        assert_eq!(c, vec![vec![1.0], vec![1.5], vec![2.0], vec![2.5]]);
    }

    #[test]
    fn anchored_path_moves_with_drift() {
        let s = DriftSchedule::new(
            ScheduleKind::Burst {
                events: vec![1],
                rates: vec![0.5],
                incoming: vec![1],
            },
            3,
        )
        .unwrap();
        let p = TargetPath::Anchored {
            start: vec![0.0, 0.0],
            anchors: vec![vec![0.0, 0.0], vec![2.0, 4.0]],
        };
        let c: Vec<Vec<f64>> = p.resolve(&s).unwrap();
        assert_eq!(c[1], vec![0.0, 0.0]);
        assert_eq!(c[2], vec![1.0, 2.0]);
        assert_eq!(c[3], vec![1.0, 2.0]);
    }
}
