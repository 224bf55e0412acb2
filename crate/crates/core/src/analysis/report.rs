use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Absolute tolerance used when deciding whether `lhs ≤ rhs`.
pub const BOUND_TOLERANCE: f64 = 1e-9;

/// Outcome of one inequality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    /// `rhs − lhs`.
    pub slack: f64,
}

impl BoundReport {
    pub fn new<S: Scalar>(name: impl Into<String>, lhs: S, rhs: S) -> Self {
        let (lhs, rhs) = (lhs.to_real(), rhs.to_real());
        Self {
            name: name.into(),
            lhs,
            rhs,
            satisfied: lhs <= rhs + BOUND_TOLERANCE,
            slack: rhs - lhs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn satisfied_within_tolerance() {
        assert!(BoundReport::new("a", 1.0 + 1e-10, 1.0).satisfied);
        assert!(!BoundReport::new("b", 1.0 + 1e-8, 1.0).satisfied);
        let r = BoundReport::new("c", 0.25f32, 1.0);
        assert_eq!(r.slack, 0.75);
    }
}
