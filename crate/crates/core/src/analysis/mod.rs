//! Numerical checks of the convergence, stability and Pinsker bounds.

mod bounds;
mod empirical;
mod report;

pub use bounds::{
    convergence_rhs, corollary_rhs, pinsker_loss_bound, stability_rhs, CorollaryBound,
    StabilityBound, TheoremConstants,
};
pub use empirical::{
    constraint_violation, drift_induced_loss, measure_p_min, measure_sigma_sq, pinsker_battery, pinsker_check,
    pinsker_step_check, queue_bound_check, update_frequency,
};
pub use report::{BoundReport, BOUND_TOLERANCE};
