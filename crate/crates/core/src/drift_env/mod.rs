//! Synthetic drifting data: Gaussian domains, drift schedules, the drifting
//! pool/holdout pair, and exact drift magnitudes.

mod dataset;
mod domain;
pub mod kl;
mod schedule;

pub use dataset::{replacement_count, DatasetState, DriftStreams};
pub(crate) use dataset::{batch_mean, sample_without_replacement};
pub use domain::{make_domain, DomainSpec, LabeledSample};
pub use kl::{discrete_kl, domain_kl, l1_distance, mixture_kl, schedule_kl, schedule_kl_series};
pub use schedule::{DriftSchedule, DriftStep, ScheduleKind};
