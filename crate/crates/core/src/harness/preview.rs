use serde::{Deserialize, Serialize};

use crate::drift_env::{schedule_kl_series, DatasetState, DomainSpec, DriftSchedule, DriftStreams};
use crate::error::Result;

/// Drift rates, drift magnitudes and pool composition of one schedule,
/// obtained by advancing the data alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulePreview {
    pub name: String,
    pub drift_rate: Vec<f64>,
    pub delta: Vec<f64>,
    /// Composition of the pool at each step `0..T`, before that step's drift.
    pub composition: Vec<Vec<f64>>,
}

pub fn preview_schedule(
    schedule: &DriftSchedule,
    domains: &[DomainSpec<f64>],
    pool_size: usize,
    holdout_size: usize,
    seed: u64,
) -> Result<SchedulePreview> {
    let delta = schedule_kl_series(schedule, domains)?;
    let mut streams = DriftStreams::new(seed);
    let mut ds = DatasetState::new(domains, 0, pool_size, holdout_size, &mut streams)?;
    let mut drift_rate = Vec::with_capacity(schedule.horizon());
    let mut composition = Vec::with_capacity(schedule.horizon());
    for t in 0..schedule.horizon() {
        drift_rate.push(schedule.drift_rate(t)?);
        composition.push(ds.composition.clone());
        ds.advance(schedule, domains, &mut streams)?;
    }
    Ok(SchedulePreview {
        name: schedule.name().to_string(),
        drift_rate,
        delta,
        composition,
    })
}
