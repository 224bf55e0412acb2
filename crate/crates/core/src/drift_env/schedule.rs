use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Configuration of a drift schedule. Rates are replacement fractions of the
/// pool per step; `incoming` lists the domain ids that are cycled through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleKind {
    Constant,
    /// High-rate replacement at fixed event times, nothing in between.
    Burst {
        events: Vec<usize>,
        rates: Vec<f64>,
        incoming: Vec<usize>,
    },
    /// No drift before `onset`, then a constant low rate; the incoming domain
    /// advances through `incoming` every `segment_len` steps.
    Step {
        onset: usize,
        rate: f64,
        segment_len: usize,
        incoming: Vec<usize>,
    },
    /// Low-rate influx during the first `active_len` steps of every period.
    Wave {
        #[serde(default)]
        offset: usize,
        period: usize,
        active_len: usize,
        rate: f64,
        incoming: Vec<usize>,
    },
    /// `count` spikes at seeded random start times; each lasts `duration`
    /// steps at a rate drawn uniformly from `[rate_min, rate_max]`.
    Spikes {
        count: usize,
        duration: usize,
        rate_min: f64,
        rate_max: f64,
        incoming: Vec<usize>,
        seed: u64,
    },
}

impl ScheduleKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScheduleKind::Constant => "constant",
            ScheduleKind::Burst { .. } => "burst",
            ScheduleKind::Step { .. } => "step",
            ScheduleKind::Wave { .. } => "wave",
            ScheduleKind::Spikes { .. } => "spikes",
        }
    }

    fn incoming(&self) -> &[usize] {
        match self {
            ScheduleKind::Constant => &[],
            ScheduleKind::Burst { incoming, .. }
            | ScheduleKind::Step { incoming, .. }
            | ScheduleKind::Wave { incoming, .. }
            | ScheduleKind::Spikes { incoming, .. } => incoming,
        }
    }
}

/// What happens to the pool at one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriftStep {
    pub rate: f64,
    pub incoming: Option<usize>,
}

/// A schedule resolved over a fixed horizon. Spike times are drawn once at
/// construction, so lookups are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftSchedule {
    kind: ScheduleKind,
    horizon: usize,
    plan: Vec<DriftStep>,
    /// Start times of discrete events (burst events or spike starts).
    event_times: Vec<usize>,
}

fn check_rate(r: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::invalid(format!("drift rate {r} outside [0, 1]")))
    }
}

impl DriftSchedule {
    pub fn new(kind: ScheduleKind, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon must be >= 1"));
        }
        if !matches!(kind, ScheduleKind::Constant) && kind.incoming().is_empty() {
            return Err(Error::invalid(format!(
                "{} schedule needs at least one incoming domain",
                kind.name()
            )));
        }
        let mut plan = vec![DriftStep::default(); horizon];
        let mut event_times = Vec::new();
        match &kind {
            ScheduleKind::Constant => {}
            ScheduleKind::Burst {
                events,
                rates,
                incoming,
            } => {
                if events.len() != rates.len() {
                    return Err(Error::invalid(format!(
                        "burst: {} events but {} rates",
                        events.len(),
                        rates.len()
                    )));
                }
                for (i, (&t, &r)) in events.iter().zip(rates).enumerate() {
                    check_rate(r)?;
                    if t >= horizon {
                        return Err(Error::OutOfHorizon { t, horizon });
                    }
                    if i > 0 && t <= events[i - 1] {
                        return Err(Error::invalid("burst event times must be strictly increasing"));
                    }
                    plan[t] = DriftStep {
                        rate: r,
                        incoming: Some(incoming[i % incoming.len()]),
                    };
                }
                event_times = events.clone();
            }
            ScheduleKind::Step {
                onset,
                rate,
                segment_len,
                incoming,
            } => {
                check_rate(*rate)?;
                if *segment_len == 0 {
                    return Err(Error::invalid("step: segment_len must be >= 1"));
                }
                for (t, slot) in plan.iter_mut().enumerate().skip(*onset) {
                    let k = ((t - onset) / segment_len) % incoming.len();
                    *slot = DriftStep {
                        rate: *rate,
                        incoming: Some(incoming[k]),
                    };
                }
                if *onset < horizon {
                    event_times.push(*onset);
                }
            }
            ScheduleKind::Wave {
                offset,
                period,
                active_len,
                rate,
                incoming,
            } => {
                check_rate(*rate)?;
                if *period == 0 || *active_len > *period {
                    return Err(Error::invalid("wave: need 0 < active_len <= period"));
                }
                for (t, slot) in plan.iter_mut().enumerate().skip(*offset) {
                    let phase = (t - offset) % period;
                    if phase < *active_len {
                        let k = ((t - offset) / period) % incoming.len();
                        *slot = DriftStep {
                            rate: *rate,
                            incoming: Some(incoming[k]),
                        };
                        if phase == 0 {
                            event_times.push(t);
                        }
                    }
                }
            }
            ScheduleKind::Spikes {
                count,
                duration,
                rate_min,
                rate_max,
                incoming,
                seed,
            } => {
                check_rate(*rate_min)?;
                check_rate(*rate_max)?;
                if rate_min > rate_max {
                    return Err(Error::invalid("spikes: rate_min > rate_max"));
                }
                if *count > horizon {
                    return Err(Error::invalid(format!(
                        "spikes: {count} spikes do not fit in horizon {horizon}"
                    )));
                }
                if *duration == 0 {
                    return Err(Error::invalid("spikes: duration must be >= 1"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut starts = index::sample(&mut rng, horizon, *count).into_vec();
                starts.sort_unstable();
                for (i, &start) in starts.iter().enumerate() {
                    let r = if rate_max > rate_min {
                        rng.random_range(*rate_min..=*rate_max)
                    } else {
                        *rate_min
                    };
                    let dom = incoming[i % incoming.len()];
                    for slot in plan.iter_mut().skip(start).take(*duration) {
                        *slot = DriftStep {
                            rate: r,
                            incoming: Some(dom),
                        };
                    }
                }
                event_times = starts;
            }
        }
        Ok(Self {
            kind,
            horizon,
            plan,
            event_times,
        })
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn event_times(&self) -> &[usize] {
        &self.event_times
    }

    pub fn step(&self, t: usize) -> Result<DriftStep> {
        self.plan.get(t).copied().ok_or(Error::OutOfHorizon {
            t,
            horizon: self.horizon,
        })
    }

    /// Fraction of the pool replaced at step `t`.
    pub fn drift_rate(&self, t: usize) -> Result<f64> {
        Ok(self.step(t)?.rate)
    }

    pub fn incoming_domain(&self, t: usize) -> Result<Option<usize>> {
        Ok(self.step(t)?.incoming)
    }

    /// Every domain id the schedule may bring in.
    pub fn referenced_domains(&self) -> &[usize] {
        self.kind.incoming()
    }

    pub fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        self.plan.iter().map(|s| s.rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn burst() -> DriftSchedule {
        DriftSchedule::new(
            ScheduleKind::Burst {
                events: vec![50],
                rates: vec![0.8],
                incoming: vec![1],
            },
            250,
        )
        .unwrap()
    }

    #[test]
    fn constant_is_zero_everywhere() {
        let s = DriftSchedule::new(ScheduleKind::Constant, 100).unwrap();
        assert!((0..100).all(|t| s.drift_rate(t).unwrap() == 0.0));
        assert_eq!(s.incoming_domain(3).unwrap(), None);
    }

    #[test]
    fn burst_fires_only_at_events() {
        let s = burst();
        assert_eq!(s.drift_rate(50).unwrap(), 0.8);
        assert_eq!(s.drift_rate(49).unwrap(), 0.0);
        assert_eq!(s.drift_rate(51).unwrap(), 0.0);
        assert_eq!(s.incoming_domain(50).unwrap(), Some(1));
    }

    #[test]
    fn out_of_horizon_rejected() {
        let s = burst();
        assert!(matches!(
            s.drift_rate(250),
            Err(Error::OutOfHorizon { t: 250, horizon: 250 })
        ));
    }

    #[test]
    fn spikes_are_deterministic_for_seed() {
        let kind = ScheduleKind::Spikes {
            count: 8,
            duration: 4,
            rate_min: 0.1,
            rate_max: 0.5,
            incoming: vec![1, 2],
            seed: 11,
        };
        let a = DriftSchedule::new(kind.clone(), 250).unwrap();
        let b = DriftSchedule::new(kind, 250).unwrap();
        assert_eq!(a.drift_rate(100).unwrap(), b.drift_rate(100).unwrap());
        assert_eq!(a, b);
        assert!(a.event_times().windows(2).all(|w| w[0] < w[1]));
        assert!(a.rates().all(|r| r == 0.0 || (0.1..=0.5).contains(&r)));
        assert!(a.rates().any(|r| r > 0.0));
    }

    #[test]
    fn step_switches_domains_by_segment() {
        let s = DriftSchedule::new(
            ScheduleKind::Step {
                onset: 10,
                rate: 0.05,
                segment_len: 5,
                incoming: vec![1, 2, 0],
            },
            40,
        )
        .unwrap();
        assert_eq!(s.drift_rate(9).unwrap(), 0.0);
        assert_eq!(s.drift_rate(10).unwrap(), 0.05);
        assert_eq!(s.incoming_domain(14).unwrap(), Some(1));
        assert_eq!(s.incoming_domain(15).unwrap(), Some(2));
        assert_eq!(s.incoming_domain(20).unwrap(), Some(0));
        assert_eq!(s.incoming_domain(25).unwrap(), Some(1));
    }

    #[test]
    fn wave_is_periodic() {
        let s = DriftSchedule::new(
            ScheduleKind::Wave {
                offset: 0,
                period: 10,
                active_len: 3,
                rate: 0.04,
                incoming: vec![1],
            },
            50,
        )
        .unwrap();
        let active: Vec<usize> = (0..50).filter(|&t| s.drift_rate(t).unwrap() > 0.0).collect();
        assert_eq!(&active[..6], &[0, 1, 2, 10, 11, 12]);
        assert_eq!(s.event_times(), &[0, 10, 20, 30, 40]);
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad_rate = ScheduleKind::Burst {
            events: vec![1],
            rates: vec![1.5],
            incoming: vec![1],
        };
        assert!(DriftSchedule::new(bad_rate, 10).is_err());
        let unordered = ScheduleKind::Burst {
            events: vec![5, 5],
            rates: vec![0.5, 0.5],
            incoming: vec![1],
        };
        assert!(DriftSchedule::new(unordered, 10).is_err());
        let late = ScheduleKind::Burst {
            events: vec![10],
            rates: vec![0.5],
            incoming: vec![1],
        };
        assert!(DriftSchedule::new(late, 10).is_err());
        let no_domains = ScheduleKind::Step {
            onset: 0,
            rate: 0.1,
            segment_len: 1,
            incoming: vec![],
        };
        assert!(DriftSchedule::new(no_domains, 10).is_err());
    }
}
