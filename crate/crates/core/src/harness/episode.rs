use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{measure_sigma_sq, BoundReport};
use crate::drift_env::{DatasetState, DomainSpec, DriftSchedule, DriftStreams, LabeledSample};
use crate::error::{Error, Result};
use crate::learner::{accuracy, full_gradient, loss, pool_loss, sgd_update, LearnerConfig, LossSpec, ModelParams};
use crate::policies::{queue_step, CostModel, Histories, Policy, PolicyState, VirtualQueue};
use crate::scalar::norm;
use crate::trace::{OracleRecord, RunSummary, RunTrace, StepRecord};

/// Data the inference loss `f_t` is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceSource {
    #[default]
    Holdout,
    Training,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Clamped softmax classifier; parameters start at zero and are
    /// pretrained on the source pool.
    Classifier { clamp_b: f64 },
    /// Quadratic tracking with precomputed targets for steps `0..=T`.
    Quadratic {
        targets: Arc<Vec<Vec<f64>>>,
        theta0: Vec<f64>,
    },
}

/// Everything one episode needs, fully resolved.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub horizon: usize,
    pub schedule: DriftSchedule,
    pub domains: Arc<Vec<DomainSpec<f64>>>,
    pub pool_size: usize,
    pub holdout_size: usize,
    pub inference: InferenceSource,
    /// Batch for `f_t`; `None` uses the whole holdout (or the learner batch
    /// size for training-data inference).
    pub inference_batch: Option<usize>,
    pub pretrain_steps: usize,
    pub learner: LearnerConfig<f64>,
    pub objective: Objective,
    pub policy: Policy<f64>,
    pub policy_label: String,
    pub cost: CostModel<f64>,
    pub avg_cost: f64,
    pub l_smooth: f64,
    pub seeds: Vec<u64>,
    pub oracle_mode: bool,
    pub sigma_trials: usize,
    pub sigma_checkpoints: usize,
    /// δ(t) for `t < T`.
    pub delta_series: Arc<Vec<f64>>,
}

// Substreams of the per-seed generator; the data streams use 1 and 2.
const LEARNER_STREAM: u64 = 3;
const POLICY_STREAM: u64 = 4;
const EVAL_STREAM: u64 = 5;
const PRETRAIN_STREAM: u64 = 6;
const ORACLE_STREAM: u64 = 7;

pub(crate) fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be >= 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        if self.schedule.horizon() != self.horizon {
            return Err(Error::invalid("schedule horizon differs from the run horizon"));
        }
        if self.delta_series.len() < self.horizon {
            return Err(Error::DimensionMismatch {
                expected: self.horizon,
                got: self.delta_series.len(),
            });
        }
        if self.domains.is_empty() {
            return Err(Error::invalid("at least one domain is required"));
        }
        if let Some(&k) = self.schedule.referenced_domains().iter().find(|&&k| k >= self.domains.len()) {
            return Err(Error::invalid(format!(
                "schedule references domain {k} but only {} exist",
                self.domains.len()
            )));
        }
        if self.inference_batch == Some(0) {
            return Err(Error::invalid("inference_batch must be >= 1"));
        }
        if self.oracle_mode && self.sigma_trials == 0 {
            return Err(Error::invalid("sigma_trials must be >= 1"));
        }
        if let Objective::Quadratic { targets, theta0 } = &self.objective {
            if targets.len() != self.horizon + 1 {
                return Err(Error::DimensionMismatch {
                    expected: self.horizon + 1,
                    got: targets.len(),
                });
            }
            if targets.iter().any(|c| c.len() != theta0.len()) {
                return Err(Error::invalid("targets and theta0 differ in dimension"));
            }
        }
        self.learner.validate(self.l_smooth)?;
        self.cost.validate(self.avg_cost)?;
        if let Policy::Rccda(p) = &self.policy {
            p.validate()?;
        }
        Ok(())
    }

    /// Loss at step `t` (the quadratic target moves; the classifier does not).
    pub fn spec_at(&self, t: usize) -> LossSpec<f64> {
        match &self.objective {
            Objective::Classifier { clamp_b } => {
                let d = &self.domains[0];
                LossSpec::SoftmaxCrossEntropyClamped {
                    num_classes: d.num_classes,
                    feature_dim: d.feature_dim,
                    clamp_b: *clamp_b,
                }
            }
            Objective::Quadratic { targets, .. } => LossSpec::QuadraticTracking {
                target: targets[t].clone(),
            },
        }
    }

    pub fn loss_bound(&self) -> Option<f64> {
        match self.objective {
            Objective::Classifier { clamp_b } => Some(clamp_b),
            Objective::Quadratic { .. } => None,
        }
    }

    /// Stable fingerprint of the resolved configuration.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("{self:?}").as_bytes());
        hex(&h.finalize())
    }

    fn initial_params(&self, ds: &DatasetState<f64>, seed: u64) -> Result<ModelParams<f64>> {
        match &self.objective {
            Objective::Quadratic { theta0, .. } => ModelParams::from_vec(theta0.clone()),
            Objective::Classifier { .. } => {
                let spec = self.spec_at(0);
                let mut params = ModelParams::zeros(crate::learner::param_dim(&spec));
                if self.pretrain_steps > 0 {
                    let mut rng = substream(seed, PRETRAIN_STREAM);
                    let cfg = LearnerConfig {
                        steps_per_update: self.pretrain_steps,
                        ..self.learner
                    };
                    params = sgd_update(&params, ds, &cfg, &spec, &mut rng)?.params;
                }
                Ok(params)
            }
        }
    }

    fn checkpoint_every(&self) -> usize {
        (self.horizon / self.sigma_checkpoints.max(1)).max(1)
    }
}

fn digest_data(h: &mut Sha256, ds: &DatasetState<f64>) {
    for s in ds.pool.iter().chain(&ds.holdout) {
        h.update(s.id.to_le_bytes());
    }
    for c in &ds.composition {
        h.update(c.to_bits().to_le_bytes());
    }
}

/// Runs one episode of the inference / decide / update / queue / drift loop.
pub fn run_episode(cfg: &RunConfig, seed: u64) -> Result<RunTrace> {
    cfg.validate()?;
    let domains = cfg.domains.as_slice();
    let mut streams = DriftStreams::new(seed);
    let mut ds = DatasetState::new(domains, 0, cfg.pool_size, cfg.holdout_size, &mut streams)?;
    let mut learner_rng = substream(seed, LEARNER_STREAM);
    let mut policy_rng = substream(seed, POLICY_STREAM);
    let mut eval_rng = substream(seed, EVAL_STREAM);
    let mut oracle_rng = substream(seed, ORACLE_STREAM);
    let mut stream_hash = Sha256::new();
    digest_data(&mut stream_hash, &ds);

    let mut params = cfg.initial_params(&ds, seed)?;
    let mut q = VirtualQueue::<f64>::empty();
    let mut h = Histories::new();
    let mut state = PolicyState::new(cfg.policy.clone(), cfg.avg_cost);
    let mut records = Vec::with_capacity(cfg.horizon);
    let mut sigma_sq: Option<f64> = None;
    let mut initial_pool_loss = None;
    let classifier = matches!(cfg.objective, Objective::Classifier { .. });

    for t in 0..cfg.horizon {
        let spec = cfg.spec_at(t);
        let f_t = inference_loss(cfg, &params, &ds, &spec, &mut eval_rng)?;
        let acc = if classifier {
            accuracy(&params, &ds.holdout, &spec)?
        } else {
            f64::NAN
        };
        h.push_loss(f_t);
        let lam_t = cfg.cost.cost(t);
        let decision = state.decide(t, &h, q, lam_t, &mut policy_rng)?;

        let pool_loss_t = if cfg.oracle_mode {
            if t % cfg.checkpoint_every() == 0 {
                let s = measure_sigma_sq(
                    &params,
                    &ds,
                    &spec,
                    cfg.learner.batch_size,
                    cfg.sigma_trials,
                    &mut oracle_rng,
                )?;
                sigma_sq = Some(sigma_sq.map_or(s, |m| m.max(s)));
            }
            let l = pool_loss(&params, &ds, &spec)?;
            initial_pool_loss.get_or_insert(l);
            Some(l)
        } else {
            None
        };

        let mut next_params = None;
        let mut update_grad_norm = 0.0;
        if decision.update {
            let out = sgd_update(&params, &ds, &cfg.learner, &spec, &mut learner_rng)?;
            h.record_gradient(t, out.first_grad_norm);
            update_grad_norm = out.first_grad_norm;
            next_params = Some(out.params);
        }
        state.commit(decision.update, lam_t);
        h.push_decision(decision.update);
        let q_t = q.q;
        q = queue_step(q, lam_t, decision.update, cfg.avg_cost)?;

        let composition = ds.composition.clone();
        ds.advance(&cfg.schedule, domains, &mut streams)?;
        digest_data(&mut stream_hash, &ds);

        let oracle = match pool_loss_t {
            Some(pl) => {
                let spec_next = cfg.spec_at(t + 1);
                let after = pool_loss(&params, &ds, &spec_next)?;
                Some(OracleRecord {
                    grad_norm_true: norm(&full_gradient(&params, &ds, &spec_next)?),
                    drift_loss: after - pl,
                    pool_loss: pl,
                })
            }
            None => None,
        };
        records.push(StepRecord {
            t,
            f_t,
            pi_t: decision.update,
            q_t,
            accuracy: acc,
            drift_rate: cfg.schedule.drift_rate(t)?,
            delta_t: cfg.delta_series[t],
            ghat: decision.ghat,
            lambda_t: lam_t,
            update_grad_norm,
            composition,
            oracle,
        });
        if let Some(p) = next_params {
            params = p;
        }
    }

    let final_pool_loss = if cfg.oracle_mode {
        Some(pool_loss(&params, &ds, &cfg.spec_at(cfg.horizon))?)
    } else {
        None
    };
    let summary = summarize(
        cfg,
        seed,
        &records,
        q.q,
        initial_pool_loss,
        final_pool_loss,
        sigma_sq,
        hex(&stream_hash.finalize()),
    );
    let mut trace = RunTrace {
        config_digest: cfg.digest(),
        records,
        summary,
    };
    trace.summary.bound_reports = super::checks::episode_reports(cfg, &trace)?;
    Ok(trace)
}

fn inference_loss(
    cfg: &RunConfig,
    params: &ModelParams<f64>,
    ds: &DatasetState<f64>,
    spec: &LossSpec<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let (source, default_batch): (&[LabeledSample<f64>], usize) = match cfg.inference {
        InferenceSource::Holdout => (&ds.holdout, ds.holdout.len()),
        InferenceSource::Training => (&ds.pool, cfg.learner.batch_size),
    };
    let b = cfg.inference_batch.unwrap_or(default_batch);
    if b >= source.len() {
        loss(params, source, spec)
    } else {
        let batch = crate::drift_env::sample_without_replacement(source, b, rng)?;
        loss(params, &batch, spec)
    }
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    cfg: &RunConfig,
    seed: u64,
    records: &[StepRecord],
    final_queue: f64,
    initial_pool_loss: Option<f64>,
    final_pool_loss: Option<f64>,
    sigma_sq: Option<f64>,
    stream_digest: String,
) -> RunSummary {
    let t = records.len() as f64;
    let update_count = records.iter().filter(|r| r.pi_t).count();
    let spent: f64 = records.iter().filter(|r| r.pi_t).map(|r| r.lambda_t).sum();
    let mean_accuracy = match cfg.objective {
        Objective::Classifier { .. } => Some(records.iter().map(|r| r.accuracy).sum::<f64>() / t),
        Objective::Quadratic { .. } => None,
    };
    RunSummary {
        policy: cfg.policy_label.clone(),
        schedule: cfg.schedule.name().to_string(),
        seed,
        horizon: cfg.horizon,
        mean_accuracy,
        update_rate: update_count as f64 / t,
        update_count,
        violation: spent / t - cfg.avg_cost,
        final_queue,
        avg_cost: cfg.avg_cost,
        initial_pool_loss,
        final_pool_loss,
        sigma_sq,
        stream_digest,
        bound_reports: Vec::<BoundReport>::new(),
    }
}

pub(crate) fn policy_rng(seed: u64) -> ChaCha8Rng {
    substream(seed, POLICY_STREAM)
}
