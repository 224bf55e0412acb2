//! The suite configuration file: parsing, dotted-path overrides and
//! resolution into per-episode [`RunConfig`]s.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use toml::Value;

/// Value of a dotted-path override.
pub use toml::Value as OverrideValue;

use crate::drift_env::{make_domain, schedule_kl_series, DomainSpec, DriftSchedule, ScheduleKind};
use crate::error::{Error, Result};
use crate::harness::{AnalysisSettings, InferenceSource, Objective, RunConfig};
use crate::learner::{smoothness_constant, LearnerConfig, LossSpec, TargetPath};
use crate::policies::{BaselineConfig, CostModel, EstimatorSpec, Policy, PolicyConfig, ThresholdForm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub horizon: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub oracle_mode: bool,
    pub data: DataSection,
    pub schedules: Vec<ScheduleKind>,
    pub learner: LearnerSection,
    pub costs: CostSection,
    pub policies: Vec<PolicySection>,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Override path → values, expanded into a cartesian product by `sweep`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sweep: BTreeMap<String, Vec<Value>>,
}

fn default_pretrain() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub pool_size: usize,
    pub holdout_size: usize,
    #[serde(default)]
    pub num_domains: usize,
    #[serde(default)]
    pub num_classes: usize,
    #[serde(default)]
    pub feature_dim: usize,
    #[serde(default)]
    pub separation: f64,
    #[serde(default)]
    pub cov_scale: f64,
    #[serde(default)]
    pub domain_seed: u64,
    /// Explicit domains; replace the generated ones when given.
    #[serde(default)]
    pub domains: Option<Vec<DomainSpec<f64>>>,
    #[serde(default)]
    pub inference: InferenceSource,
    #[serde(default)]
    pub inference_batch: Option<usize>,
    #[serde(default = "default_pretrain")]
    pub pretrain_steps: usize,
    /// Feature-norm bound used for the smoothness constant.
    #[serde(default)]
    pub data_bound: Option<f64>,
}

fn default_steps() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSection {
    pub alpha: f64,
    #[serde(default = "default_steps")]
    pub steps_per_update: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub objective: ObjectiveSection,
    /// Replaces the computed smoothness constant.
    #[serde(default)]
    pub l_smooth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSection {
    Classifier {
        #[serde(default)]
        clamp_b: Option<f64>,
    },
    Quadratic { theta0: Vec<f64>, target: TargetPath },
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        ObjectiveSection::Classifier { clamp_b: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    /// Constant per-update cost λ.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Cyclic per-update costs, `cyclic[t mod len]`.
    #[serde(default)]
    pub cyclic: Option<Vec<f64>>,
    pub lambda_bar: f64,
}

impl CostSection {
    pub fn model(&self) -> Result<CostModel<f64>> {
        match (&self.lambda, &self.cyclic) {
            (Some(l), None) => Ok(CostModel::Constant { lambda: *l }),
            (None, Some(v)) => Ok(CostModel::Cyclic { values: v.clone() }),
            _ => Err(Error::Config(
                "costs: set exactly one of `lambda` and `cyclic`".into(),
            )),
        }
    }

    fn mean_cost(&self) -> f64 {
        match (&self.lambda, &self.cyclic) {
            (Some(l), _) => *l,
            (None, Some(v)) if !v.is_empty() => v.iter().sum::<f64>() / v.len() as f64,
            _ => f64::NAN,
        }
    }
}

fn default_estimator() -> EstimatorSpec<f64> {
    EstimatorSpec::LossDiffConstant { k_d: 1.0 }
}
fn default_consec() -> usize {
    2
}
fn default_window() -> usize {
    5
}
fn default_eps() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySection {
    Rccda {
        #[serde(default)]
        label: Option<String>,
        v_weight: f64,
        #[serde(default = "default_estimator")]
        estimator: EstimatorSpec<f64>,
        #[serde(default)]
        threshold_form: ThresholdForm,
    },
    Uniform {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        budget_rate: Option<f64>,
    },
    Periodic {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        budget_rate: Option<f64>,
    },
    BudgetIncrease {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        budget_rate: Option<f64>,
        #[serde(default = "default_consec")]
        consec_n: usize,
        #[serde(default)]
        bucket_cap: Option<f64>,
    },
    BudgetThreshold {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        budget_rate: Option<f64>,
        #[serde(default = "default_window")]
        window_len: usize,
        #[serde(default = "default_eps")]
        eps: f64,
        #[serde(default)]
        bucket_cap: Option<f64>,
    },
    Never {
        #[serde(default)]
        label: Option<String>,
    },
    Always {
        #[serde(default)]
        label: Option<String>,
    },
}

impl PolicySection {
    fn kind(&self) -> &'static str {
        match self {
            PolicySection::Rccda { .. } => "rccda",
            PolicySection::Uniform { .. } => "uniform",
            PolicySection::Periodic { .. } => "periodic",
            PolicySection::BudgetIncrease { .. } => "budget_increase",
            PolicySection::BudgetThreshold { .. } => "budget_threshold",
            PolicySection::Never { .. } => "never",
            PolicySection::Always { .. } => "always",
        }
    }

    fn label(&self) -> Option<&str> {
        match self {
            PolicySection::Rccda { label, .. }
            | PolicySection::Uniform { label, .. }
            | PolicySection::Periodic { label, .. }
            | PolicySection::BudgetIncrease { label, .. }
            | PolicySection::BudgetThreshold { label, .. }
            | PolicySection::Never { label }
            | PolicySection::Always { label } => label.as_deref(),
        }
    }
}

fn default_floor() -> f64 {
    0.01
}
fn default_safety() -> f64 {
    1.5
}
fn default_sensitivity() -> Vec<f64> {
    vec![0.01, 0.05, 0.1]
}
fn default_trials() -> usize {
    100
}
fn default_checkpoints() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_floor")]
    pub p_min_floor: f64,
    #[serde(default = "default_safety")]
    pub sigma_safety: f64,
    #[serde(default = "default_sensitivity")]
    pub p_min_sensitivity: Vec<f64>,
    #[serde(default = "default_trials")]
    pub sigma_trials: usize,
    #[serde(default = "default_checkpoints")]
    pub sigma_checkpoints: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            p_min_floor: default_floor(),
            sigma_safety: default_safety(),
            p_min_sensitivity: default_sensitivity(),
            sigma_trials: default_trials(),
            sigma_checkpoints: default_checkpoints(),
        }
    }
}

impl AnalysisSection {
    pub fn settings(&self) -> AnalysisSettings {
        AnalysisSettings {
            p_min_floor: self.p_min_floor,
            sigma_safety: self.sigma_safety,
            p_min_sensitivity: self.p_min_sensitivity.clone(),
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write one CSV trace per episode.
    #[serde(default = "yes")]
    pub traces: bool,
    #[serde(default = "yes")]
    pub plot_data: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            traces: true,
            plot_data: true,
        }
    }
}

/// Parses a `KEY=VALUE` override. The value is read as a TOML value and
/// falls back to a bare string.
pub fn parse_override(raw: &str) -> Result<(String, Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{raw}` is not KEY=VALUE")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override `{raw}` has an empty key segment")));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()));
    Ok((key.to_string(), parsed))
}

fn alias(seg: &str) -> &str {
    match seg {
        "policy" => "policies",
        "schedule" => "schedules",
        other => other,
    }
}

/// Sets `path` inside `root`. On arrays a numeric segment selects one
/// element and any other segment is applied to every element that has it.
/// Returns the number of places written.
fn set_path(root: &mut Value, path: &[&str], value: &Value) -> usize {
    let (head, rest) = match path.split_first() {
        Some(p) => p,
        None => return 0,
    };
    match root {
        Value::Table(t) => {
            if rest.is_empty() {
                t.insert(head.to_string(), value.clone());
                return 1;
            }
            let child = t
                .entry(head.to_string())
                .or_insert_with(|| Value::Table(toml::Table::new()));
            set_path(child, rest, value)
        }
        Value::Array(items) => {
            if let Ok(i) = head.parse::<usize>() {
                match items.get_mut(i) {
                    Some(item) if rest.is_empty() => {
                        *item = value.clone();
                        1
                    }
                    Some(item) => set_path(item, rest, value),
                    None => 0,
                }
            } else {
                items
                    .iter_mut()
                    .filter(|it| it.as_table().is_some_and(|t| t.contains_key(*head)))
                    .map(|it| set_path(it, path, value))
                    .sum()
            }
        }
        _ => 0,
    }
}

/// Applies dotted-path overrides to a parsed configuration tree.
pub fn apply_overrides(root: &mut Value, overrides: &[(String, Value)]) -> Result<()> {
    for (key, value) in overrides {
        let segs: Vec<&str> = key
            .split('.')
            .enumerate()
            .map(|(i, s)| if i == 0 { alias(s) } else { s })
            .collect();
        if set_path(root, &segs, value) == 0 {
            return Err(Error::Config(format!("override `{key}` matches nothing in the config")));
        }
    }
    Ok(())
}

/// Parses configuration text and applies overrides. Errors carry the
/// origin, and line numbers when no overrides are involved.
pub fn parse_config(text: &str, overrides: &[(String, Value)], origin: &str) -> Result<SuiteConfig> {
    let cfg: SuiteConfig = if overrides.is_empty() {
        toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?
    } else {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
        let mut root = Value::Table(table);
        apply_overrides(&mut root, overrides)?;
        root.try_into()
            .map_err(|e| Error::Config(format!("{origin} (after overrides): {e}")))?
    };
    cfg.validate().map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{origin}: {m}")),
        other => Error::Config(format!("{origin}: {other}")),
    })?;
    Ok(cfg)
}

pub fn load_config(path: &Path, overrides: &[(String, Value)]) -> Result<SuiteConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, overrides, &path.display().to_string())
}

fn field_err(field: &str, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {e}"))
}

impl SuiteConfig {
    /// Structural checks; numerical ones happen in [`Self::resolve`].
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(field_err("horizon", "must be >= 1"));
        }
        if self.seeds.is_empty() {
            return Err(field_err("seeds", "must list at least one seed"));
        }
        if self.schedules.is_empty() {
            return Err(field_err("schedules", "at least one schedule is required"));
        }
        if self.policies.is_empty() {
            return Err(field_err("policies", "at least one policy is required"));
        }
        self.costs.model()?;
        if self.data.domains.is_none() && self.data.num_domains == 0 {
            return Err(field_err("data.num_domains", "must be >= 1 (or give data.domains)"));
        }
        Ok(())
    }

    pub fn domains(&self) -> Result<Vec<DomainSpec<f64>>> {
        let d = &self.data;
        let domains = match &d.domains {
            Some(list) => list.clone(),
            None => (0..d.num_domains)
                .map(|k| {
                    make_domain(
                        k,
                        d.num_classes,
                        d.feature_dim,
                        d.separation,
                        d.cov_scale,
                        d.domain_seed.wrapping_add(k as u64),
                    )
                })
                .collect::<Result<_>>()
                .map_err(|e| field_err("data", e))?,
        };
        for (i, dom) in domains.iter().enumerate() {
            dom.validate().map_err(|e| field_err(&format!("data.domains[{i}]"), e))?;
            if dom.num_classes != domains[0].num_classes || dom.feature_dim != domains[0].feature_dim {
                return Err(field_err(
                    &format!("data.domains[{i}]"),
                    "all domains must share classes and feature dimension",
                ));
            }
        }
        if domains.is_empty() {
            return Err(field_err("data.domains", "must not be empty"));
        }
        Ok(domains)
    }

    /// Feature-norm bound: the configured one, or the largest class-mean
    /// norm plus four standard deviations per coordinate.
    pub fn data_bound(&self, domains: &[DomainSpec<f64>]) -> f64 {
        self.data.data_bound.unwrap_or_else(|| {
            domains
                .iter()
                .map(|d| d.max_mean_norm() + 4.0 * (d.class_cov_scale * d.feature_dim as f64).sqrt())
                .fold(0.0, f64::max)
        })
    }

    fn objective(&self, schedule: &DriftSchedule, classes: usize) -> Result<(Objective, LossSpec<f64>)> {
        Ok(match &self.learner.objective {
            ObjectiveSection::Classifier { clamp_b } => {
                let b = clamp_b.unwrap_or(10.0 * (classes as f64).ln());
                if !(b > 0.0) || !b.is_finite() {
                    return Err(field_err("learner.objective.clamp_b", "must be positive"));
                }
                (
                    Objective::Classifier { clamp_b: b },
                    LossSpec::SoftmaxCrossEntropyClamped {
                        num_classes: classes,
                        feature_dim: 0,
                        clamp_b: b,
                    },
                )
            }
            ObjectiveSection::Quadratic { theta0, target } => {
                if theta0.len() != target.dim() {
                    return Err(field_err(
                        "learner.objective.theta0",
                        format!("has {} entries, target has {}", theta0.len(), target.dim()),
                    ));
                }
                let targets = target
                    .resolve::<f64>(schedule)
                    .map_err(|e| field_err("learner.objective.target", e))?;
                let spec = LossSpec::QuadraticTracking {
                    target: targets[0].clone(),
                };
                (
                    Objective::Quadratic {
                        targets: Arc::new(targets),
                        theta0: theta0.clone(),
                    },
                    spec,
                )
            }
        })
    }

    fn policy(&self, i: usize, l_smooth: f64, cost: &CostModel<f64>) -> Result<Policy<f64>> {
        let field = format!("policies[{i}]");
        let lam_bar = self.costs.lambda_bar;
        let rate = |r: &Option<f64>| r.unwrap_or(lam_bar / self.costs.mean_cost());
        let max_cost = match cost {
            CostModel::Constant { lambda } => *lambda,
            CostModel::Cyclic { values } => values.iter().copied().fold(0.0, f64::max),
        };
        let baseline = |r: &Option<f64>, consec_n, window_len, eps| -> Result<BaselineConfig<f64>> {
            let b = BaselineConfig {
                budget_rate: rate(r),
                consec_n,
                window_len,
                eps,
            };
            b.validate().map_err(|e| field_err(&field, e))?;
            Ok(b)
        };
        let cap = |c: &Option<f64>| -> Result<f64> {
            let c = c.unwrap_or(10.0 * max_cost);
            if !(c >= max_cost) {
                return Err(field_err(&format!("{field}.bucket_cap"), "must be at least the per-update cost"));
            }
            Ok(c)
        };
        let policy = match &self.policies[i] {
            PolicySection::Rccda {
                v_weight,
                estimator,
                threshold_form,
                ..
            } => {
                let p = PolicyConfig {
                    v_weight: *v_weight,
                    eta: self.learner.alpha,
                    l_smooth,
                    cost: cost.clone(),
                    avg_cost: lam_bar,
                    estimator: estimator.clone(),
                    threshold_form: *threshold_form,
                };
                p.validate().map_err(|e| field_err(&field, e))?;
                Policy::Rccda(p)
            }
            PolicySection::Uniform { budget_rate, .. } => Policy::Uniform(baseline(budget_rate, 1, 1, 1.0)?),
            PolicySection::Periodic { budget_rate, .. } => Policy::Periodic(baseline(budget_rate, 1, 1, 1.0)?),
            PolicySection::BudgetIncrease {
                budget_rate,
                consec_n,
                bucket_cap,
                ..
            } => Policy::BudgetIncrease {
                baseline: baseline(budget_rate, *consec_n, 1, 1.0)?,
                bucket_cap: cap(bucket_cap)?,
            },
            PolicySection::BudgetThreshold {
                budget_rate,
                window_len,
                eps,
                bucket_cap,
                ..
            } => Policy::BudgetThreshold {
                baseline: baseline(budget_rate, 1, *window_len, *eps)?,
                bucket_cap: cap(bucket_cap)?,
            },
            PolicySection::Never { .. } => Policy::Never,
            PolicySection::Always { .. } => Policy::Always,
        };
        Ok(policy)
    }

    /// Unique policy labels: explicit labels, else the kind, numbered on
    /// repetition.
    pub fn policy_labels(&self) -> Vec<String> {
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        self.policies
            .iter()
            .map(|p| {
                let base = p.label().unwrap_or(p.kind()).to_string();
                let n = seen.entry(base.clone()).or_insert(0);
                *n += 1;
                if *n == 1 {
                    base
                } else {
                    format!("{base}#{n}")
                }
            })
            .collect()
    }

    /// One run per (schedule, policy), schedules outermost.
    pub fn resolve(&self) -> Result<Vec<RunConfig>> {
        let domains = Arc::new(self.domains()?);
        let classes = domains[0].num_classes;
        let cost = self.costs.model()?;
        cost.validate(self.costs.lambda_bar).map_err(|e| field_err("costs", e))?;
        let labels = self.policy_labels();
        let learner = LearnerConfig {
            alpha: self.learner.alpha,
            steps_per_update: self.learner.steps_per_update,
            batch_size: self.learner.batch_size,
        };
        if self.analysis.p_min_floor <= 0.0 || self.analysis.p_min_floor > 1.0 {
            return Err(field_err("analysis.p_min_floor", "must lie in (0, 1]"));
        }
        let mut runs = Vec::new();
        for (si, kind) in self.schedules.iter().enumerate() {
            let field = format!("schedules[{si}]");
            let schedule = DriftSchedule::new(kind.clone(), self.horizon).map_err(|e| field_err(&field, e))?;
            if let Some(&k) = schedule.referenced_domains().iter().find(|&&k| k >= domains.len()) {
                return Err(field_err(
                    &field,
                    format!("references domain {k} but only {} are defined", domains.len()),
                ));
            }
            let delta = Arc::new(schedule_kl_series::<f64>(&schedule, &domains).map_err(|e| field_err(&field, e))?);
            let (objective, spec) = self.objective(&schedule, classes)?;
            let l_smooth = self
                .learner
                .l_smooth
                .unwrap_or_else(|| smoothness_constant(&spec, self.data_bound(&domains)));
            learner.validate(l_smooth).map_err(|e| field_err("learner", e))?;
            for (pi, label) in labels.iter().enumerate() {
                let run = RunConfig {
                    horizon: self.horizon,
                    schedule: schedule.clone(),
                    domains: Arc::clone(&domains),
                    pool_size: self.data.pool_size,
                    holdout_size: self.data.holdout_size,
                    inference: self.data.inference,
                    inference_batch: self.data.inference_batch,
                    pretrain_steps: self.data.pretrain_steps,
                    learner,
                    objective: objective.clone(),
                    policy: self.policy(pi, l_smooth, &cost)?,
                    policy_label: label.clone(),
                    cost: cost.clone(),
                    avg_cost: self.costs.lambda_bar,
                    l_smooth,
                    seeds: self.seeds.clone(),
                    oracle_mode: self.oracle_mode,
                    sigma_trials: self.analysis.sigma_trials,
                    sigma_checkpoints: self.analysis.sigma_checkpoints,
                    delta_series: Arc::clone(&delta),
                };
                run.validate().map_err(|e| field_err(&format!("policies[{pi}]"), e))?;
                runs.push(run);
            }
        }
        Ok(runs)
    }

    /// Adds `offset` to every seed.
    pub fn offset_seeds(&mut self, offset: u64) {
        self.seeds.iter_mut().for_each(|s| *s = s.wrapping_add(offset));
    }
}
