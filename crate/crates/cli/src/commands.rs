use std::collections::BTreeMap;
use std::path::PathBuf;

use rccda_core::analysis::{pinsker_battery, BoundReport};
use rccda_core::config::{load_config, parse_override, OverrideValue, SuiteConfig};
use rccda_core::drift_env::DriftSchedule;
use rccda_core::export::{write_json, write_schedule_preview};
use rccda_core::harness::{self, run_suite, SuiteResult, SummaryRow};
use rccda_core::Error;
use serde::Serialize;

use crate::output::{print_groups, print_reports, print_rows, write_suite};
use crate::{Common, Failure, EXIT_BOUND, EXIT_CONFIG};

type Overrides = Vec<(String, OverrideValue)>;

/// Trials and support size of the random discrete Pinsker checks.
const PINSKER_TRIALS: usize = 1000;
const PINSKER_SUPPORT: usize = 10;

fn base_overrides(c: &Common) -> Result<Overrides, Failure> {
    Ok(c.set.iter().map(|s| parse_override(s)).collect::<rccda_core::Result<_>>()?)
}

fn load(c: &Common, overrides: &Overrides) -> Result<(SuiteConfig, PathBuf), Failure> {
    if !c.config.is_file() {
        return Err(Failure {
            code: EXIT_CONFIG,
            message: format!("config file {} does not exist", c.config.display()),
        });
    }
    let mut cfg = load_config(&c.config, overrides)?;
    cfg.offset_seeds(c.seed_offset);
    let out = c.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((cfg, out))
}

fn execute(c: &Common, cfg: &SuiteConfig) -> Result<SuiteResult, Failure> {
    let runs = cfg.resolve()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = c.parallel {
        builder = builder.num_threads(n as usize);
    }
    let pool = builder.build().map_err(|e| Failure {
        code: crate::EXIT_RUNTIME,
        message: format!("thread pool: {e}"),
    })?;
    log::info!("running {} configurations", runs.len());
    Ok(pool.install(|| run_suite(&runs, &cfg.analysis.settings()))?)
}

pub fn run(c: &Common) -> Result<u8, Failure> {
    let (cfg, out) = load(c, &base_overrides(c)?)?;
    let result = execute(c, &cfg)?;
    let summary = write_suite(&out, &cfg, &result, &[])?;
    print_rows(&result.rows);
    println!("\nsummary written to {}", summary.display());
    Ok(0)
}

pub fn verify(c: &Common) -> Result<u8, Failure> {
    let (mut cfg, out) = load(c, &base_overrides(c)?)?;
    cfg.oracle_mode = true;
    let result = execute(c, &cfg)?;
    let battery = pinsker_battery(PINSKER_TRIALS, PINSKER_SUPPORT, 1.0, cfg.seeds[0])?;
    let summary = write_suite(&out, &cfg, &result, &battery)?;
    let reports: Vec<&BoundReport> = result.bound_reports.iter().chain(&battery).collect();
    print_groups(&result.groups);
    println!();
    print_reports(&reports);
    if !result.crn_consistent() {
        log::warn!("policies did not share data streams for every seed");
    }
    println!("\nsummary written to {}", summary.display());
    Ok(if reports.iter().all(|r| r.satisfied) { 0 } else { EXIT_BOUND })
}

/// Cartesian product of the sweep axes, in key order.
fn grid(axes: &BTreeMap<String, Vec<OverrideValue>>) -> Vec<Overrides> {
    axes.iter().fold(vec![Vec::new()], |acc, (key, values)| {
        acc.iter()
            .flat_map(|point| {
                values.iter().map(move |v| {
                    let mut p = point.clone();
                    p.push((key.clone(), v.clone()));
                    p
                })
            })
            .collect()
    })
}

#[derive(Serialize)]
struct SweepPoint {
    index: usize,
    overrides: BTreeMap<String, String>,
    output: PathBuf,
    rows: Vec<SummaryRow>,
}

pub fn sweep(c: &Common, vary: &[String]) -> Result<u8, Failure> {
    let base = base_overrides(c)?;
    let (cfg, out) = load(c, &base)?;
    let mut axes = cfg.sweep.clone();
    for v in vary {
        let (key, value) = parse_override(v)?;
        let values = match value {
            OverrideValue::Array(items) => items,
            single => vec![single],
        };
        axes.insert(key, values);
    }
    if axes.is_empty() || axes.values().any(Vec::is_empty) {
        return Err(Error::Config("sweep needs at least one non-empty axis ([sweep] or --vary)".into()).into());
    }
    let mut points = Vec::new();
    for (index, point) in grid(&axes).into_iter().enumerate() {
        let overrides: Overrides = base.iter().cloned().chain(point.iter().cloned()).collect();
        let (cfg, _) = load(c, &overrides)?;
        let dir = out.join(format!("point_{index:03}"));
        let result = execute(c, &cfg)?;
        write_suite(&dir, &cfg, &result, &[])?;
        let label: Vec<String> = point.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("point {index}: {}", label.join(", "));
        print_rows(&result.rows);
        println!();
        points.push(SweepPoint {
            index,
            overrides: point.into_iter().map(|(k, v)| (k, v.to_string())).collect(),
            output: dir,
            rows: result.rows,
        });
    }
    let path = out.join("sweep_summary.json");
    write_json(&points, &path)?;
    println!("sweep summary written to {}", path.display());
    Ok(0)
}

pub fn preview_schedule(c: &Common) -> Result<u8, Failure> {
    let (cfg, out) = load(c, &base_overrides(c)?)?;
    let domains = cfg.domains()?;
    for (i, kind) in cfg.schedules.iter().enumerate() {
        let schedule = DriftSchedule::new(kind.clone(), cfg.horizon)
            .map_err(|e| Error::Config(format!("schedules[{i}]: {e}")))?;
        let p = harness::preview_schedule(&schedule, &domains, cfg.data.pool_size, cfg.data.holdout_size, cfg.seeds[0])?;
        let path = out.join(format!("schedule_{i}_{}.csv", p.name));
        write_schedule_preview(&p, &path)?;
        let active = p.drift_rate.iter().filter(|&&r| r > 0.0).count();
        let max_delta = p.delta.iter().copied().fold(0.0, f64::max);
        let final_comp: Vec<String> = p.composition.last().map_or(Vec::new(), |c| {
            c.iter().map(|x| format!("{x:.2}")).collect()
        });
        println!(
            "{i}: {:<8} steps {:>6}  drifting {:>6}  max delta {:>10.4e}  last composition [{}]  -> {}",
            p.name,
            p.drift_rate.len(),
            active,
            max_delta,
            final_comp.join(", "),
            path.display()
        );
    }
    Ok(0)
}
