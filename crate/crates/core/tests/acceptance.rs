//! End-to-end acceptance battery. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rccda_core::analysis::pinsker_battery;
use rccda_core::config::{load_config, PolicySection, SuiteConfig};
use rccda_core::drift_env::{make_domain, DatasetState, DriftStreams};
use rccda_core::export::{export_trace, import_trace, trace_stem};
use rccda_core::harness::{
    replay_decisions, resimulate, run_episode, run_suite, RunConfig, SuiteResult,
};
use rccda_core::learner::{full_gradient, grad, LossSpec, ModelParams};
use rccda_core::policies::{
    periodic_decide, queue_step, uniform_decide, BaselineConfig, ThresholdForm,
    VirtualQueue,
};
use rccda_core::trace::RunTrace;
use statrs::distribution::{ContinuousCDF, StudentsT};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fixture(name: &str) -> SuiteConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    load_config(&path, &[]).expect("fixture parses")
}

fn suite(cfg: &SuiteConfig) -> SuiteResult {
    let runs = cfg.resolve().expect("fixture resolves");
    run_suite(&runs, &cfg.analysis.settings()).expect("suite runs")
}

fn within(elapsed: Duration, limit_s: u64) -> (bool, String) {
    (
        elapsed <= Duration::from_secs(limit_s),
        format!("{:.2}s/{limit_s}s", elapsed.as_secs_f64()),
    )
}

/// Queue recursion on random tuples. Values are dyadic rationals with few
/// significant bits, so every sum is exact in binary floating point and the
/// comparisons carry no rounding slack.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dyadic = |rng: &mut ChaCha8Rng, max_units: u32| rng.random_range(0..=max_units) as f64 / 1024.0;
    let mut failures = 0usize;
    for _ in 0..100_000 {
        let q = dyadic(&mut rng, 1 << 20);
        let lam = dyadic(&mut rng, 10 * 1024).max(1.0 / 1024.0);
        let lam_bar = rng.random_range(0..(lam * 1024.0) as u32) as f64 / 1024.0;
        let pi = rng.random::<bool>();
        let next = queue_step(VirtualQueue { q }, lam, pi, lam_bar).expect("valid inputs").q;
        let expect = (q + if pi { lam } else { 0.0 } - lam_bar).max(0.0);
        if next != expect || next < 0.0 || next - q > lam - lam_bar {
            failures += 1;
        }
    }
    let (fast, time) = within(start.elapsed(), 1);
    outcome(failures == 0 && fast, format!("100000 tuples, {failures} failures, {time}"))
}

fn rccda_stability(traces: &[RunTrace]) -> (usize, usize) {
    let mut checked = 0;
    let mut bad = 0;
    for t in traces {
        for r in t.summary.bound_reports.iter().filter(|r| r.name.starts_with("stability_sup")) {
            checked += 1;
            bad += usize::from(!r.satisfied);
        }
    }
    (checked, bad)
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let cfg = fixture("long_horizon.toml");
    let result = suite(&cfg);
    let (checked, bad) = rccda_stability(&result.traces);
    let mut rates_ok = true;
    let mut parts = Vec::new();
    for row in &result.rows {
        let ok = (row.update_rate_mean - 0.1).abs() <= 0.02;
        rates_ok &= ok;
        parts.push(format!("{} rate {:.4}", row.schedule, row.update_rate_mean));
    }
    let expected = cfg.seeds.len() * cfg.schedules.len();
    let (fast, time) = within(start.elapsed(), 120);
    outcome(
        checked == expected && bad == 0 && rates_ok && fast,
        format!(
            "stability bound {}/{} seeds; {}; {time}",
            checked - bad,
            expected,
            parts.join(", ")
        ),
    )
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let cfg = fixture("quadratic.toml");
    let result = suite(&cfg);
    let mut ok = !result.groups.is_empty();
    let mut parts = Vec::new();
    for g in &result.groups {
        let r = g
            .reports
            .iter()
            .find(|r| r.name.starts_with("convergence"))
            .expect("convergence report");
        ok &= r.satisfied && g.sigma_sq == 0.0;
        parts.push(format!(
            "{}: lhs {:.6} <= rhs {:.6} (p_min {} from raw {:.3})",
            g.policy, r.lhs, r.rhs, g.p_min, g.p_min_raw
        ));
    }
    let (fast, time) = within(start.elapsed(), 30);
    outcome(ok && fast, format!("{}; {time}", parts.join("; ")))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let battery = pinsker_battery(1000, 10, 1.0, 4).expect("battery");
    let random_ok = battery.iter().all(|r| r.satisfied);

    let mut cfg = fixture("directional.toml");
    cfg.oracle_mode = true;
    cfg.seeds = (0..5).collect();
    cfg.schedules.retain(|s| matches!(s.name(), "burst" | "spikes"));
    cfg.policies.truncate(1);
    let runs = cfg.resolve().expect("resolves");
    let mut steps = 0usize;
    let mut bad = 0usize;
    for run in &runs {
        let b = run.loss_bound().expect("clamped loss");
        for &seed in &run.seeds {
            let trace = run_episode(run, seed).expect("episode");
            for r in &trace.records {
                let o = r.oracle.expect("oracle data");
                steps += 1;
                bad += usize::from(o.drift_loss > b * (2.0 * LN_2 * r.delta_t).sqrt());
            }
        }
    }
    let (fast, time) = within(start.elapsed(), 30);
    outcome(
        random_ok && bad == 0 && fast,
        format!(
            "1000 random pairs {}; {} episodes, {steps} steps, {bad} violations; {time}",
            if random_ok { "hold" } else { "FAIL" },
            runs.len() * 5
        ),
    )
}

fn criterion_5() -> Outcome {
    let doms = vec![make_domain::<f64>(0, 3, 2, 2.0, 0.5, 5).expect("domain")];
    let ds = DatasetState::new(&doms, 0, 6, 2, &mut DriftStreams::new(5)).expect("dataset");
    let spec = LossSpec::classifier(3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = ModelParams::from_vec((0..9).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("params");
    let full = full_gradient(&params, &ds, &spec).expect("gradient");
    let mut mean = vec![0.0; full.len()];
    let mut batches = 0;
    for i in 0..6 {
        for j in i + 1..6 {
            let g = grad(&params, &[&ds.pool[i], &ds.pool[j]], &spec).expect("gradient");
            mean.iter_mut().zip(&g).for_each(|(m, x)| *m += x);
            batches += 1;
        }
    }
    let err = mean
        .iter()
        .zip(&full)
        .map(|(m, f)| (m / batches as f64 - f).abs())
        .fold(0.0, f64::max);
    outcome(err <= 1e-12, format!("{batches} batches, max deviation {err:.3e}"))
}

fn criterion_6() -> Outcome {
    let b = BaselineConfig {
        budget_rate: 0.1,
        consec_n: 1,
        window_len: 1,
        eps: 1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 100_000;
    let hits = (0..n).filter(|_| uniform_decide(&mut rng, &b)).count();
    let uniform_rate = hits as f64 / n as f64;
    let uniform_ok = (uniform_rate - 0.1).abs() <= 0.005;

    let mut periodic_ok = true;
    for horizon in [250usize, 1000, 4999, 5000, 12_345] {
        let count = (0..horizon).filter(|&t| periodic_decide(t, &b)).count();
        periodic_ok &= count.abs_diff(horizon / 10) <= 1;
    }
    let mut cfg = fixture("directional.toml");
    cfg.seeds = vec![0];
    cfg.schedules.truncate(1);
    cfg.policies.retain(|p| matches!(p, PolicySection::Periodic { .. }));
    let harness_rate = suite(&cfg).rows[0].update_rate_mean;
    periodic_ok &= harness_rate == 25.0 / 250.0;
    outcome(
        uniform_ok && periodic_ok,
        format!("uniform rate {uniform_rate:.5} over {n} draws; periodic counts within 1 of floor(T/10), episode rate {harness_rate}"),
    )
}

/// One-sided paired t-test p-value for a positive mean difference.
fn paired_p(diffs: &[f64]) -> (f64, f64) {
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return (mean, if mean > 0.0 { 0.0 } else { 1.0 });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).expect("dof > 0");
    (mean, 1.0 - dist.cdf(t))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let cfg = fixture("directional.toml");
    let result = suite(&cfg);
    let mut acc: BTreeMap<(String, String), BTreeMap<u64, f64>> = BTreeMap::new();
    for t in &result.traces {
        let s = &t.summary;
        acc.entry((s.schedule.clone(), s.policy.clone()))
            .or_default()
            .insert(s.seed, s.mean_accuracy.expect("classifier"));
    }
    let schedules: Vec<String> = cfg.schedules.iter().map(|s| s.name().to_string()).collect();
    let mut gaps = BTreeMap::new();
    let mut significant = true;
    let mut parts = Vec::new();
    for sched in &schedules {
        let ours = &acc[&(sched.clone(), "rccda".to_string())];
        let mut total = 0.0;
        for base in ["uniform", "periodic"] {
            let theirs = &acc[&(sched.clone(), base.to_string())];
            let diffs: Vec<f64> = ours.iter().map(|(seed, a)| a - theirs[seed]).collect();
            let (mean, p) = paired_p(&diffs);
            total += mean / 2.0;
            if sched == "burst" || sched == "spikes" {
                significant &= mean > 0.0 && p < 0.05;
                parts.push(format!("{sched} vs {base} {mean:+.4} (p={p:.1e})"));
            }
        }
        gaps.insert(sched.clone(), total);
    }
    let largest = gaps
        .iter()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k.clone())
        .unwrap_or_default();
    let largest_ok = largest == "burst" || largest == "spikes";
    let gap_list: Vec<String> = gaps.iter().map(|(k, v)| format!("{k} {v:+.4}")).collect();
    let (fast, time) = within(start.elapsed(), 300);
    outcome(
        significant && largest_ok && fast && cfg.seeds.len() >= 20,
        format!(
            "{}; mean gaps [{}], largest on {largest}; {time}",
            parts.join(", "),
            gap_list.join(", ")
        ),
    )
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut runs: Vec<RunConfig> = Vec::new();
    let mut cfg = fixture("directional.toml");
    cfg.policies.extend([
        PolicySection::BudgetIncrease {
            label: None,
            budget_rate: None,
            consec_n: 2,
            bucket_cap: None,
        },
        PolicySection::BudgetThreshold {
            label: None,
            budget_rate: None,
            window_len: 5,
            eps: 0.05,
            bucket_cap: None,
        },
    ]);
    runs.extend(cfg.resolve().expect("resolves"));
    let mut oracle = fixture("directional.toml");
    oracle.oracle_mode = true;
    oracle.schedules.truncate(1);
    runs.extend(oracle.resolve().expect("resolves"));
    runs.extend(fixture("quadratic.toml").resolve().expect("resolves"));

    let mut traces = 0;
    let mut mismatched = Vec::new();
    for run in &runs {
        for seed in [3u64, 17] {
            let trace = run_episode(run, seed).expect("episode");
            let path = dir.path().join(format!("{}.csv", trace_stem(&trace.summary)));
            export_trace(&trace, &path).expect("export");
            let imported = import_trace(&path).expect("import");
            let replay = resimulate(run, seed, &imported.records).expect("resimulate");
            let bookkeeping = replay_decisions(run, seed, &imported.records).expect("replay");
            if imported != trace || !replay.is_exact() || !bookkeeping.is_exact() {
                mismatched.push(trace_stem(&trace.summary));
            }
            traces += 1;
        }
    }
    outcome(
        mismatched.is_empty(),
        format!("{traces} exported traces re-simulated, mismatches: {mismatched:?}"),
    )
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mut cfg = fixture("long_horizon.toml");
    cfg.schedules.truncate(1);
    let base = cfg.policies[0].clone();
    let PolicySection::Rccda {
        v_weight, estimator, ..
    } = base
    else {
        return outcome(false, "fixture policy is not the threshold policy");
    };
    let variant = |form: ThresholdForm, label: &str| PolicySection::Rccda {
        label: Some(label.to_string()),
        v_weight,
        estimator: estimator.clone(),
        threshold_form: form,
    };
    cfg.policies = vec![
        variant(ThresholdForm::Derivation, "derivation"),
        variant(ThresholdForm::AlgorithmLine, "algorithm_line"),
    ];
    let result = suite(&cfg);
    let (checked, bad) = rccda_stability(&result.traces);
    let by_policy = |label: &str| -> BTreeMap<u64, Vec<bool>> {
        result
            .traces
            .iter()
            .filter(|t| t.summary.policy == label)
            .map(|t| (t.summary.seed, t.decisions()))
            .collect()
    };
    let (a, b) = (by_policy("derivation"), by_policy("algorithm_line"));
    let diffs: Vec<usize> = a
        .iter()
        .map(|(seed, d)| d.iter().zip(&b[seed]).filter(|(x, y)| x != y).count())
        .collect();
    let rates: Vec<String> = result
        .rows
        .iter()
        .map(|r| format!("{} rate {:.4}", r.policy, r.update_rate_mean))
        .collect();
    let total: usize = diffs.iter().sum();
    let (fast, time) = within(start.elapsed(), 120);
    outcome(
        checked == 2 * cfg.seeds.len() && bad == 0 && fast,
        format!(
            "stability bound {}/{checked} for both forms; {}; decisions differ on {total} of {} steps (per seed {:?}); {time}",
            checked - bad,
            rates.join(", "),
            cfg.horizon * cfg.seeds.len(),
            diffs
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("queue mechanics", criterion_1),
        ("constraint satisfaction", criterion_2),
        ("convergence bound", criterion_3),
        ("pinsker chain", criterion_4),
        ("unbiased gradients", criterion_5),
        ("baseline calibration", criterion_6),
        ("directional accuracy ordering", criterion_7),
        ("replay equivalence", criterion_8),
        ("threshold-form comparison", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "criterion {} [{name}]: {} — {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
