use rccda_core::config::{parse_config, parse_override, PolicySection};
use rccda_core::Error;

const BASE: &str = r#"
horizon = 50
seeds = [0, 1]

[data]
pool_size = 100
holdout_size = 50
num_domains = 3
num_classes = 3
feature_dim = 2
separation = 2.0
cov_scale = 0.3
domain_seed = 2

[learner]
alpha = 0.05
batch_size = 20

[costs]
lambda = 1.0
lambda_bar = 0.1

[[schedules]]
kind = "burst"
events = [10]
rates = [0.5]
incoming = [1]

[[policies]]
kind = "rccda"
v_weight = 10.0

[[policies]]
kind = "rccda"
v_weight = 20.0

[[policies]]
kind = "uniform"
label = "coin"
"#;

fn with(sets: &[&str]) -> Result<rccda_core::config::SuiteConfig, Error> {
    let overrides: Vec<_> = sets.iter().map(|s| parse_override(s).unwrap()).collect();
    parse_config(BASE, &overrides, "base.toml")
}

fn v_weights(cfg: &rccda_core::config::SuiteConfig) -> Vec<f64> {
    cfg.policies
        .iter()
        .filter_map(|p| match p {
            PolicySection::Rccda { v_weight, .. } => Some(*v_weight),
            _ => None,
        })
        .collect()
}

#[test]
fn defaults_fill_in() {
    let cfg = with(&[]).unwrap();
    assert_eq!(cfg.learner.steps_per_update, 5);
    assert_eq!(cfg.data.pretrain_steps, 100);
    assert_eq!(cfg.policy_labels(), ["rccda", "rccda#2", "coin"]);
    assert_eq!(cfg.resolve().unwrap().len(), 3);
}

#[test]
fn overrides_reach_scalars_indices_and_broadcasts() {
    let cfg = with(&["horizon=70", "seeds=[4, 5, 6]", "policies.1.v_weight=3.5"]).unwrap();
    assert_eq!(cfg.horizon, 70);
    assert_eq!(cfg.seeds, [4, 5, 6]);
    assert_eq!(v_weights(&cfg), [10.0, 3.5]);

    let cfg = with(&["policy.v_weight=1"]).unwrap();
    assert_eq!(v_weights(&cfg), [1.0, 1.0]);

    let cfg = with(&["schedule.rates=[0.25]"]).unwrap();
    assert!(format!("{:?}", cfg.schedules[0]).contains("0.25"));
}

#[test]
fn unmatched_override_is_rejected() {
    let err = with(&["policies.7.v_weight=1"]).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
    assert!(with(&["learner.nonexistent=1"]).is_err());
}

#[test]
fn malformed_fields_are_named() {
    let err = with(&["learner.alpha=\"fast\""]).unwrap_err().to_string();
    assert!(err.contains("alpha"), "{err}");

    let bad = BASE.replace("batch_size = 20", "batch_size = 20\nbatchsize = 3");
    let err = parse_config(&bad, &[], "typo.toml").unwrap_err().to_string();
    assert!(err.contains("batchsize") && err.contains("typo.toml"), "{err}");
}

#[test]
fn semantic_errors_name_their_section() {
    let err = with(&["schedules.0.incoming=[9]"]).unwrap().resolve().unwrap_err().to_string();
    assert!(err.contains("schedules[0]"), "{err}");

    let err = with(&["learner.alpha=1.0"]).unwrap().resolve().unwrap_err().to_string();
    assert!(err.contains("learner") && err.contains("alpha"), "{err}");

    let err = with(&["costs.lambda_bar=2.0"]).unwrap().resolve().unwrap_err().to_string();
    assert!(err.contains("costs"), "{err}");
}

#[test]
fn override_values_parse_as_toml_or_fall_back_to_strings() {
    let (k, v) = parse_override("a.b=0.5").unwrap();
    assert_eq!((k.as_str(), v.as_float()), ("a.b", Some(0.5)));
    let (_, v) = parse_override("x=derivation").unwrap();
    assert_eq!(v.as_str(), Some("derivation"));
    assert!(parse_override("novalue").is_err());
}

#[test]
fn seed_offset_shifts_every_seed() {
    let mut cfg = with(&[]).unwrap();
    cfg.offset_seeds(100);
    assert_eq!(cfg.seeds, [100, 101]);
}
