//! Checks against independent reference computations written from scratch
//! here rather than through the library's own helpers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rccda_core::analysis::measure_sigma_sq;
use rccda_core::drift_env::{make_domain, mixture_kl, DatasetState, DomainSpec, DriftStreams};
use rccda_core::drift_env::kl::gaussian_kl_isotropic;
use rccda_core::learner::{accuracy, full_gradient, grad, loss, smoothness_constant, LossSpec, ModelParams};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn domains(n: usize, classes: usize, dim: usize) -> Vec<DomainSpec<f64>> {
    (0..n)
        .map(|i| make_domain(i, classes, dim, 2.0, 0.3, 100 + i as u64).unwrap())
        .collect()
}

fn dataset(pool: usize, seed: u64) -> (Vec<DomainSpec<f64>>, DatasetState<f64>) {
    let doms = domains(1, 3, 2);
    let ds = DatasetState::new(&doms, 0, pool, 10, &mut DriftStreams::new(seed)).unwrap();
    (doms, ds)
}

fn random_params(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> ModelParams<f64> {
    ModelParams::from_vec((0..dim).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

fn unclamped() -> LossSpec<f64> {
    LossSpec::SoftmaxCrossEntropyClamped {
        num_classes: 3,
        feature_dim: 2,
        clamp_b: 1e9,
    }
}

#[test]
fn classifier_gradient_matches_central_differences() {
    let (_, ds) = dataset(40, 1);
    let spec = unclamped();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let p = random_params(&mut rng, 9, 1.0);
        let g = grad(&p, &ds.pool, &spec).unwrap();
        for (i, &gi) in g.iter().enumerate() {
            let h = 1e-6;
            let mut up = p.clone();
            up.theta[i] += h;
            let mut dn = p.clone();
            dn.theta[i] -= h;
            let fd = (loss(&up, &ds.pool, &spec).unwrap() - loss(&dn, &ds.pool, &spec).unwrap()) / (2.0 * h);
            assert!((fd - gi).abs() < 1e-6, "coord {i}: fd {fd} vs analytic {gi}");
        }
    }
}

#[test]
fn quadratic_gradient_is_displacement() {
    let (_, ds) = dataset(5, 1);
    let spec = LossSpec::QuadraticTracking { target: vec![1.5, -2.0] };
    let p = ModelParams::from_vec(vec![0.5, 1.0]).unwrap();
    assert_eq!(grad(&p, &ds.pool, &spec).unwrap(), vec![-1.0, 3.0]);
    assert!((loss(&p, &ds.pool, &spec).unwrap() - 0.5 * (1.0 + 9.0)).abs() < 1e-15);
}

#[test]
fn minibatch_gradient_is_unbiased_in_monte_carlo() {
    let (_, ds) = dataset(60, 3);
    let spec = LossSpec::classifier(3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = random_params(&mut rng, 9, 1.0);
    let full = full_gradient(&p, &ds, &spec).unwrap();
    let trials = 20_000;
    let mut mean = [0.0; 9];
    for _ in 0..trials {
        let batch = ds.sample_batch(6, &mut rng).unwrap();
        let g = grad(&p, &batch, &spec).unwrap();
        mean.iter_mut().zip(&g).for_each(|(m, x)| *m += x / trials as f64);
    }
    let err: f64 = mean.iter().zip(&full).map(|(m, f)| (m - f).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = full.iter().map(|f| f * f).sum::<f64>().sqrt();
    assert!(err < 0.02 * (1.0 + scale), "MC mean off by {err}");
}

#[test]
fn batch_membership_is_uniform() {
    let (_, ds) = dataset(30, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let draws = 20_000;
    let size = 5;
    let mut counts = vec![0usize; 30];
    for _ in 0..draws {
        let batch = ds.sample_batch(size, &mut rng).unwrap();
        let mut seen: Vec<u64> = batch.iter().map(|s| s.id).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), size, "batch repeats a sample");
        for s in batch {
            counts[ds.pool.iter().position(|p| p.id == s.id).unwrap()] += 1;
        }
    }
    let expected = (draws * size) as f64 / 30.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(29.0).unwrap().cdf(chi2);
    assert!(p > 1e-3, "chi-square {chi2} (p = {p})");
}

/// Direct 2-D grid integration of KL between the two class-conditional
/// mixtures, summed over classes with a uniform prior.
fn grid_mixture_kl(doms: &[DomainSpec<f64>], wa: &[f64], wb: &[f64]) -> f64 {
    let var = doms[0].class_cov_scale;
    let classes = doms[0].num_classes;
    let density = |x: f64, y: f64, w: &[f64], c: usize| -> f64 {
        doms.iter()
            .zip(w)
            .map(|(d, &wi)| {
                let m = &d.class_means[c];
                let r2 = (x - m[0]).powi(2) + (y - m[1]).powi(2);
                wi * (-r2 / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var)
            })
            .sum()
    };
    let lo = -14.0;
    let hi = 14.0;
    let n = 1400;
    let h = (hi - lo) / n as f64;
    let mut total = 0.0;
    for c in 0..classes {
        let mut kl = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (lo + (i as f64 + 0.5) * h, lo + (j as f64 + 0.5) * h);
                let pa = density(x, y, wa, c);
                if pa > 1e-300 {
                    kl += pa * (pa / density(x, y, wb, c)).ln() * h * h;
                }
            }
        }
        total += kl / classes as f64;
    }
    total
}

#[test]
fn mixture_kl_agrees_with_brute_force_grid() {
    let doms = domains(3, 3, 2);
    for (wa, wb) in [
        (vec![1.0, 0.0, 0.0], vec![0.8, 0.2, 0.0]),
        (vec![0.5, 0.3, 0.2], vec![0.45, 0.27, 0.28]),
    ] {
        let fast: f64 = mixture_kl(&doms, &wa, &wb, &[1.0 / 3.0; 3]).unwrap();
        let slow = grid_mixture_kl(&doms, &wa, &wb);
        assert!((fast - slow).abs() <= 2e-3 * slow.max(1e-6), "{fast} vs {slow}");
    }
}

#[test]
fn gaussian_kl_matches_closed_form() {
    // KL(N(0, 1) || N(1, 2)) in one dimension: ½(1/2 + 1/2 − 1 + ln 2).
    let v = gaussian_kl_isotropic(&[0.0], 1.0, &[1.0], 2.0);
    assert!((v - 0.5 * 2f64.ln()).abs() < 1e-15);
    assert_eq!(gaussian_kl_isotropic(&[3.0, -1.0], 0.3, &[3.0, -1.0], 0.3), 0.0);
}

#[test]
fn random_weights_are_at_chance() {
    let (_, ds) = dataset(10, 7);
    let doms = domains(1, 3, 2);
    let holdout = DatasetState::new(&doms, 0, 10, 600, &mut DriftStreams::new(8)).unwrap().holdout;
    let spec = LossSpec::classifier(3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let draws = 400;
    let mean: f64 = (0..draws)
        .map(|_| accuracy(&random_params(&mut rng, 9, 1.0), &holdout, &spec).unwrap())
        .sum::<f64>()
        / draws as f64;
    assert!((mean - 1.0 / 3.0).abs() < 0.04, "mean accuracy {mean}");
    drop(ds);
}

#[test]
fn gradient_is_lipschitz_with_the_declared_constant() {
    let (_, ds) = dataset(50, 10);
    let spec = unclamped();
    let bound = ds
        .pool
        .iter()
        .map(|s| s.x.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let l = smoothness_constant(&spec, bound);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let a = random_params(&mut rng, 9, 3.0);
        let b = random_params(&mut rng, 9, 3.0);
        let ga = grad(&a, &ds.pool, &spec).unwrap();
        let gb = grad(&b, &ds.pool, &spec).unwrap();
        let dg: f64 = ga.iter().zip(&gb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let dt: f64 = a.theta.iter().zip(&b.theta).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(dg <= l * dt, "{dg} > {l} * {dt}");
    }
}

#[test]
fn gradient_variance_follows_the_finite_population_law() {
    let pool = 200;
    let (_, ds) = dataset(pool, 12);
    let spec = LossSpec::classifier(3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = random_params(&mut rng, 9, 1.0);
    let law = |b: f64| (pool as f64 - b) / (b * (pool as f64 - 1.0));
    let base: f64 = measure_sigma_sq(&p, &ds, &spec, 5, 4000, &mut rng).unwrap();
    for b in [10usize, 20, 50] {
        let s: f64 = measure_sigma_sq(&p, &ds, &spec, b, 4000, &mut rng).unwrap();
        let predicted = base * law(b as f64) / law(5.0);
        assert!((s / predicted - 1.0).abs() < 0.15, "b = {b}: {s} vs {predicted}");
    }
    assert_eq!(measure_sigma_sq(&p, &ds, &spec, pool, 10, &mut rng).unwrap(), 0.0);
}
