//! Divergences between domains and between the drifting data mixtures.
//!
//! The data distribution at step `t` is a mixture of the domains with weights
//! that evolve as `w ← (1 − r) w + r e_k` whenever a fraction `r` of the pool
//! is replaced by domain `k`. Consecutive mixtures share their components, so
//! the per-class divergence reduces to a low-dimensional integral over the
//! affine hull of the component means, which is evaluated by trapezoidal
//! quadrature. When the hull has more than two dimensions the divergence is
//! replaced by the tighter of two closed-form upper bounds.

use std::f64::consts::PI;

use super::domain::DomainSpec;
use super::schedule::DriftSchedule;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Grid size for one-dimensional quadrature.
pub const QUAD_POINTS_1D: usize = 10_000;
/// Grid points per axis for two-dimensional quadrature.
pub const QUAD_POINTS_2D_AXIS: usize = 160;
/// Half-width of the integration box, in standard deviations past the
/// outermost component mean.
const QUAD_SIGMAS: f64 = 10.0;

/// KL(N(μa, va·I) ‖ N(μb, vb·I)).
pub fn gaussian_kl_isotropic<S: Scalar>(mu_a: &[S], var_a: S, mu_b: &[S], var_b: S) -> S {
    let d = S::of(mu_a.len() as f64);
    let ratio = var_a / var_b;
    let m = crate::scalar::dist_sq(mu_a, mu_b);
    S::half() * (d * ratio + m / var_b - d - d * ratio.ln())
}

/// Class-prior-weighted sum of per-class Gaussian divergences KL(a ‖ b).
pub fn domain_kl<S: Scalar>(a: &DomainSpec<S>, b: &DomainSpec<S>, class_prior: &[S]) -> Result<S> {
    if a.feature_dim != b.feature_dim {
        return Err(Error::DimensionMismatch {
            expected: a.feature_dim,
            got: b.feature_dim,
        });
    }
    if a.num_classes != b.num_classes || class_prior.len() != a.num_classes {
        return Err(Error::DimensionMismatch {
            expected: a.num_classes,
            got: if a.num_classes != b.num_classes {
                b.num_classes
            } else {
                class_prior.len()
            },
        });
    }
    check_distribution(class_prior)?;
    Ok(class_prior
        .iter()
        .enumerate()
        .map(|(y, &p)| {
            p * gaussian_kl_isotropic(
                &a.class_means[y],
                a.class_cov_scale,
                &b.class_means[y],
                b.class_cov_scale,
            )
        })
        .sum())
}

fn check_distribution<S: Scalar>(p: &[S]) -> Result<()> {
    if p.iter().any(|&v| v < S::zero() || !v.is_finite()) {
        return Err(Error::invalid("probabilities must be finite and nonnegative"));
    }
    let total: S = p.iter().copied().sum();
    if (total - S::one()).abs() > S::of(1e-6) {
        return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// KL(p ‖ q) in nats for distributions over a shared finite support.
pub fn discrete_kl<S: Scalar>(p: &[S], q: &[S]) -> Result<S> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    check_distribution(p)?;
    check_distribution(q)?;
    let mut total = S::zero();
    for (&a, &b) in p.iter().zip(q) {
        if a > S::zero() {
            if b == S::zero() {
                return Ok(S::infinity());
            }
            total = total + a * (a / b).ln();
        }
    }
    Ok(total.max(S::zero()))
}

/// ‖p − q‖₁.
pub fn l1_distance<S: Scalar>(p: &[S], q: &[S]) -> Result<S> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    Ok(p.iter().zip(q).map(|(&a, &b)| (a - b).abs()).sum())
}

/// Mixture weights over domains at every step `0..=T` implied by the schedule,
/// starting from a pool made only of `source`.
pub fn mixture_weight_path(
    schedule: &DriftSchedule,
    num_domains: usize,
    source: usize,
) -> Result<Vec<Vec<f64>>> {
    if source >= num_domains {
        return Err(Error::invalid(format!("unknown source domain {source}")));
    }
    let mut w = vec![0.0; num_domains];
    w[source] = 1.0;
    let mut path = Vec::with_capacity(schedule.horizon() + 1);
    path.push(w.clone());
    for t in 0..schedule.horizon() {
        let step = schedule.step(t)?;
        if let Some(k) = step.incoming.filter(|_| step.rate > 0.0) {
            if k >= num_domains {
                return Err(Error::invalid(format!("schedule references unknown domain {k}")));
            }
            w.iter_mut().for_each(|v| *v *= 1.0 - step.rate);
            w[k] += step.rate;
        }
        path.push(w.clone());
    }
    Ok(path)
}

struct Component {
    w_from: f64,
    w_to: f64,
    mean: Vec<f64>,
    var: f64,
}

/// Log-density offsets of one component under both weightings.
struct Prepared<'a> {
    mean: &'a [f64],
    inv_two_var: f64,
    log_from: f64,
    log_to: f64,
}

fn prepare(comps: &[Component]) -> Vec<Prepared<'_>> {
    comps
        .iter()
        .map(|c| {
            let norm = -0.5 * c.mean.len() as f64 * (2.0 * PI * c.var).ln();
            let lw = |w: f64| if w > 0.0 { w.ln() + norm } else { f64::NEG_INFINITY };
            Prepared {
                mean: &c.mean,
                inv_two_var: 0.5 / c.var,
                log_from: lw(c.w_from),
                log_to: lw(c.w_to),
            }
        })
        .collect()
}

/// `(log m(x), log m'(x))` for the two weightings, sharing the distances.
fn log_mixtures(x: &[f64], comps: &[Prepared], scratch: &mut Vec<f64>) -> (f64, f64) {
    scratch.clear();
    scratch.extend(comps.iter().map(|c| {
        let d2: f64 = x.iter().zip(c.mean).map(|(a, b)| (a - b) * (a - b)).sum();
        d2 * c.inv_two_var
    }));
    let lse = |offset: fn(&Prepared) -> f64| {
        let m = comps
            .iter()
            .zip(scratch.iter())
            .map(|(c, d)| offset(c) - d)
            .fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + comps
            .iter()
            .zip(scratch.iter())
            .map(|(c, d)| (offset(c) - d - m).exp())
            .sum::<f64>()
            .ln()
    };
    (lse(|c| c.log_from), lse(|c| c.log_to))
}

/// Trapezoidal quadrature of ∫ m log(m / m') over a 1- or 2-D box.
fn quadrature_kl(comps: &[Component]) -> f64 {
    let dim = comps[0].mean.len();
    let sd = comps.iter().map(|c| c.var.sqrt()).fold(0.0, f64::max);
    let bounds: Vec<(f64, f64)> = (0..dim)
        .map(|j| {
            let lo = comps.iter().map(|c| c.mean[j]).fold(f64::INFINITY, f64::min);
            let hi = comps.iter().map(|c| c.mean[j]).fold(f64::NEG_INFINITY, f64::max);
            (lo - QUAD_SIGMAS * sd, hi + QUAD_SIGMAS * sd)
        })
        .collect();
    let n = if dim == 1 { QUAD_POINTS_1D } else { QUAD_POINTS_2D_AXIS };
    let axis = |j: usize| -> Vec<(f64, f64)> {
        let (lo, hi) = bounds[j];
        let h = (hi - lo) / (n - 1) as f64;
        (0..n)
            .map(|i| {
                let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
                (lo + h * i as f64, w)
            })
            .collect()
    };
    let prepared = prepare(comps);
    let mut scratch = Vec::with_capacity(comps.len());
    let mut point = vec![0.0; dim];
    let mut integrand = |x: &[f64]| {
        let (lp, lq) = log_mixtures(x, &prepared, &mut scratch);
        if lp == f64::NEG_INFINITY {
            0.0
        } else {
            lp.exp() * (lp - lq)
        }
    };
    let mut total = 0.0;
    if dim == 1 {
        for (x, w) in axis(0) {
            point[0] = x;
            total += w * integrand(&point);
        }
    } else {
        let ys = axis(1);
        for (x, wx) in axis(0) {
            point[0] = x;
            for &(y, wy) in &ys {
                point[1] = y;
                total += wx * wy * integrand(&point);
            }
        }
    }
    total.max(0.0)
}

/// Coordinates of the component means in an orthonormal basis of their
/// affine hull (Gram–Schmidt on differences from the first mean).
fn affine_hull_coords(comps: &[Component]) -> Vec<Vec<f64>> {
    let origin = &comps[0].mean;
    let scale = comps
        .iter()
        .flat_map(|c| c.mean.iter().zip(origin).map(|(a, b)| (a - b).abs()))
        .fold(1.0, f64::max);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for c in &comps[1..] {
        let mut v: Vec<f64> = c.mean.iter().zip(origin).map(|(a, b)| a - b).collect();
        for b in &basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-10 * scale {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    comps
        .iter()
        .map(|c| {
            basis
                .iter()
                .map(|b| b.iter().zip(c.mean.iter().zip(origin)).map(|(e, (a, o))| e * (a - o)).sum())
                .collect()
        })
        .collect()
}

/// Upper bound: min of KL(w ‖ w') and Σᵢ wᵢ minⱼ [KL(cᵢ ‖ cⱼ) − ln w'ⱼ].
fn mixture_kl_bound(comps: &[Component]) -> f64 {
    let mut weight_kl = 0.0;
    for c in comps {
        if c.w_from > 0.0 {
            weight_kl += if c.w_to > 0.0 {
                c.w_from * (c.w_from / c.w_to).ln()
            } else {
                f64::INFINITY
            };
        }
    }
    let mut pairwise = 0.0;
    for a in comps.iter().filter(|c| c.w_from > 0.0) {
        let best = comps
            .iter()
            .filter(|b| b.w_to > 0.0)
            .map(|b| gaussian_kl_isotropic(&a.mean, a.var, &b.mean, b.var) - b.w_to.ln())
            .fold(f64::INFINITY, f64::min);
        pairwise += a.w_from * best;
    }
    weight_kl.min(pairwise).max(0.0)
}

fn class_mixture_kl(comps: Vec<Component>) -> f64 {
    if comps.len() <= 1 || comps.iter().all(|c| c.w_from == c.w_to) {
        return 0.0;
    }
    let var0 = comps[0].var;
    let shared_var = comps.iter().all(|c| c.var == var0);
    let dim = comps[0].mean.len();
    if shared_var {
        let coords = affine_hull_coords(&comps);
        let k = coords[0].len();
        if k == 0 {
            return 0.0;
        }
        if k <= 2 {
            let projected: Vec<Component> = comps
                .into_iter()
                .zip(coords)
                .map(|(c, mean)| Component { mean, ..c })
                .collect();
            return quadrature_kl(&projected);
        }
    } else if dim <= 2 {
        return quadrature_kl(&comps);
    }
    mixture_kl_bound(&comps)
}

/// KL between two mixtures of the same domains that differ only in their
/// weights, for the joint distribution of (x, y) under `class_prior`.
pub fn mixture_kl<S: Scalar>(
    domains: &[DomainSpec<S>],
    w_from: &[f64],
    w_to: &[f64],
    class_prior: &[f64],
) -> Result<S> {
    if w_from.len() != domains.len() || w_to.len() != domains.len() {
        return Err(Error::DimensionMismatch {
            expected: domains.len(),
            got: w_from.len().min(w_to.len()),
        });
    }
    check_distribution(w_from)?;
    check_distribution(w_to)?;
    check_distribution(class_prior)?;
    let first = domains.first().ok_or_else(|| Error::invalid("no domains"))?;
    if class_prior.len() != first.num_classes {
        return Err(Error::DimensionMismatch {
            expected: first.num_classes,
            got: class_prior.len(),
        });
    }
    for d in domains {
        if d.feature_dim != first.feature_dim || d.num_classes != first.num_classes {
            return Err(Error::invalid("domains must share feature_dim and num_classes"));
        }
    }
    let mut total = 0.0;
    for (y, &prior) in class_prior.iter().enumerate() {
        if prior == 0.0 {
            continue;
        }
        let comps: Vec<Component> = domains
            .iter()
            .enumerate()
            .filter(|&(d, _)| w_from[d] > 0.0 || w_to[d] > 0.0)
            .map(|(d, dom)| Component {
                w_from: w_from[d],
                w_to: w_to[d],
                mean: dom.class_means[y].iter().map(|v| v.to_real()).collect(),
                var: dom.class_cov_scale.to_real(),
            })
            .collect();
        total += prior * class_mixture_kl(comps);
    }
    Ok(S::of(total))
}

fn uniform_prior(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

/// Ground-truth drift magnitude δ(t) = KL(p_t ‖ p_{t+1}) of the data mixture,
/// with the pool starting from domain 0 and uniform class labels.
pub fn schedule_kl<S: Scalar>(schedule: &DriftSchedule, domains: &[DomainSpec<S>], t: usize) -> Result<S> {
    if schedule.drift_rate(t)? == 0.0 {
        return Ok(S::zero());
    }
    let path = mixture_weight_path(schedule, domains.len(), 0)?;
    Ok(S::of(SeriesEvaluator::new(domains)?.kl(&path[t], &path[t + 1])))
}

/// Density table of one class's components over a fixed quadrature grid,
/// reusable for any pair of weightings. Each row stores the component
/// densities relative to the row's largest one, with the largest density and
/// the quadrature weight folded into `scale`, so the ratio of two mixtures
/// never underflows.
struct ClassGrid {
    comps: usize,
    scale: Vec<f64>,
    rel: Vec<f64>,
}

impl ClassGrid {
    /// `None` unless the components share a variance and their means span at
    /// most two dimensions.
    fn build(comps: &[Component]) -> Option<Self> {
        let var = comps[0].var;
        if comps.iter().any(|c| c.var != var) {
            return None;
        }
        let coords = affine_hull_coords(comps);
        let dim = coords[0].len();
        if dim == 0 || dim > 2 {
            return None;
        }
        let sd = var.sqrt();
        let n = if dim == 1 { QUAD_POINTS_1D } else { QUAD_POINTS_2D_AXIS };
        let axes: Vec<Vec<(f64, f64)>> = (0..dim)
            .map(|j| {
                let lo = coords.iter().map(|c| c[j]).fold(f64::INFINITY, f64::min) - QUAD_SIGMAS * sd;
                let hi = coords.iter().map(|c| c[j]).fold(f64::NEG_INFINITY, f64::max) + QUAD_SIGMAS * sd;
                let h = (hi - lo) / (n - 1) as f64;
                (0..n)
                    .map(|i| (lo + h * i as f64, if i == 0 || i == n - 1 { 0.5 * h } else { h }))
                    .collect()
            })
            .collect();
        let points: Vec<(Vec<f64>, f64)> = if dim == 1 {
            axes[0].iter().map(|&(x, w)| (vec![x], w)).collect()
        } else {
            axes[0]
                .iter()
                .flat_map(|&(x, wx)| axes[1].iter().map(move |&(y, wy)| (vec![x, y], wx * wy)))
                .collect()
        };
        let norm = -0.5 * dim as f64 * (2.0 * PI * var).ln();
        let mut scale = Vec::with_capacity(points.len());
        let mut rel = Vec::with_capacity(points.len() * comps.len());
        let mut logs = vec![0.0; comps.len()];
        for (x, w) in &points {
            for (l, c) in logs.iter_mut().zip(&coords) {
                let d2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                *l = norm - d2 / (2.0 * var);
            }
            let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            scale.push(w * m.exp());
            rel.extend(logs.iter().map(|l| (l - m).exp()));
        }
        Some(Self {
            comps: comps.len(),
            scale,
            rel,
        })
    }

    fn kl(&self, w_from: &[f64], w_to: &[f64]) -> f64 {
        if w_from == w_to {
            return 0.0;
        }
        let mut total = 0.0;
        for (row, &s) in self.rel.chunks_exact(self.comps).zip(&self.scale) {
            let (mut p, mut q) = (0.0, 0.0);
            for ((g, a), b) in row.iter().zip(w_from).zip(w_to) {
                p += a * g;
                q += b * g;
            }
            if p > 0.0 {
                total += s * p * (p / q).ln();
            }
        }
        total.max(0.0)
    }
}

/// Evaluates δ between mixtures of a fixed set of domains, reusing one
/// quadrature grid per class where possible.
struct SeriesEvaluator {
    prior: Vec<f64>,
    classes: Vec<(Vec<Component>, Option<ClassGrid>)>,
}

impl SeriesEvaluator {
    fn new<S: Scalar>(domains: &[DomainSpec<S>]) -> Result<Self> {
        let first = domains.first().ok_or_else(|| Error::invalid("no domains"))?;
        for d in domains {
            if d.feature_dim != first.feature_dim || d.num_classes != first.num_classes {
                return Err(Error::invalid("domains must share feature_dim and num_classes"));
            }
        }
        let classes = (0..first.num_classes)
            .map(|y| {
                let comps: Vec<Component> = domains
                    .iter()
                    .map(|dom| Component {
                        w_from: 0.0,
                        w_to: 0.0,
                        mean: dom.class_means[y].iter().map(|v| v.to_real()).collect(),
                        var: dom.class_cov_scale.to_real(),
                    })
                    .collect();
                let grid = if comps.len() > 1 { ClassGrid::build(&comps) } else { None };
                (comps, grid)
            })
            .collect();
        Ok(Self {
            prior: uniform_prior(first.num_classes),
            classes,
        })
    }

    fn kl(&self, w_from: &[f64], w_to: &[f64]) -> f64 {
        self.prior
            .iter()
            .zip(&self.classes)
            .map(|(&p, (comps, grid))| {
                p * match grid {
                    Some(g) => g.kl(w_from, w_to),
                    None => class_mixture_kl(
                        comps
                            .iter()
                            .enumerate()
                            .filter(|&(d, _)| w_from[d] > 0.0 || w_to[d] > 0.0)
                            .map(|(d, c)| Component {
                                w_from: w_from[d],
                                w_to: w_to[d],
                                mean: c.mean.clone(),
                                var: c.var,
                            })
                            .collect(),
                    ),
                }
            })
            .sum()
    }
}

/// δ(t) for every step of the horizon.
pub fn schedule_kl_series<S: Scalar>(schedule: &DriftSchedule, domains: &[DomainSpec<S>]) -> Result<Vec<S>> {
    use rayon::prelude::*;
    let path = mixture_weight_path(schedule, domains.len(), 0)?;
    let eval = SeriesEvaluator::new(domains)?;
    (0..schedule.horizon())
        .into_par_iter()
        .map(|t| {
            Ok(if schedule.drift_rate(t)? == 0.0 {
                S::zero()
            } else {
                S::of(eval.kl(&path[t], &path[t + 1]))
            })
        })
        .collect()
}
