use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, Check, ExperimentConfig, ExperimentKind, Outcome};
use crate::bellman::{apply_bellman_exact, ReturnTable, Table};
use crate::error::Result;
use crate::kernels::Kernel;
use crate::mdp::{build_chain, Policy};
use crate::measures::{DiscreteMeasure, ParticleSet};
use crate::mmd::{gaussian_moment_series, mmd, mmd_b_grad, mmd_b_squared, MmdValue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyRow {
    pub property: String,
    pub family: String,
    pub instances: usize,
    pub violations: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Gaussian,
    GaussianMixture,
    Unrectified,
    UnrectifiedMixture,
    ExpProd,
}

const ALL_FAMILIES: [Family; 5] = [
    Family::Gaussian,
    Family::GaussianMixture,
    Family::Unrectified,
    Family::UnrectifiedMixture,
    Family::ExpProd,
];
const GAUSSIAN_FAMILIES: [Family; 2] = [Family::Gaussian, Family::GaussianMixture];

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::GaussianMixture => "gaussian-mixture",
            Family::Unrectified => "unrectified",
            Family::UnrectifiedMixture => "unrectified-mixture",
            Family::ExpProd => "exp-prod",
        }
    }

    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> Kernel {
        let order = |rng: &mut R| rng.random_range(0.1..1.9);
        match self {
            Family::Gaussian => Kernel::gaussian(rng.random_range(0.2..10.0)),
            Family::GaussianMixture => {
                let m = rng.random_range(2..=4);
                let hs: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..10.0)).collect();
                Kernel::gaussian_mixture(&hs)
            }
            Family::Unrectified => Kernel::unrectified(order(rng)),
            Family::UnrectifiedMixture => {
                let m = rng.random_range(2..=3);
                let comps: Vec<(f64, f64)> = (0..m).map(|_| (rng.random_range(0.1..2.0), order(rng))).collect();
                Kernel::unrectified_mixture(&comps)
            }
            Family::ExpProd => Kernel::exp_prod(rng.random_range(0.5..4.0)),
        }
        .expect("parameters drawn inside the valid range")
    }

    /// Support range for random measures; exp-prod stays on [-1, 1] to keep
    /// kernel values moderate.
    fn range(self) -> f64 {
        match self {
            Family::ExpProd => 1.0,
            _ => 3.0,
        }
    }
}

/// Running tally for one property.
struct Tally {
    instances: usize,
    violations: usize,
    max_error: f64,
}

impl Tally {
    fn new() -> Self {
        Tally {
            instances: 0,
            violations: 0,
            max_error: 0.0,
        }
    }

    /// Records an error value against a tolerance; NaN counts as a violation.
    fn record(&mut self, error: f64, tol: f64) {
        self.instances += 1;
        if error.is_nan() || error > tol {
            self.violations += 1;
        }
        if error.is_nan() || error > self.max_error {
            self.max_error = error;
        }
    }

    /// Records a strict lower-bound requirement `value > floor`; the stored
    /// error is how far the value falls short.
    fn record_positive(&mut self, value: f64, floor: f64) {
        self.instances += 1;
        if value.is_nan() || value <= floor {
            self.violations += 1;
            self.max_error = self.max_error.max(floor - value);
        }
    }
}

fn measure<R: Rng + ?Sized>(rng: &mut R, range: f64) -> DiscreteMeasure {
    DiscreteMeasure::random(rng, 8, -range, range).expect("valid range")
}

fn sq(p: &DiscreteMeasure, q: &DiscreteMeasure, k: &Kernel) -> MmdValue {
    MmdValue::compute(p, q, k)
}

/// A measure equal to `p` as a distribution but listed differently: atoms
/// reversed and the first atom split into two halves.
fn relisted(p: &DiscreteMeasure) -> DiscreteMeasure {
    let mut atoms: Vec<f64> = p.atoms().iter().rev().copied().collect();
    let mut weights: Vec<f64> = p.weights().iter().rev().copied().collect();
    let last = atoms.len() - 1;
    weights[last] /= 2.0;
    atoms.push(atoms[last]);
    weights.push(weights[last]);
    DiscreteMeasure::new(atoms, weights).expect("same total weight")
}

fn points_apart<R: Rng + ?Sized>(rng: &mut R, n: usize, range: f64, taken: &mut Vec<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = rng.random_range(-range..range);
        if taken.iter().all(|t: &f64| (t - x).abs() >= 0.05) {
            taken.push(x);
            out.push(x);
        }
    }
    out
}

type Job = (&'static str, Family);

fn run_job(cfg: &ExperimentConfig, job: Job) -> Result<(Tally, f64)> {
    let p = &cfg.properties;
    let (name, family) = job;
    let family_idx = ALL_FAMILIES.iter().position(|f| *f == family).expect("known family") as u64;
    let mut rng = crate::Rng::seed_from_u64(derive_seed(cfg.seed, name, &[family_idx]));
    let rng = &mut rng;
    let range = family.range();
    let mut t = Tally::new();
    let tol = p.tolerance;
    match name {
        "symmetry" => {
            for _ in 0..p.triples {
                let k = family.draw(rng);
                let (a, b) = (measure(rng, range), measure(rng, range));
                t.record((sq(&a, &b, &k).squared - sq(&b, &a, &k).squared).abs(), tol);
            }
        }
        "identity-of-indiscernibles" => {
            for _ in 0..p.triples {
                let k = family.draw(rng);
                let a = measure(rng, range);
                t.record(sq(&a, &relisted(&a), &k).squared.abs(), tol);
            }
        }
        "separation" => {
            for _ in 0..p.triples {
                let k = family.draw(rng);
                let (a, b) = (measure(rng, range), measure(rng, range));
                t.record_positive(mmd(&a, &b, &k)?, 0.0);
            }
        }
        "triangle-inequality" => {
            for _ in 0..p.triples {
                let k = family.draw(rng);
                let (a, b, c) = (measure(rng, range), measure(rng, range), measure(rng, range));
                let excess = mmd(&a, &c, &k)? - mmd(&a, &b, &k)? - mmd(&b, &c, &k)?;
                t.record(excess.max(0.0), tol);
            }
        }
        "nonnegativity" => {
            for _ in 0..p.triples {
                let k = family.draw(rng);
                let (a, b) = (measure(rng, range), measure(rng, range));
                t.record((-sq(&a, &b, &k).squared).max(0.0), tol);
            }
        }
        "alpha2-degeneracy" => {
            let k2 = Kernel::unrectified(2.0)?;
            let a = DiscreteMeasure::uniform(vec![-1.0, 1.0])?;
            let b = DiscreteMeasure::dirac(0.0)?;
            t.record(mmd(&a, &b, &k2)?, p.degeneracy_tolerance);
            return Ok((t, p.degeneracy_tolerance));
        }
        "alpha2-closed-form" => {
            let k2 = Kernel::unrectified(2.0)?;
            for _ in 0..p.triples {
                let (a, b) = (measure(rng, range), measure(rng, range));
                let v = sq(&a, &b, &k2);
                let expected = 2.0 * (a.mean() - b.mean()).powi(2);
                t.record((v.squared - expected).abs() / v.scale.max(1.0), tol);
            }
        }
        "metric-positivity" => {
            for _ in 0..p.triples {
                let k = family.draw(rng);
                let (a, b) = (measure(rng, range), measure(rng, range));
                t.record_positive(mmd(&a, &b, &k)?, 1e-8);
            }
        }
        "mixture-contraction" => {
            for _ in 0..p.lemma_instances {
                let k = family.draw(rng);
                let m = rng.random_range(2..=4);
                let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let probs: Vec<f64> = raw.iter().map(|w| w / total).collect();
                let mus: Vec<DiscreteMeasure> = (0..m).map(|_| measure(rng, range)).collect();
                let nus: Vec<DiscreteMeasure> = (0..m).map(|_| measure(rng, range)).collect();
                let lhs = sq(
                    &DiscreteMeasure::mixture(&mus, &probs)?,
                    &DiscreteMeasure::mixture(&nus, &probs)?,
                    &k,
                );
                let rhs: f64 = (0..m).map(|i| probs[i] * sq(&mus[i], &nus[i], &k).squared).sum();
                t.record((lhs.squared - rhs).max(0.0) / lhs.scale.max(1.0), tol);
            }
        }
        "kernel-mixture-linearity" => {
            for _ in 0..p.lemma_instances {
                let k = family.draw(rng);
                let (a, b) = (measure(rng, range), measure(rng, range));
                let parts: Vec<(f64, Kernel)> = match &k {
                    Kernel::GaussianMixture { bandwidths } => bandwidths
                        .iter()
                        .map(|&h| (1.0, Kernel::gaussian(h).expect("valid")))
                        .collect(),
                    Kernel::UnrectifiedMixture { components } => components
                        .iter()
                        .map(|&(c, al)| (c, Kernel::unrectified(al).expect("valid")))
                        .collect(),
                    _ => unreachable!("linearity runs on mixture families only"),
                };
                let whole = sq(&a, &b, &k);
                let sum: f64 = parts.iter().map(|(c, kk)| c * sq(&a, &b, kk).squared).sum();
                t.record((whole.squared - sum).abs() / whole.scale.max(1.0), tol);
            }
        }
        "pushforward-scaling" => {
            for _ in 0..p.lemma_instances {
                let k = family.draw(rng);
                let alpha = k.min_scale_order().expect("unrectified family");
                let (a, b) = (measure(rng, range), measure(rng, range));
                let r = rng.random_range(-2.0..2.0);
                let g = rng.random_range(0.05..1.0);
                let pushed = sq(&a.pushforward_affine(r, g), &b.pushforward_affine(r, g), &k).squared;
                let scaled = g.powf(alpha) * sq(&a, &b, &k).squared;
                t.record((pushed - scaled).abs() / scaled.abs().max(1e-300), tol);
            }
        }
        "gradient-finite-difference" => {
            for _ in 0..p.gradient_instances {
                let k = family.draw(rng);
                let mut taken = Vec::new();
                let n = rng.random_range(1..=8);
                let m = rng.random_range(1..=8);
                let z = points_apart(rng, n, range, &mut taken);
                let w = points_apart(rng, m, range, &mut taken);
                let targets = ParticleSet::new(w)?;
                let g = mmd_b_grad(&ParticleSet::new(z.clone())?, &targets, &k);
                let mut worst: f64 = 0.0;
                for i in 0..n {
                    let eps = 1e-5 * z[i].abs().max(1.0);
                    let at = |d: f64| {
                        let mut v = z.clone();
                        v[i] += d;
                        mmd_b_squared(&ParticleSet::new(v).expect("finite"), &targets, &k)
                    };
                    let fd = (at(eps) - at(-eps)) / (2.0 * eps);
                    worst = worst.max((fd - g[i]).abs());
                }
                let scale = g.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-12);
                t.record(worst / scale, p.gradient_tolerance);
            }
            return Ok((t, p.gradient_tolerance));
        }
        "moment-series" => {
            let sigma = 1.0;
            let k = Kernel::gaussian_sigma(sigma)?;
            for _ in 0..p.series_instances {
                let (a, b) = (measure(rng, 1.0), measure(rng, 1.0));
                let series = gaussian_moment_series(&a, &b, sigma, p.series_order);
                t.record((series - sq(&a, &b, &k).squared).abs(), p.series_tolerance);
            }
            return Ok((t, p.series_tolerance));
        }
        "bellman-mean-identity" => {
            for _ in 0..p.lemma_instances {
                let ks = rng.random_range(2..=6);
                let mdp = build_chain(ks)?.with_gamma(rng.random_range(0.0..0.99))?;
                let pi = Policy::random(ks, 2, rng)?;
                let entries = (0..ks * 2)
                    .map(|_| DiscreteMeasure::random(rng, 4, -3.0, 3.0))
                    .collect::<Result<_>>()?;
                let mu: ReturnTable = Table::from_entries(ks, 2, entries)?;
                let t_mu = apply_bellman_exact(&mdp, &pi, &mu)?;
                for s in 0..ks {
                    for a in 0..2 {
                        let expected: f64 = if mdp.is_terminal(s) {
                            0.0
                        } else {
                            mdp.branches(s, a)
                                .iter()
                                .map(|b| {
                                    let next: f64 = if mdp.is_terminal(b.next) {
                                        0.0
                                    } else {
                                        pi.action_probs(b.next)
                                            .iter()
                                            .enumerate()
                                            .map(|(a2, pa)| pa * mu.get(b.next, a2).mean())
                                            .sum()
                                    };
                                    b.prob * (b.reward.mean() + mdp.gamma() * next)
                                })
                                .sum()
                        };
                        t.record((t_mu.get(s, a).mean() - expected).abs(), tol);
                    }
                }
            }
        }
        other => unreachable!("unknown property {other}"),
    }
    Ok((t, tol))
}

fn jobs() -> Vec<Job> {
    let mut jobs = Vec::new();
    for f in GAUSSIAN_FAMILIES {
        for name in [
            "symmetry",
            "identity-of-indiscernibles",
            "separation",
            "triangle-inequality",
            "nonnegativity",
        ] {
            jobs.push((name, f));
        }
    }
    jobs.push(("alpha2-degeneracy", Family::Unrectified));
    jobs.push(("alpha2-closed-form", Family::Unrectified));
    jobs.push(("metric-positivity", Family::Unrectified));
    jobs.push(("metric-positivity", Family::ExpProd));
    for f in ALL_FAMILIES {
        jobs.push(("mixture-contraction", f));
    }
    jobs.push(("kernel-mixture-linearity", Family::GaussianMixture));
    jobs.push(("kernel-mixture-linearity", Family::UnrectifiedMixture));
    jobs.push(("pushforward-scaling", Family::Unrectified));
    for f in ALL_FAMILIES {
        jobs.push(("gradient-finite-difference", f));
    }
    jobs.push(("moment-series", Family::Gaussian));
    jobs.push(("bellman-mean-identity", Family::Gaussian));
    jobs
}

/// Randomized certification of the metric, lemma, gradient and operator
/// properties. Each (property, kernel family) pair is one row and one check.
pub fn run_property_suite(cfg: &ExperimentConfig) -> Result<Outcome<PropertyRow>> {
    let cfg = &ExperimentConfig {
        experiment: ExperimentKind::Properties,
        ..cfg.clone()
    };
    cfg.validate()?;
    let hash = cfg.config_hash()?;
    let rows: Vec<PropertyRow> = jobs()
        .into_par_iter()
        .map(|job| {
            let (t, tolerance) = run_job(cfg, job)?;
            let family = if job.0 == "bellman-mean-identity" {
                "chain"
            } else {
                job.1.name()
            };
            Ok(PropertyRow {
                property: job.0.into(),
                family: family.into(),
                instances: t.instances,
                violations: t.violations,
                max_error: t.max_error,
                tolerance,
                pass: t.violations == 0,
                seed: cfg.seed,
                config_hash: hash.clone(),
            })
        })
        .collect::<Result<_>>()?;
    let checks = rows
        .iter()
        .map(|r| {
            Check::new(
                format!("{}/{}", r.property, r.family),
                r.pass,
                format!(
                    "{} instances, {} violations, max error {:e} (tolerance {:e})",
                    r.instances, r.violations, r.max_error, r.tolerance
                ),
            )
        })
        .collect();
    Ok(Outcome {
        rows,
        checks,
        notes: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relisting_preserves_the_distribution() {
        let a = DiscreteMeasure::new(vec![0.0, 1.0, 2.0], vec![0.2, 0.3, 0.5]).unwrap();
        let b = relisted(&a);
        assert_eq!(b.len(), 4);
        assert!((b.mean() - a.mean()).abs() < 1e-15);
    }

    #[test]
    fn reduced_suite_passes() {
        let mut cfg = ExperimentConfig::for_kind(ExperimentKind::Properties);
        cfg.properties.triples = 30;
        cfg.properties.lemma_instances = 20;
        cfg.properties.gradient_instances = 20;
        cfg.properties.series_instances = 20;
        let out = run_property_suite(&cfg).unwrap();
        for c in &out.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert_eq!(out.rows.len(), jobs().len());
    }
}
