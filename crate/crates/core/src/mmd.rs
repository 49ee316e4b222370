//! Maximum mean discrepancy between discrete measures.
//!
//! All values are computed from the closed form
//! `E k(Z, Z') + E k(W, W') - 2 E k(Z, W)` with the expectations taken as
//! weighted double sums over atoms. The particle estimator is the same
//! computation with uniform weights (the biased V-statistic).

use crate::bellman::ReturnTable;
use crate::error::{domain, Error, Result};
use crate::kernels::Kernel;
use crate::measures::{DiscreteMeasure, ParticleSet};

/// Absolute slack for negative squared MMD, relative to the magnitude of the
/// kernel expectations involved.
pub const NEGATIVE_SLACK: f64 = 1e-10;

/// `E_{x ~ a, y ~ b} k(x, y)`.
pub fn kernel_expectation(a: &DiscreteMeasure, b: &DiscreteMeasure, k: &Kernel) -> f64 {
    a.iter()
        .map(|(x, wx)| wx * b.iter().map(|(y, wy)| wy * k.eval(x, y)).sum::<f64>())
        .sum()
}

/// `E_{x ~ m} k(x, point)`: the mean embedding of `m` evaluated at `point`.
pub fn embedding_at(m: &DiscreteMeasure, k: &Kernel, point: f64) -> f64 {
    m.iter().map(|(x, w)| w * k.eval(x, point)).sum()
}

/// A squared MMD together with the magnitude of the terms that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MmdValue {
    pub squared: f64,
    /// Largest absolute kernel expectation in the closed form, used to judge
    /// whether a negative `squared` is rounding noise.
    pub scale: f64,
    pub kernel: Kernel,
}

impl MmdValue {
    pub fn compute(p: &DiscreteMeasure, q: &DiscreteMeasure, k: &Kernel) -> Self {
        let pp = kernel_expectation(p, p, k);
        let qq = kernel_expectation(q, q, k);
        let pq = kernel_expectation(p, q, k);
        MmdValue {
            squared: pp + qq - 2.0 * pq,
            scale: pp.abs().max(qq.abs()).max(pq.abs()),
            kernel: k.clone(),
        }
    }

    /// The MMD itself. Squared values slightly below zero are clamped; values
    /// further below zero indicate a bug and are reported.
    pub fn distance(&self) -> Result<f64> {
        if self.squared >= 0.0 {
            return Ok(self.squared.sqrt());
        }
        if self.squared >= -NEGATIVE_SLACK * self.scale.max(1.0) {
            return Ok(0.0);
        }
        Err(Error::Consistency(format!(
            "squared MMD {} under {} is negative beyond rounding (scale {})",
            self.squared, self.kernel, self.scale
        )))
    }
}

/// Squared MMD between two weighted discrete measures.
pub fn mmd_squared(p: &DiscreteMeasure, q: &DiscreteMeasure, k: &Kernel) -> f64 {
    MmdValue::compute(p, q, k).squared
}

/// MMD between two weighted discrete measures.
pub fn mmd(p: &DiscreteMeasure, q: &DiscreteMeasure, k: &Kernel) -> Result<f64> {
    MmdValue::compute(p, q, k).distance()
}

/// Biased squared MMD between two particle sets. The sets may differ in size.
pub fn mmd_b_squared(z: &ParticleSet, w: &ParticleSet, k: &Kernel) -> f64 {
    mmd_squared(&z.to_measure(), &w.to_measure(), k)
}

/// Gradient of `mmd_squared(uniform(z), target)` with respect to each `z_i`,
/// the target held fixed.
///
/// The first sum pushes particles apart, the second pulls them toward the target.
pub fn mmd_grad(z: &[f64], target: &DiscreteMeasure, k: &Kernel) -> Vec<f64> {
    let n = z.len() as f64;
    z.iter()
        .map(|&zi| {
            let repulse: f64 = z.iter().map(|&zj| k.grad_x(zi, zj)).sum();
            let attract: f64 = target.iter().map(|(t, w)| w * k.grad_x(zi, t)).sum();
            2.0 / (n * n) * repulse - 2.0 / n * attract
        })
        .collect()
}

/// Gradient of [`mmd_b_squared`] with respect to the first particle set.
pub fn mmd_b_grad(z: &ParticleSet, targets: &ParticleSet, k: &Kernel) -> Vec<f64> {
    mmd_grad(z.as_slice(), &targets.to_measure(), k)
}

/// Supremum over state-action entries of the per-entry MMD.
pub fn mmd_sup(mu: &ReturnTable, nu: &ReturnTable, k: &Kernel) -> Result<f64> {
    if mu.shape() != nu.shape() {
        return domain(format!(
            "tables index different state-action sets: {:?} vs {:?}",
            mu.shape(),
            nu.shape()
        ));
    }
    mu.entries()
        .iter()
        .zip(nu.entries())
        .map(|(a, b)| mmd(a, b, k))
        .try_fold(0.0f64, |acc, d| Ok(acc.max(d?)))
}

/// Truncated moment expansion of the squared MMD under the Gaussian kernel
/// `exp(-(x - y)^2 / (2 sigma^2))`:
///
/// `sum_{n=0}^{max_order} (m_n(p) - m_n(q))^2 / (sigma^{2n} n!)`, with damped
/// moments `m_n(p) = E_p[exp(-x^2 / (2 sigma^2)) x^n]`.
///
/// An independent route to [`mmd_squared`] with `Kernel::gaussian_sigma(sigma)`.
pub fn gaussian_moment_series(p: &DiscreteMeasure, q: &DiscreteMeasure, sigma: f64, max_order: u32) -> f64 {
    let s2 = sigma * sigma;
    let damped = |m: &DiscreteMeasure, n: u32| -> f64 {
        m.iter()
            .map(|(x, w)| w * (-x * x / (2.0 * s2)).exp() * x.powi(n as i32))
            .sum()
    };
    let mut coef = 1.0; // 1 / (sigma^{2n} n!)
    let mut total = 0.0;
    for n in 0..=max_order {
        if n > 0 {
            coef /= s2 * n as f64;
        }
        let d = damped(p, n) - damped(q, n);
        total += coef * d * d;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::Table;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(atoms: &[f64], weights: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(atoms.to_vec(), weights.to_vec()).unwrap()
    }

    fn d(z: f64) -> DiscreteMeasure {
        DiscreteMeasure::dirac(z).unwrap()
    }

    fn ps(v: &[f64]) -> ParticleSet {
        ParticleSet::new(v.to_vec()).unwrap()
    }

    // 2 - 2 exp(-1)
    const DIRAC_01_GAUSS: f64 = 1.264_241_117_657_115_4;

    #[test]
    fn mmd_squared_examples() {
        let g1 = Kernel::gaussian(1.0).unwrap();
        let x = m(&[0.3, -1.2, 4.0], &[0.2, 0.3, 0.5]);
        for k in [
            g1.clone(),
            Kernel::unrectified(1.0).unwrap(),
            Kernel::exp_prod(2.0).unwrap(),
        ] {
            assert!(mmd_squared(&x, &x, &k).abs() < 1e-12);
        }
        assert_relative_eq!(mmd_squared(&d(0.0), &d(1.0), &g1), DIRAC_01_GAUSS, epsilon = 1e-15);
        let k2 = Kernel::unrectified(2.0).unwrap();
        assert_eq!(mmd_squared(&m(&[-1.0, 1.0], &[0.5, 0.5]), &d(0.0), &k2), 0.0);
        assert_eq!(mmd_squared(&d(0.0), &d(1.0), &Kernel::unrectified(1.0).unwrap()), 2.0);
    }

    #[test]
    fn alpha_two_reduces_to_mean_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k2 = Kernel::unrectified(2.0).unwrap();
        for _ in 0..50 {
            let a = m(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)], &[0.3, 0.7]);
            let b = m(&[rng.random_range(-2.0..2.0)], &[1.0]);
            let expect = 2.0 * (a.mean() - b.mean()).powi(2);
            assert!((mmd_squared(&a, &b, &k2) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn particle_estimator_examples() {
        assert_eq!(
            mmd_b_squared(&ps(&[0.5; 4]), &ps(&[0.5; 4]), &Kernel::tabular_mixture()),
            0.0
        );
        let g1 = Kernel::gaussian(1.0).unwrap();
        assert_relative_eq!(
            mmd_b_squared(&ps(&[0.0]), &ps(&[1.0]), &g1),
            DIRAC_01_GAUSS,
            epsilon = 1e-15
        );
        let g2 = Kernel::gaussian(2.0).unwrap();
        assert!(mmd_b_squared(&ps(&[0.0, 1.0]), &ps(&[0.0, 1.0]), &g2).abs() < 1e-12);
        // sizes may differ
        let v = mmd_b_squared(&ps(&[0.0, 1.0]), &ps(&[0.0, 0.0, 1.0, 1.0]), &g2);
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn gradient_examples() {
        let g1 = Kernel::gaussian(1.0).unwrap();
        let z = ps(&[0.1, -0.4, 0.9]);
        for k in [g1.clone(), Kernel::tabular_mixture()] {
            assert!(mmd_b_grad(&z, &z, &k).iter().all(|g| g.abs() < 1e-15));
        }
        let grad = mmd_b_grad(&ps(&[0.0]), &ps(&[1.0]), &g1);
        // 0 - 2 * (2 exp(-1))
        assert_relative_eq!(grad[0], -1.471_517_764_685_769, epsilon = 1e-14);
    }

    fn random_particles(rng: &mut impl Rng, n: usize) -> ParticleSet {
        ParticleSet::new((0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let kernels = [
            Kernel::gaussian(1.0).unwrap(),
            Kernel::tabular_mixture(),
            Kernel::unrectified(1.0).unwrap(),
            Kernel::unrectified(1.5).unwrap(),
            Kernel::exp_prod(1.0).unwrap(),
        ];
        let step = 1e-6;
        for k in &kernels {
            for _ in 0..20 {
                let n = rng.random_range(1..6);
                let z = random_particles(&mut rng, n);
                let m = rng.random_range(1..6);
                let t = random_particles(&mut rng, m);
                let grad = mmd_b_grad(&z, &t, k);
                for i in 0..n {
                    let shifted = |h: f64| {
                        let mut v = z.as_slice().to_vec();
                        v[i] += h;
                        mmd_b_squared(&ps(&v), &t, k)
                    };
                    let fd = (shifted(step) - shifted(-step)) / (2.0 * step);
                    let rel = (fd - grad[i]).abs() / grad[i].abs().max(1e-4);
                    assert!(rel < 1e-5, "{k}: fd {fd} vs {}", grad[i]);
                }
            }
        }
    }

    #[test]
    fn sup_over_tables() {
        let g = Kernel::gaussian(1.0).unwrap();
        let single_a = Table::from_entries(1, 1, vec![d(0.0)]).unwrap();
        let single_b = Table::from_entries(1, 1, vec![d(1.0)]).unwrap();
        assert_relative_eq!(
            mmd_sup(&single_a, &single_b, &g).unwrap(),
            DIRAC_01_GAUSS.sqrt(),
            epsilon = 1e-15
        );
        assert_eq!(mmd_sup(&single_a, &single_a, &g).unwrap(), 0.0);

        // entries with MMD^2 = 2 - 2e^{-1/4} < 2 - 2e^{-1}
        let mu = Table::from_entries(1, 2, vec![d(0.0), d(0.0)]).unwrap();
        let nu = Table::from_entries(1, 2, vec![d(0.5), d(1.0)]).unwrap();
        let b = (2.0 - 2.0 * (-1.0f64).exp()).sqrt();
        assert_relative_eq!(mmd_sup(&mu, &nu, &g).unwrap(), b, epsilon = 1e-15);
        assert!(mmd_sup(&mu, &single_a, &g).is_err());
    }

    #[test]
    fn small_negative_values_are_clamped() {
        let v = MmdValue {
            squared: -5e-11,
            scale: 1.0,
            kernel: Kernel::gaussian(1.0).unwrap(),
        };
        assert_eq!(v.distance().unwrap(), 0.0);
        let bad = MmdValue {
            squared: -1e-6,
            scale: 1.0,
            kernel: Kernel::gaussian(1.0).unwrap(),
        };
        assert!(matches!(bad.distance(), Err(Error::Consistency(_))));
    }

    #[test]
    fn moment_series_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let k = Kernel::gaussian_sigma(1.0).unwrap();
        for _ in 0..100 {
            let n = rng.random_range(1..6);
            let atoms = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = DiscreteMeasure::uniform(atoms).unwrap();
            let q = m(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)], &[0.4, 0.6]);
            let series = gaussian_moment_series(&p, &q, 1.0, 12);
            assert!((series - mmd_squared(&p, &q, &k)).abs() < 1e-6);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn measure() -> impl Strategy<Value = DiscreteMeasure> {
            prop::collection::vec((-5.0f64..5.0, 0.05f64..1.0), 1..6).prop_map(|pairs| {
                let total: f64 = pairs.iter().map(|p| p.1).sum();
                let (atoms, weights) = pairs.into_iter().map(|(a, w)| (a, w / total)).unzip();
                DiscreteMeasure::new(atoms, weights).unwrap()
            })
        }

        fn kernel() -> impl Strategy<Value = Kernel> {
            prop_oneof![
                (0.1f64..10.0).prop_map(|h| Kernel::gaussian(h).unwrap()),
                (0.1f64..1.9).prop_map(|a| Kernel::unrectified(a).unwrap()),
            ]
        }

        proptest! {
            #[test]
            fn symmetric_and_nonnegative(p in measure(), q in measure(), k in kernel()) {
                let pq = mmd(&p, &q, &k).unwrap();
                let qp = mmd(&q, &p, &k).unwrap();
                prop_assert!(pq >= 0.0);
                prop_assert!((pq - qp).abs() <= 1e-9 * (1.0 + pq));
            }

            #[test]
            fn particle_estimate_agrees_with_uniform_measure(z in prop::collection::vec(-3.0f64..3.0, 1..8),
                                                             w in prop::collection::vec(-3.0f64..3.0, 1..8),
                                                             k in kernel()) {
                let via_measures = mmd_squared(&ps(&z).to_measure(), &ps(&w).to_measure(), &k);
                let direct = mmd_b_squared(&ps(&z), &ps(&w), &k);
                prop_assert!((via_measures - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
            }

            #[test]
            fn gradient_vanishes_when_particles_equal_targets(z in prop::collection::vec(-3.0f64..3.0, 1..8), k in kernel()) {
                let g = mmd_b_grad(&ps(&z), &ps(&z), &k);
                prop_assert!(g.iter().all(|v| v.abs() < 1e-9));
            }
        }
    }
}
