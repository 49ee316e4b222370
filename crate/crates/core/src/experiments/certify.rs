use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, Check, ExperimentConfig, Outcome};
use crate::bellman::{apply_bellman_exact, ReturnTable, Table};
use crate::error::Result;
use crate::mdp::{build_chain, standard_counterexample, Policy};
use crate::measures::DiscreteMeasure;
use crate::mmd::mmd_sup;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertRow {
    pub suite: String,
    pub instance: usize,
    pub kernel: String,
    pub states: usize,
    pub gamma: f64,
    pub alpha: f64,
    /// Supremum MMD between the two tables after one operator application.
    pub lhs: f64,
    /// Supremum MMD between the two tables before.
    pub base: f64,
    pub ratio: f64,
    pub bound: f64,
    pub pass: bool,
    pub seed: u64,
    pub config_hash: String,
}

fn random_table<R: Rng + ?Sized>(
    ns: usize,
    na: usize,
    max_atoms: usize,
    range: f64,
    rng: &mut R,
) -> Result<ReturnTable> {
    let entries = (0..ns * na)
        .map(|_| DiscreteMeasure::random(rng, max_atoms, -range, range))
        .collect::<Result<Vec<_>>>()?;
    Table::from_entries(ns, na, entries)
}

fn ratio(lhs: f64, base: f64) -> f64 {
    if base > 0.0 {
        lhs / base
    } else {
        0.0
    }
}

/// Largest squared MMD accepted as "identical" after the discount-0 collapse.
const COLLAPSE_TOLERANCE: f64 = 1e-12;

struct Instance {
    states: usize,
    gamma: f64,
    t_mu: ReturnTable,
    t_nu: ReturnTable,
    mu: ReturnTable,
    nu: ReturnTable,
}

fn draw_instance(cfg: &ExperimentConfig, i: usize, gamma: Option<f64>) -> Result<Instance> {
    let c = &cfg.contraction;
    let mut rng = crate::Rng::seed_from_u64(derive_seed(cfg.seed, "contraction", &[i as u64]));
    let k = rng.random_range(c.min_chain..=c.max_chain);
    let gamma = gamma.unwrap_or_else(|| c.gammas[rng.random_range(0..c.gammas.len())]);
    let mdp = build_chain(k)?.with_gamma(gamma)?;
    let pi = Policy::random(k, 2, &mut rng)?;
    let mu = random_table(k, 2, c.max_atoms, c.atom_range, &mut rng)?;
    let nu = random_table(k, 2, c.max_atoms, c.atom_range, &mut rng)?;
    let t_mu = apply_bellman_exact(&mdp, &pi, &mu)?;
    let t_nu = apply_bellman_exact(&mdp, &pi, &nu)?;
    Ok(Instance {
        states: k,
        gamma,
        t_mu,
        t_nu,
        mu,
        nu,
    })
}

fn contraction_rows(
    cfg: &ExperimentConfig,
    suite: &str,
    idx: usize,
    inst: &Instance,
    hash: &str,
) -> Result<Vec<CertRow>> {
    cfg.contraction
        .kernels
        .iter()
        .map(|k| {
            let alpha = k.min_scale_order().expect("validated: scale-sensitive kernel");
            let lhs = mmd_sup(&inst.t_mu, &inst.t_nu, k)?;
            let base = mmd_sup(&inst.mu, &inst.nu, k)?;
            let bound = inst.gamma.powf(alpha / 2.0);
            Ok(CertRow {
                suite: suite.into(),
                instance: idx,
                kernel: k.to_string(),
                states: inst.states,
                gamma: inst.gamma,
                alpha,
                lhs,
                base,
                ratio: ratio(lhs, base),
                bound,
                pass: lhs <= bound * base + cfg.contraction.slack,
                seed: cfg.seed,
                config_hash: hash.into(),
            })
        })
        .collect()
}

/// Random chain instances: one exact operator application to two random
/// tables must shrink their supremum MMD by `gamma^(alpha/2)` for every
/// configured scale-sensitive kernel of minimum order `alpha`. A final
/// instance at `gamma = 0` checks that the operator collapses both tables to
/// the same reward mixture.
pub fn run_contraction_suite(cfg: &ExperimentConfig) -> Result<Outcome<CertRow>> {
    let cfg = &super::ExperimentConfig {
        experiment: super::ExperimentKind::Contraction,
        ..cfg.clone()
    };
    cfg.validate()?;
    let hash = cfg.config_hash()?;
    let n = cfg.contraction.instances;
    let mut rows: Vec<CertRow> = (0..n)
        .into_par_iter()
        .map(|i| contraction_rows(cfg, "contraction", i, &draw_instance(cfg, i, None)?, &hash))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    // Both tables collapse to one reward mixture listed in different atom
    // orders, so only rounding noise remains; judge it on the squared scale.
    let mut zero_rows = contraction_rows(cfg, "gamma-zero", n, &draw_instance(cfg, n, Some(0.0))?, &hash)?;
    for r in &mut zero_rows {
        r.pass = r.lhs * r.lhs <= COLLAPSE_TOLERANCE;
    }
    rows.extend(zero_rows);

    let main: Vec<&CertRow> = rows.iter().filter(|r| r.suite == "contraction").collect();
    let violations = main.iter().filter(|r| !r.pass).count();
    let worst = main.iter().map(|r| r.ratio / r.bound).fold(0.0, f64::max);
    let zero: Vec<&CertRow> = rows.iter().filter(|r| r.suite == "gamma-zero").collect();
    let zero_ok = zero.iter().all(|r| r.pass);
    let checks = vec![
        Check::new(
            "contraction",
            violations == 0,
            format!(
                "{} instances x {} kernels: {violations} violations, largest ratio/bound {worst:.4}",
                n,
                cfg.contraction.kernels.len()
            ),
        ),
        Check::new(
            "gamma-zero-collapse",
            zero_ok,
            format!(
                "largest MMD after collapse {:e}",
                zero.iter().map(|r| r.lhs).fold(0.0, f64::max)
            ),
        ),
    ];
    Ok(Outcome {
        rows,
        checks,
        notes: vec![],
    })
}

/// The two-state counterexample: for each discount, order and kernel the
/// operator must expand the supremum MMD beyond `gamma^alpha` by more than
/// the configured margin.
pub fn run_counterexample_check(cfg: &ExperimentConfig) -> Result<Outcome<CertRow>> {
    let cfg = &super::ExperimentConfig {
        experiment: super::ExperimentKind::Counterexample,
        ..cfg.clone()
    };
    cfg.validate()?;
    let hash = cfg.config_hash()?;
    let c = &cfg.counterexample;
    let mut rows = Vec::new();
    let mut idx = 0;
    for &gamma in &c.gammas {
        for &alpha in &c.alphas {
            let (mdp, mu, nu) = standard_counterexample(gamma, alpha)?;
            let pi = Policy::constant(0, 2, 1)?;
            let t_mu = apply_bellman_exact(&mdp, &pi, &mu)?;
            let t_nu = apply_bellman_exact(&mdp, &pi, &nu)?;
            for k in &c.kernels {
                let lhs = mmd_sup(&t_mu, &t_nu, k)?;
                let base = mmd_sup(&mu, &nu, k)?;
                let bound = gamma.powf(alpha);
                rows.push(CertRow {
                    suite: "counterexample".into(),
                    instance: idx,
                    kernel: k.to_string(),
                    states: 2,
                    gamma,
                    alpha,
                    lhs,
                    base,
                    ratio: ratio(lhs, base),
                    bound,
                    pass: lhs - bound * base > c.margin,
                    seed: cfg.seed,
                    config_hash: hash.clone(),
                });
            }
            idx += 1;
        }
    }
    let checks = c
        .kernels
        .iter()
        .map(|k| {
            let name = k.to_string();
            let mine: Vec<&CertRow> = rows.iter().filter(|r| r.kernel == name).collect();
            let failed = mine.iter().filter(|r| !r.pass).count();
            let least = mine.iter().map(|r| r.ratio / r.bound).fold(f64::INFINITY, f64::min);
            Check::new(
                format!("non-contraction {name}"),
                failed == 0,
                format!(
                    "{} (gamma, alpha) pairs, {failed} without expansion, smallest ratio/bound {least:.4}",
                    mine.len()
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
    use crate::experiments::ExperimentKind;

    #[test]
    fn small_contraction_suite_passes() {
        let mut cfg = ExperimentConfig::for_kind(ExperimentKind::Contraction);
        cfg.contraction.instances = 10;
        let out = run_contraction_suite(&cfg).unwrap();
        assert_eq!(out.rows.len(), 11 * cfg.contraction.kernels.len());
        assert!(out.passed(), "{:?}", out.checks);
        assert!(out
            .rows
            .iter()
            .filter(|r| r.suite == "gamma-zero")
            .all(|r| r.pass && r.ratio < 1e-6));
    }

    #[test]
    fn counterexample_expands() {
        let cfg = ExperimentConfig::for_kind(ExperimentKind::Counterexample);
        let out = run_counterexample_check(&cfg).unwrap();
        assert_eq!(out.rows.len(), 2 * 4 * 2);
        assert!(out.passed(), "{:?}", out.checks);
        let gauss = out
            .rows
            .iter()
            .find(|r| r.gamma == 0.8 && r.alpha == 1.0 && r.kernel.starts_with("gaussian"))
            .unwrap();
        assert!(gauss.ratio > 0.8);
    }
}
