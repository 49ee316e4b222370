use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, Check, ExperimentConfig, ExperimentKind, Outcome};
use crate::error::Result;
use crate::herding::{discretized_gaussian, fit_rate, rate_points, RateMethod};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HerdingRow {
    pub n: usize,
    pub mmd: f64,
    pub method: String,
    pub seed: u64,
    pub config_hash: String,
}

/// Achieved MMD against a discretized standard normal for descent and greedy
/// herding over the configured particle counts, with log-log slope checks.
pub fn run_herding_experiment(cfg: &ExperimentConfig) -> Result<Outcome<HerdingRow>> {
    let cfg = &ExperimentConfig {
        experiment: ExperimentKind::Herding,
        ..cfg.clone()
    };
    cfg.validate()?;
    let h = &cfg.herding;
    let hash = cfg.config_hash()?;
    let target = discretized_gaussian(h.atoms, h.lo, h.hi)?;
    let methods = [
        RateMethod::Descent {
            options: h.descent.clone(),
        },
        RateMethod::Greedy {
            grid_lo: h.lo,
            grid_hi: h.hi,
            grid_points: h.grid_points,
        },
    ];
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut notes = vec![format!(
        "target: {} atoms on [{}, {}], kernel {}",
        h.atoms, h.lo, h.hi, h.kernel
    )];
    for method in &methods {
        let mut rng = crate::Rng::seed_from_u64(derive_seed(cfg.seed, "herding", &[]));
        let points = rate_points(&target, &h.ns, &h.kernel, method, &mut rng)?;
        rows.extend(points.iter().map(|&(n, mmd)| HerdingRow {
            n,
            mmd,
            method: method.name().into(),
            seed: cfg.seed,
            config_hash: hash.clone(),
        }));
        let fit = fit_rate(&points, h.floor);
        let (passed, detail) = match (&fit, method) {
            (Ok(f), RateMethod::Descent { .. }) => (
                h.descent_band.0 <= f.slope && f.slope <= h.descent_band.1,
                format!(
                    "slope {:.4}, band [{}, {}], fitted n {:?}",
                    f.slope, h.descent_band.0, h.descent_band.1, f.used
                ),
            ),
            (Ok(f), RateMethod::Greedy { .. }) => (
                f.slope <= h.greedy_max_slope,
                format!(
                    "slope {:.4}, required <= {}, fitted n {:?}",
                    f.slope, h.greedy_max_slope, f.used
                ),
            ),
            (Err(e), _) => (false, format!("no fit: {e}")),
        };
        if let Ok(f) = &fit {
            notes.push(format!("{} slope {:.6}", method.name(), f.slope));
        }
        checks.push(Check::new(format!("{}-rate", method.name()), passed, detail));
    }
    Ok(Outcome { rows, checks, notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herding::DescentOptions;
    use crate::kernels::Kernel;

    #[test]
    fn small_study_writes_both_methods() {
        let mut cfg = ExperimentConfig::for_kind(ExperimentKind::Herding);
        cfg.herding.atoms = 40;
        cfg.herding.ns = vec![2, 4, 8, 16];
        cfg.herding.kernel = Kernel::gaussian(0.05).unwrap();
        cfg.herding.descent = DescentOptions {
            max_steps: 100,
            lr: 0.1,
            inits: 2,
        };
        cfg.herding.grid_points = 201;
        let out = run_herding_experiment(&cfg).unwrap();
        assert_eq!(out.rows.len(), 8);
        assert_eq!(out.checks.len(), 2);
        assert!(out.rows.iter().all(|r| r.mmd > 0.0));
        let again = run_herding_experiment(&cfg).unwrap();
        assert_eq!(out.csv_bytes().unwrap(), again.csv_bytes().unwrap());
    }
}
