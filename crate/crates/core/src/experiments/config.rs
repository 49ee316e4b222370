use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::herding::DescentOptions;
use crate::kernels::Kernel;
use crate::learners::LearnerConfig;
use crate::mdp::{counterexample, DEFAULT_HORIZON};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ChainEval,
    Contraction,
    Counterexample,
    Herding,
    Properties,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::ChainEval,
        ExperimentKind::Contraction,
        ExperimentKind::Counterexample,
        ExperimentKind::Herding,
        ExperimentKind::Properties,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ChainEval => "chain-eval",
            ExperimentKind::Contraction => "contraction",
            ExperimentKind::Counterexample => "counterexample",
            ExperimentKind::Herding => "herding",
            ExperimentKind::Properties => "properties",
        }
    }

    pub(crate) fn file_stem(self) -> String {
        self.name().replace('-', "_")
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown experiment {s:?}")))
    }
}

/// A learner with the label used for it in outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedLearner {
    pub name: String,
    #[serde(default)]
    pub learner: LearnerConfig,
}

fn default_learners() -> Vec<NamedLearner> {
    vec![
        NamedLearner {
            name: "gaussian-mmdrl".into(),
            learner: LearnerConfig::default(),
        },
        NamedLearner {
            name: "unrectified-mmdrl".into(),
            learner: LearnerConfig::mmd(Kernel::unrectified(1.0).expect("order 1 is valid")),
        },
        NamedLearner {
            name: "qrdrl".into(),
            learner: LearnerConfig::quantile(),
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContractionConfig {
    pub instances: usize,
    pub min_chain: usize,
    pub max_chain: usize,
    pub max_atoms: usize,
    /// Atoms are drawn uniformly from `[-atom_range, atom_range]`.
    pub atom_range: f64,
    pub gammas: Vec<f64>,
    pub kernels: Vec<Kernel>,
    pub slack: f64,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        let u = |a| Kernel::unrectified(a).expect("valid order");
        let mix = |c: &[(f64, f64)]| Kernel::unrectified_mixture(c).expect("valid mixture");
        ContractionConfig {
            instances: 100,
            min_chain: 2,
            max_chain: 6,
            max_atoms: 8,
            atom_range: 5.0,
            gammas: vec![0.5, 0.9, 0.99],
            kernels: vec![
                u(0.5),
                u(1.0),
                u(1.5),
                mix(&[(1.0, 0.5), (1.0, 1.5)]),
                mix(&[(0.3, 1.0), (2.0, 1.5)]),
                mix(&[(1.0, 0.5), (1.0, 1.0), (1.0, 1.5)]),
            ],
            slack: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub gammas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub kernels: Vec<Kernel>,
    pub margin: f64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        // sigma = 0.1: Gaussian bandwidth h = 2 sigma^2, exp-prod scale sigma^2
        CounterexampleConfig {
            gammas: vec![counterexample::GAMMA, counterexample::GAMMA_ALT],
            alphas: vec![0.25, 0.5, 0.75, 1.0],
            kernels: vec![
                Kernel::gaussian(0.02).expect("positive bandwidth"),
                Kernel::exp_prod(0.01).expect("positive scale"),
            ],
            margin: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HerdingConfig {
    pub atoms: usize,
    pub lo: f64,
    pub hi: f64,
    pub ns: Vec<usize>,
    pub kernel: Kernel,
    pub descent: DescentOptions,
    pub grid_points: usize,
    /// Approximation floor of the target; points where it reaches 10% of the
    /// measured MMD are left out of the fits.
    pub floor: Option<f64>,
    pub descent_band: (f64, f64),
    pub greedy_max_slope: f64,
}

impl Default for HerdingConfig {
    fn default() -> Self {
        HerdingConfig {
            atoms: 200,
            lo: -4.0,
            hi: 4.0,
            ns: vec![4, 8, 16, 32, 64, 128],
            kernel: Kernel::gaussian(1e-3).expect("positive bandwidth"),
            descent: DescentOptions::default(),
            grid_points: 2001,
            floor: None,
            descent_band: (-0.65, -0.45),
            greedy_max_slope: -0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropertyConfig {
    pub triples: usize,
    pub lemma_instances: usize,
    pub gradient_instances: usize,
    pub series_instances: usize,
    pub series_order: u32,
    pub tolerance: f64,
    pub gradient_tolerance: f64,
    pub series_tolerance: f64,
    pub degeneracy_tolerance: f64,
}

impl Default for PropertyConfig {
    fn default() -> Self {
        PropertyConfig {
            triples: 500,
            lemma_instances: 200,
            gradient_instances: 100,
            series_instances: 200,
            series_order: 12,
            tolerance: 1e-10,
            gradient_tolerance: 1e-5,
            series_tolerance: 1e-6,
            degeneracy_tolerance: 1e-12,
        }
    }
}

/// A complete experiment description, read from one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    /// Replicate ids for the chain sweep.
    pub seeds: Vec<u64>,
    pub chain_lengths: Vec<usize>,
    pub methods: Vec<NamedLearner>,
    pub mc_rollouts: usize,
    pub max_order: u32,
    pub horizon: usize,
    pub contraction: ContractionConfig,
    pub counterexample: CounterexampleConfig,
    pub herding: HerdingConfig,
    pub properties: PropertyConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::ChainEval,
            seed: 0,
            seeds: (0..30).collect(),
            chain_lengths: (1..=15).collect(),
            methods: default_learners(),
            mc_rollouts: 10_000,
            max_order: 4,
            horizon: DEFAULT_HORIZON,
            contraction: ContractionConfig::default(),
            counterexample: CounterexampleConfig::default(),
            herding: HerdingConfig::default(),
            properties: PropertyConfig::default(),
            out_dir: None,
            workers: None,
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl ExperimentConfig {
    pub fn for_kind(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment: kind,
            ..Default::default()
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form,
    /// ignoring where the output goes.
    pub fn config_hash(&self) -> Result<String> {
        let canonical = ExperimentConfig {
            out_dir: None,
            workers: None,
            ..self.clone()
        };
        let digest = Sha256::digest(serde_json::to_vec(&canonical)?);
        Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        match self.experiment {
            ExperimentKind::ChainEval => {
                check(!self.seeds.is_empty(), || "seed list is empty".into())?;
                check(!self.chain_lengths.is_empty(), || "no chain lengths".into())?;
                check(self.chain_lengths.iter().all(|&k| k >= 1), || {
                    "chain lengths must be >= 1".into()
                })?;
                check(!self.methods.is_empty(), || "no learners configured".into())?;
                check(self.mc_rollouts >= 1, || "mc_rollouts must be >= 1".into())?;
                check(self.max_order >= 1, || "max_order must be >= 1".into())?;
                check(self.horizon >= 1, || "horizon must be >= 1".into())?;
                for (i, m) in self.methods.iter().enumerate() {
                    check(!m.name.is_empty(), || format!("learner {i} has an empty name"))?;
                    check(!self.methods[..i].iter().any(|o| o.name == m.name), || {
                        format!("duplicate learner name {:?}", m.name)
                    })?;
                    m.learner.validate()?;
                }
            }
            ExperimentKind::Contraction => {
                let c = &self.contraction;
                check(c.instances >= 1, || "contraction needs instances".into())?;
                check(2 <= c.min_chain && c.min_chain <= c.max_chain, || {
                    format!("chain range {}..={} invalid", c.min_chain, c.max_chain)
                })?;
                check(c.max_atoms >= 1, || "max_atoms must be >= 1".into())?;
                check(c.atom_range > 0.0 && c.atom_range.is_finite(), || {
                    "atom_range must be positive".into()
                })?;
                check(
                    !c.gammas.is_empty() && c.gammas.iter().all(|g| (0.0..1.0).contains(g)),
                    || "contraction gammas must lie in [0, 1)".into(),
                )?;
                check(!c.kernels.is_empty(), || "no contraction kernels".into())?;
                for k in &c.kernels {
                    k.validate()?;
                    check(k.min_scale_order().is_some(), || format!("{k} has no scale order"))?;
                }
            }
            ExperimentKind::Counterexample => {
                let c = &self.counterexample;
                check(
                    !c.gammas.is_empty() && c.gammas.iter().all(|g| *g > 0.0 && *g < 1.0),
                    || "counterexample gammas must lie in (0, 1)".into(),
                )?;
                check(
                    !c.alphas.is_empty() && c.alphas.iter().all(|a| *a > 0.0 && *a <= 1.0),
                    || "counterexample alphas must lie in (0, 1]".into(),
                )?;
                check(!c.kernels.is_empty(), || "no counterexample kernels".into())?;
                for k in &c.kernels {
                    k.validate()?;
                }
            }
            ExperimentKind::Herding => {
                let h = &self.herding;
                check(h.atoms >= 1 && h.lo < h.hi, || {
                    "herding target needs atoms on a nonempty interval".into()
                })?;
                check(h.grid_points >= 1, || "greedy grid is empty".into())?;
                check(h.descent_band.0 <= h.descent_band.1, || "descent band is empty".into())?;
                h.kernel.validate()?;
                h.descent.validate()?;
                crate::herding::check_counts(&h.ns)?;
            }
            ExperimentKind::Properties => {
                let p = &self.properties;
                check(p.triples >= 1 && p.lemma_instances >= 1, || {
                    "property suites need instances".into()
                })?;
                check(p.gradient_instances >= 1 && p.series_instances >= 1, || {
                    "property suites need instances".into()
                })?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        for kind in ExperimentKind::ALL {
            let cfg = ExperimentConfig::for_kind(kind);
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(kind.name().parse::<ExperimentKind>().unwrap(), kind);
        }
    }

    #[test]
    fn empty_seed_list_is_rejected() {
        let cfg = ExperimentConfig {
            seeds: vec![],
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "herding", "seed": 3}"#).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Herding);
        assert_eq!(cfg.herding.atoms, 200);
        assert_eq!(cfg.mc_rollouts, 10_000);
        assert!(ExperimentConfig::from_json(r#"{"sed": 3}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment": "nope"}"#).is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            out_dir: Some("/tmp/x".into()),
            workers: Some(3),
            ..a.clone()
        };
        assert_eq!(a.config_hash().unwrap(), b.config_hash().unwrap());
        let c = ExperimentConfig { seed: 1, ..a.clone() };
        assert_ne!(a.config_hash().unwrap(), c.config_hash().unwrap());
        assert_eq!(a.config_hash().unwrap().len(), 16);
    }

    #[test]
    fn duplicate_learner_names_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.methods.push(cfg.methods[0].clone());
        assert!(cfg.validate().is_err());
    }
}
