//! Tabular particle learners trained with TD-style updates.
//!
//! Each `(state, action)` entry holds `N` particles. A transition
//! `(s, a, r, s')` produces Bellman target particles `r + gamma * z'` from the
//! target copy of the successor's entry, and the particles at `(s, a)` take
//! one gradient step on either the squared MMD to the targets or the
//! quantile (pinball) loss at levels `(2i - 1) / (2N)`.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bellman::{empirical_target, greedy_action, ParticleTable};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::mdp::{Policy, TabularMdp};
use crate::measures::ParticleSet;
use crate::mmd::mmd_b_grad;

/// Which loss the particles descend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Mmd { kernel: Kernel },
    Quantile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub num_particles: usize,
    pub method: Method,
    /// Step size at update `t` is `t^(-lr_exponent)`.
    pub lr_exponent: f64,
    pub init_mean: f64,
    pub init_std: f64,
    pub episodes_per_iter: usize,
    pub num_iters: usize,
    /// Episodes are cut after this many steps even without reaching a terminal state.
    pub max_episode_len: usize,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            num_particles: 30,
            method: Method::Mmd {
                kernel: Kernel::tabular_mixture(),
            },
            lr_exponent: 0.2,
            init_mean: -1.0,
            init_std: 0.08,
            episodes_per_iter: 100,
            num_iters: 15,
            max_episode_len: 1000,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn mmd(kernel: Kernel) -> Self {
        LearnerConfig {
            method: Method::Mmd { kernel },
            ..Default::default()
        }
    }

    pub fn quantile() -> Self {
        LearnerConfig {
            method: Method::Quantile,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_particles == 0 {
            return Err(Error::Config("num_particles must be >= 1".into()));
        }
        if !(self.lr_exponent.is_finite() && self.lr_exponent >= 0.0) {
            return Err(Error::Config(
                "lr_exponent must be >= 0 for a nonincreasing schedule".into(),
            ));
        }
        if !(self.init_std.is_finite() && self.init_std >= 0.0) || !self.init_mean.is_finite() {
            return Err(Error::Config(
                "initialization parameters must be finite, std >= 0".into(),
            ));
        }
        if let Method::Mmd { kernel } = &self.method {
            kernel.validate()?;
        }
        Ok(())
    }

    /// `t^(-lr_exponent)` for `t >= 1`.
    pub fn learning_rate(&self, t: u64) -> f64 {
        (t as f64).powf(-self.lr_exponent)
    }
}

/// One observed transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next: usize,
    pub next_terminal: bool,
}

/// How the successor action is chosen when forming targets.
#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    /// `a' ~ pi(. | s')`.
    Evaluation(&'a Policy),
    /// `a' = argmax_a mean(theta(s', a))`.
    Control,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub theta: ParticleTable,
    pub theta_minus: ParticleTable,
    /// Index of the next update, starting at 1.
    pub t: u64,
}

impl LearnerState {
    pub fn new(theta: ParticleTable) -> Self {
        LearnerState {
            theta_minus: theta.clone(),
            theta,
            t: 1,
        }
    }

    /// Particles drawn independently from `Normal(init_mean, init_std)`.
    pub fn initialize<R: Rng + ?Sized>(
        num_states: usize,
        num_actions: usize,
        cfg: &LearnerConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let normal = Normal::new(cfg.init_mean, cfg.init_std)
            .map_err(|e| Error::Config(format!("particle initialization: {e}")))?;
        let theta = ParticleTable::from_fn(num_states, num_actions, |_, _| {
            ParticleSet::new((0..cfg.num_particles).map(|_| normal.sample(rng)).collect())
        })?;
        Ok(Self::new(theta))
    }

    fn targets<R: Rng + ?Sized>(&self, tr: &Transition, mode: Mode<'_>, gamma: f64, rng: &mut R) -> ParticleSet {
        let a_star = match mode {
            Mode::Evaluation(pi) => pi.sample(tr.next, rng),
            Mode::Control => greedy_action(&self.theta, tr.next),
        };
        empirical_target(
            tr.reward,
            self.theta_minus.get(tr.next, a_star),
            gamma,
            tr.next_terminal,
        )
    }

    /// Applies `theta(s, a) -= lr * grad`, then syncs the target copy.
    fn apply(&mut self, tr: &Transition, grad: &[f64], lr: f64) {
        let entry = self.theta.get_mut(tr.state, tr.action);
        for (z, g) in entry.as_mut_slice().iter_mut().zip(grad) {
            *z -= lr * g;
        }
        *self.theta_minus.get_mut(tr.state, tr.action) = entry.clone();
        self.t += 1;
    }
}

/// Gradient of `(1/N) sum_j (T_j - theta_i)(tau_i - 1{T_j < theta_i})` in each
/// `theta_i`, with `tau_i = (2i - 1) / (2N)`.
pub fn quantile_grad(theta: &[f64], targets: &[f64]) -> Vec<f64> {
    let n = theta.len() as f64;
    let m = targets.len() as f64;
    theta
        .iter()
        .enumerate()
        .map(|(i, &th)| {
            let tau = (2 * i + 1) as f64 / (2.0 * n);
            let below = targets.iter().filter(|&&t| t < th).count() as f64;
            -(tau * m - below) / m
        })
        .collect()
}

/// Mean pinball loss of `theta` against `targets`, the objective behind [`quantile_grad`].
pub fn quantile_loss(theta: &[f64], targets: &[f64]) -> f64 {
    let n = theta.len() as f64;
    let m = targets.len() as f64;
    theta
        .iter()
        .enumerate()
        .map(|(i, &th)| {
            let tau = (2 * i + 1) as f64 / (2.0 * n);
            targets
                .iter()
                .map(|&t| (t - th) * (tau - if t < th { 1.0 } else { 0.0 }))
                .sum::<f64>()
                / m
        })
        .sum()
}

/// One MMD update at `(s, a)`.
pub fn mmdrl_td_step<R: Rng + ?Sized>(
    state: &mut LearnerState,
    tr: &Transition,
    mode: Mode<'_>,
    kernel: &Kernel,
    cfg: &LearnerConfig,
    gamma: f64,
    rng: &mut R,
) {
    let targets = state.targets(tr, mode, gamma, rng);
    let grad = mmd_b_grad(state.theta.get(tr.state, tr.action), &targets, kernel);
    let lr = cfg.learning_rate(state.t);
    state.apply(tr, &grad, lr);
}

/// One quantile-regression update at `(s, a)`.
pub fn qrdrl_td_step<R: Rng + ?Sized>(
    state: &mut LearnerState,
    tr: &Transition,
    mode: Mode<'_>,
    cfg: &LearnerConfig,
    gamma: f64,
    rng: &mut R,
) {
    let targets = state.targets(tr, mode, gamma, rng);
    let grad = quantile_grad(state.theta.get(tr.state, tr.action).as_slice(), targets.as_slice());
    let lr = cfg.learning_rate(state.t);
    state.apply(tr, &grad, lr);
}

/// Dispatches to the update rule named by `cfg.method`.
pub fn td_step<R: Rng + ?Sized>(
    state: &mut LearnerState,
    tr: &Transition,
    mode: Mode<'_>,
    cfg: &LearnerConfig,
    gamma: f64,
    rng: &mut R,
) {
    match &cfg.method {
        Method::Mmd { kernel } => mmdrl_td_step(state, tr, mode, kernel, cfg, gamma, rng),
        Method::Quantile => qrdrl_td_step(state, tr, mode, cfg, gamma, rng),
    }
}

fn run<R: Rng>(
    mdp: &TabularMdp,
    behavior: &Policy,
    mode: Mode<'_>,
    start: usize,
    cfg: &LearnerConfig,
    rng: &mut R,
) -> Result<ParticleTable> {
    cfg.validate()?;
    behavior.check_compatible(mdp)?;
    if start >= mdp.num_states() {
        return Err(Error::Domain(format!("start state {start} out of range")));
    }
    let gamma = mdp.gamma();
    let bound = 10.0 / (1.0 - gamma);
    let mut state = LearnerState::initialize(mdp.num_states(), mdp.num_actions(), cfg, rng)?;
    for _ in 0..cfg.num_iters * cfg.episodes_per_iter {
        let mut s = start;
        for _ in 0..cfg.max_episode_len {
            if mdp.is_terminal(s) {
                break;
            }
            let a = behavior.sample(s, rng);
            let (reward, next) = mdp.sample_transition(s, a, rng);
            let tr = Transition {
                state: s,
                action: a,
                reward,
                next,
                next_terminal: mdp.is_terminal(next),
            };
            td_step(&mut state, &tr, mode, cfg, gamma, rng);
            let worst = state.theta.get(s, a).as_slice().iter().fold(0.0f64, |acc, z| {
                if z.is_finite() {
                    acc.max(z.abs())
                } else {
                    f64::INFINITY
                }
            });
            if worst > bound {
                return Err(Error::Divergence {
                    step: state.t - 1,
                    magnitude: worst,
                    bound,
                });
            }
            s = next;
        }
    }
    Ok(state.theta)
}

/// Learns the return distributions of `policy` from on-policy episodes that
/// start in `start`. Deterministic given `cfg.seed`.
pub fn run_policy_evaluation(
    mdp: &TabularMdp,
    policy: &Policy,
    start: usize,
    cfg: &LearnerConfig,
) -> Result<ParticleTable> {
    let mut rng = crate::Rng::seed_from_u64(cfg.seed);
    run(mdp, policy, Mode::Evaluation(policy), start, cfg, &mut rng)
}

/// Greedy-target control: episodes follow `behavior`, targets use the greedy
/// successor action.
pub fn run_control(mdp: &TabularMdp, behavior: &Policy, start: usize, cfg: &LearnerConfig) -> Result<ParticleTable> {
    let mut rng = crate::Rng::seed_from_u64(cfg.seed);
    run(mdp, behavior, Mode::Control, start, cfg, &mut rng)
}
