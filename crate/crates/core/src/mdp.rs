//! Finite MDPs whose rewards have finite support.
//!
//! Rewards are attached to `(state, action, next_state)` branches, which covers
//! rewards that depend only on `(state, action)` as a special case.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bellman::ReturnTable;
use crate::error::{domain, Result};
use crate::measures::DiscreteMeasure;

/// Tolerance on transition and policy row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Chain action that moves right with probability 0.9.
pub const FORWARD: usize = 0;
/// Chain action that resets to the first state with probability 0.9.
pub const BACKWARD: usize = 1;

/// Rollout horizon used when none is given; `0.9^200` is about `7e-10`.
pub const DEFAULT_HORIZON: usize = 200;

/// One outcome of taking an action: the successor, its probability and the
/// reward distribution on that transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub next: usize,
    pub prob: f64,
    pub reward: DiscreteMeasure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    terminal: Vec<bool>,
    /// Indexed by `state * num_actions + action`.
    branches: Vec<Vec<Branch>>,
}

pub(crate) fn draw_index<R: Rng + ?Sized>(weights: impl Iterator<Item = f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the cumulative sum
    last
}

fn check_row(what: &str, probs: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for p in probs {
        if !(p.is_finite() && p >= 0.0) {
            return domain(format!("{what}: probability {p} is not finite and nonnegative"));
        }
        total += p;
    }
    if (total - 1.0).abs() > ROW_SUM_TOLERANCE {
        return domain(format!("{what}: probabilities sum to {total}"));
    }
    Ok(())
}

impl TabularMdp {
    /// Builds an MDP from per-`(s, a)` branch lists, indexed `s * num_actions + a`.
    ///
    /// Rows of terminal states may be left empty; they are filled with a
    /// reward-0 self-loop. Non-empty terminal rows must already be one.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        gamma: f64,
        terminal: &[usize],
        mut branches: Vec<Vec<Branch>>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 {
            return domain("an MDP needs at least one state and one action");
        }
        if !(0.0..1.0).contains(&gamma) {
            return domain(format!("discount must lie in [0, 1), got {gamma}"));
        }
        if branches.len() != num_states * num_actions {
            return domain(format!(
                "expected {} transition rows, got {}",
                num_states * num_actions,
                branches.len()
            ));
        }
        let mut is_terminal = vec![false; num_states];
        for &s in terminal {
            if s >= num_states {
                return domain(format!("terminal state {s} out of range"));
            }
            is_terminal[s] = true;
        }
        for s in 0..num_states {
            for a in 0..num_actions {
                let row = &mut branches[s * num_actions + a];
                if is_terminal[s] {
                    let self_loop = Branch {
                        next: s,
                        prob: 1.0,
                        reward: DiscreteMeasure::dirac(0.0)?,
                    };
                    if row.is_empty() {
                        row.push(self_loop);
                    } else if row.len() != 1 || *row != [self_loop] {
                        return domain(format!("terminal state {s} must self-loop with reward 0"));
                    }
                }
                if row.iter().any(|b| b.next >= num_states) {
                    return domain(format!("({s}, {a}) has a successor out of range"));
                }
                check_row(&format!("transition ({s}, {a})"), row.iter().map(|b| b.prob))?;
            }
        }
        Ok(TabularMdp {
            num_states,
            num_actions,
            gamma,
            terminal: is_terminal,
            branches,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_states(&self) -> Vec<usize> {
        (0..self.num_states).filter(|&s| self.terminal[s]).collect()
    }

    pub fn branches(&self, s: usize, a: usize) -> &[Branch] {
        &self.branches[s * self.num_actions + a]
    }

    /// Same dynamics with a different discount.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return domain(format!("discount must lie in [0, 1), got {gamma}"));
        }
        Ok(TabularMdp { gamma, ..self.clone() })
    }

    /// Draws `(reward, next_state)`. Terminal states return `(0, s)`.
    pub fn sample_transition<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> (f64, usize) {
        if self.terminal[s] {
            return (0.0, s);
        }
        let row = self.branches(s, a);
        let branch = &row[draw_index(row.iter().map(|b| b.prob), rng)];
        let r = branch.reward.atoms()[draw_index(branch.reward.weights().iter().copied(), rng)];
        (r, branch.next)
    }

    pub fn to_document(&self) -> MdpDocument {
        let mut transitions = Vec::new();
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                for b in self.branches(s, a) {
                    transitions.push(TransitionRecord {
                        state: s,
                        action: a,
                        next: b.next,
                        prob: b.prob,
                        rewards: b.reward.atoms().to_vec(),
                        reward_probs: b.reward.weights().to_vec(),
                    });
                }
            }
        }
        MdpDocument {
            num_states: self.num_states,
            num_actions: self.num_actions,
            gamma: self.gamma,
            terminal: self.terminal_states(),
            transitions,
        }
    }

    pub fn from_document(doc: &MdpDocument) -> Result<Self> {
        let mut branches = vec![Vec::new(); doc.num_states * doc.num_actions];
        for t in &doc.transitions {
            if t.state >= doc.num_states || t.action >= doc.num_actions {
                return domain(format!("transition ({}, {}) out of range", t.state, t.action));
            }
            branches[t.state * doc.num_actions + t.action].push(Branch {
                next: t.next,
                prob: t.prob,
                reward: DiscreteMeasure::new(t.rewards.clone(), t.reward_probs.clone())?,
            });
        }
        Self::new(doc.num_states, doc.num_actions, doc.gamma, &doc.terminal, branches)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(s)?)
    }
}

/// Plain JSON form of a [`TabularMdp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpDocument {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    #[serde(default)]
    pub terminal: Vec<usize>,
    pub transitions: Vec<TransitionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub state: usize,
    pub action: usize,
    pub next: usize,
    pub prob: f64,
    pub rewards: Vec<f64>,
    pub reward_probs: Vec<f64>,
}

/// A stationary stochastic policy: one action distribution per state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    probs: Vec<Vec<f64>>,
}

impl Policy {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.is_empty() {
            return domain("a policy needs at least one state");
        }
        let width = probs[0].len();
        for (s, row) in probs.iter().enumerate() {
            if row.len() != width || width == 0 {
                return domain(format!("policy row {s} has {} actions, expected {width}", row.len()));
            }
            check_row(&format!("policy row {s}"), row.iter().copied())?;
        }
        Ok(Policy { probs })
    }

    /// Always takes `actions[s]` in state `s`.
    pub fn deterministic(actions: &[usize], num_actions: usize) -> Result<Self> {
        let rows = actions
            .iter()
            .map(|&a| {
                if a >= num_actions {
                    return domain(format!("action {a} out of range"));
                }
                let mut row = vec![0.0; num_actions];
                row[a] = 1.0;
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }

    pub fn constant(action: usize, num_states: usize, num_actions: usize) -> Result<Self> {
        Self::deterministic(&vec![action; num_states], num_actions)
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Result<Self> {
        Self::new(vec![vec![1.0 / num_actions as f64; num_actions]; num_states])
    }

    /// A policy with independently drawn, normalized action weights per state.
    pub fn random<R: Rng + ?Sized>(num_states: usize, num_actions: usize, rng: &mut R) -> Result<Self> {
        let rows = (0..num_states)
            .map(|_| {
                let raw: Vec<f64> = (0..num_actions).map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let mut row: Vec<f64> = raw.iter().map(|w| w / total).collect();
                // pin the row sum to 1 up to the last ulp
                let head: f64 = row[..num_actions - 1].iter().sum();
                row[num_actions - 1] = 1.0 - head;
                row
            })
            .collect();
        Self::new(rows)
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn num_actions(&self) -> usize {
        self.probs[0].len()
    }

    pub fn action_probs(&self, s: usize) -> &[f64] {
        &self.probs[s]
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        draw_index(self.probs[s].iter().copied(), rng)
    }

    pub fn check_compatible(&self, mdp: &TabularMdp) -> Result<()> {
        if self.num_states() != mdp.num_states() || self.num_actions() != mdp.num_actions() {
            return domain(format!(
                "policy shape {}x{} does not match MDP {}x{}",
                self.num_states(),
                self.num_actions(),
                mdp.num_states(),
                mdp.num_actions()
            ));
        }
        Ok(())
    }
}

/// The chain of `k` states: `s_{k-1}` is terminal, entering `s_0` pays -1,
/// entering `s_{k-1}` pays +1, and the discount is 0.9.
///
/// Action [`FORWARD`] moves right w.p. 0.9 and back to `s_0` w.p. 0.1;
/// [`BACKWARD`] swaps those probabilities. From `s_0` the reset branch is a
/// self-loop that still pays -1.
pub fn build_chain(k: usize) -> Result<TabularMdp> {
    if k < 2 {
        return domain(format!("chain length must be >= 2, got {k}"));
    }
    let reward_into = |next: usize| -> f64 {
        if next == 0 {
            -1.0
        } else if next == k - 1 {
            1.0
        } else {
            0.0
        }
    };
    let mut branches = Vec::with_capacity(2 * k);
    for s in 0..k {
        for a in [FORWARD, BACKWARD] {
            if s == k - 1 {
                branches.push(Vec::new());
                continue;
            }
            let (p_right, p_reset) = if a == FORWARD { (0.9, 0.1) } else { (0.1, 0.9) };
            let row = [(s + 1, p_right), (0, p_reset)]
                .into_iter()
                .map(|(next, prob)| {
                    Ok(Branch {
                        next,
                        prob,
                        reward: DiscreteMeasure::dirac(reward_into(next))?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            branches.push(row);
        }
    }
    TabularMdp::new(k, 2, 0.9, &[k - 1], branches)
}

/// Reward support and state weights for the two-state counterexample.
pub mod counterexample {
    pub const N: usize = 5;
    pub const GAMMA: f64 = 0.8;
    pub const GAMMA_ALT: f64 = 0.9;
    pub const SIGMA: f64 = 0.1;
    pub const P: [f64; 5] = [0.4, 0.3, 0.2, 0.1, 0.0];
    pub const Q: [f64; 5] = [0.0, 0.1, 0.2, 0.3, 0.4];
    pub const REWARDS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
}

/// Reward probabilities `[eps, ..., eps, 1 - (n-1) eps]` with
/// `sum_i p_i^2 = gamma^(2 alpha)`, taking the root in `(0, 1/n]`.
pub fn counterexample_reward_probs(n: usize, gamma: f64, alpha: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return domain("reward support needs at least two points");
    }
    if !(gamma > 0.0 && gamma < 1.0) || !(alpha > 0.0 && alpha <= 1.0) {
        return domain(format!(
            "need gamma in (0, 1) and alpha in (0, 1], got {gamma}, {alpha}"
        ));
    }
    let target = gamma.powf(2.0 * alpha);
    if target < 1.0 / n as f64 {
        return domain(format!("gamma^(2 alpha) = {target} is below 1/n"));
    }
    // (n-1) e^2 + (1 - (n-1) e)^2 = target  =>  m(m+1) e^2 - 2m e + (1 - target) = 0
    let m = (n - 1) as f64;
    let disc = m * m - m * (m + 1.0) * (1.0 - target);
    let eps = (m - disc.max(0.0).sqrt()) / (m * (m + 1.0));
    let mut probs = vec![eps; n];
    probs[n - 1] = 1.0 - m * eps;
    Ok(probs)
}

/// Two states, one action: `s_0 -> s_1` deterministically and `s_1` absorbing,
/// each transition paying `r ~ sum_i reward_probs[i] delta(rewards[i])`.
///
/// Returns the MDP and the tables `mu` (weights `p` on the reward support at
/// both states) and `nu` (weights `q`).
pub fn build_counterexample(
    gamma: f64,
    rewards: &[f64],
    reward_probs: &[f64],
    p: &[f64],
    q: &[f64],
) -> Result<(TabularMdp, ReturnTable, ReturnTable)> {
    let n = rewards.len();
    if reward_probs.len() != n || p.len() != n || q.len() != n {
        return domain("reward support, reward probabilities and weight vectors differ in length");
    }
    let reward = DiscreteMeasure::new(rewards.to_vec(), reward_probs.to_vec())?;
    let branches = vec![
        vec![Branch {
            next: 1,
            prob: 1.0,
            reward: reward.clone(),
        }],
        vec![Branch {
            next: 1,
            prob: 1.0,
            reward,
        }],
    ];
    let mdp = TabularMdp::new(2, 1, gamma, &[], branches)?;
    let pm = DiscreteMeasure::new(rewards.to_vec(), p.to_vec())?;
    let qm = DiscreteMeasure::new(rewards.to_vec(), q.to_vec())?;
    let mu = ReturnTable::from_entries(2, 1, vec![pm.clone(), pm])?;
    let nu = ReturnTable::from_entries(2, 1, vec![qm.clone(), qm])?;
    Ok((mdp, mu, nu))
}

/// The five-point counterexample instance for a given discount and order `alpha`.
pub fn standard_counterexample(gamma: f64, alpha: f64) -> Result<(TabularMdp, ReturnTable, ReturnTable)> {
    use counterexample::*;
    let reward_probs = counterexample_reward_probs(N, gamma, alpha)?;
    build_counterexample(gamma, &REWARDS, &reward_probs, &P, &Q)
}

/// Discounted returns of `num_rollouts` episodes started in `s0`, each
/// truncated at `horizon` steps or on reaching a terminal state.
pub fn mc_returns<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &Policy,
    s0: usize,
    num_rollouts: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if num_rollouts == 0 {
        return domain("need at least one rollout");
    }
    policy.check_compatible(mdp)?;
    if s0 >= mdp.num_states() {
        return domain(format!("start state {s0} out of range"));
    }
    let gamma = mdp.gamma();
    Ok((0..num_rollouts)
        .map(|_| {
            let (mut s, mut ret, mut discount) = (s0, 0.0, 1.0);
            for _ in 0..horizon {
                if mdp.is_terminal(s) {
                    break;
                }
                let a = policy.sample(s, rng);
                let (r, next) = mdp.sample_transition(s, a, rng);
                ret += discount * r;
                discount *= gamma;
                s = next;
            }
            ret
        })
        .collect())
}

/// Mean followed by central moments `2..=max_order` of the Monte Carlo return sample.
pub fn mc_rollout_moments<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &Policy,
    s0: usize,
    num_rollouts: usize,
    max_order: u32,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let returns = mc_returns(mdp, policy, s0, num_rollouts, horizon, rng)?;
    let sample = DiscreteMeasure::uniform(returns)?;
    (1..=max_order).map(|n| sample.moment(n, true)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Mean return from `s_0` of the 2-chain under always-forward:
    /// `Q = 0.9 + 0.1 (-1 + 0.9 Q)`.
    const CHAIN2_MEAN: f64 = 0.8 / 0.91;

    #[test]
    fn chain_structure() {
        assert!(build_chain(1).is_err());
        assert!(build_chain(0).is_err());
        let c = build_chain(2).unwrap();
        let row = c.branches(0, FORWARD);
        assert_eq!(row.len(), 2);
        assert_eq!((row[0].next, row[0].prob), (1, 0.9));
        assert_eq!(row[0].reward, DiscreteMeasure::dirac(1.0).unwrap());
        assert_eq!((row[1].next, row[1].prob), (0, 0.1));
        assert_eq!(row[1].reward, DiscreteMeasure::dirac(-1.0).unwrap());
        assert!(c.is_terminal(1));
        assert_eq!(c.gamma(), 0.9);
        for k in 2..10 {
            let c = build_chain(k).unwrap();
            for s in 0..k {
                for a in 0..2 {
                    let total: f64 = c.branches(s, a).iter().map(|b| b.prob).sum();
                    assert!((total - 1.0).abs() <= 1e-12);
                }
            }
            let mid = c.branches(0, BACKWARD);
            assert_eq!((mid[0].prob, mid[1].prob), (0.1, 0.9));
        }
        let c5 = build_chain(5).unwrap();
        assert_eq!(c5.branches(1, FORWARD)[0].reward.atoms(), &[0.0]);
        assert_eq!(c5.branches(3, FORWARD)[0].reward.atoms(), &[1.0]);
    }

    #[test]
    fn chain2_fixed_point() {
        assert!((CHAIN2_MEAN - 0.879_121).abs() < 1e-6);
        let q = CHAIN2_MEAN;
        assert!((q - (0.9 * 1.0 + 0.1 * (-1.0 + 0.9 * q))).abs() < 1e-15);
    }

    #[test]
    fn invalid_mdps() {
        let d0 = DiscreteMeasure::dirac(0.0).unwrap();
        let b = |next, prob| Branch {
            next,
            prob,
            reward: d0.clone(),
        };
        assert!(TabularMdp::new(1, 1, 1.0, &[], vec![vec![b(0, 1.0)]]).is_err());
        assert!(TabularMdp::new(1, 1, 0.5, &[], vec![vec![b(0, 0.5)]]).is_err());
        assert!(TabularMdp::new(1, 1, 0.5, &[], vec![vec![b(3, 1.0)]]).is_err());
        assert!(TabularMdp::new(1, 1, 0.5, &[], vec![]).is_err());
        let bad_terminal = Branch {
            next: 0,
            prob: 1.0,
            reward: DiscreteMeasure::dirac(1.0).unwrap(),
        };
        assert!(TabularMdp::new(1, 1, 0.5, &[0], vec![vec![bad_terminal]]).is_err());
        assert!(TabularMdp::new(1, 1, 0.5, &[0], vec![vec![]]).is_ok());
    }

    #[test]
    fn sampling_is_reproducible() {
        let c = build_chain(3).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200)
                .map(|_| c.sample_transition(1, FORWARD, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(c.sample_transition(2, FORWARD, &mut rng), (0.0, 2));
    }

    #[test]
    fn forward_success_frequency() {
        let c = build_chain(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000;
        let right = (0..n)
            .filter(|_| c.sample_transition(0, FORWARD, &mut rng).1 == 1)
            .count();
        let freq = right as f64 / n as f64;
        assert!((freq - 0.9).abs() < 0.01, "{freq}");
    }

    #[test]
    fn rollout_moments() {
        let c = build_chain(2).unwrap();
        let pi = Policy::constant(FORWARD, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = mc_rollout_moments(&c, &pi, 0, 100_000, 4, DEFAULT_HORIZON, &mut rng).unwrap();
        assert_eq!(m.len(), 4);
        assert!((m[0] - CHAIN2_MEAN).abs() < 0.01, "{}", m[0]);
        assert!(mc_rollout_moments(&c, &pi, 0, 0, 4, DEFAULT_HORIZON, &mut rng).is_err());

        // one rewarded step into a terminal state
        let one = TabularMdp::new(
            2,
            1,
            0.9,
            &[1],
            vec![
                vec![Branch {
                    next: 1,
                    prob: 1.0,
                    reward: DiscreteMeasure::dirac(1.0).unwrap(),
                }],
                vec![],
            ],
        )
        .unwrap();
        let pi1 = Policy::constant(0, 2, 1).unwrap();
        let m = mc_rollout_moments(&one, &pi1, 0, 100, 4, DEFAULT_HORIZON, &mut rng).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-12);
        assert!(m[1..].iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn chain_returns_are_bounded() {
        let c = build_chain(6).unwrap();
        let pi = Policy::constant(FORWARD, 6, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rets = mc_returns(&c, &pi, 0, 5000, DEFAULT_HORIZON, &mut rng).unwrap();
        assert!(rets.iter().all(|r| r.is_finite() && (-10.0..=2.0).contains(r)));
    }

    #[test]
    fn standard_error_shrinks_with_more_rollouts() {
        let c = build_chain(5).unwrap();
        let pi = Policy::constant(FORWARD, 5, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut prev = f64::INFINITY;
        for n in [1000usize, 2000, 4000, 8000, 16000] {
            let rets = mc_returns(&c, &pi, 0, n, DEFAULT_HORIZON, &mut rng).unwrap();
            let s = DiscreteMeasure::uniform(rets).unwrap();
            let se = (s.moment(2, true).unwrap() / n as f64).sqrt();
            assert!(se < prev);
            prev = se;
        }
    }

    #[test]
    fn counterexample_probabilities() {
        for gamma in [0.8, 0.9] {
            for alpha in [0.25, 0.5, 0.75, 1.0] {
                let p = counterexample_reward_probs(5, gamma, alpha).unwrap();
                let sq: f64 = p.iter().map(|x| x * x).sum();
                assert!((sq - gamma.powf(2.0 * alpha)).abs() < 1e-12);
                assert!(p[0] > 0.0 && p[0] < 0.25);
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
        }
        assert!(counterexample_reward_probs(5, 0.3, 1.0).is_err());
    }

    #[test]
    fn counterexample_tables() {
        let (mdp, mu, nu) = standard_counterexample(0.8, 1.0).unwrap();
        assert_eq!(mdp.num_states(), 2);
        assert!(mdp.terminal_states().is_empty());
        assert_eq!(mu.get(0, 0), mu.get(1, 0));
        assert_eq!(nu.get(1, 0).weights(), &counterexample::Q);
        assert!(build_counterexample(0.8, &[0.0, 1.0], &[0.5, 0.5], &[1.0], &[0.0, 1.0]).is_err());
        assert!(build_counterexample(0.8, &[0.0, 1.0], &[0.5, 0.6], &[1.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = build_chain(4).unwrap();
        let json = c.to_json().unwrap();
        assert!(json.contains("\"gamma\": 0.9"));
        assert_eq!(TabularMdp::from_json(&json).unwrap(), c);
        assert!(TabularMdp::from_json("{\"num_states\": 1}").is_err());
    }

    #[test]
    fn policies() {
        assert!(Policy::new(vec![vec![0.5, 0.4]]).is_err());
        assert!(Policy::deterministic(&[2], 2).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = Policy::random(4, 3, &mut rng).unwrap();
        assert_eq!(p.num_actions(), 3);
        let u = Policy::uniform(3, 2).unwrap();
        assert!(u.check_compatible(&build_chain(4).unwrap()).is_err());
        assert!(u.check_compatible(&build_chain(3).unwrap()).is_ok());
    }
}
