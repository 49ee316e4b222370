//! Return tables and the distributional Bellman operator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::mdp::{Policy, TabularMdp};
use crate::measures::{DiscreteMeasure, ParticleSet};

/// One value per `(state, action)` pair, stored row-major by state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table<T> {
    num_states: usize,
    num_actions: usize,
    entries: Vec<T>,
}

/// A return distribution for every state-action pair.
pub type ReturnTable = Table<DiscreteMeasure>;
/// Learnable particles for every state-action pair.
pub type ParticleTable = Table<ParticleSet>;

impl<T> Table<T> {
    pub fn from_entries(num_states: usize, num_actions: usize, entries: Vec<T>) -> Result<Self> {
        if num_states * num_actions != entries.len() || entries.is_empty() {
            return domain(format!(
                "{num_states} x {num_actions} table cannot hold {} entries",
                entries.len()
            ));
        }
        Ok(Table {
            num_states,
            num_actions,
            entries,
        })
    }

    pub fn from_fn(
        num_states: usize,
        num_actions: usize,
        mut f: impl FnMut(usize, usize) -> Result<T>,
    ) -> Result<Self> {
        let mut entries = Vec::with_capacity(num_states * num_actions);
        for s in 0..num_states {
            for a in 0..num_actions {
                entries.push(f(s, a)?);
            }
        }
        Self::from_entries(num_states, num_actions, entries)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_states, self.num_actions)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, s: usize, a: usize) -> &T {
        &self.entries[s * self.num_actions + a]
    }

    pub fn get_mut(&mut self, s: usize, a: usize) -> &mut T {
        &mut self.entries[s * self.num_actions + a]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Table<U> {
        Table {
            num_states: self.num_states,
            num_actions: self.num_actions,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    fn check_mdp(&self, mdp: &TabularMdp) -> Result<()> {
        if self.shape() != (mdp.num_states(), mdp.num_actions()) {
            return domain(format!(
                "table shape {:?} does not match MDP {}x{}",
                self.shape(),
                mdp.num_states(),
                mdp.num_actions()
            ));
        }
        Ok(())
    }
}

impl ParticleTable {
    /// Views each particle set as an equal-weight measure.
    pub fn to_return_table(&self) -> ReturnTable {
        self.map(ParticleSet::to_measure)
    }
}

/// Anything with an expected value; used for greedy action selection.
pub trait HasMean {
    fn mean(&self) -> f64;
}

impl HasMean for DiscreteMeasure {
    fn mean(&self) -> f64 {
        DiscreteMeasure::mean(self)
    }
}

impl HasMean for ParticleSet {
    fn mean(&self) -> f64 {
        ParticleSet::mean(self)
    }
}

/// `(T^pi mu)(s, a)`: the mixture over successor `s'`, reward `r` and next
/// action `a'` of `mu(s', a')` pushed through `z -> r + gamma z`, weighted by
/// `P(s' | s, a) R(r | s, a, s') pi(a' | s')`.
///
/// A terminal successor contributes `delta(r)`; terminal entries map to `delta(0)`.
/// Atoms are never merged, so support sizes multiply with each application.
pub fn apply_bellman_exact(mdp: &TabularMdp, policy: &Policy, mu: &ReturnTable) -> Result<ReturnTable> {
    mu.check_mdp(mdp)?;
    policy.check_compatible(mdp)?;
    let gamma = mdp.gamma();
    let na = mdp.num_actions();
    let entries = (0..mdp.num_states() * na)
        .into_par_iter()
        .map(|idx| {
            let (s, a) = (idx / na, idx % na);
            if mdp.is_terminal(s) {
                return DiscreteMeasure::dirac(0.0);
            }
            let mut parts = Vec::new();
            let mut probs = Vec::new();
            for branch in mdp.branches(s, a) {
                for (r, pr) in branch.reward.iter() {
                    let w = branch.prob * pr;
                    if mdp.is_terminal(branch.next) {
                        parts.push(DiscreteMeasure::dirac(r)?);
                        probs.push(w);
                        continue;
                    }
                    for (a_next, &pa) in policy.action_probs(branch.next).iter().enumerate() {
                        if pa > 0.0 {
                            parts.push(mu.get(branch.next, a_next).pushforward_affine(r, gamma));
                            probs.push(w * pa);
                        }
                    }
                }
            }
            DiscreteMeasure::mixture(&parts, &probs)
        })
        .collect::<Result<Vec<_>>>()?;
    Table::from_entries(mdp.num_states(), na, entries)
}

/// Expected returns `Q(s, a)` under `policy`, by iterating the scalar
/// Bellman equation until successive sweeps differ by at most `tol`.
pub fn mean_values(mdp: &TabularMdp, policy: &Policy, tol: f64, max_sweeps: usize) -> Result<Table<f64>> {
    policy.check_compatible(mdp)?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let gamma = mdp.gamma();
    let mut q = vec![0.0; ns * na];
    for _ in 0..max_sweeps {
        let v: Vec<f64> = (0..ns)
            .map(|s| {
                policy
                    .action_probs(s)
                    .iter()
                    .enumerate()
                    .map(|(a, p)| p * q[s * na + a])
                    .sum()
            })
            .collect();
        let mut delta: f64 = 0.0;
        for s in 0..ns {
            for a in 0..na {
                let new = if mdp.is_terminal(s) {
                    0.0
                } else {
                    mdp.branches(s, a)
                        .iter()
                        .map(|b| {
                            let cont = if mdp.is_terminal(b.next) {
                                0.0
                            } else {
                                gamma * v[b.next]
                            };
                            b.prob * (b.reward.mean() + cont)
                        })
                        .sum()
                };
                delta = delta.max((new - q[s * na + a]).abs());
                q[s * na + a] = new;
            }
        }
        if delta <= tol {
            return Table::from_entries(ns, na, q);
        }
    }
    Err(crate::Error::Consistency(format!(
        "scalar evaluation did not settle within {max_sweeps} sweeps"
    )))
}

/// Bellman target particles `r + gamma * z_i` for the successor's particles, or
/// `N` copies of `r` when the successor is terminal.
pub fn empirical_target(reward: f64, next: &ParticleSet, gamma: f64, next_is_terminal: bool) -> ParticleSet {
    let values = if next_is_terminal {
        vec![reward; next.len()]
    } else {
        next.as_slice().iter().map(|z| reward + gamma * z).collect()
    };
    ParticleSet::new(values).expect("affine image of finite particles is finite")
}

/// The action whose entry has the largest mean; ties go to the lowest index.
pub fn greedy_action<T: HasMean>(table: &Table<T>, s: usize) -> usize {
    let mut best = 0;
    let mut best_mean = table.get(s, 0).mean();
    for a in 1..table.num_actions() {
        let m = table.get(s, a).mean();
        if m > best_mean {
            best = a;
            best_mean = m;
        }
    }
    best
}
