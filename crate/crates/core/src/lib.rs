//! Distributional reinforcement learning with maximum mean discrepancy.
//!
//! Return distributions are finite Dirac mixtures. The crate provides
//! kernels, MMD over weighted discrete measures, tabular MDPs, the exact
//! distributional Bellman operator, particle-based TD learners (MMD and
//! quantile regression), deterministic particle approximation by MMD descent
//! and greedy herding, and the experiment drivers built on top of them.

pub mod bellman;
pub mod error;
pub mod experiments;
pub mod herding;
pub mod kernels;
pub mod learners;
pub mod mdp;
pub mod measures;
pub mod mmd;

pub use bellman::{apply_bellman_exact, empirical_target, greedy_action, ParticleTable, ReturnTable, Table};
pub use error::{Error, Result};
pub use kernels::Kernel;
pub use mdp::{build_chain, Policy, TabularMdp};
pub use measures::{DiscreteMeasure, ParticleSet};
pub use mmd::{mmd, mmd_b_grad, mmd_b_squared, mmd_squared, mmd_sup};

/// Seedable generator used everywhere randomness is needed.
pub type Rng = rand_chacha::ChaCha8Rng;
