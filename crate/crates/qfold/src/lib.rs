//! Reconstruction of protein dimer quaternary structure from inter-chain
//! contact restraints.
//!
//! The receptor chain stays fixed; a rigid-body pose of the ligand chain is
//! searched either by a deep Q-learning agent acting in 1 Å / 1° steps or by
//! classical optimizers (gradient descent, Monte Carlo, simulated annealing)
//! over the same restraint energy. Reconstructed complexes are scored with
//! standard docking metrics (TM-score, RMSD, fnat, interface and ligand RMSD).

pub mod baselines;
pub mod dqn;
pub mod environment;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod pdb;
pub mod restraints;
pub(crate) mod seeding;
