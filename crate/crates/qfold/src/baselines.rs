//! Classical optimizers over the exact energy the agent trains on: gradient
//! descent in the 6-parameter pose space with a backtracking line search,
//! Metropolis Monte Carlo at fixed temperature, and simulated annealing with
//! geometric cooling (standing in for a CNS-style protocol). Each run draws
//! several independent starts and reports the best pose across restarts.

use crate::environment::{sample_start_pose, InitialSampler};
use crate::geometry::Pose;
use crate::pdb::Structure;
use crate::restraints::{ContactSet, EnergyOptions, PreparedEnergy, RestraintError};
use crate::seeding::derive_seed;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("restraint error: {0}")]
    Restraint(#[from] RestraintError),
    #[error("bad optimizer config: {0}")]
    BadConfig(String),
    #[error("energy became non-finite in restart {restart} at iteration {iteration}")]
    NonFiniteEnergy { restart: usize, iteration: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerVariant {
    Gd,
    Mc,
    Sa,
}

impl OptimizerVariant {
    pub fn label(&self) -> &'static str {
        match self {
            OptimizerVariant::Gd => "GD",
            OptimizerVariant::Mc => "MC",
            OptimizerVariant::Sa => "SA (CNS-style)",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OptimizerConfig {
    pub variant: OptimizerVariant,
    pub max_iterations: usize,
    pub restarts: usize,
    /// GD knobs.
    pub learning_rate: f64,
    pub backtracking_factor: f64,
    pub gradient_norm_stop: f64,
    /// MC temperature; SA anneals from `sa_t_start` down to `sa_t_end`.
    pub mc_temperature: f64,
    pub translation_sigma: f64,
    pub rotation_sigma_deg: f64,
    pub sa_t_start: f64,
    pub sa_t_end: f64,
    pub sampler: InitialSampler,
    pub energy: EnergyOptions,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            variant: OptimizerVariant::Gd,
            max_iterations: 20_000,
            restarts: 8,
            learning_rate: 0.05,
            backtracking_factor: 0.5,
            gradient_norm_stop: 1e-6,
            mc_temperature: 1.0,
            translation_sigma: 0.5,
            rotation_sigma_deg: 2.0,
            sa_t_start: 10.0,
            sa_t_end: 1e-3,
            sampler: InitialSampler::RandomShell,
            energy: EnergyOptions::default(),
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<(), BaselineError> {
        let positive: [(&str, f64); 7] = [
            ("learning_rate", self.learning_rate),
            ("gradient_norm_stop", self.gradient_norm_stop),
            ("mc_temperature", self.mc_temperature),
            ("translation_sigma", self.translation_sigma),
            ("rotation_sigma_deg", self.rotation_sigma_deg),
            ("sa_t_start", self.sa_t_start),
            ("sa_t_end", self.sa_t_end),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(BaselineError::BadConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0 < self.backtracking_factor && self.backtracking_factor < 1.0) {
            return Err(BaselineError::BadConfig("backtracking_factor must be in (0, 1)".into()));
        }
        if self.sa_t_end >= self.sa_t_start {
            return Err(BaselineError::BadConfig(format!(
                "sa_t_end {} must be below sa_t_start {}",
                self.sa_t_end, self.sa_t_start
            )));
        }
        if self.max_iterations == 0 || self.restarts == 0 {
            return Err(BaselineError::BadConfig("need at least 1 iteration and 1 restart".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    /// Energy of the current (not best) state after the iteration.
    pub energy: f64,
    pub accepted: bool,
}

/// Why a restart's iteration loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Completion {
    /// GD only: gradient norm fell below the stop threshold.
    GradientConverged,
    IterationCap,
    /// GD only: the line search found no descent direction (an energy kink
    /// or a non-stationary local minimum of the subgradient path).
    Stalled,
}

#[derive(Debug, Clone)]
pub struct RestartResult {
    pub restart: usize,
    /// Best pose of the restart and its energy.
    pub pose: Pose,
    pub energy: f64,
    pub initial_energy: f64,
    /// Energy of the walker's last state (equals `energy` for GD).
    pub final_energy: f64,
    pub iterations: usize,
    pub completion: Completion,
    /// Gradient norm at the final GD pose; None for MC/SA.
    pub gradient_norm: Option<f64>,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    /// Index into `restarts` of the winner (lowest energy, earliest wins ties).
    pub best_index: usize,
    pub restarts: Vec<RestartResult>,
}

impl OptimizeOutcome {
    pub fn best(&self) -> &RestartResult {
        &self.restarts[self.best_index]
    }
}

/// Standard Metropolis criterion: downhill always accepted, uphill with
/// probability exp(-dE/T).
pub fn metropolis_accept<R: Rng>(delta_e: f64, temperature: f64, rng: &mut R) -> bool {
    if delta_e <= 0.0 {
        return true;
    }
    rng.random::<f64>() < (-delta_e / temperature).exp()
}

const SALT_RESTART_BASE: u64 = 0x8000;

fn restart_seed(seed: u64, restart: usize) -> u64 {
    derive_seed(seed, SALT_RESTART_BASE + restart as u64)
}

pub fn optimize(
    config: &OptimizerConfig,
    receptor: &Structure,
    ligand: &Structure,
    contacts: &ContactSet,
    seed: u64,
) -> Result<OptimizeOutcome, BaselineError> {
    config.validate()?;
    let prepared = PreparedEnergy::new(receptor, ligand, contacts, config.energy)?;
    let mut restarts = Vec::with_capacity(config.restarts);
    for r in 0..config.restarts {
        let start = sample_start_pose(config.sampler, receptor, ligand, restart_seed(seed, r));
        let result = match config.variant {
            OptimizerVariant::Gd => run_gd(config, &prepared, start, r)?,
            OptimizerVariant::Mc | OptimizerVariant::Sa => {
                run_metropolis(config, &prepared, start, r, restart_seed(seed, r) ^ 1)?
            }
        };
        restarts.push(result);
    }
    let mut best_index = 0;
    for (i, r) in restarts.iter().enumerate() {
        if r.energy < restarts[best_index].energy {
            best_index = i;
        }
    }
    Ok(OptimizeOutcome { best_index, restarts })
}

fn check_finite(e: f64, restart: usize, iteration: usize) -> Result<f64, BaselineError> {
    if e.is_finite() {
        Ok(e)
    } else {
        Err(BaselineError::NonFiniteEnergy { restart, iteration })
    }
}

fn run_gd(
    config: &OptimizerConfig,
    prepared: &PreparedEnergy,
    start: Pose,
    restart: usize,
) -> Result<RestartResult, BaselineError> {
    let center = start.rotation_center;
    let mut params = start.params();
    let mut energy = check_finite(prepared.energy(&Pose::from_params(params, center)), restart, 0)?;
    let initial_energy = energy;
    let mut trace = vec![TracePoint { iteration: 0, energy, accepted: true }];
    let mut completion = Completion::IterationCap;
    let mut gradient_norm = None;
    let mut iterations = 0;

    for iter in 1..=config.max_iterations {
        iterations = iter;
        let g = prepared.gradient(params, center);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        gradient_norm = Some(norm);
        if norm <= config.gradient_norm_stop {
            completion = Completion::GradientConverged;
            iterations = iter - 1;
            break;
        }
        let mut step = config.learning_rate;
        let mut moved = false;
        while step > 1e-12 {
            let mut candidate = params;
            for (p, gv) in candidate.iter_mut().zip(&g) {
                *p -= step * gv;
            }
            let e = check_finite(
                prepared.energy(&Pose::from_params(candidate, center)),
                restart,
                iter,
            )?;
            if e < energy {
                params = candidate;
                energy = e;
                moved = true;
                break;
            }
            step *= config.backtracking_factor;
        }
        trace.push(TracePoint { iteration: iter, energy, accepted: moved });
        if !moved {
            completion = Completion::Stalled;
            break;
        }
    }

    let pose = Pose::from_params(params, center);
    Ok(RestartResult {
        restart,
        pose,
        energy,
        initial_energy,
        final_energy: energy,
        iterations,
        completion,
        gradient_norm,
        trace,
    })
}

fn run_metropolis(
    config: &OptimizerConfig,
    prepared: &PreparedEnergy,
    start: Pose,
    restart: usize,
    walk_seed: u64,
) -> Result<RestartResult, BaselineError> {
    let center = start.rotation_center;
    let mut rng = ChaCha8Rng::seed_from_u64(walk_seed);
    let t_step = Normal::new(0.0, config.translation_sigma).expect("positive sigma");
    let r_step =
        Normal::new(0.0, config.rotation_sigma_deg.to_radians()).expect("positive sigma");

    let mut params = start.params();
    let mut energy = check_finite(prepared.energy(&Pose::from_params(params, center)), restart, 0)?;
    let initial_energy = energy;
    let mut best_params = params;
    let mut best_energy = energy;
    let mut trace = vec![TracePoint { iteration: 0, energy, accepted: true }];

    let annealed = config.variant == OptimizerVariant::Sa;
    // Geometric schedule hitting t_end exactly on the last iteration.
    let cool = if annealed && config.max_iterations > 1 {
        (config.sa_t_end / config.sa_t_start).powf(1.0 / (config.max_iterations - 1) as f64)
    } else {
        1.0
    };
    let mut temperature = if annealed { config.sa_t_start } else { config.mc_temperature };

    for iter in 1..=config.max_iterations {
        let mut candidate = params;
        for p in candidate.iter_mut().take(3) {
            *p += t_step.sample(&mut rng);
        }
        for p in candidate.iter_mut().skip(3) {
            *p += r_step.sample(&mut rng);
        }
        let e = check_finite(
            prepared.energy(&Pose::from_params(candidate, center)),
            restart,
            iter,
        )?;
        let accepted = metropolis_accept(e - energy, temperature, &mut rng);
        if accepted {
            params = candidate;
            energy = e;
            if e < best_energy {
                best_energy = e;
                best_params = candidate;
            }
        }
        trace.push(TracePoint { iteration: iter, energy, accepted });
        if annealed {
            temperature = (temperature * cool).max(config.sa_t_end);
        }
    }

    Ok(RestartResult {
        restart,
        pose: Pose::from_params(best_params, center),
        energy: best_energy,
        initial_energy,
        final_energy: energy,
        iterations: config.max_iterations,
        completion: Completion::IterationCap,
        gradient_norm: None,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::pdb::{Atom, Residue};
    use crate::restraints::{contact_energy, extract_true_contacts, ContactRestraint};

    fn point_chain(id: char, pts: &[Vec3]) -> Structure {
        Structure {
            chain_id: id,
            residues: pts
                .iter()
                .enumerate()
                .map(|(i, p)| Residue {
                    ordinal: i + 1,
                    name: "GLY".into(),
                    atoms: vec![Atom { name: "CA".into(), element: "C".into(), coord: *p }],
                })
                .collect(),
        }
    }

    fn contact_rich_pair() -> (Structure, Structure, ContactSet) {
        let receptor = point_chain(
            'A',
            &[
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(3.0, 0.0, 0.5),
                Vec3::new(0.0, 3.0, -0.5),
                Vec3::new(3.0, 3.0, 0.0),
            ],
        );
        let ligand = point_chain(
            'B',
            &[
                Vec3::new(0.5, 0.5, 3.5),
                Vec3::new(2.5, 0.5, 4.0),
                Vec3::new(1.5, 2.5, 3.8),
            ],
        );
        let contacts = extract_true_contacts(&receptor, &ligand, 6.0).unwrap();
        assert!(contacts.len() >= 5);
        (receptor, ligand, contacts)
    }

    #[test]
    fn metropolis_always_takes_downhill_and_freezes_at_zero_temperature() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert!(metropolis_accept(-1.0, 0.7, &mut rng));
        }
        for _ in 0..100 {
            assert!(!metropolis_accept(1.0, 1e-300, &mut rng));
        }
    }

    #[test]
    fn metropolis_accepts_ln2_barrier_about_half_the_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = 0.8;
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| metropolis_accept(t * std::f64::consts::LN_2, t, &mut rng))
            .count();
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((hits as f64 - n as f64 * 0.5).abs() <= 5.0 * sigma, "{hits}/{n}");
    }

    #[test]
    fn gd_closes_a_single_restraint_from_twenty_angstroms() {
        let receptor = point_chain('A', &[Vec3::ZERO]);
        let ligand = point_chain('B', &[Vec3::new(20.0, 0.0, 0.0)]);
        let only = ContactRestraint {
            ligand_res: 1,
            receptor_res: 1,
            lb: 0.0,
            ub: 6.0,
            sd: 0.1,
            probability: None,
        };
        let contacts = ContactSet::new(vec![only], 1, 1).unwrap();
        let config = OptimizerConfig {
            sampler: InitialSampler::Identity,
            ..OptimizerConfig::default()
        };
        let out = optimize(&config, &receptor, &ligand, &contacts, 0).unwrap();
        let best = out.best();
        assert!((best.initial_energy - (1.0 + (20.0 - 6.1) / 0.1)).abs() <= 1e-9);
        assert_eq!(best.energy, 0.0);
        let posed = best.pose.apply(Vec3::new(20.0, 0.0, 0.0));
        assert!(posed.dist(Vec3::ZERO) <= 6.0);
    }

    #[test]
    fn mc_near_zero_temperature_never_leaves_the_zero_energy_set() {
        let (receptor, ligand, contacts) = contact_rich_pair();
        let config = OptimizerConfig {
            variant: OptimizerVariant::Mc,
            mc_temperature: 1e-12,
            max_iterations: 500,
            restarts: 2,
            sampler: InitialSampler::Identity,
            ..OptimizerConfig::default()
        };
        let out = optimize(&config, &receptor, &ligand, &contacts, 7).unwrap();
        for restart in &out.restarts {
            assert_eq!(restart.initial_energy, 0.0);
            assert!(restart.trace.iter().all(|p| p.energy == 0.0));
            assert_eq!(restart.final_energy, 0.0);
        }
    }

    #[test]
    fn sa_descends_on_every_restart_of_a_contact_fixture() {
        let (receptor, ligand, contacts) = contact_rich_pair();
        let config = OptimizerConfig {
            variant: OptimizerVariant::Sa,
            max_iterations: 4000,
            ..OptimizerConfig::default()
        };
        let out = optimize(&config, &receptor, &ligand, &contacts, 11).unwrap();
        assert_eq!(out.restarts.len(), 8);
        for restart in &out.restarts {
            assert!(
                restart.final_energy < restart.initial_energy,
                "restart {}: {} !< {}",
                restart.restart,
                restart.final_energy,
                restart.initial_energy
            );
        }
    }

    #[test]
    fn best_so_far_is_non_increasing_for_every_variant() {
        let (receptor, ligand, contacts) = contact_rich_pair();
        for variant in [OptimizerVariant::Gd, OptimizerVariant::Mc, OptimizerVariant::Sa] {
            let config = OptimizerConfig {
                variant,
                max_iterations: 1500,
                restarts: 3,
                ..OptimizerConfig::default()
            };
            let out = optimize(&config, &receptor, &ligand, &contacts, 5).unwrap();
            for restart in &out.restarts {
                let mut running = f64::INFINITY;
                for p in &restart.trace {
                    let next = running.min(p.energy);
                    assert!(next <= running);
                    running = next;
                }
                assert!(restart.energy <= restart.initial_energy);
            }
        }
    }

    #[test]
    fn identical_seeds_reproduce_traces_exactly() {
        let (receptor, ligand, contacts) = contact_rich_pair();
        for variant in [OptimizerVariant::Gd, OptimizerVariant::Mc, OptimizerVariant::Sa] {
            let config = OptimizerConfig {
                variant,
                max_iterations: 300,
                restarts: 2,
                ..OptimizerConfig::default()
            };
            let a = optimize(&config, &receptor, &ligand, &contacts, 9).unwrap();
            let b = optimize(&config, &receptor, &ligand, &contacts, 9).unwrap();
            for (ra, rb) in a.restarts.iter().zip(&b.restarts) {
                assert_eq!(ra.trace, rb.trace);
            }
            let c = optimize(&config, &receptor, &ligand, &contacts, 10).unwrap();
            assert_ne!(a.restarts[0].trace, c.restarts[0].trace, "{variant:?}");
        }
    }

    #[test]
    fn gd_convergence_claim_implies_small_gradient() {
        let (receptor, ligand, contacts) = contact_rich_pair();
        let config = OptimizerConfig { restarts: 4, ..OptimizerConfig::default() };
        let out = optimize(&config, &receptor, &ligand, &contacts, 2).unwrap();
        for restart in &out.restarts {
            if restart.completion == Completion::GradientConverged {
                assert!(restart.gradient_norm.unwrap() <= 1e-5);
            }
        }
    }

    #[test]
    fn reported_energies_match_the_shared_scoring_path() {
        let (receptor, ligand, contacts) = contact_rich_pair();
        for variant in [OptimizerVariant::Gd, OptimizerVariant::Mc] {
            let config = OptimizerConfig {
                variant,
                max_iterations: 200,
                restarts: 3,
                ..OptimizerConfig::default()
            };
            let out = optimize(&config, &receptor, &ligand, &contacts, 4).unwrap();
            for restart in &out.restarts {
                let recomputed =
                    contact_energy(&restart.pose, &receptor, &ligand, &contacts, config.energy.kind)
                        .unwrap();
                assert!((recomputed - restart.energy).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn empty_contacts_are_rejected() {
        let (receptor, ligand, _) = contact_rich_pair();
        let empty = ContactSet::new(Vec::new(), ligand.len(), receptor.len()).unwrap();
        let out = optimize(&OptimizerConfig::default(), &receptor, &ligand, &empty, 0);
        assert!(matches!(out, Err(BaselineError::Restraint(_))));
    }

    #[test]
    fn config_validation_catches_nonsense() {
        let mut bad = OptimizerConfig::default();
        bad.sa_t_end = 20.0;
        assert!(bad.validate().is_err());
        let mut bad = OptimizerConfig::default();
        bad.translation_sigma = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = OptimizerConfig::default();
        bad.backtracking_factor = 1.0;
        assert!(bad.validate().is_err());
        assert!(OptimizerConfig::default().validate().is_ok());
    }
}
