//! The pose-search decision process.
//!
//! A state is the ligand pose plus what the agent sees: the inter-chain
//! CB distance map, clamped to 100 Å, scaled to [0, 1] and resampled to a
//! fixed D x D image. Actions nudge the pose by 1 Å along or 1° about a
//! principal axis; the reward for a step is the drop in state quality
//! (restraint energy, or complex RMSD when a native reference is supplied),
//! so episode rewards telescope to `quality(start) - quality(end)` exactly.

use crate::geometry::{bounding_radius, centroid, Axis, Mat3, Pose, RigidTransform, Vec3};
use crate::metrics::{complex_rmsd, Dimer, MetricsOptions};
use crate::pdb::Structure;
use crate::restraints::{ContactSet, EnergyOptions, PreparedEnergy, RestraintError};
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use thiserror::Error;

pub const DEFAULT_OBS_SIZE: usize = 64;
pub const MIN_OBS_SIZE: usize = 8;
pub const DEFAULT_MAX_STEPS: usize = 2000;
pub const DEFAULT_TRANSLATION_STEP: f64 = 1.0;
pub const DEFAULT_ROTATION_STEP_DEG: f64 = 1.0;
pub const DISTANCE_CLAMP: f64 = 100.0;
/// Gap added to the sum of bounding radii for the initial shell.
pub const SHELL_MARGIN: f64 = 10.0;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("restraint error: {0}")]
    Restraint(#[from] RestraintError),
    #[error("structure error: {0}")]
    Pdb(#[from] crate::pdb::PdbError),
    #[error("metrics error: {0}")]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error("bad environment config: {0}")]
    BadConfig(String),
    #[error("step called on a finished episode")]
    EpisodeDone,
    #[error("energy became non-finite")]
    NonFiniteEnergy,
    #[error("reward strategy needs a native reference complex")]
    MissingNative,
    #[error("no live episode; call reset first")]
    NoEpisode,
    #[error("action index {0} out of range ({1} actions)")]
    BadAction(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    Translate,
    Rotate,
}

/// One discrete pose move. `direction` is +1 or -1; step sizes live in the
/// environment config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpec {
    pub kind: ActionKind,
    pub axis: Axis,
    pub direction: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    /// Positive direction only: 3 translations + 3 rotations.
    Six,
    /// Forward and backward moves: the default action set.
    Twelve,
}

/// Fixed, documented ordering: translations along X, Y, Z then rotations
/// about X, Y, Z; within a pair the positive direction comes first. Index 0
/// is always "translate +1 along X".
pub fn action_set(mode: ActionMode) -> Vec<ActionSpec> {
    let mut out = Vec::new();
    for kind in [ActionKind::Translate, ActionKind::Rotate] {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            for direction in [1i8, -1] {
                if direction < 0 && mode == ActionMode::Six {
                    continue;
                }
                out.push(ActionSpec { kind, axis, direction });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardStrategy {
    /// reward = E(s) - E(s'): restraint energy decrease.
    ContactEnergy,
    /// reward = RMSD(s) - RMSD(s') against the native complex.
    RmsdToNative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialSampler {
    /// Uniform random orientation, centroid on a sphere of radius
    /// `r_receptor + r_ligand + SHELL_MARGIN` around the receptor centroid.
    RandomShell,
    /// Same shell radius along +X, input orientation kept. Deterministic.
    SeparatedAxis,
    /// Input coordinates unchanged.
    Identity,
}

#[derive(Debug, Clone, Copy)]
pub struct EnvConfig {
    pub action_mode: ActionMode,
    pub translation_step: f64,
    pub rotation_step_deg: f64,
    pub obs_size: usize,
    pub max_steps: usize,
    pub success_energy: f64,
    pub reward: RewardStrategy,
    pub sampler: InitialSampler,
    pub energy: EnergyOptions,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            action_mode: ActionMode::Twelve,
            translation_step: DEFAULT_TRANSLATION_STEP,
            rotation_step_deg: DEFAULT_ROTATION_STEP_DEG,
            obs_size: DEFAULT_OBS_SIZE,
            max_steps: DEFAULT_MAX_STEPS,
            success_energy: 0.0,
            reward: RewardStrategy::ContactEnergy,
            sampler: InitialSampler::RandomShell,
            energy: EnergyOptions::default(),
        }
    }
}

pub type Observation = Array2<f32>;

#[derive(Debug, Clone)]
pub struct EnvState {
    pub pose: Pose,
    pub observation: Arc<Observation>,
    /// Restraint energy of the posed complex; drives termination.
    pub energy: f64,
    /// What the reward telescopes over: energy, or RMSD to native.
    pub quality: f64,
    pub step_count: usize,
    pub done: bool,
}

/// Clamp to [0, 100] Å, scale to [0, 1], resample bilinearly (corner-aligned,
/// so an already D x D map passes through unchanged).
pub(crate) fn resample_bilinear(map: &Array2<f64>, d: usize) -> Array2<f64> {
    let (h, w) = map.dim();
    Array2::from_shape_fn((d, d), |(i, j)| {
        let sy = if d > 1 { i as f64 * (h - 1) as f64 / (d - 1) as f64 } else { 0.0 };
        let sx = if d > 1 { j as f64 * (w - 1) as f64 / (d - 1) as f64 } else { 0.0 };
        let y0 = sy.floor() as usize;
        let x0 = sx.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let x1 = (x0 + 1).min(w - 1);
        let fy = sy - y0 as f64;
        let fx = sx - x0 as f64;
        let top = map[(y0, x0)] * (1.0 - fx) + map[(y0, x1)] * fx;
        let bot = map[(y1, x0)] * (1.0 - fx) + map[(y1, x1)] * fx;
        top * (1.0 - fy) + bot * fy
    })
}

fn observation_from_points(
    pose: &Pose,
    lig_cb: &[Vec3],
    rec_cb: &[Vec3],
    d: usize,
) -> Observation {
    let map = Array2::from_shape_fn((lig_cb.len(), rec_cb.len()), |(i, j)| {
        let dist = pose.apply(lig_cb[i]).dist(rec_cb[j]);
        dist.clamp(0.0, DISTANCE_CLAMP) / DISTANCE_CLAMP
    });
    resample_bilinear(&map, d).mapv(|v| v as f32)
}

/// Ligand x receptor CB distance image for an arbitrary pose, without
/// constructing an environment.
pub fn encode_observation(
    pose: &Pose,
    receptor: &Structure,
    ligand: &Structure,
    d: usize,
) -> Result<Observation, EnvError> {
    if d < MIN_OBS_SIZE {
        return Err(EnvError::BadConfig(format!("observation size {d} < {MIN_OBS_SIZE}")));
    }
    let lig_cb = ligand.cb_coords().map_err(RestraintError::from)?;
    let rec_cb = receptor.cb_coords().map_err(RestraintError::from)?;
    Ok(observation_from_points(pose, &lig_cb, &rec_cb, d))
}

/// What the trainer needs back from an environment interaction.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub observation: Arc<Observation>,
    pub energy: f64,
    pub done: bool,
}

/// Minimal gym-style surface consumed by the Q-learning trainer.
pub trait TrainEnv {
    fn action_count(&self) -> usize;
    fn obs_size(&self) -> usize;
    fn reset(&mut self, seed: u64) -> Result<Snapshot, EnvError>;
    fn step(&mut self, action: usize) -> Result<(Snapshot, f64, bool), EnvError>;
    /// Pose of the live state, when the environment has one.
    fn current_pose(&self) -> Option<Pose> {
        None
    }
    /// Complex RMSD of the live state against a native reference, when known.
    fn current_native_rmsd(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct StartGeometry {
    pub rec_centroid: Vec3,
    pub lig_centroid: Vec3,
    pub shell_radius: f64,
}

impl StartGeometry {
    pub(crate) fn of(receptor: &Structure, ligand: &Structure) -> StartGeometry {
        let rec = receptor.heavy_coords();
        let lig = ligand.heavy_coords();
        StartGeometry {
            rec_centroid: centroid(&rec),
            lig_centroid: centroid(&lig),
            shell_radius: bounding_radius(&rec) + bounding_radius(&lig) + SHELL_MARGIN,
        }
    }
}

pub(crate) fn start_pose(geom: &StartGeometry, sampler: InitialSampler, seed: u64) -> Pose {
    match sampler {
        InitialSampler::Identity => Pose::identity(geom.lig_centroid),
        InitialSampler::SeparatedAxis => {
            let s = geom.rec_centroid + Vec3::new(geom.shell_radius, 0.0, 0.0);
            Pose {
                transform: RigidTransform {
                    rotation: Mat3::IDENTITY,
                    translation: s - geom.lig_centroid,
                },
                rotation_center: s,
            }
        }
        InitialSampler::RandomShell => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rotation = random_rotation(&mut rng);
            let z: f64 = rng.random_range(-1.0..=1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let r_xy = (1.0 - z * z).max(0.0).sqrt();
            let dir = Vec3::new(r_xy * phi.cos(), r_xy * phi.sin(), z);
            let s = geom.rec_centroid + dir * geom.shell_radius;
            Pose {
                transform: RigidTransform {
                    rotation,
                    translation: rotation.mul_vec(s - geom.lig_centroid),
                },
                rotation_center: s,
            }
        }
    }
}

/// Initial ligand pose for one trial: unchanged coordinates, a deterministic
/// +X separation, or a seeded random orientation with the ligand centroid on
/// the separation shell around the receptor.
pub fn sample_start_pose(
    sampler: InitialSampler,
    receptor: &Structure,
    ligand: &Structure,
    seed: u64,
) -> Pose {
    start_pose(&StartGeometry::of(receptor, ligand), sampler, seed)
}

pub struct DimerEnvironment {
    receptor: Structure,
    ligand: Structure,
    config: EnvConfig,
    actions: Vec<ActionSpec>,
    prepared: PreparedEnergy,
    native: Option<Dimer>,
    lig_cb: Vec<Vec3>,
    rec_cb: Vec<Vec3>,
    geom: StartGeometry,
    current: Option<EnvState>,
}

impl DimerEnvironment {
    pub fn new(
        receptor: Structure,
        ligand: Structure,
        contacts: &ContactSet,
        native: Option<Dimer>,
        config: EnvConfig,
    ) -> Result<DimerEnvironment, EnvError> {
        if config.obs_size < MIN_OBS_SIZE {
            return Err(EnvError::BadConfig(format!(
                "observation size {} < {MIN_OBS_SIZE}",
                config.obs_size
            )));
        }
        if config.max_steps == 0 {
            return Err(EnvError::BadConfig("max_steps must be positive".into()));
        }
        if config.reward == RewardStrategy::RmsdToNative && native.is_none() {
            return Err(EnvError::MissingNative);
        }
        let prepared = PreparedEnergy::new(&receptor, &ligand, contacts, config.energy)?;
        let lig_cb = ligand.cb_coords().map_err(RestraintError::from)?;
        let rec_cb = receptor.cb_coords().map_err(RestraintError::from)?;
        Ok(DimerEnvironment {
            actions: action_set(config.action_mode),
            prepared,
            native,
            geom: StartGeometry::of(&receptor, &ligand),
            lig_cb,
            rec_cb,
            receptor,
            ligand,
            config,
            current: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn actions(&self) -> &[ActionSpec] {
        &self.actions
    }

    pub fn shell_radius(&self) -> f64 {
        self.geom.shell_radius
    }

    pub fn energy_of(&self, pose: &Pose) -> f64 {
        self.prepared.energy(pose)
    }

    /// The ligand with `pose` applied, paired with the fixed receptor.
    pub fn posed_dimer(&self, pose: &Pose) -> Dimer {
        let mut ligand = self.ligand.clone();
        for r in &mut ligand.residues {
            for a in &mut r.atoms {
                a.coord = pose.apply(a.coord);
            }
        }
        Dimer::new(self.receptor.clone(), ligand)
    }

    fn quality_of(&self, pose: &Pose, energy: f64) -> Result<f64, EnvError> {
        match self.config.reward {
            RewardStrategy::ContactEnergy => Ok(energy),
            RewardStrategy::RmsdToNative => {
                let native = self.native.as_ref().ok_or(EnvError::MissingNative)?;
                Ok(complex_rmsd(&self.posed_dimer(pose), native, &MetricsOptions::default())?)
            }
        }
    }

    fn state_for(&self, pose: Pose, step_count: usize) -> Result<EnvState, EnvError> {
        let energy = self.prepared.energy(&pose);
        if !energy.is_finite() {
            return Err(EnvError::NonFiniteEnergy);
        }
        let quality = self.quality_of(&pose, energy)?;
        let observation = Arc::new(observation_from_points(
            &pose,
            &self.lig_cb,
            &self.rec_cb,
            self.config.obs_size,
        ));
        let done = energy <= self.config.success_energy || step_count >= self.config.max_steps;
        Ok(EnvState { pose, observation, energy, quality, step_count, done })
    }

    /// Start an episode. The pose placed by the sampler fixes the rotation
    /// center (the ligand centroid at episode start) for every later step.
    pub fn reset_state(&self, seed: u64) -> Result<EnvState, EnvError> {
        self.state_for(start_pose(&self.geom, self.config.sampler, seed), 0)
    }

    /// Advance one action from an explicit state. Pure in the state: the same
    /// state and action always produce the same successor.
    pub fn step_state(
        &self,
        state: &EnvState,
        action: &ActionSpec,
    ) -> Result<(EnvState, f64, bool), EnvError> {
        if state.done {
            return Err(EnvError::EpisodeDone);
        }
        let motion = match action.kind {
            ActionKind::Translate => RigidTransform::translation(
                action.axis.unit() * (action.direction as f64 * self.config.translation_step),
            ),
            ActionKind::Rotate => RigidTransform::rotation(
                action.axis,
                (action.direction as f64 * self.config.rotation_step_deg).to_radians(),
            ),
        };
        let pose = state.pose.then(&motion);
        let mut next = self.state_for(pose, state.step_count + 1)?;
        // Termination also fires when the step budget is exhausted.
        if next.step_count >= self.config.max_steps {
            next.done = true;
        }
        let reward = state.quality - next.quality;
        let done = next.done;
        Ok((next, reward, done))
    }

    pub fn current_state(&self) -> Option<&EnvState> {
        self.current.as_ref()
    }
}

fn random_rotation<R: Rng>(rng: &mut R) -> Mat3 {
    // Shoemake's uniform quaternion construction.
    let u1: f64 = rng.random_range(0.0..1.0);
    let u2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let u3: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    Mat3::from_quat([b * u3.cos(), a * u2.sin(), a * u2.cos(), b * u3.sin()])
}

impl TrainEnv for DimerEnvironment {
    fn action_count(&self) -> usize {
        self.actions.len()
    }

    fn obs_size(&self) -> usize {
        self.config.obs_size
    }

    fn reset(&mut self, seed: u64) -> Result<Snapshot, EnvError> {
        let state = self.reset_state(seed)?;
        let snap = Snapshot {
            observation: Arc::clone(&state.observation),
            energy: state.energy,
            done: state.done,
        };
        self.current = Some(state);
        Ok(snap)
    }

    fn step(&mut self, action: usize) -> Result<(Snapshot, f64, bool), EnvError> {
        let spec = *self
            .actions
            .get(action)
            .ok_or(EnvError::BadAction(action, self.actions.len()))?;
        let state = self.current.as_ref().ok_or(EnvError::NoEpisode)?;
        let (next, reward, done) = self.step_state(state, &spec)?;
        let snap = Snapshot {
            observation: Arc::clone(&next.observation),
            energy: next.energy,
            done,
        };
        self.current = Some(next);
        Ok((snap, reward, done))
    }

    fn current_pose(&self) -> Option<Pose> {
        self.current.as_ref().map(|s| s.pose)
    }

    fn current_native_rmsd(&self) -> Option<f64> {
        let native = self.native.as_ref()?;
        let state = self.current.as_ref()?;
        complex_rmsd(&self.posed_dimer(&state.pose), native, &MetricsOptions::default()).ok()
    }
}

/// 1-D alignment toy: a particle on integer positions -50..=50 with actions
/// +1/-1 and the same flat-bottom energy over |x|. Terminal inside |x| <= 6.
/// Observations are constant images encoding the position, so the Q-network
/// can be exercised end to end against a tabular oracle.
pub struct AlignmentToyEnv {
    pub obs_size: usize,
    pub max_steps: usize,
    position: i64,
    steps: usize,
    done: bool,
    has_episode: bool,
}

pub const TOY_SPAN: i64 = 50;
pub const TOY_WELL_UB: f64 = 6.0;
pub const TOY_WELL_SD: f64 = 1.0;

impl AlignmentToyEnv {
    pub fn new(obs_size: usize, max_steps: usize) -> AlignmentToyEnv {
        AlignmentToyEnv { obs_size, max_steps, position: 0, steps: 0, done: false, has_episode: false }
    }

    pub fn energy_at(position: i64) -> f64 {
        crate::restraints::flat_bottom_energy(position.abs() as f64, 0.0, TOY_WELL_UB, TOY_WELL_SD)
    }

    pub fn is_terminal(position: i64) -> bool {
        Self::energy_at(position) <= 0.0
    }

    pub fn observation_for(&self, position: i64) -> Observation {
        let v = (position + TOY_SPAN) as f32 / (2 * TOY_SPAN) as f32;
        Array2::from_elem((self.obs_size, self.obs_size), v)
    }

    pub fn position(&self) -> i64 {
        self.position
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            observation: Arc::new(self.observation_for(self.position)),
            energy: Self::energy_at(self.position),
            done: self.done,
        }
    }
}

impl TrainEnv for AlignmentToyEnv {
    fn action_count(&self) -> usize {
        2
    }

    fn obs_size(&self) -> usize {
        self.obs_size
    }

    fn reset(&mut self, seed: u64) -> Result<Snapshot, EnvError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            self.position = rng.random_range(-TOY_SPAN..=TOY_SPAN);
            if !Self::is_terminal(self.position) {
                break;
            }
        }
        self.steps = 0;
        self.done = false;
        self.has_episode = true;
        Ok(self.snapshot())
    }

    fn step(&mut self, action: usize) -> Result<(Snapshot, f64, bool), EnvError> {
        if !self.has_episode {
            return Err(EnvError::NoEpisode);
        }
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        if action > 1 {
            return Err(EnvError::BadAction(action, 2));
        }
        let before = Self::energy_at(self.position);
        let delta = if action == 0 { 1 } else { -1 };
        self.position = (self.position + delta).clamp(-TOY_SPAN, TOY_SPAN);
        self.steps += 1;
        let after = Self::energy_at(self.position);
        self.done = Self::is_terminal(self.position) || self.steps >= self.max_steps;
        Ok((self.snapshot(), before - after, self.done))
    }
}
