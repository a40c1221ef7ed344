//! Effective run settings: built-in defaults, overlaid by an optional config
//! file, overlaid by CLI flags. Every consumer sees one resolved struct, and
//! the full set of effective values is echoed into run logs so any reported
//! number can be traced back to its knobs.

use crate::baselines::{OptimizerConfig, OptimizerVariant};
use crate::dqn::{EarlyStop, TrainConfig};
use crate::environment::{ActionMode, EnvConfig, InitialSampler, RewardStrategy};
use crate::harness::HarnessError;
use crate::restraints::{ContactSet, DistanceKind, DEFAULT_CB_UPPER_BOUND, DEFAULT_SD};
use std::io::{BufRead, BufReader, Read};

pub const CONFIG_HEADER: &str = "qfold-config v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Drl,
    Gd,
    Mc,
    Sa,
}

pub const ALL_METHODS: [Method; 4] = [Method::Drl, Method::Gd, Method::Mc, Method::Sa];

impl Method {
    /// Tag used in CSV rows and tables.
    pub fn label(&self) -> &'static str {
        match self {
            Method::Drl => "DRL",
            Method::Gd => "GD",
            Method::Mc => "MC",
            Method::Sa => "SA",
        }
    }

    pub fn token(&self) -> &'static str {
        match self {
            Method::Drl => "drl",
            Method::Gd => "gd",
            Method::Mc => "mc",
            Method::Sa => "sa",
        }
    }

    pub fn parse(s: &str) -> Result<Method, String> {
        match s.to_ascii_lowercase().as_str() {
            "drl" => Ok(Method::Drl),
            "gd" => Ok(Method::Gd),
            "mc" => Ok(Method::Mc),
            "sa" => Ok(Method::Sa),
            other => Err(format!("unknown method {other:?} (expected drl, gd, mc or sa)")),
        }
    }

    pub fn variant(&self) -> Option<OptimizerVariant> {
        match self {
            Method::Drl => None,
            Method::Gd => Some(OptimizerVariant::Gd),
            Method::Mc => Some(OptimizerVariant::Mc),
            Method::Sa => Some(OptimizerVariant::Sa),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Native monomer coordinates, true contacts from the native complex.
    Optimal,
    /// Native monomers, degraded or otherwise imperfect contacts.
    Suboptimal,
    /// Predicted monomers and predicted contacts, all user-supplied.
    Realistic,
}

impl Scenario {
    pub fn token(&self) -> &'static str {
        match self {
            Scenario::Optimal => "optimal",
            Scenario::Suboptimal => "suboptimal",
            Scenario::Realistic => "realistic",
        }
    }

    pub fn parse(s: &str) -> Result<Scenario, String> {
        match s.to_ascii_lowercase().as_str() {
            "optimal" => Ok(Scenario::Optimal),
            "suboptimal" => Ok(Scenario::Suboptimal),
            "realistic" => Ok(Scenario::Realistic),
            other => Err(format!(
                "unknown scenario {other:?} (expected optimal, suboptimal or realistic)"
            )),
        }
    }
}

fn action_mode_token(m: ActionMode) -> &'static str {
    match m {
        ActionMode::Six => "six",
        ActionMode::Twelve => "twelve",
    }
}

pub fn parse_action_mode(s: &str) -> Result<ActionMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "six" => Ok(ActionMode::Six),
        "twelve" => Ok(ActionMode::Twelve),
        other => Err(format!("unknown action mode {other:?} (expected six or twelve)")),
    }
}

fn sampler_token(s: InitialSampler) -> &'static str {
    match s {
        InitialSampler::RandomShell => "random-shell",
        InitialSampler::SeparatedAxis => "separated-axis",
        InitialSampler::Identity => "identity",
    }
}

fn parse_sampler(s: &str) -> Result<InitialSampler, String> {
    match s.to_ascii_lowercase().as_str() {
        "random-shell" => Ok(InitialSampler::RandomShell),
        "separated-axis" => Ok(InitialSampler::SeparatedAxis),
        "identity" => Ok(InitialSampler::Identity),
        other => Err(format!(
            "unknown sampler {other:?} (expected random-shell, separated-axis or identity)"
        )),
    }
}

fn reward_token(r: RewardStrategy) -> &'static str {
    match r {
        RewardStrategy::ContactEnergy => "contact-energy",
        RewardStrategy::RmsdToNative => "rmsd-to-native",
    }
}

fn parse_reward(s: &str) -> Result<RewardStrategy, String> {
    match s.to_ascii_lowercase().as_str() {
        "contact-energy" => Ok(RewardStrategy::ContactEnergy),
        "rmsd-to-native" => Ok(RewardStrategy::RmsdToNative),
        other => Err(format!(
            "unknown reward {other:?} (expected contact-energy or rmsd-to-native)"
        )),
    }
}

fn distance_token(d: DistanceKind) -> &'static str {
    match d {
        DistanceKind::Cb => "cb",
        DistanceKind::MinHeavy => "min-heavy",
    }
}

fn parse_distance(s: &str) -> Result<DistanceKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "cb" => Ok(DistanceKind::Cb),
        "min-heavy" => Ok(DistanceKind::MinHeavy),
        other => Err(format!("unknown distance kind {other:?} (expected cb or min-heavy)")),
    }
}

/// The resolved knob set for one invocation.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub seed: u64,
    /// Worker threads for benchmark jobs; None = one per available core.
    pub threads: Option<usize>,
    pub method: Method,
    pub scenario: Scenario,
    /// Heavy-atom cutoff defining a contact.
    pub contact_threshold: f64,
    /// Distance the gradient-descent objective is evaluated on. CB keeps the
    /// objective differentiable; its well is widened to `gd_contact_ub`
    /// because CB pairs sit further apart than the closest heavy atoms.
    pub gd_distance: DistanceKind,
    /// Upper bound of the well GD descends on; None picks 8 Å for CB and the
    /// contact threshold for min-heavy. Tightening it below the threshold
    /// leaves a slack band inside the scored well, so a pose that converges
    /// onto the tightened boundary still scores zero on the real objective.
    pub gd_contact_ub: Option<f64>,
    /// Greedy evaluation rollout after training; 0 = one episode cap.
    pub rollout_steps: usize,
    pub early_stop_successes: usize,
    pub early_stop_energy: f64,
    pub train: TrainConfig,
    pub env: EnvConfig,
    pub optimizer: OptimizerConfig,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            seed: 0,
            threads: None,
            method: Method::Drl,
            scenario: Scenario::Optimal,
            contact_threshold: 6.0,
            gd_distance: DistanceKind::Cb,
            gd_contact_ub: None,
            rollout_steps: 0,
            early_stop_successes: 0,
            early_stop_energy: 0.0,
            train: TrainConfig::default(),
            env: EnvConfig::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl RunSettings {
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value.parse().map_err(|_| format!("bad value {value:?} for {key}"))
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "threads" => self.threads = Some(num(key, value)?),
            "method" => self.method = Method::parse(value)?,
            "scenario" => self.scenario = Scenario::parse(value)?,
            "contact_threshold" => self.contact_threshold = num(key, value)?,
            "gd_distance" => self.gd_distance = parse_distance(value)?,
            "gd_contact_ub" => {
                self.gd_contact_ub =
                    if value == "auto" { None } else { Some(num(key, value)?) }
            }
            "rollout_steps" => self.rollout_steps = num(key, value)?,
            "early_stop_successes" => self.early_stop_successes = num(key, value)?,
            "early_stop_energy" => self.early_stop_energy = num(key, value)?,

            "gamma" => self.train.gamma = num(key, value)?,
            "batch_size" => self.train.batch_size = num(key, value)?,
            "target_sync_interval" => self.train.target_sync_interval = num(key, value)?,
            "total_steps" => self.train.total_steps = num(key, value)?,
            "epsilon_start" => self.train.epsilon_start = num(key, value)?,
            "epsilon_end" => self.train.epsilon_end = num(key, value)?,
            "epsilon_decay" => self.train.epsilon_decay = num(key, value)?,
            "epsilon_decay_per_step" => self.train.epsilon_decay_per_step = num(key, value)?,
            "learning_rate" => self.train.learning_rate = num(key, value)?,
            "replay_capacity" => self.train.replay_capacity = num(key, value)?,
            "hidden_size" => self.train.hidden_size = num(key, value)?,

            "action_mode" => self.env.action_mode = parse_action_mode(value)?,
            "translation_step" => self.env.translation_step = num(key, value)?,
            "rotation_step_deg" => self.env.rotation_step_deg = num(key, value)?,
            "obs_size" => self.env.obs_size = num(key, value)?,
            "max_episode_steps" => self.env.max_steps = num(key, value)?,
            "success_energy" => self.env.success_energy = num(key, value)?,
            "reward" => self.env.reward = parse_reward(value)?,
            "distance" => self.env.energy.kind = parse_distance(value)?,
            "probability_weighting" => self.env.energy.prob_weight = num(key, value)?,
            "sampler" => {
                let s = parse_sampler(value)?;
                self.env.sampler = s;
                self.optimizer.sampler = s;
            }

            "max_iterations" => self.optimizer.max_iterations = num(key, value)?,
            "restarts" => self.optimizer.restarts = num(key, value)?,
            "gd_learning_rate" => self.optimizer.learning_rate = num(key, value)?,
            "backtracking_factor" => self.optimizer.backtracking_factor = num(key, value)?,
            "gradient_norm_stop" => self.optimizer.gradient_norm_stop = num(key, value)?,
            "mc_temperature" => self.optimizer.mc_temperature = num(key, value)?,
            "translation_sigma" => self.optimizer.translation_sigma = num(key, value)?,
            "rotation_sigma_deg" => self.optimizer.rotation_sigma_deg = num(key, value)?,
            "sa_t_start" => self.optimizer.sa_t_start = num(key, value)?,
            "sa_t_end" => self.optimizer.sa_t_end = num(key, value)?,

            other => return Err(format!("unknown setting {other:?}")),
        }
        Ok(())
    }

    /// `key = value` lines for every effective setting, in a fixed order.
    /// Each line parses back through [`RunSettings::apply_kv`].
    pub fn echo_lines(&self) -> Vec<String> {
        let t = &self.train;
        let e = &self.env;
        let o = &self.optimizer;
        let threads = match self.threads {
            Some(n) => n.to_string(),
            None => "auto".into(),
        };
        let pairs: Vec<(&str, String)> = vec![
            ("action_mode", action_mode_token(e.action_mode).into()),
            ("backtracking_factor", o.backtracking_factor.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("contact_threshold", self.contact_threshold.to_string()),
            ("distance", distance_token(e.energy.kind).into()),
            ("early_stop_energy", self.early_stop_energy.to_string()),
            ("early_stop_successes", self.early_stop_successes.to_string()),
            ("epsilon_decay", t.epsilon_decay.to_string()),
            ("epsilon_decay_per_step", t.epsilon_decay_per_step.to_string()),
            ("epsilon_end", t.epsilon_end.to_string()),
            ("epsilon_start", t.epsilon_start.to_string()),
            ("gamma", t.gamma.to_string()),
            (
                "gd_contact_ub",
                self.gd_contact_ub.map_or("auto".into(), |v| v.to_string()),
            ),
            ("gd_distance", distance_token(self.gd_distance).into()),
            ("gd_learning_rate", o.learning_rate.to_string()),
            ("gradient_norm_stop", o.gradient_norm_stop.to_string()),
            ("hidden_size", t.hidden_size.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("max_episode_steps", e.max_steps.to_string()),
            ("max_iterations", o.max_iterations.to_string()),
            ("mc_temperature", o.mc_temperature.to_string()),
            ("method", self.method.token().into()),
            ("obs_size", e.obs_size.to_string()),
            ("probability_weighting", e.energy.prob_weight.to_string()),
            ("replay_capacity", t.replay_capacity.to_string()),
            ("restarts", o.restarts.to_string()),
            ("reward", reward_token(e.reward).into()),
            ("rollout_steps", self.rollout_steps.to_string()),
            ("rotation_sigma_deg", o.rotation_sigma_deg.to_string()),
            ("rotation_step_deg", e.rotation_step_deg.to_string()),
            ("sa_t_end", o.sa_t_end.to_string()),
            ("sa_t_start", o.sa_t_start.to_string()),
            ("sampler", sampler_token(e.sampler).into()),
            ("scenario", self.scenario.token().into()),
            ("seed", self.seed.to_string()),
            ("success_energy", e.success_energy.to_string()),
            ("target_sync_interval", t.target_sync_interval.to_string()),
            ("threads", threads),
            ("total_steps", t.total_steps.to_string()),
            ("translation_sigma", o.translation_sigma.to_string()),
            ("translation_step", e.translation_step.to_string()),
        ];
        pairs.into_iter().map(|(k, v)| format!("{k} = {v}")).collect()
    }

    /// Training config for one run, with the per-run seed filled in.
    pub fn train_for(&self, seed: u64) -> TrainConfig {
        let mut config = self.train.clone();
        config.seed = seed;
        config.early_stop = if self.early_stop_successes > 0 {
            Some(EarlyStop {
                consecutive_successes: self.early_stop_successes,
                energy_threshold: self.early_stop_energy,
            })
        } else {
            None
        };
        config
    }

    /// Optimizer config for one classical method.
    pub fn optimizer_for(&self, method: Method) -> Result<OptimizerConfig, HarnessError> {
        let variant = method
            .variant()
            .ok_or_else(|| HarnessError::Config("no optimizer backs the DRL method".into()))?;
        let mut config = self.optimizer;
        config.variant = variant;
        config.energy = self.env.energy;
        if variant == OptimizerVariant::Gd {
            config.energy.kind = self.gd_distance;
        }
        Ok(config)
    }

    /// The restraint set a method actually descends on. Gradient descent gets
    /// its own well bound: widened for CB distances (CB pairs sit further
    /// apart than the closest heavy atoms), the plain contact threshold for
    /// min-heavy unless overridden. Everything else takes the set as given.
    pub fn contacts_for(&self, method: Method, contacts: &ContactSet) -> ContactSet {
        if method != Method::Gd {
            return contacts.clone();
        }
        let ub = self.gd_contact_ub.unwrap_or(match self.gd_distance {
            DistanceKind::Cb => DEFAULT_CB_UPPER_BOUND,
            DistanceKind::MinHeavy => self.contact_threshold,
        });
        contacts.with_bounds(0.0, ub, DEFAULT_SD)
    }
}

/// CLI flags that override file and default settings.
#[derive(Debug, Clone, Copy, Default)]
pub struct CliOverrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub method: Option<Method>,
    pub scenario: Option<Scenario>,
    pub obs_size: Option<usize>,
    pub action_mode: Option<ActionMode>,
}

impl CliOverrides {
    pub fn apply(&self, settings: &mut RunSettings) {
        if let Some(v) = self.seed {
            settings.seed = v;
        }
        if let Some(v) = self.threads {
            settings.threads = Some(v);
        }
        if let Some(v) = self.method {
            settings.method = v;
        }
        if let Some(v) = self.scenario {
            settings.scenario = v;
        }
        if let Some(v) = self.obs_size {
            settings.env.obs_size = v;
        }
        if let Some(v) = self.action_mode {
            settings.env.action_mode = v;
        }
    }
}

/// Parse a config file onto `settings`. Format: a `qfold-config v1` header,
/// then `key = value` lines; `#` starts a comment.
pub fn apply_config<R: Read>(source: R, settings: &mut RunSettings) -> Result<(), HarnessError> {
    let reader = BufReader::new(source);
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| HarnessError::Config(format!("config line {lineno}: {e}")))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if !saw_header {
            if content != CONFIG_HEADER {
                return Err(HarnessError::Config(format!(
                    "config line {lineno}: expected header {CONFIG_HEADER:?}, got {content:?}"
                )));
            }
            saw_header = true;
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| {
            HarnessError::Config(format!("config line {lineno}: expected key = value"))
        })?;
        settings
            .apply_kv(key.trim(), value.trim())
            .map_err(|e| HarnessError::Config(format!("config line {lineno}: {e}")))?;
    }
    if !saw_header {
        return Err(HarnessError::Config(format!("config file is empty (want {CONFIG_HEADER:?})")));
    }
    Ok(())
}

/// Number of benchmark workers: explicit setting, else `QFOLD_THREADS`, else
/// one per available core.
pub fn resolve_threads(setting: Option<usize>) -> usize {
    setting
        .or_else(|| std::env::var("QFOLD_THREADS").ok().and_then(|v| v.parse().ok()))
        .filter(|n| *n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
}
