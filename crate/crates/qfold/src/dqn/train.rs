//! Per-target self-play: ε-greedy exploration into a replay buffer, one SGD
//! minibatch per environment step once the buffer holds a full batch, and a
//! frozen target network refreshed every `target_sync_interval` steps.

use super::network::{sync_target, BatchItem, QNetwork, Scalar, DEFAULT_HIDDEN};
use super::replay::{Experience, ReplayBuffer};
use super::DqnError;
use crate::environment::{Snapshot, TrainEnv};
use crate::geometry::Pose;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStop {
    /// Stop once this many consecutive episodes finish at or below the
    /// energy threshold.
    pub consecutive_successes: usize,
    pub energy_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub target_sync_interval: usize,
    pub total_steps: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay: f64,
    /// Decay ε after every environment step instead of after every episode.
    pub epsilon_decay_per_step: bool,
    pub learning_rate: f64,
    pub replay_capacity: usize,
    pub hidden_size: usize,
    pub seed: u64,
    /// Off by default: run the full step budget unless told otherwise.
    pub early_stop: Option<EarlyStop>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.99,
            batch_size: 64,
            target_sync_interval: 500,
            total_steps: 100_000,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay: 0.99,
            epsilon_decay_per_step: false,
            learning_rate: 1e-3,
            replay_capacity: 50_000,
            hidden_size: DEFAULT_HIDDEN,
            seed: 0,
            early_stop: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DqnError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(DqnError::BadConfig(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.epsilon_end)
            || !(0.0..=1.0).contains(&self.epsilon_start)
            || self.epsilon_end > self.epsilon_start
        {
            return Err(DqnError::BadConfig("need 0 <= epsilon_end <= epsilon_start <= 1".into()));
        }
        if !(0.0 < self.epsilon_decay && self.epsilon_decay <= 1.0) {
            return Err(DqnError::BadConfig(format!(
                "epsilon_decay {} outside (0, 1]",
                self.epsilon_decay
            )));
        }
        if self.target_sync_interval == 0 {
            return Err(DqnError::BadConfig("target_sync_interval must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(DqnError::BadConfig("batch_size must be >= 1".into()));
        }
        if self.total_steps < self.batch_size {
            return Err(DqnError::BadConfig(format!(
                "total_steps {} below the warm-up batch of {}",
                self.total_steps, self.batch_size
            )));
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(DqnError::BadConfig("learning_rate must be positive".into()));
        }
        if self.replay_capacity == 0 {
            return Err(DqnError::BadConfig("replay_capacity must be >= 1".into()));
        }
        Ok(())
    }
}

/// One finished episode, as reported in training logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub steps: usize,
    pub total_reward: f64,
    pub final_energy: f64,
    /// Complex RMSD against the native reference, NaN when no native is known.
    pub final_rmsd: f64,
}

impl EpisodeRecord {
    /// Space-separated line: episode steps total_reward final_energy final_rmsd.
    pub fn to_line(&self) -> String {
        format!(
            "{} {} {} {} {}",
            self.episode, self.steps, self.total_reward, self.final_energy, self.final_rmsd
        )
    }
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub network: QNetwork<f32>,
    pub episodes: Vec<EpisodeRecord>,
    /// Lowest energy seen at any point of training, and the pose that had it.
    pub best_energy: f64,
    pub best_pose: Option<Pose>,
    pub steps_taken: usize,
    pub final_epsilon: f64,
}

use crate::seeding::derive_seed;

const SALT_NET: u64 = 1;
const SALT_POLICY: u64 = 2;
const SALT_REPLAY: u64 = 3;
const SALT_EPISODE_BASE: u64 = 0x100;

pub(crate) fn episode_seed(seed: u64, episode: usize) -> u64 {
    derive_seed(seed, SALT_EPISODE_BASE + episode as u64)
}

pub(crate) fn argmax_lowest<S: PartialOrd + Copy>(values: &[S]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy action choice: a uniformly random action with probability ε,
/// otherwise the argmax of the Q-values (ties to the lowest index). The
/// random gate is drawn only when ε > 0, so a greedy call never consumes
/// randomness.
pub fn select_action<S: Scalar, R: Rng>(
    net: &QNetwork<S>,
    obs: &Array2<S>,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize, DqnError> {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..net.action_count()));
    }
    let q = net.forward(obs)?;
    Ok(argmax_lowest(&q))
}

/// Bootstrapped regression target: `r` when the transition ended the
/// episode, otherwise `r + gamma * max_a Q_target(s', a)`.
pub fn q_reference<S: Scalar>(
    reward: f64,
    next_obs: &Array2<S>,
    done: bool,
    target_net: &QNetwork<S>,
    gamma: f64,
) -> Result<f64, DqnError> {
    if done {
        return Ok(reward);
    }
    let q = target_net.forward(next_obs)?;
    let max = q.iter().fold(f64::NEG_INFINITY, |acc, v| acc.max(v.to_f64()));
    Ok(reward + gamma * max)
}

fn row_max(row: ndarray::ArrayView1<'_, f32>) -> f64 {
    row.iter().fold(f64::NEG_INFINITY, |acc, v| acc.max(*v as f64))
}

pub fn train_self_play<E: TrainEnv>(
    env: &mut E,
    config: &TrainConfig,
) -> Result<TrainOutcome, DqnError> {
    config.validate()?;
    let mut net = QNetwork::<f32>::new(
        env.obs_size(),
        env.action_count(),
        config.hidden_size,
        derive_seed(config.seed, SALT_NET),
    )?;
    let mut target = net.clone();
    let mut policy_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, SALT_POLICY));
    let mut replay_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, SALT_REPLAY));
    let mut buffer = ReplayBuffer::new(config.replay_capacity);

    let mut episodes: Vec<EpisodeRecord> = Vec::new();
    let mut epsilon = config.epsilon_start;
    let mut best_energy = f64::INFINITY;
    let mut best_pose: Option<Pose> = None;
    let mut consecutive = 0usize;
    let mut episode = 0usize;
    let mut ep_reward = 0.0;
    let mut ep_steps = 0usize;
    let mut steps_taken = 0usize;

    let track_best =
        |snap: &Snapshot, pose: Option<Pose>, best_energy: &mut f64, best_pose: &mut Option<Pose>| {
            if snap.energy < *best_energy {
                *best_energy = snap.energy;
                if pose.is_some() {
                    *best_pose = pose;
                }
            }
        };

    let mut snap = env.reset(episode_seed(config.seed, episode))?;
    track_best(&snap, env.current_pose(), &mut best_energy, &mut best_pose);

    'steps: for step in 1..=config.total_steps {
        // An episode can be born finished (e.g. an identity start on a
        // satisfied target): log it and move on. The episode count is capped
        // by the step budget, so this cannot spin forever.
        while snap.done {
            episodes.push(EpisodeRecord {
                episode,
                steps: ep_steps,
                total_reward: ep_reward,
                final_energy: snap.energy,
                final_rmsd: env.current_native_rmsd().unwrap_or(f64::NAN),
            });
            if let Some(es) = config.early_stop {
                if snap.energy <= es.energy_threshold {
                    consecutive += 1;
                    if consecutive >= es.consecutive_successes {
                        break 'steps;
                    }
                } else {
                    consecutive = 0;
                }
            }
            if !config.epsilon_decay_per_step {
                epsilon = (epsilon * config.epsilon_decay).max(config.epsilon_end);
            }
            episode += 1;
            ep_reward = 0.0;
            ep_steps = 0;
            if episode > config.total_steps {
                break 'steps;
            }
            snap = env.reset(episode_seed(config.seed, episode))?;
            track_best(&snap, env.current_pose(), &mut best_energy, &mut best_pose);
        }

        let action = select_action(&net, &snap.observation, epsilon, &mut policy_rng)?;
        let (next, reward, done) = env.step(action)?;
        buffer.push(Experience {
            obs: snap.observation.clone(),
            action,
            reward,
            next_obs: next.observation.clone(),
            done,
        });
        ep_reward += reward;
        ep_steps += 1;
        steps_taken = step;
        track_best(&next, env.current_pose(), &mut best_energy, &mut best_pose);

        if buffer.len() >= config.batch_size {
            let picks = buffer.sample_indices(&mut replay_rng, config.batch_size);
            let next_refs: Vec<&Array2<f32>> =
                picks.iter().map(|i| buffer.get(*i).next_obs.as_ref()).collect();
            let q_next = target.forward_batch(&next_refs)?;
            let items: Vec<BatchItem<'_, f32>> = picks
                .iter()
                .enumerate()
                .map(|(row, i)| {
                    let e = buffer.get(*i);
                    let target_value = if e.done {
                        e.reward
                    } else {
                        e.reward + config.gamma * row_max(q_next.row(row))
                    };
                    BatchItem { obs: e.obs.as_ref(), action: e.action, target: target_value }
                })
                .collect();
            let (grads, loss) = net.backward_batch(&items)?;
            if !loss.is_finite() {
                return Err(DqnError::NonFiniteLoss { step });
            }
            net.apply_gradients(&grads, config.learning_rate);
        }

        if step % config.target_sync_interval == 0 {
            sync_target(&net, &mut target)?;
        }
        if config.epsilon_decay_per_step {
            epsilon = (epsilon * config.epsilon_decay).max(config.epsilon_end);
        }
        snap = next;
    }

    // A final snapshot that is done deserves its episode record even when
    // the step budget ran out in the same step.
    if snap.done && ep_steps > 0 {
        episodes.push(EpisodeRecord {
            episode,
            steps: ep_steps,
            total_reward: ep_reward,
            final_energy: snap.energy,
            final_rmsd: env.current_native_rmsd().unwrap_or(f64::NAN),
        });
    }

    Ok(TrainOutcome {
        network: net,
        episodes,
        best_energy,
        best_pose,
        steps_taken,
        final_epsilon: epsilon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub action: usize,
    pub reward: f64,
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct Rollout {
    /// Lowest energy along the trajectory (including the reset state)...
    pub best_energy: f64,
    /// ...and the pose that had it, when the environment exposes poses.
    pub best_pose: Option<Pose>,
    pub final_energy: f64,
    pub steps: usize,
    pub trajectory: Vec<TraceStep>,
}

/// Greedy (ε = 0) rollout from a fresh reset; keeps the best-energy state
/// seen, not merely the last. `max_steps` = 0 returns the reset state.
pub fn greedy_rollout<E: TrainEnv>(
    net: &QNetwork<f32>,
    env: &mut E,
    max_steps: usize,
    reset_seed: u64,
) -> Result<Rollout, DqnError> {
    let mut current = env.reset(reset_seed)?;
    let mut best_energy = current.energy;
    let mut best_pose = env.current_pose();
    let mut trajectory = Vec::new();
    for step in 1..=max_steps {
        if current.done {
            break;
        }
        let q = net.forward(current.observation.as_ref())?;
        let action = argmax_lowest(&q);
        let (next, reward, _) = env.step(action)?;
        trajectory.push(TraceStep { step, action, reward, energy: next.energy });
        if next.energy < best_energy {
            best_energy = next.energy;
            best_pose = env.current_pose();
        }
        current = next;
    }
    Ok(Rollout {
        best_energy,
        best_pose,
        final_energy: current.energy,
        steps: trajectory.len(),
        trajectory,
    })
}
