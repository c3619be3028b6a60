//! The outer training loop: act with exploration noise, step, store, then
//! for every agent sample a minibatch, update its critic and actor, and
//! finally blend all target networks once per environment step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bias::{bias_in_place, BiasConfig, BiasStats, BiasVariant, BiasWorkspace, JointLayout};
use super::learner::{select_action, AgentLearner};
use super::update::{actor_update, critic_target, critic_update, UpdateContext, UpdateWorkspace};
use super::{MarlError, TeamSpec};
use crate::env::{Captures, Env, PhysicsConfig, ScenarioConfig};
use crate::nn::AdamConfig;
use crate::replay::{RecordLayout, ReplayBuffer, Transition};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Number of training episodes M.
    pub episodes: u64,
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub noise_initial: f64,
    pub noise_final: f64,
    /// Fraction of training over which the noise decays to its final value.
    pub noise_decay_fraction: f64,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 120_000,
            gamma: 0.95,
            tau: 0.01,
            actor_lr: 1e-2,
            critic_lr: 1e-2,
            batch_size: 1024,
            buffer_capacity: 1_000_000,
            actor_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            noise_initial: 0.3,
            noise_final: 0.05,
            noise_decay_fraction: 0.5,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MarlError> {
        let err = |m: String| Err(MarlError::Config(m));
        if !(0.0..=1.0).contains(&self.gamma) {
            return err(format!("train.gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return err(format!("train.tau must lie in (0, 1], got {}", self.tau));
        }
        for (k, v) in [("train.actor_lr", self.actor_lr), ("train.critic_lr", self.critic_lr)] {
            if !(v.is_finite() && v > 0.0) {
                return err(format!("{k} must be positive, got {v}"));
            }
        }
        if self.batch_size == 0 {
            return err("train.batch_size must be positive".into());
        }
        if self.buffer_capacity < self.batch_size {
            return err(format!(
                "train.buffer_capacity ({}) must be at least train.batch_size ({})",
                self.buffer_capacity, self.batch_size
            ));
        }
        for (k, h) in [("train.actor_hidden", &self.actor_hidden), ("train.critic_hidden", &self.critic_hidden)] {
            if h.contains(&0) {
                return err(format!("{k} widths must be positive, got {h:?}"));
            }
        }
        for (k, v) in [("train.noise_initial", self.noise_initial), ("train.noise_final", self.noise_final)] {
            if !(v.is_finite() && v >= 0.0) {
                return err(format!("{k} must be non-negative, got {v}"));
            }
        }
        if !(self.noise_decay_fraction > 0.0 && self.noise_decay_fraction <= 1.0) {
            return err(format!(
                "train.noise_decay_fraction must lie in (0, 1], got {}",
                self.noise_decay_fraction
            ));
        }
        let a = &self.adam;
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return err(format!("train.adam values out of range: {a:?}"));
        }
        Ok(())
    }

    /// Exploration scale for a given episode: geometric decay from
    /// `noise_initial` to `noise_final` over the first `noise_decay_fraction`
    /// of training, constant afterwards.
    pub fn noise_scale(&self, episode: u64) -> f64 {
        let span = (self.noise_decay_fraction * self.episodes as f64).max(1.0);
        let progress = (episode as f64 / span).min(1.0);
        let (a, b) = (self.noise_initial, self.noise_final);
        if a > 0.0 && b > 0.0 {
            a * (b / a).powf(progress)
        } else {
            a + (b - a) * progress
        }
    }
}

/// Variant per team plus the two step sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmConfig {
    /// Used by team 0: navigators, speaker and listener, predators.
    pub variant: BiasVariant,
    /// Used by team 1: prey and the covert adversary.
    pub opponent_variant: BiasVariant,
    pub delta_ally: f64,
    pub delta_enemy: f64,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            variant: BiasVariant::F2ddpg,
            opponent_variant: BiasVariant::Maddpg,
            delta_ally: 1e-5,
            delta_enemy: 1e-3,
        }
    }
}

impl AlgorithmConfig {
    pub fn validate(&self) -> Result<(), MarlError> {
        for (k, v) in [("algorithm.delta_ally", self.delta_ally), ("algorithm.delta_enemy", self.delta_enemy)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(MarlError::Config(format!("{k} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Position of one seeded ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSnapshot {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngSnapshot {
    pub fn of(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

/// Independent random streams so that, e.g., the RandomSign coin flips
/// never shift the environment's draws.
#[derive(Debug, Clone)]
pub struct RngStreams {
    pub env: ChaCha8Rng,
    pub noise: ChaCha8Rng,
    pub sample: ChaCha8Rng,
    pub bias: ChaCha8Rng,
}

impl RngStreams {
    const INIT_STREAM: u64 = 4;

    pub fn from_seed(seed: u64) -> Self {
        let stream = |s| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(s);
            r
        };
        Self {
            env: stream(0),
            noise: stream(1),
            sample: stream(2),
            bias: stream(3),
        }
    }

    fn init_rng(seed: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(Self::INIT_STREAM);
        r
    }

    pub fn snapshot(&self) -> [RngSnapshot; 4] {
        [
            RngSnapshot::of(&self.env),
            RngSnapshot::of(&self.noise),
            RngSnapshot::of(&self.sample),
            RngSnapshot::of(&self.bias),
        ]
    }

    pub fn restore(s: &[RngSnapshot; 4]) -> Self {
        Self {
            env: s[0].restore(),
            noise: s[1].restore(),
            sample: s[2].restore(),
            bias: s[3].restore(),
        }
    }
}

/// Diagnostics from one agent's critic + actor update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub episode: u64,
    pub env_step: u64,
    /// Global index of this update across all agents.
    pub update: u64,
    pub agent: usize,
    pub variant: BiasVariant,
    pub critic_loss: f64,
    pub policy_grad_norm: f64,
    /// Mean `cos(a_k, dQ_i/da_k)` over ally blocks and samples.
    pub ally_cosine: Option<f64>,
    /// Mean `|a_bar_k - a_k|` over biased blocks.
    pub mean_bias_shift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub episode: u64,
    pub returns: Vec<f64>,
    pub mean_critic_loss: Vec<Option<f64>>,
    pub updates: u64,
    pub captures: Captures,
    pub ally_cosine: Option<f64>,
}

/// One environment step, for trajectory export.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub episode: u64,
    pub timestep: usize,
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    /// `biases[i][k]`: shift agent `i`'s online critic applies to agent `k`'s action.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub biases: Option<Vec<Vec<Vec<f64>>>>,
}

/// Hooks into the training loop. All methods default to no-ops.
pub trait TrainObserver<F: Scalar> {
    fn on_update(&mut self, _record: &UpdateRecord) -> Result<(), MarlError> {
        Ok(())
    }

    /// `Some(with_biases)` to receive step records for this episode.
    fn trace_episode(&mut self, _episode: u64) -> Option<bool> {
        None
    }

    fn on_step(&mut self, _record: &StepRecord) -> Result<(), MarlError> {
        Ok(())
    }

    /// Called after every environment step, once that step's updates and
    /// target blends are done.
    fn after_step(&mut self, _trainer: &Trainer<F>) -> Result<(), MarlError> {
        Ok(())
    }

    fn on_episode(&mut self, _trainer: &Trainer<F>, _summary: &EpisodeSummary) -> Result<(), MarlError> {
        Ok(())
    }
}

/// Observer that ignores everything.
pub struct NoopObserver;

impl<F: Scalar> TrainObserver<F> for NoopObserver {}

/// Complete training state for one run.
#[derive(Debug, Clone)]
pub struct Trainer<F> {
    env: Env<F>,
    layout: JointLayout,
    team: TeamSpec,
    variants: Vec<BiasVariant>,
    bias: BiasConfig<F>,
    algorithm: AlgorithmConfig,
    cfg: TrainConfig,
    learners: Vec<AgentLearner<F>>,
    buffer: ReplayBuffer<F>,
    rngs: RngStreams,
    episode: u64,
    env_steps: u64,
    updates: u64,
    ws: UpdateWorkspace<F>,
}

/// Counters that advance during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counters {
    pub episode: u64,
    pub env_steps: u64,
    pub updates: u64,
}

impl<F: Scalar> Trainer<F> {
    pub fn new(
        scenario: ScenarioConfig,
        physics: PhysicsConfig,
        algorithm: AlgorithmConfig,
        cfg: TrainConfig,
    ) -> Result<Self, MarlError> {
        cfg.validate()?;
        algorithm.validate()?;
        let env = Env::new(scenario, physics)?;
        let layout = JointLayout::new(env.obs_lens().to_vec(), env.action_lens())?;
        let team_ids = env.team_ids();
        let team = TeamSpec::from_team_ids(&team_ids);
        let variants = team_ids
            .iter()
            .map(|&t| if t == 0 { algorithm.variant } else { algorithm.opponent_variant })
            .collect();
        let bias = BiasConfig::new(F::lit(algorithm.delta_ally), F::lit(algorithm.delta_enemy))?;
        let mut init = RngStreams::init_rng(cfg.seed);
        let learners = (0..env.n_agents())
            .map(|i| {
                AgentLearner::new(
                    env.obs_len(i),
                    env.action_len(i),
                    layout.input_len(),
                    &cfg.actor_hidden,
                    &cfg.critic_hidden,
                    cfg.adam,
                    &mut init,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let buffer = ReplayBuffer::new(
            RecordLayout::new(env.obs_lens().to_vec(), env.action_lens()),
            cfg.buffer_capacity,
        )?;
        Ok(Self {
            rngs: RngStreams::from_seed(cfg.seed),
            env,
            layout,
            team,
            variants,
            bias,
            algorithm,
            cfg,
            learners,
            buffer,
            episode: 0,
            env_steps: 0,
            updates: 0,
            ws: UpdateWorkspace::default(),
        })
    }

    pub fn env(&self) -> &Env<F> {
        &self.env
    }

    pub fn layout(&self) -> &JointLayout {
        &self.layout
    }

    pub fn team(&self) -> &TeamSpec {
        &self.team
    }

    pub fn variants(&self) -> &[BiasVariant] {
        &self.variants
    }

    pub fn algorithm(&self) -> &AlgorithmConfig {
        &self.algorithm
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn learners(&self) -> &[AgentLearner<F>] {
        &self.learners
    }

    pub fn learners_mut(&mut self) -> &mut [AgentLearner<F>] {
        &mut self.learners
    }

    pub fn buffer(&self) -> &ReplayBuffer<F> {
        &self.buffer
    }

    pub fn rngs(&self) -> &RngStreams {
        &self.rngs
    }

    pub fn counters(&self) -> Counters {
        Counters {
            episode: self.episode,
            env_steps: self.env_steps,
            updates: self.updates,
        }
    }

    /// Replaces learned state, counters and random streams (checkpoint resume).
    /// The replay buffer is left as is.
    pub fn restore(
        &mut self,
        learners: Vec<AgentLearner<F>>,
        counters: Counters,
        rngs: RngStreams,
    ) -> Result<(), MarlError> {
        if learners.len() != self.learners.len() {
            return Err(MarlError::Layout(format!(
                "checkpoint has {} agents, scenario has {}",
                learners.len(),
                self.learners.len()
            )));
        }
        for (new, old) in learners.iter().zip(&self.learners) {
            if new.actor.dims() != old.actor.dims() || new.critic.dims() != old.critic.dims() {
                return Err(MarlError::Layout("checkpoint network shapes differ from the scenario".into()));
            }
        }
        self.learners = learners;
        self.episode = counters.episode;
        self.env_steps = counters.env_steps;
        self.updates = counters.updates;
        self.rngs = rngs;
        Ok(())
    }

    fn context(&self, agent: usize) -> UpdateContext<'_, F> {
        UpdateContext {
            layout: &self.layout,
            team: &self.team,
            variant: self.variants[agent],
            bias: self.bias,
            gamma: F::lit(self.cfg.gamma),
        }
    }

    /// Shift each agent's online critic applies to every other agent's action
    /// at the given joint observation and action.
    fn bias_vectors(&mut self, obs: &[Vec<F>], actions: &[Vec<F>]) -> Result<Vec<Vec<Vec<f64>>>, MarlError> {
        let input = self.layout.critic_input(obs, actions)?;
        let mut ws = BiasWorkspace::default();
        let mut out = Vec::with_capacity(self.learners.len());
        for i in 0..self.learners.len() {
            let mut biased = input.clone();
            // Use F2DDPG's sign rule for display unless the agent trains with another variant.
            let variant = match self.variants[i] {
                BiasVariant::Maddpg => BiasVariant::F2ddpg,
                v => v,
            };
            bias_in_place(
                &self.learners[i].critic,
                &self.layout,
                &mut biased,
                i,
                &self.team,
                variant,
                &self.bias,
                &mut self.rngs.bias.clone(),
                &mut ws,
                None,
            )?;
            out.push(
                (0..self.learners.len())
                    .map(|k| {
                        self.layout
                            .act_range(k)
                            .map(|j| (biased[j] - input[j]).to_f64_lossy())
                            .collect()
                    })
                    .collect(),
            );
        }
        Ok(out)
    }

    /// Runs one episode of the training loop.
    pub fn train_episode(&mut self, observer: &mut dyn TrainObserver<F>) -> Result<EpisodeSummary, MarlError> {
        let episode = self.episode;
        let noise = F::lit(self.cfg.noise_scale(episode));
        for l in &mut self.learners {
            l.noise_scale = noise;
        }
        let trace = observer.trace_episode(episode);
        let n = self.learners.len();
        let mut world = self.env.reset(&mut self.rngs.env);
        let mut obs = self.env.observe_all(&world);
        let mut returns = vec![0.0; n];
        let mut loss_sum = vec![0.0; n];
        let mut loss_count = vec![0u64; n];
        let mut cos = BiasStats::default();
        let mut captures = Captures::default();
        let updates_before = self.updates;
        let batch = self.cfg.batch_size;
        let (actor_lr, critic_lr, tau) = (F::lit(self.cfg.actor_lr), F::lit(self.cfg.critic_lr), F::lit(self.cfg.tau));

        for _ in 0..self.env.horizon() {
            let actions = self
                .learners
                .iter()
                .zip(&obs)
                .map(|(l, o)| select_action(l, o, &mut self.rngs.noise, true))
                .collect::<Result<Vec<_>, _>>()?;
            let env_actions = actions
                .iter()
                .enumerate()
                .map(|(i, a)| self.env.decode_flat(i, a))
                .collect::<Result<Vec<_>, _>>()?;
            let result = self.env.step(&world, &env_actions)?;
            if let Some(with_biases) = trace {
                let biases = if with_biases {
                    Some(self.bias_vectors(&obs, &actions)?)
                } else {
                    None
                };
                observer.on_step(&StepRecord {
                    episode,
                    timestep: result.world.timestep,
                    positions: result
                        .world
                        .agents
                        .iter()
                        .map(|a| [a.position.x.to_f64_lossy(), a.position.y.to_f64_lossy()])
                        .collect(),
                    velocities: result
                        .world
                        .agents
                        .iter()
                        .map(|a| [a.velocity.x.to_f64_lossy(), a.velocity.y.to_f64_lossy()])
                        .collect(),
                    actions: actions.iter().map(|a| a.iter().map(|x| x.to_f64_lossy()).collect()).collect(),
                    rewards: result.rewards.iter().map(|r| r.to_f64_lossy()).collect(),
                    biases,
                })?;
            }
            self.buffer.push(&Transition {
                obs,
                actions,
                rewards: result.rewards.clone(),
                next_obs: result.observations.clone(),
            })?;
            for (acc, r) in returns.iter_mut().zip(&result.rewards) {
                *acc += r.to_f64_lossy();
            }
            captures.green += result.captures.green;
            captures.blue += result.captures.blue;
            obs = result.observations;
            world = result.world;
            self.env_steps += 1;

            if !self.buffer.is_ready(batch) {
                observer.after_step(self)?;
                continue;
            }
            for i in 0..n {
                let mb = self.buffer.sample(batch, &mut self.rngs.sample)?;
                let ctx = UpdateContext {
                    layout: &self.layout,
                    team: &self.team,
                    variant: self.variants[i],
                    bias: self.bias,
                    gamma: F::lit(self.cfg.gamma),
                };
                let targets = critic_target(&mb, i, &self.learners, &ctx, &mut self.rngs.bias, &mut self.ws)?;
                let loss = critic_update(&mb, i, &mut self.learners[i], &targets, critic_lr, &mut self.ws)?;
                let actor = actor_update(&mb, i, &mut self.learners[i], &ctx, actor_lr, &mut self.rngs.bias, &mut self.ws)?;
                let loss = loss.to_f64_lossy();
                loss_sum[i] += loss;
                loss_count[i] += 1;
                cos.ally_cosine_sum += actor.bias.ally_cosine_sum;
                cos.ally_cosine_count += actor.bias.ally_cosine_count;
                let record = UpdateRecord {
                    episode,
                    env_step: self.env_steps,
                    update: self.updates,
                    agent: i,
                    variant: self.variants[i],
                    critic_loss: loss,
                    policy_grad_norm: actor.policy_grad_norm.to_f64_lossy(),
                    ally_cosine: actor.bias.mean_ally_cosine(),
                    mean_bias_shift: actor.bias.mean_shift_norm(),
                };
                self.updates += 1;
                observer.on_update(&record)?;
            }
            for l in &mut self.learners {
                l.soft_update_targets(tau)?;
            }
            observer.after_step(self)?;
        }
        self.episode += 1;
        let summary = EpisodeSummary {
            episode,
            returns,
            mean_critic_loss: loss_sum
                .iter()
                .zip(&loss_count)
                .map(|(s, c)| (*c > 0).then(|| s / *c as f64))
                .collect(),
            updates: self.updates - updates_before,
            captures,
            ally_cosine: cos.mean_ally_cosine(),
        };
        observer.on_episode(self, &summary)?;
        Ok(summary)
    }

    /// Trains until the episode counter reaches the configured `episodes`.
    pub fn train(&mut self, observer: &mut dyn TrainObserver<F>) -> Result<(), MarlError> {
        while self.episode < self.cfg.episodes {
            self.train_episode(observer)?;
        }
        Ok(())
    }

    /// Context for `agent`, e.g. to run updates outside the loop.
    pub fn update_context(&self, agent: usize) -> UpdateContext<'_, F> {
        self.context(agent)
    }
}

/// Builds a trainer and runs `M` episodes. Returns the trained state.
pub fn train<F: Scalar>(
    scenario: ScenarioConfig,
    physics: PhysicsConfig,
    algorithm: AlgorithmConfig,
    cfg: TrainConfig,
    observer: &mut dyn TrainObserver<F>,
) -> Result<Trainer<F>, MarlError> {
    let mut trainer = Trainer::new(scenario, physics, algorithm, cfg)?;
    trainer.train(observer)?;
    Ok(trainer)
}
