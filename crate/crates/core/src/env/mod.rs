//! Deterministic 2-D particle world with four scenarios: cooperative
//! navigation, cooperative communication, m-vs-n predator-prey and covert
//! communication.
//!
//! Observation layouts (fixed for an experiment):
//!
//! * navigation, predator-prey: own velocity, own position, landmark positions
//!   relative to self, then for every other agent in index order its relative
//!   position and relative velocity.
//! * cooperative communication: the same base block; the speaker appends the
//!   one-hot goal color (3), the listener appends each landmark's one-hot color
//!   (3 per landmark) followed by the speaker's last communication vector (3).
//! * covert communication (all agents are stationary): the speaker sees
//!   message then key, the listener sees key then the speaker's communication
//!   vector, the adversary sees only the communication vector (4 each).
//!
//! Actions arrive already squashed into `[-1, 1]`. A movement action is the
//! 5-vector (hold, right, left, up, down), decoded to a net force.

mod config;
mod geometry;
mod reward;

pub use config::{PhysicsConfig, ScenarioConfig, ScenarioKind};
pub use geometry::Vec2;
pub use reward::{
    detect_collisions, reward_cooperative_communication, reward_cooperative_navigation,
    reward_covert_communication, reward_predator_prey, Captures, PredatorPreyRewards,
};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

pub const MOVE_DIM: usize = 5;
pub const COOP_COMM_DIM: usize = 3;
pub const COVERT_DIM: usize = 4;
const COLORS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("scenario configuration: {0}")]
    Config(String),
    #[error("action contract: {0}")]
    Contract(String),
    #[error("non-finite action component for agent {agent}")]
    NonFinite { agent: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Navigator,
    Speaker,
    Listener,
    Predator,
    BluePrey,
    GreenPrey,
    Adversary,
    Landmark,
}

impl Role {
    pub fn is_prey(self) -> bool {
        matches!(self, Role::BluePrey | Role::GreenPrey)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Agent,
    Landmark,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityState<F> {
    pub position: Vec2<F>,
    pub velocity: Vec2<F>,
    pub kind: EntityKind,
    pub role: Role,
    pub radius: F,
    pub max_speed: F,
    pub accel_scale: F,
    pub movable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload<F> {
    None,
    GoalColor(usize),
    Covert { message: Vec<F>, key: Vec<F> },
}

/// Global state: agents, then landmarks; each agent's last communication
/// vector (empty for agents that do not communicate).
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState<F> {
    pub agents: Vec<EntityState<F>>,
    pub landmarks: Vec<EntityState<F>>,
    pub comm: Vec<Vec<F>>,
    pub timestep: usize,
    pub horizon: usize,
    pub payload: Payload<F>,
}

/// Which action channels an agent owns. Flattened layout is movement (5)
/// followed by communication (`comm`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSpec {
    pub movement: bool,
    pub comm: usize,
}

impl ActionSpec {
    pub fn len(&self) -> usize {
        if self.movement { MOVE_DIM } else { 0 }.saturating_add(self.comm)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvAction<F> {
    pub movement: Option<[F; MOVE_DIM]>,
    pub communication: Option<Vec<F>>,
}

impl<F: Scalar> EnvAction<F> {
    pub fn hold() -> Self {
        let mut m = [F::zero(); MOVE_DIM];
        m[0] = F::one();
        Self {
            movement: Some(m),
            communication: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<F> {
    pub world: WorldState<F>,
    pub rewards: Vec<F>,
    pub observations: Vec<Vec<F>>,
    pub terminal: bool,
    pub collisions: Vec<(usize, usize)>,
    pub captures: Captures,
}

/// `accel_scale * (right - left, up - down)`; the hold channel carries no force.
pub fn decode_action<F: Scalar>(movement: &[F], accel_scale: F) -> Result<Vec2<F>, EnvError> {
    if movement.len() != MOVE_DIM {
        return Err(EnvError::Contract(format!(
            "movement action must have {MOVE_DIM} entries, got {}",
            movement.len()
        )));
    }
    if movement.iter().any(|m| !m.is_finite()) {
        return Err(EnvError::NonFinite { agent: usize::MAX });
    }
    Ok(Vec2::new(movement[1] - movement[2], movement[3] - movement[4]) * accel_scale)
}

#[derive(Debug, Clone)]
struct AgentTemplate<F> {
    role: Role,
    max_speed: F,
    accel: F,
    movable: bool,
    action: ActionSpec,
}

#[derive(Debug, Clone)]
struct Physics<F> {
    dt: F,
    damping: F,
    stiffness: F,
    agent_radius: F,
    landmark_radius: F,
    collision_penalty: F,
    pp: PredatorPreyRewards<F>,
}

/// A configured scenario. Stateless: every operation is a pure function of
/// its arguments plus an explicit random stream.
#[derive(Debug, Clone)]
pub struct Env<F> {
    scenario: ScenarioConfig,
    physics_config: PhysicsConfig,
    physics: Physics<F>,
    templates: Vec<AgentTemplate<F>>,
    n_landmarks: usize,
    obs_lens: Vec<usize>,
}

impl<F: Scalar> Env<F> {
    pub fn new(scenario: ScenarioConfig, physics_config: PhysicsConfig) -> Result<Self, EnvError> {
        scenario.validate()?;
        physics_config.validate()?;
        let p = &physics_config;
        let lit = F::lit;
        let mover = |role, max_speed: f64, accel: f64| AgentTemplate {
            role,
            max_speed: lit(max_speed),
            accel: lit(accel),
            movable: true,
            action: ActionSpec {
                movement: true,
                comm: 0,
            },
        };
        let talker = |role, comm| AgentTemplate {
            role,
            max_speed: lit(p.agent_max_speed),
            accel: F::zero(),
            movable: false,
            action: ActionSpec {
                movement: false,
                comm,
            },
        };
        let (templates, n_landmarks) = match scenario.kind {
            ScenarioKind::CooperativeNavigation => (
                (0..scenario.agents)
                    .map(|_| mover(Role::Navigator, p.agent_max_speed, p.agent_accel))
                    .collect::<Vec<_>>(),
                scenario.landmarks,
            ),
            ScenarioKind::CooperativeCommunication => (
                vec![
                    talker(Role::Speaker, COOP_COMM_DIM),
                    mover(Role::Listener, p.agent_max_speed, p.agent_accel),
                ],
                COLORS,
            ),
            ScenarioKind::PredatorPrey => {
                let mut t: Vec<_> = (0..scenario.predators)
                    .map(|_| mover(Role::Predator, p.predator_max_speed, p.predator_accel))
                    .collect();
                for k in 0..scenario.prey {
                    t.push(if k < scenario.green_prey {
                        mover(
                            Role::GreenPrey,
                            p.green_prey_speed_ratio * p.predator_max_speed,
                            p.green_prey_accel,
                        )
                    } else {
                        mover(
                            Role::BluePrey,
                            p.blue_prey_speed_ratio * p.predator_max_speed,
                            p.blue_prey_accel,
                        )
                    });
                }
                (t, 0)
            }
            ScenarioKind::CovertCommunication => (
                vec![
                    talker(Role::Speaker, COVERT_DIM),
                    talker(Role::Listener, COVERT_DIM),
                    talker(Role::Adversary, COVERT_DIM),
                ],
                0,
            ),
        };
        let physics = Physics {
            dt: lit(p.dt),
            damping: lit(p.damping),
            stiffness: lit(p.contact_stiffness),
            agent_radius: lit(p.agent_radius),
            landmark_radius: lit(p.landmark_radius),
            collision_penalty: lit(p.collision_penalty),
            pp: PredatorPreyRewards {
                blue_capture: lit(p.blue_capture_reward),
                green_capture: lit(p.green_capture_reward),
                boundary_penalty: lit(p.boundary_penalty),
            },
        };
        let mut env = Self {
            scenario,
            physics_config,
            physics,
            templates,
            n_landmarks,
            obs_lens: Vec::new(),
        };
        env.obs_lens = (0..env.n_agents()).map(|i| env.compute_obs_len(i)).collect();
        Ok(env)
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    pub fn physics(&self) -> &PhysicsConfig {
        &self.physics_config
    }

    pub fn n_agents(&self) -> usize {
        self.templates.len()
    }

    pub fn n_landmarks(&self) -> usize {
        self.n_landmarks
    }

    pub fn horizon(&self) -> usize {
        self.scenario.horizon
    }

    pub fn role(&self, agent: usize) -> Role {
        self.templates[agent].role
    }

    pub fn roles(&self) -> Vec<Role> {
        self.templates.iter().map(|t| t.role).collect()
    }

    pub fn action_spec(&self, agent: usize) -> ActionSpec {
        self.templates[agent].action
    }

    pub fn action_len(&self, agent: usize) -> usize {
        self.templates[agent].action.len()
    }

    pub fn obs_len(&self, agent: usize) -> usize {
        self.obs_lens[agent]
    }

    pub fn obs_lens(&self) -> &[usize] {
        &self.obs_lens
    }

    pub fn action_lens(&self) -> Vec<usize> {
        (0..self.n_agents()).map(|i| self.action_len(i)).collect()
    }

    /// Team index per agent: 0 for the learning side (navigators, speaker and
    /// listener, predators), 1 for prey and the covert adversary.
    pub fn team_ids(&self) -> Vec<usize> {
        self.templates
            .iter()
            .map(|t| match t.role {
                Role::BluePrey | Role::GreenPrey | Role::Adversary => 1,
                _ => 0,
            })
            .collect()
    }

    fn base_obs_len(&self) -> usize {
        4 + 2 * self.n_landmarks + 4 * (self.n_agents() - 1)
    }

    fn compute_obs_len(&self, agent: usize) -> usize {
        match (self.scenario.kind, self.templates[agent].role) {
            (ScenarioKind::CovertCommunication, Role::Speaker) => 2 * COVERT_DIM,
            (ScenarioKind::CovertCommunication, Role::Listener) => 2 * COVERT_DIM,
            (ScenarioKind::CovertCommunication, _) => COVERT_DIM,
            (ScenarioKind::CooperativeCommunication, Role::Speaker) => self.base_obs_len() + COLORS,
            (ScenarioKind::CooperativeCommunication, _) => {
                self.base_obs_len() + COLORS * self.n_landmarks + COOP_COMM_DIM
            }
            _ => self.base_obs_len(),
        }
    }

    /// Fresh episode: every position i.i.d. uniform over `[-1, 1]^2`, zero
    /// velocities, scenario payload sampled after the positions.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> WorldState<F> {
        let mut uniform = || F::lit(rng.random_range(-1.0..=1.0));
        let mut agents = Vec::with_capacity(self.n_agents());
        for t in &self.templates {
            let position = Vec2::new(uniform(), uniform());
            agents.push(EntityState {
                position,
                velocity: Vec2::zero(),
                kind: EntityKind::Agent,
                role: t.role,
                radius: self.physics.agent_radius,
                max_speed: t.max_speed,
                accel_scale: t.accel,
                movable: t.movable,
            });
        }
        let landmarks = (0..self.n_landmarks)
            .map(|_| EntityState {
                position: Vec2::new(uniform(), uniform()),
                velocity: Vec2::zero(),
                kind: EntityKind::Landmark,
                role: Role::Landmark,
                radius: self.physics.landmark_radius,
                max_speed: F::zero(),
                accel_scale: F::zero(),
                movable: false,
            })
            .collect();
        let payload = match self.scenario.kind {
            ScenarioKind::CooperativeCommunication => Payload::GoalColor(rng.random_range(0..COLORS)),
            ScenarioKind::CovertCommunication => {
                let mut draw = || {
                    (0..COVERT_DIM)
                        .map(|_| F::lit(rng.random_range(-1.0..=1.0)))
                        .collect::<Vec<_>>()
                };
                let message = draw();
                let key = draw();
                Payload::Covert { message, key }
            }
            _ => Payload::None,
        };
        let comm = self
            .templates
            .iter()
            .map(|t| vec![F::zero(); t.action.comm])
            .collect();
        WorldState {
            agents,
            landmarks,
            comm,
            timestep: 0,
            horizon: self.scenario.horizon,
            payload,
        }
    }

    /// Splits a flat action vector (movement then communication) into channels.
    pub fn decode_flat(&self, agent: usize, flat: &[F]) -> Result<EnvAction<F>, EnvError> {
        let spec = self.action_spec(agent);
        if flat.len() != spec.len() {
            return Err(EnvError::Contract(format!(
                "agent {agent} expects an action of length {}, got {}",
                spec.len(),
                flat.len()
            )));
        }
        let (movement, rest) = if spec.movement {
            let mut m = [F::zero(); MOVE_DIM];
            m.copy_from_slice(&flat[..MOVE_DIM]);
            (Some(m), &flat[MOVE_DIM..])
        } else {
            (None, flat)
        };
        Ok(EnvAction {
            movement,
            communication: (spec.comm > 0).then(|| rest.to_vec()),
        })
    }

    fn check_actions(&self, actions: &[EnvAction<F>]) -> Result<(), EnvError> {
        if actions.len() != self.n_agents() {
            return Err(EnvError::Contract(format!(
                "expected {} actions, got {}",
                self.n_agents(),
                actions.len()
            )));
        }
        for (i, (a, t)) in actions.iter().zip(&self.templates).enumerate() {
            if a.movement.is_some() != t.action.movement {
                return Err(EnvError::Contract(format!(
                    "agent {i} ({:?}) movement channel presence does not match its role",
                    t.role
                )));
            }
            let comm_len = a.communication.as_ref().map_or(0, Vec::len);
            if comm_len != t.action.comm {
                return Err(EnvError::Contract(format!(
                    "agent {i} ({:?}) expects {} communication entries, got {comm_len}",
                    t.role, t.action.comm
                )));
            }
            let finite = a.movement.iter().flatten().chain(a.communication.iter().flatten()).all(|x| x.is_finite());
            if !finite {
                return Err(EnvError::NonFinite { agent: i });
            }
        }
        Ok(())
    }

    /// Advances one timestep.
    ///
    /// Semi-implicit Euler on a damped double integrator: forces come from
    /// the decoded movement action plus a linear spring between overlapping
    /// agents; `v <- (1 - damping) v + a dt`, clamped to `max_speed`, then
    /// `p <- p + v dt`. Rewards are computed on the moved world.
    pub fn step(&self, world: &WorldState<F>, actions: &[EnvAction<F>]) -> Result<StepResult<F>, EnvError> {
        self.check_actions(actions)?;
        if world.timestep >= world.horizon {
            return Err(EnvError::Contract(format!(
                "episode already ended at timestep {}",
                world.timestep
            )));
        }
        let mut next = world.clone();
        let n = next.agents.len();
        let mut force = vec![Vec2::<F>::zero(); n];
        for (i, a) in actions.iter().enumerate() {
            if let Some(m) = &a.movement {
                force[i] = decode_action(m, next.agents[i].accel_scale)
                    .map_err(|_| EnvError::NonFinite { agent: i })?;
            }
        }
        let k = self.physics.stiffness;
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&next.agents[i], &next.agents[j]);
                let delta = a.position - b.position;
                let dist = delta.norm();
                let overlap = a.radius + b.radius - dist;
                if overlap > F::zero() && dist > F::zero() {
                    let push = delta * (k * overlap / dist);
                    force[i] += push;
                    force[j] += -push;
                }
            }
        }
        let dt = self.physics.dt;
        let keep = F::one() - self.physics.damping;
        for (agent, f) in next.agents.iter_mut().zip(&force) {
            if !agent.movable {
                continue;
            }
            let mut v = agent.velocity * keep + *f * dt;
            let speed = v.norm();
            if speed > agent.max_speed {
                v = v * (agent.max_speed / speed);
                if v.norm() > agent.max_speed {
                    v = v * (F::one() - F::epsilon());
                }
            }
            agent.velocity = v;
            agent.position += v * dt;
        }
        for (slot, a) in next.comm.iter_mut().zip(actions) {
            if let Some(c) = &a.communication {
                slot.clone_from(c);
            }
        }
        next.timestep += 1;

        let collisions = detect_collisions(&next);
        let mut captures = Captures::default();
        let rewards = match self.scenario.kind {
            ScenarioKind::CooperativeNavigation => {
                reward_cooperative_navigation(&next, &collisions, self.physics.collision_penalty)
            }
            ScenarioKind::CooperativeCommunication => reward_cooperative_communication(&next),
            ScenarioKind::PredatorPrey => {
                let (r, c) = reward_predator_prey(&next, &collisions, &self.physics.pp);
                captures = c;
                r
            }
            ScenarioKind::CovertCommunication => reward_covert_communication(&next),
        };
        let observations = (0..n).map(|i| self.observe(&next, i)).collect();
        let terminal = next.timestep == next.horizon;
        Ok(StepResult {
            world: next,
            rewards,
            observations,
            terminal,
            collisions,
            captures,
        })
    }

    pub fn observe_all(&self, world: &WorldState<F>) -> Vec<Vec<F>> {
        (0..self.n_agents()).map(|i| self.observe(world, i)).collect()
    }

    /// Observation vector for `agent`; layout documented at module level.
    ///
    /// # Panics
    /// If `agent` is out of range.
    pub fn observe(&self, world: &WorldState<F>, agent: usize) -> Vec<F> {
        assert!(agent < world.agents.len(), "agent index {agent} out of range");
        let mut obs = Vec::with_capacity(self.obs_lens[agent]);
        let speaker_comm = || {
            world
                .agents
                .iter()
                .position(|a| a.role == Role::Speaker)
                .map(|s| world.comm[s].clone())
                .unwrap_or_default()
        };
        if self.scenario.kind == ScenarioKind::CovertCommunication {
            let (message, key) = match &world.payload {
                Payload::Covert { message, key } => (message.as_slice(), key.as_slice()),
                _ => (&[][..], &[][..]),
            };
            match world.agents[agent].role {
                Role::Speaker => {
                    obs.extend_from_slice(message);
                    obs.extend_from_slice(key);
                }
                Role::Listener => {
                    obs.extend_from_slice(key);
                    obs.extend(speaker_comm());
                }
                _ => obs.extend(speaker_comm()),
            }
            return obs;
        }
        let me = &world.agents[agent];
        obs.extend([me.velocity.x, me.velocity.y, me.position.x, me.position.y]);
        for l in &world.landmarks {
            let d = l.position - me.position;
            obs.extend([d.x, d.y]);
        }
        for (j, other) in world.agents.iter().enumerate() {
            if j == agent {
                continue;
            }
            let dp = other.position - me.position;
            let dv = other.velocity - me.velocity;
            obs.extend([dp.x, dp.y, dv.x, dv.y]);
        }
        if self.scenario.kind == ScenarioKind::CooperativeCommunication {
            let one_hot = |c: usize| (0..COLORS).map(move |k| if k == c { F::one() } else { F::zero() });
            match me.role {
                Role::Speaker => {
                    if let Payload::GoalColor(g) = world.payload {
                        obs.extend(one_hot(g));
                    }
                }
                _ => {
                    for l in 0..world.landmarks.len() {
                        obs.extend(one_hot(l % COLORS));
                    }
                    obs.extend(speaker_comm());
                }
            }
        }
        obs
    }
}

#[cfg(test)]
mod tests;
