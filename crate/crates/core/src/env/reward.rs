//! Per-scenario reward functions, evaluated on the post-move world.

use super::{Payload, Role, WorldState};
use crate::Scalar;

/// Agent pairs `(i, j)`, `i < j`, whose circles overlap strictly.
pub fn detect_collisions<F: Scalar>(world: &WorldState<F>) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..world.agents.len() {
        for j in i + 1..world.agents.len() {
            let (a, b) = (&world.agents[i], &world.agents[j]);
            let dist = (a.position - b.position).norm();
            if dist < a.radius + b.radius {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Shared `-sum_l min_i |p_i - p_l|`, plus `-penalty` to each member of every
/// colliding pair.
pub fn reward_cooperative_navigation<F: Scalar>(
    world: &WorldState<F>,
    collisions: &[(usize, usize)],
    collision_penalty: F,
) -> Vec<F> {
    let coverage: F = world
        .landmarks
        .iter()
        .map(|l| {
            world
                .agents
                .iter()
                .map(|a| (a.position - l.position).norm())
                .fold(F::infinity(), F::min)
        })
        .sum();
    let mut rewards = vec![-coverage; world.agents.len()];
    for &(i, j) in collisions {
        rewards[i] = rewards[i] - collision_penalty;
        rewards[j] = rewards[j] - collision_penalty;
    }
    rewards
}

/// Speaker and listener both receive minus the squared listener-to-goal distance.
pub fn reward_cooperative_communication<F: Scalar>(world: &WorldState<F>) -> Vec<F> {
    let goal = match world.payload {
        Payload::GoalColor(g) => g,
        _ => return vec![F::zero(); world.agents.len()],
    };
    let listener = world
        .agents
        .iter()
        .find(|a| a.role == Role::Listener)
        .expect("cooperative communication world has a listener");
    let d2 = (listener.position - world.landmarks[goal].position).norm_sq();
    vec![-d2; world.agents.len()]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredatorPreyRewards<F> {
    pub blue_capture: F,
    pub green_capture: F,
    pub boundary_penalty: F,
}

/// Capture events in one step, counted per colliding predator-prey pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Captures {
    pub green: usize,
    pub blue: usize,
}

/// Every colliding predator-prey pair pays its capture value to every predator
/// and charges it to the captured prey; prey outside `[-1, 1]^2` lose
/// `boundary_penalty * max(0, |p| - 1)^2` per coordinate.
pub fn reward_predator_prey<F: Scalar>(
    world: &WorldState<F>,
    collisions: &[(usize, usize)],
    params: &PredatorPreyRewards<F>,
) -> (Vec<F>, Captures) {
    let n = world.agents.len();
    let mut rewards = vec![F::zero(); n];
    let mut captures = Captures::default();
    let mut predator_gain = F::zero();
    for &(i, j) in collisions {
        let (ri, rj) = (world.agents[i].role, world.agents[j].role);
        let prey = match (ri, rj) {
            (Role::Predator, r) if r.is_prey() => j,
            (r, Role::Predator) if r.is_prey() => i,
            _ => continue,
        };
        let value = if world.agents[prey].role == Role::GreenPrey {
            captures.green += 1;
            params.green_capture
        } else {
            captures.blue += 1;
            params.blue_capture
        };
        predator_gain = predator_gain + value;
        rewards[prey] = rewards[prey] - value;
    }
    let one = F::one();
    for (k, agent) in world.agents.iter().enumerate() {
        match agent.role {
            Role::Predator => rewards[k] = rewards[k] + predator_gain,
            r if r.is_prey() => {
                let excess = |c: F| {
                    let e = (c.abs() - one).max(F::zero());
                    e * e
                };
                let pen = excess(agent.position.x) + excess(agent.position.y);
                rewards[k] = rewards[k] - params.boundary_penalty * pen;
            }
            _ => {}
        }
    }
    (rewards, captures)
}

/// Speaker/listener: `-|m - l|^2 + |m - v|^2`; adversary: `-|m - v|^2`, where
/// `l` and `v` are the listener's and adversary's current outputs.
pub fn reward_covert_communication<F: Scalar>(world: &WorldState<F>) -> Vec<F> {
    let message = match &world.payload {
        Payload::Covert { message, .. } => message,
        _ => return vec![F::zero(); world.agents.len()],
    };
    let find = |role: Role| {
        world
            .agents
            .iter()
            .position(|a| a.role == role)
            .expect("covert communication world has all three roles")
    };
    let sq_dist = |v: &[F]| -> F {
        message
            .iter()
            .zip(v)
            .map(|(m, x)| (*m - *x) * (*m - *x))
            .sum()
    };
    let listener_err = sq_dist(&world.comm[find(Role::Listener)]);
    let adversary_err = sq_dist(&world.comm[find(Role::Adversary)]);
    world
        .agents
        .iter()
        .map(|a| match a.role {
            Role::Adversary => -adversary_err,
            _ => adversary_err - listener_err,
        })
        .collect()
}
