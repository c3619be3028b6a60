use rand::Rng;
use rand_distr::StandardNormal;

use super::MarlError;
use crate::nn::{AdamConfig, AdamState, Mlp};
use crate::Scalar;

/// One agent's decentralized actor, centralized critic, their target copies
/// and optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentLearner<F> {
    pub actor: Mlp<F>,
    pub critic: Mlp<F>,
    pub target_actor: Mlp<F>,
    pub target_critic: Mlp<F>,
    pub actor_opt: AdamState<F>,
    pub critic_opt: AdamState<F>,
    /// Standard deviation of the Gaussian exploration noise.
    pub noise_scale: F,
}

impl<F: Scalar> AgentLearner<F> {
    /// Xavier-initialized actor `obs -> hidden.. -> action` and critic
    /// `joint -> hidden.. -> 1`; targets start as exact copies.
    pub fn new<R: Rng + ?Sized>(
        obs_len: usize,
        action_len: usize,
        critic_input_len: usize,
        actor_hidden: &[usize],
        critic_hidden: &[usize],
        adam: AdamConfig,
        rng: &mut R,
    ) -> Result<Self, MarlError> {
        let dims = |input: usize, hidden: &[usize], out: usize| {
            std::iter::once(input).chain(hidden.iter().copied()).chain(std::iter::once(out)).collect::<Vec<_>>()
        };
        let actor = Mlp::xavier_uniform(&dims(obs_len, actor_hidden, action_len), rng)?;
        let critic = Mlp::xavier_uniform(&dims(critic_input_len, critic_hidden, 1), rng)?;
        Ok(Self {
            actor_opt: AdamState::new(&actor, adam),
            critic_opt: AdamState::new(&critic, adam),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            noise_scale: F::zero(),
        })
    }

    pub fn obs_len(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_len(&self) -> usize {
        self.actor.output_dim()
    }

    /// `target <- tau * online + (1 - tau) * target` for actor and critic.
    pub fn soft_update_targets(&mut self, tau: F) -> Result<(), MarlError> {
        self.target_actor.soft_update(&self.actor, tau)?;
        self.target_critic.soft_update(&self.critic, tau)?;
        Ok(())
    }
}

/// Bounded map applied to every actor output component.
#[inline]
pub fn squash<F: Scalar>(x: F) -> F {
    x.tanh()
}

/// Deterministic policy output, squashed. With `explore`, i.i.d. Gaussian
/// noise of the learner's scale is added before squashing.
pub fn select_action<F: Scalar, R: Rng + ?Sized>(
    learner: &AgentLearner<F>,
    obs: &[F],
    rng: &mut R,
    explore: bool,
) -> Result<Vec<F>, MarlError> {
    let mut raw = learner.actor.predict(obs)?;
    if explore {
        for r in &mut raw {
            let n: f64 = rng.sample(StandardNormal);
            *r = *r + learner.noise_scale * F::lit(n);
        }
    }
    Ok(raw.into_iter().map(squash).collect())
}
