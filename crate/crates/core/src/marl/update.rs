//! Per-agent critic and actor updates over one minibatch.

use rand::Rng;

use super::bias::{bias_in_place, BiasConfig, BiasStats, BiasVariant, BiasWorkspace, JointLayout};
use super::learner::{squash, AgentLearner};
use super::{MarlError, TeamSpec};
use crate::nn::{adam_step, BackwardScratch, ForwardTrace, ParamGrads};
use crate::replay::Minibatch;
use crate::Scalar;

/// Everything an update needs besides the learners themselves.
#[derive(Debug, Clone, Copy)]
pub struct UpdateContext<'a, F> {
    pub layout: &'a JointLayout,
    pub team: &'a TeamSpec,
    /// Variant used by the agent being updated.
    pub variant: BiasVariant,
    pub bias: BiasConfig<F>,
    pub gamma: F,
}

#[derive(Debug, Clone, Default)]
pub struct UpdateWorkspace<F> {
    bias: BiasWorkspace<F>,
    input: Vec<F>,
    critic_trace: ForwardTrace<F>,
    actor_trace: ForwardTrace<F>,
    scratch: BackwardScratch<F>,
    grad: Vec<F>,
    raw_grad: Vec<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorUpdate<F> {
    /// Euclidean norm of the minibatch policy gradient.
    pub policy_grad_norm: F,
    pub bias: BiasStats,
}

fn check_agent<F>(ctx: &UpdateContext<'_, F>, mb_agents: usize, agent: usize) -> Result<(), MarlError> {
    if agent >= ctx.layout.n_agents() || mb_agents != ctx.layout.n_agents() {
        return Err(MarlError::Layout(format!(
            "agent {agent} / minibatch with {mb_agents} agents does not fit a {}-agent layout",
            ctx.layout.n_agents()
        )));
    }
    Ok(())
}

/// Bootstrapped targets `y_b = r_i + gamma * Q'_i(o', a'_i, biased a'_{-i})`.
///
/// Next actions come from every agent's target actor; the other agents'
/// next actions are biased with agent `agent`'s target critic.
pub fn critic_target<F: Scalar, R: Rng + ?Sized>(
    mb: &Minibatch<F>,
    agent: usize,
    learners: &[AgentLearner<F>],
    ctx: &UpdateContext<'_, F>,
    rng: &mut R,
    ws: &mut UpdateWorkspace<F>,
) -> Result<Vec<F>, MarlError> {
    check_agent(ctx, mb.layout().n_agents(), agent)?;
    if learners.len() != ctx.layout.n_agents() {
        return Err(MarlError::Layout(format!(
            "{} learners for a {}-agent layout",
            learners.len(),
            ctx.layout.n_agents()
        )));
    }
    let layout = ctx.layout;
    let target_critic = &learners[agent].target_critic;
    let mut targets = Vec::with_capacity(mb.len());
    for b in 0..mb.len() {
        let next_obs = mb.joint_next_obs(b);
        ws.input.clear();
        ws.input.extend_from_slice(next_obs);
        ws.input.resize(layout.input_len(), F::zero());
        for (k, l) in learners.iter().enumerate() {
            let raw = l.target_actor.forward_into(&next_obs[layout.obs_range(k)], &mut ws.actor_trace)?;
            for (slot, r) in ws.input[layout.act_range(k)].iter_mut().zip(raw) {
                *slot = squash(*r);
            }
        }
        bias_in_place(
            target_critic,
            layout,
            &mut ws.input,
            agent,
            ctx.team,
            ctx.variant,
            &ctx.bias,
            rng,
            &mut ws.bias,
            None,
        )?;
        let q = target_critic.forward_into(&ws.input, &mut ws.critic_trace)?[0];
        targets.push(mb.rewards(b)[agent] + ctx.gamma * q);
    }
    Ok(targets)
}

/// One Adam step on `L = mean_b (Q_i(o_b, a_b) - y_b)^2` using the stored,
/// unbiased joint actions. Returns the loss before the step.
pub fn critic_update<F: Scalar>(
    mb: &Minibatch<F>,
    agent: usize,
    learner: &mut AgentLearner<F>,
    targets: &[F],
    lr: F,
    ws: &mut UpdateWorkspace<F>,
) -> Result<F, MarlError> {
    if targets.len() != mb.len() || mb.is_empty() {
        return Err(MarlError::Layout(format!(
            "{} targets for a minibatch of {}",
            targets.len(),
            mb.len()
        )));
    }
    let inv_b = F::one() / F::lit(mb.len() as f64);
    let two = F::lit(2.0);
    let mut grads = ParamGrads::zeros_like(&learner.critic);
    let mut loss = F::zero();
    for (b, y) in targets.iter().enumerate() {
        let q = learner.critic.forward_into(mb.obs_actions(b), &mut ws.critic_trace)?[0];
        let diff = q - *y;
        loss = loss + diff * diff;
        learner
            .critic
            .backward_accumulate(&ws.critic_trace, &[two * diff * inv_b], Some(&mut grads), None, &mut ws.scratch)?;
    }
    let loss = loss * inv_b;
    if !loss.is_finite() {
        return Err(MarlError::NonFiniteLoss { agent });
    }
    adam_step(&mut learner.critic, &grads, &mut learner.critic_opt, lr)?;
    Ok(loss)
}

/// One Adam ascent step on `mean_b Q_i(o_b, mu_i(o_i,b), biased a_{-i,b})`.
///
/// Other agents' stored actions are biased with the online critic evaluated
/// at the stored joint action; they are constants for the actor gradient,
/// which flows only through agent `agent`'s own action slot.
pub fn actor_update<F: Scalar, R: Rng + ?Sized>(
    mb: &Minibatch<F>,
    agent: usize,
    learner: &mut AgentLearner<F>,
    ctx: &UpdateContext<'_, F>,
    lr: F,
    rng: &mut R,
    ws: &mut UpdateWorkspace<F>,
) -> Result<ActorUpdate<F>, MarlError> {
    check_agent(ctx, mb.layout().n_agents(), agent)?;
    if mb.is_empty() {
        return Err(MarlError::Layout("empty minibatch".into()));
    }
    let layout = ctx.layout;
    let own = layout.act_range(agent);
    let inv_b = F::one() / F::lit(mb.len() as f64);
    let mut grads = ParamGrads::zeros_like(&learner.actor);
    let mut stats = BiasStats::default();
    ws.grad.resize(layout.input_len(), F::zero());
    for b in 0..mb.len() {
        ws.input.clear();
        ws.input.extend_from_slice(mb.obs_actions(b));
        bias_in_place(
            &learner.critic,
            layout,
            &mut ws.input,
            agent,
            ctx.team,
            ctx.variant,
            &ctx.bias,
            rng,
            &mut ws.bias,
            Some(&mut stats),
        )?;
        let obs = &mb.joint_obs(b)[layout.obs_range(agent)];
        let raw = learner.actor.forward_into(obs, &mut ws.actor_trace)?;
        for (slot, r) in ws.input[own.clone()].iter_mut().zip(raw) {
            *slot = squash(*r);
        }
        learner.critic.forward_into(&ws.input, &mut ws.critic_trace)?;
        learner
            .critic
            .backward_accumulate(&ws.critic_trace, &[F::one()], None, Some(&mut ws.grad), &mut ws.scratch)?;
        // Descent on -Q: d(-Q)/d raw = -dQ/da * (1 - a^2).
        ws.raw_grad.clear();
        ws.raw_grad.extend(
            ws.grad[own.clone()]
                .iter()
                .zip(&ws.input[own.clone()])
                .map(|(g, a)| -*g * (F::one() - *a * *a) * inv_b),
        );
        learner
            .actor
            .backward_accumulate(&ws.actor_trace, &ws.raw_grad, Some(&mut grads), None, &mut ws.scratch)?;
    }
    if grads.first_non_finite_layer().is_some() {
        return Err(MarlError::NonFiniteGradient { agent });
    }
    let policy_grad_norm = grads.norm();
    adam_step(&mut learner.actor, &grads, &mut learner.actor_opt, lr)?;
    Ok(ActorUpdate {
        policy_grad_norm,
        bias: stats,
    })
}
