//! Friend-or-foe action biasing.
//!
//! One backward pass through agent `i`'s critic gives `g = dQ_i/da` at the
//! stored joint action. Every other agent's block is then moved by a step of
//! fixed relative length along its own gradient block:
//!
//! `a_k <- a_k + s_k * delta_k * |a_k| * g_k / |g_k|`
//!
//! with `s_k = +1` (towards higher `Q_i`) for allies and `-1` for enemies
//! under F2DDPG. The other variants only change how `s_k` and `delta_k` are
//! picked. Blocks where either norm is zero are left alone.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MarlError, Relation, TeamSpec};
use crate::metrics::cosine_similarity;
use crate::nn::{BackwardScratch, ForwardTrace, Mlp};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasVariant {
    /// No biasing.
    Maddpg,
    /// Every other agent pushed down `Q_i`.
    M3ddpg,
    /// Every other agent pushed up `Q_i`.
    AllPlus,
    /// Fair coin per agent per call.
    RandomSign,
    /// Allies up, enemies down.
    F2ddpg,
}

impl BiasVariant {
    pub const ALL: [BiasVariant; 5] = [
        BiasVariant::Maddpg,
        BiasVariant::M3ddpg,
        BiasVariant::AllPlus,
        BiasVariant::RandomSign,
        BiasVariant::F2ddpg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Maddpg => "maddpg",
            Self::M3ddpg => "m3ddpg",
            Self::AllPlus => "all_plus",
            Self::RandomSign => "random_sign",
            Self::F2ddpg => "f2ddpg",
        }
    }
}

/// Step sizes `delta_A` (allies, or `+` signs) and `delta_E` (enemies, or `-` signs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasConfig<F> {
    pub delta_ally: F,
    pub delta_enemy: F,
}

impl<F: Scalar> BiasConfig<F> {
    pub fn new(delta_ally: F, delta_enemy: F) -> Result<Self, MarlError> {
        if !(delta_ally >= F::zero() && delta_enemy >= F::zero()) || !delta_ally.is_finite() || !delta_enemy.is_finite() {
            return Err(MarlError::Config(format!(
                "bias step sizes must be finite and non-negative, got {delta_ally} and {delta_enemy}"
            )));
        }
        Ok(Self {
            delta_ally,
            delta_enemy,
        })
    }

    pub fn zero() -> Self {
        Self {
            delta_ally: F::zero(),
            delta_enemy: F::zero(),
        }
    }
}

/// Position of every agent's observation and action inside the centralized
/// critic input: all observations in agent order, then all actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointLayout {
    obs_lens: Vec<usize>,
    act_lens: Vec<usize>,
    obs_offsets: Vec<usize>,
    act_offsets: Vec<usize>,
    len: usize,
}

impl JointLayout {
    pub fn new(obs_lens: Vec<usize>, act_lens: Vec<usize>) -> Result<Self, MarlError> {
        if obs_lens.len() != act_lens.len() || obs_lens.is_empty() {
            return Err(MarlError::Layout(format!(
                "need one observation and one action length per agent, got {} and {}",
                obs_lens.len(),
                act_lens.len()
            )));
        }
        let mut at = 0;
        let obs_offsets = obs_lens
            .iter()
            .map(|n| {
                let o = at;
                at += n;
                o
            })
            .collect();
        let act_offsets = act_lens
            .iter()
            .map(|n| {
                let o = at;
                at += n;
                o
            })
            .collect();
        Ok(Self {
            obs_lens,
            act_lens,
            obs_offsets,
            act_offsets,
            len: at,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.obs_lens.len()
    }

    pub fn input_len(&self) -> usize {
        self.len
    }

    pub fn obs_lens(&self) -> &[usize] {
        &self.obs_lens
    }

    pub fn act_lens(&self) -> &[usize] {
        &self.act_lens
    }

    pub fn obs_total(&self) -> usize {
        self.obs_lens.iter().sum()
    }

    /// Range of agent `k`'s observation inside the critic input (and inside
    /// a bare joint-observation vector).
    pub fn obs_range(&self, k: usize) -> Range<usize> {
        self.obs_offsets[k]..self.obs_offsets[k] + self.obs_lens[k]
    }

    pub fn act_range(&self, k: usize) -> Range<usize> {
        self.act_offsets[k]..self.act_offsets[k] + self.act_lens[k]
    }

    /// Concatenates joint observation and joint action into a critic input.
    pub fn critic_input<F: Scalar>(&self, obs: &[Vec<F>], actions: &[Vec<F>]) -> Result<Vec<F>, MarlError> {
        let n = self.n_agents();
        if obs.len() != n || actions.len() != n {
            return Err(MarlError::Layout(format!(
                "expected {n} observations and actions, got {} and {}",
                obs.len(),
                actions.len()
            )));
        }
        let mut out = Vec::with_capacity(self.len);
        for (k, o) in obs.iter().enumerate() {
            if o.len() != self.obs_lens[k] {
                return Err(MarlError::Layout(format!(
                    "agent {k} observation has length {}, expected {}",
                    o.len(),
                    self.obs_lens[k]
                )));
            }
            out.extend_from_slice(o);
        }
        for (k, a) in actions.iter().enumerate() {
            if a.len() != self.act_lens[k] {
                return Err(MarlError::Layout(format!(
                    "agent {k} action has length {}, expected {}",
                    a.len(),
                    self.act_lens[k]
                )));
            }
            out.extend_from_slice(a);
        }
        Ok(out)
    }
}

/// Reusable buffers for repeated critic gradient evaluations.
#[derive(Debug, Clone, Default)]
pub struct BiasWorkspace<F> {
    pub(crate) trace: ForwardTrace<F>,
    pub(crate) scratch: BackwardScratch<F>,
    pub(crate) grad: Vec<F>,
}

/// Running statistics over biased blocks, for diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BiasStats {
    /// Sum and count of `cos(a_k, g_k)` over ally blocks with defined cosine.
    pub ally_cosine_sum: f64,
    pub ally_cosine_count: usize,
    pub shift_norm_sum: f64,
    pub shifted_blocks: usize,
}

impl BiasStats {
    pub fn mean_ally_cosine(&self) -> Option<f64> {
        (self.ally_cosine_count > 0).then(|| self.ally_cosine_sum / self.ally_cosine_count as f64)
    }

    pub fn mean_shift_norm(&self) -> f64 {
        if self.shifted_blocks == 0 {
            0.0
        } else {
            self.shift_norm_sum / self.shifted_blocks as f64
        }
    }
}

/// Sign and step size for block `k` as seen by agent `i`.
fn rule<F: Scalar, R: Rng + ?Sized>(
    variant: BiasVariant,
    relation: Relation,
    cfg: &BiasConfig<F>,
    rng: &mut R,
) -> (F, F) {
    let up = (F::one(), cfg.delta_ally);
    let down = (-F::one(), cfg.delta_enemy);
    match variant {
        BiasVariant::Maddpg => (F::zero(), F::zero()),
        BiasVariant::M3ddpg => down,
        BiasVariant::AllPlus => up,
        BiasVariant::RandomSign => {
            if rng.random_bool(0.5) {
                up
            } else {
                down
            }
        }
        BiasVariant::F2ddpg => match relation {
            Relation::Ally => up,
            _ => down,
        },
    }
}

/// Biases, in place, every block of `input` other than agent `agent`'s own
/// action. `input` is a full critic input (observations then actions).
#[allow(clippy::too_many_arguments)]
pub fn bias_in_place<F: Scalar, R: Rng + ?Sized>(
    critic: &Mlp<F>,
    layout: &JointLayout,
    input: &mut [F],
    agent: usize,
    team: &TeamSpec,
    variant: BiasVariant,
    cfg: &BiasConfig<F>,
    rng: &mut R,
    ws: &mut BiasWorkspace<F>,
    mut stats: Option<&mut BiasStats>,
) -> Result<(), MarlError> {
    if variant == BiasVariant::Maddpg || layout.n_agents() == 1 {
        return Ok(());
    }
    if input.len() != layout.input_len() || critic.input_dim() != layout.input_len() || critic.output_dim() != 1 {
        return Err(MarlError::Layout(format!(
            "critic input of length {} does not match layout length {} / critic dims {:?}",
            input.len(),
            layout.input_len(),
            critic.dims()
        )));
    }
    if agent >= layout.n_agents() {
        return Err(MarlError::Layout(format!("agent index {agent} out of range")));
    }
    critic.forward_into(input, &mut ws.trace)?;
    ws.grad.resize(input.len(), F::zero());
    critic.backward_accumulate(&ws.trace, &[F::one()], None, Some(&mut ws.grad), &mut ws.scratch)?;
    for k in (0..layout.n_agents()).filter(|&k| k != agent) {
        let range = layout.act_range(k);
        let relation = team.relation(agent, k);
        let (sign, step) = rule(variant, relation, cfg, rng);
        let g = &ws.grad[range.clone()];
        if g.iter().any(|x| !x.is_finite()) {
            return Err(MarlError::NonFiniteGradient { agent: k });
        }
        let a = &mut input[range];
        if let Some(st) = stats.as_deref_mut() {
            if relation == Relation::Ally {
                if let Some(c) = cosine_similarity(a, g) {
                    st.ally_cosine_sum += c.to_f64_lossy();
                    st.ally_cosine_count += 1;
                }
            }
        }
        let g_norm = F::norm2(g);
        let a_norm = F::norm2(a);
        if g_norm == F::zero() || a_norm == F::zero() {
            continue;
        }
        let scale = sign * step * a_norm / g_norm;
        F::axpy(scale, g, a);
        if let Some(st) = stats.as_deref_mut() {
            st.shift_norm_sum += (step * a_norm).to_f64_lossy();
            st.shifted_blocks += 1;
        }
    }
    Ok(())
}

/// Returns the joint action with every other agent's block biased for agent
/// `agent`'s critic. Agent `agent`'s own block is returned unchanged.
#[allow(clippy::too_many_arguments)]
pub fn bias_joint_actions<F: Scalar, R: Rng + ?Sized>(
    critic: &Mlp<F>,
    layout: &JointLayout,
    joint_obs: &[Vec<F>],
    joint_actions: &[Vec<F>],
    agent: usize,
    team: &TeamSpec,
    variant: BiasVariant,
    cfg: &BiasConfig<F>,
    rng: &mut R,
) -> Result<Vec<Vec<F>>, MarlError> {
    let mut input = layout.critic_input(joint_obs, joint_actions)?;
    let mut ws = BiasWorkspace::default();
    bias_in_place(critic, layout, &mut input, agent, team, variant, cfg, rng, &mut ws, None)?;
    Ok((0..layout.n_agents()).map(|k| input[layout.act_range(k)].to_vec()).collect())
}
