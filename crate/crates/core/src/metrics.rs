//! Evaluation rollouts and training diagnostics: greedy returns, capture
//! success rates and the ally-gradient alignment series.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Captures, Env, EnvAction, EnvError, WorldState};
use crate::marl::{select_action, AgentLearner, MarlError};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{0}")]
    Contract(String),
    #[error(transparent)]
    Marl(#[from] MarlError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `<u, v> / (|u| |v|)`, clamped to `[-1, 1]`. `None` when either norm is
/// zero or the lengths differ.
pub fn cosine_similarity<F: Scalar>(u: &[F], v: &[F]) -> Option<F> {
    if u.len() != v.len() {
        return None;
    }
    let nu = F::norm2(u);
    let nv = F::norm2(v);
    if nu == F::zero() || nv == F::zero() {
        return None;
    }
    let c = F::dot(u, v) / (nu * nv);
    c.is_finite().then(|| c.max(-F::one()).min(F::one()))
}

/// Success rate for one capture threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureRate {
    pub threshold: usize,
    /// Episodes with at least `threshold` captures.
    pub episodes: usize,
    pub total: usize,
    pub percent: f64,
}

/// Percentage of episodes whose capture count reaches each threshold.
pub fn capture_stats(counts: &[usize], thresholds: &[usize]) -> Result<Vec<CaptureRate>, MetricsError> {
    if counts.is_empty() {
        return Err(MetricsError::Contract("capture statistics need at least one episode".into()));
    }
    Ok(thresholds
        .iter()
        .map(|&threshold| {
            let episodes = counts.iter().filter(|&&c| c >= threshold).count();
            CaptureRate {
                threshold,
                episodes,
                total: counts.len(),
                percent: 100.0 * episodes as f64 / counts.len() as f64,
            }
        })
        .collect())
}

/// Anything that can pick every agent's action from the current world.
pub trait JointPolicy<F: Scalar> {
    fn act(&mut self, env: &Env<F>, world: &WorldState<F>, obs: &[Vec<F>]) -> Result<Vec<EnvAction<F>>, MetricsError>;
}

/// Noise-free actors.
pub struct Greedy<'a, F>(pub &'a [AgentLearner<F>]);

impl<F: Scalar> JointPolicy<F> for Greedy<'_, F> {
    fn act(&mut self, env: &Env<F>, _world: &WorldState<F>, obs: &[Vec<F>]) -> Result<Vec<EnvAction<F>>, MetricsError> {
        if self.0.len() != env.n_agents() {
            return Err(MetricsError::Contract(format!(
                "{} learners for {} agents",
                self.0.len(),
                env.n_agents()
            )));
        }
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        self.0
            .iter()
            .zip(obs)
            .enumerate()
            .map(|(i, (l, o))| {
                let a = select_action(l, o, &mut unused, false)?;
                Ok(env.decode_flat(i, &a)?)
            })
            .collect()
    }
}

/// Every action component zero, which is what zero-weight actors output.
pub struct ZeroPolicy;

impl<F: Scalar> JointPolicy<F> for ZeroPolicy {
    fn act(&mut self, env: &Env<F>, _world: &WorldState<F>, _obs: &[Vec<F>]) -> Result<Vec<EnvAction<F>>, MetricsError> {
        (0..env.n_agents())
            .map(|i| Ok(env.decode_flat(i, &vec![F::zero(); env.action_len(i)])?))
            .collect()
    }
}

/// Hand-written navigator: agent `i` steers to landmark `i mod L` with a
/// damped proportional controller. Other channels are held at zero.
pub struct ScriptedNavigator {
    pub gain: f64,
    pub damping: f64,
}

impl Default for ScriptedNavigator {
    fn default() -> Self {
        Self { gain: 4.0, damping: 1.5 }
    }
}

impl<F: Scalar> JointPolicy<F> for ScriptedNavigator {
    fn act(&mut self, env: &Env<F>, world: &WorldState<F>, _obs: &[Vec<F>]) -> Result<Vec<EnvAction<F>>, MetricsError> {
        let (kp, kd) = (F::lit(self.gain), F::lit(self.damping));
        (0..env.n_agents())
            .map(|i| {
                let mut flat = vec![F::zero(); env.action_len(i)];
                let spec = env.action_spec(i);
                if spec.movement && !world.landmarks.is_empty() {
                    let agent = &world.agents[i];
                    let goal = world.landmarks[i % world.landmarks.len()].position;
                    let d = (goal - agent.position) * kp - agent.velocity * kd;
                    let clip = |x: F| x.max(F::zero()).min(F::one());
                    flat[1] = clip(d.x);
                    flat[2] = clip(-d.x);
                    flat[3] = clip(d.y);
                    flat[4] = clip(-d.y);
                }
                Ok(env.decode_flat(i, &flat)?)
            })
            .collect()
    }
}

/// Outcome of `E` noise-free evaluation episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    /// `returns[e][i]`: agent `i`'s undiscounted return in episode `e`.
    pub returns: Vec<Vec<f64>>,
    pub captures: Vec<Captures>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl EvalReport {
    pub fn episodes(&self) -> usize {
        self.returns.len()
    }

    /// Mean over agents of each agent's mean return.
    pub fn mean_return(&self) -> f64 {
        self.mean.iter().sum::<f64>() / self.mean.len().max(1) as f64
    }

    /// Mean return over the given agents.
    pub fn mean_return_of(&self, agents: &[usize]) -> f64 {
        agents.iter().map(|&i| self.mean[i]).sum::<f64>() / agents.len().max(1) as f64
    }

    pub fn green_capture_counts(&self) -> Vec<usize> {
        self.captures.iter().map(|c| c.green).collect()
    }

    /// Header: `episode,return_0..,green_captures,blue_captures`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.mean.len();
        write!(w, "episode")?;
        for i in 0..n {
            write!(w, ",return_{i}")?;
        }
        writeln!(w, ",green_captures,blue_captures")?;
        for (e, (r, c)) in self.returns.iter().zip(&self.captures).enumerate() {
            write!(w, "{e}")?;
            for x in r {
                write!(w, ",{x}")?;
            }
            writeln!(w, ",{},{}", c.green, c.blue)?;
        }
        Ok(())
    }
}

/// Runs `episodes` greedy episodes. Resets draw from a stream seeded only by
/// `seed`, so the report is a pure function of policy, scenario and seed.
pub fn evaluate<F: Scalar>(
    env: &Env<F>,
    policy: &mut dyn JointPolicy<F>,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport, MetricsError> {
    if episodes == 0 {
        return Err(MetricsError::Contract("evaluation needs at least one episode".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = env.n_agents();
    let mut returns = Vec::with_capacity(episodes);
    let mut captures = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut world = env.reset(&mut rng);
        let mut obs = env.observe_all(&world);
        let mut ret = vec![0.0; n];
        let mut cap = Captures::default();
        for _ in 0..env.horizon() {
            let actions = policy.act(env, &world, &obs)?;
            let step = env.step(&world, &actions)?;
            for (acc, r) in ret.iter_mut().zip(&step.rewards) {
                *acc += r.to_f64_lossy();
            }
            cap.green += step.captures.green;
            cap.blue += step.captures.blue;
            obs = step.observations;
            world = step.world;
        }
        returns.push(ret);
        captures.push(cap);
    }
    let e = episodes as f64;
    let mean: Vec<f64> = (0..n).map(|i| returns.iter().map(|r| r[i]).sum::<f64>() / e).collect();
    let std = (0..n)
        .map(|i| (returns.iter().map(|r| (r[i] - mean[i]).powi(2)).sum::<f64>() / e).sqrt())
        .collect();
    if mean.iter().any(|m| !m.is_finite()) {
        return Err(MetricsError::Contract("non-finite evaluation return".into()));
    }
    Ok(EvalReport {
        seed,
        returns,
        captures,
        mean,
        std,
    })
}

/// One alignment measurement between an ally's actual action and the
/// critic's gradient with respect to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySample {
    pub update: u64,
    /// `None` when either vector had zero norm.
    pub cosine: Option<f64>,
}

impl SimilaritySample {
    pub fn from_blocks<F: Scalar>(update: u64, action: &[F], gradient: &[F]) -> Self {
        Self {
            update,
            cosine: cosine_similarity(action, gradient).map(Scalar::to_f64_lossy),
        }
    }
}

/// Mean cosine over updates `[start, end)`; `None` if no defined sample fell inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentWindow {
    pub start: u64,
    pub end: u64,
    pub samples: usize,
    pub mean: Option<f64>,
}

/// Partitions `[0, total_updates)` into windows of 1% of `total_updates`
/// (at least one update each) and averages the defined samples in each.
pub fn bias_alignment_series(samples: &[SimilaritySample], total_updates: u64) -> Vec<AlignmentWindow> {
    if total_updates == 0 {
        return Vec::new();
    }
    let width = total_updates.div_ceil(100).max(1);
    let n_windows = total_updates.div_ceil(width) as usize;
    let mut sums = vec![(0.0, 0usize); n_windows];
    for s in samples {
        if let (Some(c), true) = (s.cosine, s.update < total_updates) {
            let w = (s.update / width) as usize;
            sums[w].0 += c;
            sums[w].1 += 1;
        }
    }
    sums.into_iter()
        .enumerate()
        .map(|(w, (sum, count))| {
            let start = w as u64 * width;
            AlignmentWindow {
                start,
                end: (start + width).min(total_updates),
                samples: count,
                mean: (count > 0).then(|| sum / count as f64),
            }
        })
        .collect()
}

/// Header: `window,start_update,end_update,samples,mean_cosine`; empty
/// `mean_cosine` marks a window without defined samples.
pub fn write_alignment_csv<W: Write>(windows: &[AlignmentWindow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "window,start_update,end_update,samples,mean_cosine")?;
    for (i, win) in windows.iter().enumerate() {
        let mean = win.mean.map(|m| m.to_string()).unwrap_or_default();
        writeln!(w, "{i},{},{},{},{mean}", win.start, win.end, win.samples)?;
    }
    Ok(())
}
