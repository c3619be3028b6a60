//! Fixed-capacity FIFO experience store.
//!
//! Transitions are flattened into fixed-width records held in one ring:
//! `[obs_0 .. obs_{N-1} | act_0 .. act_{N-1} | r_0 .. r_{N-1} | next_obs_0 ..]`.
//! The joint observation and joint action blocks are contiguous, which is
//! exactly the centralized critic's input layout.

use rand::Rng;
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("transition layout: {0}")]
    Layout(String),
    #[error("buffer holds {occupancy} transitions, minibatch needs {requested}")]
    NotReady { occupancy: usize, requested: usize },
    #[error("replay capacity must be positive")]
    ZeroCapacity,
}

/// One stored experience.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<F> {
    pub obs: Vec<Vec<F>>,
    pub actions: Vec<Vec<F>>,
    pub rewards: Vec<F>,
    pub next_obs: Vec<Vec<F>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordLayout {
    pub obs_lens: Vec<usize>,
    pub act_lens: Vec<usize>,
}

impl RecordLayout {
    pub fn new(obs_lens: Vec<usize>, act_lens: Vec<usize>) -> Self {
        Self { obs_lens, act_lens }
    }

    pub fn n_agents(&self) -> usize {
        self.obs_lens.len()
    }

    pub fn obs_total(&self) -> usize {
        self.obs_lens.iter().sum()
    }

    pub fn act_total(&self) -> usize {
        self.act_lens.iter().sum()
    }

    pub fn width(&self) -> usize {
        2 * self.obs_total() + self.act_total() + self.n_agents()
    }

    fn check(&self, t: &Transition<impl Scalar>) -> Result<(), ReplayError> {
        let n = self.n_agents();
        if t.obs.len() != n || t.actions.len() != n || t.rewards.len() != n || t.next_obs.len() != n {
            return Err(ReplayError::Layout(format!(
                "expected {n} agents, got obs {} actions {} rewards {} next_obs {}",
                t.obs.len(),
                t.actions.len(),
                t.rewards.len(),
                t.next_obs.len()
            )));
        }
        for i in 0..n {
            if t.obs[i].len() != self.obs_lens[i] || t.next_obs[i].len() != self.obs_lens[i] {
                return Err(ReplayError::Layout(format!(
                    "agent {i} observation length should be {}",
                    self.obs_lens[i]
                )));
            }
            if t.actions[i].len() != self.act_lens[i] {
                return Err(ReplayError::Layout(format!(
                    "agent {i} action length should be {}, got {}",
                    self.act_lens[i],
                    t.actions[i].len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer<F> {
    layout: RecordLayout,
    capacity: usize,
    data: Vec<F>,
    /// Physical slot of the oldest record.
    head: usize,
    len: usize,
}

impl<F: Scalar> ReplayBuffer<F> {
    pub fn new(layout: RecordLayout, capacity: usize) -> Result<Self, ReplayError> {
        if capacity == 0 {
            return Err(ReplayError::ZeroCapacity);
        }
        Ok(Self {
            layout,
            capacity,
            data: Vec::new(),
            head: 0,
            len: 0,
        })
    }

    pub fn layout(&self) -> &RecordLayout {
        &self.layout
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_ready(&self, batch: usize) -> bool {
        self.len >= batch && batch > 0
    }

    /// Appends, evicting the oldest record once full.
    pub fn push(&mut self, t: &Transition<F>) -> Result<(), ReplayError> {
        self.layout.check(t)?;
        let w = self.layout.width();
        let slot = if self.len < self.capacity {
            let s = (self.head + self.len) % self.capacity;
            self.len += 1;
            s
        } else {
            let s = self.head;
            self.head = (self.head + 1) % self.capacity;
            s
        };
        // Storage grows lazily up to capacity * width.
        if self.data.len() < (slot + 1) * w {
            self.data.resize((slot + 1) * w, F::zero());
        }
        let rec = &mut self.data[slot * w..(slot + 1) * w];
        let mut at = 0;
        for part in t.obs.iter().chain(&t.actions).chain(std::iter::once(&t.rewards)).chain(&t.next_obs) {
            rec[at..at + part.len()].copy_from_slice(part);
            at += part.len();
        }
        Ok(())
    }

    fn record(&self, logical: usize) -> &[F] {
        let w = self.layout.width();
        let slot = (self.head + logical) % self.capacity;
        &self.data[slot * w..(slot + 1) * w]
    }

    /// Transition at logical index (0 = oldest).
    pub fn get(&self, index: usize) -> Option<Transition<F>> {
        (index < self.len).then(|| unflatten(&self.layout, self.record(index)))
    }

    /// `batch` indices drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Minibatch<F>, ReplayError> {
        if !self.is_ready(batch) {
            return Err(ReplayError::NotReady {
                occupancy: self.len,
                requested: batch,
            });
        }
        let indices: Vec<usize> = (0..batch).map(|_| rng.random_range(0..self.len)).collect();
        let w = self.layout.width();
        let mut records = Vec::with_capacity(batch * w);
        for &i in &indices {
            records.extend_from_slice(self.record(i));
        }
        Ok(Minibatch {
            layout: self.layout.clone(),
            indices,
            records,
        })
    }
}

fn unflatten<F: Scalar>(layout: &RecordLayout, rec: &[F]) -> Transition<F> {
    let mut at = 0;
    let mut take = |n: usize| {
        let v = rec[at..at + n].to_vec();
        at += n;
        v
    };
    let obs = layout.obs_lens.iter().map(|&n| take(n)).collect();
    let actions = layout.act_lens.iter().map(|&n| take(n)).collect();
    let rewards = take(layout.n_agents());
    let next_obs = layout.obs_lens.iter().map(|&n| take(n)).collect();
    Transition {
        obs,
        actions,
        rewards,
        next_obs,
    }
}

/// `B` gathered records plus the logical indices they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch<F> {
    layout: RecordLayout,
    pub indices: Vec<usize>,
    records: Vec<F>,
}

impl<F: Scalar> Minibatch<F> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn layout(&self) -> &RecordLayout {
        &self.layout
    }

    fn rec(&self, b: usize) -> &[F] {
        let w = self.layout.width();
        &self.records[b * w..(b + 1) * w]
    }

    /// Joint observation followed by joint action: the critic input of sample `b`.
    pub fn obs_actions(&self, b: usize) -> &[F] {
        &self.rec(b)[..self.layout.obs_total() + self.layout.act_total()]
    }

    pub fn joint_obs(&self, b: usize) -> &[F] {
        &self.rec(b)[..self.layout.obs_total()]
    }

    pub fn joint_actions(&self, b: usize) -> &[F] {
        let o = self.layout.obs_total();
        &self.rec(b)[o..o + self.layout.act_total()]
    }

    pub fn rewards(&self, b: usize) -> &[F] {
        let o = self.layout.obs_total() + self.layout.act_total();
        &self.rec(b)[o..o + self.layout.n_agents()]
    }

    pub fn joint_next_obs(&self, b: usize) -> &[F] {
        let o = self.layout.obs_total() + self.layout.act_total() + self.layout.n_agents();
        &self.rec(b)[o..]
    }

    pub fn transition(&self, b: usize) -> Transition<F> {
        unflatten(&self.layout, self.rec(b))
    }

    /// Copy holding samples in the given order (used to check order invariance).
    pub fn permuted(&self, order: &[usize]) -> Self {
        let w = self.layout.width();
        let mut records = Vec::with_capacity(order.len() * w);
        for &b in order {
            records.extend_from_slice(self.rec(b));
        }
        Self {
            layout: self.layout.clone(),
            indices: order.iter().map(|&b| self.indices[b]).collect(),
            records,
        }
    }
}
