//! Versioned binary checkpoints.
//!
//! Layout, all integers and floats little-endian, every float stored as an
//! IEEE-754 `f64` whatever the training precision:
//!
//! ```text
//! magic "F2DDPGCK" | version u32 | precision u8 (4 or 8)
//! config: u64 byte length + UTF-8 TOML
//! counters: episode u64 | env_steps u64 | updates u64
//! 4 rng streams: seed [u8; 32] | stream u64 | word_pos u128
//! agents u64, then per agent:
//!   noise_scale f64
//!   actor, critic, target actor, target critic: layers u64, then per layer
//!     in u64 | out u64 | weights (out*in) | bias (out)
//!   actor Adam, critic Adam: step u64 | beta1 | beta2 | eps | m | v
//! ```
//!
//! The replay buffer is not stored.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{HarnessError, Precision, RunConfig};
use crate::marl::{AgentLearner, Counters, RngSnapshot, RngStreams};
use crate::nn::{AdamState, Dense, LayerGrad, Mlp, ParamGrads};
use crate::Scalar;

pub const MAGIC: &[u8; 8] = b"F2DDPGCK";
pub const VERSION: u32 = 1;

/// Everything needed to resume or evaluate a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<F> {
    pub config: RunConfig,
    pub counters: Counters,
    pub rngs: [RngSnapshot; 4],
    pub learners: Vec<AgentLearner<F>>,
}

/// A checkpoint of either precision.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyCheckpoint {
    F32(Checkpoint<f32>),
    F64(Checkpoint<f64>),
}

impl AnyCheckpoint {
    pub fn config(&self) -> &RunConfig {
        match self {
            Self::F32(c) => &c.config,
            Self::F64(c) => &c.config,
        }
    }

    pub fn counters(&self) -> Counters {
        match self {
            Self::F32(c) => c.counters,
            Self::F64(c) => c.counters,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Self::F32(c) => c.to_bytes(),
            Self::F64(c) => c.to_bytes(),
        }
    }
}

fn precision_of<F: Scalar>() -> Precision {
    if std::mem::size_of::<F>() == 4 {
        Precision::F32
    } else {
        Precision::F64
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, x: u8) {
        self.0.push(x);
    }
    fn u32(&mut self, x: u32) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn usize(&mut self, x: usize) {
        self.u64(x as u64);
    }
    fn u128(&mut self, x: u128) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn float<F: Scalar>(&mut self, x: F) {
        self.0.extend_from_slice(&x.to_f64_lossy().to_le_bytes());
    }
    fn floats<F: Scalar>(&mut self, xs: &[F]) {
        for &x in xs {
            self.float(x);
        }
    }
    fn mlp<F: Scalar>(&mut self, m: &Mlp<F>) {
        self.usize(m.layers().len());
        for l in m.layers() {
            self.usize(l.in_dim());
            self.usize(l.out_dim());
            self.floats(l.weights());
            self.floats(l.bias());
        }
    }
    fn adam<F: Scalar>(&mut self, a: &AdamState<F>) {
        self.u64(a.step);
        self.float(a.beta1);
        self.float(a.beta2);
        self.float(a.eps);
        for g in [&a.m, &a.v] {
            for l in &g.layers {
                self.floats(&l.weights);
                self.floats(&l.bias);
            }
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], HarnessError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            HarnessError::Checkpoint(format!("truncated: needed {n} bytes at offset {}", self.at))
        })?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N], HarnessError> {
        Ok(self.take(N)?.try_into().expect("slice has length N"))
    }
    fn u8(&mut self) -> Result<u8, HarnessError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, HarnessError> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64, HarnessError> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn u128(&mut self) -> Result<u128, HarnessError> {
        Ok(u128::from_le_bytes(self.array()?))
    }
    /// A count that must fit in the remaining bytes at `unit` bytes per item.
    fn count(&mut self, unit: usize) -> Result<usize, HarnessError> {
        let n = self.u64()?;
        let remaining = (self.buf.len() - self.at) as u64;
        if n.saturating_mul(unit.max(1) as u64) > remaining {
            return Err(HarnessError::Checkpoint(format!("implausible count {n} at offset {}", self.at - 8)));
        }
        Ok(n as usize)
    }
    fn float<F: Scalar>(&mut self) -> Result<F, HarnessError> {
        let x = f64::from_le_bytes(self.array()?);
        let y = F::lit(x);
        if y.to_f64_lossy().to_bits() != x.to_bits() && !x.is_nan() {
            return Err(HarnessError::Checkpoint(format!(
                "value {x} is not representable at the checkpoint's precision"
            )));
        }
        Ok(y)
    }
    fn floats<F: Scalar>(&mut self, n: usize) -> Result<Vec<F>, HarnessError> {
        if n.saturating_mul(8) > self.buf.len() - self.at {
            return Err(HarnessError::Checkpoint("truncated float block".into()));
        }
        (0..n).map(|_| self.float()).collect()
    }
    fn mlp<F: Scalar>(&mut self) -> Result<Mlp<F>, HarnessError> {
        let n = self.count(16)?;
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let i = self.count(0)?;
            let o = self.count(0)?;
            let w = self.floats(i.checked_mul(o).ok_or_else(|| HarnessError::Checkpoint("layer too large".into()))?)?;
            let b = self.floats(o)?;
            layers.push(Dense::new(i, o, w, b).map_err(|e| HarnessError::Checkpoint(e.to_string()))?);
        }
        Mlp::from_layers(layers).map_err(|e| HarnessError::Checkpoint(e.to_string()))
    }
    fn adam<F: Scalar>(&mut self, shape: &Mlp<F>) -> Result<AdamState<F>, HarnessError> {
        let step = self.u64()?;
        let (beta1, beta2, eps) = (self.float()?, self.float()?, self.float()?);
        let mut moments = Vec::with_capacity(2);
        for _ in 0..2 {
            let mut layers = Vec::with_capacity(shape.layers().len());
            for l in shape.layers() {
                layers.push(LayerGrad {
                    weights: self.floats(l.weights().len())?,
                    bias: self.floats(l.bias().len())?,
                });
            }
            moments.push(ParamGrads { layers });
        }
        let v = moments.pop().expect("two moments");
        let m = moments.pop().expect("two moments");
        Ok(AdamState {
            m,
            v,
            step,
            beta1,
            beta2,
            eps,
        })
    }
}

impl<F: Scalar> Checkpoint<F> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION);
        w.u8(precision_of::<F>().tag());
        let text = self.config.to_toml();
        w.usize(text.len());
        w.0.extend_from_slice(text.as_bytes());
        w.u64(self.counters.episode);
        w.u64(self.counters.env_steps);
        w.u64(self.counters.updates);
        for r in &self.rngs {
            w.0.extend_from_slice(&r.seed);
            w.u64(r.stream);
            w.u128(r.word_pos);
        }
        w.usize(self.learners.len());
        for l in &self.learners {
            w.float(l.noise_scale);
            for m in [&l.actor, &l.critic, &l.target_actor, &l.target_critic] {
                w.mlp(m);
            }
            w.adam(&l.actor_opt);
            w.adam(&l.critic_opt);
        }
        w.0
    }

    fn read_body(r: &mut Reader<'_>) -> Result<Self, HarnessError> {
        let len = r.count(1)?;
        let text = std::str::from_utf8(r.take(len)?)
            .map_err(|_| HarnessError::Checkpoint("config echo is not UTF-8".into()))?;
        let config = super::parse_config(text)?;
        let counters = Counters {
            episode: r.u64()?,
            env_steps: r.u64()?,
            updates: r.u64()?,
        };
        let mut rngs = [RngSnapshot {
            seed: [0; 32],
            stream: 0,
            word_pos: 0,
        }; 4];
        for s in &mut rngs {
            s.seed = r.array()?;
            s.stream = r.u64()?;
            s.word_pos = r.u128()?;
        }
        let n = r.count(8)?;
        let mut learners = Vec::with_capacity(n);
        for _ in 0..n {
            let noise_scale = r.float()?;
            let actor = r.mlp()?;
            let critic = r.mlp()?;
            let target_actor = r.mlp()?;
            let target_critic = r.mlp()?;
            if target_actor.dims() != actor.dims() || target_critic.dims() != critic.dims() {
                return Err(HarnessError::Checkpoint("target network shapes differ from online networks".into()));
            }
            let actor_opt = r.adam(&actor)?;
            let critic_opt = r.adam(&critic)?;
            learners.push(AgentLearner {
                actor,
                critic,
                target_actor,
                target_critic,
                actor_opt,
                critic_opt,
                noise_scale,
            });
        }
        if r.at != r.buf.len() {
            return Err(HarnessError::Checkpoint(format!(
                "{} trailing bytes after the last agent",
                r.buf.len() - r.at
            )));
        }
        Ok(Self {
            config,
            counters,
            rngs,
            learners,
        })
    }

    pub fn rng_streams(&self) -> RngStreams {
        RngStreams::restore(&self.rngs)
    }

    /// Atomic write: the file at `path` is either the old or the new checkpoint.
    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        write_atomic(path, &self.to_bytes())
    }
}

/// Decodes checkpoint bytes of either precision.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<AnyCheckpoint, HarnessError> {
    let mut r = Reader { buf: bytes, at: 0 };
    let magic = r.take(MAGIC.len()).map_err(|_| HarnessError::BadMagic)?;
    if magic != MAGIC {
        return Err(HarnessError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(HarnessError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let tag = r.u8()?;
    let ck = match Precision::from_tag(tag) {
        Some(Precision::F32) => AnyCheckpoint::F32(Checkpoint::read_body(&mut r)?),
        Some(Precision::F64) => AnyCheckpoint::F64(Checkpoint::read_body(&mut r)?),
        None => return Err(HarnessError::Checkpoint(format!("unknown precision tag {tag}"))),
    };
    if ck.config().precision.tag() != tag {
        return Err(HarnessError::Checkpoint("precision tag disagrees with the config echo".into()));
    }
    Ok(ck)
}

pub fn load_checkpoint(path: &Path) -> Result<AnyCheckpoint, HarnessError> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    decode_checkpoint(&bytes)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    let mut f = fs::File::create(tmp).map_err(|e| HarnessError::io(tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| HarnessError::io(tmp, e))?;
    fs::rename(tmp, path).map_err(|e| HarnessError::io(path, e))
}
