//! Versioned little-endian binary checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic          8 bytes  "DDPGCKPT"
//! version        u32      FORMAT_VERSION
//! state_dim      u32
//! action_dim     u32
//! actor table    u32 layer count L, L+1 x u32 widths, L x u8 activation codes
//! critic table   same shape as the actor table
//! hyperparams    f64 actor_lr, critic_lr, discount, tau, ou_theta, ou_sigma,
//!                ou_dt, final_layer_scale; u64 batch_size, replay_capacity, seed
//! networks       actor, critic, actor_target, critic_target: u64 count, f64 params
//! adam           actor then critic: u64 t, f64 m[count], f64 v[count]
//! replay         u64 capacity, u64 cursor, u64 len, u8 contents flag
//! transitions    present iff flag = 1: per slot state, action, reward (f64),
//!                next_state (f64), u8 done
//! ```

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adam::AdamState;
use crate::agent::{Agent, DdpgConfig};
use crate::error::{DdpgError, Result};
use crate::net::{Activation, DenseNet};
use crate::replay::{ReplayBuffer, Transition};

pub const MAGIC: &[u8; 8] = b"DDPGCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// Replay bookkeeping recorded in a checkpoint whose contents were excluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplayMeta {
    pub capacity: u64,
    pub cursor: u64,
    pub len: u64,
}

pub fn save(agent: &Agent, path: &Path, include_replay: bool) -> Result<()> {
    let bytes = to_bytes(agent, include_replay);
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Agent> {
    from_bytes(&fs::read(path)?)
}

/// Load and require the given observation and action sizes.
pub fn load_expecting(path: &Path, state_dim: usize, action_dim: usize) -> Result<Agent> {
    let agent = load(path)?;
    if agent.config.state_dim != state_dim || agent.config.action_dim != action_dim {
        return Err(DdpgError::ShapeMismatch {
            expected: format!("state {state_dim} / action {action_dim}"),
            found: format!("state {} / action {}", agent.config.state_dim, agent.config.action_dim),
        });
    }
    Ok(agent)
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        vs.iter().for_each(|&v| self.f64(v));
    }
    fn table(&mut self, net: &DenseNet) {
        self.u32(net.num_layers());
        net.sizes().iter().for_each(|&s| self.u32(s));
        net.activations().iter().for_each(|a| self.u8(a.code()));
    }
    fn net(&mut self, net: &DenseNet) {
        self.u64(net.num_params() as u64);
        self.f64s(net.params());
    }
    fn adam(&mut self, adam: &AdamState) {
        self.u64(adam.t);
        self.f64s(&adam.m);
        self.f64s(&adam.v);
    }
}

pub fn to_bytes(agent: &Agent, include_replay: bool) -> Vec<u8> {
    let cfg = &agent.config;
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.0.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    w.u32(cfg.state_dim);
    w.u32(cfg.action_dim);
    w.table(&agent.actor);
    w.table(&agent.critic);
    for v in [
        cfg.actor_lr,
        cfg.critic_lr,
        cfg.discount,
        cfg.tau,
        cfg.ou_theta,
        cfg.ou_sigma,
        cfg.ou_dt,
        cfg.final_layer_scale,
    ] {
        w.f64(v);
    }
    w.u64(cfg.batch_size as u64);
    w.u64(cfg.replay_capacity as u64);
    w.u64(cfg.seed);
    for net in [&agent.actor, &agent.critic, &agent.actor_target, &agent.critic_target] {
        w.net(net);
    }
    w.adam(&agent.actor_adam);
    w.adam(&agent.critic_adam);

    let meta = match agent.replay_origin {
        Some(meta) if agent.replay.is_empty() => meta,
        _ => ReplayMeta {
            capacity: agent.replay.capacity() as u64,
            cursor: agent.replay.cursor() as u64,
            len: agent.replay.len() as u64,
        },
    };
    w.u64(meta.capacity);
    w.u64(meta.cursor);
    w.u64(meta.len);
    let with_contents = include_replay && !agent.replay.is_empty();
    w.u8(with_contents as u8);
    if with_contents {
        for t in agent.replay.items() {
            w.f64s(&t.state);
            w.f64s(&t.action);
            w.f64(t.reward);
            w.f64s(&t.next_state);
            w.u8(t.done as u8);
        }
    }
    w.0
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            DdpgError::Checkpoint(format!("truncated at byte {} (wanted {n} more)", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn table(&mut self) -> Result<(Vec<usize>, Vec<Activation>)> {
        let layers = self.u32()?;
        if layers == 0 || layers > 64 {
            return Err(DdpgError::Checkpoint(format!("implausible layer count {layers}")));
        }
        let sizes = (0..=layers).map(|_| self.u32()).collect::<Result<Vec<_>>>()?;
        let acts = (0..layers)
            .map(|_| {
                let code = self.u8()?;
                Activation::from_code(code)
                    .ok_or_else(|| DdpgError::Checkpoint(format!("unknown activation code {code}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((sizes, acts))
    }
    fn net(&mut self, sizes: &[usize], acts: &[Activation]) -> Result<DenseNet> {
        let n = self.u64()? as usize;
        if n > self.bytes.len() / 8 {
            return Err(DdpgError::Checkpoint(format!("parameter count {n} exceeds file size")));
        }
        DenseNet::from_params(sizes, acts, self.f64s(n)?)
    }
    fn adam(&mut self, n: usize) -> Result<AdamState> {
        let t = self.u64()?;
        let m = self.f64s(n)?;
        let v = self.f64s(n)?;
        Ok(AdamState { m, v, t })
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Agent> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(DdpgError::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(DdpgError::ShapeMismatch {
            expected: format!("format version {FORMAT_VERSION}"),
            found: format!("format version {version}"),
        });
    }
    let state_dim = r.u32()?;
    let action_dim = r.u32()?;
    let (actor_sizes, actor_acts) = r.table()?;
    let (critic_sizes, critic_acts) = r.table()?;
    if actor_sizes[0] != state_dim
        || *actor_sizes.last().unwrap() != action_dim
        || critic_sizes[0] != state_dim + action_dim
        || *critic_sizes.last().unwrap() != 1
    {
        return Err(DdpgError::ShapeMismatch {
            expected: format!("actor {state_dim} -> {action_dim}, critic {} -> 1", state_dim + action_dim),
            found: format!("actor {actor_sizes:?}, critic {critic_sizes:?}"),
        });
    }

    let mut config = DdpgConfig::new(state_dim, action_dim);
    config.actor_hidden = actor_sizes[1..actor_sizes.len() - 1].to_vec();
    config.critic_hidden = critic_sizes[1..critic_sizes.len() - 1].to_vec();
    config.actor_lr = r.f64()?;
    config.critic_lr = r.f64()?;
    config.discount = r.f64()?;
    config.tau = r.f64()?;
    config.ou_theta = r.f64()?;
    config.ou_sigma = r.f64()?;
    config.ou_dt = r.f64()?;
    config.final_layer_scale = r.f64()?;
    config.batch_size = r.u64()? as usize;
    config.replay_capacity = r.u64()? as usize;
    config.seed = r.u64()?;
    if config.replay_capacity == 0 {
        return Err(DdpgError::Checkpoint("zero replay capacity".into()));
    }

    let actor = r.net(&actor_sizes, &actor_acts)?;
    let critic = r.net(&critic_sizes, &critic_acts)?;
    let actor_target = r.net(&actor_sizes, &actor_acts)?;
    let critic_target = r.net(&critic_sizes, &critic_acts)?;
    let actor_adam = r.adam(actor.num_params())?;
    let critic_adam = r.adam(critic.num_params())?;

    let meta = ReplayMeta { capacity: r.u64()?, cursor: r.u64()?, len: r.u64()? };
    if meta.capacity as usize != config.replay_capacity || meta.cursor >= meta.capacity || meta.len > meta.capacity {
        return Err(DdpgError::Checkpoint(format!("inconsistent replay metadata {meta:?}")));
    }
    let with_contents = r.u8()? == 1;

    let rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut agent = Agent::from_parts(config, actor, critic, rng);
    agent.actor_target = actor_target;
    agent.critic_target = critic_target;
    agent.actor_adam = actor_adam;
    agent.critic_adam = critic_adam;

    if with_contents {
        let items = (0..meta.len)
            .map(|_| {
                Ok(Transition {
                    state: r.f64s(state_dim)?,
                    action: r.f64s(action_dim)?,
                    reward: r.f64()?,
                    next_state: r.f64s(state_dim)?,
                    done: r.u8()? == 1,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        agent.replay = ReplayBuffer::from_parts(meta.capacity as usize, meta.cursor as usize, items);
    } else {
        agent.replay_origin = Some(meta);
    }
    if r.pos != bytes.len() {
        return Err(DdpgError::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(agent)
}
