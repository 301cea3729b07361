//! Binary checkpoint container.
//!
//! Layout (little-endian): magic `SACK`, format version `u32`, header length
//! `u32`, JSON header, tensor count `u32`, then per tensor: name length `u16`,
//! UTF-8 name, rank `u8`, each dim `u64`, values `f64`.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use super::mlp::{param_count, Mlp};
use super::policy::GaussianPolicy;

const MAGIC: &[u8; 4] = b"SACK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint format version {0}")]
    Version(u32),
    #[error("malformed checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("checkpoint is missing tensor {0}")]
    Missing(String),
    #[error("tensor {name} has shape {got:?}, expected {expected:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("checkpoint agent is {got}, expected {expected}")]
    Agent { expected: String, got: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub agent: String,
    pub actor_widths: Vec<usize>,
    pub critic_widths: Vec<usize>,
    pub action_bound: Vec<f64>,
    pub hyper: BTreeMap<String, f64>,
}

/// Actor and critic of one agent plus the scalars worth recording with them.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentCheckpoint {
    pub agent: String,
    pub actor: GaussianPolicy,
    pub critic: Mlp,
    pub hyper: BTreeMap<String, f64>,
}

fn net_tensors<'a>(prefix: &str, net: &'a Mlp, out: &mut Vec<(String, Vec<usize>, &'a [f64])>) {
    let w = net.widths();
    for l in 0..net.num_layers() {
        let (wo, bo) = net.layer_offsets(l);
        out.push((format!("{prefix}.l{l}.weight"), vec![w[l], w[l + 1]], &net.params[wo..bo]));
        out.push((format!("{prefix}.l{l}.bias"), vec![w[l + 1]], &net.params[bo..bo + w[l + 1]]));
    }
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

impl AgentCheckpoint {
    pub fn write<W: Write>(&self, mut w: W) -> Result<(), CheckpointError> {
        let header = CheckpointHeader {
            format_version: FORMAT_VERSION,
            agent: self.agent.clone(),
            actor_widths: self.actor.net.widths().to_vec(),
            critic_widths: self.critic.widths().to_vec(),
            action_bound: self.actor.bound.clone(),
            hyper: self.hyper.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(json.len() as u32).to_le_bytes())?;
        w.write_all(&json)?;

        let mut tensors = Vec::new();
        net_tensors("actor", &self.actor.net, &mut tensors);
        tensors.push(("actor.log_std".into(), vec![self.actor.log_std.len()], &self.actor.log_std[..]));
        net_tensors("critic", &self.critic, &mut tensors);
        w.write_all(&(tensors.len() as u32).to_le_bytes())?;
        for (name, shape, values) in tensors {
            w.write_all(&(name.len() as u16).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&[shape.len() as u8])?;
            for d in &shape {
                w.write_all(&(*d as u64).to_le_bytes())?;
            }
            for v in values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self, CheckpointError> {
        let mut magic = [0; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        let mut json = vec![0; read_u32(&mut r)? as usize];
        r.read_exact(&mut json)?;
        let header: CheckpointHeader = serde_json::from_slice(&json)?;

        let mut tensors: BTreeMap<String, (Vec<usize>, Vec<f64>)> = BTreeMap::new();
        for _ in 0..read_u32(&mut r)? {
            let mut len = [0; 2];
            r.read_exact(&mut len)?;
            let mut name = vec![0; u16::from_le_bytes(len) as usize];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            let mut rank = [0; 1];
            r.read_exact(&mut rank)?;
            let mut shape = Vec::with_capacity(rank[0] as usize);
            for _ in 0..rank[0] {
                let mut d = [0; 8];
                r.read_exact(&mut d)?;
                shape.push(u64::from_le_bytes(d) as usize);
            }
            let n: usize = shape.iter().product();
            let mut values = Vec::with_capacity(n);
            let mut b = [0; 8];
            for _ in 0..n {
                r.read_exact(&mut b)?;
                values.push(f64::from_le_bytes(b));
            }
            tensors.insert(name, (shape, values));
        }

        let mut take = |name: String, expected: Vec<usize>| -> Result<Vec<f64>, CheckpointError> {
            let (shape, values) = tensors.remove(&name).ok_or_else(|| CheckpointError::Missing(name.clone()))?;
            if shape != expected {
                return Err(CheckpointError::Shape {
                    name,
                    expected,
                    got: shape,
                });
            }
            Ok(values)
        };
        let mut load_net = |prefix: &str, widths: &[usize]| -> Result<Mlp, CheckpointError> {
            let mut params = Vec::with_capacity(param_count(widths));
            for l in 0..widths.len() - 1 {
                params.extend(take(format!("{prefix}.l{l}.weight"), vec![widths[l], widths[l + 1]])?);
                params.extend(take(format!("{prefix}.l{l}.bias"), vec![widths[l + 1]])?);
            }
            Ok(Mlp::from_params(widths, params))
        };
        let actor_net = load_net("actor", &header.actor_widths)?;
        let critic = load_net("critic", &header.critic_widths)?;
        let log_std = take("actor.log_std".into(), vec![header.action_bound.len()])?;
        Ok(Self {
            agent: header.agent,
            actor: GaussianPolicy {
                net: actor_net,
                log_std,
                bound: header.action_bound,
            },
            critic,
            hyper: header.hyper,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), CheckpointError> {
        let f = std::fs::File::create(path)?;
        self.write(io::BufWriter::new(f))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CheckpointError> {
        Self::read(io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Loads and checks the agent id.
    pub fn load_agent(path: &std::path::Path, agent: &str) -> Result<Self, CheckpointError> {
        let ck = Self::load(path)?;
        if ck.agent != agent {
            return Err(CheckpointError::Agent {
                expected: agent.into(),
                got: ck.agent,
            });
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use spacearm_core::rng::SimRng;

    fn sample() -> AgentCheckpoint {
        let mut rng = SimRng::seed_from_u64(3);
        let mut actor = GaussianPolicy::new(&[15, 32, 128, 32, 3], vec![0.1; 3], &mut rng);
        actor.log_std = vec![-0.5, -0.61, 0.123456789];
        AgentCheckpoint {
            agent: "base".into(),
            actor,
            critic: Mlp::orthogonal(&[15, 32, 128, 32, 1], 1.0, &mut rng),
            hyper: BTreeMap::from([("gamma".to_string(), 0.96), ("lr_actor".to_string(), 2e-4)]),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let mut buf = Vec::new();
        ck.write(&mut buf).unwrap();
        let back = AgentCheckpoint::read(&buf[..]).unwrap();
        assert_eq!(back, ck);
        let obs: Vec<f64> = (0..15).map(|i| (i as f64 * 0.37).sin()).collect();
        assert_eq!(
            back.actor.mean(&obs).unwrap().to_vec(),
            ck.actor.mean(&obs).unwrap().to_vec()
        );
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let mut buf = Vec::new();
        sample().write(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(AgentCheckpoint::read(&bad[..]), Err(CheckpointError::BadMagic)));
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(matches!(AgentCheckpoint::read(&bad[..]), Err(CheckpointError::Version(9))));
        assert!(matches!(AgentCheckpoint::read(&buf[..buf.len() - 3]), Err(CheckpointError::Io(_))));
    }
}
