//! Binary checkpoint format, all integers and floats little-endian:
//!
//! ```text
//! magic          8 bytes  "PRSDCKPT"
//! version        u32      1
//! kind           u8       0 majority, 1 feed-forward, 2 lstm
//! input_size     u32
//! hidden_size    u32
//! n_layers       u32
//! epochs         u32
//! batch_episodes u32
//! seed           u64
//! learning_rate  f64
//! allow_off_grid u8
//! hash_len       u32, then hash_len bytes of UTF-8 config hash
//! n_losses       u32, then n_losses f64 training losses
//! payload
//! ```
//!
//! Network payload: `n_params` u64 then the parameters as f64 in declared
//! order. Majority payload: global rate f64, `n_reviews` u64, then per review
//! `review_id` u32, go count u64, total count u64.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::features::FEATURE_COUNT;
use crate::game::ReviewId;

use super::{
    FeedForward, Lstm, MajorityModel, Model, PredictorConfig, PredictorError, PredictorKind,
    TrainedModel,
};

pub const MAGIC: &[u8; 8] = b"PRSDCKPT";
pub const VERSION: u32 = 1;

fn corrupt(msg: impl Into<String>) -> PredictorError {
    PredictorError::Checkpoint(msg.into())
}

pub fn to_bytes(trained: &TrainedModel, config_hash: &str) -> Vec<u8> {
    let c = &trained.config;
    let mut b = Vec::new();
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    b.push(trained.model.kind().code());
    let (input, hidden, layers) = match &trained.model {
        Model::Majority(_) => (FEATURE_COUNT, 0, 0),
        Model::FeedForward(m) => (m.input_size, m.hidden_size, m.n_layers),
        Model::Lstm(m) => (m.input_size, m.hidden_size, m.n_layers),
    };
    for v in [input, hidden, layers, c.epochs, c.batch_episodes] {
        b.extend_from_slice(&(v as u32).to_le_bytes());
    }
    b.extend_from_slice(&c.seed.to_le_bytes());
    b.extend_from_slice(&c.learning_rate.to_le_bytes());
    b.push(u8::from(c.allow_off_grid));
    b.extend_from_slice(&(config_hash.len() as u32).to_le_bytes());
    b.extend_from_slice(config_hash.as_bytes());
    b.extend_from_slice(&(trained.loss_history.len() as u32).to_le_bytes());
    for l in &trained.loss_history {
        b.extend_from_slice(&l.to_le_bytes());
    }
    match &trained.model {
        Model::Majority(m) => {
            b.extend_from_slice(&m.global_rate.to_le_bytes());
            b.extend_from_slice(&(m.counts.len() as u64).to_le_bytes());
            for (id, &(go, n)) in &m.counts {
                b.extend_from_slice(&id.0.to_le_bytes());
                b.extend_from_slice(&go.to_le_bytes());
                b.extend_from_slice(&n.to_le_bytes());
            }
        }
        Model::FeedForward(FeedForward { params, .. }) | Model::Lstm(Lstm { params, .. }) => {
            b.extend_from_slice(&(params.len() as u64).to_le_bytes());
            for p in params {
                b.extend_from_slice(&p.to_le_bytes());
            }
        }
    }
    b
}

pub fn write(trained: &TrainedModel, config_hash: &str, out: &mut impl Write) -> Result<(), PredictorError> {
    out.write_all(&to_bytes(trained, config_hash))?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PredictorError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, PredictorError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, PredictorError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, PredictorError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, PredictorError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Parses a checkpoint, returning the model and the stored config hash.
pub fn from_bytes(bytes: &[u8]) -> Result<(TrainedModel, String), PredictorError> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let kind = PredictorKind::from_code(c.u8()?).ok_or_else(|| corrupt("unknown model kind"))?;
    let input = c.u32()? as usize;
    let hidden = c.u32()? as usize;
    let layers = c.u32()? as usize;
    let epochs = c.u32()? as usize;
    let batch_episodes = c.u32()? as usize;
    let seed = c.u64()?;
    let learning_rate = c.f64()?;
    let allow_off_grid = c.u8()? != 0;
    let hash_len = c.u32()? as usize;
    let hash = String::from_utf8(c.take(hash_len)?.to_vec()).map_err(|_| corrupt("hash is not UTF-8"))?;
    let n_losses = c.u32()? as usize;
    let loss_history = (0..n_losses).map(|_| c.f64()).collect::<Result<Vec<_>, _>>()?;

    let model = match kind {
        PredictorKind::Majority => {
            let global_rate = c.f64()?;
            let n = c.u64()?;
            let mut counts = BTreeMap::new();
            for _ in 0..n {
                let id = ReviewId(c.u32()?);
                counts.insert(id, (c.u64()?, c.u64()?));
            }
            Model::Majority(MajorityModel { counts, global_rate })
        }
        PredictorKind::FeedForward | PredictorKind::Lstm => {
            let n = c.u64()? as usize;
            if n > bytes.len() / 8 {
                return Err(corrupt(format!("parameter count {n} exceeds file size")));
            }
            let params = (0..n).map(|_| c.f64()).collect::<Result<Vec<_>, _>>()?;
            if kind == PredictorKind::Lstm {
                Model::Lstm(
                    Lstm::from_params(input, hidden, layers, params)
                        .ok_or_else(|| corrupt("parameter count does not match the LSTM shape"))?,
                )
            } else {
                let mut m = FeedForward::zeros(input, hidden, layers);
                if m.params.len() != params.len() {
                    return Err(corrupt("parameter count does not match the network shape"));
                }
                m.params = params;
                Model::FeedForward(m)
            }
        }
    };
    if c.pos != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    let config = PredictorConfig {
        kind,
        hidden_size: hidden,
        n_layers: layers,
        learning_rate,
        epochs,
        batch_episodes,
        seed,
        allow_off_grid,
    };
    Ok((
        TrainedModel {
            config,
            model,
            loss_history,
        },
        hash,
    ))
}

pub fn read(input: &mut impl Read) -> Result<(TrainedModel, String), PredictorError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::initial_network;

    #[test]
    fn network_roundtrip() {
        for kind in [PredictorKind::Lstm, PredictorKind::FeedForward] {
            let config = PredictorConfig {
                kind,
                hidden_size: 16,
                ..PredictorConfig::default()
            };
            let trained = TrainedModel {
                config: config.clone(),
                model: initial_network(&config).unwrap(),
                loss_history: vec![0.7, 0.6],
            };
            let bytes = to_bytes(&trained, "abc123");
            let (back, hash) = from_bytes(&bytes).unwrap();
            assert_eq!(hash, "abc123");
            assert_eq!(back, trained);
            assert_eq!(to_bytes(&back, &hash), bytes);
        }
    }

    #[test]
    fn majority_roundtrip() {
        let mut counts = BTreeMap::new();
        counts.insert(ReviewId(4), (3, 5));
        let trained = TrainedModel {
            config: PredictorConfig {
                kind: PredictorKind::Majority,
                hidden_size: 0,
                n_layers: 0,
                ..PredictorConfig::default()
            },
            model: Model::Majority(MajorityModel {
                counts,
                global_rate: 0.55,
            }),
            loss_history: vec![],
        };
        let (back, _) = from_bytes(&to_bytes(&trained, "h")).unwrap();
        assert_eq!(back, trained);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        assert!(from_bytes(b"NOTACKPT").is_err());
        let config = PredictorConfig::default();
        let trained = TrainedModel {
            config: config.clone(),
            model: initial_network(&config).unwrap(),
            loss_history: vec![],
        };
        let bytes = to_bytes(&trained, "h");
        assert!(from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }
}
