//! Binary layout, little-endian:
//!
//! ```text
//! "PEFC" | version u32 | header length u64 | JSON header
//! params: n f64
//! resume state, when present: last params, Adam m, Adam v (n f64 each)
//! CRC32 of everything after the magic, u32
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, write_atomic, Reader};
use crate::error::{Error, Result};
use crate::net::{Model, ModelConfig, ModelParams, ParamLayout, Segment};
use crate::training::{Adam, History, TrainConfig};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"PEFC";

/// Where training stopped: the final weights and optimizer moments, which
/// may differ from the best weights stored in the checkpoint proper.
#[derive(Debug, Clone, PartialEq)]
pub struct ResumeState {
    pub params: Vec<f64>,
    pub adam: Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub train: Option<TrainConfig>,
    pub history: History,
    /// Epoch `params` were taken from; `None` for an untrained model.
    pub best_epoch: Option<usize>,
    pub resume: Option<ResumeState>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    manifest: Vec<Segment>,
    num_params: usize,
    train: Option<TrainConfig>,
    history: History,
    best_epoch: Option<usize>,
    /// Adam step count when a resume state follows the parameters.
    adam_steps: Option<u64>,
}

fn f64_bytes(out: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

impl Checkpoint {
    /// Untrained checkpoint of `model`.
    pub fn of_model(model: &Model) -> Checkpoint {
        Checkpoint {
            config: model.config.clone(),
            params: model.params.clone(),
            train: None,
            history: History::default(),
            best_epoch: None,
            resume: None,
        }
    }

    pub fn model(&self) -> Result<Model> {
        Model::from_params(self.config.clone(), self.params.clone())
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let n = self.params.len();
        if let Some(r) = &self.resume {
            if r.params.len() != n || r.adam.m.len() != n || r.adam.v.len() != n {
                return Err(Error::shape("resume state does not match the parameter count"));
            }
        }
        let header = Header {
            config: self.config.clone(),
            manifest: self.params.layout.segments.clone(),
            num_params: n,
            train: self.train.clone(),
            history: self.history.clone(),
            best_epoch: self.best_epoch,
            adam_steps: self.resume.as_ref().map(|r| r.adam.t),
        };
        let json = serde_json::to_vec(&header).expect("checkpoint header serializes");
        let mut out = Vec::with_capacity(20 + json.len() + 8 * n * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        f64_bytes(&mut out, &self.params.values);
        if let Some(r) = &self.resume {
            f64_bytes(&mut out, &r.params);
            f64_bytes(&mut out, &r.adam.m);
            f64_bytes(&mut out, &r.adam.v);
        }
        let crc = crc32fast::hash(&out[4..]);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
        if bytes.len() < 20 || &bytes[..4] != MAGIC {
            return Err(Error::Data("not a checkpoint file (bad magic)".into()));
        }
        let body = &bytes[4..bytes.len() - 4];
        let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut r = Reader::new(body);
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!("unsupported checkpoint version {version}")));
        }
        let len = usize::try_from(r.u64()?).map_err(|_| Error::Data("header length overflow".into()))?;
        let header: Header =
            serde_json::from_slice(r.take(len)?).map_err(|e| Error::Data(format!("checkpoint header: {e}")))?;
        header.config.validate()?;
        let layout = ParamLayout::for_config(&header.config);
        if layout.segments != header.manifest || layout.len() != header.num_params {
            return Err(Error::Data("parameter manifest does not match the stored config".into()));
        }
        let n = header.num_params;
        let params = ModelParams { layout, values: r.f64s(n)? };
        let resume = match header.adam_steps {
            Some(t) => {
                let last = r.f64s(n)?;
                let m = r.f64s(n)?;
                let v = r.f64s(n)?;
                Some(ResumeState { params: last, adam: Adam { m, v, t } })
            }
            None => None,
        };
        if r.remaining() != 0 {
            return Err(Error::Data(format!("{} trailing bytes after checkpoint payload", r.remaining())));
        }
        Ok(Checkpoint {
            config: header.config,
            params,
            train: header.train,
            history: header.history,
            best_epoch: header.best_epoch,
            resume,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.encode()?)
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        Checkpoint::decode(&read_file(path)?)
    }

    /// Loads and insists the stored architecture equals `expected`.
    pub fn load_expecting(path: &Path, expected: &ModelConfig) -> Result<Checkpoint> {
        let ck = Checkpoint::load(path)?;
        ck.check_config(expected)?;
        Ok(ck)
    }

    pub fn check_config(&self, expected: &ModelConfig) -> Result<()> {
        let diff = self.config.diff(expected);
        if diff.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigMismatch(format!("checkpoint vs requested: {}", diff.join("; "))))
        }
    }
}
