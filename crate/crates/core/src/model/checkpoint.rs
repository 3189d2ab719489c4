//! Single-file checkpoints.
//!
//! Layout: an 8-byte little-endian header length, a UTF-8 JSON header, then
//! raw little-endian `f64` blocks. Parameter blocks come first, in registry
//! order (weights, then bias, per layer). When optimizer state is present the
//! first-moment blocks follow, then the second-moment blocks, with the same
//! per-layer lengths.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adam::AdamState;
use crate::error::{Error, Result};

use super::builders::build;
use super::config::{ArchKind, ArchitectureConfig};
use super::graph::ModelGraph;

pub const CHECKPOINT_VERSION: &str = "mmbsn-ckpt-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct BlockInfo {
    name: String,
    shape: [usize; 4],
    bias: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct OptimizerInfo {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    version: String,
    arch: ArchKind,
    masks: Vec<String>,
    config: ArchitectureConfig,
    seed: u64,
    step: u64,
    blocks: Vec<BlockInfo>,
    optimizer: Option<OptimizerInfo>,
}

/// Model weights plus everything needed to resume training.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: ModelGraph,
    pub optimizer: Option<AdamState>,
    pub seed: u64,
    pub step: u64,
}

fn push_f64s(buf: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take_f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let end = self.pos + n * 8;
        if end > self.bytes.len() {
            return Err(Error::Checkpoint("truncated parameter data".into()));
        }
        let out = self.bytes[self.pos..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        self.pos = end;
        Ok(out)
    }
}

impl Checkpoint {
    pub fn new(model: ModelGraph, optimizer: Option<AdamState>, seed: u64, step: u64) -> Self {
        Self {
            model,
            optimizer,
            seed,
            step,
        }
    }

    fn header(&self) -> Header {
        let m = &self.model;
        Header {
            version: CHECKPOINT_VERSION.to_string(),
            arch: m.kind(),
            masks: m.config().masks.iter().map(|s| s.to_string()).collect(),
            config: m.config().clone(),
            seed: self.seed,
            step: self.step,
            blocks: m
                .layer_names()
                .iter()
                .zip(m.params())
                .map(|(name, p)| {
                    let s = p.weight.shape();
                    BlockInfo {
                        name: name.clone(),
                        shape: [s.batch, s.channels, s.height, s.width],
                        bias: p.bias.len(),
                    }
                })
                .collect(),
            optimizer: self.optimizer.as_ref().map(|o| OptimizerInfo {
                lr: o.lr,
                beta1: o.beta1,
                beta2: o.beta2,
                eps: o.eps,
                step: o.step,
            }),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header())?;
        let mut buf = Vec::with_capacity(8 + header.len() + self.model.count_params() * 8);
        buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
        buf.extend_from_slice(&header);
        for p in self.model.params() {
            push_f64s(&mut buf, p.weight.data());
            push_f64s(&mut buf, &p.bias);
        }
        if let Some(opt) = &self.optimizer {
            for m in &opt.m {
                push_f64s(&mut buf, m);
            }
            for v in &opt.v {
                push_f64s(&mut buf, v);
            }
        }
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Checkpoint("file too short".into()));
        }
        let hlen = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
        if 8 + hlen > bytes.len() {
            return Err(Error::Checkpoint("header length exceeds file size".into()));
        }
        let header: Header = serde_json::from_slice(&bytes[8..8 + hlen])?;
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version '{}'",
                header.version
            )));
        }
        let mut model = build(header.arch, &header.config)?;
        if model.params().len() != header.blocks.len() {
            return Err(Error::Checkpoint(format!(
                "header lists {} layers, architecture has {}",
                header.blocks.len(),
                model.params().len()
            )));
        }
        let mut cur = Cursor {
            bytes,
            pos: 8 + hlen,
        };
        for (p, info) in model.params_mut().iter_mut().zip(&header.blocks) {
            let s = p.weight.shape();
            if [s.batch, s.channels, s.height, s.width] != info.shape || p.bias.len() != info.bias {
                return Err(Error::Checkpoint(format!("shape mismatch in layer {}", info.name)));
            }
            let w = cur.take_f64s(s.len())?;
            p.weight.data_mut().copy_from_slice(&w);
            p.bias = cur.take_f64s(info.bias)?;
        }
        let optimizer = match header.optimizer {
            None => None,
            Some(o) => {
                let lens: Vec<usize> = model.params().iter().map(|p| p.num_params()).collect();
                let m = lens
                    .iter()
                    .map(|&n| cur.take_f64s(n))
                    .collect::<Result<Vec<_>>>()?;
                let v = lens
                    .iter()
                    .map(|&n| cur.take_f64s(n))
                    .collect::<Result<Vec<_>>>()?;
                Some(AdamState {
                    lr: o.lr,
                    beta1: o.beta1,
                    beta2: o.beta2,
                    eps: o.eps,
                    step: o.step,
                    m,
                    v,
                })
            }
        };
        if cur.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after parameter data".into()));
        }
        Ok(Self {
            model,
            optimizer,
            seed: header.seed,
            step: header.step,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
