//! Checkpoint container.
//!
//! Layout (little-endian):
//!
//! | field                 | encoding                                         |
//! |-----------------------|--------------------------------------------------|
//! | magic                 | `SFCK`                                           |
//! | version               | u32, currently 1                                 |
//! | config                | u32 byte length + UTF-8 `key = value` text       |
//! | feature names         | u32 byte length + UTF-8, one name per line       |
//! | optimizer steps       | u64                                              |
//! | tensor count          | u32                                              |
//! | each tensor           | u16 name length, name, u8 rank, u32 per dim, f64 values |
//!
//! Tensors are the network parameters and batch-norm buffers under their
//! layer names, `adadelta.<param>.acc_grad_sq` / `.acc_update_sq`, and
//! optionally `scaler.shift` / `scaler.scale`.

use std::collections::BTreeMap;
use std::path::Path;

use super::config::ModelConfig;
use super::network::FusionNet;
use super::train::Adadelta;
use crate::error::{bail, Result};
use crate::features::FeatureScaler;
use crate::nn::{Scalar, Tensor};

pub const MAGIC: &[u8; 4] = b"SFCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint<T> {
    pub net: FusionNet<T>,
    pub optimizer: Adadelta<T>,
    pub scaler: Option<FeatureScaler>,
    pub feature_names: Vec<String>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }

    fn text(&mut self, s: &str) {
        self.bytes(&(s.len() as u32).to_le_bytes());
        self.bytes(s.as_bytes());
    }

    fn tensor(&mut self, name: &str, shape: &[usize], data: impl Iterator<Item = f64>) {
        self.bytes(&(name.len() as u16).to_le_bytes());
        self.bytes(name.as_bytes());
        self.0.push(shape.len() as u8);
        for &d in shape {
            self.bytes(&(d as u32).to_le_bytes());
        }
        for v in data {
            self.bytes(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            bail!(Length, "checkpoint truncated at byte {}", self.pos);
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn text(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| crate::Error::Format("checkpoint text is not UTF-8".into()))
    }
}

type RawTensor = (Vec<usize>, Vec<f64>);

fn assign<T: Scalar>(
    target: &mut [T],
    shape: &[usize],
    name: &str,
    tensors: &mut BTreeMap<String, RawTensor>,
) -> Result<()> {
    let Some((dims, data)) = tensors.remove(name) else {
        bail!(Version, "checkpoint lacks tensor '{name}'");
    };
    if dims != shape {
        bail!(Version, "tensor '{name}' has shape {dims:?}, model expects {shape:?}");
    }
    for (t, v) in target.iter_mut().zip(data) {
        *t = T::from_f64_lossy(v);
    }
    Ok(())
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.bytes(MAGIC);
        w.bytes(&VERSION.to_le_bytes());
        w.text(&self.net.config().to_text());
        w.text(&self.feature_names.join("\n"));
        w.bytes(&self.optimizer.steps.to_le_bytes());

        let params = self.net.params();
        let buffers = self.net.buffers();
        let count = params.len() * 3 + buffers.len() + if self.scaler.is_some() { 2 } else { 0 };
        w.bytes(&(count as u32).to_le_bytes());
        for (name, t) in params.iter().chain(&buffers) {
            w.tensor(name, t.shape(), t.data().iter().map(|v| v.as_f64()));
        }
        for ((name, t), s) in params.iter().zip(&self.optimizer.states) {
            let shape = [t.len()];
            w.tensor(
                &format!("adadelta.{name}.acc_grad_sq"),
                &shape,
                s.acc_grad_sq.iter().map(|v| v.as_f64()),
            );
            w.tensor(
                &format!("adadelta.{name}.acc_update_sq"),
                &shape,
                s.acc_update_sq.iter().map(|v| v.as_f64()),
            );
        }
        if let Some(sc) = &self.scaler {
            w.tensor("scaler.shift", &[sc.width()], sc.shift().iter().copied());
            w.tensor("scaler.scale", &[sc.width()], sc.scale().iter().copied());
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4).map_err(|_| crate::Error::Format("checkpoint too short".into()))? != MAGIC {
            bail!(Format, "not a checkpoint (bad magic)");
        }
        let version = r.u32()?;
        if version != VERSION {
            bail!(Version, "checkpoint version {version}, this build reads {VERSION}");
        }
        let config = ModelConfig::parse(&r.text()?)
            .map_err(|e| crate::Error::Version(format!("incompatible checkpoint config: {e}")))?;
        let names_text = r.text()?;
        let feature_names: Vec<String> = if names_text.is_empty() {
            Vec::new()
        } else {
            names_text.lines().map(str::to_string).collect()
        };
        let steps = r.u64()?;
        let count = r.u32()? as usize;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| crate::Error::Format("tensor name is not UTF-8".into()))?;
            let rank = r.u8()? as usize;
            let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n: usize = dims.iter().product();
            let raw = r.take(n.checked_mul(8).ok_or_else(|| {
                crate::Error::Format(format!("tensor '{name}' is too large"))
            })?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if tensors.insert(name.clone(), (dims, data)).is_some() {
                bail!(Format, "duplicate tensor '{name}'");
            }
        }
        if r.pos != bytes.len() {
            bail!(Length, "{} trailing bytes after checkpoint", bytes.len() - r.pos);
        }

        let mut net = FusionNet::<T>::build(&config)?;
        let names: Vec<(String, Vec<usize>)> = net
            .params()
            .iter()
            .map(|(n, t)| (n.clone(), t.shape().to_vec()))
            .collect();
        for (p, (name, shape)) in net.params_mut().into_iter().zip(&names) {
            assign(p.data_mut(), shape, name, &mut tensors)?;
        }
        let buffer_names: Vec<(String, Vec<usize>)> = net
            .buffers()
            .iter()
            .map(|(n, t)| (n.clone(), t.shape().to_vec()))
            .collect();
        for (b, (name, shape)) in net.buffers_mut().into_iter().zip(&buffer_names) {
            assign(b.data_mut(), shape, name, &mut tensors)?;
        }
        let mut optimizer = Adadelta::new(&net)?;
        optimizer.steps = steps;
        for (state, (name, shape)) in optimizer.states.iter_mut().zip(&names) {
            let flat = [shape.iter().product::<usize>()];
            assign(&mut state.acc_grad_sq, &flat, &format!("adadelta.{name}.acc_grad_sq"), &mut tensors)?;
            assign(
                &mut state.acc_update_sq,
                &flat,
                &format!("adadelta.{name}.acc_update_sq"),
                &mut tensors,
            )?;
        }
        let scaler = match (tensors.remove("scaler.shift"), tensors.remove("scaler.scale")) {
            (Some((_, shift)), Some((_, scale))) => Some(FeatureScaler::from_parts(shift, scale)?),
            (None, None) => None,
            _ => bail!(Format, "checkpoint has only half of the feature scaler"),
        };
        if let Some(extra) = tensors.keys().next() {
            bail!(Version, "checkpoint has unexpected tensor '{extra}'");
        }
        Ok(Self {
            net,
            optimizer,
            scaler,
            feature_names,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Bit pattern of every parameter and buffer, for exact comparisons.
pub fn state_bits<T: Scalar>(net: &FusionNet<T>) -> Vec<u64> {
    net.params()
        .iter()
        .chain(&net.buffers())
        .flat_map(|(_, t): &(String, &Tensor<T>)| t.data().iter().map(|v| v.as_f64().to_bits()))
        .collect()
}
