//! On-disk model checkpoints.
//!
//! A checkpoint is a directory holding `manifest.json` (format, version,
//! configuration, vocabulary, target scaler, training history, tensor
//! checksum) and `tensors.bin`:
//!
//! ```text
//! b"RALT" | u32 count | count x (u32 name_len | name | u32 ndim | ndim x u64 dim | f64 data...)
//! ```
//!
//! All integers and floats are little endian.

use std::fs;
use std::path::Path;

use ndiff::{ParamStore, Tensor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::TrainConfig;
use crate::error::{RalignError, Result};
use crate::model::{Model, Scaler};
use crate::train::EpochRecord;
use crate::vocab::Vocab;

pub const FORMAT: &str = "ralign-checkpoint";
pub const VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"RALT";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub task: String,
    pub config: TrainConfig,
    pub vocab: Option<Vocab>,
    pub scaler: Option<Scaler>,
    pub history: Vec<EpochRecord>,
    pub param_count: usize,
    pub tensors_sha256: String,
}

fn bad(msg: impl Into<String>) -> RalignError {
    RalignError::Checkpoint(msg.into())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn encode_tensors(store: &ParamStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    let count = store.iter().count() as u32;
    out.extend_from_slice(&count.to_le_bytes());
    for (_, name, t) in store.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| bad("tensor file truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_tensors(buf: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(bad("not a tensor file"));
    }
    let count = r.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| bad("tensor name is not utf-8"))?.to_string();
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| Ok(r.u64()? as usize)).collect::<Result<Vec<_>>>()?;
        let size = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| bad("tensor too large"))?;
        let bytes = r.take(size.checked_mul(8).ok_or_else(|| bad("tensor too large"))?)?;
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    if r.pos != buf.len() {
        return Err(bad("trailing bytes in tensor file"));
    }
    Ok(out)
}

pub fn save(dir: &Path, model: &Model, history: &[EpochRecord]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let tensors = encode_tensors(&model.store);
    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        task: model.cfg.task.name().into(),
        config: model.cfg.clone(),
        vocab: model.vocab.clone(),
        scaler: model.scaler,
        history: history.to_vec(),
        param_count: model.param_count(),
        tensors_sha256: hex(&Sha256::digest(&tensors)),
    };
    fs::write(dir.join("tensors.bin"), &tensors)?;
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn load(dir: &Path) -> Result<(Model, Manifest)> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    if manifest.format != FORMAT {
        return Err(bad(format!("unknown format {:?}", manifest.format)));
    }
    if manifest.version != VERSION {
        return Err(bad(format!("unsupported version {} (expected {VERSION})", manifest.version)));
    }
    let tensors = fs::read(dir.join("tensors.bin"))?;
    let digest = hex(&Sha256::digest(&tensors));
    if digest != manifest.tensors_sha256 {
        return Err(bad("tensor checksum mismatch"));
    }
    let mut model = Model::new(&manifest.config, manifest.vocab.clone())?;
    model.scaler = manifest.scaler;
    let decoded = decode_tensors(&tensors)?;
    if decoded.len() != model.store.iter().count() {
        return Err(bad(format!(
            "checkpoint has {} tensors, model expects {}",
            decoded.len(),
            model.store.iter().count()
        )));
    }
    for (name, t) in decoded {
        let id = model.store.id(&name).ok_or_else(|| bad(format!("unknown tensor {name:?}")))?;
        if model.store.get(id).shape() != t.shape() {
            return Err(bad(format!("shape mismatch for {name:?}")));
        }
        model.store.set(id, t)?;
    }
    Ok((model, manifest))
}
