//! Parameter checkpoints.
//!
//! Layout (little-endian): magic `DTCK`, `u32` version, four `u32` dims
//! (drug structure, protein structure, text, hidden), `u32` generation low
//! word, `u32` tensor count, then per tensor a `u32` name length, the UTF-8
//! name and one `EMB1` block holding the tensor.

use std::fs;
use std::path::Path;

use super::{ModelDims, ModelParams, TENSOR_NAMES};
use crate::data_io::{decode_emb1_prefix, encode_emb1};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DTCK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(p: &ModelParams) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let d = p.dims;
    for v in [d.drug_struct, d.prot_struct, d.text, d.hidden] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&(p.generation as u32).to_le_bytes());
    out.extend_from_slice(&(TENSOR_NAMES.len() as u32).to_le_bytes());
    for (name, m) in p.tensors() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&encode_emb1(m)?);
    }
    Ok(out)
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: 1,
            msg: format!("byte {}: {}", self.pos, msg.into()),
        }
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() < self.pos + n {
            return Err(self.err("truncated checkpoint"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}

pub fn decode_checkpoint(path: &Path, bytes: &[u8]) -> Result<ModelParams> {
    let mut r = Reader {
        path,
        bytes,
        pos: 0,
    };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(r.err("not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(r.err(format!("unsupported checkpoint version {version}")));
    }
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let dims = ModelDims::new(dims[0], dims[1], dims[2], dims[3]);
    let generation = u64::from(r.u32()?);
    let count = r.u32()? as usize;
    if count != TENSOR_NAMES.len() {
        return Err(r.err(format!(
            "expected {} tensors, found {count}",
            TENSOR_NAMES.len()
        )));
    }
    let mut p = ModelParams::zeros(dims);
    p.generation = generation;
    for expected in TENSOR_NAMES {
        let len = r.u32()? as usize;
        let raw = r.take(len)?.to_vec();
        let name = String::from_utf8(raw).map_err(|_| r.err("tensor name is not UTF-8"))?;
        if name != expected {
            return Err(r.err(format!("expected tensor `{expected}`, found `{name}`")));
        }
        let (m, used) = decode_emb1_prefix(path, &r.bytes[r.pos..])?;
        r.pos += used;
        let slot = p.tensor_mut(expected).expect("known tensor");
        if slot.shape() != m.shape() {
            return Err(r.err(format!(
                "tensor `{expected}` has shape {:?}, dims imply {:?}",
                m.shape(),
                slot.shape()
            )));
        }
        *slot = m;
    }
    if r.pos != bytes.len() {
        return Err(r.err("trailing bytes after last tensor"));
    }
    Ok(p)
}

pub fn save_checkpoint(path: &Path, p: &ModelParams) -> Result<()> {
    fs::write(path, encode_checkpoint(p)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(path, &bytes)
}
