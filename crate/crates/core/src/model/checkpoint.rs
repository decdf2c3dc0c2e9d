//! Binary checkpoints.
//!
//! Layout: the 8-byte magic `PSRLCKPT`, a little-endian `u32` format version,
//! a little-endian `u64` header length, a JSON header, then every parameter's
//! values as little-endian `f64` in row-major order, in header order.
//!
//! Word vectors are not stored; the header records which files they came from
//! along with their SHA-256 digests.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LanguageVocab, ModelConfig, SrlModel};
use crate::autodiff::{ParamStore, Tensor};
use crate::lexicon::SenseLexicon;
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PSRLCKPT";
pub const VERSION: u32 = 1;

/// Upper bound on the JSON header, to reject garbage lengths early.
const MAX_HEADER_BYTES: u64 = 1 << 30;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMetadata {
    pub seed: u64,
    pub best_epoch: Option<usize>,
    pub best_dev_f1: Option<f64>,
    pub embeddings: BTreeMap<String, EmbeddingRef>,
}

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: BTreeMap<String, LanguageVocab>,
    lexicons: BTreeMap<String, String>,
    metadata: CheckpointMetadata,
    params: Vec<ParamEntry>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn save<W: Write>(model: &SrlModel, metadata: &CheckpointMetadata, mut out: W) -> Result<()> {
    let header = Header {
        config: model.config.clone(),
        vocab: model.vocab.clone(),
        lexicons: model
            .lexicons
            .iter()
            .map(|(k, v)| (k.clone(), v.to_text()))
            .collect(),
        metadata: metadata.clone(),
        params: model
            .params
            .iter()
            .map(|(_, name, t)| ParamEntry {
                name: name.to_string(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for (_, _, t) in model.params.iter() {
        for x in t.data() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => corrupt(format!("truncated checkpoint while reading {}", what)),
        _ => Error::Io(e),
    })
}

pub fn load<R: Read>(mut input: R) -> Result<(SrlModel, CheckpointMetadata)> {
    let mut magic = [0u8; 8];
    read_exact(&mut input, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(corrupt("not a checkpoint file (bad magic)"));
    }
    let mut word = [0u8; 4];
    read_exact(&mut input, &mut word, "version")?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(corrupt(format!("unsupported checkpoint version {}", version)));
    }
    let mut len = [0u8; 8];
    read_exact(&mut input, &mut len, "header length")?;
    let len = u64::from_le_bytes(len);
    if len > MAX_HEADER_BYTES {
        return Err(corrupt(format!("header length {} is implausible", len)));
    }
    let mut json = vec![0u8; len as usize];
    read_exact(&mut input, &mut json, "header")?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| corrupt(format!("bad header: {}", e)))?;

    let mut store = ParamStore::new();
    let mut cell = [0u8; 8];
    for entry in &header.params {
        let n: usize = entry.shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            read_exact(&mut input, &mut cell, &entry.name)?;
            data.push(f64::from_le_bytes(cell));
        }
        store.add(entry.name.clone(), Tensor::new(entry.shape.clone(), data)?)?;
    }
    if input.read(&mut cell)? != 0 {
        return Err(corrupt("trailing bytes after parameter data"));
    }

    let lexicons = header
        .lexicons
        .iter()
        .map(|(k, text)| Ok((k.clone(), SenseLexicon::load(text.as_bytes())?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let model = SrlModel::from_parts(header.config, header.vocab, lexicons, store)?;
    Ok((model, header.metadata))
}

pub fn save_file(model: &SrlModel, metadata: &CheckpointMetadata, path: &Path) -> Result<()> {
    save(model, metadata, BufWriter::new(File::create(path)?))
}

pub fn load_file(path: &Path) -> Result<(SrlModel, CheckpointMetadata)> {
    load(BufReader::new(File::open(path)?))
}
