//! Self-describing checkpoint files.
//!
//! Layout: an 8-byte magic, a little-endian u32 format version, a u32
//! JSON header length, the JSON header (hyper-parameters, both
//! vocabularies, step counter, parameter names/shapes), then the raw
//! little-endian parameter buffers in header order. Load followed by
//! save reproduces the file byte-for-byte.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Vocabulary;
use crate::error::{Error, Result};
use crate::model::{HyperParams, TransformerModel};
use crate::tensor::Elem;

const MAGIC: &[u8; 8] = b"GNMTCKPT";
const VERSION: u32 = 1;

#[cfg(not(feature = "f32"))]
const ELEM_TAG: &str = "f64";
#[cfg(feature = "f32")]
const ELEM_TAG: &str = "f32";

#[derive(Debug, Serialize, Deserialize)]
struct ParamHeader {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    elem: String,
    hyper_params: HyperParams,
    src_vocab: Vec<String>,
    tgt_vocab: Vec<String>,
    step: u64,
    params: Vec<ParamHeader>,
}

/// A loaded checkpoint: the rebuilt model plus its vocabularies and the
/// training-step counter it was saved at.
pub struct Checkpoint {
    pub model: TransformerModel,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    pub step: u64,
}

pub fn save(
    path: &Path,
    model: &TransformerModel,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    step: u64,
) -> Result<()> {
    let header = Header {
        elem: ELEM_TAG.to_string(),
        hyper_params: model.hp.clone(),
        src_vocab: src_vocab.tokens().to_vec(),
        tgt_vocab: tgt_vocab.tokens().to_vec(),
        step,
        params: model
            .params()
            .iter()
            .map(|p| ParamHeader { name: p.name.clone(), shape: p.shape.clone() })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::Contract(format!("checkpoint header serialization: {e}")))?;

    let mut file = std::fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&VERSION.to_le_bytes())?;
    file.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    file.write_all(&header_bytes)?;
    for param in model.params().iter() {
        for &v in &param.data {
            file.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let mut file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open checkpoint {}: {e}", path.display())))?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)
        .map_err(|_| Error::Data(format!("{}: truncated checkpoint", path.display())))?;
    if &magic != MAGIC {
        return Err(Error::Data(format!("{}: not a checkpoint file", path.display())));
    }
    let mut word = [0u8; 4];
    file.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Compat(format!(
            "checkpoint format version {version} unsupported (expected {VERSION})"
        )));
    }
    file.read_exact(&mut word)?;
    let header_len = u32::from_le_bytes(word) as usize;
    let mut header_bytes = vec![0u8; header_len];
    file.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Data(format!("corrupt checkpoint header: {e}")))?;
    if header.elem != ELEM_TAG {
        return Err(Error::Compat(format!(
            "checkpoint stores {} values but this build uses {ELEM_TAG}",
            header.elem
        )));
    }

    let src_vocab = Vocabulary::from_tokens(header.src_vocab)?;
    let tgt_vocab = Vocabulary::from_tokens(header.tgt_vocab)?;
    let mut model =
        TransformerModel::new(header.hyper_params, src_vocab.len(), tgt_vocab.len(), 0)?;

    if model.params().len() != header.params.len() {
        return Err(Error::Data(format!(
            "checkpoint lists {} parameters, architecture has {}",
            header.params.len(),
            model.params().len()
        )));
    }
    let mut buf = Vec::new();
    file.read_to_end(&mut buf)?;
    let width = std::mem::size_of::<Elem>();
    let mut offset = 0usize;
    for (param, ph) in model.params_mut().iter_mut().zip(&header.params) {
        if param.name != ph.name || param.shape != ph.shape {
            return Err(Error::Data(format!(
                "checkpoint parameter {:?} {:?} does not match architecture {:?} {:?}",
                ph.name, ph.shape, param.name, param.shape
            )));
        }
        let need = param.data.len() * width;
        if offset + need > buf.len() {
            return Err(Error::Data("checkpoint data truncated".into()));
        }
        for slot in param.data.iter_mut() {
            let mut bytes = [0u8; std::mem::size_of::<Elem>()];
            bytes.copy_from_slice(&buf[offset..offset + width]);
            *slot = Elem::from_le_bytes(bytes);
            offset += width;
        }
    }
    if offset != buf.len() {
        return Err(Error::Data("checkpoint has trailing bytes".into()));
    }
    Ok(Checkpoint { model, src_vocab, tgt_vocab, step: header.step })
}
