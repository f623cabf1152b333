//! JSON model file.
//!
//! ```json
//! {
//!   "version": 1,
//!   "params": {"depth": 14, "p_min": 0.0001, "threshold": 0.0005, "tau": 10.0, "epsilon": 0.0},
//!   "vocab_size": 3,
//!   "vocab": ["tcp_b8", "udp_bz", "tcp_b10"],
//!   "training": {"sequences": 120, "tokens": 5400},
//!   "created_at": 1700000000,
//!   "nodes": [
//!     {"context": [], "dist": [[0, 0.5], [1, 0.25], [2, 0.25]]},
//!     {"context": [1], "dist": [[0, 1.0]]}
//!   ]
//! }
//! ```
//!
//! `context` lists symbol ids oldest first. `dist` holds the raw empirical
//! distribution; the smoothed one is recomputed from `params.epsilon`, never
//! from counts. Floats are written in shortest round-trip form, so a loaded
//! tree scores bit-identically to the saved one. `vocab` and `created_at`
//! are optional.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tree::{Pst, TrainingMeta};
use super::PstParams;
use crate::Real;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unsupported model version {found} (expected {MODEL_VERSION})")]
    Version { found: u64 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Serialize, Deserialize)]
struct NodeRecord<F> {
    context: Vec<u32>,
    dist: Vec<(u32, F)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile<F> {
    version: u32,
    params: PstParams,
    vocab_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vocab: Option<Vec<String>>,
    training: TrainingMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    created_at: Option<u64>,
    nodes: Vec<NodeRecord<F>>,
}

pub fn save_model<F: Real, W: Write>(pst: &Pst<F>, sink: W) -> Result<(), ModelError> {
    save_model_at(pst, sink, None)
}

/// Like [`save_model`], recording a creation time (Unix seconds).
pub fn save_model_at<F: Real, W: Write>(
    pst: &Pst<F>,
    mut sink: W,
    created_at: Option<u64>,
) -> Result<(), ModelError> {
    let file = ModelFile {
        version: MODEL_VERSION,
        params: pst.params,
        vocab_size: pst.vocab_size,
        vocab: pst.vocab.clone(),
        training: pst.meta,
        created_at,
        nodes: pst
            .nodes
            .iter()
            .map(|n| NodeRecord {
                context: n.context.clone(),
                dist: n.dist.clone(),
            })
            .collect(),
    };
    serde_json::to_writer(&mut sink, &file).map_err(|e| ModelError::Io(e.into()))?;
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(())
}

pub fn load_model<F: Real, R: Read>(mut source: R) -> Result<Pst<F>, ModelError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| ModelError::Corrupt(e.to_string()))?;
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| ModelError::Corrupt("missing version".into()))?;
    if version != u64::from(MODEL_VERSION) {
        return Err(ModelError::Version { found: version });
    }
    let file: ModelFile<F> =
        serde_json::from_value(value).map_err(|e| ModelError::Corrupt(e.to_string()))?;
    let corrupt = |m: String| ModelError::Corrupt(m);

    file.params
        .validate_for(file.vocab_size)
        .map_err(|e| corrupt(e.to_string()))?;
    if let Some(v) = &file.vocab {
        if v.len() != file.vocab_size {
            return Err(corrupt(format!(
                "vocab lists {} tokens but vocab_size is {}",
                v.len(),
                file.vocab_size
            )));
        }
    }
    for node in &file.nodes {
        if node.context.len() > file.params.depth {
            return Err(corrupt(format!("context {:?} deeper than depth", node.context)));
        }
        let mut prev: Option<u32> = None;
        for &(sym, p) in &node.dist {
            if sym as usize >= file.vocab_size || prev.is_some_and(|q| q >= sym) {
                return Err(corrupt(format!("bad symbol {sym} in {:?}", node.context)));
            }
            if !(p > F::zero() && p <= F::one()) {
                return Err(corrupt(format!("probability {p} out of range")));
            }
            prev = Some(sym);
        }
        if node.context.iter().any(|&s| s as usize >= file.vocab_size) {
            return Err(corrupt(format!("context {:?} outside vocabulary", node.context)));
        }
    }
    let entries = file.nodes.into_iter().map(|n| (n.context, n.dist)).collect();
    let mut pst = Pst::assemble(file.params, file.vocab_size, file.training, entries)
        .map_err(ModelError::Corrupt)?;
    pst.vocab = file.vocab;
    Ok(pst)
}
