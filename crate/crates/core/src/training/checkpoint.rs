//! Versioned binary checkpoint.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `SCMRLCKP` |
//! | 4     | format version (`u32`) |
//! | 8     | header length `L` (`u64`) |
//! | L     | UTF-8 JSON header |
//! | rest  | `f64` values of every tensor, in header order |
//!
//! The header holds the model configuration, schedule, cursor, loss history,
//! Adam step counters and the name and length of every tensor. Tensors are
//! written network by network (encoders, decoders, degraders, classifier),
//! layer by layer: weight, bias, then the Adam moments of both. `H` and its
//! per-row moments come last. Batch order is a pure function of seed and
//! cursor, so nothing else is needed to resume bit-identically.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::schedule::TrainSchedule;
use super::trainer::{Cursor, OptimizerState, TrainReport, Trainer};
use crate::error::{Error, Result};
use crate::model::{ScmrlConfig, ScmrlModel};
use crate::nn::{Mlp, MlpAdam};

pub const MAGIC: &[u8; 8] = b"SCMRLCKP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    config: ScmrlConfig,
    schedule: TrainSchedule,
    cursor: Cursor,
    report: TrainReport,
    n_samples: usize,
    /// Adam step counters of every network weight and bias, in tensor order.
    adam_steps: Vec<u64>,
    h_steps: Vec<u64>,
    tensors: Vec<TensorEntry>,
}

type Visit<'a> = dyn FnMut(String, &mut [f64]) + 'a;

fn visit_net<'a>(name: &str, net: &mut Mlp, adam: &'a mut MlpAdam, steps: &mut Vec<&'a mut u64>, f: &mut Visit<'_>) {
    for (l, layer) in net.layers_mut().iter_mut().enumerate() {
        f(format!("{name}.layer{l}.weight"), layer.weight.as_mut_slice());
        f(format!("{name}.layer{l}.bias"), &mut layer.bias);
    }
    let states = adam.weights.iter_mut().zip(adam.biases.iter_mut()).enumerate();
    for (l, (w, b)) in states {
        for (kind, state) in [("weight", w), ("bias", b)] {
            f(format!("{name}.layer{l}.{kind}.adam_m"), &mut state.m);
            f(format!("{name}.layer{l}.{kind}.adam_v"), &mut state.v);
            steps.push(&mut state.t);
        }
    }
}

/// Visits every tensor in checkpoint order and collects the Adam counters.
fn visit_all<'t>(trainer: &'t mut Trainer, f: &mut Visit<'_>) -> (Vec<&'t mut u64>, &'t mut Vec<u64>) {
    let Trainer { model, optimizer, .. } = trainer;
    let mut steps = Vec::new();
    let roles = [
        ("encoder", &mut model.encoders, &mut optimizer.encoders),
        ("decoder", &mut model.decoders, &mut optimizer.decoders),
        ("degrader", &mut model.degraders, &mut optimizer.degraders),
    ];
    for (role, nets, states) in roles {
        for (v, (net, adam)) in nets.iter_mut().zip(states.iter_mut()).enumerate() {
            visit_net(&format!("{role}{v}"), net, adam, &mut steps, f);
        }
    }
    visit_net("classifier", &mut model.classifier, &mut optimizer.classifier, &mut steps, f);
    f("h".into(), model.h.as_mut_slice());
    f("h.adam_m".into(), optimizer.h.m.as_mut_slice());
    f("h.adam_v".into(), optimizer.h.v.as_mut_slice());
    (steps, &mut optimizer.h.t)
}

/// Serializes the trainer to checkpoint bytes.
pub fn to_bytes(trainer: &Trainer) -> Result<Vec<u8>> {
    let mut copy = trainer.clone();
    let mut tensors = Vec::new();
    let mut payload: Vec<u8> = Vec::new();
    let (steps, h_steps) = visit_all(&mut copy, &mut |name, values| {
        tensors.push(TensorEntry { name, len: values.len() });
        for v in values.iter() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    });
    let adam_steps = steps.into_iter().map(|t| *t).collect();
    let h_steps = h_steps.clone();
    let header = Header {
        config: trainer.model.config().clone(),
        schedule: trainer.schedule.clone(),
        cursor: trainer.cursor,
        report: trainer.report.clone(),
        n_samples: trainer.model.n_samples(),
        adam_steps,
        h_steps,
        tensors,
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Invalid(format!("checkpoint header: {e}")))?;
    let mut out = Vec::with_capacity(20 + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Rebuilds a trainer from checkpoint bytes. `origin` names the source in errors.
pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Trainer> {
    let bad = |m: String| Error::data(origin, m);
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let json = bytes.get(20..20 + len).ok_or_else(|| bad("truncated header".into()))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| bad(format!("bad header: {e}")))?;
    let mut payload = &bytes[20 + len..];

    let model = ScmrlModel::new(header.config.clone(), header.n_samples, &mut ChaCha8Rng::seed_from_u64(0))?;
    let mut trainer = Trainer {
        optimizer: OptimizerState::new(&model),
        model,
        schedule: header.schedule.clone(),
        cursor: header.cursor,
        report: header.report.clone(),
    };
    let mut expected = header.tensors.iter();
    let mut failure: Option<String> = None;
    let (steps, h_steps) = visit_all(&mut trainer, &mut |name, values| {
        if failure.is_some() {
            return;
        }
        match expected.next() {
            Some(e) if e.name == name && e.len == values.len() => {}
            other => {
                failure = Some(format!("tensor {name} ({} values) does not match header entry {other:?}", values.len()));
                return;
            }
        }
        let need = values.len() * 8;
        if payload.len() < need {
            failure = Some(format!("payload ends inside tensor {name}"));
            return;
        }
        for (v, chunk) in values.iter_mut().zip(payload[..need].chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
        payload = &payload[need..];
    });
    if steps.len() != header.adam_steps.len() || h_steps.len() != header.h_steps.len() {
        return Err(bad("Adam counters do not match the architecture".into()));
    }
    for (slot, &t) in steps.into_iter().zip(&header.adam_steps) {
        *slot = t;
    }
    h_steps.copy_from_slice(&header.h_steps);
    if let Some(message) = failure {
        return Err(bad(message));
    }
    if expected.next().is_some() || !payload.is_empty() {
        return Err(bad("trailing tensors or bytes".into()));
    }
    Ok(trainer)
}

/// Writes through a temporary file and renames, so readers never see a
/// partial checkpoint.
pub fn save_checkpoint(trainer: &Trainer, path: &Path) -> Result<()> {
    let bytes = to_bytes(trainer)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Trainer> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}
