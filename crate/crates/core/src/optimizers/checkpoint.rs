//! Versioned JSON checkpoints of optimizer state.
//!
//! Format (version 1): `{"version": 1, "state": {"kind": <kind>, ...fields}}`
//! where `kind` is one of `gd`, `vgd`, `adam`, `von` and the fields are those
//! of [`GdState`], [`VgdState`], [`AdamState`] and [`VonState`]. Floats are
//! written in shortest round-trip form, so a reload is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamState, GdState, VgdState, VonState};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerState {
    Gd(GdState),
    Vgd(VgdState),
    Adam(AdamState),
    Von(VonState),
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    state: OptimizerState,
}

pub fn checkpoint_to_string(state: &OptimizerState) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Checkpoint {
        version: CHECKPOINT_VERSION,
        state: state.clone(),
    })?)
}

pub fn checkpoint_from_str(text: &str) -> Result<OptimizerState> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == CHECKPOINT_VERSION as u64 => {}
        Some(v) => return Err(Error::Config(format!("unsupported checkpoint version {v}"))),
        None => return Err(Error::Config("checkpoint has no version field".into())),
    }
    let cp: Checkpoint = serde_json::from_value(value)?;
    Ok(cp.state)
}

pub fn save_checkpoint(path: &Path, state: &OptimizerState) -> Result<()> {
    std::fs::write(path, checkpoint_to_string(state)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<OptimizerState> {
    checkpoint_from_str(&std::fs::read_to_string(path)?)
}
