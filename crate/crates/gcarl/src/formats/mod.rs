//! On-disk artifacts. JSON files carry a `version` string; parameter blocks
//! are base64 of little-endian `f64`s so they round-trip bit for bit.

mod dataset;
mod graph;
mod model;
mod network;
mod tables;

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub use dataset::{decode_dataset, encode_dataset, read_dataset, write_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use graph::{GraphFile, GRAPH_VERSION};
pub use model::{MixingFile, ModelFile, PsiFile, TrainingMeta, MIXING_VERSION, MODEL_VERSION};
pub use network::{LayerEntry, NetworkFile, NETWORK_VERSION};
pub use tables::{loss_csv, metrics_csv, roc_csv, EvalFile, MetricsRow, Stat, SummaryFile};

pub fn encode_f64s(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    STANDARD.encode(bytes)
}

pub fn decode_f64s(text: &str) -> std::result::Result<Vec<f64>, String> {
    let bytes = STANDARD.decode(text).map_err(|e| format!("bad base64 block: {e}"))?;
    if bytes.len() % 8 != 0 {
        return Err(format!("block of {} bytes is not a whole number of f64s", bytes.len()));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn decode_len(text: &str, len: usize, what: &str) -> std::result::Result<Vec<f64>, String> {
    let v = decode_f64s(text)?;
    if v.len() != len {
        return Err(format!("{what}: expected {len} values, found {}", v.len()));
    }
    Ok(v)
}

fn check_version(found: &str, expected: &str) -> std::result::Result<(), String> {
    if found == expected {
        Ok(())
    } else {
        Err(format!("unsupported version {found:?}, expected {expected:?}"))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact types serialize");
    s.push('\n');
    s
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_bytes(path, to_json(value).as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_blocks_round_trip_bitwise() {
        let v = [0.0, -0.0, 1.5, f64::MIN_POSITIVE, f64::MAX, -3.25e-300, f64::INFINITY];
        let back = decode_f64s(&encode_f64s(&v)).unwrap();
        assert_eq!(v.map(f64::to_bits).to_vec(), back.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn ragged_block_rejected() {
        assert!(decode_f64s(&STANDARD.encode([1u8, 2, 3])).is_err());
        assert!(decode_len(&encode_f64s(&[1.0, 2.0]), 3, "w").is_err());
    }
}
