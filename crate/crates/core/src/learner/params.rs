//! Hashed weight table plus dense transition blocks, and the snapshot
//! format used to persist them.
//!
//! A snapshot is one JSON header line followed by a little-endian block:
//! the dense transition, start and end weights, then `nonzero` records of
//! `(u32 index, f64 weight)` for the hashed table.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TABLE_BITS: u32 = 22;
pub const TABLE_SIZE: usize = 1 << TABLE_BITS;

/// Feature families that share the hashed table under different salts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Emission,
    Arc,
    ArcLabel,
    Relation,
}

impl Block {
    fn salt(self) -> u64 {
        match self {
            Block::Emission => 0x243f_6a88_85a3_08d3,
            Block::Arc => 0x1319_8a2e_0370_7344,
            Block::ArcLabel => 0xa409_3822_299f_31d0,
            Block::Relation => 0x082e_fa98_ec4e_6c89,
        }
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// First index of the `width` contiguous weights owned by feature `id` in
/// `block`. Labels of one feature share a cache line.
pub fn slot(id: u64, block: Block, width: usize) -> usize {
    slot_in(id, block, width, TABLE_SIZE)
}

/// `slot` for a table of `size` weights.
pub(crate) fn slot_in(id: u64, block: Block, width: usize, size: usize) -> usize {
    let buckets = (size / width.max(1)) as u64;
    (mix(id ^ block.salt()) % buckets) as usize * width.max(1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParameterStore {
    pub weights: Vec<f64>,
    pub transitions: Array2<f64>,
    pub start: Array1<f64>,
    pub end: Array1<f64>,
}

impl ParameterStore {
    /// All-zero parameters; `labels` sizes the dense chain blocks (zero for
    /// parsing).
    pub fn new(labels: usize) -> Self {
        ParameterStore {
            weights: vec![0.0; TABLE_SIZE],
            transitions: Array2::zeros((labels, labels)),
            start: Array1::zeros(labels),
            end: Array1::zeros(labels),
        }
    }

    pub fn n_labels(&self) -> usize {
        self.start.len()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
            && self.transitions.iter().all(|w| w.is_finite())
            && self.start.iter().all(|w| w.is_finite())
            && self.end.iter().all(|w| w.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        self.weights.iter_mut().for_each(|w| *w *= factor);
        self.transitions.mapv_inplace(|w| w * factor);
        self.start.mapv_inplace(|w| w * factor);
        self.end.mapv_inplace(|w| w * factor);
    }

    fn dense(&self) -> impl Iterator<Item = &f64> {
        self.transitions.iter().chain(self.start.iter()).chain(self.end.iter())
    }

    fn dense_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.transitions
            .iter_mut()
            .chain(self.start.iter_mut())
            .chain(self.end.iter_mut())
    }
}

/// Header line of a snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format: String,
    pub version: u32,
    pub task: crate::corpus::TaskKind,
    pub labels: Vec<String>,
    #[serde(default)]
    pub dep_labels: Vec<String>,
    pub table_size: usize,
    pub nonzero: usize,
}

pub const SNAPSHOT_FORMAT: &str = "structal-params";
const MAX_HEADER: usize = 1 << 20;
const MAX_LABELS: usize = 4096;

pub(crate) fn write_snapshot(mut header: SnapshotHeader, params: &ParameterStore, mut out: impl Write) -> Result<()> {
    let nonzero: Vec<(u32, f64)> = params
        .weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w != 0.0)
        .map(|(i, w)| (i as u32, *w))
        .collect();
    header.nonzero = nonzero.len();
    header.table_size = TABLE_SIZE;
    let mut buf = serde_json::to_vec(&header)?;
    buf.push(b'\n');
    for w in params.dense() {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    for (i, w) in nonzero {
        buf.extend_from_slice(&i.to_le_bytes());
        buf.extend_from_slice(&w.to_le_bytes());
    }
    out.write_all(&buf)
        .map_err(|e| Error::Snapshot(format!("write failed: {e}")))
}

/// Parses a snapshot. Every size is validated before allocation so
/// arbitrary input fails with an error rather than a panic.
pub fn decode_snapshot(bytes: &[u8]) -> Result<(SnapshotHeader, ParameterStore)> {
    let newline = bytes
        .iter()
        .take(MAX_HEADER)
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Snapshot("missing header line".into()))?;
    let header: SnapshotHeader =
        serde_json::from_slice(&bytes[..newline]).map_err(|e| Error::Snapshot(format!("bad header: {e}")))?;
    if header.format != SNAPSHOT_FORMAT || header.version != 1 {
        return Err(Error::Snapshot(format!(
            "unsupported format {} v{}",
            header.format, header.version
        )));
    }
    if header.table_size != TABLE_SIZE {
        return Err(Error::Snapshot(format!(
            "table size {} does not match {TABLE_SIZE}",
            header.table_size
        )));
    }
    if header.labels.len() > MAX_LABELS || header.dep_labels.len() > MAX_LABELS {
        return Err(Error::Snapshot("label inventory too large".into()));
    }
    let dense_labels = match header.task {
        crate::corpus::TaskKind::Tagging => header.labels.len(),
        crate::corpus::TaskKind::Parsing => 0,
    };
    let mut body = &bytes[newline + 1..];
    let dense = dense_labels * dense_labels + 2 * dense_labels;
    let expected = header
        .nonzero
        .checked_mul(12)
        .and_then(|r| r.checked_add(dense * 8))
        .ok_or_else(|| Error::Snapshot("record count overflows".into()))?;
    if body.len() != expected {
        return Err(Error::Snapshot(format!(
            "body has {} bytes, header implies {expected}",
            body.len()
        )));
    }
    let mut params = ParameterStore::new(dense_labels);
    for w in params.dense_mut() {
        *w = read_f64(&mut body)?;
    }
    for _ in 0..header.nonzero {
        let mut idx = [0u8; 4];
        body.read_exact(&mut idx).map_err(|e| Error::Snapshot(e.to_string()))?;
        let idx = u32::from_le_bytes(idx) as usize;
        let w = read_f64(&mut body)?;
        if idx >= TABLE_SIZE {
            return Err(Error::Snapshot(format!("weight index {idx} out of range")));
        }
        params.weights[idx] = w;
    }
    if !params.is_finite() {
        return Err(Error::Snapshot("non-finite weight".into()));
    }
    Ok((header, params))
}

fn read_f64(body: &mut &[u8]) -> Result<f64> {
    let mut b = [0u8; 8];
    body.read_exact(&mut b).map_err(|e| Error::Snapshot(e.to_string()))?;
    Ok(f64::from_le_bytes(b))
}
