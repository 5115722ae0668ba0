//! Local relation classifier over mention pairs: hashed features and a
//! softmax over relation labels plus `NONE`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Span;
use crate::error::{Error, Result};
use crate::learner::{feature_hash, slot_in, softmax, Block, FeatureVector};
use crate::uncertainty;

pub const NONE_LABEL: &str = "NONE";

const TABLE_SIZE: usize = 1 << 18;
const MAX_BETWEEN: usize = 6;

fn distance_bin(gap: usize) -> &'static str {
    match gap {
        0 => "0",
        1 => "1",
        2 => "2",
        3..=5 => "3-5",
        _ => "6+",
    }
}

/// Features of an unordered pair; the earlier mention comes first.
pub fn pair_features(tokens: &[String], a: &Span, b: &Span) -> FeatureVector {
    let (l, r) = if (a.start, a.end) <= (b.start, b.end) {
        (a, b)
    } else {
        (b, a)
    };
    let lower = |i: usize| tokens[i].to_lowercase();
    let lh = lower(l.end);
    let rh = lower(r.end);
    let gap = r.start.saturating_sub(l.end + 1);
    let dist = distance_bin(gap);
    let mut ids = vec![
        feature_hash(100, &[]),
        feature_hash(101, &[&l.kind, &r.kind]),
        feature_hash(102, &[&l.kind, &r.kind, dist]),
        feature_hash(103, &[&lh]),
        feature_hash(104, &[&rh]),
        feature_hash(105, &[&l.kind, &rh]),
        feature_hash(106, &[&lh, &r.kind]),
        feature_hash(107, &[dist]),
    ];
    if r.start > l.end + 1 {
        for i in (l.end + 1..r.start).take(MAX_BETWEEN) {
            let w = lower(i);
            ids.push(feature_hash(108, &[&w]));
            ids.push(feature_hash(109, &[&w, &l.kind, &r.kind]));
        }
    } else {
        ids.push(feature_hash(110, &[&l.kind, &r.kind]));
    }
    FeatureVector::from_ids(ids)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelationCandidate {
    /// Indices into the sentence's mention list, `a < b`.
    pub a: usize,
    pub b: usize,
    pub distribution: Vec<f64>,
    pub margin: f64,
}

impl RelationCandidate {
    pub fn uncertainty(&self) -> f64 {
        1.0 - self.margin
    }

    pub fn argmax(&self) -> usize {
        uncertainty::top_two(&self.distribution).0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelationModel {
    /// `labels[0]` is `NONE`.
    pub labels: Vec<String>,
    weights: Vec<f64>,
}

impl RelationModel {
    pub fn new(relation_labels: &[String]) -> Result<Self> {
        if relation_labels.iter().any(|l| l == NONE_LABEL) {
            return Err(Error::config("relation_labels", "NONE is reserved"));
        }
        let mut labels = vec![NONE_LABEL.to_string()];
        labels.extend(relation_labels.iter().cloned());
        Ok(RelationModel {
            labels,
            weights: vec![0.0; TABLE_SIZE],
        })
    }

    pub fn fresh(&self) -> Self {
        RelationModel {
            labels: self.labels.clone(),
            weights: vec![0.0; TABLE_SIZE],
        }
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn scores(&self, features: &FeatureVector) -> Vec<f64> {
        let k = self.labels.len();
        let mut out = vec![0.0; k];
        for &(id, v) in &features.entries {
            let s = slot_in(id, Block::Relation, k, TABLE_SIZE);
            for (y, o) in out.iter_mut().enumerate() {
                *o += v * self.weights[s + y];
            }
        }
        out
    }

    pub fn distribution(&self, features: &FeatureVector) -> Vec<f64> {
        softmax(&self.scores(features))
    }

    /// Every unordered pair of `mentions`, scored.
    pub fn candidates(&self, tokens: &[String], mentions: &[Span]) -> Vec<RelationCandidate> {
        let mut out = Vec::new();
        for a in 0..mentions.len() {
            for b in a + 1..mentions.len() {
                let distribution = self.distribution(&pair_features(tokens, &mentions[a], &mentions[b]));
                let margin = uncertainty::margin(&distribution);
                out.push(RelationCandidate {
                    a,
                    b,
                    distribution,
                    margin,
                });
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct RelationHeader {
    format: String,
    version: u32,
    labels: Vec<String>,
    table_size: usize,
    nonzero: usize,
}

pub const RELATION_SNAPSHOT_FORMAT: &str = "structal-relations";
const MAX_LABELS: usize = 4096;

impl RelationModel {
    /// JSON header line, then `nonzero` little-endian `(u32 index, f64
    /// weight)` records.
    pub fn write_to(&self, mut out: impl std::io::Write) -> Result<()> {
        let nonzero: Vec<(u32, f64)> = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(i, w)| (i as u32, *w))
            .collect();
        let header = RelationHeader {
            format: RELATION_SNAPSHOT_FORMAT.into(),
            version: 1,
            labels: self.labels.clone(),
            table_size: TABLE_SIZE,
            nonzero: nonzero.len(),
        };
        let mut buf = serde_json::to_vec(&header)?;
        buf.push(b'\n');
        for (i, w) in nonzero {
            buf.extend_from_slice(&i.to_le_bytes());
            buf.extend_from_slice(&w.to_le_bytes());
        }
        out.write_all(&buf)
            .map_err(|e| Error::Snapshot(format!("write failed: {e}")))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    /// Parses a snapshot, validating sizes before allocating.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let newline = bytes
            .iter()
            .take(1 << 20)
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Snapshot("missing header line".into()))?;
        let header: RelationHeader =
            serde_json::from_slice(&bytes[..newline]).map_err(|e| Error::Snapshot(format!("bad header: {e}")))?;
        if header.format != RELATION_SNAPSHOT_FORMAT || header.version != 1 {
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
        if header.labels.is_empty() || header.labels.len() > MAX_LABELS || header.labels[0] != NONE_LABEL {
            return Err(Error::Snapshot("label inventory must start with NONE".into()));
        }
        let body = &bytes[newline + 1..];
        if Some(body.len()) != header.nonzero.checked_mul(12) {
            return Err(Error::Snapshot(format!(
                "body has {} bytes for {} records",
                body.len(),
                header.nonzero
            )));
        }
        let mut model = RelationModel::new(&header.labels[1..]).map_err(|e| Error::Snapshot(e.to_string()))?;
        for rec in body.chunks_exact(12) {
            let idx = u32::from_le_bytes(rec[..4].try_into().expect("4 bytes")) as usize;
            let w = f64::from_le_bytes(rec[4..].try_into().expect("8 bytes"));
            if idx >= TABLE_SIZE || !w.is_finite() {
                return Err(Error::Snapshot(format!("bad record ({idx}, {w})")));
            }
            model.weights[idx] = w;
        }
        Ok(model)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// A training pair with a target distribution (one-hot for gold, soft for
/// pseudo labels).
#[derive(Clone, Debug, PartialEq)]
pub struct RelationExample {
    pub features: FeatureVector,
    pub target: Vec<f64>,
}

impl RelationExample {
    pub fn gold(features: FeatureVector, label: usize, n_labels: usize) -> Self {
        let mut target = vec![0.0; n_labels];
        target[label] = 1.0;
        RelationExample { features, target }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for RelationTrainConfig {
    fn default() -> Self {
        RelationTrainConfig {
            epochs: 10,
            learning_rate: 0.1,
            l2: 1e-6,
            seed: 0,
        }
    }
}

impl RelationTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("relation_epochs", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("relation_learning_rate", "must be positive"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::config("relation_l2", "must be non-negative"));
        }
        Ok(())
    }
}

/// Per-example Adagrad on cross-entropy against each target. Trains from
/// the zero vector; `template` supplies the label set.
pub fn train_relations(
    template: &RelationModel,
    examples: &[RelationExample],
    config: &RelationTrainConfig,
) -> Result<RelationModel> {
    config.validate()?;
    let k = template.labels.len();
    if let Some(bad) = examples.iter().position(|e| e.target.len() != k) {
        return Err(Error::Dimension(format!(
            "relation example {bad} has {} targets for {k} labels",
            examples[bad].target.len()
        )));
    }
    let mut model = template.fresh();
    let mut accum = vec![0.0; TABLE_SIZE];
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for &e in &order {
            let ex = &examples[e];
            let p = model.distribution(&ex.features);
            for &(id, v) in &ex.features.entries {
                let s = slot_in(id, Block::Relation, k, TABLE_SIZE);
                for y in 0..k {
                    let w = &mut model.weights[s + y];
                    let g = v * (p[y] - ex.target[y]) + config.l2 * *w;
                    accum[s + y] += g * g;
                    if accum[s + y] > 0.0 {
                        *w -= config.learning_rate * g / accum[s + y].sqrt();
                    }
                }
            }
        }
        if model.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Divergence {
                step: epoch + 1,
                loss: f64::NAN,
            });
        }
    }
    Ok(model)
}
