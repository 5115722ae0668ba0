use std::path::Path;

use ndarray::{Array1, Array2};

use super::features::{ArcFeatures, FeatureVector, SentenceFeatures};
use super::params::{self, slot, Block, ParameterStore, SnapshotHeader, SNAPSHOT_FORMAT, TABLE_SIZE};
use crate::chain::{self, ChainMarginals, ChainScores, ConstraintMask};
use crate::corpus::{bio, AnnotationState, Corpus, Gold, TaskKind};
use crate::error::{Error, Result};
use crate::tree::{self, ArcMarginals, ArcScores, HeadConstraint};
use crate::uncertainty::{self, Acquisition};

/// `O` followed by `B-X`, `I-X` for each entity type in order.
pub fn bio_labels(types: &[String]) -> Vec<String> {
    std::iter::once("O".to_string())
        .chain(types.iter().flat_map(|t| [format!("B-{t}"), format!("I-{t}")]))
        .collect()
}

/// Marginals of either structure, indexed by sub-structure (token for
/// chains, modifier for trees).
#[derive(Clone, Debug, PartialEq)]
pub enum Marginals {
    Chain(ChainMarginals),
    Tree(ArcMarginals),
}

impl Marginals {
    pub fn len(&self) -> usize {
        match self {
            Marginals::Chain(m) => m.len(),
            Marginals::Tree(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Probability row of sub-structure `i` (labels, or heads 0..=n).
    pub fn row(&self, i: usize) -> Vec<f64> {
        match self {
            Marginals::Chain(m) => m.unary.row(i).to_vec(),
            Marginals::Tree(m) => m.probabilities.column(i).to_vec(),
        }
    }

    pub fn margins(&self) -> Vec<f64> {
        match self {
            Marginals::Chain(m) => chain::token_uncertainty(m),
            Marginals::Tree(m) => tree::head_uncertainty(m),
        }
    }

    pub fn priorities(&self, acquisition: Acquisition) -> Vec<f64> {
        match self {
            Marginals::Chain(m) => chain::token_priority(m, acquisition),
            Marginals::Tree(m) => tree::head_priority(m, acquisition),
        }
    }

    /// Most probable value per sub-structure (label index or head).
    pub fn argmax(&self) -> Vec<usize> {
        match self {
            Marginals::Chain(m) => m.argmax(),
            Marginals::Tree(m) => m.argmax(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Prediction {
    Tags(Vec<String>),
    Tree { heads: Vec<usize>, labels: Vec<String> },
}

/// A linear structured model: hashed features scored against one weight
/// table.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub task: TaskKind,
    /// Tagging: BIO labels. Parsing: unused (empty).
    pub labels: Vec<String>,
    /// Parsing: dependency relation labels.
    pub dep_labels: Vec<String>,
    pub params: ParameterStore,
    bio_allowed: Array2<bool>,
    start_allowed: Array1<bool>,
}

impl Model {
    pub fn new(task: TaskKind, labels: Vec<String>, dep_labels: Vec<String>) -> Result<Self> {
        let dense = match task {
            TaskKind::Tagging => labels.len(),
            TaskKind::Parsing => 0,
        };
        Self::with_params(task, labels, dep_labels, ParameterStore::new(dense))
    }

    /// Model sized for a corpus's label inventory.
    pub fn for_corpus(corpus: &Corpus) -> Result<Self> {
        match corpus.task {
            TaskKind::Tagging => Self::new(TaskKind::Tagging, bio_labels(&corpus.entity_types()), vec![]),
            TaskKind::Parsing => Self::new(TaskKind::Parsing, vec![], corpus.label_inventory()),
        }
    }

    fn with_params(
        task: TaskKind,
        labels: Vec<String>,
        dep_labels: Vec<String>,
        params: ParameterStore,
    ) -> Result<Self> {
        match task {
            TaskKind::Tagging => {
                if labels.is_empty() {
                    return Err(Error::config("labels", "a tagging model needs at least one label"));
                }
                if let Some(bad) = labels.iter().find(|l| bio::parse_tag(l).is_none()) {
                    return Err(Error::config("labels", format!("{bad:?} is not a BIO tag")));
                }
            }
            TaskKind::Parsing => {
                if dep_labels.is_empty() {
                    return Err(Error::config(
                        "dep_labels",
                        "a parsing model needs at least one relation label",
                    ));
                }
            }
        }
        let l = labels.len();
        let bio_allowed = Array2::from_shape_fn((l, l), |(a, b)| bio::valid_transition(&labels[a], &labels[b]));
        let start_allowed = Array1::from_shape_fn(l, |b| bio::valid_start(&labels[b]));
        Ok(Model {
            task,
            labels,
            dep_labels,
            params,
            bio_allowed,
            start_allowed,
        })
    }

    pub fn fresh(&self) -> Model {
        let mut m = self.clone();
        m.params = ParameterStore::new(self.params.n_labels());
        m
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn label_index(&self, tag: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == tag)
    }

    pub fn dep_label_index(&self, label: &str) -> Option<usize> {
        self.dep_labels.iter().position(|l| l == label)
    }

    /// Linear scores without structural masking.
    pub fn raw_chain_scores(&self, tokens: &[FeatureVector]) -> ChainScores {
        let l = self.n_labels();
        let mut emissions = Array2::zeros((tokens.len(), l));
        let w = &self.params.weights;
        for (i, fv) in tokens.iter().enumerate() {
            let mut row = emissions.row_mut(i);
            for &(id, v) in &fv.entries {
                let s = slot(id, Block::Emission, l);
                for y in 0..l {
                    row[y] += v * w[s + y];
                }
            }
        }
        ChainScores {
            emissions,
            transitions: self.params.transitions.clone(),
            start: self.params.start.clone(),
            end: self.params.end.clone(),
        }
    }

    /// Scores with invalid BIO transitions and starts set to negative
    /// infinity.
    pub fn chain_scores(&self, tokens: &[FeatureVector]) -> ChainScores {
        let mut s = self.raw_chain_scores(tokens);
        for ((a, b), t) in s.transitions.indexed_iter_mut() {
            if !self.bio_allowed[[a, b]] {
                *t = f64::NEG_INFINITY;
            }
        }
        for (b, v) in s.start.iter_mut().enumerate() {
            if !self.start_allowed[b] {
                *v = f64::NEG_INFINITY;
            }
        }
        s
    }

    pub fn arc_scores(&self, arcs: &ArcFeatures) -> ArcScores {
        let n = arcs.len();
        let w = &self.params.weights;
        let scores = Array2::from_shape_fn((n + 1, n), |(h, j)| {
            if h == j + 1 {
                return f64::NEG_INFINITY;
            }
            arcs.get(h, j + 1)
                .entries
                .iter()
                .map(|&(id, v)| v * w[slot(id, Block::Arc, 1)])
                .sum()
        });
        ArcScores::new(scores).expect("arc score shape is [n + 1, n]")
    }

    /// Raw per-label scores of an arc under the label classifier.
    pub fn label_scores(&self, arc: &FeatureVector) -> Vec<f64> {
        let k = self.dep_labels.len();
        let mut out = vec![0.0; k];
        for &(id, v) in &arc.entries {
            let s = slot(id, Block::ArcLabel, k);
            for (y, o) in out.iter_mut().enumerate() {
                *o += v * self.params.weights[s + y];
            }
        }
        out
    }

    pub fn label_distribution(&self, arc: &FeatureVector) -> Vec<f64> {
        softmax(&self.label_scores(arc))
    }

    fn chain_mask(&self, state: &AnnotationState) -> Result<Option<ConstraintMask>> {
        if state.n_annotated() == 0 {
            return Ok(None);
        }
        let mut mask = ConstraintMask::unconstrained(state.len(), self.n_labels());
        for (i, c) in state.constraints().iter().enumerate() {
            if let Some(gold) = c {
                let tag = gold
                    .tag()
                    .ok_or_else(|| Error::Constraint(format!("position {i} carries a head, not a tag")))?;
                let y = self
                    .label_index(tag)
                    .ok_or_else(|| Error::Constraint(format!("unknown tag {tag:?}")))?;
                mask.fix(i, y);
            }
        }
        Ok(Some(mask))
    }

    fn head_constraint(&self, state: &AnnotationState) -> Result<Option<HeadConstraint>> {
        if state.n_annotated() == 0 {
            return Ok(None);
        }
        let mut c = HeadConstraint::unconstrained(state.len());
        for (i, g) in state.constraints().iter().enumerate() {
            if let Some(gold) = g {
                let head = gold
                    .head()
                    .ok_or_else(|| Error::Constraint(format!("position {i} carries a tag, not a head")))?;
                if head > state.len() || head == i + 1 {
                    return Err(Error::Constraint(format!("invalid head {head} at position {i}")));
                }
                c.fix(i + 1, head);
            }
        }
        Ok(Some(c))
    }

    /// Chain constraint mask of an annotation (BIO labels indexed by this
    /// model).
    pub fn constraint_mask(&self, state: &AnnotationState) -> Result<ConstraintMask> {
        Ok(self
            .chain_mask(state)?
            .unwrap_or_else(|| ConstraintMask::unconstrained(state.len(), self.n_labels())))
    }

    pub fn head_constraints(&self, state: &AnnotationState) -> Result<HeadConstraint> {
        Ok(self
            .head_constraint(state)?
            .unwrap_or_else(|| HeadConstraint::unconstrained(state.len())))
    }

    /// Marginals, constrained by `state` when given.
    pub fn marginals(&self, feats: &SentenceFeatures, state: Option<&AnnotationState>) -> Result<Marginals> {
        match feats {
            SentenceFeatures::Tagging(tokens) => {
                let scores = self.chain_scores(tokens);
                let mask = match state {
                    Some(s) => self.chain_mask(s)?,
                    None => None,
                };
                Ok(Marginals::Chain(chain::marginals(&scores, mask.as_ref())?))
            }
            SentenceFeatures::Parsing(arcs) => {
                let scores = self.arc_scores(arcs);
                let c = match state {
                    Some(s) => self.head_constraint(s)?,
                    None => None,
                };
                Ok(Marginals::Tree(tree::arc_marginals(&scores, c.as_ref())?))
            }
        }
    }

    pub fn predict(&self, feats: &SentenceFeatures) -> Result<Prediction> {
        match feats {
            SentenceFeatures::Tagging(tokens) => {
                let path = chain::viterbi(&self.chain_scores(tokens), None)?;
                Ok(Prediction::Tags(
                    path.into_iter().map(|y| self.labels[y].clone()).collect(),
                ))
            }
            SentenceFeatures::Parsing(arcs) => {
                let heads = tree::decode(&self.arc_scores(arcs), None)?;
                let labels = heads
                    .iter()
                    .enumerate()
                    .map(|(j, &h)| {
                        let dist = self.label_distribution(arcs.get(h, j + 1));
                        self.dep_labels[uncertainty::top_two(&dist).0].clone()
                    })
                    .collect();
                Ok(Prediction::Tree { heads, labels })
            }
        }
    }

    pub fn write_to(&self, out: impl std::io::Write) -> Result<()> {
        let header = SnapshotHeader {
            format: SNAPSHOT_FORMAT.into(),
            version: 1,
            task: self.task,
            labels: self.labels.clone(),
            dep_labels: self.dep_labels.clone(),
            table_size: TABLE_SIZE,
            nonzero: 0,
        };
        params::write_snapshot(header, &self.params, out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
        let (h, params) = params::decode_snapshot(bytes)?;
        Self::with_params(h.task, h.labels, h.dep_labels, params).map_err(|e| Error::Snapshot(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Model> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / z).collect()
}

/// Gold value of a position as a model index (label, or head).
pub(crate) fn gold_index(model: &Model, gold: &Gold) -> Result<usize> {
    match gold {
        Gold::Tag(t) => model
            .label_index(t)
            .ok_or_else(|| Error::Constraint(format!("unknown tag {t:?}"))),
        Gold::Dep { head, .. } => Ok(*head),
    }
}
