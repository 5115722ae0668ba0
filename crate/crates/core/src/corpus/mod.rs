//! Sentences, corpora and the gold-annotation simulation used by the
//! active-learning loop.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod annotation;
pub mod bio;
mod column;
mod conllu;
mod pool;
pub mod synthetic;

pub use annotation::{
    count_labeling_cost, simulate_annotation, AnnotationState, AnnotationStatus, CostConfig, CostMode,
};
pub use bio::Span;
pub use column::{load_column_tagging, read_column_tagging, write_column_tagging, ColumnOptions};
pub use conllu::{load_conllu, read_conllu, write_conllu};
pub use pool::PoolState;
pub use synthetic::{generate_synthetic, SyntheticSpec};

/// The structured prediction task a corpus is annotated for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Tagging,
    Parsing,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskKind::Tagging => f.write_str("tagging"),
            TaskKind::Parsing => f.write_str("parsing"),
        }
    }
}

/// Gold value of a single sub-structure.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gold {
    /// BIO tag.
    Tag(String),
    /// Head index (0 is the virtual root) and dependency label.
    Dep { head: usize, label: String },
}

impl Gold {
    pub fn tag(&self) -> Option<&str> {
        match self {
            Gold::Tag(t) => Some(t),
            Gold::Dep { .. } => None,
        }
    }

    pub fn head(&self) -> Option<usize> {
        match self {
            Gold::Dep { head, .. } => Some(*head),
            Gold::Tag(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub form: String,
    /// Coarse (universal) part-of-speech tag.
    pub pos: String,
    pub gold: Gold,
}

impl Token {
    pub fn tagged(form: impl Into<String>, pos: impl Into<String>, tag: impl Into<String>) -> Self {
        Token {
            form: form.into(),
            pos: pos.into(),
            gold: Gold::Tag(tag.into()),
        }
    }

    pub fn dep(form: impl Into<String>, pos: impl Into<String>, head: usize, label: impl Into<String>) -> Self {
        Token {
            form: form.into(),
            pos: pos.into(),
            gold: Gold::Dep {
                head,
                label: label.into(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(id: impl Into<String>, tokens: Vec<Token>) -> Self {
        Sentence { id: id.into(), tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Gold BIO tags; panics on a parsing sentence.
    pub fn gold_tags(&self) -> Vec<&str> {
        self.tokens
            .iter()
            .map(|t| t.gold.tag().expect("sentence is not tagging-annotated"))
            .collect()
    }

    /// Gold heads, one per token (0 is the root); panics on a tagging sentence.
    pub fn gold_heads(&self) -> Vec<usize> {
        self.tokens
            .iter()
            .map(|t| t.gold.head().expect("sentence is not parsing-annotated"))
            .collect()
    }

    pub fn gold_deprels(&self) -> Vec<&str> {
        self.tokens
            .iter()
            .map(|t| match &t.gold {
                Gold::Dep { label, .. } => label.as_str(),
                Gold::Tag(_) => panic!("sentence is not parsing-annotated"),
            })
            .collect()
    }

    /// Gold mention spans of a tagging sentence.
    pub fn gold_spans(&self) -> Vec<Span> {
        bio::spans(&self.gold_tags())
    }

    pub fn task(&self) -> Option<TaskKind> {
        self.tokens.first().map(|t| match t.gold {
            Gold::Tag(_) => TaskKind::Tagging,
            Gold::Dep { .. } => TaskKind::Parsing,
        })
    }

    /// Checks the structural invariants of the gold annotation.
    pub fn validate(&self, task: TaskKind) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::validation(&self.id, "sentence has no tokens"));
        }
        match task {
            TaskKind::Tagging => {
                let mut prev: Option<&str> = None;
                for (i, tok) in self.tokens.iter().enumerate() {
                    let tag = tok
                        .gold
                        .tag()
                        .ok_or_else(|| Error::validation(&self.id, format!("token {} has no BIO tag", i + 1)))?;
                    let parsed = bio::parse_tag(tag).ok_or_else(|| {
                        Error::validation(&self.id, format!("token {}: invalid BIO tag {tag:?}", i + 1))
                    })?;
                    if let bio::Tag::Inside(kind) = parsed {
                        if !bio::continues(prev, kind) {
                            return Err(Error::validation(
                                &self.id,
                                format!("token {}: {tag} does not continue a {kind} span", i + 1),
                            ));
                        }
                    }
                    prev = Some(tag);
                }
                Ok(())
            }
            TaskKind::Parsing => {
                let n = self.tokens.len();
                let mut heads = Vec::with_capacity(n);
                for (i, tok) in self.tokens.iter().enumerate() {
                    let head = tok
                        .gold
                        .head()
                        .ok_or_else(|| Error::validation(&self.id, format!("token {} has no head", i + 1)))?;
                    if head > n {
                        return Err(Error::validation(
                            &self.id,
                            format!("token {}: head {head} out of range", i + 1),
                        ));
                    }
                    if head == i + 1 {
                        return Err(Error::validation(&self.id, format!("token {} is its own head", i + 1)));
                    }
                    heads.push(head);
                }
                if let Some(m) = find_cycle(&heads) {
                    return Err(Error::validation(
                        &self.id,
                        format!("dependency cycle through token {m}"),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Returns a 1-based token on a cycle if the head vector is not a tree
/// rooted at 0.
pub fn find_cycle(heads: &[usize]) -> Option<usize> {
    let n = heads.len();
    // 0 = unvisited, 1 = on current path, 2 = known to reach the root
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    for start in 1..=n {
        let mut path = Vec::new();
        let mut node = start;
        while state[node] == 0 {
            state[node] = 1;
            path.push(node);
            let h = heads[node - 1];
            if h > n {
                return Some(node);
            }
            node = h;
        }
        if state[node] == 1 {
            return Some(node);
        }
        for p in path {
            state[p] = 2;
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub task: TaskKind,
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn new(task: TaskKind, sentences: Vec<Sentence>) -> Self {
        Corpus { task, sentences }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn n_tokens(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        self.sentences.iter().try_for_each(|s| s.validate(self.task))
    }

    /// Sorted, de-duplicated gold labels: BIO tags for tagging corpora,
    /// dependency relations for parsing corpora.
    pub fn label_inventory(&self) -> Vec<String> {
        let mut labels = BTreeSet::new();
        for tok in self.sentences.iter().flat_map(|s| &s.tokens) {
            match &tok.gold {
                Gold::Tag(t) => labels.insert(t.clone()),
                Gold::Dep { label, .. } => labels.insert(label.clone()),
            };
        }
        labels.into_iter().collect()
    }

    /// Entity types appearing in the BIO tags of a tagging corpus.
    pub fn entity_types(&self) -> Vec<String> {
        let mut kinds = BTreeSet::new();
        for tok in self.sentences.iter().flat_map(|s| &s.tokens) {
            if let Some(tag) = tok.gold.tag() {
                if let Some(bio::Tag::Begin(k) | bio::Tag::Inside(k)) = bio::parse_tag(tag) {
                    kinds.insert(k.to_string());
                }
            }
        }
        kinds.into_iter().collect()
    }
}
