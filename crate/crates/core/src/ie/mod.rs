//! Pipelined information extraction: mentions from a chain CRF, relations
//! from a local pair classifier, and the two-sub-task active-learning
//! extensions.
//!
//! Corpus format is JSON lines, one sentence per line:
//!
//! ```text
//! {"id": "s1", "tokens": ["Ann", "works", "at", "Acme"], "pos": ["PROPN", "VERB", "ADP", "PROPN"],
//!  "mentions": [{"start": 0, "end": 0, "type": "PER"}, {"start": 3, "end": 3, "type": "ORG"}],
//!  "relations": [{"head": 0, "tail": 1, "label": "WORK_FOR"}]}
//! ```
//!
//! `end` is inclusive, `pos` is optional and relations are unordered
//! pairs of mention indices.

mod active;
mod driver;
mod relation;
mod synthetic;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{bio, Corpus, Sentence, Span, TaskKind, Token};
use crate::error::{Error, Result};

pub use active::{
    annotate_relation, candidate_nil_probability, combine_uncertainty, match_mention, nil_adjusted_ratio,
    relation_sentence_uncertainty, second_stage_query, Endpoint, IEUncertainty, MatchRule, Mention, MentionMatch,
    MentionSource, RelationOutcome, R_PROBLEM,
};
pub use driver::{
    decode_mentions, evaluate_ie, IeAnnotation, IeConfig, IeCycleDetail, IeModels, IeSimulation, RelationFaCost,
};
pub use relation::{
    pair_features, train_relations, RelationCandidate, RelationExample, RelationModel, RelationTrainConfig, NONE_LABEL,
    RELATION_SNAPSHOT_FORMAT,
};
pub use synthetic::{generate_ie, IeSyntheticSpec};

/// Tag used for tokens without a POS column.
pub const NO_POS: &str = "X";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRelation {
    pub head: usize,
    pub tail: usize,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IeSentence {
    pub id: String,
    pub tokens: Vec<String>,
    pub pos: Vec<String>,
    /// Gold mentions sorted by position; they never overlap.
    pub mentions: Vec<Span>,
    pub relations: Vec<GoldRelation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireMention {
    start: usize,
    end: usize,
    #[serde(rename = "type")]
    kind: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireSentence {
    id: String,
    tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pos: Vec<String>,
    #[serde(default)]
    mentions: Vec<WireMention>,
    #[serde(default)]
    relations: Vec<GoldRelation>,
}

impl IeSentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn pos_at(&self, i: usize) -> &str {
        self.pos.get(i).map_or(NO_POS, String::as_str)
    }

    /// Gold label of the unordered mention pair, if related.
    pub fn relation_between(&self, a: usize, b: usize) -> Option<&str> {
        self.relations
            .iter()
            .find(|r| (r.head == a && r.tail == b) || (r.head == b && r.tail == a))
            .map(|r| r.label.as_str())
    }

    /// Index of the gold mention with exactly this extent and type.
    pub fn gold_index(&self, span: &Span) -> Option<usize> {
        self.mentions.iter().position(|m| m == span)
    }

    pub fn gold_tags(&self) -> Vec<String> {
        bio::encode(self.len(), &self.mentions)
    }

    /// The mention sub-task as a tagging sentence.
    pub fn to_tagging(&self) -> Sentence {
        let tags = self.gold_tags();
        let tokens = self
            .tokens
            .iter()
            .zip(tags)
            .enumerate()
            .map(|(i, (w, t))| Token::tagged(w.clone(), self.pos_at(i), t))
            .collect();
        Sentence::new(self.id.clone(), tokens)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::validation(self.id.clone(), msg));
        if self.tokens.is_empty() {
            return bad("sentence has no tokens".into());
        }
        if let Some(i) = self
            .tokens
            .iter()
            .position(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return bad(format!("token {i} is empty or contains whitespace"));
        }
        if !self.pos.is_empty() && self.pos.len() != self.tokens.len() {
            return bad(format!("{} POS tags for {} tokens", self.pos.len(), self.tokens.len()));
        }
        let mut prev_end: Option<usize> = None;
        for (k, m) in self.mentions.iter().enumerate() {
            if m.start > m.end || m.end >= self.len() {
                return bad(format!("mention {k} span {}..={} is out of range", m.start, m.end));
            }
            if m.kind.is_empty() || m.kind.chars().any(char::is_whitespace) || m.kind == NONE_LABEL {
                return bad(format!("mention {k} has invalid type {:?}", m.kind));
            }
            if prev_end.is_some_and(|e| m.start <= e) {
                return bad(format!("mention {k} overlaps or precedes the previous mention"));
            }
            prev_end = Some(m.end);
        }
        let mut pairs = BTreeSet::new();
        for (k, r) in self.relations.iter().enumerate() {
            if r.head >= self.mentions.len() || r.tail >= self.mentions.len() {
                return bad(format!("relation {k} refers to a missing mention"));
            }
            if r.head == r.tail {
                return bad(format!("relation {k} links a mention to itself"));
            }
            if r.label.is_empty() || r.label.chars().any(char::is_whitespace) || r.label == NONE_LABEL {
                return bad(format!("relation {k} has invalid label {:?}", r.label));
            }
            if !pairs.insert((r.head.min(r.tail), r.head.max(r.tail))) {
                return bad(format!("relation {k} duplicates an earlier pair"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IeCorpus {
    pub sentences: Vec<IeSentence>,
}

impl IeCorpus {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn n_tokens(&self) -> usize {
        self.sentences.iter().map(IeSentence::len).sum()
    }

    pub fn tagging_view(&self) -> Corpus {
        Corpus::new(
            TaskKind::Tagging,
            self.sentences.iter().map(IeSentence::to_tagging).collect(),
        )
    }

    pub fn entity_types(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .sentences
            .iter()
            .flat_map(|s| s.mentions.iter().map(|m| m.kind.as_str()))
            .collect();
        set.into_iter().map(String::from).collect()
    }

    pub fn relation_labels(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .sentences
            .iter()
            .flat_map(|s| s.relations.iter().map(|r| r.label.as_str()))
            .collect();
        set.into_iter().map(String::from).collect()
    }
}

/// Parses JSON lines; `origin` names the source in error messages. Blank
/// lines are skipped.
pub fn parse_ie_jsonl(text: &str, origin: &str) -> Result<IeCorpus> {
    let mut sentences = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_string(),
            line: k + 1,
            message,
        };
        let wire: WireSentence = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        let mentions: Vec<Span> = wire
            .mentions
            .into_iter()
            .map(|m| Span::new(m.start, m.end, m.kind))
            .collect();
        let sentence = IeSentence {
            id: wire.id,
            tokens: wire.tokens,
            pos: wire.pos,
            mentions,
            relations: wire.relations,
        };
        sentence.validate().map_err(|e| parse_err(e.to_string()))?;
        sentences.push(sentence);
    }
    Ok(IeCorpus { sentences })
}

pub fn read_ie_jsonl(path: &Path) -> Result<IeCorpus> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ie_jsonl(&text, &path.display().to_string())
}

pub fn to_ie_jsonl(corpus: &IeCorpus) -> String {
    let mut out = String::new();
    for s in &corpus.sentences {
        let wire = WireSentence {
            id: s.id.clone(),
            tokens: s.tokens.clone(),
            pos: s.pos.clone(),
            mentions: s
                .mentions
                .iter()
                .map(|m| WireMention {
                    start: m.start,
                    end: m.end,
                    kind: m.kind.clone(),
                })
                .collect(),
            relations: s.relations.clone(),
        };
        out.push_str(&serde_json::to_string(&wire).expect("IE sentences always serialize"));
        out.push('\n');
    }
    out
}
