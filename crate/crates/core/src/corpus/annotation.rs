use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Gold, Sentence, TaskKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnnotationStatus {
    Unlabeled,
    Partial,
    Full,
}

/// Per-sentence annotation: each position is either unconstrained or
/// fixed to its revealed gold value.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationState {
    revealed: Vec<Option<Gold>>,
}

impl AnnotationState {
    pub fn unlabeled(n: usize) -> Self {
        AnnotationState {
            revealed: vec![None; n],
        }
    }

    /// Every position fixed to gold.
    pub fn full(sentence: &Sentence) -> Self {
        AnnotationState {
            revealed: sentence.tokens.iter().map(|t| Some(t.gold.clone())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.revealed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.revealed.is_empty()
    }

    pub fn status(&self) -> AnnotationStatus {
        let annotated = self.n_annotated();
        if annotated == 0 {
            AnnotationStatus::Unlabeled
        } else if annotated == self.revealed.len() {
            AnnotationStatus::Full
        } else {
            AnnotationStatus::Partial
        }
    }

    /// The value a position is constrained to; `None` means unconstrained.
    pub fn constraint(&self, position: usize) -> Option<&Gold> {
        self.revealed[position].as_ref()
    }

    pub fn constraints(&self) -> &[Option<Gold>] {
        &self.revealed
    }

    pub fn annotated_mask(&self) -> Vec<bool> {
        self.revealed.iter().map(Option::is_some).collect()
    }

    pub fn n_annotated(&self) -> usize {
        self.revealed.iter().filter(|r| r.is_some()).count()
    }

    pub fn is_annotated(&self, position: usize) -> bool {
        self.revealed[position].is_some()
    }

    /// Reveals the gold value at `position`.
    pub fn reveal(&mut self, sentence: &Sentence, position: usize) {
        self.revealed[position] = Some(sentence.tokens[position].gold.clone());
    }

    /// Positions annotated here but not in `before`.
    pub fn newly_annotated(&self, before: &AnnotationState) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.is_annotated(i) && !before.is_annotated(i))
            .collect()
    }

    /// Union of two annotations of the same sentence.
    pub fn merge(&mut self, other: &AnnotationState) {
        for (mine, theirs) in self.revealed.iter_mut().zip(&other.revealed) {
            if mine.is_none() {
                mine.clone_from(theirs);
            }
        }
    }
}

/// Simulates an annotator answering `queried` positions from the gold
/// standard. For tagging, a queried position inside a gold mention reveals
/// the whole mention.
pub fn simulate_annotation(sentence: &Sentence, queried: &BTreeSet<usize>, task: TaskKind) -> AnnotationState {
    let mut state = AnnotationState::unlabeled(sentence.len());
    match task {
        TaskKind::Tagging => {
            let spans = sentence.gold_spans();
            for &q in queried {
                state.reveal(sentence, q);
                if let Some(span) = spans.iter().find(|s| s.contains(q)) {
                    for p in span.start..=span.end {
                        state.reveal(sentence, p);
                    }
                }
            }
        }
        TaskKind::Parsing => {
            for &q in queried {
                state.reveal(sentence, q);
            }
        }
    }
    state
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostMode {
    /// Full annotation of the sentence.
    Fa,
    /// Partial annotation: only the annotated positions are paid for.
    Pa,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostConfig {
    /// POS tags whose tokens are paid for under full tagging annotation.
    /// `None` counts every token.
    pub pos_filter: Option<BTreeSet<String>>,
    /// Count annotated heads instead of summing head-modifier distances.
    pub dpar_count_edges: bool,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            pos_filter: Some(["PROPN", "ADJ"].iter().map(|s| s.to_string()).collect()),
            dpar_count_edges: false,
        }
    }
}

impl CostConfig {
    pub fn unfiltered() -> Self {
        CostConfig {
            pos_filter: None,
            dpar_count_edges: false,
        }
    }
}

/// Labeling cost of `annotation`. Tagging FA counts POS-filtered tokens,
/// tagging PA counts annotated tokens, parsing sums `|position - head|` over
/// annotated positions (a root attachment costs the 1-based position).
pub fn count_labeling_cost(
    sentence: &Sentence,
    annotation: &AnnotationState,
    task: TaskKind,
    mode: CostMode,
    config: &CostConfig,
) -> f64 {
    match task {
        TaskKind::Tagging => match mode {
            CostMode::Fa => sentence
                .tokens
                .iter()
                .enumerate()
                .filter(|(i, _)| annotation.is_annotated(*i))
                .filter(|(_, t)| config.pos_filter.as_ref().is_none_or(|f| f.contains(&t.pos)))
                .count() as f64,
            CostMode::Pa => annotation.n_annotated() as f64,
        },
        TaskKind::Parsing => (0..sentence.len())
            .filter_map(|i| annotation.constraint(i).and_then(Gold::head).map(|h| (i + 1, h)))
            .map(|(m, h)| {
                if config.dpar_count_edges {
                    1.0
                } else {
                    m.abs_diff(h) as f64
                }
            })
            .sum(),
    }
}
