//! Sentence uncertainty for two sub-tasks, the NIL-adjusted ratio and the
//! simulated relation annotator.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::relation::{RelationCandidate, NONE_LABEL};
use super::IeSentence;
use crate::corpus::Span;

/// Share of relation queries assumed wrong when a mention is wrong.
pub const R_PROBLEM: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MentionSource {
    Predicted,
    GoldCorrected,
    Annotated,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub span: Span,
    pub source: MentionSource,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IEUncertainty {
    pub unc_mention: f64,
    pub unc_relation: f64,
    pub beta: f64,
    pub combined: f64,
}

pub fn combine_uncertainty(unc_mention: f64, unc_relation: f64, beta: f64) -> IEUncertainty {
    IEUncertainty {
        unc_mention,
        unc_relation,
        beta,
        combined: beta * unc_mention + (1.0 - beta) * unc_relation,
    }
}

/// Each mention takes the largest uncertainty among the candidates that
/// touch it; the sentence score is the mean over mentions (0 without
/// mentions). `scores` holds `(mention a, mention b, uncertainty)`.
pub fn relation_sentence_uncertainty(n_mentions: usize, scores: &[(usize, usize, f64)]) -> f64 {
    if n_mentions == 0 {
        return 0.0;
    }
    let mut best = vec![0.0f64; n_mentions];
    for &(a, b, u) in scores {
        best[a] = best[a].max(u);
        best[b] = best[b].max(u);
    }
    best.iter().sum::<f64>() / n_mentions as f64
}

/// Probability that at least one token of a candidate is outside every
/// gold mention, from per-token NIL probabilities.
pub fn candidate_nil_probability(token_nil: &[f64]) -> f64 {
    1.0 - token_nil.iter().map(|p| 1.0 - p.clamp(0.0, 1.0)).product::<f64>()
}

/// `alpha * R_PROBLEM + (1 - alpha) * r_origin` with `alpha` the mean NIL
/// probability of the candidates; `r_origin` when there are none.
pub fn nil_adjusted_ratio(r_origin: f64, candidate_nil: &[f64]) -> f64 {
    if candidate_nil.is_empty() {
        return r_origin;
    }
    let alpha = candidate_nil.iter().sum::<f64>() / candidate_nil.len() as f64;
    alpha * R_PROBLEM + (1.0 - alpha) * r_origin
}

/// How predicted mentions are matched to gold ones.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchRule {
    /// Any token overlap; the largest overlap wins, then the earlier mention.
    #[default]
    Overlap,
    /// Only a mention with the same extent can be fixed (its type may
    /// still be corrected).
    Strict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MentionMatch {
    Exact(usize),
    Fixable(usize),
    Unfixable,
}

pub fn match_mention(predicted: &Span, gold: &[Span], rule: MatchRule) -> MentionMatch {
    if let Some(i) = gold.iter().position(|g| g == predicted) {
        return MentionMatch::Exact(i);
    }
    let best = match rule {
        MatchRule::Strict => gold.iter().position(|g| g.same_extent(predicted)),
        MatchRule::Overlap => gold
            .iter()
            .enumerate()
            .map(|(i, g)| (g.overlap(predicted), i))
            .filter(|&(o, _)| o > 0)
            .min_by_key(|&(o, i)| (std::cmp::Reverse(o), i))
            .map(|(_, i)| i),
    };
    best.map_or(MentionMatch::Unfixable, MentionMatch::Fixable)
}

/// One side of an annotated pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endpoint {
    /// Index of a gold mention (after correction).
    Gold(usize),
    /// A predicted mention with no gold counterpart.
    Spurious(Span),
}

impl Endpoint {
    pub fn span<'a>(&'a self, gold: &'a IeSentence) -> &'a Span {
        match self {
            Endpoint::Gold(i) => &gold.mentions[*i],
            Endpoint::Spurious(s) => s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelationOutcome {
    Annotated {
        a: Endpoint,
        b: Endpoint,
        label: String,
    },
    MentionsCorrected {
        a: Endpoint,
        b: Endpoint,
        label: String,
        /// Gold mentions the annotator had to fix.
        corrected: Vec<usize>,
    },
    Discarded,
}

impl RelationOutcome {
    /// Annotated pair and label, unless discarded.
    pub fn pair(&self) -> Option<(&Endpoint, &Endpoint, &str)> {
        match self {
            RelationOutcome::Annotated { a, b, label } | RelationOutcome::MentionsCorrected { a, b, label, .. } => {
                Some((a, b, label))
            }
            RelationOutcome::Discarded => None,
        }
    }

    pub fn corrected(&self) -> &[usize] {
        match self {
            RelationOutcome::MentionsCorrected { corrected, .. } => corrected,
            _ => &[],
        }
    }
}

/// Simulated annotator for one relation query over predicted mentions
/// `a` and `b`: fix what can be fixed, discard when neither side can be,
/// otherwise reveal the gold label (`NONE` when unrelated or spurious).
pub fn annotate_relation(a: &Span, b: &Span, gold: &IeSentence, rule: MatchRule) -> RelationOutcome {
    let ma = match_mention(a, &gold.mentions, rule);
    let mut mb = match_mention(b, &gold.mentions, rule);
    if ma == MentionMatch::Unfixable && mb == MentionMatch::Unfixable {
        return RelationOutcome::Discarded;
    }
    let index = |m: MentionMatch| match m {
        MentionMatch::Exact(i) | MentionMatch::Fixable(i) => Some(i),
        MentionMatch::Unfixable => None,
    };
    // Two predictions resolving to one gold mention: the second is spurious.
    if index(ma).is_some() && index(ma) == index(mb) {
        mb = MentionMatch::Unfixable;
    }
    let endpoint = |m: MentionMatch, span: &Span| match index(m) {
        Some(i) => Endpoint::Gold(i),
        None => Endpoint::Spurious(span.clone()),
    };
    let label = match (index(ma), index(mb)) {
        (Some(i), Some(j)) => gold.relation_between(i, j).unwrap_or(NONE_LABEL),
        _ => NONE_LABEL,
    }
    .to_string();
    let corrected: Vec<usize> = [ma, mb]
        .iter()
        .filter_map(|m| match m {
            MentionMatch::Fixable(i) => Some(*i),
            _ => None,
        })
        .collect();
    let (a, b) = (endpoint(ma, a), endpoint(mb, b));
    if corrected.is_empty() {
        RelationOutcome::Annotated { a, b, label }
    } else {
        RelationOutcome::MentionsCorrected { a, b, label, corrected }
    }
}

/// Canonical key of an unordered span pair.
pub fn pair_key(a: &Span, b: &Span) -> (Span, Span) {
    if (a.start, a.end, &a.kind) <= (b.start, b.end, &b.kind) {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

/// Extra queries after the first stage: candidates touching a mention in
/// `changed` that were not asked before, the `ceil(r n)` most uncertain of
/// them (ties by candidate order). Returns candidate indices.
pub fn second_stage_query(
    mentions: &[Span],
    candidates: &[RelationCandidate],
    changed: &[Span],
    asked: &BTreeSet<(Span, Span)>,
    r: f64,
) -> Vec<usize> {
    let touches = |s: &Span| changed.iter().any(|c| c.same_extent(s));
    let mut eligible: Vec<usize> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| touches(&mentions[c.a]) || touches(&mentions[c.b]))
        .filter(|(_, c)| !asked.contains(&pair_key(&mentions[c.a], &mentions[c.b])))
        .map(|(k, _)| k)
        .collect();
    let take = ((r * eligible.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    eligible.sort_by(|&x, &y| candidates[x].margin.total_cmp(&candidates[y].margin).then(x.cmp(&y)));
    eligible.truncate(take);
    eligible.sort_unstable();
    eligible
}
