//! Evaluation metrics: labeled span P/R/F1, attachment scores.
//!
//! Precision and recall with an empty denominator are 0, and so is F1 when
//! both are 0.

use serde::{Deserialize, Serialize};

use crate::corpus::{bio, Corpus, TaskKind};
use crate::error::{Error, Result};
use crate::learner::{Model, Prediction, SentenceFeatures};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn prf(correct: usize, predicted: usize, gold: usize) -> Prf {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(correct, predicted);
    let recall = ratio(correct, gold);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Prf { precision, recall, f1 }
}

/// Span counts `(correct, predicted, gold)` for one sentence, exact
/// boundary and type match.
pub fn span_counts<G: AsRef<str>, P: AsRef<str>>(gold: &[G], predicted: &[P]) -> (usize, usize, usize) {
    let g = bio::spans(gold);
    let p = bio::spans(predicted);
    let correct = p.iter().filter(|s| g.contains(s)).count();
    (correct, p.len(), g.len())
}

/// Micro-averaged span P/R/F1 over sentence pairs `(gold, predicted)`.
pub fn span_prf<'a, I>(pairs: I) -> Prf
where
    I: IntoIterator<Item = (&'a [String], &'a [String])>,
{
    let (mut c, mut p, mut g) = (0, 0, 0);
    for (gold, pred) in pairs {
        let (a, b, d) = span_counts(gold, pred);
        c += a;
        p += b;
        g += d;
    }
    prf(c, p, g)
}

/// Attachment counts `(tokens, head correct, head and label correct)`.
pub fn attachment_counts(
    gold_heads: &[usize],
    gold_labels: &[&str],
    heads: &[usize],
    labels: &[String],
) -> (usize, usize, usize) {
    let mut uas = 0;
    let mut las = 0;
    for i in 0..gold_heads.len() {
        if heads.get(i) == Some(&gold_heads[i]) {
            uas += 1;
            if labels.get(i).map(String::as_str) == Some(gold_labels[i]) {
                las += 1;
            }
        }
    }
    (gold_heads.len(), uas, las)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum EvalReport {
    Tagging { precision: f64, recall: f64, f1: f64 },
    Parsing { las: f64, uas: f64 },
    Ie { mention_f1: f64, relation_f1: f64 },
}

impl EvalReport {
    /// The headline number: span F1, LAS, or relation F1.
    pub fn primary(&self) -> f64 {
        match *self {
            EvalReport::Tagging { f1, .. } => f1,
            EvalReport::Parsing { las, .. } => las,
            EvalReport::Ie { relation_f1, .. } => relation_f1,
        }
    }
}

/// Decodes every sentence in `indices` and scores it against gold.
pub fn evaluate(
    model: &Model,
    corpus: &Corpus,
    features: &[SentenceFeatures],
    indices: &[usize],
) -> Result<EvalReport> {
    use rayon::prelude::*;
    if model.task != corpus.task {
        return Err(Error::config(
            "task",
            format!("model is for {} but data is {}", model.task, corpus.task),
        ));
    }
    let predictions: Vec<Prediction> = indices
        .par_iter()
        .map(|&i| model.predict(&features[i]))
        .collect::<Result<_>>()?;
    match corpus.task {
        TaskKind::Tagging => {
            let (mut c, mut p, mut g) = (0, 0, 0);
            for (&i, pred) in indices.iter().zip(&predictions) {
                let Prediction::Tags(tags) = pred else { unreachable!() };
                let (a, b, d) = span_counts(&corpus.sentences[i].gold_tags(), tags);
                c += a;
                p += b;
                g += d;
            }
            let r = prf(c, p, g);
            Ok(EvalReport::Tagging {
                precision: r.precision,
                recall: r.recall,
                f1: r.f1,
            })
        }
        TaskKind::Parsing => {
            let (mut n, mut u, mut l) = (0, 0, 0);
            for (&i, pred) in indices.iter().zip(&predictions) {
                let Prediction::Tree { heads, labels } = pred else {
                    unreachable!()
                };
                let s = &corpus.sentences[i];
                let (a, b, c) = attachment_counts(&s.gold_heads(), &s.gold_deprels(), heads, labels);
                n += a;
                u += b;
                l += c;
            }
            let ratio = |a: usize| if n == 0 { 0.0 } else { a as f64 / n as f64 };
            Ok(EvalReport::Parsing {
                las: ratio(l),
                uas: ratio(u),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn perfect_and_empty() {
        let g = tags("B-PER I-PER O B-LOC");
        let r = span_prf([(g.as_slice(), g.as_slice())]);
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        let none = tags("O O O O");
        let r = span_prf([(g.as_slice(), none.as_slice())]);
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hand_counted_fixture() {
        // 4 gold spans, 3 predicted, 2 correct.
        let gold = [tags("B-PER O B-LOC"), tags("B-ORG I-ORG O"), tags("O B-PER O")];
        let pred = [tags("B-PER O B-ORG"), tags("B-ORG I-ORG O"), tags("O O O")];
        let r = span_prf(gold.iter().zip(&pred).map(|(g, p)| (g.as_slice(), p.as_slice())));
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.recall - 0.5).abs() < 1e-12);
        assert!((r.f1 - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn type_and_boundary_must_match() {
        assert_eq!(span_counts(&tags("B-PER I-PER"), &tags("B-PER O")), (0, 1, 1));
        assert_eq!(span_counts(&tags("B-PER"), &tags("B-LOC")), (0, 1, 1));
    }

    #[test]
    fn attachment() {
        let (n, u, l) = attachment_counts(
            &[2, 0, 2],
            &["det", "root", "obj"],
            &[2, 0, 1],
            &["det".into(), "nsubj".into(), "obj".into()],
        );
        assert_eq!((n, u, l), (3, 2, 1));
    }
}
