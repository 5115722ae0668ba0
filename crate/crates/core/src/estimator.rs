//! One-feature logistic model of "confidently correct" predictions, and the
//! selection ratio it implies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{Model, TrainingData};

/// A sub-structure is confidently correct when its argmax is gold and its
/// margin exceeds this.
pub const CONFIDENCE_THRESHOLD: f64 = 0.5;
/// Offset inside the log transform so a zero margin stays finite.
pub const LOG_OFFSET: f64 = 1e-6;
const PROB_CLAMP: f64 = 1e-6;
const RIDGE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessSample {
    pub margin: f64,
    pub correct: bool,
}

impl CorrectnessSample {
    pub fn new(margin: f64, argmax_is_gold: bool) -> Self {
        CorrectnessSample {
            margin,
            correct: argmax_is_gold && margin > CONFIDENCE_THRESHOLD,
        }
    }
}

/// Marginal argmax correctness and margins for every sub-structure of the
/// dev sentences (tokens, or head decisions).
pub fn collect_dev_samples(model: &Model, data: TrainingData<'_>, dev: &[usize]) -> Result<Vec<CorrectnessSample>> {
    use rayon::prelude::*;
    if dev.is_empty() {
        return Err(Error::Empty("dev set is empty".into()));
    }
    let per_sentence = dev
        .par_iter()
        .map(|&i| {
            let m = model.marginals(&data.features[i], None)?;
            let gold = gold_indices(model, data, i)?;
            Ok(m.margins()
                .into_iter()
                .zip(m.argmax())
                .zip(gold)
                .map(|((margin, pred), g)| CorrectnessSample::new(margin, pred == g))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_sentence.into_iter().flatten().collect())
}

/// Gold label indices (tagging) or heads (parsing) of a sentence.
pub fn gold_indices(model: &Model, data: TrainingData<'_>, i: usize) -> Result<Vec<usize>> {
    let s = &data.corpus.sentences[i];
    match model.task {
        crate::corpus::TaskKind::Tagging => s
            .gold_tags()
            .into_iter()
            .map(|t| {
                model
                    .label_index(t)
                    .ok_or_else(|| Error::validation(&s.id, format!("unknown tag {t:?}")))
            })
            .collect(),
        crate::corpus::TaskKind::Parsing => Ok(s.gold_heads()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weight: f64,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn feature(margin: f64) -> f64 {
    (margin.max(0.0) + LOG_OFFSET).ln()
}

impl LogisticModel {
    /// Constant model predicting `p` (clamped away from 0 and 1).
    pub fn constant(p: f64) -> Self {
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        LogisticModel {
            weight: 0.0,
            bias: (p / (1.0 - p)).ln(),
        }
    }

    /// Probability of being confidently correct at `margin`.
    pub fn predict(&self, margin: f64) -> f64 {
        self.predict_feature(feature(margin))
    }

    fn predict_feature(&self, x: f64) -> f64 {
        sigmoid(self.weight * x + self.bias)
    }
}

fn objective(m: &LogisticModel, data: &[(f64, f64)]) -> f64 {
    let mut nll = 0.5 * RIDGE * m.weight * m.weight;
    for &(x, y) in data {
        let z = m.weight * x + m.bias;
        // log(1 + e^z) - y z, evaluated stably
        let softplus = if z > 0.0 {
            z + (-z).exp().ln_1p()
        } else {
            z.exp().ln_1p()
        };
        nll += softplus - y * z;
    }
    nll
}

/// Maximum-likelihood fit by damped Newton iterations. A tiny ridge on the
/// weight (not the bias) keeps separable data finite without disturbing
/// the mean-matching property of the intercept. Single-class input falls
/// back to a constant model.
pub fn fit_logistic(samples: &[CorrectnessSample]) -> LogisticModel {
    let positives = samples.iter().filter(|s| s.correct).count();
    if samples.is_empty() {
        return LogisticModel::constant(0.5);
    }
    if positives == 0 || positives == samples.len() {
        return LogisticModel::constant(positives as f64 / samples.len() as f64);
    }
    let data: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (feature(s.margin), if s.correct { 1.0 } else { 0.0 }))
        .collect();
    let rate = positives as f64 / samples.len() as f64;
    let mut m = LogisticModel::constant(rate);
    let mut current = objective(&m, &data);
    for _ in 0..100 {
        let (mut gw, mut gb) = (RIDGE * m.weight, 0.0);
        let (mut hww, mut hwb, mut hbb) = (RIDGE, 0.0, 0.0);
        for &(x, y) in &data {
            let p = m.predict_feature(x);
            let r = p - y;
            let v = p * (1.0 - p);
            gw += r * x;
            gb += r;
            hww += v * x * x;
            hwb += v * x;
            hbb += v;
        }
        if (gw * gw + gb * gb).sqrt() < 1e-10 {
            break;
        }
        let det = hww * hbb - hwb * hwb;
        let (dw, db) = if det > 0.0 && det.is_finite() {
            ((hbb * gw - hwb * gb) / det, (hww * gb - hwb * gw) / det)
        } else {
            (gw, gb)
        };
        let mut step = 1.0;
        loop {
            let next = LogisticModel {
                weight: m.weight - step * dw,
                bias: m.bias - step * db,
            };
            let value = objective(&next, &data);
            if value <= current || step < 1e-12 {
                if value <= current {
                    m = next;
                    current = value;
                }
                break;
            }
            step *= 0.5;
        }
        if step < 1e-12 {
            break;
        }
    }
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for RatioBounds {
    fn default() -> Self {
        RatioBounds { min: 0.02, max: 0.98 }
    }
}

impl RatioBounds {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.min && self.min <= self.max && self.max <= 1.0) {
            return Err(Error::config(
                "ratio_min",
                format!(
                    "need 0 <= ratio_min <= ratio_max <= 1, got {} and {}",
                    self.min, self.max
                ),
            ));
        }
        Ok(())
    }
}

/// One minus the mean predicted correctness over the query set, clamped.
pub fn adaptive_ratio(model: &LogisticModel, margins: &[f64], bounds: RatioBounds) -> Result<f64> {
    if margins.is_empty() {
        return Err(Error::Empty("query set is empty".into()));
    }
    let mean = margins.iter().map(|&m| model.predict(m)).sum::<f64>() / margins.len() as f64;
    Ok((1.0 - mean).clamp(bounds.min, bounds.max))
}
