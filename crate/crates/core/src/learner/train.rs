use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{FeatureVector, SentenceFeatures};
use super::model::{gold_index, softmax, Marginals, Model};
use super::params::{slot, Block, TABLE_SIZE};
use crate::chain::{self, ChainGradient};
use crate::corpus::{AnnotationState, AnnotationStatus, Corpus, Gold, TaskKind};
use crate::error::{Error, Result};
use crate::eval;
use crate::tree::{self, ArcGradient};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    /// Sentences are added to a minibatch until it holds at least this
    /// many tokens.
    pub minibatch_tokens: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub eval_every: usize,
    /// Gold and pseudo minibatches per scheduling round.
    pub mixing: (usize, usize),
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            minibatch_tokens: 64,
            learning_rate: 0.1,
            l2: 1e-6,
            eval_every: 200,
            mixing: (1, 1),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("steps", self.steps),
            ("minibatch_tokens", self.minibatch_tokens),
            ("eval_every", self.eval_every),
            ("mixing", self.mixing.0),
            ("mixing", self.mixing.1),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::config("l2", "must be non-negative"));
        }
        Ok(())
    }
}

/// Cached teacher marginals for one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoLabel {
    pub sentence: usize,
    pub marginals: Marginals,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PseudoLabelSet {
    pub items: Vec<PseudoLabel>,
}

impl PseudoLabelSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// A corpus together with its precomputed features, indexed alike.
#[derive(Clone, Copy)]
pub struct TrainingData<'a> {
    pub corpus: &'a Corpus,
    pub features: &'a [SentenceFeatures],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// `(step, dev metric)` at every evaluation.
    pub dev_curve: Vec<(usize, f64)>,
    pub best_step: usize,
    pub best_dev: Option<f64>,
    /// Mean per-sentence gold loss of the returned parameters.
    pub train_loss: f64,
}

/// Teacher marginals for every sentence that still has unannotated
/// positions, computed under its annotation constraints.
pub fn make_pseudo_labels(
    model: &Model,
    data: TrainingData<'_>,
    targets: &[(usize, Option<&AnnotationState>)],
) -> Result<PseudoLabelSet> {
    use rayon::prelude::*;
    let items = targets
        .par_iter()
        .filter(|(_, s)| s.is_none_or(|s| s.status() != AnnotationStatus::Full))
        .map(|&(i, s)| {
            Ok(PseudoLabel {
                sentence: i,
                marginals: model.marginals(&data.features[i], s)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PseudoLabelSet { items })
}

enum Target<'a> {
    Gold(&'a AnnotationState),
    Pseudo(&'a Marginals),
}

struct Example<'a> {
    sentence: usize,
    target: Target<'a>,
}

/// Cycles through examples in shuffled order, reshuffling at every pass.
struct Stream {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl Stream {
    fn new(n: usize, seed: u64) -> Self {
        let mut s = Stream {
            order: (0..n).collect(),
            pos: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        s.order.shuffle(&mut s.rng);
        s
    }

    /// Next minibatch: at least `tokens` tokens, but never past the end of a
    /// pass so no example repeats within a batch.
    fn batch(&mut self, lengths: impl Fn(usize) -> usize, tokens: usize) -> Vec<usize> {
        if self.pos == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let mut out = Vec::new();
        let mut have = 0;
        while have < tokens && self.pos < self.order.len() {
            let e = self.order[self.pos];
            self.pos += 1;
            have += lengths(e);
            out.push(e);
        }
        out
    }
}

struct Adagrad {
    lr: f64,
    l2: f64,
    grad: Vec<f64>,
    accum: Vec<f64>,
    touched: Vec<u32>,
    marked: Vec<bool>,
    dense_grad: Vec<f64>,
    dense_accum: Vec<f64>,
}

impl Adagrad {
    fn new(config: &TrainConfig, dense: usize) -> Self {
        Adagrad {
            lr: config.learning_rate,
            l2: config.l2,
            grad: vec![0.0; TABLE_SIZE],
            accum: vec![0.0; TABLE_SIZE],
            touched: Vec::new(),
            marked: vec![false; TABLE_SIZE],
            dense_grad: vec![0.0; dense],
            dense_accum: vec![0.0; dense],
        }
    }

    fn add(&mut self, idx: usize, g: f64) {
        if !self.marked[idx] {
            self.marked[idx] = true;
            self.touched.push(idx as u32);
        }
        self.grad[idx] += g;
    }

    fn add_features(&mut self, fv: &FeatureVector, block: Block, width: usize, g: &[f64]) {
        for &(id, v) in &fv.entries {
            let s = slot(id, block, width);
            for (y, &gy) in g.iter().enumerate() {
                if gy != 0.0 {
                    self.add(s + y, v * gy);
                }
            }
        }
    }

    fn update(lr: f64, l2: f64, w: &mut f64, g: f64, acc: &mut f64) {
        let g = g + l2 * *w;
        *acc += g * g;
        if *acc > 0.0 {
            *w -= lr * g / acc.sqrt();
        }
    }

    /// Applies the accumulated gradient; L2 acts only on touched weights.
    fn step(&mut self, model: &mut Model) {
        let w = &mut model.params.weights;
        for &i in &self.touched {
            let i = i as usize;
            Self::update(self.lr, self.l2, &mut w[i], self.grad[i], &mut self.accum[i]);
            self.grad[i] = 0.0;
            self.marked[i] = false;
        }
        self.touched.clear();
        let p = &mut model.params;
        let dense = p
            .transitions
            .iter_mut()
            .chain(p.start.iter_mut())
            .chain(p.end.iter_mut());
        for ((w, g), acc) in dense.zip(self.dense_grad.iter_mut()).zip(self.dense_accum.iter_mut()) {
            if *g != 0.0 {
                Self::update(self.lr, self.l2, w, *g, acc);
                *g = 0.0;
            }
        }
    }
}

/// Minibatch schedule: each round of `g + p` steps starts with `g` gold
/// batches followed by `p` pseudo batches. Steps are 1-based.
pub(crate) fn is_pseudo_step(step: usize, (g, p): (usize, usize)) -> bool {
    (step - 1) % (g + p) >= g
}

/// Loss of one example; accumulates its gradient into `opt` when given.
fn example_loss(
    model: &Model,
    feats: &SentenceFeatures,
    sentence: &crate::corpus::Sentence,
    target: &Target<'_>,
    opt: Option<&mut Adagrad>,
) -> Result<f64> {
    match feats {
        SentenceFeatures::Tagging(tokens) => {
            let scores = model.chain_scores(tokens);
            let (loss, grad) = match target {
                Target::Gold(state) if state.status() == AnnotationStatus::Full => {
                    let gold = state
                        .constraints()
                        .iter()
                        .map(|g| gold_index(model, g.as_ref().expect("full annotation")))
                        .collect::<Result<Vec<_>>>()?;
                    chain::nll_full(&scores, &gold)?
                }
                Target::Gold(state) => chain::nll_partial(&scores, &model.constraint_mask(state)?)?,
                Target::Pseudo(Marginals::Chain(m)) => chain::kd_loss(m, &scores)?,
                Target::Pseudo(Marginals::Tree(_)) => {
                    return Err(Error::Dimension("tree teacher for a tagging model".into()))
                }
            };
            if let Some(opt) = opt {
                backprop_chain(opt, model, tokens, &grad);
            }
            Ok(loss)
        }
        SentenceFeatures::Parsing(arcs) => {
            let scores = model.arc_scores(arcs);
            let (mut loss, grad) = match target {
                Target::Gold(state) if state.status() == AnnotationStatus::Full => {
                    let heads: Vec<usize> = state
                        .constraints()
                        .iter()
                        .map(|g| g.as_ref().and_then(Gold::head).expect("full annotation"))
                        .collect();
                    tree::nll_full(&scores, &heads)?
                }
                Target::Gold(state) => tree::nll_partial(&scores, &model.head_constraints(state)?)?,
                Target::Pseudo(Marginals::Tree(m)) => tree::kd_loss(m, &scores)?,
                Target::Pseudo(Marginals::Chain(_)) => {
                    return Err(Error::Dimension("chain teacher for a parsing model".into()))
                }
            };
            let mut opt = opt;
            if let Some(opt) = opt.as_deref_mut() {
                backprop_arcs(opt, arcs, &grad);
            }
            if let Target::Gold(state) = target {
                loss += label_loss(model, arcs, sentence, state, opt)?;
            }
            Ok(loss)
        }
    }
}

fn backprop_chain(opt: &mut Adagrad, model: &Model, tokens: &[FeatureVector], grad: &ChainGradient) {
    let l = model.n_labels();
    for (i, fv) in tokens.iter().enumerate() {
        let row = grad.emissions.row(i);
        opt.add_features(fv, Block::Emission, l, row.as_slice().expect("row-major"));
    }
    let dense = grad.transitions.iter().chain(grad.start.iter()).chain(grad.end.iter());
    for (acc, &g) in opt.dense_grad.iter_mut().zip(dense) {
        if g.is_finite() {
            *acc += g;
        }
    }
}

fn backprop_arcs(opt: &mut Adagrad, arcs: &super::features::ArcFeatures, grad: &ArcGradient) {
    for ((h, j), &g) in grad.indexed_iter() {
        if g != 0.0 && h != j + 1 {
            opt.add_features(arcs.get(h, j + 1), Block::Arc, 1, &[g]);
        }
    }
}

/// Cross-entropy of the label classifier on annotated arcs.
fn label_loss(
    model: &Model,
    arcs: &super::features::ArcFeatures,
    sentence: &crate::corpus::Sentence,
    state: &AnnotationState,
    mut opt: Option<&mut Adagrad>,
) -> Result<f64> {
    let k = model.dep_labels.len();
    let mut loss = 0.0;
    for (j, g) in state.constraints().iter().enumerate() {
        let Some(Gold::Dep { head, label }) = g else { continue };
        let y = model
            .dep_label_index(label)
            .ok_or_else(|| Error::Constraint(format!("unknown relation {label:?} in {}", sentence.id)))?;
        let fv = arcs.get(*head, j + 1);
        let mut p = softmax(&model.label_scores(fv));
        loss -= p[y].max(f64::MIN_POSITIVE).ln();
        if let Some(opt) = opt.as_deref_mut() {
            p[y] -= 1.0;
            opt.add_features(fv, Block::ArcLabel, k, &p);
        }
    }
    Ok(loss)
}

fn dev_metric(model: &Model, data: TrainingData<'_>, dev: &[usize]) -> Result<f64> {
    Ok(eval::evaluate(model, data.corpus, data.features, dev)?.primary())
}

/// Trains fresh parameters (shaped like `template`) on the annotated
/// sentences plus optional pseudo labels, returning the parameters of the
/// best dev checkpoint.
pub fn train(
    template: &Model,
    data: TrainingData<'_>,
    labeled: &[(usize, &AnnotationState)],
    pseudo: Option<&PseudoLabelSet>,
    dev: &[usize],
    config: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    config.validate()?;
    if template.task != data.corpus.task {
        return Err(Error::config("task", "model and corpus tasks differ"));
    }
    let gold: Vec<Example<'_>> = labeled
        .iter()
        .filter(|(_, s)| s.n_annotated() > 0)
        .map(|&(i, s)| Example {
            sentence: i,
            target: Target::Gold(s),
        })
        .collect();
    if gold.is_empty() {
        return Err(Error::Empty("no annotated sentences to train on".into()));
    }
    let pseudo: Vec<Example<'_>> = pseudo
        .map(|p| {
            p.items
                .iter()
                .map(|item| Example {
                    sentence: item.sentence,
                    target: Target::Pseudo(&item.marginals),
                })
                .collect()
        })
        .unwrap_or_default();

    let mut model = template.fresh();
    let dense = model.params.transitions.len() + 2 * model.params.start.len();
    let mut opt = Adagrad::new(config, dense);
    let mut gold_stream = Stream::new(gold.len(), config.seed);
    let mut pseudo_stream = Stream::new(pseudo.len(), config.seed ^ 0x5bd1_e995);
    let len = |ex: &Example<'_>| data.features[ex.sentence].len();

    let mut report = TrainReport::default();
    let mut best: Option<(f64, Model)> = None;
    for step in 1..=config.steps {
        let use_pseudo = !pseudo.is_empty() && is_pseudo_step(step, config.mixing);
        let (examples, batch) = if use_pseudo {
            (
                &pseudo,
                pseudo_stream.batch(|e| len(&pseudo[e]), config.minibatch_tokens),
            )
        } else {
            (&gold, gold_stream.batch(|e| len(&gold[e]), config.minibatch_tokens))
        };
        let mut batch_loss = 0.0;
        for e in batch {
            let ex = &examples[e];
            let s = ex.sentence;
            batch_loss += example_loss(
                &model,
                &data.features[s],
                &data.corpus.sentences[s],
                &ex.target,
                Some(&mut opt),
            )?;
        }
        if !batch_loss.is_finite() {
            return Err(Error::Divergence { step, loss: batch_loss });
        }
        opt.step(&mut model);

        if !dev.is_empty() && (step % config.eval_every == 0 || step == config.steps) {
            let metric = dev_metric(&model, data, dev)?;
            report.dev_curve.push((step, metric));
            if best.as_ref().is_none_or(|(b, _)| metric > *b) {
                report.best_step = step;
                report.best_dev = Some(metric);
                best = Some((metric, model.clone()));
            }
        }
    }
    if let Some((_, m)) = best {
        model = m;
    } else {
        report.best_step = config.steps;
    }
    if !model.params.is_finite() {
        return Err(Error::Divergence {
            step: config.steps,
            loss: f64::NAN,
        });
    }
    report.train_loss = gold_loss(&model, data, labeled)?;
    Ok((model, report))
}

/// Mean per-sentence loss on annotated data (full or partial likelihood,
/// plus the label classifier for parsing).
pub fn gold_loss(model: &Model, data: TrainingData<'_>, labeled: &[(usize, &AnnotationState)]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0;
    for &(i, state) in labeled {
        if state.n_annotated() == 0 {
            continue;
        }
        total += example_loss(
            model,
            &data.features[i],
            &data.corpus.sentences[i],
            &Target::Gold(state),
            None,
        )?;
        count += 1;
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Whether a task's model can be trained on this corpus.
pub fn check_task(model: &Model, corpus: &Corpus) -> Result<()> {
    if model.task != corpus.task {
        return Err(Error::config("task", "model and corpus tasks differ"));
    }
    if corpus.task == TaskKind::Tagging {
        for s in &corpus.sentences {
            for t in s.gold_tags() {
                if model.label_index(t).is_none() {
                    return Err(Error::validation(
                        &s.id,
                        format!("tag {t:?} not in the model inventory"),
                    ));
                }
            }
        }
    }
    Ok(())
}
