//! Active learning over the two IE sub-tasks.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::active::{
    annotate_relation, candidate_nil_probability, combine_uncertainty, nil_adjusted_ratio, pair_key,
    relation_sentence_uncertainty, second_stage_query, MatchRule, Mention, MentionSource,
};
use super::relation::{
    pair_features, train_relations, RelationCandidate, RelationExample, RelationModel, RelationTrainConfig, NONE_LABEL,
};
use super::{IeCorpus, IeSentence};
use crate::corpus::{bio, simulate_annotation, AnnotationState, Corpus, PoolState, Span, TaskKind};
use crate::error::{Error, Result};
use crate::estimator::{self, CorrectnessSample, LogisticModel};
use crate::eval::{self, EvalReport};
use crate::learner::{self, Marginals, Model, Prediction, SentenceFeatures, TrainConfig, TrainingData};
use crate::selector::{self, derive_seed, ALConfig, CycleRecord, RatioMode, SentenceScore, Strategy};

/// How full annotation of relations is charged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationFaCost {
    /// One unit per unordered pair of gold mentions.
    #[default]
    Pairs,
    /// Two units per gold mention.
    TwiceEntities,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IeConfig {
    /// Weight of mention uncertainty against relation uncertainty.
    pub beta: f64,
    pub match_rule: MatchRule,
    pub relation_fa_cost: RelationFaCost,
    pub relation: RelationTrainConfig,
    pub second_stage: bool,
}

impl Default for IeConfig {
    fn default() -> Self {
        IeConfig {
            beta: 0.9,
            match_rule: MatchRule::Overlap,
            relation_fa_cost: RelationFaCost::Pairs,
            relation: RelationTrainConfig::default(),
            second_stage: true,
        }
    }
}

impl IeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::config("beta", format!("must lie in [0, 1], got {}", self.beta)));
        }
        self.relation.validate()
    }
}

/// Cumulative per-sub-task accounting of an IE run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IeCycleDetail {
    pub mention_ratio: f64,
    pub relation_ratio: f64,
    /// Mean NIL probability of this cycle's first-stage candidates.
    pub nil_alpha: f64,
    pub mention_cost: f64,
    pub relation_cost: f64,
    pub relation_queries: usize,
    pub discarded: usize,
    pub corrected_mentions: usize,
    pub second_stage_queries: usize,
}

/// What is known about one annotated sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IeAnnotation {
    pub mentions: AnnotationState,
    /// Revealed relation labels keyed by canonical span pair.
    pub relations: BTreeMap<(Span, Span), String>,
    /// Predicted pairs already shown to the annotator.
    pub asked: BTreeSet<(Span, Span)>,
    pub known: Vec<Mention>,
}

impl IeAnnotation {
    pub fn empty(n: usize) -> Self {
        IeAnnotation {
            mentions: AnnotationState::unlabeled(n),
            relations: BTreeMap::new(),
            asked: BTreeSet::new(),
            known: Vec::new(),
        }
    }

    pub fn full(sentence: &IeSentence) -> Self {
        let mut relations = BTreeMap::new();
        let m = &sentence.mentions;
        for a in 0..m.len() {
            for b in a + 1..m.len() {
                let label = sentence.relation_between(a, b).unwrap_or(NONE_LABEL);
                relations.insert(pair_key(&m[a], &m[b]), label.to_string());
            }
        }
        IeAnnotation {
            mentions: AnnotationState::full(&sentence.to_tagging()),
            relations,
            asked: BTreeSet::new(),
            known: m
                .iter()
                .map(|s| Mention {
                    span: s.clone(),
                    source: MentionSource::Annotated,
                })
                .collect(),
        }
    }

    /// Reveals every token of a gold mention; returns the number of newly
    /// revealed tokens.
    fn reveal_mention(&mut self, tagging: &crate::corpus::Sentence, span: &Span, source: MentionSource) -> usize {
        let mut fresh = 0;
        for p in span.start..=span.end {
            if !self.mentions.is_annotated(p) {
                self.mentions.reveal(tagging, p);
                fresh += 1;
            }
        }
        if !self.known.iter().any(|m| &m.span == span) {
            self.known.push(Mention {
                span: span.clone(),
                source,
            });
        }
        fresh
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IeModels {
    pub mention: Model,
    pub relation: RelationModel,
}

/// Mentions decoded from per-position marginal argmax, with orphan `I-`
/// tags repaired.
pub fn decode_mentions(model: &Model, marginals: &Marginals) -> Vec<Span> {
    let mut tags: Vec<String> = marginals
        .argmax()
        .into_iter()
        .map(|y| model.labels[y].clone())
        .collect();
    bio::repair(&mut tags);
    bio::spans(&tags)
}

fn relation_uncertainty(candidates: &[RelationCandidate]) -> Vec<(usize, usize, f64)> {
    candidates.iter().map(|c| (c.a, c.b, c.uncertainty())).collect()
}

/// Gold relation label index of a candidate over predicted mentions:
/// the gold label when both sides match gold exactly, else `NONE`.
fn candidate_gold(relation: &RelationModel, gold: &IeSentence, a: &Span, b: &Span) -> usize {
    match (gold.gold_index(a), gold.gold_index(b)) {
        (Some(i), Some(j)) => gold
            .relation_between(i, j)
            .and_then(|l| relation.label_index(l))
            .unwrap_or(0),
        _ => 0,
    }
}

/// Mention F1 from Viterbi decoding and relation F1 over predicted
/// mentions, pairs matched by extent and label.
pub fn evaluate_ie(
    models: &IeModels,
    corpus: &IeCorpus,
    features: &[SentenceFeatures],
    indices: &[usize],
) -> Result<EvalReport> {
    type Triple = (usize, usize, usize, usize, String);
    let key = |a: &Span, b: &Span, label: &str| -> Triple {
        let (x, y) = if (a.start, a.end) <= (b.start, b.end) {
            (a, b)
        } else {
            (b, a)
        };
        (x.start, x.end, y.start, y.end, label.to_string())
    };
    let counts: Vec<[usize; 6]> = indices
        .par_iter()
        .map(|&i| {
            let s = &corpus.sentences[i];
            let Prediction::Tags(tags) = models.mention.predict(&features[i])? else {
                return Err(Error::config("task", "mention model must be a tagger"));
            };
            let (mc, mp, mg) = eval::span_counts(&s.gold_tags(), &tags);
            let spans = bio::spans(&tags);
            let predicted: BTreeSet<Triple> = models
                .relation
                .candidates(&s.tokens, &spans)
                .iter()
                .filter(|c| c.argmax() != 0)
                .map(|c| key(&spans[c.a], &spans[c.b], &models.relation.labels[c.argmax()]))
                .collect();
            let gold: BTreeSet<Triple> = s
                .relations
                .iter()
                .map(|r| key(&s.mentions[r.head], &s.mentions[r.tail], &r.label))
                .collect();
            let rc = predicted.intersection(&gold).count();
            Ok([mc, mp, mg, rc, predicted.len(), gold.len()])
        })
        .collect::<Result<_>>()?;
    let mut t = [0usize; 6];
    for c in counts {
        for k in 0..6 {
            t[k] += c[k];
        }
    }
    Ok(EvalReport::Ie {
        mention_f1: eval::prf(t[0], t[1], t[2]).f1,
        relation_f1: eval::prf(t[3], t[4], t[5]).f1,
    })
}

/// A pool sentence scored at query time.
struct Scored {
    index: usize,
    tokens: usize,
    combined: f64,
    marginals: Marginals,
    spans: Vec<Span>,
    candidates: Vec<RelationCandidate>,
}

pub struct IeSimulation<'a> {
    pub al: ALConfig,
    pub config: IeConfig,
    pub train_config: TrainConfig,
    pool: &'a IeCorpus,
    test: &'a IeCorpus,
    pool_view: Corpus,
    pool_feats: Vec<SentenceFeatures>,
    test_feats: Vec<SentenceFeatures>,
    mention_template: Model,
    relation_template: RelationModel,
    seed: u64,
    pub state: PoolState,
    pub annotations: BTreeMap<usize, IeAnnotation>,
    pub models: IeModels,
    rng: ChaCha8Rng,
    cycle: usize,
    reading: usize,
    detail: IeCycleDetail,
    annotated: usize,
}

impl<'a> IeSimulation<'a> {
    pub fn new(
        al: &ALConfig,
        config: &IeConfig,
        train_config: &TrainConfig,
        pool: &'a IeCorpus,
        test: &'a IeCorpus,
        seed: u64,
    ) -> Result<Self> {
        al.validate()?;
        config.validate()?;
        train_config.validate()?;
        let mut types = pool.entity_types();
        types.extend(test.entity_types());
        types.sort();
        types.dedup();
        let mut rel = pool.relation_labels();
        rel.extend(test.relation_labels());
        rel.sort();
        rel.dedup();
        let mention_template = Model::new(TaskKind::Tagging, learner::bio_labels(&types), vec![])?;
        let relation_template = RelationModel::new(&rel)?;
        let pool_view = pool.tagging_view();
        let pool_feats = learner::featurize_corpus(&pool_view);
        let test_feats = learner::featurize_corpus(&test.tagging_view());
        let data = TrainingData {
            corpus: &pool_view,
            features: &pool_feats,
        };
        let state = selector::initial_pool(data, al.batch_tokens, al.cycles, seed)?;
        let models = IeModels {
            mention: mention_template.clone(),
            relation: relation_template.clone(),
        };
        let mut sim = IeSimulation {
            al: al.clone(),
            config: config.clone(),
            train_config: train_config.clone(),
            pool,
            test,
            pool_view,
            pool_feats,
            test_feats,
            mention_template,
            relation_template,
            seed,
            state,
            annotations: BTreeMap::new(),
            models,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 0xa11ce)),
            cycle: 0,
            reading: 0,
            detail: IeCycleDetail::default(),
            annotated: 0,
        };
        sim.models = sim.fit()?;
        Ok(sim)
    }

    fn data(&self) -> TrainingData<'_> {
        TrainingData {
            corpus: &self.pool_view,
            features: &self.pool_feats,
        }
    }

    fn dev(&self) -> Vec<usize> {
        self.state.dev.iter().copied().collect()
    }

    fn relation_examples(&self, i: usize, ann: &IeAnnotation) -> Vec<RelationExample> {
        let tokens = &self.pool.sentences[i].tokens;
        let k = self.relation_template.labels.len();
        ann.relations
            .iter()
            .filter_map(|((a, b), label)| {
                let y = self.relation_template.label_index(label)?;
                Some(RelationExample::gold(pair_features(tokens, a, b), y, k))
            })
            .collect()
    }

    /// Trains both sub-task models; with self-training, second models
    /// learn from the first ones' soft predictions.
    pub fn fit(&self) -> Result<IeModels> {
        let data = self.data();
        let seed_full: Vec<(usize, IeAnnotation)> = self
            .state
            .seed
            .iter()
            .map(|&i| (i, IeAnnotation::full(&self.pool.sentences[i])))
            .collect();
        let all: Vec<(usize, &IeAnnotation)> = seed_full
            .iter()
            .map(|(i, a)| (*i, a))
            .chain(self.annotations.iter().map(|(i, a)| (*i, a)))
            .collect();
        let labeled: Vec<(usize, &AnnotationState)> = all.iter().map(|(i, a)| (*i, &a.mentions)).collect();
        let gold: Vec<RelationExample> = all.iter().flat_map(|(i, a)| self.relation_examples(*i, a)).collect();
        let dev = self.dev();
        let mut cfg = self.train_config.clone();
        cfg.seed = derive_seed(self.seed, self.cycle, 1);
        let (mention, _) = learner::train(&self.mention_template, data, &labeled, None, &dev, &cfg)?;
        let mut rcfg = self.config.relation.clone();
        rcfg.seed = derive_seed(self.seed, self.cycle, 3);
        let relation = train_relations(&self.relation_template, &gold, &rcfg)?;
        if !self.al.self_training {
            return Ok(IeModels { mention, relation });
        }

        let partial: Vec<(usize, &IeAnnotation)> = self
            .annotations
            .iter()
            .filter(|(_, a)| a.mentions.n_annotated() < a.mentions.len())
            .map(|(i, a)| (*i, a))
            .collect();
        let targets: Vec<(usize, Option<&AnnotationState>)> = self
            .state
            .unlabeled
            .iter()
            .map(|&i| (i, None))
            .chain(partial.iter().map(|(i, a)| (*i, Some(&a.mentions))))
            .collect();
        let pseudo = learner::make_pseudo_labels(&mention, data, &targets)?;
        let k = self.relation_template.labels.len();
        let soft: Vec<Vec<RelationExample>> = targets
            .par_iter()
            .map(|&(i, state)| {
                let m = mention.marginals(&self.pool_feats[i], state)?;
                let spans = decode_mentions(&mention, &m);
                let tokens = &self.pool.sentences[i].tokens;
                let known = self.annotations.get(&i);
                Ok(relation
                    .candidates(tokens, &spans)
                    .into_iter()
                    .filter(|c| known.is_none_or(|a| !a.relations.contains_key(&pair_key(&spans[c.a], &spans[c.b]))))
                    .map(|c| {
                        debug_assert_eq!(c.distribution.len(), k);
                        RelationExample {
                            features: pair_features(tokens, &spans[c.a], &spans[c.b]),
                            target: c.distribution,
                        }
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        cfg.seed = derive_seed(self.seed, self.cycle, 2);
        let (mention2, _) = learner::train(&self.mention_template, data, &labeled, Some(&pseudo), &dev, &cfg)?;
        let mut examples = gold;
        examples.extend(soft.into_iter().flatten());
        rcfg.seed = derive_seed(self.seed, self.cycle, 4);
        let relation2 = train_relations(&self.relation_template, &examples, &rcfg)?;
        Ok(IeModels {
            mention: mention2,
            relation: relation2,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.cycle >= self.al.cycles || self.state.budget_remaining == 0 || self.state.unlabeled.is_empty()
    }

    fn score_pool(&self) -> Result<Vec<Scored>> {
        let beta = self.config.beta;
        let acq = self.al.acquisition;
        let unlabeled: Vec<usize> = self.state.unlabeled.iter().copied().collect();
        unlabeled
            .par_iter()
            .map(|&i| {
                let marginals = self.models.mention.marginals(&self.pool_feats[i], None)?;
                let pr = marginals.priorities(acq);
                let unc_m = pr.iter().map(|p| 1.0 - p).sum::<f64>() / pr.len() as f64;
                let spans = decode_mentions(&self.models.mention, &marginals);
                let candidates = self.models.relation.candidates(&self.pool.sentences[i].tokens, &spans);
                let unc_r = relation_sentence_uncertainty(spans.len(), &relation_uncertainty(&candidates));
                Ok(Scored {
                    index: i,
                    tokens: pr.len(),
                    combined: combine_uncertainty(unc_m, unc_r, beta).combined,
                    marginals,
                    spans,
                    candidates,
                })
            })
            .collect()
    }

    /// Correctness samples of relation candidates over predicted mentions
    /// in the dev set.
    fn relation_dev_samples(&self) -> Result<Vec<CorrectnessSample>> {
        let dev = self.dev();
        let per: Vec<Vec<CorrectnessSample>> = dev
            .par_iter()
            .map(|&i| {
                let m = self.models.mention.marginals(&self.pool_feats[i], None)?;
                let spans = decode_mentions(&self.models.mention, &m);
                let s = &self.pool.sentences[i];
                Ok(self
                    .models
                    .relation
                    .candidates(&s.tokens, &spans)
                    .iter()
                    .map(|c| {
                        let g = candidate_gold(&self.models.relation, s, &spans[c.a], &spans[c.b]);
                        CorrectnessSample::new(c.margin, c.argmax() == g)
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok(per.into_iter().flatten().collect())
    }

    /// Maps the outside-tag marginal of a token predicted inside a mention
    /// to the probability that it is outside every gold mention.
    fn nil_model(&self) -> Result<LogisticModel> {
        let o = self
            .models
            .mention
            .label_index("O")
            .ok_or_else(|| Error::config("labels", "mention labels lack O"))?;
        let dev = self.dev();
        let per: Vec<Vec<CorrectnessSample>> = dev
            .par_iter()
            .map(|&i| {
                let m = self.models.mention.marginals(&self.pool_feats[i], None)?;
                let gold = self.pool_view.sentences[i].gold_tags();
                Ok(m.argmax()
                    .iter()
                    .enumerate()
                    .filter(|(_, &y)| y != o)
                    .map(|(p, _)| CorrectnessSample {
                        margin: m.row(p)[o],
                        correct: gold[p] == "O",
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        let samples: Vec<CorrectnessSample> = per.into_iter().flatten().collect();
        Ok(estimator::fit_logistic(&samples))
    }

    fn annotate_query(
        &mut self,
        i: usize,
        ann: &mut IeAnnotation,
        a: &Span,
        b: &Span,
        corrected: &mut BTreeSet<usize>,
    ) {
        let pool = self.pool;
        let gold = &pool.sentences[i];
        ann.asked.insert(pair_key(a, b));
        let outcome = annotate_relation(a, b, gold, self.config.match_rule);
        let Some((ea, eb, label)) = outcome.pair() else {
            self.detail.discarded += 1;
            return;
        };
        self.detail.relation_queries += 1;
        self.detail.relation_cost += 1.0;
        let key = pair_key(ea.span(gold), eb.span(gold));
        ann.relations.insert(key, label.to_string());
        for &g in outcome.corrected() {
            let fresh = ann.reveal_mention(
                &self.pool_view.sentences[i],
                &gold.mentions[g],
                MentionSource::GoldCorrected,
            );
            if fresh > 0 && corrected.insert(g) {
                self.detail.corrected_mentions += 1;
            }
        }
    }

    /// Queries, annotates and retrains once.
    pub fn run_cycle(&mut self) -> Result<CycleRecord> {
        if self.state.budget_remaining == 0 {
            return Err(Error::config("cycles", "annotation budget is exhausted"));
        }
        self.cycle += 1;
        let b = self.al.batch_tokens;
        let acq = self.al.acquisition;
        let scored = self.score_pool()?;
        let selected = match self.al.strategy {
            Strategy::Rand => {
                let pool: Vec<usize> = self.state.unlabeled.iter().copied().collect();
                let data = TrainingData {
                    corpus: &self.pool_view,
                    features: &self.pool_feats,
                };
                selector::random_query(&pool, data, b, &mut self.rng)
            }
            _ => {
                let scores: Vec<SentenceScore> = scored
                    .iter()
                    .map(|s| SentenceScore {
                        index: s.index,
                        tokens: s.tokens,
                        score: -s.combined,
                    })
                    .collect();
                selector::rank_and_take(&scores, b)
            }
        };
        let by_index: BTreeMap<usize, &Scored> = scored.iter().map(|s| (s.index, s)).collect();
        let chosen: Vec<&Scored> = selected.iter().map(|i| by_index[i]).collect();

        // Mention error estimate over the tokens of S.
        let dev = self.dev();
        let samples = estimator::collect_dev_samples(&self.models.mention, self.data(), &dev)?;
        let logistic = estimator::fit_logistic(&samples);
        let mut margins = Vec::new();
        let mut wrong = 0usize;
        for s in &chosen {
            let gold = estimator::gold_indices(&self.models.mention, self.data(), s.index)?;
            wrong += s.marginals.argmax().iter().zip(&gold).filter(|(p, g)| p != g).count();
            margins.extend(s.marginals.margins());
        }
        let q = margins.len().max(1) as f64;
        let estimated_error = 1.0 - margins.iter().map(|&m| logistic.predict(m)).sum::<f64>() / q;
        let actual_error = wrong as f64 / q;

        let bounds = self.al.ratio_bounds;
        let mut mention_ratio = 1.0;
        let mut relation_ratio = 1.0;
        let mut nil_alpha = 0.0;
        let mut new_annotations: Vec<(usize, IeAnnotation)> = Vec::new();
        match self.al.strategy {
            Strategy::Fa | Strategy::Rand => {
                for &i in &selected {
                    let s = &self.pool.sentences[i];
                    let ann = IeAnnotation::full(s);
                    self.detail.mention_cost += s.len() as f64;
                    let n = s.mentions.len();
                    self.detail.relation_cost += match self.config.relation_fa_cost {
                        RelationFaCost::Pairs => (n * n.saturating_sub(1) / 2) as f64,
                        RelationFaCost::TwiceEntities => 2.0 * n as f64,
                    };
                    new_annotations.push((i, ann));
                }
            }
            Strategy::Pa => {
                mention_ratio = match self.al.ratio {
                    RatioMode::Adaptive => estimator::adaptive_ratio(&logistic, &margins, bounds)?,
                    RatioMode::Fixed(r) => r,
                };
                let token_priorities: Vec<(usize, Vec<f64>)> =
                    chosen.iter().map(|s| (s.index, s.marginals.priorities(acq))).collect();
                let token_pick = selector::partial_select(&token_priorities, mention_ratio);

                let rel_margins: Vec<f64> = chosen
                    .iter()
                    .flat_map(|s| s.candidates.iter().map(|c| c.margin))
                    .collect();
                let r_origin = match (self.al.ratio, rel_margins.is_empty()) {
                    (RatioMode::Fixed(r), _) => r,
                    (RatioMode::Adaptive, true) => mention_ratio,
                    (RatioMode::Adaptive, false) => {
                        let rel_model = estimator::fit_logistic(&self.relation_dev_samples()?);
                        estimator::adaptive_ratio(&rel_model, &rel_margins, bounds)?
                    }
                };
                let nil = self.nil_model()?;
                let o = self.models.mention.label_index("O").unwrap_or(0);
                let alphas: Vec<f64> = chosen
                    .iter()
                    .flat_map(|s| {
                        s.candidates.iter().map(|c| {
                            let p: Vec<f64> = [&s.spans[c.a], &s.spans[c.b]]
                                .iter()
                                .flat_map(|m| m.start..=m.end)
                                .map(|t| nil.predict(s.marginals.row(t)[o]))
                                .collect();
                            candidate_nil_probability(&p)
                        })
                    })
                    .collect();
                if !alphas.is_empty() {
                    nil_alpha = alphas.iter().sum::<f64>() / alphas.len() as f64;
                }
                relation_ratio = nil_adjusted_ratio(r_origin, &alphas).min(1.0);
                let rel_priorities: Vec<(usize, Vec<f64>)> = chosen
                    .iter()
                    .map(|s| (s.index, s.candidates.iter().map(|c| c.margin).collect()))
                    .collect();
                let rel_pick = selector::partial_select(&rel_priorities, relation_ratio);

                let pool = self.pool;
                for (k, s) in chosen.iter().enumerate() {
                    let i = s.index;
                    let mut ann = IeAnnotation::empty(pool.sentences[i].len());
                    ann.mentions = simulate_annotation(&self.pool_view.sentences[i], &token_pick[k], TaskKind::Tagging);
                    let mut corrected = BTreeSet::new();
                    for &c in &rel_pick[k] {
                        let cand = &s.candidates[c];
                        let (a, bspan) = (s.spans[cand.a].clone(), s.spans[cand.b].clone());
                        self.annotate_query(i, &mut ann, &a, &bspan, &mut corrected);
                    }
                    if self.config.second_stage {
                        self.second_stage(i, &mut ann, relation_ratio, &mut corrected)?;
                    }
                    let gold = &pool.sentences[i];
                    for g in &gold.mentions {
                        if (g.start..=g.end).all(|p| ann.mentions.is_annotated(p))
                            && !ann.known.iter().any(|m| &m.span == g)
                        {
                            ann.known.push(Mention {
                                span: g.clone(),
                                source: MentionSource::Annotated,
                            });
                        }
                    }
                    // Every revealed token is paid once, corrections included.
                    self.detail.mention_cost += ann.mentions.n_annotated() as f64;
                    new_annotations.push((i, ann));
                }
            }
        }

        let mut tokens_read = 0;
        for (i, ann) in new_annotations {
            tokens_read += self.pool.sentences[i].len();
            self.annotated += ann.mentions.n_annotated() + ann.relations.len();
            self.state.label(i, ann.mentions.clone())?;
            self.annotations.insert(i, ann);
        }
        self.reading += tokens_read;
        self.state.budget_remaining = self.state.budget_remaining.saturating_sub(b);
        self.state.check_disjoint()?;
        self.detail.mention_ratio = mention_ratio;
        self.detail.relation_ratio = relation_ratio;
        self.detail.nil_alpha = nil_alpha;

        self.models = self.fit()?;
        let test_idx: Vec<usize> = (0..self.test.len()).collect();
        let test = evaluate_ie(&self.models, self.test, &self.test_feats, &test_idx)?;
        let dev_report = evaluate_ie(&self.models, self.pool, &self.pool_feats, &dev)?;
        let early_stop = self.state.unlabeled.is_empty() && self.cycle < self.al.cycles;
        Ok(CycleRecord {
            seed: self.seed,
            cycle: self.cycle,
            strategy: self.al.label(),
            selected_sentences: selected.len(),
            reading_cost: self.reading,
            labeling_cost: self.detail.mention_cost + self.detail.relation_cost,
            annotated: self.annotated,
            selection_ratio: mention_ratio,
            estimated_error,
            actual_error,
            budget_remaining: self.state.budget_remaining,
            pool_remaining: self.state.unlabeled.len(),
            early_stop,
            test,
            dev: dev_report,
            ie: Some(self.detail.clone()),
        })
    }

    /// Re-infers mentions under the first-stage annotation and queries
    /// pairs touching mentions that became known.
    fn second_stage(
        &mut self,
        i: usize,
        ann: &mut IeAnnotation,
        r: f64,
        corrected: &mut BTreeSet<usize>,
    ) -> Result<()> {
        let pool = self.pool;
        let gold = &pool.sentences[i];
        let changed: Vec<Span> = gold
            .mentions
            .iter()
            .filter(|g| (g.start..=g.end).all(|p| ann.mentions.is_annotated(p)))
            .cloned()
            .collect();
        if changed.is_empty() {
            return Ok(());
        }
        let m = self
            .models
            .mention
            .marginals(&self.pool_feats[i], Some(&ann.mentions))?;
        let spans = decode_mentions(&self.models.mention, &m);
        let candidates = self.models.relation.candidates(&gold.tokens, &spans);
        let extra = second_stage_query(&spans, &candidates, &changed, &ann.asked, r);
        self.detail.second_stage_queries += extra.len();
        for c in extra {
            let (a, b) = (spans[candidates[c].a].clone(), spans[candidates[c].b].clone());
            self.annotate_query(i, ann, &a, &b, corrected);
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<Vec<CycleRecord>> {
        let mut out = Vec::new();
        while !self.is_finished() {
            let r = self.run_cycle()?;
            let stop = r.early_stop;
            out.push(r);
            if stop {
                break;
            }
        }
        Ok(out)
    }
}
