//! The active-learning loop: sentence querying under a token budget,
//! full/partial/random annotation, partial sub-structure selection,
//! self-training and cost accounting.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{count_labeling_cost, simulate_annotation, AnnotationState, CostConfig, CostMode, PoolState};
use crate::error::{Error, Result};
use crate::estimator::{self, RatioBounds};
use crate::eval::{self, EvalReport};
use crate::learner::{self, Marginals, Model, PseudoLabelSet, TrainConfig, TrainingData};
use crate::uncertainty::Acquisition;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Rand,
    Fa,
    Pa,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Rand => "rand",
            Strategy::Fa => "fa",
            Strategy::Pa => "pa",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rand" | "random" => Ok(Strategy::Rand),
            "fa" | "full" => Ok(Strategy::Fa),
            "pa" | "partial" => Ok(Strategy::Pa),
            _ => Err(format!("unknown strategy {s:?} (expected rand, fa or pa)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioMode {
    Adaptive,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ALConfig {
    pub strategy: Strategy,
    pub self_training: bool,
    pub acquisition: Acquisition,
    /// Tokens read per cycle (b).
    pub batch_tokens: usize,
    pub cycles: usize,
    pub seeds: Vec<u64>,
    pub ratio: RatioMode,
    pub ratio_bounds: RatioBounds,
    pub cost: CostConfig,
}

impl Default for ALConfig {
    fn default() -> Self {
        ALConfig {
            strategy: Strategy::Pa,
            self_training: true,
            acquisition: Acquisition::Margin,
            batch_tokens: 4000,
            cycles: 14,
            seeds: (1..=5).collect(),
            ratio: RatioMode::Adaptive,
            ratio_bounds: RatioBounds::default(),
            cost: CostConfig::default(),
        }
    }
}

impl ALConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_tokens == 0 {
            return Err(Error::config("batch_tokens", "must be positive"));
        }
        if self.cycles == 0 {
            return Err(Error::config("cycles", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if let RatioMode::Fixed(r) = self.ratio {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::config(
                    "ratio",
                    format!("fixed ratio must be in (0, 1], got {r}"),
                ));
            }
        }
        self.ratio_bounds.validate()
    }

    /// Short name such as `pa+st`.
    pub fn label(&self) -> String {
        if self.self_training {
            format!("{}+st", self.strategy)
        } else {
            self.strategy.to_string()
        }
    }
}

/// Per-cycle accounting. Costs are cumulative over the cycles of one run
/// and exclude the seed and dev sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub seed: u64,
    pub cycle: usize,
    pub strategy: String,
    pub selected_sentences: usize,
    /// Cumulative tokens read.
    pub reading_cost: usize,
    /// Cumulative labeling cost under the strategy's counting rule.
    pub labeling_cost: f64,
    /// Cumulative number of labeled sub-structures (no POS filter).
    pub annotated: usize,
    pub selection_ratio: f64,
    /// One minus mean predicted correctness on the query set, unclamped.
    pub estimated_error: f64,
    /// Argmax error rate on the query set against gold.
    pub actual_error: f64,
    pub budget_remaining: usize,
    pub pool_remaining: usize,
    pub early_stop: bool,
    pub test: EvalReport,
    pub dev: EvalReport,
    /// Sub-task breakdown for IE runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ie: Option<crate::ie::IeCycleDetail>,
}

/// A pool sentence ranked for querying.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceScore {
    pub index: usize,
    pub tokens: usize,
    /// Mean sub-structure priority; smaller is more uncertain.
    pub score: f64,
}

/// Length-normalised uncertainty of every candidate, with the marginals
/// kept for later use.
pub fn score_sentences(
    model: &Model,
    data: TrainingData<'_>,
    candidates: &[usize],
    acquisition: Acquisition,
) -> Result<Vec<(SentenceScore, Marginals)>> {
    use rayon::prelude::*;
    candidates
        .par_iter()
        .map(|&i| {
            let m = model.marginals(&data.features[i], None)?;
            let p = m.priorities(acquisition);
            let score = p.iter().sum::<f64>() / p.len() as f64;
            Ok((
                SentenceScore {
                    index: i,
                    tokens: p.len(),
                    score,
                },
                m,
            ))
        })
        .collect()
}

/// Takes sentences in order until at least `budget` tokens are read.
pub fn take_until(order: impl IntoIterator<Item = (usize, usize)>, budget: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut read = 0;
    for (index, tokens) in order {
        if read >= budget {
            break;
        }
        out.push(index);
        read += tokens;
    }
    out
}

/// Ranks by ascending score (ties by index) and takes greedily up to `b`
/// tokens.
pub fn rank_and_take(scores: &[SentenceScore], b: usize) -> Vec<usize> {
    let mut ranked: Vec<&SentenceScore> = scores.iter().collect();
    ranked.sort_by(|x, y| x.score.total_cmp(&y.score).then(x.index.cmp(&y.index)));
    take_until(ranked.iter().map(|s| (s.index, s.tokens)), b)
}

/// Most uncertain pool sentences up to `b` tokens.
pub fn sentence_query(
    model: &Model,
    data: TrainingData<'_>,
    pool: &[usize],
    b: usize,
    acquisition: Acquisition,
) -> Result<Vec<usize>> {
    let scored: Vec<SentenceScore> = score_sentences(model, data, pool, acquisition)?
        .into_iter()
        .map(|(s, _)| s)
        .collect();
    Ok(rank_and_take(&scored, b))
}

/// Random pool sentences up to `b` tokens.
pub fn random_query(pool: &[usize], data: TrainingData<'_>, b: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order = pool.to_vec();
    order.shuffle(rng);
    take_until(order.into_iter().map(|i| (i, data.corpus.sentences[i].len())), b)
}

fn ceil_count(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

/// Positions to query in each sentence: the `ceil(r n_i)` most uncertain
/// per sentence, united with the `ceil(r sum n_i)` most uncertain overall.
/// `sentences` pairs a sentence id with per-position priorities (smaller
/// is more uncertain); ties go to the lower id, then position.
pub fn partial_select(sentences: &[(usize, Vec<f64>)], r: f64) -> Vec<BTreeSet<usize>> {
    let mut chosen: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); sentences.len()];
    let mut global = Vec::new();
    for (k, (id, p)) in sentences.iter().enumerate() {
        let mut order: Vec<usize> = (0..p.len()).collect();
        order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
        chosen[k].extend(order.into_iter().take(ceil_count(r * p.len() as f64)));
        global.extend(p.iter().enumerate().map(|(pos, &v)| (v, *id, k, pos)));
    }
    let total = global.len();
    global.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.3.cmp(&b.3)));
    for &(_, _, k, pos) in global.iter().take(ceil_count(r * total as f64)) {
        chosen[k].insert(pos);
    }
    chosen
}

/// Splits a shuffled corpus into seed and dev sets of about `b` tokens
/// each; the rest is the unlabeled pool.
pub fn initial_pool(data: TrainingData<'_>, b: usize, cycles: usize, seed: u64) -> Result<PoolState> {
    let corpus = data.corpus;
    if corpus.n_tokens() < 3 * b {
        return Err(Error::config(
            "batch_tokens",
            format!(
                "corpus has {} tokens; seed, dev and one cycle need at least {}",
                corpus.n_tokens(),
                3 * b
            ),
        ));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let lens = |i: usize| corpus.sentences[i].len();
    let seed_set = take_until(order.iter().map(|&i| (i, lens(i))), b);
    let rest = &order[seed_set.len()..];
    let dev_set = take_until(rest.iter().map(|&i| (i, lens(i))), b);
    let unlabeled = rest[dev_set.len()..].iter().copied().collect();
    Ok(PoolState {
        seed: seed_set.into_iter().collect(),
        dev: dev_set.into_iter().collect(),
        labeled: Default::default(),
        unlabeled,
        budget_remaining: b * cycles,
    })
}

pub(crate) fn derive_seed(seed: u64, cycle: usize, stage: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add((cycle as u64) << 8)
        .wrapping_add(stage);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^ (z >> 31)
}

/// One seed's run of the loop.
pub struct Simulation<'a> {
    pub config: ALConfig,
    pub train_config: TrainConfig,
    pool_data: TrainingData<'a>,
    test_data: TrainingData<'a>,
    template: Model,
    seed: u64,
    pub pool: PoolState,
    seed_states: Vec<(usize, AnnotationState)>,
    /// Model used for the next query.
    pub model: Model,
    rng: ChaCha8Rng,
    cycle: usize,
    reading: usize,
    labeling: f64,
    annotated: usize,
}

impl<'a> Simulation<'a> {
    pub fn new(
        config: &ALConfig,
        train_config: &TrainConfig,
        pool_data: TrainingData<'a>,
        test_data: TrainingData<'a>,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        train_config.validate()?;
        if pool_data.corpus.task != test_data.corpus.task {
            return Err(Error::config("task", "pool and test corpora have different tasks"));
        }
        let template = match pool_data.corpus.task {
            crate::corpus::TaskKind::Tagging => {
                let mut types = pool_data.corpus.entity_types();
                for t in test_data.corpus.entity_types() {
                    if !types.contains(&t) {
                        types.push(t);
                    }
                }
                types.sort();
                Model::new(pool_data.corpus.task, learner::bio_labels(&types), vec![])?
            }
            crate::corpus::TaskKind::Parsing => {
                let mut labels = pool_data.corpus.label_inventory();
                for l in test_data.corpus.label_inventory() {
                    if !labels.contains(&l) {
                        labels.push(l);
                    }
                }
                labels.sort();
                Model::new(pool_data.corpus.task, vec![], labels)?
            }
        };
        let pool = initial_pool(pool_data, config.batch_tokens, config.cycles, seed)?;
        let seed_states = pool
            .seed
            .iter()
            .map(|&i| (i, AnnotationState::full(&pool_data.corpus.sentences[i])))
            .collect();
        let mut sim = Simulation {
            config: config.clone(),
            train_config: train_config.clone(),
            pool_data,
            test_data,
            model: template.clone(),
            template,
            seed,
            pool,
            seed_states,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, 0xa11ce)),
            cycle: 0,
            reading: 0,
            labeling: 0.0,
            annotated: 0,
        };
        sim.model = sim.fit()?;
        Ok(sim)
    }

    pub fn cycle(&self) -> usize {
        self.cycle
    }

    pub fn dev_indices(&self) -> Vec<usize> {
        self.pool.dev.iter().copied().collect()
    }

    pub fn pool_data(&self) -> TrainingData<'a> {
        self.pool_data
    }

    /// Trains on the current annotations; with self-training, a second
    /// model learns from the first one's pseudo labels and is returned.
    pub fn fit(&self) -> Result<Model> {
        let labeled: Vec<(usize, &AnnotationState)> = self
            .seed_states
            .iter()
            .map(|(i, s)| (*i, s))
            .chain(self.pool.labeled.iter().map(|(i, s)| (*i, s)))
            .collect();
        let dev = self.dev_indices();
        let mut cfg = self.train_config.clone();
        cfg.seed = derive_seed(self.seed, self.cycle, 1);
        let (first, _) = learner::train(&self.template, self.pool_data, &labeled, None, &dev, &cfg)?;
        if !self.config.self_training {
            return Ok(first);
        }
        let targets: Vec<(usize, Option<&AnnotationState>)> = self
            .pool
            .unlabeled
            .iter()
            .map(|&i| (i, None))
            .chain(self.pool.labeled.iter().map(|(i, s)| (*i, Some(s))))
            .collect();
        let pseudo: PseudoLabelSet = learner::make_pseudo_labels(&first, self.pool_data, &targets)?;
        cfg.seed = derive_seed(self.seed, self.cycle, 2);
        let (second, _) = learner::train(&self.template, self.pool_data, &labeled, Some(&pseudo), &dev, &cfg)?;
        Ok(second)
    }

    pub fn is_finished(&self) -> bool {
        self.cycle >= self.config.cycles || self.pool.budget_remaining == 0 || self.pool.unlabeled.is_empty()
    }

    /// Queries, annotates and retrains once.
    pub fn run_cycle(&mut self) -> Result<CycleRecord> {
        if self.pool.budget_remaining == 0 {
            return Err(Error::config("cycles", "annotation budget is exhausted"));
        }
        self.cycle += 1;
        let data = self.pool_data;
        let b = self.config.batch_tokens;
        let unlabeled: Vec<usize> = self.pool.unlabeled.iter().copied().collect();
        let scored = score_sentences(&self.model, data, &unlabeled, self.config.acquisition)?;
        let selected = match self.config.strategy {
            Strategy::Rand => random_query(&unlabeled, data, b, &mut self.rng),
            Strategy::Fa | Strategy::Pa => {
                let scores: Vec<SentenceScore> = scored.iter().map(|(s, _)| s.clone()).collect();
                rank_and_take(&scores, b)
            }
        };
        let by_index: std::collections::BTreeMap<usize, &Marginals> =
            scored.iter().map(|(s, m)| (s.index, m)).collect();

        // Error estimate and actual error over all sub-structures of S.
        let dev = self.dev_indices();
        let samples = estimator::collect_dev_samples(&self.model, data, &dev)?;
        let logistic = estimator::fit_logistic(&samples);
        let mut margins = Vec::new();
        let mut wrong = 0usize;
        for &i in &selected {
            let m = by_index[&i];
            let gold = estimator::gold_indices(&self.model, data, i)?;
            wrong += m.argmax().iter().zip(&gold).filter(|(p, g)| p != g).count();
            margins.extend(m.margins());
        }
        let q = margins.len().max(1) as f64;
        let estimated_error = 1.0 - margins.iter().map(|&m| logistic.predict(m)).sum::<f64>() / q;
        let actual_error = wrong as f64 / q;

        let task = data.corpus.task;
        let ratio = match (self.config.strategy, self.config.ratio) {
            (Strategy::Pa, RatioMode::Adaptive) => {
                estimator::adaptive_ratio(&logistic, &margins, self.config.ratio_bounds)?
            }
            (Strategy::Pa, RatioMode::Fixed(r)) => r,
            _ => 1.0,
        };
        let states: Vec<(usize, AnnotationState)> = match self.config.strategy {
            Strategy::Pa => {
                let priorities: Vec<(usize, Vec<f64>)> = selected
                    .iter()
                    .map(|&i| (i, by_index[&i].priorities(self.config.acquisition)))
                    .collect();
                partial_select(&priorities, ratio)
                    .into_iter()
                    .zip(&selected)
                    .map(|(q, &i)| (i, simulate_annotation(&data.corpus.sentences[i], &q, task)))
                    .collect()
            }
            _ => selected
                .iter()
                .map(|&i| (i, AnnotationState::full(&data.corpus.sentences[i])))
                .collect(),
        };
        let mode = match self.config.strategy {
            Strategy::Pa => CostMode::Pa,
            _ => CostMode::Fa,
        };
        let mut tokens_read = 0;
        for (i, state) in states {
            let s = &data.corpus.sentences[i];
            tokens_read += s.len();
            self.labeling += count_labeling_cost(s, &state, task, mode, &self.config.cost);
            self.annotated += state.n_annotated();
            self.pool.label(i, state)?;
        }
        self.reading += tokens_read;
        self.pool.budget_remaining = self.pool.budget_remaining.saturating_sub(b);
        self.pool.check_disjoint()?;

        self.model = self.fit()?;
        let test_idx: Vec<usize> = (0..self.test_data.corpus.len()).collect();
        let test = eval::evaluate(&self.model, self.test_data.corpus, self.test_data.features, &test_idx)?;
        let dev_report = eval::evaluate(&self.model, data.corpus, data.features, &dev)?;
        let early_stop = self.pool.unlabeled.is_empty() && self.cycle < self.config.cycles;
        Ok(CycleRecord {
            seed: self.seed,
            cycle: self.cycle,
            strategy: self.config.label(),
            selected_sentences: selected.len(),
            reading_cost: self.reading,
            labeling_cost: self.labeling,
            annotated: self.annotated,
            selection_ratio: ratio,
            estimated_error,
            actual_error,
            budget_remaining: self.pool.budget_remaining,
            pool_remaining: self.pool.unlabeled.len(),
            early_stop,
            test,
            dev: dev_report,
            ie: None,
        })
    }

    /// Runs the remaining cycles.
    pub fn run(&mut self) -> Result<Vec<CycleRecord>> {
        let mut out = Vec::new();
        while !self.is_finished() {
            let record = self.run_cycle()?;
            let stop = record.early_stop;
            out.push(record);
            if stop {
                break;
            }
        }
        Ok(out)
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub const AGGREGATE_COLUMNS: [&str; 8] = [
    "reading_cost",
    "labeling_cost",
    "annotated",
    "selection_ratio",
    "estimated_error",
    "actual_error",
    "test_metric",
    "dev_metric",
];

fn record_values(r: &CycleRecord) -> [f64; 8] {
    [
        r.reading_cost as f64,
        r.labeling_cost,
        r.annotated as f64,
        r.selection_ratio,
        r.estimated_error,
        r.actual_error,
        r.test.primary(),
        r.dev.primary(),
    ]
}

/// `cycle,seeds,<col>_mean,<col>_std,...` with one row per cycle; a cycle
/// reached by only some seeds averages over those.
pub fn aggregate_csv(runs: &[Vec<CycleRecord>]) -> String {
    let mut out = String::from("cycle,seeds");
    for c in AGGREGATE_COLUMNS {
        out.push_str(&format!(",{c}_mean,{c}_std"));
    }
    out.push('\n');
    let max_cycle = runs.iter().flat_map(|r| r.iter().map(|c| c.cycle)).max().unwrap_or(0);
    for cycle in 1..=max_cycle {
        let rows: Vec<[f64; 8]> = runs
            .iter()
            .filter_map(|r| r.iter().find(|c| c.cycle == cycle))
            .map(record_values)
            .collect();
        if rows.is_empty() {
            continue;
        }
        out.push_str(&format!("{cycle},{}", rows.len()));
        for k in 0..AGGREGATE_COLUMNS.len() {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            let (m, s) = mean_std(&col);
            out.push_str(&format!(",{m:.6},{s:.6}"));
        }
        out.push('\n');
    }
    out
}

/// Writes `seed<k>/cycle<i>.json` for one seed's records.
pub fn write_seed_records(dir: &Path, seed: u64, records: &[CycleRecord]) -> Result<()> {
    let seed_dir = dir.join(format!("seed{seed}"));
    std::fs::create_dir_all(&seed_dir).map_err(|e| Error::io(&seed_dir, e))?;
    for r in records {
        let path = seed_dir.join(format!("cycle{}.json", r.cycle));
        let mut text = serde_json::to_string_pretty(r)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Reads back `seed<k>/cycle<i>.json` in cycle order; `None` when the
/// directory does not exist.
pub fn read_seed_records(dir: &Path, seed: u64) -> Result<Option<Vec<CycleRecord>>> {
    let seed_dir = dir.join(format!("seed{seed}"));
    if !seed_dir.is_dir() {
        return Ok(None);
    }
    let mut records = Vec::new();
    for cycle in 1.. {
        let path = seed_dir.join(format!("cycle{cycle}.json"));
        if !path.exists() {
            break;
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let r: CycleRecord = serde_json::from_str(&text)?;
        if r.cycle != cycle || r.seed != seed {
            return Err(Error::validation(
                path.display().to_string(),
                "record does not match its file name",
            ));
        }
        records.push(r);
    }
    Ok(Some(records))
}

/// Checks the per-run invariants: costs non-negative and cumulative,
/// cycles consecutive.
pub fn check_records(records: &[CycleRecord]) -> Result<()> {
    let mut prev: Option<&CycleRecord> = None;
    for r in records {
        let bad = |msg: &str| Err(Error::validation(format!("cycle {}", r.cycle), msg));
        if r.labeling_cost < 0.0 || !r.labeling_cost.is_finite() {
            return bad("labeling cost must be finite and non-negative");
        }
        if let Some(p) = prev {
            if r.cycle != p.cycle + 1 {
                return bad("cycles are not consecutive");
            }
            if r.reading_cost < p.reading_cost || r.labeling_cost < p.labeling_cost || r.annotated < p.annotated {
                return bad("cumulative costs decreased");
            }
        } else if r.cycle != 1 {
            return bad("first record is not cycle 1");
        }
        prev = Some(r);
    }
    Ok(())
}

/// Runs every configured seed; records are written under `out` when given.
pub fn run_experiment(
    config: &ALConfig,
    train_config: &TrainConfig,
    pool_data: TrainingData<'_>,
    test_data: TrainingData<'_>,
    out: Option<&Path>,
) -> Result<(Vec<Vec<CycleRecord>>, String)> {
    config.validate()?;
    let mut runs = Vec::new();
    for &seed in &config.seeds {
        let mut sim = Simulation::new(config, train_config, pool_data, test_data, seed)?;
        let records = sim.run()?;
        if let Some(dir) = out {
            write_seed_records(dir, seed, &records)?;
        }
        runs.push(records);
    }
    let csv = aggregate_csv(&runs);
    if let Some(dir) = out {
        let path = dir.join("aggregate.csv");
        std::fs::write(&path, &csv).map_err(|e| Error::io(&path, e))?;
    }
    Ok((runs, csv))
}
