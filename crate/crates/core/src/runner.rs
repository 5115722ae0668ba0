//! Executes a [`RunSpec`]: loads or generates data, runs every seed with
//! per-cycle records on disk, resumes completed seeds and writes the
//! aggregate.

use std::path::Path;

use log::info;

use crate::config::{DataSpec, RunSpec, RunTask};
use crate::corpus::{generate_synthetic, load_column_tagging, load_conllu, ColumnOptions, Corpus};
use crate::error::{Error, Result};
use crate::ie::{generate_ie, read_ie_jsonl, IeCorpus, IeSimulation, IeSyntheticSpec};
use crate::learner::{featurize_corpus, SentenceFeatures, TrainingData};
use crate::selector::{self, check_records, read_seed_records, CycleRecord, Simulation};

pub const SPEC_FILE: &str = "spec.json";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
/// Final model of a seed (the mention model for IE runs).
pub const MODEL_FILE: &str = "final.model";
/// Final relation model of an IE seed.
pub const RELATION_FILE: &str = "final.relations";

pub enum RunData {
    Single {
        pool: Corpus,
        pool_feats: Vec<SentenceFeatures>,
        test: Corpus,
        test_feats: Vec<SentenceFeatures>,
    },
    Ie {
        pool: IeCorpus,
        test: IeCorpus,
    },
}

fn single(pool: Corpus, test: Corpus) -> RunData {
    RunData::Single {
        pool_feats: featurize_corpus(&pool),
        test_feats: featurize_corpus(&test),
        pool,
        test,
    }
}

pub fn load_data(spec: &RunSpec) -> Result<RunData> {
    match (&spec.data, spec.task) {
        (DataSpec::Files { train, test, .. }, RunTask::Ie) => Ok(RunData::Ie {
            pool: read_ie_jsonl(train)?,
            test: read_ie_jsonl(test)?,
        }),
        (
            DataSpec::Files {
                train,
                test,
                strict_bio,
            },
            RunTask::Tagging,
        ) => {
            let options = ColumnOptions { strict: *strict_bio };
            Ok(single(
                load_column_tagging(train, options)?,
                load_column_tagging(test, options)?,
            ))
        }
        (DataSpec::Files { train, test, .. }, RunTask::Parsing) => Ok(single(load_conllu(train)?, load_conllu(test)?)),
        (
            DataSpec::Synthetic {
                pool_sentences,
                test_sentences,
                seed,
                spec: base,
                relation_labels,
                max_gap,
                relation_noise,
            },
            task,
        ) => {
            let mut base = base.clone();
            base.task = task.corpus_task();
            if task == RunTask::Ie {
                let ie = |sentences: usize| IeSyntheticSpec {
                    base: crate::corpus::SyntheticSpec {
                        sentences,
                        ..base.clone()
                    },
                    relation_labels: relation_labels.clone(),
                    max_gap: *max_gap,
                    relation_noise: *relation_noise,
                };
                return Ok(RunData::Ie {
                    pool: generate_ie(&ie(*pool_sentences), *seed)?,
                    test: generate_ie(&ie(*test_sentences), seed.wrapping_add(1))?,
                });
            }
            let pool = generate_synthetic(
                &crate::corpus::SyntheticSpec {
                    sentences: *pool_sentences,
                    ..base.clone()
                },
                *seed,
            )?;
            let test = generate_synthetic(
                &crate::corpus::SyntheticSpec {
                    sentences: *test_sentences,
                    ..base
                },
                seed.wrapping_add(1),
            )?;
            Ok(single(pool, test))
        }
    }
}

fn is_complete(spec: &RunSpec, records: &[CycleRecord]) -> bool {
    match records.last() {
        None => false,
        Some(last) => records.len() == spec.al.cycles || last.early_stop || last.budget_remaining == 0,
    }
}

/// Runs one seed, writing each cycle record as soon as it exists.
pub fn run_seed(spec: &RunSpec, data: &RunData, seed: u64, dir: &Path) -> Result<Vec<CycleRecord>> {
    let seed_dir = dir.join(format!("seed{seed}"));
    let mut records = Vec::new();
    let mut step = |r: CycleRecord| -> Result<bool> {
        selector::write_seed_records(dir, seed, std::slice::from_ref(&r))?;
        let stop = r.early_stop;
        records.push(r);
        Ok(stop)
    };
    match data {
        RunData::Single {
            pool,
            pool_feats,
            test,
            test_feats,
        } => {
            let expected = spec.task.corpus_task();
            if pool.task != expected || test.task != expected {
                return Err(Error::config("task", format!("data is not a {expected} corpus")));
            }
            let pool_data = TrainingData {
                corpus: pool,
                features: pool_feats,
            };
            let test_data = TrainingData {
                corpus: test,
                features: test_feats,
            };
            let mut sim = Simulation::new(&spec.al, &spec.train, pool_data, test_data, seed)?;
            while !sim.is_finished() {
                if step(sim.run_cycle()?)? {
                    break;
                }
            }
            sim.model.save(&seed_dir.join(MODEL_FILE))?;
        }
        RunData::Ie { pool, test } => {
            let mut sim = IeSimulation::new(&spec.al, &spec.ie, &spec.train, pool, test, seed)?;
            while !sim.is_finished() {
                if step(sim.run_cycle()?)? {
                    break;
                }
            }
            sim.models.mention.save(&seed_dir.join(MODEL_FILE))?;
            sim.models.relation.save(&seed_dir.join(RELATION_FILE))?;
        }
    }
    Ok(records)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunOutcome {
    pub computed: Vec<u64>,
    pub resumed: Vec<u64>,
    /// Whether the aggregate was written (all seeds complete).
    pub aggregated: bool,
}

/// Runs the seeds of `spec` (or only `seed_filter`). Seeds whose records
/// already exist, validate and are complete are skipped; incomplete ones
/// are recomputed from scratch.
pub fn run_spec(spec: &RunSpec, seed_filter: Option<u64>) -> Result<RunOutcome> {
    spec.validate()?;
    if let Some(s) = seed_filter {
        if !spec.al.seeds.contains(&s) {
            return Err(Error::config(
                "seed_filter",
                format!("seed {s} is not in the configured seeds"),
            ));
        }
    }
    let dir = spec.run_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let spec_path = dir.join(SPEC_FILE);
    let spec_json = serde_json::to_string_pretty(spec)? + "\n";
    if spec_path.exists() {
        let old = std::fs::read_to_string(&spec_path).map_err(|e| Error::io(&spec_path, e))?;
        if old != spec_json {
            return Err(Error::config(
                "name",
                format!("{} holds a run with a different configuration", dir.display()),
            ));
        }
    } else {
        std::fs::write(&spec_path, &spec_json).map_err(|e| Error::io(&spec_path, e))?;
    }

    let mut outcome = RunOutcome::default();
    let mut data: Option<RunData> = None;
    for &seed in spec.al.seeds.iter().filter(|s| seed_filter.is_none_or(|f| f == **s)) {
        if let Some(records) = read_seed_records(&dir, seed)? {
            let saved = dir.join(format!("seed{seed}")).join(MODEL_FILE).is_file();
            if saved && check_records(&records).is_ok() && is_complete(spec, &records) {
                info!("seed {seed}: {} cycles on disk, skipping", records.len());
                outcome.resumed.push(seed);
                continue;
            }
            let seed_dir = dir.join(format!("seed{seed}"));
            std::fs::remove_dir_all(&seed_dir).map_err(|e| Error::io(&seed_dir, e))?;
        }
        if data.is_none() {
            data = Some(load_data(spec)?);
        }
        info!("seed {seed}: running {} cycles", spec.al.cycles);
        run_seed(spec, data.as_ref().expect("loaded above"), seed, &dir)?;
        outcome.computed.push(seed);
    }

    let mut runs = Vec::new();
    for &seed in &spec.al.seeds {
        match read_seed_records(&dir, seed)? {
            Some(r) if is_complete(spec, &r) => runs.push(r),
            _ => return Ok(outcome),
        }
    }
    let path = dir.join(AGGREGATE_FILE);
    std::fs::write(&path, selector::aggregate_csv(&runs)).map_err(|e| Error::io(&path, e))?;
    outcome.aggregated = true;
    Ok(outcome)
}
