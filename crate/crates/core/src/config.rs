//! Run configuration: a flat `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! name = pa-st
//! task = tagging            # tagging | parsing | ie
//! data = synthetic          # synthetic | files
//! synthetic.sentences = 5000
//! strategy = pa             # rand | fa | pa
//! self_training = true
//! seeds = 1,2,3,4,5         # or a range such as 1..5
//! ratio = adaptive          # or a fixed value in (0, 1]
//! ```
//!
//! Every key is optional and defaults to the values in [`RunSpec::default`].
//! Keys may appear once; unknown keys are errors. Relative paths resolve
//! against the directory of the config file.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{CostConfig, SyntheticSpec, TaskKind};
use crate::error::{Error, Result};
use crate::estimator::RatioBounds;
use crate::ie::{IeConfig, IeSyntheticSpec, MatchRule, RelationFaCost};
use crate::learner::TrainConfig;
use crate::selector::{ALConfig, RatioMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunTask {
    Tagging,
    Parsing,
    Ie,
}

impl fmt::Display for RunTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunTask::Tagging => "tagging",
            RunTask::Parsing => "parsing",
            RunTask::Ie => "ie",
        })
    }
}

impl FromStr for RunTask {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "tagging" | "ner" => Ok(RunTask::Tagging),
            "parsing" | "dpar" => Ok(RunTask::Parsing),
            "ie" => Ok(RunTask::Ie),
            _ => Err(format!("unknown task {s:?} (expected tagging, parsing or ie)")),
        }
    }
}

impl RunTask {
    /// The corpus task of the single-model pipelines.
    pub fn corpus_task(self) -> TaskKind {
        match self {
            RunTask::Parsing => TaskKind::Parsing,
            RunTask::Tagging | RunTask::Ie => TaskKind::Tagging,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSpec {
    Files {
        train: PathBuf,
        test: PathBuf,
        /// Reject orphan `I-X` tags in column files.
        strict_bio: bool,
    },
    Synthetic {
        pool_sentences: usize,
        test_sentences: usize,
        /// Sampling seed of the pool; the test set uses `seed + 1`.
        seed: u64,
        spec: SyntheticSpec,
        relation_labels: Vec<String>,
        max_gap: usize,
        relation_noise: f64,
    },
}

impl DataSpec {
    fn synthetic_default() -> Self {
        let ie = IeSyntheticSpec::default();
        DataSpec::Synthetic {
            pool_sentences: 5000,
            test_sentences: 1000,
            seed: 1,
            spec: SyntheticSpec::default(),
            relation_labels: ie.relation_labels,
            max_gap: ie.max_gap,
            relation_noise: ie.relation_noise,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub name: String,
    pub task: RunTask,
    pub data: DataSpec,
    pub al: ALConfig,
    pub train: TrainConfig,
    pub ie: IeConfig,
    pub output: PathBuf,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            name: "run".into(),
            task: RunTask::Tagging,
            data: DataSpec::synthetic_default(),
            al: ALConfig::default(),
            train: TrainConfig::default(),
            ie: IeConfig::default(),
            output: PathBuf::from("runs"),
        }
    }
}

impl RunSpec {
    /// Directory holding this run's records.
    pub fn run_dir(&self) -> PathBuf {
        self.output.join(&self.name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == "." || self.name == ".." {
            return Err(Error::config(
                "name",
                format!("{:?} is not a valid directory name", self.name),
            ));
        }
        self.al.validate()?;
        self.train.validate()?;
        self.ie.validate()?;
        match &self.data {
            DataSpec::Files { train, test, .. } => {
                for (field, path) in [("train", train), ("test", test)] {
                    if !path.is_file() {
                        return Err(Error::config(field, format!("{} does not exist", path.display())));
                    }
                }
            }
            DataSpec::Synthetic {
                pool_sentences,
                test_sentences,
                spec,
                ..
            } => {
                if *pool_sentences == 0 {
                    return Err(Error::config("synthetic.sentences", "must be positive"));
                }
                if *test_sentences == 0 {
                    return Err(Error::config("synthetic.test_sentences", "must be positive"));
                }
                spec.validate()?;
            }
        }
        Ok(())
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::config(key, format!("cannot parse {value:?}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got {value:?}"))),
    }
}

fn parse_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn parse_seeds(key: &str, value: &str) -> Result<Vec<u64>> {
    if let Some((lo, hi)) = value.split_once("..") {
        let lo: u64 = parse_value(key, lo.trim())?;
        let hi: u64 = parse_value(key, hi.trim())?;
        if hi < lo || hi - lo >= 10_000 {
            return Err(Error::config(key, format!("invalid seed range {value:?}")));
        }
        return Ok((lo..=hi).collect());
    }
    let seeds = parse_list(value)
        .iter()
        .map(|s| parse_value(key, s))
        .collect::<Result<Vec<u64>>>()?;
    let unique: BTreeSet<u64> = seeds.iter().copied().collect();
    if unique.len() != seeds.len() {
        return Err(Error::config(key, "seeds must be distinct"));
    }
    Ok(seeds)
}

fn parse_mixing(key: &str, value: &str) -> Result<(usize, usize)> {
    let (g, p) = value
        .split_once(':')
        .ok_or_else(|| Error::config(key, format!("expected gold:pseudo such as 1:1, got {value:?}")))?;
    Ok((parse_value(key, g.trim())?, parse_value(key, p.trim())?))
}

/// Parses a config; `origin` names it in syntax errors and `base` resolves
/// relative paths.
pub fn parse_run_config(text: &str, origin: &str, base: &Path) -> Result<RunSpec> {
    let mut spec = RunSpec::default();
    let mut seen = BTreeSet::new();
    let mut data_kind = "synthetic".to_string();
    let mut train_path: Option<PathBuf> = None;
    let mut test_path: Option<PathBuf> = None;
    let mut strict_bio = false;
    let mut ratio_bounds = RatioBounds::default();
    let mut pos_filter: Option<Option<BTreeSet<String>>> = None;
    let mut dpar_edges = false;
    let DataSpec::Synthetic {
        mut pool_sentences,
        mut test_sentences,
        mut seed,
        spec: mut synth,
        mut relation_labels,
        mut max_gap,
        mut relation_noise,
    } = DataSpec::synthetic_default()
    else {
        unreachable!()
    };
    let resolve = |v: &str| {
        let p = PathBuf::from(v);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };

    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            line: k + 1,
            message: format!("expected `key = value`, got {line:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: k + 1,
                message: "missing key".into(),
            });
        }
        if !seen.insert(key.to_string()) {
            return Err(Error::config(key, format!("duplicate key on line {}", k + 1)));
        }
        match key {
            "name" => spec.name = value.to_string(),
            "task" => spec.task = parse_value(key, value)?,
            "output" => spec.output = resolve(value),
            "data" => {
                if value != "synthetic" && value != "files" {
                    return Err(Error::config(
                        key,
                        format!("expected synthetic or files, got {value:?}"),
                    ));
                }
                data_kind = value.to_string();
            }
            "train" => train_path = Some(resolve(value)),
            "test" => test_path = Some(resolve(value)),
            "strict_bio" => strict_bio = parse_bool(key, value)?,

            "strategy" => spec.al.strategy = parse_value(key, value)?,
            "self_training" => spec.al.self_training = parse_bool(key, value)?,
            "acquisition" => spec.al.acquisition = parse_value(key, value)?,
            "batch_tokens" => spec.al.batch_tokens = parse_value(key, value)?,
            "cycles" => spec.al.cycles = parse_value(key, value)?,
            "seeds" => spec.al.seeds = parse_seeds(key, value)?,
            "ratio" => {
                spec.al.ratio = if value == "adaptive" {
                    RatioMode::Adaptive
                } else {
                    RatioMode::Fixed(parse_value(key, value)?)
                }
            }
            "ratio_min" => ratio_bounds.min = parse_value(key, value)?,
            "ratio_max" => ratio_bounds.max = parse_value(key, value)?,
            "pos_filter" => {
                pos_filter = Some(match value {
                    "none" => None,
                    _ => Some(parse_list(value).into_iter().collect()),
                })
            }
            "dpar_cost" => {
                dpar_edges = match value {
                    "distance" => false,
                    "edges" => true,
                    _ => return Err(Error::config(key, format!("expected distance or edges, got {value:?}"))),
                }
            }

            "steps" => spec.train.steps = parse_value(key, value)?,
            "minibatch_tokens" => spec.train.minibatch_tokens = parse_value(key, value)?,
            "learning_rate" => spec.train.learning_rate = parse_value(key, value)?,
            "l2" => spec.train.l2 = parse_value(key, value)?,
            "eval_every" => spec.train.eval_every = parse_value(key, value)?,
            "mixing" => spec.train.mixing = parse_mixing(key, value)?,

            "beta" => spec.ie.beta = parse_value(key, value)?,
            "match_rule" => {
                spec.ie.match_rule = match value {
                    "overlap" => MatchRule::Overlap,
                    "strict" => MatchRule::Strict,
                    _ => return Err(Error::config(key, format!("expected overlap or strict, got {value:?}"))),
                }
            }
            "relation_fa_cost" => {
                spec.ie.relation_fa_cost = match value {
                    "pairs" => RelationFaCost::Pairs,
                    "twice-entities" => RelationFaCost::TwiceEntities,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected pairs or twice-entities, got {value:?}"),
                        ))
                    }
                }
            }
            "relation_epochs" => spec.ie.relation.epochs = parse_value(key, value)?,
            "relation_learning_rate" => spec.ie.relation.learning_rate = parse_value(key, value)?,
            "second_stage" => spec.ie.second_stage = parse_bool(key, value)?,

            "synthetic.sentences" => pool_sentences = parse_value(key, value)?,
            "synthetic.test_sentences" => test_sentences = parse_value(key, value)?,
            "synthetic.seed" => seed = parse_value(key, value)?,
            "synthetic.vocab_size" => synth.vocab_size = parse_value(key, value)?,
            "synthetic.labels" => synth.labels = parse_list(value),
            "synthetic.min_len" => synth.min_len = parse_value(key, value)?,
            "synthetic.max_len" => synth.max_len = parse_value(key, value)?,
            "synthetic.noise" => synth.noise = parse_value(key, value)?,
            "synthetic.entity_rate" => synth.entity_rate = parse_value(key, value)?,
            "synthetic.zipf" => synth.zipf = parse_value(key, value)?,
            "synthetic.language_seed" => synth.language_seed = parse_value(key, value)?,
            "synthetic.relation_labels" => relation_labels = parse_list(value),
            "synthetic.max_gap" => max_gap = parse_value(key, value)?,
            "synthetic.relation_noise" => relation_noise = parse_value(key, value)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
    }

    spec.al.ratio_bounds = ratio_bounds;
    spec.al.cost = CostConfig {
        pos_filter: pos_filter.unwrap_or_else(|| CostConfig::default().pos_filter),
        dpar_count_edges: dpar_edges,
    };
    synth.task = spec.task.corpus_task();
    if spec.task == RunTask::Ie && !seen.contains("synthetic.entity_rate") {
        synth.entity_rate = IeSyntheticSpec::default().base.entity_rate;
    }
    spec.data = if data_kind == "files" {
        DataSpec::Files {
            train: train_path.ok_or_else(|| Error::config("train", "required when data = files"))?,
            test: test_path.ok_or_else(|| Error::config("test", "required when data = files"))?,
            strict_bio,
        }
    } else {
        if train_path.is_some() || test_path.is_some() {
            return Err(Error::config("data", "train/test paths need data = files"));
        }
        DataSpec::Synthetic {
            pool_sentences,
            test_sentences,
            seed,
            spec: synth,
            relation_labels,
            max_gap,
            relation_noise,
        }
    };
    Ok(spec)
}

/// Reads and parses a config file; relative paths resolve against its
/// directory.
pub fn load_run_config(path: &Path) -> Result<RunSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_run_config(&text, &path.display().to_string(), base)
}
