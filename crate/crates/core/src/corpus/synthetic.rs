//! Deterministic synthetic corpora.
//!
//! Tagging sentences are sampled from an explicit order-1 HMM whose hidden
//! states map onto BIO labels; each mention type also has a "trigger" state
//! (labeled `O`) that tends to precede its mentions. Parsing sentences draw
//! a POS sequence from a small Markov chain and attach every token to the
//! closest admissible head one level up a fixed category hierarchy; with
//! probability `noise` the head is instead drawn from a geometric
//! distribution over surface distance.
//!
//! The vocabulary and model depend only on `language_seed`, so corpora
//! sampled with different `rng_seed`s share one language.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Sentence, TaskKind, Token};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub task: TaskKind,
    pub sentences: usize,
    /// Vocabulary size of each open-class state.
    pub vocab_size: usize,
    /// Mention types (tagging only).
    pub labels: Vec<String>,
    pub min_len: usize,
    pub max_len: usize,
    /// Tagging: probability of emitting a word from a vocabulary shared by
    /// all states. Parsing: probability of a distance-sampled head.
    pub noise: f64,
    /// Probability of leaving the outside state towards a mention.
    pub entity_rate: f64,
    /// Zipf exponent of the per-state word distributions.
    pub zipf: f64,
    pub language_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            task: TaskKind::Tagging,
            sentences: 1000,
            vocab_size: 500,
            labels: vec!["PER".into(), "LOC".into(), "ORG".into()],
            min_len: 5,
            max_len: 20,
            noise: 0.1,
            entity_rate: 0.15,
            zipf: 1.0,
            language_seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.task == TaskKind::Tagging && self.labels.is_empty() {
            return Err(Error::config("labels", "at least one mention type is required"));
        }
        if let Some(bad) = self
            .labels
            .iter()
            .find(|l| l.is_empty() || l.contains(|c: char| c.is_whitespace() || c == '-'))
        {
            return Err(Error::config("labels", format!("invalid mention type {bad:?}")));
        }
        if self.vocab_size == 0 {
            return Err(Error::config("vocab_size", "must be positive"));
        }
        if self.min_len == 0 || self.max_len < self.min_len {
            return Err(Error::config(
                "min_len",
                format!("invalid length range {}..={}", self.min_len, self.max_len),
            ));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::config("noise", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.entity_rate) {
            return Err(Error::config("entity_rate", "must lie in [0, 1)"));
        }
        if !(self.zipf >= 0.0 && self.zipf.is_finite()) {
            return Err(Error::config("zipf", "must be a non-negative number"));
        }
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec, rng_seed: u64) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let corpus = match spec.task {
        TaskKind::Tagging => {
            let hmm = TaggingHmm::new(spec);
            let sentences = (0..spec.sentences)
                .map(|i| hmm.sample(format!("syn{rng_seed}-{}", i + 1), spec, &mut rng))
                .collect();
            Corpus::new(TaskKind::Tagging, sentences)
        }
        TaskKind::Parsing => {
            let grammar = HeadGrammar::new(spec);
            let sentences = (0..spec.sentences)
                .map(|i| grammar.sample(format!("syn{rng_seed}-{}", i + 1), spec, &mut rng))
                .collect();
            Corpus::new(TaskKind::Parsing, sentences)
        }
    };
    debug_assert!(corpus.validate().is_ok());
    Ok(corpus)
}

struct Lexicon {
    used: HashSet<String>,
    rng: ChaCha8Rng,
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr", "kl", "sh",
];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u"];

impl Lexicon {
    fn new(seed: u64) -> Self {
        Lexicon {
            used: HashSet::new(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1e81_c0de),
        }
    }

    fn word(&mut self, capitalized: bool) -> String {
        loop {
            let syllables = self.rng.gen_range(2..=4);
            let mut w: String = (0..syllables)
                .map(|_| {
                    let o = ONSETS[self.rng.gen_range(0..ONSETS.len())];
                    let n = NUCLEI[self.rng.gen_range(0..NUCLEI.len())];
                    format!("{o}{n}")
                })
                .collect();
            if self.used.insert(w.clone()) {
                if capitalized {
                    w[..1].make_ascii_uppercase();
                }
                return w;
            }
        }
    }

    fn words(&mut self, n: usize, capitalized: bool) -> Vec<String> {
        (0..n).map(|_| self.word(capitalized)).collect()
    }
}

fn zipf(n: usize, exponent: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|r| (r as f64).powf(-exponent))).expect("non-empty vocabulary")
}

/// One emitting state: its gold label, word list and POS per word.
struct EmissionState {
    label: String,
    words: Vec<String>,
    pos: Vec<&'static str>,
    dist: WeightedIndex<f64>,
}

/// The generative tagging model. State 0 is the outside state; each mention
/// type `k` owns states `1 + 3k` (trigger), `2 + 3k` (begin), `3 + 3k`
/// (inside).
pub struct TaggingHmm {
    states: Vec<EmissionState>,
    start: WeightedIndex<f64>,
    transitions: Vec<WeightedIndex<f64>>,
    shared: (Vec<String>, WeightedIndex<f64>),
}

impl TaggingHmm {
    pub fn new(spec: &SyntheticSpec) -> Self {
        let mut lex = Lexicon::new(spec.language_seed);
        let mut pos_rng = ChaCha8Rng::seed_from_u64(spec.language_seed.wrapping_add(17));
        let k = spec.labels.len();
        let v = spec.vocab_size;

        const OUTSIDE_POS: &[&str] = &["NOUN", "VERB", "DET", "ADP", "ADV", "PRON", "AUX", "NOUN", "ADJ"];
        let mut states = Vec::with_capacity(1 + 3 * k);
        let outside_words = lex.words(2 * v, false);
        let outside_pos = outside_words
            .iter()
            .map(|_| OUTSIDE_POS[pos_rng.gen_range(0..OUTSIDE_POS.len())])
            .collect();
        states.push(EmissionState {
            label: "O".into(),
            dist: zipf(outside_words.len(), spec.zipf),
            words: outside_words,
            pos: outside_pos,
        });
        for kind in &spec.labels {
            let triggers = lex.words(8, false);
            states.push(EmissionState {
                label: "O".into(),
                dist: zipf(triggers.len(), spec.zipf),
                pos: triggers.iter().map(|_| "ADP").collect(),
                words: triggers,
            });
            for prefix in ["B", "I"] {
                let words = lex.words(v, true);
                let pos = words
                    .iter()
                    .map(|_| if pos_rng.gen_bool(0.9) { "PROPN" } else { "ADJ" })
                    .collect();
                states.push(EmissionState {
                    label: format!("{prefix}-{kind}"),
                    dist: zipf(words.len(), spec.zipf),
                    words,
                    pos,
                });
            }
        }

        let e = spec.entity_rate;
        let kf = k as f64;
        let n = states.len();
        let from_outside = {
            let mut row = vec![0.0; n];
            row[0] = 1.0 - e;
            for j in 0..k {
                row[1 + 3 * j] = 0.5 * e / kf;
                row[2 + 3 * j] = 0.5 * e / kf;
            }
            row
        };
        let mut transitions = Vec::with_capacity(n);
        transitions.push(WeightedIndex::new(&from_outside).unwrap());
        for j in 0..k {
            let (begin, inside) = (2 + 3 * j, 3 + 3 * j);
            let mut row = vec![0.0; n];
            row[begin] = 0.85;
            row[0] = 0.15;
            transitions.push(WeightedIndex::new(&row).unwrap());

            let mut row = vec![0.0; n];
            row[inside] = 0.45;
            row[0] = 0.5;
            for t in 0..k {
                row[1 + 3 * t] += 0.05 / kf;
            }
            transitions.push(WeightedIndex::new(&row).unwrap());

            let mut row = vec![0.0; n];
            row[inside] = 0.2;
            row[0] = 0.75;
            for t in 0..k {
                row[1 + 3 * t] += 0.05 / kf;
            }
            transitions.push(WeightedIndex::new(&row).unwrap());
        }

        let shared_words = lex.words(v, false);
        let shared_dist = zipf(shared_words.len(), spec.zipf);
        TaggingHmm {
            states,
            start: WeightedIndex::new(&from_outside).unwrap(),
            transitions,
            shared: (shared_words, shared_dist),
        }
    }

    fn sample(&self, id: String, spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Sentence {
        let len = rng.gen_range(spec.min_len..=spec.max_len);
        let mut tokens = Vec::with_capacity(len);
        let mut state = self.start.sample(rng);
        for i in 0..len {
            if i > 0 {
                state = self.transitions[state].sample(rng);
            }
            let s = &self.states[state];
            let (form, pos) = if rng.gen_bool(spec.noise) {
                let w = self.shared.1.sample(rng);
                (self.shared.0[w].clone(), "NOUN")
            } else {
                let w = s.dist.sample(rng);
                (s.words[w].clone(), s.pos[w])
            };
            tokens.push(Token::tagged(form, pos, s.label.clone()));
        }
        Sentence::new(id, tokens)
    }
}

const CATEGORIES: &[&str] = &["DET", "ADJ", "NOUN", "PROPN", "PRON", "VERB", "ADP", "ADV"];

fn category_level(pos: &str) -> u8 {
    match pos {
        "VERB" => 1,
        "NOUN" | "PROPN" | "PRON" => 2,
        _ => 3,
    }
}

/// POS Markov chain plus head-attachment rules for parsing corpora.
pub struct HeadGrammar {
    start: WeightedIndex<f64>,
    transitions: Vec<WeightedIndex<f64>>,
    words: Vec<(Vec<String>, WeightedIndex<f64>)>,
}

impl HeadGrammar {
    pub fn new(spec: &SyntheticSpec) -> Self {
        let mut lex = Lexicon::new(spec.language_seed);
        // rows/cols follow CATEGORIES
        #[rustfmt::skip]
        let table: [[f64; 8]; 8] = [
            // DET  ADJ  NOUN PROPN PRON VERB ADP  ADV
            [0.0, 0.3, 0.6, 0.1, 0.0, 0.0, 0.0, 0.0],   // DET
            [0.0, 0.1, 0.7, 0.2, 0.0, 0.0, 0.0, 0.0],   // ADJ
            [0.0, 0.0, 0.05, 0.0, 0.0, 0.45, 0.35, 0.15], // NOUN
            [0.0, 0.0, 0.0, 0.1, 0.0, 0.5, 0.3, 0.1],   // PROPN
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.8, 0.1, 0.1],   // PRON
            [0.45, 0.05, 0.1, 0.15, 0.05, 0.0, 0.1, 0.1], // VERB
            [0.5, 0.1, 0.2, 0.15, 0.05, 0.0, 0.0, 0.0], // ADP
            [0.2, 0.0, 0.0, 0.1, 0.1, 0.5, 0.1, 0.0],   // ADV
        ];
        let start = WeightedIndex::new([0.35, 0.05, 0.1, 0.2, 0.2, 0.0, 0.05, 0.05]).unwrap();
        let transitions = table.iter().map(|row| WeightedIndex::new(row).unwrap()).collect();
        let words = CATEGORIES
            .iter()
            .map(|&c| {
                let size = match c {
                    "DET" | "PRON" => 8.min(spec.vocab_size),
                    "ADP" => 12.min(spec.vocab_size),
                    _ => spec.vocab_size,
                };
                let w = lex.words(size, c == "PROPN");
                let d = zipf(w.len(), spec.zipf);
                (w, d)
            })
            .collect();
        HeadGrammar {
            start,
            transitions,
            words,
        }
    }

    fn sample(&self, id: String, spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Sentence {
        let len = rng.gen_range(spec.min_len..=spec.max_len);
        let mut cats = Vec::with_capacity(len);
        let mut c = self.start.sample(rng);
        for i in 0..len {
            if i > 0 {
                c = self.transitions[c].sample(rng);
            }
            cats.push(c);
        }
        let verb = CATEGORIES.iter().position(|&c| c == "VERB").unwrap();
        if !cats.contains(&verb) {
            cats[len / 2] = verb;
        }
        let pos: Vec<&str> = cats.iter().map(|&c| CATEGORIES[c]).collect();
        let root = pos.iter().position(|&p| p == "VERB").unwrap();
        let level = |i: usize| if i == root { 0 } else { category_level(pos[i]) };

        let nearest = |m: usize, ok: &dyn Fn(usize) -> bool, rightward_only: bool| -> Option<usize> {
            (1..len)
                .flat_map(|d| {
                    let left = (!rightward_only && m >= d).then(|| m - d);
                    let right = (m + d < len).then_some(m + d);
                    left.into_iter().chain(right)
                })
                .find(|&h| ok(h))
        };

        let mut heads = vec![0usize; len];
        for m in 0..len {
            if m == root {
                continue;
            }
            let lm = level(m);
            let head = if spec.noise > 0.0 && rng.gen_bool(spec.noise) {
                let cands: Vec<usize> = (0..len).filter(|&h| level(h) < lm).collect();
                let weights: Vec<f64> = cands.iter().map(|&h| 0.5f64.powi(h.abs_diff(m) as i32 - 1)).collect();
                cands[WeightedIndex::new(&weights).unwrap().sample(rng)]
            } else {
                let is_noun = |h: usize| matches!(pos[h], "NOUN" | "PROPN" | "PRON");
                let is_verb = |h: usize| pos[h] == "VERB";
                match pos[m] {
                    "VERB" => Some(root),
                    "NOUN" | "PROPN" | "PRON" => nearest(m, &is_verb, false),
                    "DET" | "ADJ" => {
                        nearest(m, &|h| is_noun(h) && pos[h] != "PRON", true).or_else(|| nearest(m, &is_noun, false))
                    }
                    "ADP" => nearest(m, &is_noun, true),
                    _ => nearest(m, &is_verb, false),
                }
                .unwrap_or(root)
            };
            heads[m] = head + 1;
        }

        let tokens = (0..len)
            .map(|m| {
                let (words, dist) = &self.words[cats[m]];
                let form = words[dist.sample(rng)].clone();
                let label = if m == root {
                    "root"
                } else {
                    let h = heads[m] - 1;
                    match (pos[m], pos[h]) {
                        ("VERB", _) => "parataxis",
                        ("NOUN" | "PROPN" | "PRON", "VERB") if m < h => "nsubj",
                        ("NOUN" | "PROPN" | "PRON", "VERB") => "obj",
                        ("NOUN" | "PROPN" | "PRON", _) => "nmod",
                        ("DET", _) => "det",
                        ("ADJ", _) => "amod",
                        ("ADP", _) => "case",
                        ("ADV", _) => "advmod",
                        _ => "dep",
                    }
                };
                Token::dep(form, pos[m], heads[m], label)
            })
            .collect();
        Sentence::new(id, tokens)
    }
}
