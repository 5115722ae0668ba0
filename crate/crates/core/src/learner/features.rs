//! Hashed indicator features for tokens and arcs.

use std::hash::Hasher;

use fnv::FnvHasher;

use crate::corpus::{Sentence, TaskKind};

/// Sparse feature list. Ids are unique and sorted; values are finite.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureVector {
    pub entries: Vec<(u64, f64)>,
}

impl FeatureVector {
    pub(crate) fn from_ids(mut ids: Vec<u64>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        FeatureVector {
            entries: ids.into_iter().map(|id| (id, 1.0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Upper bound on features per token.
pub const TOKEN_TEMPLATES: usize = 19;
/// Upper bound on features per arc.
pub const ARC_TEMPLATES: usize = 12;

/// Arc features for every (head, modifier) pair, head 0 being the root.
#[derive(Clone, Debug, PartialEq)]
pub struct ArcFeatures {
    n: usize,
    arcs: Vec<FeatureVector>,
}

impl ArcFeatures {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Features of the arc from `head` (0 = root) to the 1-based `modifier`.
    /// Self-arcs have no features.
    pub fn get(&self, head: usize, modifier: usize) -> &FeatureVector {
        &self.arcs[head * self.n + modifier - 1]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SentenceFeatures {
    Tagging(Vec<FeatureVector>),
    Parsing(ArcFeatures),
}

impl SentenceFeatures {
    pub fn len(&self) -> usize {
        match self {
            SentenceFeatures::Tagging(t) => t.len(),
            SentenceFeatures::Parsing(a) => a.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn featurize(sentence: &Sentence, task: TaskKind) -> SentenceFeatures {
    match task {
        TaskKind::Tagging => {
            SentenceFeatures::Tagging((0..sentence.len()).map(|i| token_features(sentence, i)).collect())
        }
        TaskKind::Parsing => {
            let n = sentence.len();
            let mut arcs = Vec::with_capacity((n + 1) * n);
            for h in 0..=n {
                for m in 1..=n {
                    arcs.push(if h == m {
                        FeatureVector::default()
                    } else {
                        arc_features(sentence, h, m)
                    });
                }
            }
            SentenceFeatures::Parsing(ArcFeatures { n, arcs })
        }
    }
}

pub(crate) fn hash(template: u8, parts: &[&str]) -> u64 {
    let mut h = FnvHasher::default();
    h.write_u8(template);
    for p in parts {
        h.write(p.as_bytes());
        h.write_u8(0xff);
    }
    h.finish()
}

/// Collapses character classes: `McDonald` -> `XxXx`, `1999` -> `d`.
pub fn word_shape(word: &str) -> String {
    let mut out = String::new();
    let mut last = None;
    for c in word.chars() {
        let class = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_ascii_digit() {
            'd'
        } else {
            c
        };
        if last != Some(class) {
            out.push(class);
            last = Some(class);
        }
    }
    out
}

fn prefix(word: &str, k: usize) -> Option<&str> {
    word.char_indices()
        .nth(k)
        .map(|(i, _)| &word[..i])
        .or_else(|| (word.chars().count() == k).then_some(word))
}

fn suffix(word: &str, k: usize) -> Option<&str> {
    let count = word.chars().count();
    if count < k {
        return None;
    }
    word.char_indices().nth(count - k).map(|(i, _)| &word[i..])
}

pub fn token_features(sentence: &Sentence, i: usize) -> FeatureVector {
    let tok = &sentence.tokens[i];
    let word = tok.form.as_str();
    let lower = word.to_lowercase();
    let mut ids = vec![
        hash(0, &[]),
        hash(1, &[word]),
        hash(2, &[&lower]),
        hash(3, &[&word_shape(word)]),
        hash(4, &[&tok.pos]),
    ];
    for k in 1..=3 {
        if let Some(p) = prefix(&lower, k) {
            ids.push(hash(5 + k as u8, &[p]));
        }
        if let Some(s) = suffix(&lower, k) {
            ids.push(hash(9 + k as u8, &[s]));
        }
    }
    for (slot, offset) in [-2isize, -1, 1, 2].into_iter().enumerate() {
        let j = i as isize + offset;
        let (w, p) = if j < 0 {
            ("<s>".to_string(), "<s>")
        } else if j as usize >= sentence.len() {
            ("</s>".to_string(), "</s>")
        } else {
            let t = &sentence.tokens[j as usize];
            (t.form.to_lowercase(), t.pos.as_str())
        };
        ids.push(hash(20 + slot as u8, &[&w]));
        ids.push(hash(30 + slot as u8, &[p]));
    }
    FeatureVector::from_ids(ids)
}

fn distance_bin(d: usize) -> &'static str {
    match d {
        1 => "1",
        2 => "2",
        3 => "3",
        4 => "4",
        5 => "5",
        6..=10 => "6-10",
        _ => "11+",
    }
}

/// Features of the arc `head -> modifier`; both 1-based, head 0 = root.
pub fn arc_features(sentence: &Sentence, head: usize, modifier: usize) -> FeatureVector {
    let (hw, hp) = if head == 0 {
        ("<root>".to_string(), "<root>")
    } else {
        let t = &sentence.tokens[head - 1];
        (t.form.to_lowercase(), t.pos.as_str())
    };
    let m = &sentence.tokens[modifier - 1];
    let mw = m.form.to_lowercase();
    let mp = m.pos.as_str();
    let dir = if head == 0 {
        "root"
    } else if head < modifier {
        "right"
    } else {
        "left"
    };
    let dist = if head == 0 {
        "root"
    } else {
        distance_bin(head.abs_diff(modifier))
    };
    FeatureVector::from_ids(vec![
        hash(40, &[]),
        hash(41, &[&hw]),
        hash(42, &[hp]),
        hash(43, &[&mw]),
        hash(44, &[mp]),
        hash(45, &[hp, mp]),
        hash(46, &[&hw, mp]),
        hash(47, &[hp, &mw]),
        hash(48, &[&hw, &mw]),
        hash(49, &[dir, dist]),
        hash(50, &[hp, mp, dir, dist]),
        hash(51, &[hp, mp, dir]),
    ])
}
