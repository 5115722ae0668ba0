//! Synthetic IE corpora: mentions from the tagging generator plus a
//! type-pair relation grammar.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GoldRelation, IeCorpus, IeSentence};
use crate::corpus::{generate_synthetic, SyntheticSpec, TaskKind};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IeSyntheticSpec {
    /// Sentence and mention generator; its task must be tagging.
    pub base: SyntheticSpec,
    pub relation_labels: Vec<String>,
    /// Pairs further apart than this many tokens are never related.
    pub max_gap: usize,
    /// Probability of dropping a relation the grammar licenses.
    pub relation_noise: f64,
}

impl Default for IeSyntheticSpec {
    fn default() -> Self {
        IeSyntheticSpec {
            base: SyntheticSpec {
                entity_rate: 0.25,
                ..SyntheticSpec::default()
            },
            relation_labels: vec!["LOCATED_IN".into(), "WORK_FOR".into()],
            max_gap: 4,
            relation_noise: 0.05,
        }
    }
}

impl IeSyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.base.task != TaskKind::Tagging {
            return Err(Error::config("task", "IE corpora are generated from a tagging spec"));
        }
        if self.relation_labels.is_empty() {
            return Err(Error::config(
                "relation_labels",
                "at least one relation label is required",
            ));
        }
        if !(0.0..=1.0).contains(&self.relation_noise) {
            return Err(Error::config("relation_noise", "must lie in [0, 1]"));
        }
        self.base.validate()
    }

    /// Label licensed for a mention type pair in the given order, as a
    /// fixed function of the language seed.
    fn licensed(&self, left: &str, right: &str) -> Option<&str> {
        let mut h = self.base.language_seed ^ 0x9e37_79b9_7f4a_7c15;
        for b in left.bytes().chain([0xff]).chain(right.bytes()) {
            h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
        }
        let k = (h % (self.relation_labels.len() as u64 + 1)) as usize;
        (k > 0).then(|| self.relation_labels[k - 1].as_str())
    }
}

pub fn generate_ie(spec: &IeSyntheticSpec, rng_seed: u64) -> Result<IeCorpus> {
    spec.validate()?;
    let base = generate_synthetic(&spec.base, rng_seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ 0x5eed_0f1e);
    let sentences = base
        .sentences
        .iter()
        .map(|s| {
            let mentions = s.gold_spans();
            let mut relations = Vec::new();
            for a in 0..mentions.len() {
                for b in a + 1..mentions.len() {
                    let gap = mentions[b].start - mentions[a].end - 1;
                    if gap > spec.max_gap {
                        continue;
                    }
                    if let Some(label) = spec.licensed(&mentions[a].kind, &mentions[b].kind) {
                        if !rng.gen_bool(spec.relation_noise) {
                            relations.push(GoldRelation {
                                head: a,
                                tail: b,
                                label: label.to_string(),
                            });
                        }
                    }
                }
            }
            IeSentence {
                id: s.id.clone(),
                tokens: s.tokens.iter().map(|t| t.form.clone()).collect(),
                pos: s.tokens.iter().map(|t| t.pos.clone()).collect(),
                mentions,
                relations,
            }
        })
        .collect();
    Ok(IeCorpus { sentences })
}
