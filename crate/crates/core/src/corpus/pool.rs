use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AnnotationState;
use crate::error::{Error, Result};

/// Partition of a pool corpus (by sentence index) into seed, dev, labeled
/// and unlabeled sentences.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PoolState {
    pub seed: BTreeSet<usize>,
    pub dev: BTreeSet<usize>,
    pub labeled: BTreeMap<usize, AnnotationState>,
    pub unlabeled: BTreeSet<usize>,
    pub budget_remaining: usize,
}

impl PoolState {
    /// Moves `index` from the unlabeled pool into the labeled set.
    pub fn label(&mut self, index: usize, state: AnnotationState) -> Result<()> {
        if !self.unlabeled.remove(&index) {
            return Err(Error::validation(
                index.to_string(),
                "sentence is not in the unlabeled pool",
            ));
        }
        self.labeled.insert(index, state);
        Ok(())
    }

    /// Checks that the four sets are pairwise disjoint.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        let all = self
            .seed
            .iter()
            .chain(&self.dev)
            .chain(self.labeled.keys())
            .chain(&self.unlabeled);
        for &idx in all {
            if !seen.insert(idx) {
                return Err(Error::validation(
                    idx.to_string(),
                    "sentence appears in more than one pool partition",
                ));
            }
        }
        Ok(())
    }
}
