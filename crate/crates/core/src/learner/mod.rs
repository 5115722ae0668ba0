//! Sparse linear scorers for chains and trees and their trainer.

mod features;
mod model;
mod params;
mod train;

pub(crate) use features::hash as feature_hash;
pub use features::{
    arc_features, featurize, token_features, word_shape, ArcFeatures, FeatureVector, SentenceFeatures, ARC_TEMPLATES,
    TOKEN_TEMPLATES,
};
pub(crate) use model::softmax;
pub use model::{bio_labels, Marginals, Model, Prediction};
pub(crate) use params::slot_in;
pub use params::{decode_snapshot, slot, Block, ParameterStore, SnapshotHeader, TABLE_BITS, TABLE_SIZE};
pub use train::{
    check_task, gold_loss, make_pseudo_labels, train, PseudoLabel, PseudoLabelSet, TrainConfig, TrainReport,
    TrainingData,
};

/// Features of every sentence in a corpus, in corpus order.
pub fn featurize_corpus(corpus: &crate::corpus::Corpus) -> Vec<SentenceFeatures> {
    use rayon::prelude::*;
    corpus.sentences.par_iter().map(|s| featurize(s, corpus.task)).collect()
}
