//! Active learning for structured prediction with partial annotation,
//! adaptive selection ratios and self-training.

pub mod chain;
pub mod config;
pub mod corpus;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod ie;
pub mod learner;
pub mod report;
pub mod runner;
pub mod selector;
pub mod tree;
pub mod uncertainty;

pub use error::{Error, Result};
