//! Classification of Q&A forum questions into problem reports and support
//! requests, plus the downstream analyses built on those labels: association
//! of package properties with question counts, and growth-curve modelling of
//! the cumulative number of questions per category.
//!
//! The pipeline stages live in their own modules:
//!
//! - [`ingest`]: Stack Exchange dumps, question/annotation TSVs, feature CSVs
//! - [`textprep`]: token normalization for training and classification
//! - [`cooccur`]: vocabulary and windowed co-occurrence counts
//! - [`embed`]: weighted log-bilinear embedding training (AdaGrad)
//! - [`features`]: mean-embedding and keyword features
//! - [`classify`]: learners, stratified cross-validation, ROC/PR metrics
//! - [`stats`]: OLS inference, Bonferroni, subset search, rank tests
//! - [`growth`]: cumulative series, growth-model fitting and forecasting
//!
//! Data-parallel loops go through [`exec::Exec`], which runs on rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.

pub mod classify;
pub mod cooccur;
pub mod embed;
mod error;
pub mod exec;
pub mod features;
pub mod growth;
pub mod ingest;
mod label;
pub mod stats;
pub mod textprep;

pub use error::{Error, Result};
pub use exec::Exec;
pub use label::Label;
