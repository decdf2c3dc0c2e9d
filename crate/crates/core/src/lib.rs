//! Polyglot dependency semantic role labeling.
//!
//! The crate covers the whole pipeline for CoNLL 2009 style SRL:
//!
//! - [`conll`]: reading, validating and writing CoNLL 2009 files, extracting
//!   one training instance per marked predicate and counting corpus statistics.
//! - [`embeddings`]: pretrained word vectors, PCA reduction and dictionary-driven
//!   CCA alignment of a foreign vector space onto a pivot (English) space.
//! - [`autodiff`]: a small reverse-mode differentiation tape over dense
//!   double-precision matrices, with a finite-difference gradient checker.
//! - [`model`]: the deep bidirectional highway-LSTM tagger with per-language
//!   argument-label and predicate-sense heads, in four architecture variants.
//! - [`lexicon`]: lemma to sense inventories used to restrict sense predictions.
//! - [`training`]: stratified bilingual epoch schedules and the training loop.
//! - [`scorer`]: labeled/unlabeled semantic F1 and per-label breakdowns.
//! - [`synth`]: seeded synthetic corpora for tests and smoke runs.

pub mod autodiff;
pub mod conll;
pub mod embeddings;
mod error;
pub mod lexicon;
mod linalg;
pub mod manifest;
pub mod model;
pub mod scorer;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
