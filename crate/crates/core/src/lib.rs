//! User-level suicide risk severity assessment on C-SSRS annotated Reddit data.
//!
//! Two competing methodologies are implemented on top of a small, dependency-free
//! neural core:
//!
//! * **TvarM** (time-variant): an LSTM scores every post independently, and a CNN
//!   convolves over the time-ordered sequence of per-post risk probability vectors
//!   `[Pr(S) Pr(I) Pr(B) Pr(A)]` to predict the user's severity level.
//! * **TinvM** (time-invariant): a Kim-style CNN over the concatenation of all of a
//!   user's posts.
//!
//! Around them sit the corpus loader and ablation slicer ([`corpus`]), the
//! embedding-based clinical normalization front-end ([`lexicon`]), and the
//! evaluation harness ([`eval`]): stratified cross-validation, the 16-experiment
//! ablation grid, per-class metrics, one-vs-rest ROC curves and Krippendorff's
//! alpha.
//!
//! # Disclaimer
//!
//! This is research software. Its outputs are not a clinical assessment and must
//! not be used as a substitute for evaluation by a qualified professional.

pub mod corpus;
pub mod eval;
pub mod lexicon;
pub mod models;
pub mod nn;
pub mod seed;
pub mod synthetic;

pub use corpus::{PostLabel, PostRecord, SeverityLabel, UserRecord};
pub use lexicon::{EmbeddingTable, Lexicon};
pub use models::{Method, ModelBundle, TrainConfig, TrainedModel, UserPrediction};
