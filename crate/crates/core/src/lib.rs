//! Re-translation for simultaneous machine translation: policy drivers
//! that emit prefix translation lists, the latency and stability
//! metrics that score them, prefix augmentation for training data, and
//! a latency/quality trade-off sweep with Pareto selection.
//!
//! The unit of exchange is the [`ptl::PrefixTranslationList`]: for each
//! source prefix read, the target text displayed at that instant.
//! Everything downstream (content delay, DAL, normalized erasure, BLEU)
//! is computed from that grid, so any external system that can produce
//! one can be scored by this crate.

pub mod augment;
pub mod cli;
pub mod decode;
pub mod frontier;
pub mod io;
pub mod metrics;
pub mod model;
pub mod ptl;
pub mod scorer;
mod seed;
pub mod simulate;

pub use decode::{beam_decode, biased_beam_decode, greedy_decode, DecodeConfig};
pub use metrics::{corpus_bleu, evaluate_corpus, EvalReport};
pub use model::{ModelConfig, NextTokenDist, ScoringModel};
pub use ptl::{PrefixTranslationList, PtlRecord, SentencePair, TokenSeq};
pub use simulate::{retranslate_ptl, run_policy, stream_waitk_ptl, PolicyKind};
