//! Next-token scoring interface and built-in toy models.
//!
//! A [`ScoringModel`] maps a (source prefix, target prefix) pair to a
//! probability distribution over its vocabulary plus end-of-sequence.
//! The built-ins are desk-scale stand-ins for a translation model: one
//! draws distributions from a seeded hash, the other reads per-token
//! lexical tables.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::seed::stable_rng;
use rand::Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("scorer failure: {0}")]
    Scorer(String),
}

/// Tolerance for the sum-to-one check on distributions.
pub const DIST_SUM_TOLERANCE: f64 = 1e-6;

/// Probability distribution over next tokens plus EOS. Probabilities are
/// finite, non-negative, and sum to 1 within [`DIST_SUM_TOLERANCE`].
/// Token keys satisfy the token invariants (non-empty, no whitespace).
#[derive(Debug, Clone, PartialEq)]
pub struct NextTokenDist {
    tokens: BTreeMap<String, f64>,
    eos: f64,
}

impl NextTokenDist {
    pub fn new(tokens: BTreeMap<String, f64>, eos: f64) -> Result<Self, ModelError> {
        let mut sum = eos;
        check_prob("EOS", eos)?;
        for (token, &p) in &tokens {
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(ModelError::InvalidDistribution(format!(
                    "bad token in support: {token:?}"
                )));
            }
            check_prob(token, p)?;
            sum += p;
        }
        if (sum - 1.0).abs() > DIST_SUM_TOLERANCE {
            return Err(ModelError::InvalidDistribution(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(Self { tokens, eos })
    }

    /// Bypasses the sum check; for internal transforms that preserve it
    /// by construction.
    pub(crate) fn from_parts_unchecked(tokens: BTreeMap<String, f64>, eos: f64) -> Self {
        Self { tokens, eos }
    }

    pub fn tokens(&self) -> &BTreeMap<String, f64> {
        &self.tokens
    }

    pub fn prob(&self, token: &str) -> f64 {
        self.tokens.get(token).copied().unwrap_or(0.0)
    }

    pub fn eos_prob(&self) -> f64 {
        self.eos
    }

    pub fn sum(&self) -> f64 {
        self.eos + self.tokens.values().sum::<f64>()
    }
}

fn check_prob(what: &str, p: f64) -> Result<(), ModelError> {
    if !p.is_finite() || p < 0.0 {
        return Err(ModelError::InvalidDistribution(format!(
            "probability of {what} is {p}"
        )));
    }
    Ok(())
}

fn eos_only() -> NextTokenDist {
    NextTokenDist::from_parts_unchecked(BTreeMap::new(), 1.0)
}

/// Pluggable next-token scorer. Implementations must be deterministic:
/// the same prefix pair always yields the same distribution. They hold
/// no mutable state, so a shared reference can be used from the decoders
/// without synchronization.
pub trait ScoringModel {
    fn next_distribution(
        &self,
        source_prefix: &[String],
        target_prefix: &[String],
    ) -> Result<NextTokenDist, ModelError>;
}

impl<M: ScoringModel + ?Sized> ScoringModel for &M {
    fn next_distribution(
        &self,
        source_prefix: &[String],
        target_prefix: &[String],
    ) -> Result<NextTokenDist, ModelError> {
        (**self).next_distribution(source_prefix, target_prefix)
    }
}

/// Deterministic pseudo-random scorer: the distribution is a pure hash
/// of (seed, source prefix, target prefix). Useful for property tests
/// that need many distinct, reproducible models.
#[derive(Debug, Clone)]
pub struct SeededRandomModel {
    seed: u64,
    vocab: Vec<String>,
}

impl SeededRandomModel {
    pub fn new(seed: u64, mut vocab: Vec<String>) -> Result<Self, ModelError> {
        if vocab.is_empty() {
            return Err(ModelError::InvalidConfig("empty vocabulary".into()));
        }
        for token in &vocab {
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(ModelError::InvalidConfig(format!(
                    "bad vocabulary token: {token:?}"
                )));
            }
        }
        vocab.sort();
        vocab.dedup();
        Ok(Self { seed, vocab })
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }
}

impl ScoringModel for SeededRandomModel {
    fn next_distribution(
        &self,
        source_prefix: &[String],
        target_prefix: &[String],
    ) -> Result<NextTokenDist, ModelError> {
        let mut parts: Vec<&[u8]> = Vec::with_capacity(source_prefix.len() + target_prefix.len() + 4);
        parts.push(b"seeded-random-model");
        let seed_bytes = self.seed.to_le_bytes();
        parts.push(&seed_bytes);
        let src_len = (source_prefix.len() as u64).to_le_bytes();
        parts.push(&src_len);
        for token in source_prefix {
            parts.push(token.as_bytes());
        }
        let tgt_len = (target_prefix.len() as u64).to_le_bytes();
        parts.push(&tgt_len);
        for token in target_prefix {
            parts.push(token.as_bytes());
        }
        let mut rng = stable_rng(&parts);

        // Weight offset keeps every token probability strictly positive
        // so log-scores stay finite. EOS gets no mass on an empty target
        // prefix: the model never translates a sentence to nothing,
        // which keeps corpus metrics (which divide by final length)
        // defined for every decoded sentence.
        let mut weights: Vec<f64> = (0..=self.vocab.len())
            .map(|_| 0.05 + rng.random::<f64>())
            .collect();
        if target_prefix.is_empty() {
            *weights.last_mut().expect("EOS weight present") = 0.0;
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let eos = weights.pop().expect("one weight per vocab entry plus EOS");
        let tokens = self.vocab.iter().cloned().zip(weights).collect();
        Ok(NextTokenDist::from_parts_unchecked(tokens, eos))
    }
}

/// Table-driven scorer. The next distribution is the normalized table of
/// the source token at the current target position. Once the target is
/// at least as long as the source, either EOS is forced
/// (`eos_when_covered`) or the last source token's table keeps applying
/// until the decoder's length cap.
#[derive(Debug, Clone)]
pub struct LexicalTableModel {
    tables: BTreeMap<String, BTreeMap<String, f64>>,
    eos_when_covered: bool,
}

impl LexicalTableModel {
    pub fn new(
        tables: BTreeMap<String, BTreeMap<String, f64>>,
        eos_when_covered: bool,
    ) -> Result<Self, ModelError> {
        for (src, table) in &tables {
            if src.is_empty() || src.chars().any(char::is_whitespace) {
                return Err(ModelError::InvalidConfig(format!(
                    "bad source token: {src:?}"
                )));
            }
            let mut sum = 0.0;
            for (tgt, &w) in table {
                if tgt.is_empty() || tgt.chars().any(char::is_whitespace) {
                    return Err(ModelError::InvalidConfig(format!(
                        "bad target token: {tgt:?}"
                    )));
                }
                if !w.is_finite() || w < 0.0 {
                    return Err(ModelError::InvalidConfig(format!(
                        "bad weight {w} for {src:?} -> {tgt:?}"
                    )));
                }
                sum += w;
            }
            if sum <= 0.0 {
                return Err(ModelError::InvalidConfig(format!(
                    "table for {src:?} has no mass"
                )));
            }
        }
        Ok(Self {
            tables,
            eos_when_covered,
        })
    }
}

impl ScoringModel for LexicalTableModel {
    fn next_distribution(
        &self,
        source_prefix: &[String],
        target_prefix: &[String],
    ) -> Result<NextTokenDist, ModelError> {
        let position = target_prefix.len();
        let src_token = if position < source_prefix.len() {
            &source_prefix[position]
        } else if self.eos_when_covered || source_prefix.is_empty() {
            return Ok(eos_only());
        } else {
            source_prefix.last().expect("non-empty checked above")
        };
        let Some(table) = self.tables.get(src_token) else {
            return Ok(eos_only());
        };
        let total: f64 = table.values().sum();
        let tokens = table
            .iter()
            .map(|(tgt, &w)| (tgt.clone(), w / total))
            .collect();
        Ok(NextTokenDist::from_parts_unchecked(tokens, 0.0))
    }
}

fn default_scorer_top() -> usize {
    64
}

fn default_scorer_timeout() -> u64 {
    30
}

/// On-disk model description. The variants are distinguished by shape:
/// `{"seed": ..., "vocab": [...]}`, `{"tables": {...}}`, or
/// `{"command": "..."}` for an external scorer subprocess.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ModelConfig {
    Seeded {
        seed: u64,
        vocab: Vec<String>,
    },
    Lexical {
        tables: BTreeMap<String, BTreeMap<String, f64>>,
        #[serde(default)]
        eos_when_covered: bool,
    },
    External {
        command: String,
        #[serde(default = "default_scorer_top")]
        top: usize,
        #[serde(default = "default_scorer_timeout")]
        timeout_secs: u64,
    },
}
