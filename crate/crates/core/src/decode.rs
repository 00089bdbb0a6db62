//! Greedy and beam search over a [`ScoringModel`], with optional bias
//! toward a previous output.
//!
//! Biased search interpolates the model distribution with a one-hot on
//! the previous output's next token, in probability space with weight
//! `beta`, for as long as the hypothesis strictly follows that previous
//! output. Scores are sums of log interpolated probabilities; there is
//! no length normalization. Ties break by token sequence order, which
//! puts finished hypotheses (their sequence is a proper prefix of any
//! extension) ahead of longer ones at equal score.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{ModelError, NextTokenDist, ScoringModel};
use crate::ptl::TokenSeq;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("invalid decode config: {0}")]
    InvalidConfig(String),
    #[error("empty source")]
    EmptySource,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Search and display parameters shared by the decoders and policy
/// drivers: bias weight `beta`, wait-k offset `k`, beam width, and the
/// decode length cap `ceil(max_len_factor * |source|) + max_len_slack`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeConfig {
    pub beta: f64,
    pub k: usize,
    pub beam: usize,
    pub max_len_factor: f64,
    pub max_len_slack: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            beta: 0.0,
            k: 0,
            beam: 1,
            max_len_factor: 2.0,
            max_len_slack: 5,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(DecodeError::InvalidConfig(format!(
                "beta {} outside [0, 1]",
                self.beta
            )));
        }
        if self.beam == 0 {
            return Err(DecodeError::InvalidConfig("beam must be >= 1".into()));
        }
        if !self.max_len_factor.is_finite() || self.max_len_factor < 0.0 {
            return Err(DecodeError::InvalidConfig(format!(
                "max_len_factor {} must be finite and >= 0",
                self.max_len_factor
            )));
        }
        Ok(())
    }

    pub fn length_cap(&self, source_len: usize) -> usize {
        (self.max_len_factor * source_len as f64).ceil() as usize + self.max_len_slack
    }
}

/// A live or finished search hypothesis. `following` is true while the
/// token sequence is still a prefix of the bias target.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    pub tokens: Vec<String>,
    pub score: f64,
    pub following: bool,
}

/// Interpolates `(1 - beta) * p(y) + beta * [y == forced_token]`. With
/// no forced token the distribution is returned unchanged. The forced
/// token may be outside the model's support; it then enters with
/// probability exactly `beta`. Bias never applies to EOS.
pub fn bias_distribution(
    model_dist: &NextTokenDist,
    forced_token: Option<&str>,
    beta: f64,
) -> NextTokenDist {
    let Some(forced) = forced_token else {
        return model_dist.clone();
    };
    let keep = 1.0 - beta;
    let mut tokens: BTreeMap<String, f64> = model_dist
        .tokens()
        .iter()
        .map(|(t, &p)| (t.clone(), keep * p))
        .collect();
    let forced_prob = keep * model_dist.prob(forced) + beta;
    if forced_prob > 0.0 || tokens.contains_key(forced) {
        tokens.insert(forced.to_string(), forced_prob);
    }
    NextTokenDist::from_parts_unchecked(tokens, keep * model_dist.eos_prob())
}

/// Argmax next token, or `None` for EOS. Ties prefer EOS, then the
/// lexicographically smallest token.
pub(crate) fn greedy_step(dist: &NextTokenDist) -> Option<String> {
    let mut best: Option<(&str, f64)> = None;
    for (token, &p) in dist.tokens() {
        if p > best.map_or(dist.eos_prob(), |(_, bp)| bp) {
            best = Some((token, p));
        }
    }
    best.map(|(token, _)| token.to_string())
}

/// Repeated argmax until EOS or the default length cap.
pub fn greedy_decode(model: &dyn ScoringModel, source: &TokenSeq) -> Result<TokenSeq, DecodeError> {
    greedy_decode_capped(model, source, DecodeConfig::default().length_cap(source.len()))
}

pub(crate) fn greedy_decode_capped(
    model: &dyn ScoringModel,
    source: &TokenSeq,
    cap: usize,
) -> Result<TokenSeq, DecodeError> {
    if source.is_empty() {
        return Err(DecodeError::EmptySource);
    }
    let mut tokens: Vec<String> = Vec::new();
    while tokens.len() < cap {
        let dist = model.next_distribution(source, &tokens)?;
        match greedy_step(&dist) {
            Some(token) => tokens.push(token),
            None => break,
        }
    }
    Ok(seq_from_decoded(tokens))
}

/// Beam search without bias, default length cap.
pub fn beam_decode(
    model: &dyn ScoringModel,
    source: &TokenSeq,
    beam: usize,
) -> Result<TokenSeq, DecodeError> {
    let config = DecodeConfig {
        beam,
        ..DecodeConfig::default()
    };
    config.validate()?;
    beam_core(model, source, None, 0.0, beam, config.length_cap(source.len()))
}

/// Beam search biased toward `previous_output`.
pub fn biased_beam_decode(
    model: &dyn ScoringModel,
    source: &TokenSeq,
    previous_output: &TokenSeq,
    config: &DecodeConfig,
) -> Result<TokenSeq, DecodeError> {
    config.validate()?;
    beam_core(
        model,
        source,
        Some(previous_output),
        config.beta,
        config.beam,
        config.length_cap(source.len()),
    )
}

struct Candidate {
    tokens: Vec<String>,
    score: f64,
    following: bool,
    finished: bool,
}

fn beam_core(
    model: &dyn ScoringModel,
    source: &TokenSeq,
    bias_target: Option<&TokenSeq>,
    beta: f64,
    beam: usize,
    cap: usize,
) -> Result<TokenSeq, DecodeError> {
    if source.is_empty() {
        return Err(DecodeError::EmptySource);
    }
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        score: 0.0,
        following: true,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();

    while !live.is_empty() {
        let mut candidates: Vec<Candidate> = Vec::new();
        for hyp in &live {
            if hyp.tokens.len() >= cap {
                candidates.push(Candidate {
                    tokens: hyp.tokens.clone(),
                    score: hyp.score,
                    following: hyp.following,
                    finished: true,
                });
                continue;
            }
            let dist = model.next_distribution(source, &hyp.tokens)?;
            let forced = bias_target.and_then(|prev| {
                (hyp.following && hyp.tokens.len() < prev.len())
                    .then(|| prev[hyp.tokens.len()].as_str())
            });
            let dist = match forced {
                Some(token) => bias_distribution(&dist, Some(token), beta),
                None => dist,
            };
            candidates.push(Candidate {
                tokens: hyp.tokens.clone(),
                score: hyp.score + dist.eos_prob().ln(),
                following: hyp.following,
                finished: true,
            });
            for (token, &p) in dist.tokens() {
                let mut tokens = hyp.tokens.clone();
                tokens.push(token.clone());
                let following = hyp.following
                    && bias_target
                        .map(|prev| {
                            hyp.tokens.len() < prev.len() && prev[hyp.tokens.len()] == *token
                        })
                        .unwrap_or(false);
                candidates.push(Candidate {
                    tokens,
                    score: hyp.score + p.ln(),
                    following,
                    finished: false,
                });
            }
        }

        // Same-length candidates have distinct token sequences, and the
        // sequence order puts a finished hypothesis ahead of its own
        // extensions, so (score, tokens) is a strict total order here.
        candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.tokens.cmp(&b.tokens)));
        candidates.truncate(beam);

        live.clear();
        for cand in candidates {
            let hyp = Hypothesis {
                tokens: cand.tokens,
                score: cand.score,
                following: cand.following,
            };
            if cand.finished {
                finished.push(hyp);
            } else {
                live.push(hyp);
            }
        }
        // A live hypothesis can only lose score, so anything strictly
        // below the best finished score is dead; equal scores stay for
        // the tie-break.
        if let Some(best) = finished
            .iter()
            .map(|h| h.score)
            .max_by(f64::total_cmp)
        {
            live.retain(|h| h.score >= best);
        }
    }

    let winner = finished
        .into_iter()
        .min_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.tokens.cmp(&b.tokens))
        })
        .expect("beam >= 1 always finishes at least one hypothesis");
    Ok(seq_from_decoded(winner.tokens))
}

fn seq_from_decoded(tokens: Vec<String>) -> TokenSeq {
    TokenSeq::new(tokens).expect("decoded tokens come from validated distributions")
}

/// First `min(|output|, max(source_prefix_len - k, 0))` tokens.
pub fn waitk_truncate(output: &TokenSeq, source_prefix_len: usize, k: usize) -> TokenSeq {
    output.prefix(source_prefix_len.saturating_sub(k))
}
