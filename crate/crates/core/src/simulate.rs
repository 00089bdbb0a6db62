//! Policy drivers that build prefix translation lists.
//!
//! `retranslate_ptl` decodes every source prefix from scratch, biasing
//! toward the previously displayed output and truncating the display by
//! wait-k; earlier output may be revised. `stream_waitk_ptl` is the
//! append-only agent: it commits tokens greedily up to the wait-k
//! capacity and never revises them. With `beta = 1` and `beam = 1` the
//! two produce identical PTLs step for step.

use std::fmt;
use std::str::FromStr;

use crate::decode::{
    biased_beam_decode, greedy_step, waitk_truncate, DecodeConfig, DecodeError,
};
use crate::model::ScoringModel;
use crate::ptl::{PrefixTranslationList, TokenSeq};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error("empty source")]
    EmptySource,
    #[error("decoding source prefix {prefix}: {source}")]
    Decode {
        prefix: usize,
        #[source]
        source: DecodeError,
    },
    #[error("stream policy run is not append-only")]
    NotAppendOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Retranslate,
    StreamWaitk,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Retranslate => "retranslate",
            PolicyKind::StreamWaitk => "stream_waitk",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "retranslate" => Ok(PolicyKind::Retranslate),
            "stream" | "stream_waitk" => Ok(PolicyKind::StreamWaitk),
            other => Err(format!(
                "unknown policy {other:?}, expected retranslate or stream"
            )),
        }
    }
}

/// One policy execution: the configuration it ran under and the PTL it
/// produced. Stream runs must be append-only.
#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub config: DecodeConfig,
    pub policy: PolicyKind,
    pub ptl: PrefixTranslationList,
}

impl PolicyRun {
    pub fn new(
        config: DecodeConfig,
        policy: PolicyKind,
        ptl: PrefixTranslationList,
    ) -> Result<Self, SimulateError> {
        if policy == PolicyKind::StreamWaitk && !ptl.is_append_only() {
            return Err(SimulateError::NotAppendOnly);
        }
        Ok(Self {
            config,
            policy,
            ptl,
        })
    }
}

/// Runs the configured policy over one source sentence.
pub fn run_policy(
    model: &dyn ScoringModel,
    source: &TokenSeq,
    policy: PolicyKind,
    config: &DecodeConfig,
) -> Result<PolicyRun, SimulateError> {
    let ptl = match policy {
        PolicyKind::Retranslate => retranslate_ptl(model, source, config)?,
        PolicyKind::StreamWaitk => stream_waitk_ptl(model, source, config.k)?,
    };
    PolicyRun::new(config.clone(), policy, ptl)
}

/// Re-translation: for each source prefix i, decode a full hypothesis
/// biased toward the previously displayed output, then display its
/// wait-k truncation. The final prefix is never truncated; the sentence
/// is complete, so the full hypothesis is shown.
pub fn retranslate_ptl(
    model: &dyn ScoringModel,
    source: &TokenSeq,
    config: &DecodeConfig,
) -> Result<PrefixTranslationList, SimulateError> {
    let total = source.len();
    if total == 0 {
        return Err(SimulateError::EmptySource);
    }
    let mut displayed = TokenSeq::empty();
    let mut outputs = Vec::with_capacity(total);
    for i in 1..=total {
        let prefix = TokenSeq::new(source[..i].to_vec()).expect("prefix of a valid TokenSeq");
        let full = biased_beam_decode(model, &prefix, &displayed, config)
            .map_err(|source| SimulateError::Decode { prefix: i, source })?;
        displayed = if i == total {
            full
        } else {
            waitk_truncate(&full, i, config.k)
        };
        outputs.push(displayed.clone());
    }
    Ok(PrefixTranslationList::new(source.clone(), outputs)
        .expect("one output per source token, source non-empty"))
}

/// Streaming wait-k: after reading i < I source tokens the committed
/// output holds max(i - k, 0) tokens, fewer if the model proposed EOS
/// at the current prefix; a longer prefix may revive the stream, which
/// keeps the run aligned with re-translation at beta = 1. At i = I the
/// output is extended greedily to EOS or the default length cap.
pub fn stream_waitk_ptl(
    model: &dyn ScoringModel,
    source: &TokenSeq,
    k: usize,
) -> Result<PrefixTranslationList, SimulateError> {
    let total = source.len();
    if total == 0 {
        return Err(SimulateError::EmptySource);
    }
    let cap = DecodeConfig::default().length_cap(total);
    let mut committed: Vec<String> = Vec::new();
    let mut outputs = Vec::with_capacity(total);
    for i in 1..=total {
        let prefix = &source[..i];
        let capacity = if i < total { i.saturating_sub(k) } else { cap };
        while committed.len() < capacity {
            let dist = model
                .next_distribution(prefix, &committed)
                .map_err(|e| SimulateError::Decode {
                    prefix: i,
                    source: e.into(),
                })?;
            match greedy_step(&dist) {
                Some(token) => committed.push(token),
                None => break,
            }
        }
        outputs.push(TokenSeq::new(committed.clone()).expect("tokens from validated distributions"));
    }
    Ok(PrefixTranslationList::new(source.clone(), outputs)
        .expect("one output per source token, source non-empty"))
}
