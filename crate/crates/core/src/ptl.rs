//! Token sequences and prefix translation lists.
//!
//! A *prefix translation list* (PTL) records, for each source token read,
//! the full translation displayed at that moment. All latency and
//! stability metrics are defined on this grid. Construction is validated;
//! [`PrefixTranslationList::validate`] produces a report for data of
//! unknown origin (e.g. hand-edited JSONL).

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PtlError {
    #[error("empty token")]
    EmptyToken,
    #[error("token {0:?} contains whitespace")]
    WhitespaceToken(String),
    #[error("source must be non-empty")]
    EmptySource,
    #[error("target must be non-empty")]
    EmptyTarget,
    #[error("{outputs} outputs for {source_len} source tokens")]
    LengthMismatch { source_len: usize, outputs: usize },
}

/// An ordered sequence of tokens. Tokens are non-empty and contain no
/// whitespace; the sequence itself may be empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Result<Self, PtlError> {
        for tok in &tokens {
            if tok.is_empty() {
                return Err(PtlError::EmptyToken);
            }
            if tok.chars().any(char::is_whitespace) {
                return Err(PtlError::WhitespaceToken(tok.clone()));
            }
        }
        Ok(Self(tokens))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Splits a line on whitespace. Never fails; the split cannot produce
    /// empty or whitespace-bearing tokens.
    pub fn parse(line: &str) -> Self {
        Self(line.split_whitespace().map(str::to_owned).collect())
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }

    /// First `n` tokens (all of them if `n` exceeds the length).
    pub fn prefix(&self, n: usize) -> TokenSeq {
        Self(self.0[..n.min(self.0.len())].to_vec())
    }
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl TryFrom<Vec<String>> for TokenSeq {
    type Error = PtlError;

    fn try_from(tokens: Vec<String>) -> Result<Self, PtlError> {
        Self::new(tokens)
    }
}

impl From<TokenSeq> for Vec<String> {
    fn from(seq: TokenSeq) -> Vec<String> {
        seq.0
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

/// Length of the longest common prefix of two sequences.
pub fn lcp_len(a: &[String], b: &[String]) -> usize {
    a.iter().zip(b.iter()).take_while(|(x, y)| x == y).count()
}

/// Merge warning: the last token of a sequence carried the continuation
/// marker with nothing after it to join.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeWarning {
    pub trailing_token: String,
}

impl fmt::Display for MergeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "trailing continuation token {:?}; marker stripped",
            self.trailing_token
        )
    }
}

/// Joins subword pieces using a suffix continuation marker: a token ending
/// in `marker` is glued (marker stripped) to the token that follows.
///
/// A trailing marker on the final token has nothing to join; the token is
/// kept with every marker suffix stripped and a warning is returned.
/// Idempotent: merging an already merged sequence is the identity.
pub fn merge_subwords(seq: &TokenSeq, marker: &str) -> (TokenSeq, Option<MergeWarning>) {
    assert!(!marker.is_empty(), "subword marker must be non-empty");
    let mut out: Vec<String> = Vec::with_capacity(seq.len());
    let mut pending = String::new();
    let mut has_pending = false;
    for tok in seq.tokens() {
        match tok.strip_suffix(marker) {
            Some(body) => {
                pending.push_str(body);
                has_pending = true;
            }
            None if has_pending => {
                pending.push_str(tok);
                out.push(std::mem::take(&mut pending));
                has_pending = false;
            }
            None => out.push(tok.clone()),
        }
    }
    let mut warning = None;
    if has_pending {
        warning = Some(MergeWarning {
            trailing_token: seq.tokens().last().expect("pending implies a token").clone(),
        });
        // Strip repeatedly so the result is stable under a second merge.
        while let Some(stripped) = pending.strip_suffix(marker) {
            pending.truncate(stripped.len());
        }
        if !pending.is_empty() {
            out.push(pending);
        }
    }
    let merged = TokenSeq::new(out).expect("merging valid tokens yields valid tokens");
    (merged, warning)
}

/// One structural problem found by [`PrefixTranslationList::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PtlIssue {
    EmptySource,
    LengthMismatch { source: usize, outputs: usize },
}

impl fmt::Display for PtlIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PtlIssue::EmptySource => write!(f, "source is empty"),
            PtlIssue::LengthMismatch { source, outputs } => {
                write!(f, "{outputs} outputs for {source} source tokens")
            }
        }
    }
}

/// Validation report: structural issues plus whether each output extends
/// the previous one (no revisions anywhere).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PtlValidation {
    pub issues: Vec<PtlIssue>,
    pub append_only: bool,
}

impl PtlValidation {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

/// The displayed translation after each source token, as merged tokens.
/// `outputs[i]` is the display after reading `i + 1` source tokens; the
/// last output is the complete translation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixTranslationList {
    source: TokenSeq,
    outputs: Vec<TokenSeq>,
}

impl PrefixTranslationList {
    pub fn new(source: TokenSeq, outputs: Vec<TokenSeq>) -> Result<Self, PtlError> {
        if source.is_empty() {
            return Err(PtlError::EmptySource);
        }
        if outputs.len() != source.len() {
            return Err(PtlError::LengthMismatch {
                source_len: source.len(),
                outputs: outputs.len(),
            });
        }
        Ok(Self { source, outputs })
    }

    /// Builds without structural checks, for constructing instances that
    /// [`Self::validate`] is expected to reject.
    pub fn new_unchecked(source: TokenSeq, outputs: Vec<TokenSeq>) -> Self {
        Self { source, outputs }
    }

    pub fn source(&self) -> &TokenSeq {
        &self.source
    }

    pub fn outputs(&self) -> &[TokenSeq] {
        &self.outputs
    }

    /// Number of source tokens.
    pub fn source_len(&self) -> usize {
        self.source.len()
    }

    pub fn final_output(&self) -> &TokenSeq {
        self.outputs.last().expect("outputs are non-empty")
    }

    /// Number of tokens in the final output.
    pub fn final_len(&self) -> usize {
        self.final_output().len()
    }

    /// True when every output extends the previous one.
    pub fn is_append_only(&self) -> bool {
        self.outputs
            .windows(2)
            .all(|w| lcp_len(&w[1], &w[0]) == w[0].len())
    }

    /// Total number of suffix tokens deleted across successive outputs.
    pub fn total_erasure(&self) -> usize {
        self.outputs
            .windows(2)
            .map(|w| w[0].len() - lcp_len(&w[1], &w[0]))
            .sum()
    }

    pub fn validate(&self) -> PtlValidation {
        let mut issues = Vec::new();
        if self.source.is_empty() {
            issues.push(PtlIssue::EmptySource);
        }
        if self.outputs.len() != self.source.len() {
            issues.push(PtlIssue::LengthMismatch {
                source: self.source.len(),
                outputs: self.outputs.len(),
            });
        }
        PtlValidation {
            issues,
            append_only: self.is_append_only(),
        }
    }

    /// Applies subword merging to the source and to every output
    /// independently. Warnings are tagged with the output step (1-based;
    /// 0 for the source row).
    pub fn merged(&self, marker: &str) -> (PrefixTranslationList, Vec<(usize, MergeWarning)>) {
        let mut warnings = Vec::new();
        let (source, w) = merge_subwords(&self.source, marker);
        if let Some(w) = w {
            warnings.push((0, w));
        }
        let outputs = self
            .outputs
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let (merged, w) = merge_subwords(o, marker);
                if let Some(w) = w {
                    warnings.push((i + 1, w));
                }
                merged
            })
            .collect();
        (Self { source, outputs }, warnings)
    }
}

/// A PTL with the line identifier it was read with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PtlRecord {
    pub id: String,
    pub ptl: PrefixTranslationList,
}

/// A source/reference sentence pair; both sides non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    source: TokenSeq,
    target: TokenSeq,
}

impl SentencePair {
    pub fn new(source: TokenSeq, target: TokenSeq) -> Result<Self, PtlError> {
        if source.is_empty() {
            return Err(PtlError::EmptySource);
        }
        if target.is_empty() {
            return Err(PtlError::EmptyTarget);
        }
        Ok(Self { source, target })
    }

    pub fn source(&self) -> &TokenSeq {
        &self.source
    }

    pub fn target(&self) -> &TokenSeq {
        &self.target
    }
}
