//! Prefix-pair training-data augmentation.
//!
//! Truncated pairs teach a model to translate partial sources into
//! partial targets. Target prefix length comes either from length
//! proportion (round-half-up, floor 1) or from word-alignment closure:
//! the minimal target prefix such that linked tokens fall inside or
//! outside the prefix pair together. Corpus mixing is seeded per pair,
//! so serial and parallel runs produce identical output.

use std::collections::BTreeSet;

use rand::Rng;
use thiserror::Error;

use crate::ptl::SentencePair;
use crate::seed::stable_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AugmentError {
    #[error("mix probability {0} outside [0, 1]")]
    InvalidMixProbability(f64),
    #[error("aligned mode requires alignments")]
    AlignmentsMissing,
    #[error("corpus has {pairs} pairs but {alignments} alignment sets")]
    AlignmentCountMismatch { pairs: usize, alignments: usize },
    #[error("sentence {index}: link {src}-{tgt} outside {source_len}x{target_len} sentence")]
    LinkOutOfBounds {
        index: usize,
        src: usize,
        tgt: usize,
        source_len: usize,
        target_len: usize,
    },
    #[error("bad alignment token {token:?}, expected \"src-tgt\" with 0-based indices")]
    BadAlignmentToken { token: String },
}

/// 0-based source-target word links for one sentence pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignmentSet {
    links: BTreeSet<(usize, usize)>,
}

impl AlignmentSet {
    pub fn new(links: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self {
            links: links.into_iter().collect(),
        }
    }

    /// Parses one Pharaoh-format line: whitespace-separated "i-j" pairs.
    /// An empty line is a sentence with no links.
    pub fn parse_pharaoh(line: &str) -> Result<Self, AugmentError> {
        let mut links = BTreeSet::new();
        for token in line.split_whitespace() {
            let link = token.split_once('-').and_then(|(i, j)| {
                Some((i.parse::<usize>().ok()?, j.parse::<usize>().ok()?))
            });
            match link {
                Some(pair) => {
                    links.insert(pair);
                }
                None => {
                    return Err(AugmentError::BadAlignmentToken {
                        token: token.to_string(),
                    })
                }
            }
        }
        Ok(Self { links })
    }

    pub fn links(&self) -> &BTreeSet<(usize, usize)> {
        &self.links
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// First link falling outside a source_len x target_len sentence
    /// pair, if any.
    pub fn out_of_bounds(&self, source_len: usize, target_len: usize) -> Option<(usize, usize)> {
        self.links
            .iter()
            .find(|&&(i, j)| i >= source_len || j >= target_len)
            .copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AugmentMode {
    Proportional,
    Aligned,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AugmentMix {
    /// Each pair is independently truncated with probability `p`.
    Stochastic { p: f64 },
    /// Every pair is emitted in full and again truncated.
    Duplicate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub mode: AugmentMode,
    pub mix: AugmentMix,
    pub seed: u64,
}

/// Truncates to `source_prefix_len` source tokens and the length-
/// proportional number of target tokens: `max(1, round(L_s/I * J))`,
/// rounding half up.
///
/// `source_prefix_len` must be in `1..=I`.
pub fn proportional_prefix(pair: &SentencePair, source_prefix_len: usize) -> SentencePair {
    let source_len = pair.source().len();
    assert!(
        (1..=source_len).contains(&source_prefix_len),
        "source_prefix_len {source_prefix_len} outside 1..={source_len}"
    );
    let target_len = pair.target().len();
    // floor(L_s*J/I + 1/2) in exact integer arithmetic.
    let rounded = (2 * source_prefix_len * target_len + source_len) / (2 * source_len);
    let target_prefix_len = rounded.max(1);
    SentencePair::new(
        pair.source().prefix(source_prefix_len),
        pair.target().prefix(target_prefix_len),
    )
    .expect("non-empty prefixes of a valid pair")
}

/// Minimal target prefix length closing the alignment: every link lies
/// inside the prefix pair on both sides or outside on both sides.
/// Returns the length, or `None` when no target prefix length in
/// `1..=J` satisfies that biconditional.
pub fn aligned_prefix_len(
    pair: &SentencePair,
    alignments: &AlignmentSet,
    source_prefix_len: usize,
) -> Option<usize> {
    let target_len = pair.target().len();
    let mut minimal = 1;
    let mut outside_min = None::<usize>;
    for &(i, j) in alignments.links() {
        if i < source_prefix_len {
            minimal = minimal.max(j + 1);
        } else {
            outside_min = Some(outside_min.map_or(j, |m: usize| m.min(j)));
        }
    }
    if minimal > target_len {
        return None;
    }
    if let Some(lowest_outside) = outside_min {
        if lowest_outside < minimal {
            return None;
        }
    }
    Some(minimal)
}

/// [`aligned_prefix_len`] applied to the pair.
///
/// `source_prefix_len` must be in `1..=I`; the links must lie within
/// the pair's bounds.
pub fn aligned_prefix(
    pair: &SentencePair,
    alignments: &AlignmentSet,
    source_prefix_len: usize,
) -> Option<SentencePair> {
    let source_len = pair.source().len();
    assert!(
        (1..=source_len).contains(&source_prefix_len),
        "source_prefix_len {source_prefix_len} outside 1..={source_len}"
    );
    aligned_prefix_len(pair, alignments, source_prefix_len).map(|target_prefix_len| {
        SentencePair::new(
            pair.source().prefix(source_prefix_len),
            pair.target().prefix(target_prefix_len),
        )
        .expect("non-empty prefixes of a valid pair")
    })
}

/// Augments a corpus with truncated pairs per the config. Stochastic
/// mixing replaces pairs in place (the corpus size is unchanged);
/// duplicate mixing emits the full pair followed by its truncation.
/// In aligned mode a pair with no closing target prefix stays full.
/// The per-pair RNG stream depends only on (seed, pair index), so the
/// output is a pure function of the inputs.
pub fn augment_corpus(
    corpus: &[SentencePair],
    config: &AugmentConfig,
    alignments: Option<&[AlignmentSet]>,
) -> Result<Vec<SentencePair>, AugmentError> {
    if let AugmentMix::Stochastic { p } = config.mix {
        if !(0.0..=1.0).contains(&p) {
            return Err(AugmentError::InvalidMixProbability(p));
        }
    }
    let alignments = checked_alignments(corpus, config.mode, alignments)?;

    let mut out = Vec::with_capacity(match config.mix {
        AugmentMix::Stochastic { .. } => corpus.len(),
        AugmentMix::Duplicate => corpus.len() * 2,
    });
    for (index, pair) in corpus.iter().enumerate() {
        let mut rng = stable_rng(&[
            b"augment",
            &config.seed.to_le_bytes(),
            &(index as u64).to_le_bytes(),
        ]);
        let truncated = |ls: usize| -> Option<SentencePair> {
            match config.mode {
                AugmentMode::Proportional => Some(proportional_prefix(pair, ls)),
                AugmentMode::Aligned => {
                    aligned_prefix(pair, &alignments.expect("checked above")[index], ls)
                }
            }
        };
        match config.mix {
            AugmentMix::Stochastic { p } => {
                let truncate = rng.random::<f64>() < p;
                if truncate {
                    let ls = rng.random_range(1..=pair.source().len() as u64) as usize;
                    out.push(truncated(ls).unwrap_or_else(|| pair.clone()));
                } else {
                    out.push(pair.clone());
                }
            }
            AugmentMix::Duplicate => {
                let ls = rng.random_range(1..=pair.source().len() as u64) as usize;
                out.push(pair.clone());
                if let Some(short) = truncated(ls) {
                    out.push(short);
                }
            }
        }
    }
    Ok(out)
}

fn checked_alignments<'a>(
    corpus: &[SentencePair],
    mode: AugmentMode,
    alignments: Option<&'a [AlignmentSet]>,
) -> Result<Option<&'a [AlignmentSet]>, AugmentError> {
    match mode {
        AugmentMode::Proportional => Ok(None),
        AugmentMode::Aligned => {
            let sets = alignments.ok_or(AugmentError::AlignmentsMissing)?;
            if sets.len() != corpus.len() {
                return Err(AugmentError::AlignmentCountMismatch {
                    pairs: corpus.len(),
                    alignments: sets.len(),
                });
            }
            for (index, (pair, set)) in corpus.iter().zip(sets).enumerate() {
                if let Some((src, tgt)) =
                    set.out_of_bounds(pair.source().len(), pair.target().len())
                {
                    return Err(AugmentError::LinkOutOfBounds {
                        index,
                        src,
                        tgt,
                        source_len: pair.source().len(),
                        target_len: pair.target().len(),
                    });
                }
            }
            Ok(Some(sets))
        }
    }
}

/// Truncates every pair at source length `min(source_prefix_len, I)`,
/// bypassing the mix policy; a test hook for pinning exact prefixes.
/// Pairs whose alignment does not close stay full.
pub fn force_truncate_corpus(
    corpus: &[SentencePair],
    mode: AugmentMode,
    alignments: Option<&[AlignmentSet]>,
    source_prefix_len: usize,
) -> Result<Vec<SentencePair>, AugmentError> {
    let alignments = checked_alignments(corpus, mode, alignments)?;
    Ok(corpus
        .iter()
        .enumerate()
        .map(|(index, pair)| {
            let ls = source_prefix_len.min(pair.source().len()).max(1);
            match mode {
                AugmentMode::Proportional => proportional_prefix(pair, ls),
                AugmentMode::Aligned => {
                    aligned_prefix(pair, &alignments.expect("checked above")[index], ls)
                        .unwrap_or_else(|| pair.clone())
                }
            }
        })
        .collect())
}
