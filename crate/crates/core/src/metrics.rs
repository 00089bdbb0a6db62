//! Quality, latency, and stability metrics over prefix translation lists.
//!
//! Latency is measured against *content delay*: the number of source
//! tokens read before a target position, together with everything before
//! it, takes on its final value. Content in flux counts as absent. The
//! delay vector feeds differentiable average lagging (DAL); stability is
//! normalized erasure (NE); quality is corpus BLEU over final outputs.

use std::collections::HashMap;

use thiserror::Error;

use crate::ptl::{lcp_len, PrefixTranslationList, PtlRecord, TokenSeq};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("no final content: final output is empty")]
    NoFinalContent,
    #[error("delay vector is empty")]
    EmptyDelayVector,
    #[error("delay {delay} at position {position} outside 1..={source_len}")]
    DelayOutOfRange {
        position: usize,
        delay: usize,
        source_len: usize,
    },
    #[error("delay vector decreases at position {position}")]
    DelayNotMonotone { position: usize },
    #[error("{erased} tokens erased but final output is empty; NE undefined")]
    ErasureUndefined { erased: usize },
    #[error("hypothesis/reference count mismatch: {hypotheses} vs {references}")]
    CorpusLengthMismatch {
        hypotheses: usize,
        references: usize,
    },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("sentence {id}: {source}")]
    Sentence {
        id: String,
        #[source]
        source: Box<MetricError>,
    },
}

/// Per-target-token delays: `delays()[j]` is the number of source tokens
/// read before the output prefix ending at position `j + 1` finalized.
/// Values are 1-based counts in `1..=source_len` and non-decreasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayVector {
    g: Vec<usize>,
    source_len: usize,
}

impl DelayVector {
    pub fn new(g: Vec<usize>, source_len: usize) -> Result<Self, MetricError> {
        for (pos, &d) in g.iter().enumerate() {
            if d < 1 || d > source_len {
                return Err(MetricError::DelayOutOfRange {
                    position: pos + 1,
                    delay: d,
                    source_len,
                });
            }
            if pos > 0 && d < g[pos - 1] {
                return Err(MetricError::DelayNotMonotone { position: pos + 1 });
            }
        }
        Ok(Self { g, source_len })
    }

    pub fn delays(&self) -> &[usize] {
        &self.g
    }

    pub fn source_len(&self) -> usize {
        self.source_len
    }

    pub fn target_len(&self) -> usize {
        self.g.len()
    }
}

/// Content delay of every final-output position.
///
/// Position `j` finalizes at the earliest step from which every later
/// output agrees with the final output on all of the first `j` tokens.
/// Tokens of intermediate outputs beyond the final length are ignored.
pub fn content_delay(ptl: &PrefixTranslationList) -> Result<DelayVector, MetricError> {
    let final_output = ptl.final_output();
    let target_len = final_output.len();
    if target_len == 0 {
        return Err(MetricError::NoFinalContent);
    }
    let steps = ptl.source_len();

    // stable[i] = length of the final-output prefix that holds from step
    // i + 1 onward (suffix minimum of per-step agreement lengths).
    let agree: Vec<usize> = ptl
        .outputs()
        .iter()
        .map(|o| lcp_len(o, final_output))
        .collect();
    let mut stable = agree;
    for i in (0..steps - 1).rev() {
        stable[i] = stable[i].min(stable[i + 1]);
    }

    let mut g = Vec::with_capacity(target_len);
    let mut step = 0;
    for j in 1..=target_len {
        while stable[step] < j {
            step += 1;
        }
        g.push(step + 1);
    }
    DelayVector::new(g, steps)
}

/// Differentiable average lagging: mean source-token lag behind an ideal
/// simultaneous translator that spends `1/rate` source tokens per target
/// token, where `rate` is target length over source length.
pub fn dal(delays: &DelayVector) -> Result<f64, MetricError> {
    let target_len = delays.target_len();
    if target_len == 0 {
        return Err(MetricError::EmptyDelayVector);
    }
    let rate = target_len as f64 / delays.source_len() as f64;
    let step_cost = 1.0 / rate;
    let mut adjusted_prev = 0.0;
    let mut total = 0.0;
    for (j, &gj) in delays.delays().iter().enumerate() {
        let adjusted = if j == 0 {
            gj as f64
        } else {
            (gj as f64).max(adjusted_prev + step_cost)
        };
        total += adjusted - j as f64 * step_cost;
        adjusted_prev = adjusted;
    }
    Ok(total / target_len as f64)
}

/// Normalized erasure: deleted suffix tokens per final-output token.
/// Zero exactly when the PTL is append-only. With an empty final output
/// the value is 0 when nothing was erased and undefined otherwise.
pub fn normalized_erasure(ptl: &PrefixTranslationList) -> Result<f64, MetricError> {
    let erased = ptl.total_erasure();
    let target_len = ptl.final_len();
    if target_len == 0 {
        return if erased == 0 {
            Ok(0.0)
        } else {
            Err(MetricError::ErasureUndefined { erased })
        };
    }
    Ok(erased as f64 / target_len as f64)
}

const BLEU_ORDER: usize = 4;

/// Corpus BLEU-4: clipped modified n-gram precisions pooled over the
/// corpus, geometric mean, brevity penalty `min(1, e^(1 - r/c))`. Cased,
/// single reference, no smoothing: a zero pooled precision at any order
/// gives BLEU 0.
pub fn corpus_bleu(hypotheses: &[TokenSeq], references: &[TokenSeq]) -> Result<f64, MetricError> {
    if hypotheses.len() != references.len() {
        return Err(MetricError::CorpusLengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }

    let mut matched = [0usize; BLEU_ORDER];
    let mut total = [0usize; BLEU_ORDER];
    let mut hyp_len = 0usize;
    let mut ref_len = 0usize;
    for (hyp, reference) in hypotheses.iter().zip(references) {
        hyp_len += hyp.len();
        ref_len += reference.len();
        for n in 1..=BLEU_ORDER {
            let hyp_counts = ngram_counts(hyp, n);
            let ref_counts = ngram_counts(reference, n);
            matched[n - 1] += hyp_counts
                .iter()
                .map(|(gram, &count)| count.min(ref_counts.get(gram).copied().unwrap_or(0)))
                .sum::<usize>();
            total[n - 1] += hyp.len().saturating_sub(n - 1);
        }
    }

    if hyp_len == 0 {
        return Ok(0.0);
    }
    let mut log_precision_sum = 0.0;
    for n in 0..BLEU_ORDER {
        if matched[n] == 0 || total[n] == 0 {
            return Ok(0.0);
        }
        log_precision_sum += (matched[n] as f64 / total[n] as f64).ln();
    }
    let brevity = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * brevity * (log_precision_sum / BLEU_ORDER as f64).exp())
}

fn ngram_counts(seq: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if seq.len() >= n {
        for gram in seq.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Per-sentence slice of an [`EvalReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceMetrics {
    pub id: String,
    pub dal: f64,
    pub ne: f64,
    pub final_len: usize,
}

/// Corpus-level evaluation: BLEU over final outputs, DAL macro-averaged
/// per sentence, NE micro-averaged (total erased tokens over total final
/// tokens).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub bleu: f64,
    pub dal: f64,
    pub ne: f64,
    pub per_sentence: Vec<SentenceMetrics>,
}

pub fn evaluate_corpus(
    records: &[PtlRecord],
    references: &[TokenSeq],
) -> Result<EvalReport, MetricError> {
    if records.len() != references.len() {
        return Err(MetricError::CorpusLengthMismatch {
            hypotheses: records.len(),
            references: references.len(),
        });
    }
    if records.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }

    let mut per_sentence = Vec::with_capacity(records.len());
    let mut dal_sum = 0.0;
    let mut erased_sum = 0usize;
    let mut final_sum = 0usize;
    for record in records {
        let with_id = |e: MetricError| MetricError::Sentence {
            id: record.id.clone(),
            source: Box::new(e),
        };
        let delays = content_delay(&record.ptl).map_err(with_id)?;
        let sentence_dal = dal(&delays).map_err(with_id)?;
        let sentence_ne = normalized_erasure(&record.ptl).map_err(with_id)?;
        dal_sum += sentence_dal;
        erased_sum += record.ptl.total_erasure();
        final_sum += record.ptl.final_len();
        per_sentence.push(SentenceMetrics {
            id: record.id.clone(),
            dal: sentence_dal,
            ne: sentence_ne,
            final_len: record.ptl.final_len(),
        });
    }

    let finals: Vec<TokenSeq> = records.iter().map(|r| r.ptl.final_output().clone()).collect();
    let bleu = corpus_bleu(&finals, references)?;
    Ok(EvalReport {
        bleu,
        dal: dal_sum / records.len() as f64,
        ne: erased_sum as f64 / final_sum as f64,
        per_sentence,
    })
}
