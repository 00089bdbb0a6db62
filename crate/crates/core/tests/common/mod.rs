//! Shared fixtures and brute-force oracles for the integration suites.
//!
//! The oracles here deliberately reimplement library behavior in the
//! most literal way available (nested scans, exhaustive search) so the
//! optimized library paths are checked against something independent.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use retrans_core::frontier::SweepPoint;
use retrans_core::model::SeededRandomModel;
use retrans_core::ptl::{PrefixTranslationList, SentencePair, TokenSeq};

pub fn seq(line: &str) -> TokenSeq {
    TokenSeq::parse(line)
}

/// The worked eight-token example: a PTL whose content delay, erasure,
/// and lagging values are known by hand.
pub fn worked_example_ptl() -> PrefixTranslationList {
    PrefixTranslationList::new(
        seq("Neue Arzneimittel könnten Lungen- und Eierstockkrebs verlangsamen"),
        vec![
            seq("New"),
            seq("New Medicines"),
            seq("New Medicines"),
            seq("New drugs may be lung"),
            seq("New drugs could be lung and"),
            seq("New drugs may be lung and ovarian cancer"),
            seq("New drugs may slow lung and ovarian cancer"),
        ],
    )
    .unwrap()
}

pub fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(tag)
}

/// A random source sentence over a disjoint source-side vocabulary.
pub fn random_source(rng: &mut ChaCha8Rng, max_len: usize) -> TokenSeq {
    let vocab = ["s1", "s2", "s3", "s4", "s5", "s6"];
    let len = rng.random_range(1..=max_len);
    let tokens = (0..len)
        .map(|_| vocab[rng.random_range(0..vocab.len())].to_string())
        .collect();
    TokenSeq::new(tokens).unwrap()
}

pub fn target_vocab() -> Vec<String> {
    ["t1", "t2", "t3", "t4", "t5"]
        .iter()
        .map(|t| t.to_string())
        .collect()
}

pub fn random_model(rng: &mut ChaCha8Rng) -> SeededRandomModel {
    SeededRandomModel::new(rng.random::<u64>(), target_vocab()).unwrap()
}

/// A random target-side sequence, used as a fake "previous output".
pub fn random_target(rng: &mut ChaCha8Rng, max_len: usize) -> TokenSeq {
    let vocab = target_vocab();
    let len = rng.random_range(0..=max_len);
    let tokens = (0..len)
        .map(|_| vocab[rng.random_range(0..vocab.len())].clone())
        .collect();
    TokenSeq::new(tokens).unwrap()
}

fn occurrences(haystack: &[String], needle: &[String]) -> usize {
    if needle.is_empty() || haystack.len() < needle.len() {
        return 0;
    }
    (0..=haystack.len() - needle.len())
        .filter(|&start| &haystack[start..start + needle.len()] == needle)
        .count()
}

/// Corpus BLEU-4 the slow way: clipped counts via quadratic scans per
/// sentence, pooled over the corpus, geometric mean, brevity penalty,
/// scaled to a percentage.
pub fn bleu_oracle(hypotheses: &[TokenSeq], references: &[TokenSeq]) -> f64 {
    assert_eq!(hypotheses.len(), references.len());
    let total_hyp: usize = hypotheses.iter().map(|h| h.len()).sum();
    let total_ref: usize = references.iter().map(|r| r.len()).sum();
    if total_hyp == 0 {
        return 0.0;
    }
    let mut log_precision_sum = 0.0;
    for n in 1..=4 {
        let mut matched = 0usize;
        let mut total = 0usize;
        for (hyp, reference) in hypotheses.iter().zip(references) {
            let hyp: Vec<String> = hyp.tokens().to_vec();
            let reference: Vec<String> = reference.tokens().to_vec();
            if hyp.len() < n {
                continue;
            }
            total += hyp.len() - n + 1;
            let mut counted: Vec<&[String]> = Vec::new();
            for start in 0..=hyp.len() - n {
                let gram = &hyp[start..start + n];
                if counted.contains(&gram) {
                    continue;
                }
                counted.push(gram);
                matched += occurrences(&hyp, gram).min(occurrences(&reference, gram));
            }
        }
        if matched == 0 || total == 0 {
            return 0.0;
        }
        log_precision_sum += (matched as f64 / total as f64).ln();
    }
    let brevity = if total_hyp >= total_ref {
        1.0
    } else {
        (1.0 - total_ref as f64 / total_hyp as f64).exp()
    };
    100.0 * brevity * (log_precision_sum / 4.0).exp()
}

fn point_key(p: &SweepPoint) -> (u64, usize, usize) {
    let beta = if p.beta == 0.0 { 0.0 } else { p.beta };
    (beta.to_bits(), p.k, p.beam)
}

fn dominates(a: &SweepPoint, b: &SweepPoint) -> bool {
    a.dal <= b.dal && a.bleu >= b.bleu && (a.dal < b.dal || a.bleu > b.bleu)
}

/// Pareto frontier the slow way: quadratic dominance filter, then among
/// exact metric ties keep only the smallest (beta, k, beam).
pub fn pareto_oracle(points: &[SweepPoint]) -> Vec<SweepPoint> {
    let mut kept: Vec<SweepPoint> = points
        .iter()
        .filter(|p| !points.iter().any(|q| dominates(q, p)))
        .cloned()
        .collect();
    kept.sort_by(|a, b| {
        a.dal
            .total_cmp(&b.dal)
            .then(b.bleu.total_cmp(&a.bleu))
            .then(point_key(a).cmp(&point_key(b)))
    });
    kept.dedup_by(|later, first| later.dal == first.dal && later.bleu == first.bleu);
    kept
}

/// Minimal closed target prefix length by literal exhaustive search:
/// try every candidate and re-check the biconditional on every link.
pub fn aligned_len_oracle(
    links: &[(usize, usize)],
    source_prefix_len: usize,
    target_len: usize,
) -> Option<usize> {
    (1..=target_len).find(|&candidate| {
        links
            .iter()
            .all(|&(i, j)| (i < source_prefix_len) == (j < candidate))
    })
}

/// A 20-sentence toy corpus with references drawn from the same target
/// vocabulary the seeded models emit over.
pub fn toy_corpus(tag: u64, sentences: usize) -> (Vec<TokenSeq>, Vec<TokenSeq>) {
    let mut r = rng(tag);
    let sources = (0..sentences)
        .map(|_| random_source(&mut r, 10))
        .collect::<Vec<_>>();
    let references = (0..sentences)
        .map(|_| {
            let vocab = target_vocab();
            let len = r.random_range(1..=10);
            let tokens = (0..len)
                .map(|_| vocab[r.random_range(0..vocab.len())].clone())
                .collect();
            TokenSeq::new(tokens).unwrap()
        })
        .collect();
    (sources, references)
}

pub fn pair(src: &str, tgt: &str) -> SentencePair {
    SentencePair::new(seq(src), seq(tgt)).unwrap()
}
