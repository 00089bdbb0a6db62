//! File formats and run manifests.
//!
//! Everything here is UTF-8 with LF newlines. PTLs travel as JSONL
//! (`{"id", "source", "outputs"}` per line), corpora as one
//! whitespace-tokenized sentence per line, alignments as Pharaoh "i-j"
//! lines, sweeps as CSV, reports and frontiers as JSON with 6-decimal
//! fixed floats so reruns diff cleanly. Every written artifact gets a
//! `<name>.manifest.json` sidecar recording the command, arguments, and
//! input digests needed to reproduce it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::augment::AlignmentSet;
use crate::frontier::{FrontierCurve, Split, SweepPoint};
use crate::metrics::EvalReport;
use crate::model::ModelConfig;
use crate::ptl::{PrefixTranslationList, PtlRecord, SentencePair, TokenSeq};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl IoError {
    pub fn exit_code(&self) -> i32 {
        match self {
            IoError::File { .. } => 2,
            IoError::Parse { .. } | IoError::Invalid { .. } => 1,
        }
    }

    fn file(path: &str, source: io::Error) -> Self {
        IoError::File {
            path: path.to_string(),
            source,
        }
    }

    fn parse(path: &str, line: usize, message: impl Into<String>) -> Self {
        IoError::Parse {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }

    fn invalid(path: &str, message: impl Into<String>) -> Self {
        IoError::Invalid {
            path: path.to_string(),
            message: message.into(),
        }
    }
}

pub fn read_text(path: &str) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))
}

pub fn write_text(path: &str, content: &str) -> Result<(), IoError> {
    std::fs::write(path, content).map_err(|e| IoError::file(path, e))
}

/// Fixed 6-decimal rendering shared by CSV and JSON output.
pub fn fixed6(value: f64) -> String {
    let value = if value == 0.0 { 0.0 } else { value };
    format!("{value:.6}")
}

#[derive(Serialize, Deserialize)]
struct PtlWire {
    id: String,
    source: Vec<String>,
    outputs: Vec<Vec<String>>,
}

/// Parses PTL JSONL. Blank lines are ignored; errors cite the 1-based
/// line number.
pub fn parse_ptl_jsonl(path: &str, text: &str) -> Result<Vec<PtlRecord>, IoError> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let wire: PtlWire = serde_json::from_str(line)
            .map_err(|e| IoError::parse(path, lineno, e.to_string()))?;
        let source = TokenSeq::new(wire.source)
            .map_err(|e| IoError::parse(path, lineno, format!("source: {e}")))?;
        let mut outputs = Vec::with_capacity(wire.outputs.len());
        for (step, tokens) in wire.outputs.into_iter().enumerate() {
            outputs.push(TokenSeq::new(tokens).map_err(|e| {
                IoError::parse(path, lineno, format!("output {}: {e}", step + 1))
            })?);
        }
        let ptl = PrefixTranslationList::new(source, outputs)
            .map_err(|e| IoError::parse(path, lineno, e.to_string()))?;
        records.push(PtlRecord { id: wire.id, ptl });
    }
    Ok(records)
}

pub fn read_ptl_jsonl(path: &str) -> Result<Vec<PtlRecord>, IoError> {
    let text = read_text(path)?;
    parse_ptl_jsonl(path, &text)
}

pub fn render_ptl_jsonl(records: &[PtlRecord]) -> String {
    let mut out = String::new();
    for record in records {
        let wire = PtlWire {
            id: record.id.clone(),
            source: record.ptl.source().tokens().to_vec(),
            outputs: record
                .ptl
                .outputs()
                .iter()
                .map(|o| o.tokens().to_vec())
                .collect(),
        };
        out.push_str(&serde_json::to_string(&wire).expect("serializable wire struct"));
        out.push('\n');
    }
    out
}

pub fn write_ptl_jsonl(path: &str, records: &[PtlRecord]) -> Result<(), IoError> {
    write_text(path, &render_ptl_jsonl(records))
}

/// One whitespace-tokenized sentence per line; empty lines are empty
/// sentences (kept, so line counts stay aligned across files).
pub fn read_token_lines(path: &str) -> Result<Vec<TokenSeq>, IoError> {
    Ok(read_text(path)?.lines().map(TokenSeq::parse).collect())
}

/// Like [`read_token_lines`] but rejects empty lines, for inputs that
/// feed decoding.
pub fn read_source_lines(path: &str) -> Result<Vec<TokenSeq>, IoError> {
    let seqs = read_token_lines(path)?;
    for (idx, seq) in seqs.iter().enumerate() {
        if seq.is_empty() {
            return Err(IoError::parse(path, idx + 1, "empty sentence"));
        }
    }
    Ok(seqs)
}

pub fn render_token_lines(seqs: &[TokenSeq]) -> String {
    let mut out = String::new();
    for seq in seqs {
        out.push_str(&seq.to_string());
        out.push('\n');
    }
    out
}

pub fn write_token_lines(path: &str, seqs: &[TokenSeq]) -> Result<(), IoError> {
    write_text(path, &render_token_lines(seqs))
}

pub fn read_sentence_pairs(
    src_path: &str,
    tgt_path: &str,
) -> Result<Vec<SentencePair>, IoError> {
    let sources = read_token_lines(src_path)?;
    let targets = read_token_lines(tgt_path)?;
    if sources.len() != targets.len() {
        return Err(IoError::invalid(
            tgt_path,
            format!(
                "line count mismatch: {src_path} has {}, {tgt_path} has {}",
                sources.len(),
                targets.len()
            ),
        ));
    }
    sources
        .into_iter()
        .zip(targets)
        .enumerate()
        .map(|(idx, (source, target))| {
            SentencePair::new(source, target)
                .map_err(|e| IoError::parse(src_path, idx + 1, e.to_string()))
        })
        .collect()
}

pub fn read_alignment_file(path: &str) -> Result<Vec<AlignmentSet>, IoError> {
    read_text(path)?
        .lines()
        .enumerate()
        .map(|(idx, line)| {
            AlignmentSet::parse_pharaoh(line)
                .map_err(|e| IoError::parse(path, idx + 1, e.to_string()))
        })
        .collect()
}

pub fn read_model_config(path: &str) -> Result<ModelConfig, IoError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| {
        IoError::parse(
            path,
            e.line().max(1),
            format!("model config does not match any known shape: {e}"),
        )
    })
}

/// Renders the evaluation report as single-line JSON with 6-decimal
/// floats: `{"bleu":...,"dal":...,"ne":...,"sentences":[...]}`.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "{{\"bleu\":{},\"dal\":{},\"ne\":{},\"sentences\":[",
        fixed6(report.bleu),
        fixed6(report.dal),
        fixed6(report.ne)
    );
    for (idx, s) in report.per_sentence.iter().enumerate() {
        if idx > 0 {
            out.push(',');
        }
        let _ = write!(
            out,
            "{{\"id\":{},\"dal\":{},\"ne\":{},\"final_len\":{}}}",
            serde_json::to_string(&s.id).expect("string serializes"),
            fixed6(s.dal),
            fixed6(s.ne),
            s.final_len
        );
    }
    out.push_str("]}\n");
    out
}

pub const SWEEP_CSV_HEADER: &str = "beta,k,beam,split,bleu,dal,ne";

pub fn render_sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fixed6(p.beta),
            p.k,
            p.beam,
            p.split,
            fixed6(p.bleu),
            fixed6(p.dal),
            fixed6(p.ne)
        );
    }
    out
}

pub fn parse_sweep_csv(path: &str, text: &str) -> Result<Vec<SweepPoint>, IoError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == SWEEP_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(IoError::parse(
                path,
                1,
                format!("bad header {header:?}, expected {SWEEP_CSV_HEADER:?}"),
            ))
        }
        None => return Err(IoError::invalid(path, "empty sweep file")),
    }
    let mut points = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(IoError::parse(
                path,
                lineno,
                format!("expected 7 fields, found {}", fields.len()),
            ));
        }
        let err = |what: &str| IoError::parse(path, lineno, format!("bad {what} field"));
        let beta: f64 = fields[0].parse().map_err(|_| err("beta"))?;
        let k: usize = fields[1].parse().map_err(|_| err("k"))?;
        let beam: usize = fields[2].parse().map_err(|_| err("beam"))?;
        let split: Split = fields[3].parse().map_err(|_| err("split"))?;
        let bleu: f64 = fields[4].parse().map_err(|_| err("bleu"))?;
        let dal: f64 = fields[5].parse().map_err(|_| err("dal"))?;
        let ne: f64 = fields[6].parse().map_err(|_| err("ne"))?;
        if !(0.0..=1.0).contains(&beta) {
            return Err(IoError::parse(path, lineno, "beta outside [0, 1]"));
        }
        if beam == 0 {
            return Err(IoError::parse(path, lineno, "beam must be >= 1"));
        }
        for (name, v) in [("bleu", bleu), ("dal", dal), ("ne", ne)] {
            if !v.is_finite() {
                return Err(IoError::parse(path, lineno, format!("{name} not finite")));
            }
        }
        let point = SweepPoint {
            beta,
            k,
            beam,
            split,
            bleu,
            dal,
            ne,
        };
        if !seen.insert((beta.to_bits(), k, beam, split)) {
            return Err(IoError::parse(
                path,
                lineno,
                format!("duplicate config (beta={beta}, k={k}, beam={beam}, {split})"),
            ));
        }
        points.push(point);
    }
    Ok(points)
}

pub fn read_sweep_csv(path: &str) -> Result<Vec<SweepPoint>, IoError> {
    let text = read_text(path)?;
    parse_sweep_csv(path, &text)
}

/// Frontier JSON: the NE stability statistic (null when undefined) and
/// one entry per frontier point with dev and test metric triples.
pub fn render_frontier_json(curve: &FrontierCurve, ne_stability: Option<f64>) -> String {
    let mut out = String::from("{\"ne_stability\":");
    match ne_stability {
        Some(v) => out.push_str(&fixed6(v)),
        None => out.push_str("null"),
    }
    out.push_str(",\"points\":[");
    for (idx, p) in curve.points.iter().enumerate() {
        if idx > 0 {
            out.push(',');
        }
        let _ = write!(
            out,
            "{{\"beta\":{},\"k\":{},\"beam\":{},\
             \"dev\":{{\"bleu\":{},\"dal\":{},\"ne\":{}}},\
             \"test\":{{\"bleu\":{},\"dal\":{},\"ne\":{}}}}}",
            fixed6(p.beta),
            p.k,
            p.beam,
            fixed6(p.dev.bleu),
            fixed6(p.dev.dal),
            fixed6(p.dev.ne),
            fixed6(p.test.bleu),
            fixed6(p.test.dal),
            fixed6(p.test.ne)
        );
    }
    out.push_str("]}\n");
    out
}

pub fn sha256_hex_file(path: &str) -> Result<String, IoError> {
    let bytes = std::fs::read(path).map_err(|e| IoError::file(path, e))?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    Ok(hex)
}

/// Reproducibility sidecar written next to every output artifact. It
/// carries no timestamps, so a rerun over identical inputs produces an
/// identical manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    command: String,
    version: String,
    args: BTreeMap<String, String>,
    inputs: BTreeMap<String, String>,
    seed: Option<u64>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            args: BTreeMap::new(),
            inputs: BTreeMap::new(),
            seed: None,
        }
    }

    pub fn arg(mut self, key: &str, value: impl ToString) -> Self {
        self.args.insert(key.to_string(), value.to_string());
        self
    }

    pub fn opt_arg(self, key: &str, value: Option<impl ToString>) -> Self {
        match value {
            Some(v) => self.arg(key, v),
            None => self,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn opt_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    /// Records the SHA-256 of an input file under its path.
    pub fn input(mut self, path: &str) -> Result<Self, IoError> {
        let digest = sha256_hex_file(path)?;
        self.inputs.insert(path.to_string(), digest);
        Ok(self)
    }

    pub fn sidecar_path(artifact_path: &str) -> String {
        format!("{artifact_path}.manifest.json")
    }

    pub fn render(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }

    /// Writes `<artifact>.manifest.json` beside the artifact.
    pub fn write_for(&self, artifact_path: &str) -> Result<(), IoError> {
        write_text(&Self::sidecar_path(artifact_path), &self.render())
    }
}

/// True if the path exists; used by the CLI for friendlier messages.
pub fn exists(path: &str) -> bool {
    Path::new(path).exists()
}
