//! External scorer protocol: JSON lines over a child process's standard
//! streams.
//!
//! Request: `{"src": [tokens], "tgt": [tokens], "top": n}`. Response:
//! `{"items": [["token", logprob], ...], "eos": logprob}` with items
//! sorted by descending logprob. The client renormalizes over the
//! returned items plus EOS; tokens the scorer omitted have probability
//! zero (decode bias may still force them). Zero probabilities travel
//! as the floor logprob [`MIN_LOGPROB`].

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{
    LexicalTableModel, ModelConfig, ModelError, NextTokenDist, ScoringModel, SeededRandomModel,
};

/// Floor for transmitted logprobs; stands in for log(0).
pub const MIN_LOGPROB: f64 = -1e9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScorerRequest {
    pub src: Vec<String>,
    pub tgt: Vec<String>,
    pub top: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScorerResponse {
    pub items: Vec<(String, f64)>,
    pub eos: f64,
}

impl ScorerResponse {
    /// Validates the contract and renormalizes into a distribution.
    pub fn into_distribution(self) -> Result<NextTokenDist, ModelError> {
        if !self.eos.is_finite() {
            return Err(ModelError::Scorer(format!(
                "EOS logprob {} not finite",
                self.eos
            )));
        }
        let mut max = self.eos;
        let mut prev = f64::INFINITY;
        for (token, logprob) in &self.items {
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(ModelError::Scorer(format!("bad token {token:?}")));
            }
            if !logprob.is_finite() {
                return Err(ModelError::Scorer(format!(
                    "logprob {logprob} for {token:?} not finite"
                )));
            }
            if *logprob > prev {
                return Err(ModelError::Scorer(format!(
                    "items not sorted by descending logprob at {token:?}"
                )));
            }
            prev = *logprob;
            max = max.max(*logprob);
        }
        let mut tokens = std::collections::BTreeMap::new();
        let mut sum = (self.eos - max).exp();
        for (token, logprob) in self.items {
            let p = (logprob - max).exp();
            if tokens.insert(token.clone(), p).is_some() {
                return Err(ModelError::Scorer(format!("duplicate token {token:?}")));
            }
            sum += p;
        }
        if sum <= 0.0 || !sum.is_finite() {
            return Err(ModelError::Scorer(format!("degenerate response, mass {sum}")));
        }
        let eos = (self.eos - max).exp() / sum;
        for p in tokens.values_mut() {
            *p /= sum;
        }
        Ok(NextTokenDist::from_parts_unchecked(tokens, eos))
    }
}

struct ScorerProcess {
    child: Child,
    stdin: std::process::ChildStdin,
    lines: mpsc::Receiver<std::io::Result<String>>,
}

/// [`ScoringModel`] backed by a child process speaking the scorer
/// protocol. Requests are strictly sequential; the handle serializes
/// concurrent callers through a mutex.
pub struct ExternalScorerModel {
    process: Mutex<ScorerProcess>,
    command: String,
    top: usize,
    timeout: Duration,
}

impl ExternalScorerModel {
    /// Spawns `command` (whitespace-split, no shell) and speaks the
    /// protocol over its standard streams.
    pub fn spawn(command: &str, top: usize, timeout: Duration) -> Result<Self, ModelError> {
        let parts: Vec<&str> = command.split_whitespace().collect();
        let (program, args) = parts
            .split_first()
            .ok_or_else(|| ModelError::Scorer("empty scorer command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| ModelError::Scorer(format!("spawning {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("stdin piped");
        let stdout = child.stdout.take().expect("stdout piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            process: Mutex::new(ScorerProcess {
                child,
                stdin,
                lines: rx,
            }),
            command: command.to_string(),
            top,
            timeout,
        })
    }

    pub fn from_config(config: &ModelConfig) -> Result<Self, ModelError> {
        match config {
            ModelConfig::External {
                command,
                top,
                timeout_secs,
            } => Self::spawn(command, *top, Duration::from_secs(*timeout_secs)),
            _ => Err(ModelError::Scorer(
                "config does not describe an external scorer".into(),
            )),
        }
    }
}

impl ScoringModel for ExternalScorerModel {
    fn next_distribution(
        &self,
        source_prefix: &[String],
        target_prefix: &[String],
    ) -> Result<NextTokenDist, ModelError> {
        let request = ScorerRequest {
            src: source_prefix.to_vec(),
            tgt: target_prefix.to_vec(),
            top: self.top,
        };
        let line = serde_json::to_string(&request).expect("request serializes");
        let mut process = self.process.lock().expect("scorer mutex");
        process
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| process.stdin.write_all(b"\n"))
            .and_then(|_| process.stdin.flush())
            .map_err(|e| ModelError::Scorer(format!("writing to {}: {e}", self.command)))?;
        let line = match process.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => {
                return Err(ModelError::Scorer(format!(
                    "reading from {}: {e}",
                    self.command
                )))
            }
            Err(RecvTimeoutError::Timeout) => {
                return Err(ModelError::Scorer(format!(
                    "scorer {} timed out after {:?}",
                    self.command, self.timeout
                )))
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(ModelError::Scorer(format!(
                    "scorer {} closed its output",
                    self.command
                )))
            }
        };
        let response: ScorerResponse = serde_json::from_str(&line).map_err(|e| {
            ModelError::Scorer(format!("malformed response line {line:?}: {e}"))
        })?;
        response.into_distribution()
    }
}

impl Drop for ExternalScorerModel {
    fn drop(&mut self) {
        if let Ok(mut process) = self.process.lock() {
            let _ = process.child.kill();
            let _ = process.child.wait();
        }
    }
}

/// Serves a model over the protocol: reads request lines until EOF,
/// writes one response line per request. This is the reference server
/// used by `retrans scorer-serve`.
pub fn serve_model(
    model: &dyn ScoringModel,
    input: impl BufRead,
    mut output: impl Write,
) -> Result<(), ModelError> {
    for line in input.lines() {
        let line = line.map_err(|e| ModelError::Scorer(format!("reading request: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let request: ScorerRequest = serde_json::from_str(&line)
            .map_err(|e| ModelError::Scorer(format!("malformed request {line:?}: {e}")))?;
        let dist = model.next_distribution(&request.src, &request.tgt)?;
        let response = response_from_dist(&dist, request.top);
        let line = serde_json::to_string(&response).expect("response serializes");
        output
            .write_all(line.as_bytes())
            .and_then(|_| output.write_all(b"\n"))
            .and_then(|_| output.flush())
            .map_err(|e| ModelError::Scorer(format!("writing response: {e}")))?;
    }
    Ok(())
}

fn clamp_log(p: f64) -> f64 {
    if p > 0.0 {
        p.ln().max(MIN_LOGPROB)
    } else {
        MIN_LOGPROB
    }
}

/// Top-`top` items by probability, descending, ties by token order.
pub fn response_from_dist(dist: &NextTokenDist, top: usize) -> ScorerResponse {
    let mut items: Vec<(String, f64)> = dist
        .tokens()
        .iter()
        .map(|(t, &p)| (t.clone(), clamp_log(p)))
        .collect();
    items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    items.truncate(top);
    ScorerResponse {
        items,
        eos: clamp_log(dist.eos_prob()),
    }
}

/// Builds any model config, spawning a subprocess for external ones.
pub fn build_model(config: &ModelConfig) -> Result<Box<dyn ScoringModel>, ModelError> {
    match config {
        ModelConfig::Seeded { seed, vocab } => {
            Ok(Box::new(SeededRandomModel::new(*seed, vocab.clone())?))
        }
        ModelConfig::Lexical {
            tables,
            eos_when_covered,
        } => Ok(Box::new(LexicalTableModel::new(
            tables.clone(),
            *eos_when_covered,
        )?)),
        ModelConfig::External { .. } => Ok(Box::new(ExternalScorerModel::from_config(config)?)),
    }
}
