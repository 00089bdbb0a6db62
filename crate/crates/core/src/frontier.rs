//! Configuration sweeps and Pareto frontier selection.
//!
//! A sweep runs the re-translation policy over a grid of (beta, k,
//! beam) configs on a dev and a test split and records BLEU, DAL, and
//! NE per point. Candidate configs are filtered by a strict dev-NE
//! threshold *before* the frontier is taken; the frontier minimizes DAL
//! and maximizes BLEU; test metrics are attached by config projection.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::decode::DecodeConfig;
use crate::metrics::{evaluate_corpus, MetricError};
use crate::model::ScoringModel;
use crate::ptl::{PtlRecord, TokenSeq};
use crate::simulate::{retranslate_ptl, SimulateError};

#[derive(Debug, Error)]
pub enum FrontierError {
    #[error("empty grid")]
    EmptyGrid,
    #[error("{split} corpus has {sources} sources but {references} references")]
    CorpusMismatch {
        split: Split,
        sources: usize,
        references: usize,
    },
    #[error("{split} corpus is empty")]
    EmptyCorpus { split: Split },
    #[error("config (beta={beta}, k={k}, beam={beam}) on {split}, sentence {index}: {source}")]
    Simulate {
        beta: f64,
        k: usize,
        beam: usize,
        split: Split,
        index: usize,
        #[source]
        source: SimulateError,
    },
    #[error("config (beta={beta}, k={k}, beam={beam}) on {split}: {source}")]
    Metric {
        beta: f64,
        k: usize,
        beam: usize,
        split: Split,
        #[source]
        source: MetricError,
    },
    #[error("no test point for frontier config (beta={beta}, k={k}, beam={beam})")]
    MissingTestPoint { beta: f64, k: usize, beam: usize },
    #[error("no comparable configs across splits after excluding zero-erasure points")]
    NoComparableConfigs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Split {
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}, expected dev or test")),
        }
    }
}

/// One decode configuration of a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub beta: f64,
    pub k: usize,
    pub beam: usize,
}

impl GridConfig {
    fn key(&self) -> (u64, usize, usize) {
        // Bit order equals numeric order for non-negative floats;
        // normalize -0.0 so it joins with 0.0.
        let beta = if self.beta == 0.0 { 0.0 } else { self.beta };
        (beta.to_bits(), self.k, self.beam)
    }

    fn decode_config(&self) -> DecodeConfig {
        DecodeConfig {
            beta: self.beta,
            k: self.k,
            beam: self.beam,
            ..DecodeConfig::default()
        }
    }
}

/// The default grid: beta from 0.0 to 1.0 in steps of 0.2, k in
/// {1, 2, 4, 6, 8, 10, 15, 20, 30}, beam 1; 54 configs.
pub fn default_grid() -> Vec<GridConfig> {
    let betas = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let ks = [1, 2, 4, 6, 8, 10, 15, 20, 30];
    let mut grid = Vec::with_capacity(betas.len() * ks.len());
    for beta in betas {
        for k in ks {
            grid.push(GridConfig { beta, k, beam: 1 });
        }
    }
    grid
}

/// Measured metrics of one (config, split) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub beta: f64,
    pub k: usize,
    pub beam: usize,
    pub split: Split,
    pub bleu: f64,
    pub dal: f64,
    pub ne: f64,
}

impl SweepPoint {
    pub fn config(&self) -> GridConfig {
        GridConfig {
            beta: self.beta,
            k: self.k,
            beam: self.beam,
        }
    }
}

/// Source sentences with their references for one split.
#[derive(Debug, Clone)]
pub struct CorpusPair {
    pub sources: Vec<TokenSeq>,
    pub references: Vec<TokenSeq>,
}

impl CorpusPair {
    fn check(&self, split: Split) -> Result<(), FrontierError> {
        if self.sources.len() != self.references.len() {
            return Err(FrontierError::CorpusMismatch {
                split,
                sources: self.sources.len(),
                references: self.references.len(),
            });
        }
        if self.sources.is_empty() {
            return Err(FrontierError::EmptyCorpus { split });
        }
        Ok(())
    }
}

/// Runs re-translation for every grid config on both splits. Duplicate
/// configs collapse; points come out sorted by (beta, k, beam, split).
pub fn sweep(
    model: &dyn ScoringModel,
    dev: &CorpusPair,
    test: &CorpusPair,
    grid: &[GridConfig],
) -> Result<Vec<SweepPoint>, FrontierError> {
    if grid.is_empty() {
        return Err(FrontierError::EmptyGrid);
    }
    dev.check(Split::Dev)?;
    test.check(Split::Test)?;
    let mut configs = grid.to_vec();
    configs.sort_by_key(GridConfig::key);
    configs.dedup_by_key(|c| c.key());

    let mut points = Vec::with_capacity(configs.len() * 2);
    for config in &configs {
        for (split, corpus) in [(Split::Dev, dev), (Split::Test, test)] {
            points.push(sweep_cell(model, corpus, config, split)?);
        }
    }
    Ok(points)
}

fn sweep_cell(
    model: &dyn ScoringModel,
    corpus: &CorpusPair,
    config: &GridConfig,
    split: Split,
) -> Result<SweepPoint, FrontierError> {
    let decode_config = config.decode_config();
    let mut records = Vec::with_capacity(corpus.sources.len());
    for (index, source) in corpus.sources.iter().enumerate() {
        let ptl = retranslate_ptl(model, source, &decode_config).map_err(|source| {
            FrontierError::Simulate {
                beta: config.beta,
                k: config.k,
                beam: config.beam,
                split,
                index: index + 1,
                source,
            }
        })?;
        records.push(PtlRecord {
            id: format!("{split}-{:04}", index + 1),
            ptl,
        });
    }
    let report =
        evaluate_corpus(&records, &corpus.references).map_err(|source| FrontierError::Metric {
            beta: config.beta,
            k: config.k,
            beam: config.beam,
            split,
            source,
        })?;
    Ok(SweepPoint {
        beta: config.beta,
        k: config.k,
        beam: config.beam,
        split,
        bleu: report.bleu,
        dal: report.dal,
        ne: report.ne,
    })
}

/// Keeps points whose NE is strictly below the threshold.
pub fn filter_by_ne(points: &[SweepPoint], threshold: f64) -> Vec<SweepPoint> {
    points.iter().filter(|p| p.ne < threshold).cloned().collect()
}

/// Pareto-optimal points under (minimize DAL, maximize BLEU). A point
/// is dropped when another has DAL <= and BLEU >= with one strict;
/// among exact metric ties only the lexicographically smallest
/// (beta, k, beam) survives. Output is sorted by ascending DAL and has
/// strictly increasing BLEU.
pub fn pareto_frontier(points: &[SweepPoint]) -> Vec<SweepPoint> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| {
        a.dal
            .total_cmp(&b.dal)
            .then(b.bleu.total_cmp(&a.bleu))
            .then(a.config().key().cmp(&b.config().key()))
    });
    let mut kept: Vec<SweepPoint> = Vec::new();
    for point in sorted {
        if kept.last().is_none_or(|best| point.bleu > best.bleu) {
            kept.push(point);
        }
    }
    kept
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTriple {
    pub bleu: f64,
    pub dal: f64,
    pub ne: f64,
}

impl From<&SweepPoint> for MetricTriple {
    fn from(p: &SweepPoint) -> Self {
        Self {
            bleu: p.bleu,
            dal: p.dal,
            ne: p.ne,
        }
    }
}

/// A dev-optimal config with its metrics on both splits.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub beta: f64,
    pub k: usize,
    pub beam: usize,
    pub dev: MetricTriple,
    pub test: MetricTriple,
}

/// Dev frontier with projected test metrics, ascending dev DAL.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrontierCurve {
    pub points: Vec<FrontierPoint>,
}

/// Attaches test metrics to each dev frontier config.
pub fn project(
    frontier_dev: &[SweepPoint],
    all_points: &[SweepPoint],
) -> Result<FrontierCurve, FrontierError> {
    let test_by_config: BTreeMap<_, &SweepPoint> = all_points
        .iter()
        .filter(|p| p.split == Split::Test)
        .map(|p| (p.config().key(), p))
        .collect();
    let mut points = Vec::with_capacity(frontier_dev.len());
    for dev_point in frontier_dev {
        let test_point = test_by_config.get(&dev_point.config().key()).ok_or(
            FrontierError::MissingTestPoint {
                beta: dev_point.beta,
                k: dev_point.k,
                beam: dev_point.beam,
            },
        )?;
        points.push(FrontierPoint {
            beta: dev_point.beta,
            k: dev_point.k,
            beam: dev_point.beam,
            dev: MetricTriple::from(dev_point),
            test: MetricTriple::from(*test_point),
        });
    }
    Ok(FrontierCurve { points })
}

/// Mean |dev NE - test NE| over configs present in both splits,
/// excluding configs with zero erasure on both (the beta = 1 regime,
/// where the statistic is vacuous).
pub fn ne_stability(
    dev_points: &[SweepPoint],
    test_points: &[SweepPoint],
) -> Result<f64, FrontierError> {
    let test_by_config: BTreeMap<_, f64> = test_points
        .iter()
        .filter(|p| p.split == Split::Test)
        .map(|p| (p.config().key(), p.ne))
        .collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for dev_point in dev_points.iter().filter(|p| p.split == Split::Dev) {
        let Some(&test_ne) = test_by_config.get(&dev_point.config().key()) else {
            continue;
        };
        if dev_point.ne == 0.0 && test_ne == 0.0 {
            continue;
        }
        total += (dev_point.ne - test_ne).abs();
        count += 1;
    }
    if count == 0 {
        return Err(FrontierError::NoComparableConfigs);
    }
    Ok(total / count as f64)
}
