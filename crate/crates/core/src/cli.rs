//! Command-line surface.
//!
//! Exit codes: 0 success, 1 validation or parse error, 2 IO or scorer
//! protocol error.

use clap::{Args, Parser, Subcommand};

use crate::augment::{
    augment_corpus, force_truncate_corpus, AugmentConfig, AugmentMix, AugmentMode,
};
use crate::decode::{DecodeConfig, DecodeError};
use crate::frontier::{
    default_grid, filter_by_ne, ne_stability, pareto_frontier, project, sweep, CorpusPair,
    FrontierError, GridConfig, Split,
};
use crate::io::{
    read_alignment_file, read_model_config, read_ptl_jsonl, read_source_lines,
    read_sentence_pairs, read_sweep_csv, read_token_lines, render_frontier_json,
    render_report, render_sweep_csv, write_ptl_jsonl, write_text, write_token_lines, fixed6,
    IoError, RunManifest,
};
use crate::metrics::evaluate_corpus;
use crate::model::{ModelConfig, ModelError};
use crate::ptl::PtlRecord;
use crate::scorer::{build_model, serve_model};
use crate::simulate::{run_policy, PolicyKind, SimulateError};

#[derive(Debug, Parser)]
#[command(
    name = "retrans",
    version,
    about = "Evaluate, simulate, and tune re-translation for simultaneous machine translation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a PTL file against references (BLEU, DAL, NE)
    Evaluate(EvaluateArgs),
    /// Run a translation policy over source sentences, emitting PTLs
    Simulate(SimulateArgs),
    /// Augment a parallel corpus with prefix pairs
    Augment(AugmentArgs),
    /// Measure a (beta, k, beam) grid on dev and test splits
    Sweep(SweepArgs),
    /// Select the dev Pareto frontier from a sweep and project to test
    Frontier(FrontierArgs),
    /// Serve a model over the scorer protocol on stdin/stdout
    ScorerServe(ScorerServeArgs),
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// PTL JSONL file to score
    pub ptl_file: String,
    /// Reference translations, one sentence per line
    pub ref_file: String,
    /// Merge subword tokens ending in this marker before scoring
    #[arg(long)]
    pub subword_marker: Option<String>,
    /// Also write the report JSON to this path
    #[arg(long)]
    pub report: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Source sentences, one per line
    pub src_file: String,
    /// Model config JSON
    #[arg(long)]
    pub model: String,
    /// Policy: retranslate or stream
    #[arg(long)]
    pub policy: String,
    /// Bias weight toward the previous output (retranslate only)
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    /// Wait-k display offset
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    /// Beam width (retranslate only)
    #[arg(long, default_value_t = 1)]
    pub beam: usize,
    /// Output PTL JSONL path
    #[arg(long)]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Source side of the corpus, one sentence per line
    pub src_file: String,
    /// Target side of the corpus, one sentence per line
    pub tgt_file: String,
    /// Target length selection: proportional or aligned
    #[arg(long, default_value = "proportional")]
    pub mode: String,
    /// Mixing: stochastic or duplicate
    #[arg(long, default_value = "stochastic")]
    pub mix: String,
    /// Truncation probability for stochastic mixing
    #[arg(long, default_value_t = 0.5)]
    pub prob: f64,
    /// RNG seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pharaoh alignment file (required for aligned mode)
    #[arg(long)]
    pub align: Option<String>,
    /// Test hook: truncate every pair at this source length, no mixing
    #[arg(long)]
    pub force_ls: Option<usize>,
    /// Output path for the augmented source side
    #[arg(long)]
    pub out_src: String,
    /// Output path for the augmented target side
    #[arg(long)]
    pub out_tgt: String,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Model config JSON
    #[arg(long)]
    pub model: String,
    /// Dev source sentences
    #[arg(long)]
    pub dev_src: String,
    /// Dev references
    #[arg(long)]
    pub dev_ref: String,
    /// Test source sentences
    #[arg(long)]
    pub test_src: String,
    /// Test references
    #[arg(long)]
    pub test_ref: String,
    /// Grid spec "betas=0,0.2;ks=1,2,4;beams=1" (default: built-in grid)
    #[arg(long)]
    pub grid: Option<String>,
    /// Output CSV path
    #[arg(long)]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct FrontierArgs {
    /// Sweep CSV produced by the sweep command
    #[arg(long)]
    pub sweep: String,
    /// Keep only configs with dev NE strictly below this ("inf" allowed)
    #[arg(long, default_value_t = 0.2)]
    pub ne_threshold: f64,
    /// Output JSON path
    #[arg(long)]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct ScorerServeArgs {
    /// Model config JSON to serve
    #[arg(long)]
    pub model: String,
}

#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: i32,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            code: 1,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        Self {
            code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

fn model_code(e: &ModelError) -> i32 {
    match e {
        ModelError::Scorer(_) => 2,
        _ => 1,
    }
}

fn decode_code(e: &DecodeError) -> i32 {
    match e {
        DecodeError::Model(m) => model_code(m),
        _ => 1,
    }
}

fn simulate_code(e: &SimulateError) -> i32 {
    match e {
        SimulateError::Decode { source, .. } => decode_code(source),
        _ => 1,
    }
}

fn frontier_code(e: &FrontierError) -> i32 {
    match e {
        FrontierError::Simulate { source, .. } => simulate_code(source),
        _ => 1,
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        Self {
            code: model_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<SimulateError> for CliError {
    fn from(e: SimulateError) -> Self {
        Self {
            code: simulate_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<FrontierError> for CliError {
    fn from(e: FrontierError) -> Self {
        Self {
            code: frontier_code(&e),
            message: e.to_string(),
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Augment(args) => cmd_augment(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Frontier(args) => cmd_frontier(args),
        Command::ScorerServe(args) => cmd_scorer_serve(args),
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let mut records = read_ptl_jsonl(&args.ptl_file)?;
    let references = read_token_lines(&args.ref_file)?;
    if let Some(marker) = &args.subword_marker {
        if marker.is_empty() {
            return Err(CliError::validation("subword marker must be non-empty"));
        }
        records = records
            .into_iter()
            .map(|record| {
                let (ptl, warnings) = record.ptl.merged(marker);
                for (step, warning) in warnings {
                    let place = if step == 0 {
                        "source".to_string()
                    } else {
                        format!("output {step}")
                    };
                    eprintln!(
                        "warning: {}: {place}: trailing marker on {:?} dropped from merge",
                        record.id, warning.trailing_token
                    );
                }
                PtlRecord {
                    id: record.id,
                    ptl,
                }
            })
            .collect();
    }
    let report = evaluate_corpus(&records, &references)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let rendered = render_report(&report);
    print!("{rendered}");
    if let Some(report_path) = &args.report {
        write_text(report_path, &rendered)?;
        RunManifest::new("evaluate")
            .arg("ptl_file", &args.ptl_file)
            .arg("ref_file", &args.ref_file)
            .opt_arg("subword_marker", args.subword_marker.as_ref())
            .arg("report", report_path)
            .input(&args.ptl_file)?
            .input(&args.ref_file)?
            .write_for(report_path)?;
    }
    Ok(())
}

fn config_seed(config: &ModelConfig) -> Option<u64> {
    match config {
        ModelConfig::Seeded { seed, .. } => Some(*seed),
        _ => None,
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let policy: PolicyKind = args
        .policy
        .parse()
        .map_err(CliError::validation)?;
    let model_config = read_model_config(&args.model)?;
    let model = build_model(&model_config)?;
    let sources = read_source_lines(&args.src_file)?;
    let config = DecodeConfig {
        beta: args.beta,
        k: args.k,
        beam: args.beam,
        ..DecodeConfig::default()
    };
    config
        .validate()
        .map_err(|e| CliError::validation(e.to_string()))?;
    let mut records = Vec::with_capacity(sources.len());
    for (idx, source) in sources.iter().enumerate() {
        let run = run_policy(model.as_ref(), source, policy, &config)?;
        records.push(PtlRecord {
            id: format!("s{:04}", idx + 1),
            ptl: run.ptl,
        });
    }
    write_ptl_jsonl(&args.out, &records)?;
    RunManifest::new("simulate")
        .arg("src_file", &args.src_file)
        .arg("model", &args.model)
        .arg("policy", policy)
        .arg("beta", args.beta)
        .arg("k", args.k)
        .arg("beam", args.beam)
        .arg("out", &args.out)
        .opt_seed(config_seed(&model_config))
        .input(&args.src_file)?
        .input(&args.model)?
        .write_for(&args.out)?;
    eprintln!("wrote {} PTLs to {}", records.len(), args.out);
    Ok(())
}

fn cmd_augment(args: AugmentArgs) -> Result<(), CliError> {
    let mode = match args.mode.as_str() {
        "proportional" => AugmentMode::Proportional,
        "aligned" => AugmentMode::Aligned,
        other => {
            return Err(CliError::validation(format!(
                "unknown mode {other:?}, expected proportional or aligned"
            )))
        }
    };
    let mix = match args.mix.as_str() {
        "stochastic" => AugmentMix::Stochastic { p: args.prob },
        "duplicate" => AugmentMix::Duplicate,
        other => {
            return Err(CliError::validation(format!(
                "unknown mix {other:?}, expected stochastic or duplicate"
            )))
        }
    };
    let pairs = read_sentence_pairs(&args.src_file, &args.tgt_file)?;
    let alignments = args
        .align
        .as_ref()
        .map(|path| read_alignment_file(path))
        .transpose()?;
    let augmented = match args.force_ls {
        Some(0) => return Err(CliError::validation("--force-ls must be >= 1")),
        Some(ls) => force_truncate_corpus(&pairs, mode, alignments.as_deref(), ls),
        None => augment_corpus(
            &pairs,
            &AugmentConfig {
                mode,
                mix,
                seed: args.seed,
            },
            alignments.as_deref(),
        ),
    }
    .map_err(|e| CliError::validation(e.to_string()))?;
    let sources: Vec<_> = augmented.iter().map(|p| p.source().clone()).collect();
    let targets: Vec<_> = augmented.iter().map(|p| p.target().clone()).collect();
    write_token_lines(&args.out_src, &sources)?;
    write_token_lines(&args.out_tgt, &targets)?;
    let mut manifest = RunManifest::new("augment")
        .arg("src_file", &args.src_file)
        .arg("tgt_file", &args.tgt_file)
        .arg("mode", &args.mode)
        .arg("mix", &args.mix)
        .arg("seed", args.seed)
        .opt_arg("align", args.align.as_ref())
        .opt_arg("force_ls", args.force_ls)
        .arg("out_src", &args.out_src)
        .arg("out_tgt", &args.out_tgt)
        .seed(args.seed)
        .input(&args.src_file)?
        .input(&args.tgt_file)?;
    if matches!(mix, AugmentMix::Stochastic { .. }) {
        manifest = manifest.arg("prob", args.prob);
    }
    if let Some(align) = &args.align {
        manifest = manifest.input(align)?;
    }
    manifest.write_for(&args.out_src)?;
    manifest.write_for(&args.out_tgt)?;
    eprintln!(
        "wrote {} pairs to {} / {}",
        augmented.len(),
        args.out_src,
        args.out_tgt
    );
    Ok(())
}

fn parse_list<T: std::str::FromStr>(what: &str, list: &str) -> Result<Vec<T>, CliError> {
    let values: Result<Vec<T>, _> = list.split(',').map(|v| v.trim().parse::<T>()).collect();
    let values = values
        .map_err(|_| CliError::validation(format!("bad {what} list {list:?} in grid spec")))?;
    if values.is_empty() {
        return Err(CliError::validation(format!("empty {what} list in grid spec")));
    }
    Ok(values)
}

/// Parses "betas=0,0.2;ks=1,2,4;beams=1". Omitted axes fall back to the
/// default grid's values.
fn parse_grid(spec: &str) -> Result<Vec<GridConfig>, CliError> {
    let mut betas: Vec<f64> = vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
    let mut ks: Vec<usize> = vec![1, 2, 4, 6, 8, 10, 15, 20, 30];
    let mut beams: Vec<usize> = vec![1];
    for part in spec.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let Some((key, list)) = part.split_once('=') else {
            return Err(CliError::validation(format!(
                "bad grid spec part {part:?}, expected key=v1,v2,..."
            )));
        };
        match key.trim() {
            "betas" => betas = parse_list("beta", list)?,
            "ks" => ks = parse_list("k", list)?,
            "beams" => beams = parse_list("beam", list)?,
            other => {
                return Err(CliError::validation(format!(
                    "unknown grid axis {other:?}, expected betas, ks, or beams"
                )))
            }
        }
    }
    for beta in &betas {
        if !(0.0..=1.0).contains(beta) {
            return Err(CliError::validation(format!("beta {beta} outside [0, 1]")));
        }
    }
    if beams.contains(&0) {
        return Err(CliError::validation("beam must be >= 1"));
    }
    let mut grid = Vec::with_capacity(betas.len() * ks.len() * beams.len());
    for &beta in &betas {
        for &k in &ks {
            for &beam in &beams {
                grid.push(GridConfig { beta, k, beam });
            }
        }
    }
    Ok(grid)
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let model_config = read_model_config(&args.model)?;
    let model = build_model(&model_config)?;
    let dev = CorpusPair {
        sources: read_source_lines(&args.dev_src)?,
        references: read_token_lines(&args.dev_ref)?,
    };
    let test = CorpusPair {
        sources: read_source_lines(&args.test_src)?,
        references: read_token_lines(&args.test_ref)?,
    };
    let grid = match &args.grid {
        Some(spec) => parse_grid(spec)?,
        None => default_grid(),
    };
    let points = sweep(model.as_ref(), &dev, &test, &grid)?;
    write_text(&args.out, &render_sweep_csv(&points))?;
    RunManifest::new("sweep")
        .arg("model", &args.model)
        .arg("dev_src", &args.dev_src)
        .arg("dev_ref", &args.dev_ref)
        .arg("test_src", &args.test_src)
        .arg("test_ref", &args.test_ref)
        .arg("grid", args.grid.as_deref().unwrap_or("default"))
        .arg("out", &args.out)
        .opt_seed(config_seed(&model_config))
        .input(&args.model)?
        .input(&args.dev_src)?
        .input(&args.dev_ref)?
        .input(&args.test_src)?
        .input(&args.test_ref)?
        .write_for(&args.out)?;
    eprintln!("wrote {} sweep points to {}", points.len(), args.out);
    Ok(())
}

fn cmd_frontier(args: FrontierArgs) -> Result<(), CliError> {
    if args.ne_threshold.is_nan() {
        return Err(CliError::validation("--ne-threshold must not be NaN"));
    }
    let points = read_sweep_csv(&args.sweep)?;
    let dev_points: Vec<_> = points
        .iter()
        .filter(|p| p.split == Split::Dev)
        .cloned()
        .collect();
    let test_points: Vec<_> = points
        .iter()
        .filter(|p| p.split == Split::Test)
        .cloned()
        .collect();
    let candidates = filter_by_ne(&dev_points, args.ne_threshold);
    let frontier = pareto_frontier(&candidates);
    let curve = project(&frontier, &points)?;
    let stability = match ne_stability(&dev_points, &test_points) {
        Ok(value) => Some(value),
        Err(FrontierError::NoComparableConfigs) => None,
        Err(e) => return Err(e.into()),
    };
    write_text(&args.out, &render_frontier_json(&curve, stability))?;
    RunManifest::new("frontier")
        .arg("sweep", &args.sweep)
        .arg("ne_threshold", args.ne_threshold)
        .arg("out", &args.out)
        .input(&args.sweep)?
        .write_for(&args.out)?;
    match stability {
        Some(value) => println!("ne_stability {}", fixed6(value)),
        None => println!("ne_stability undefined (no comparable configs)"),
    }
    eprintln!(
        "frontier has {} of {} candidate dev points",
        curve.points.len(),
        candidates.len()
    );
    Ok(())
}

fn cmd_scorer_serve(args: ScorerServeArgs) -> Result<(), CliError> {
    let config = read_model_config(&args.model)?;
    let model = build_model(&config)?;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    serve_model(model.as_ref(), stdin.lock(), stdout.lock()).map_err(CliError::from)
}
