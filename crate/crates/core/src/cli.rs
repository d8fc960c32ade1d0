//! Command-line surface: `validate`, `augment`, `stats`, `evaluate`,
//! `pipeline`, and `convert`.
//!
//! Conventions shared by every command: stdout carries only data (JSON or
//! JSONL), diagnostics go to stderr, and `--output` redirects the data
//! stream to a file. Configuration precedence is flags, then `--config`
//! (or `$HALLEDIT_CONFIG`), then defaults. Exit codes: 0 success, 1
//! validation or metric-threshold failure, 2 usage error, 3 backend or
//! IO failure.

use crate::annotation::Span;
use crate::backend::{Backend, HttpBackend, ScriptedBackend};
use crate::data_io::{
    load_corpus, load_ei_corpus, save_corpus, CorpusRecord, RecordAnnotation, RunConfig, Split,
    VariantRecord,
};
use crate::metrics::{
    evaluate_corpus, EmbedderSlots, EvalItem, HashEmbedder, PredictedSpan, ScoreConfig,
};
use crate::pipeline::{run_corpus, FewShotBank, PipelineOptions};
use crate::synthgraph::{build_dag, graph_stats, parse_error_xml, prune, realize_variant};
use crate::tagger::{parse_tagged, render_tagged};
use crate::validator::{validate_sample, validate_with, Severity, ValidateOptions};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED_CHECK: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "halledit",
    about = "Hallucination span tagging, augmentation, validation, and evaluation",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// RNG seed for anything stochastic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON run configuration (defaults to $HALLEDIT_CONFIG when set).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the data stream here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lint an error-insertion corpus against the rule registry.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Corpus of {seed_text, refs, modified_xml} lines.
        #[arg(long)]
        input: PathBuf,
        /// Treat id-sequence gaps as errors instead of warnings.
        #[arg(long)]
        strict: bool,
    },
    /// Expand each error graph into pruned training variants.
    Augment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Per-node removal probability.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 1)]
        variants_per_graph: usize,
    },
    /// Structural statistics of an error-insertion corpus.
    Stats {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
    /// Score a prediction corpus against gold annotations.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Dimension of the deterministic test embedder.
        #[arg(long, default_value_t = 64)]
        embed_dim: usize,
        /// Fail (exit 1) when detection F1 falls below this.
        #[arg(long)]
        min_detection_f1: Option<f64>,
    },
    /// Run the detect-then-review pipeline over a corpus.
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Scripted detector responses ({prompt_sha256, response} lines).
        #[arg(long)]
        det_script: Option<PathBuf>,
        /// Scripted reviewer responses.
        #[arg(long)]
        rev_script: Option<PathBuf>,
        /// Do not forward image references to the backends.
        #[arg(long)]
        no_image: bool,
        #[arg(long)]
        parallelism: Option<usize>,
        /// Few-shot exemplars in the detector prompt.
        #[arg(long)]
        shots: Option<usize>,
    },
    /// Convert between the corpus schema and tagged-text lines.
    Convert {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        to: ConvertTarget,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConvertTarget {
    /// Corpus records -> {id, tagged} lines.
    Tagged,
    /// {id, tagged} lines -> corpus records.
    Corpus,
}

struct CmdError {
    code: u8,
    message: String,
}

impl CmdError {
    fn io(message: impl std::fmt::Display) -> Self {
        CmdError {
            code: EXIT_IO,
            message: message.to_string(),
        }
    }

    fn failed(message: impl std::fmt::Display) -> Self {
        CmdError {
            code: EXIT_FAILED_CHECK,
            message: message.to_string(),
        }
    }
}

/// Parses argv and runs the selected command, returning the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap distinguishes help/version (success) from usage errors.
            let code = if e.exit_code() == 0 { EXIT_OK } else { EXIT_USAGE };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(command: Command) -> Result<u8, CmdError> {
    match command {
        Command::Validate {
            common,
            input,
            strict,
        } => cmd_validate(&common, &input, strict),
        Command::Augment {
            common,
            input,
            p,
            variants_per_graph,
        } => cmd_augment(&common, &input, p, variants_per_graph),
        Command::Stats { common, input } => cmd_stats(&common, &input),
        Command::Evaluate {
            common,
            pred,
            gold,
            embed_dim,
            min_detection_f1,
        } => cmd_evaluate(&common, &pred, &gold, embed_dim, min_detection_f1),
        Command::Pipeline {
            common,
            input,
            det_script,
            rev_script,
            no_image,
            parallelism,
            shots,
        } => cmd_pipeline(
            &common,
            &input,
            det_script.as_deref(),
            rev_script.as_deref(),
            no_image,
            parallelism,
            shots,
        ),
        Command::Convert { common, input, to } => cmd_convert(&common, &input, to),
    }
}

fn load_config(common: &Common) -> Result<RunConfig, CmdError> {
    let path = common
        .config
        .clone()
        .or_else(|| std::env::var_os("HALLEDIT_CONFIG").map(PathBuf::from));
    match path {
        Some(path) => RunConfig::load(&path).map_err(CmdError::io),
        None => Ok(RunConfig::default()),
    }
}

fn emit(common: &Common, data: &str) -> Result<(), CmdError> {
    match &common.output {
        Some(path) => std::fs::write(path, data).map_err(CmdError::io),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(data.as_bytes()).map_err(CmdError::io)
        }
    }
}

/// One line of the violation report: the record index in the input file
/// plus the violation fields.
#[derive(Debug, Serialize, Deserialize)]
struct ViolationLine {
    record: usize,
    rule_id: crate::validator::RuleId,
    start: usize,
    end: usize,
    severity: Severity,
    message: String,
}

fn cmd_validate(common: &Common, input: &Path, strict: bool) -> Result<u8, CmdError> {
    let config = load_config(common)?;
    let options = ValidateOptions {
        strict: strict || config.strict,
    };
    let records = load_ei_corpus(input).map_err(CmdError::io)?;
    let mut report = String::new();
    let mut errors = 0usize;
    for (idx, record) in records.iter().enumerate() {
        for v in validate_with(&record.seed_text, &record.modified_xml, &options) {
            if v.severity == Severity::Error {
                errors += 1;
            }
            let line = ViolationLine {
                record: idx,
                rule_id: v.rule_id,
                start: v.start,
                end: v.end,
                severity: v.severity,
                message: v.message,
            };
            report.push_str(&serde_json::to_string(&line).expect("violation serializes"));
            report.push('\n');
        }
    }
    emit(common, &report)?;
    eprintln!(
        "validated {} record(s): {} error(s)",
        records.len(),
        errors
    );
    Ok(if errors == 0 { EXIT_OK } else { EXIT_FAILED_CHECK })
}

fn cmd_augment(
    common: &Common,
    input: &Path,
    p: Option<f64>,
    variants_per_graph: usize,
) -> Result<u8, CmdError> {
    let config = load_config(common)?;
    let p = p.unwrap_or(config.prune_p);
    if !(0.0..=1.0).contains(&p) {
        return Err(CmdError {
            code: EXIT_USAGE,
            message: format!("--p {p} outside [0, 1]"),
        });
    }
    let records = load_ei_corpus(input).map_err(CmdError::io)?;
    let mut out = String::new();
    let mut counter = 0u64;
    let mut skipped = 0usize;
    for (idx, record) in records.iter().enumerate() {
        let graph = match parse_error_xml(&record.modified_xml) {
            Ok(g) => g,
            Err(e) => {
                eprintln!("record {idx}: skipped (parse failure: {e})");
                skipped += 1;
                continue;
            }
        };
        let dag = build_dag(&graph);
        for _ in 0..variants_per_graph {
            let variant_seed = common.seed.wrapping_add(counter);
            counter += 1;
            let removed = prune(&dag, p, variant_seed).map_err(CmdError::failed)?;
            let kept = dag
                .nodes
                .iter()
                .map(|n| n.id.clone())
                .filter(|id| !removed.contains(id))
                .collect();
            let variant = realize_variant(&dag, &kept).map_err(CmdError::failed)?;
            let line = VariantRecord::from_variant(&variant, variant_seed);
            out.push_str(&serde_json::to_string(&line).expect("variant serializes"));
            out.push('\n');
        }
    }
    emit(common, &out)?;
    eprintln!(
        "augmented {} graph(s) x {} variant(s), {} skipped",
        records.len() - skipped,
        variants_per_graph,
        skipped
    );
    Ok(EXIT_OK)
}

fn cmd_stats(common: &Common, input: &Path) -> Result<u8, CmdError> {
    let records = load_ei_corpus(input).map_err(CmdError::io)?;
    let mut graphs = Vec::new();
    for (idx, record) in records.iter().enumerate() {
        match parse_error_xml(&record.modified_xml) {
            Ok(g) => graphs.push(g),
            Err(e) => eprintln!("record {idx}: skipped (parse failure: {e})"),
        }
    }
    let stats = graph_stats(&graphs);
    if graphs.is_empty() {
        eprintln!("empty corpus: no graphs to summarize");
    } else {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
        eprintln!("Total graphs:              {}", stats.total_graphs);
        eprintln!("Total nodes:               {}", stats.total_nodes);
        eprintln!("Avg. connected components: {}", fmt(stats.avg_components));
        eprintln!("Avg. nodes per graph:      {}", fmt(stats.avg_nodes));
        eprintln!("Avg. edges per graph:      {}", fmt(stats.avg_edges));
        eprintln!("Avg. degree:               {}", fmt(stats.avg_degree));
    }
    let mut json = serde_json::to_string_pretty(&stats).expect("stats serialize");
    json.push('\n');
    emit(common, &json)?;
    Ok(EXIT_OK)
}

fn cmd_evaluate(
    common: &Common,
    pred: &Path,
    gold: &Path,
    embed_dim: usize,
    min_detection_f1: Option<f64>,
) -> Result<u8, CmdError> {
    let config = load_config(common)?;
    let pred_records = load_corpus(pred).map_err(CmdError::io)?;
    let gold_records = load_corpus(gold).map_err(CmdError::io)?;
    let items = build_eval_items(&pred_records, &gold_records)?;
    let embedder = HashEmbedder::new(embed_dim.max(2));
    let slots = EmbedderSlots {
        text: &embedder,
        clip: &embedder,
        pac: None,
    };
    let cfg = ScoreConfig {
        rescale_w: config.rescale_w,
        ..ScoreConfig::default()
    };
    let report = evaluate_corpus(&items, &slots, &cfg).map_err(CmdError::failed)?;
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    emit(common, &json)?;
    if let Some(threshold) = min_detection_f1 {
        if report.detection.f1 < threshold {
            eprintln!(
                "detection F1 {:.4} below required {threshold}",
                report.detection.f1
            );
            return Ok(EXIT_FAILED_CHECK);
        }
    }
    Ok(EXIT_OK)
}

fn build_eval_items(
    pred_records: &[CorpusRecord],
    gold_records: &[CorpusRecord],
) -> Result<Vec<EvalItem>, CmdError> {
    let mut items = Vec::new();
    for gold in gold_records {
        let Some(pred) = pred_records.iter().find(|p| p.id == gold.id) else {
            return Err(CmdError::failed(format!(
                "prediction corpus has no record with id {:?}",
                gold.id
            )));
        };
        if pred.description != gold.description {
            return Err(CmdError::failed(format!(
                "record {:?}: prediction and gold descriptions differ",
                gold.id
            )));
        }
        let gold_sample = gold.to_sample().map_err(CmdError::failed)?;
        let pred_sample = pred.to_sample().map_err(CmdError::failed)?;
        for sample in [&gold_sample, &pred_sample] {
            let violations = validate_sample(sample);
            if !violations.is_empty() {
                return Err(CmdError::failed(format!(
                    "record {:?}: {}",
                    gold.id, violations[0].message
                )));
            }
        }
        let pred_spans = pred_sample
            .annotations
            .iter()
            .zip(&pred.annotations)
            .map(|(span, raw)| PredictedSpan {
                span: span.clone(),
                edit: raw.replacement.clone(),
            })
            .collect();
        items.push(EvalItem {
            candidate: gold.description.clone(),
            image_ref: gold.image_ref.clone(),
            references: vec![gold.reference.clone()],
            pred: pred_spans,
            gold: gold_sample.annotations,
        });
    }
    Ok(items)
}

/// One line of the pipeline output stream.
#[derive(Debug, Serialize, Deserialize)]
struct PipelineLine {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<crate::pipeline::PipelineOutput>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn cmd_pipeline(
    common: &Common,
    input: &Path,
    det_script: Option<&Path>,
    rev_script: Option<&Path>,
    no_image: bool,
    parallelism: Option<usize>,
    shots: Option<usize>,
) -> Result<u8, CmdError> {
    let config = load_config(common)?;
    let records = load_corpus(input).map_err(CmdError::io)?;
    let mut samples = Vec::new();
    for record in &records {
        samples.push(record.to_sample().map_err(CmdError::io)?);
    }

    let det = make_backend(det_script, config.detector.as_ref(), "detector")?;
    let rev = make_backend(rev_script, config.reviewer.as_ref(), "reviewer")?;
    let shots = shots.unwrap_or(config.few_shot_n);
    let bank = FewShotBank::builtin_with_shots(shots).map_err(|e| CmdError {
        code: EXIT_USAGE,
        message: e.to_string(),
    })?;
    let options = PipelineOptions {
        use_image: !no_image && config.use_image,
        ..PipelineOptions::default()
    };
    let parallelism = parallelism.unwrap_or(config.parallelism);

    let results = run_corpus(
        &samples,
        det.as_ref(),
        rev.as_ref(),
        &bank,
        &options,
        parallelism,
    );
    let mut out = String::new();
    let mut failures = 0usize;
    for (record, result) in records.iter().zip(results) {
        let line = match result {
            Ok(output) => PipelineLine {
                id: record.id.clone(),
                output: Some(output),
                error: None,
            },
            Err(e) => {
                failures += 1;
                eprintln!("sample {:?}: {e}", record.id);
                PipelineLine {
                    id: record.id.clone(),
                    output: None,
                    error: Some(e.to_string()),
                }
            }
        };
        out.push_str(&serde_json::to_string(&line).expect("line serializes"));
        out.push('\n');
    }
    emit(common, &out)?;
    eprintln!(
        "pipeline: {} succeeded, {} failed",
        records.len() - failures,
        failures
    );
    Ok(if failures == 0 { EXIT_OK } else { EXIT_IO })
}

fn make_backend(
    script: Option<&Path>,
    http: Option<&crate::backend::HttpBackendConfig>,
    role: &str,
) -> Result<Box<dyn Backend>, CmdError> {
    match (script, http) {
        (Some(path), _) => Ok(Box::new(
            ScriptedBackend::from_jsonl(path).map_err(CmdError::io)?,
        )),
        (None, Some(config)) => Ok(Box::new(
            HttpBackend::new(config.clone()).map_err(CmdError::io)?,
        )),
        (None, None) => {
            let flag = if role == "detector" { "--det-script" } else { "--rev-script" };
            Err(CmdError {
                code: EXIT_USAGE,
                message: format!("no {role} backend: pass {flag} or configure an endpoint"),
            })
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TaggedLine {
    id: String,
    tagged: String,
}

fn cmd_convert(common: &Common, input: &Path, to: ConvertTarget) -> Result<u8, CmdError> {
    match to {
        ConvertTarget::Tagged => {
            let records = load_corpus(input).map_err(CmdError::io)?;
            let mut out = String::new();
            for record in &records {
                let sample = record.to_sample().map_err(CmdError::failed)?;
                let annotated = crate::tagger::AnnotatedText::new(
                    sample.description.clone(),
                    sample.annotations.clone(),
                )
                .map_err(CmdError::failed)?;
                let line = TaggedLine {
                    id: record.id.clone(),
                    tagged: render_tagged(&annotated),
                };
                out.push_str(&serde_json::to_string(&line).expect("line serializes"));
                out.push('\n');
            }
            emit(common, &out)?;
        }
        ConvertTarget::Corpus => {
            let text = std::fs::read_to_string(input).map_err(CmdError::io)?;
            let mut records = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let tagged: TaggedLine = serde_json::from_str(line)
                    .map_err(|e| CmdError::io(format!("line {}: {e}", idx + 1)))?;
                let parsed = parse_tagged(&tagged.tagged)
                    .map_err(|e| CmdError::failed(format!("line {}: {e}", idx + 1)))?;
                records.push(CorpusRecord {
                    id: tagged.id,
                    image_ref: String::new(),
                    description: parsed.text.clone(),
                    reference: String::new(),
                    annotations: parsed
                        .spans
                        .iter()
                        .map(|s: &Span| RecordAnnotation {
                            start: s.start,
                            end: s.end,
                            error_type: s.error_type,
                            replacement: None,
                        })
                        .collect(),
                    split: Split::Test,
                });
            }
            match &common.output {
                Some(path) => save_corpus(&records, path).map_err(CmdError::io)?,
                None => {
                    let mut out = String::new();
                    for record in &records {
                        out.push_str(&serde_json::to_string(record).expect("record serializes"));
                        out.push('\n');
                    }
                    emit(common, &out)?;
                }
            }
        }
    }
    Ok(EXIT_OK)
}
