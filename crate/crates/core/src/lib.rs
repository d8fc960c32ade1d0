//! Fine-grained hallucination span tooling for image-description models:
//! a tagged-span codec, graph-based synthetic error augmentation, a
//! rule-based annotation linter, span- and sentence-level evaluation
//! metrics, and a two-stage detector/reviewer pipeline over pluggable
//! text-generation backends.
//!
//! See the `examples/` directory for one runnable example per capability
//! and the `halledit` binary for the command-line surface.

pub mod annotation;
pub mod backend;
pub mod cli;
pub mod data_io;
pub mod metrics;
pub mod pipeline;
pub mod synthgraph;
pub mod tagger;
pub mod validator;

pub use annotation::{error_type_from_tag, error_type_to_tag, ErrorType, Sample, Span, TagStyle};
pub use backend::{Backend, BackendError, FnBackend, HttpBackend, HttpBackendConfig, ScriptedBackend};
pub use data_io::{
    load_corpus, save_corpus, CorpusRecord, DataIoError, EmbeddingCache, RecordAnnotation,
    RunConfig, Split, VariantRecord,
};
pub use metrics::{
    binary_detection_metrics, clip_s, detection_prf, harmonic_f1, paragraph_score, span_f1,
    BinaryMetrics, Embedder, EvalReport, HashEmbedder, MetricError, PredictedSpan, Prf, ScoreConfig,
};
pub use pipeline::{
    build_detector_prompt, build_reviewer_prompt, parse_detector_output, parse_reviewer_output,
    run_corpus, run_pipeline, DetectedSpan, FewShotBank, ParsePolicy, PipelineOptions,
    PipelineOutput,
};
pub use tagger::{
    apply_edits, insert_tag, parse_tagged, render_tagged, strip_tags, AnnotatedText, TaggedText,
};
pub use validator::{
    semantic_check, validate, validate_sample, validate_with, RuleId, Severity, ValidateOptions,
    Violation,
};
