//! Dataset and configuration persistence: JSONL corpus files, the
//! training-variant format, an embedding cache with lookup-before-call
//! semantics, and the run configuration.
//!
//! Everything is line-oriented JSON so corpora stream without loading
//! whole files, and serialization is canonical (fixed field order,
//! round-trip-safe floats): identical data produces identical bytes.

use crate::annotation::{ErrorType, Sample, Span};
use crate::metrics::{EmbedError, Embedder};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataIoError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {detail}")]
    SchemaViolation { line: usize, detail: String },
    #[error(transparent)]
    Embedder(#[from] EmbedError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataIoError + '_ {
    move |source| DataIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One gold annotation in a corpus record. `replacement` is the
/// correction when the dataset provides one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordAnnotation {
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub error_type: ErrorType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// One corpus line: an image, a model description, a human reference, and
/// gold annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub id: String,
    pub image_ref: String,
    pub description: String,
    pub reference: String,
    pub annotations: Vec<RecordAnnotation>,
    pub split: Split,
}

impl CorpusRecord {
    /// Converts to the in-memory sample, recovering span text from the
    /// offsets and enforcing the sample invariants.
    pub fn to_sample(&self) -> Result<Sample, DataIoError> {
        let chars: Vec<char> = self.description.chars().collect();
        let spans = self
            .annotations
            .iter()
            .map(|a| {
                let text: String = chars
                    .get(a.start..a.end)
                    .map(|s| s.iter().collect())
                    .unwrap_or_default();
                Span::new(a.start, a.end, text, a.error_type)
            })
            .collect();
        Sample::new(&self.image_ref, &self.description, &self.reference, spans).map_err(|e| {
            DataIoError::SchemaViolation {
                line: 0,
                detail: format!("record {}: {e}", self.id),
            }
        })
    }
}

fn parse_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, DataIoError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: T = serde_json::from_str(&line).map_err(|e| DataIoError::SchemaViolation {
            line: idx + 1,
            detail: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

/// Atomic whole-file write: temp file in the same directory, then rename.
fn write_atomic(path: &Path, contents: &str) -> Result<(), DataIoError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(io_err(path))?;
    tmp.write_all(contents.as_bytes()).map_err(io_err(path))?;
    tmp.persist(path)
        .map_err(|e| io_err(path)(e.error))
        .map(|_| ())
}

fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn load_corpus(path: &Path) -> Result<Vec<CorpusRecord>, DataIoError> {
    parse_jsonl(path)
}

pub fn save_corpus(records: &[CorpusRecord], path: &Path) -> Result<(), DataIoError> {
    write_atomic(path, &to_jsonl(records))
}

/// One error-insertion line: the clean seed sentence, the references the
/// insertion model saw, and its tagged output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EiRecord {
    pub seed_text: String,
    #[serde(default)]
    pub refs: Vec<String>,
    pub modified_xml: String,
}

pub fn load_ei_corpus(path: &Path) -> Result<Vec<EiRecord>, DataIoError> {
    parse_jsonl(path)
}

pub fn save_ei_corpus(records: &[EiRecord], path: &Path) -> Result<(), DataIoError> {
    write_atomic(path, &to_jsonl(records))
}

/// One synthetic training example: the corrupted sentence, its tagged
/// target, which error ids survived pruning, and the seed that produced
/// it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantRecord {
    pub input_text: String,
    pub target_tagged: String,
    pub kept_ids: Vec<String>,
    pub seed: u64,
}

impl VariantRecord {
    pub fn from_variant(v: &crate::synthgraph::TrainingVariant, seed: u64) -> Self {
        VariantRecord {
            input_text: v.input_text.clone(),
            target_tagged: v.target_tagged.clone(),
            kept_ids: v.kept_ids.iter().cloned().collect(),
            seed,
        }
    }
}

pub fn load_variants(path: &Path) -> Result<Vec<VariantRecord>, DataIoError> {
    parse_jsonl(path)
}

pub fn save_variants(variants: &[VariantRecord], path: &Path) -> Result<(), DataIoError> {
    write_atomic(path, &to_jsonl(variants))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheLine {
    /// SHA-256 of the embedded text or image reference.
    key: String,
    dim: usize,
    values: Vec<f32>,
}

/// Persistent embedding store keyed by content hash. Lookups hit the
/// in-memory map first; misses call the embedder and remember the result
/// until `flush` writes the whole cache atomically.
#[derive(Debug, Default)]
pub struct EmbeddingCache {
    entries: HashMap<String, Vec<f32>>,
    /// Lines that failed to parse when loading, reported not silently lost.
    pub corrupted_lines: usize,
    dirty: bool,
}

impl EmbeddingCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads a cache file, skipping corrupted lines (their count is kept
    /// in `corrupted_lines`). A missing file is an empty cache.
    pub fn load(path: &Path) -> Result<Self, DataIoError> {
        let mut cache = Self::new();
        let file = match std::fs::File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(cache),
            Err(e) => return Err(io_err(path)(e)),
        };
        for line in std::io::BufReader::new(file).lines() {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<CacheLine>(&line) {
                Ok(entry) if entry.values.len() == entry.dim => {
                    cache.entries.insert(entry.key, entry.values);
                }
                _ => cache.corrupted_lines += 1,
            }
        }
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Returns the cached vector for `key` (a SHA-256 hex digest) or
    /// computes it by embedding `text`.
    pub fn get_or_compute(
        &mut self,
        key: &str,
        text: &str,
        embedder: &dyn Embedder,
    ) -> Result<Vec<f32>, DataIoError> {
        if let Some(hit) = self.entries.get(key) {
            return Ok(hit.clone());
        }
        let values = embedder.embed(text)?;
        self.entries.insert(key.to_string(), values.clone());
        self.dirty = true;
        Ok(values)
    }

    /// Writes the cache to disk atomically, sorted by key for canonical
    /// output.
    pub fn flush(&mut self, path: &Path) -> Result<(), DataIoError> {
        let mut keys: Vec<&String> = self.entries.keys().collect();
        keys.sort();
        let lines: Vec<CacheLine> = keys
            .into_iter()
            .map(|key| CacheLine {
                key: key.clone(),
                dim: self.entries[key].len(),
                values: self.entries[key].clone(),
            })
            .collect();
        write_atomic(path, &to_jsonl(&lines))?;
        self.dirty = false;
        Ok(())
    }
}

fn default_few_shot_n() -> usize {
    3
}
fn default_prune_p() -> f64 {
    0.5
}
fn default_rescale_w() -> f64 {
    2.5
}
fn default_parallelism() -> usize {
    4
}
fn default_true() -> bool {
    true
}

/// Run-wide configuration with the evaluated defaults: three few-shot
/// exemplars, pruning probability 0.5, score rescale 2.5.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<crate::backend::HttpBackendConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewer: Option<crate::backend::HttpBackendConfig>,
    #[serde(default = "default_few_shot_n")]
    pub few_shot_n: usize,
    #[serde(default = "default_prune_p")]
    pub prune_p: f64,
    #[serde(default = "default_rescale_w")]
    pub rescale_w: f64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub strict: bool,
    #[serde(default = "default_true")]
    pub use_image: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, DataIoError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|e| DataIoError::SchemaViolation {
                line: 1,
                detail: e.to_string(),
            })?;
        config.check()?;
        Ok(config)
    }

    /// Range checks on the numeric knobs.
    pub fn check(&self) -> Result<(), DataIoError> {
        let bad = |detail: String| DataIoError::SchemaViolation { line: 0, detail };
        if !(0.0..=1.0).contains(&self.prune_p) {
            return Err(bad(format!("prune_p {} outside [0, 1]", self.prune_p)));
        }
        if !self.rescale_w.is_finite() || self.rescale_w <= 0.0 {
            return Err(bad(format!("rescale_w {} must be positive", self.rescale_w)));
        }
        if self.parallelism == 0 {
            return Err(bad("parallelism must be at least 1".to_string()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::HashEmbedder;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn record(i: usize) -> CorpusRecord {
        CorpusRecord {
            id: format!("r{i}"),
            image_ref: format!("img://{i}"),
            description: format!("a blue cat number {i}"),
            reference: format!("a grey cat number {i}"),
            annotations: vec![RecordAnnotation {
                start: 2,
                end: 6,
                error_type: ErrorType::Attribute,
                replacement: Some("grey".to_string()),
            }],
            split: if i % 2 == 0 { Split::Train } else { Split::Test },
        }
    }

    #[test]
    fn corpus_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let records: Vec<CorpusRecord> = (0..50).map(record).collect();
        save_corpus(&records, &path).unwrap();
        assert_eq!(load_corpus(&path).unwrap(), records);
    }

    #[test]
    fn corpus_serialization_is_canonical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        let records: Vec<CorpusRecord> = (0..10).map(record).collect();
        save_corpus(&records, &a).unwrap();
        save_corpus(&records, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(load_corpus(&path).unwrap().is_empty());
    }

    #[test]
    fn missing_field_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let good = serde_json::to_string(&record(0)).unwrap();
        std::fs::write(&path, format!("{good}\n{{\"id\": \"r1\"}}\n")).unwrap();
        let err = load_corpus(&path).unwrap_err();
        let DataIoError::SchemaViolation { line, .. } = err else {
            panic!("expected schema violation, got {err:?}");
        };
        assert_eq!(line, 2);
    }

    #[test]
    fn record_to_sample_recovers_span_text() {
        let sample = record(0).to_sample().unwrap();
        assert_eq!(sample.annotations[0].text, "blue");
    }

    #[test]
    fn variant_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("variants.jsonl");
        let variants = vec![VariantRecord {
            input_text: "a dark sky".to_string(),
            target_tagged: "a <attribute>dark</attribute> sky".to_string(),
            kept_ids: vec!["E1".to_string()],
            seed: 7,
        }];
        save_variants(&variants, &path).unwrap();
        assert_eq!(load_variants(&path).unwrap(), variants);
    }

    struct CountingEmbedder {
        inner: HashEmbedder,
        calls: AtomicUsize,
    }

    impl Embedder for CountingEmbedder {
        fn name(&self) -> &str {
            "counting"
        }
        fn dim(&self) -> usize {
            self.inner.dim()
        }
        fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.inner.embed(text)
        }
    }

    #[test]
    fn cache_hits_bypass_embedder() {
        let embedder = CountingEmbedder {
            inner: HashEmbedder::default(),
            calls: AtomicUsize::new(0),
        };
        let mut cache = EmbeddingCache::new();
        let v1 = cache.get_or_compute("k1", "hello", &embedder).unwrap();
        let v2 = cache.get_or_compute("k1", "hello", &embedder).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(embedder.calls.load(Ordering::SeqCst), 1);

        cache.get_or_compute("k2", "world", &embedder).unwrap();
        assert_eq!(embedder.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn cache_flush_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let embedder = HashEmbedder::default();
        let mut cache = EmbeddingCache::new();
        let v = cache.get_or_compute("k1", "hello", &embedder).unwrap();
        cache.flush(&path).unwrap();

        let mut reloaded = EmbeddingCache::load(&path).unwrap();
        assert_eq!(reloaded.len(), 1);
        let again = reloaded
            .get_or_compute(
                "k1",
                "different text, same key",
                &HashEmbedder::new(8),
            )
            .unwrap();
        // The hit comes from the file, never the embedder.
        assert_eq!(again, v);
    }

    #[test]
    fn cache_skips_corrupted_lines_with_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let good = serde_json::to_string(&CacheLine {
            key: "k1".to_string(),
            dim: 2,
            values: vec![0.5, 0.5],
        })
        .unwrap();
        let wrong_dim = serde_json::to_string(&CacheLine {
            key: "k2".to_string(),
            dim: 3,
            values: vec![0.5],
        })
        .unwrap();
        std::fs::write(&path, format!("{good}\nnot json\n{wrong_dim}\n")).unwrap();
        let cache = EmbeddingCache::load(&path).unwrap();
        assert_eq!(cache.len(), 1);
        assert_eq!(cache.corrupted_lines, 2);
    }

    #[test]
    fn config_defaults() {
        let c = RunConfig::default();
        assert_eq!(c.few_shot_n, 3);
        assert_eq!(c.prune_p, 0.5);
        assert_eq!(c.rescale_w, 2.5);
        assert_eq!(c.parallelism, 4);
        assert!(!c.strict);
        c.check().unwrap();
    }

    #[test]
    fn config_rejects_bad_ranges() {
        let mut c = RunConfig::default();
        c.prune_p = 1.5;
        assert!(c.check().is_err());
        let mut c = RunConfig::default();
        c.parallelism = 0;
        assert!(c.check().is_err());
    }

    #[test]
    fn missing_cache_file_is_empty() {
        let cache = EmbeddingCache::load(Path::new("/nonexistent/cache.jsonl")).unwrap();
        assert!(cache.is_empty());
    }
}
