//! Two-stage detect-then-review orchestration.
//!
//! The detector backend reads the description plus a human reference and
//! names hallucinated words with their error types. Each detected span is
//! then re-inserted into the description as a single tagged segment and
//! shown to the reviewer backend, which either corrects the word or
//! confirms it. Confirmed spans are dropped; corrections are merged into
//! one final tagged string whose reverted form reproduces the input
//! character-for-character.

use crate::annotation::{Edit, ErrorType, Sample, Span};
use crate::backend::{sha256_hex, Backend, BackendError};
use crate::tagger::{apply_edits, insert_tag, AnnotatedText, TaggedText};
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

/// One word (or phrase) the detector flagged, before it is located in the
/// description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectedSpan {
    pub text: String,
    pub error_type: ErrorType,
}

/// A few-shot exemplar for the detector prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    /// Short heading shown above the exemplar (usually the error type).
    pub label: String,
    pub original: String,
    pub reference: String,
    pub output: String,
}

/// Ordered exemplar pool plus how many shots to use per prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FewShotBank {
    exemplars: Vec<Exemplar>,
    n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("requested {requested} shots but the bank holds {available}")]
pub struct BankTooSmall {
    pub requested: usize,
    pub available: usize,
}

impl FewShotBank {
    pub fn new(exemplars: Vec<Exemplar>, n: usize) -> Result<Self, BankTooSmall> {
        if n > exemplars.len() {
            return Err(BankTooSmall {
                requested: n,
                available: exemplars.len(),
            });
        }
        Ok(FewShotBank { exemplars, n })
    }

    /// The six builtin exemplars (one per error type), with the default
    /// three shots.
    pub fn builtin() -> Self {
        Self::builtin_with_shots(3).expect("builtin bank holds six exemplars")
    }

    pub fn builtin_with_shots(n: usize) -> Result<Self, BankTooSmall> {
        let mk = |label: &str, original: &str, reference: &str, output: &str| Exemplar {
            label: label.to_string(),
            original: original.to_string(),
            reference: reference.to_string(),
            output: output.to_string(),
        };
        Self::new(
            vec![
                mk(
                    "number",
                    "\"There are three cats.\"",
                    "\"Two cats are on the sofa.\"",
                    "three, number",
                ),
                mk(
                    "spatial_relation",
                    "\"An apple on the table.\"",
                    "\"An apple is under the table.\"",
                    "on, spatial_relation",
                ),
                mk(
                    "attribute",
                    "\"Red sky over the mountains.\"",
                    "\"Blue sky over the mountains.\"",
                    "Red, attribute",
                ),
                mk(
                    "object",
                    "\"There is a chair on the table.\"",
                    "\"There is a book on the table.\"",
                    "chair, object",
                ),
                mk(
                    "named_entities_fact",
                    "\"The image shows the John F. Kennedy Center.\"",
                    "\"The image shows the White House.\"",
                    "John F. Kennedy Center, named_entities_fact",
                ),
                mk(
                    "text",
                    "\"A sign says 'Restaurant'.\"",
                    "\"A sign says 'Hotel'.\"",
                    "Restaurant, text",
                ),
            ],
            n,
        )
    }

    pub fn shots(&self) -> &[Exemplar] {
        &self.exemplars[..self.n]
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

const DETECTOR_HEADER: &str = "You are given an image, a generated caption (Original), and a human reference caption (Reference).
Your task is to detect any single word in the Original that is NOT supported by the image
(hallucinations) and label each of them with exactly one tag from:

  - object              - wrong or missing object
  - spatial_relation    - wrong spatial or positional term
  - attribute           - wrong adjective or adverb
  - number              - wrong quantity
  - text                - incorrect visible text
  - named_entities_fact - incorrect named entity

Return ONLY a comma-and-slash separated list of \"word, tag\" pairs, e.g.
  three, number / apples, object
If no hallucinations exist, return exactly:
  none
";

const DETECTOR_FOOTER: &str = "------------  NOW PROCESS THIS SAMPLE  ------------

Original:
{original}

Reference:
{reference}

Output:
";

/// Builds the detector prompt with the bank's first `n` exemplars. With
/// zero shots the exemplar block is omitted entirely.
pub fn build_detector_prompt(s: &Sample, bank: &FewShotBank) -> String {
    let mut prompt = String::from(DETECTOR_HEADER);
    if bank.n() > 0 {
        prompt.push_str("\n----------------  FEW-SHOT EXAMPLES  ----------------\n");
        for (k, ex) in bank.shots().iter().enumerate() {
            prompt.push_str(&format!(
                "\n# {}. {}\nOriginal : {}\nReference: {}\nOutput   : {}\n",
                k + 1,
                ex.label,
                ex.original,
                ex.reference,
                ex.output
            ));
        }
    }
    prompt.push('\n');
    prompt.push_str(
        &DETECTOR_FOOTER
            .replace("{original}", &s.description)
            .replace("{reference}", &s.reference),
    );
    prompt
}

const REVIEWER_TEMPLATE: &str = "You are given an image, the same reference caption, and an \"Original\" caption
in which candidate hallucination words have been wrapped with XML tags:

  <object> ... </object>
  <spatial_relation> ... </spatial_relation>
  <attribute> ... </attribute>
  <number> ... </number>
  <text> ... </text>
  <named_entities_fact> ... </named_entities_fact>

For EACH tagged word decide:
  - If it must be corrected, return the corrected word.
  - If it is already correct, return the original word unchanged.

Return ONLY a result \"tagged_segment: replacement\", e.g.
  <object>chair</object>: book

----------------  FEW-SHOT EXAMPLES  ----------------

# 1. number: wrong quantity
Original : There are <number>three</number> cats.
Reference: Two cats are on the sofa.
Output   : <number>three</number>: two

# 2. spatial_relation: wrong spatial or positional term
Original : An apple <spatial_relation>on</spatial_relation> the table.
Reference: An apple is under the table.
Output   : <spatial_relation>on</spatial_relation>: under

# 3. attribute: wrong adjective or adverb
Original : <attribute>Red</attribute> sky over the mountains.
Reference: Blue sky over the mountains.
Output   : <attribute>Red</attribute>: Blue

# 4. object: wrong object
Original : There is a <object>chair</object> on the table.
Reference: There is a book on the table.
Output   : <object>chair</object>: book

# 5. named_entities_fact: incorrect named entity
Original : The image shows the <named_entities_fact>John F. Kennedy Center</named_entities_fact>.
Reference: The image shows the White House.
Output   : <named_entities_fact>John F. Kennedy Center</named_entities_fact>: White House

# 6. text: incorrect visible text
Original : A sign says <text>'Restaurant'</text>.
Reference: A sign says 'Hotel'.
Output   : <text>'Restaurant'</text>: 'Hotel'

------------  NOW PROCESS THIS SAMPLE  ------------

Original:
{original}

Reference:
{reference}

Instructions:
- Only look at segments already wrapped in XML tags in the Original (`<object>...</object>`, `<spatial_relation>...</spatial_relation>`, etc.).
- Do **not** add any new tags.
- Decide for **each** existing tag whether it needs correction, but then choose **only one** tagged segment to report (the first or most obvious error).
- Output **exactly one** line in the form:
  `<tag>word</tag>: corrected_word`
- and nothing else.
";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("reviewer input must contain exactly one tagged segment, found {0}")]
    MultiTagInput(usize),
}

/// Builds the reviewer prompt for a description carrying exactly one tag.
pub fn build_reviewer_prompt(z: &TaggedText, reference: &str) -> Result<String, PromptError> {
    if z.parsed.spans.len() != 1 {
        return Err(PromptError::MultiTagInput(z.parsed.spans.len()));
    }
    Ok(REVIEWER_TEMPLATE
        .replace("{original}", &z.raw)
        .replace("{reference}", reference))
}

/// How output-grammar violations are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParsePolicy {
    /// Skip unparseable items, keeping them as warnings.
    #[default]
    Lenient,
    /// Abort on the first unparseable item.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum GrammarError {
    /// A "word, tag" item that could not be parsed. `position` is the
    /// char offset of the fragment in the raw detector output.
    #[error("unparseable detector item at char {position}: {fragment:?} ({detail})")]
    UnparseableItem {
        position: usize,
        fragment: String,
        detail: String,
    },
    /// A reviewer line that is not `<tag>word</tag>: replacement`.
    #[error("malformed reviewer line at char {position}: {detail}")]
    MalformedReviewerLine { position: usize, detail: String },
}

/// Parsed detector output: located items plus anything skipped under the
/// lenient policy.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DetectorParse {
    pub spans: Vec<DetectedSpan>,
    pub skipped: Vec<GrammarError>,
}

/// Parses the `word, tag / word, tag` detector grammar. Splitting on the
/// last comma keeps commas inside the word ("John F. Kennedy Center").
/// The literal `none` (trimmed, any case) means no hallucinations.
pub fn parse_detector_output(raw: &str, policy: ParsePolicy) -> Result<DetectorParse, GrammarError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() || trimmed.eq_ignore_ascii_case("none") {
        return Ok(DetectorParse::default());
    }
    let mut out = DetectorParse::default();
    let mut position = 0usize; // char offset of the current fragment
    for fragment in raw.split('/') {
        let fragment_chars = fragment.chars().count();
        let item = fragment.trim();
        let item_position = position + fragment.chars().take_while(|c| c.is_whitespace()).count();
        position += fragment_chars + 1; // account for the '/' separator
        if item.is_empty() {
            continue;
        }
        let error = |detail: &str| GrammarError::UnparseableItem {
            position: item_position,
            fragment: item.to_string(),
            detail: detail.to_string(),
        };
        let parsed = match item.rfind(',') {
            None => Err(error("missing \", tag\" separator")),
            Some(comma) => {
                let text = item[..comma].trim();
                let tag = item[comma + 1..].trim();
                if text.is_empty() {
                    Err(error("empty word before the tag"))
                } else {
                    match crate::annotation::error_type_from_tag(tag) {
                        Ok(error_type) => Ok(DetectedSpan {
                            text: text.to_string(),
                            error_type,
                        }),
                        Err(_) => Err(error(&format!("unknown tag {tag:?}"))),
                    }
                }
            }
        };
        match (parsed, policy) {
            (Ok(span), _) => out.spans.push(span),
            (Err(e), ParsePolicy::Strict) => return Err(e),
            (Err(e), ParsePolicy::Lenient) => out.skipped.push(e),
        }
    }
    Ok(out)
}

/// Parses the reviewer's `<tag>word</tag>: replacement` line.
pub fn parse_reviewer_output(raw: &str) -> Result<(TaggedText, String), GrammarError> {
    let trimmed = raw.trim();
    let offset = raw.chars().count() - raw.trim_start().chars().count();
    let err = |position: usize, detail: &str| GrammarError::MalformedReviewerLine {
        position,
        detail: detail.to_string(),
    };
    let close_end = trimmed
        .find("</")
        .and_then(|i| trimmed[i..].find('>').map(|j| i + j + 1))
        .ok_or_else(|| err(offset, "no closing tag found"))?;
    let segment = &trimmed[..close_end];
    let tagged = TaggedText::parse(segment).map_err(|e| {
        err(
            offset + e.position,
            &format!("tagged segment does not parse: {e}"),
        )
    })?;
    if tagged.parsed.spans.len() != 1 {
        return Err(err(offset, "segment must contain exactly one tag"));
    }
    let rest = trimmed[close_end..].trim_start();
    let Some(replacement) = rest.strip_prefix(':') else {
        let position = offset + trimmed[..close_end].chars().count();
        return Err(err(position, "expected \": replacement\" after the closing tag"));
    };
    let replacement = replacement.trim();
    if replacement.is_empty() {
        return Err(err(
            offset + trimmed.chars().count(),
            "empty replacement after the colon",
        ));
    }
    Ok((tagged, replacement.to_string()))
}

/// Which pipeline stage an error or trace entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Detector,
    Reviewer,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::Detector => write!(f, "detector"),
            Stage::Reviewer => write!(f, "reviewer"),
        }
    }
}

/// One backend exchange plus how its output was interpreted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub stage: Stage,
    pub prompt_sha256: String,
    pub response: String,
    /// Human-readable outcome: parse summary, drop reason, retry note.
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StageFailureKind {
    #[error(transparent)]
    Backend(BackendError),
    #[error(transparent)]
    Grammar(GrammarError),
}

/// A failed run; the trace keeps everything that happened before.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{stage} stage failed: {cause}")]
pub struct PipelineFailure {
    pub stage: Stage,
    pub cause: StageFailureKind,
    pub trace: Vec<TraceEntry>,
}

/// Final result for one sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineOutput {
    /// Hallucinated spans located in the description, in text order.
    pub spans: Vec<Span>,
    /// One correction per span, in the same order.
    pub edits: Vec<Edit>,
    /// Description with each hallucinated word swapped for its correction
    /// inside a tag; everything else byte-identical to the input.
    pub final_tagged: String,
    pub trace: Vec<TraceEntry>,
    /// Detector items that could not be used (unparseable, absent from
    /// the description, or overlapping an earlier span).
    pub warnings: Vec<String>,
}

/// Tuning knobs for a run; the defaults match the evaluated setup.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    /// Forward the sample's image reference to the backends.
    pub use_image: bool,
    /// Show the reference caption to the reviewer (it always goes to the
    /// detector).
    pub reviewer_sees_reference: bool,
    pub parse_policy: ParsePolicy,
    /// Extra attempts after a transport failure. Grammar violations are
    /// never retried: re-asking after a bad parse would bias evaluation.
    pub transport_retries: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            use_image: true,
            reviewer_sees_reference: true,
            parse_policy: ParsePolicy::Lenient,
            transport_retries: 2,
        }
    }
}

fn call_with_retries(
    backend: &dyn Backend,
    prompt: &str,
    image_ref: Option<&str>,
    retries: usize,
) -> Result<String, BackendError> {
    let mut attempt = 0;
    loop {
        match backend.complete(prompt, image_ref) {
            Ok(text) => return Ok(text),
            Err(e @ BackendError::Transport { .. }) if attempt < retries => {
                attempt += 1;
                let _ = e;
            }
            Err(e) => return Err(e),
        }
    }
}

fn words_equal(a: &str, b: &str) -> bool {
    let norm = |s: &str| {
        s.split_whitespace()
            .map(|w| w.to_lowercase())
            .collect::<Vec<_>>()
    };
    norm(a) == norm(b)
}

/// Runs detect-then-review over one sample.
pub fn run_pipeline(
    s: &Sample,
    det: &dyn Backend,
    rev: &dyn Backend,
    bank: &FewShotBank,
    options: &PipelineOptions,
) -> Result<PipelineOutput, PipelineFailure> {
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let image = options.use_image.then_some(s.image_ref.as_str());

    let det_prompt = build_detector_prompt(s, bank);
    let det_raw = call_with_retries(det, &det_prompt, image, options.transport_retries).map_err(
        |cause| PipelineFailure {
            stage: Stage::Detector,
            cause: StageFailureKind::Backend(cause),
            trace: trace.clone(),
        },
    )?;
    let parsed = parse_detector_output(&det_raw, options.parse_policy).map_err(|cause| {
        PipelineFailure {
            stage: Stage::Detector,
            cause: StageFailureKind::Grammar(cause),
            trace: vec![TraceEntry {
                stage: Stage::Detector,
                prompt_sha256: sha256_hex(&det_prompt),
                response: det_raw.clone(),
                note: "unparseable under the strict policy".to_string(),
            }],
        }
    })?;
    trace.push(TraceEntry {
        stage: Stage::Detector,
        prompt_sha256: sha256_hex(&det_prompt),
        response: det_raw.clone(),
        note: format!(
            "{} span(s) detected, {} item(s) skipped",
            parsed.spans.len(),
            parsed.skipped.len()
        ),
    });
    for skipped in &parsed.skipped {
        warnings.push(format!("detector: {skipped}"));
    }

    // Locate each detected span; items not present as whole words in the
    // description are dropped, as are spans overlapping an earlier one.
    let mut located: Vec<(Span, TaggedText)> = Vec::new();
    for detected in &parsed.spans {
        match insert_tag(&s.description, &detected.text, detected.error_type, 1) {
            Ok(z) => {
                let span = z.parsed.spans[0].clone();
                let overlaps = located
                    .iter()
                    .any(|(prior, _)| span.start < prior.end && prior.start < span.end);
                if overlaps {
                    warnings.push(format!(
                        "detector: {:?} overlaps an earlier span; keeping the earlier one",
                        detected.text
                    ));
                } else {
                    located.push((span, z));
                }
            }
            Err(e) => warnings.push(format!("detector: dropped {:?}: {e}", detected.text)),
        }
    }
    located.sort_by_key(|(span, _)| span.start);

    let reference = if options.reviewer_sees_reference {
        s.reference.as_str()
    } else {
        ""
    };
    let mut spans = Vec::new();
    let mut edits = Vec::new();
    for (span, z) in &located {
        let prompt = build_reviewer_prompt(z, reference).expect("z carries exactly one tag");
        let raw = call_with_retries(rev, &prompt, image, options.transport_retries).map_err(
            |cause| PipelineFailure {
                stage: Stage::Reviewer,
                cause: StageFailureKind::Backend(cause),
                trace: trace.clone(),
            },
        )?;
        let prompt_sha256 = sha256_hex(&prompt);
        match parse_reviewer_output(&raw) {
            Ok((_segment, replacement)) => {
                if words_equal(&replacement, &span.text) {
                    trace.push(TraceEntry {
                        stage: Stage::Reviewer,
                        prompt_sha256,
                        response: raw,
                        note: format!("confirmed {:?}; span dropped", span.text),
                    });
                } else {
                    trace.push(TraceEntry {
                        stage: Stage::Reviewer,
                        prompt_sha256,
                        response: raw,
                        note: format!("corrected {:?} -> {:?}", span.text, replacement),
                    });
                    let edit = Edit::new(span.clone(), replacement)
                        .expect("non-echo replacement is a valid edit");
                    spans.push(span.clone());
                    edits.push(edit);
                }
            }
            Err(e) => {
                // Stage isolation: a malformed reviewer line only loses
                // this one span.
                trace.push(TraceEntry {
                    stage: Stage::Reviewer,
                    prompt_sha256,
                    response: raw,
                    note: format!("malformed line; span {:?} dropped", span.text),
                });
                warnings.push(format!("reviewer: {e}"));
                if options.parse_policy == ParsePolicy::Strict {
                    return Err(PipelineFailure {
                        stage: Stage::Reviewer,
                        cause: StageFailureKind::Grammar(e),
                        trace,
                    });
                }
            }
        }
    }

    let annotated =
        AnnotatedText::new(s.description.clone(), spans.clone()).expect("located spans are valid");
    let edited = apply_edits(&annotated, &edits).expect("edits target the located spans");
    debug_assert_eq!(edited.reverted(), s.description);

    Ok(PipelineOutput {
        spans,
        edits,
        final_tagged: edited.tagged.raw.clone(),
        trace,
        warnings,
    })
}

/// Runs the pipeline over a corpus with a bounded worker pool. Results
/// come back in input order regardless of completion order, and one
/// sample's failure never stops the rest.
pub fn run_corpus(
    samples: &[Sample],
    det: &dyn Backend,
    rev: &dyn Backend,
    bank: &FewShotBank,
    options: &PipelineOptions,
    parallelism: usize,
) -> Vec<Result<PipelineOutput, PipelineFailure>> {
    let parallelism = parallelism.max(1).min(samples.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<PipelineOutput, PipelineFailure>>>> =
        Mutex::new((0..samples.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..parallelism {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= samples.len() {
                    break;
                }
                let result = run_pipeline(&samples[i], det, rev, bank, options);
                results.lock().expect("results lock")[i] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|slot| slot.expect("every sample processed"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{FnBackend, ScriptedBackend};

    fn sample(description: &str, reference: &str) -> Sample {
        Sample::new("img://1", description, reference, Vec::new()).unwrap()
    }

    #[test]
    fn detector_prompt_exemplar_count() {
        let s = sample("three cats", "Two cats.");
        let zero = build_detector_prompt(&s, &FewShotBank::builtin_with_shots(0).unwrap());
        assert!(!zero.contains("FEW-SHOT EXAMPLES"));
        assert!(zero.contains("three cats"));
        assert!(zero.contains("Two cats."));

        let three = build_detector_prompt(&s, &FewShotBank::builtin());
        assert_eq!(three.matches("Output   :").count(), 3);
        assert!(three.contains("# 1. number"));
        assert!(three.contains("# 3. attribute"));
        assert!(!three.contains("# 4. object"));
    }

    #[test]
    fn detector_prompt_stable() {
        let s = sample("a dog", "a cat");
        let bank = FewShotBank::builtin();
        assert_eq!(
            sha256_hex(&build_detector_prompt(&s, &bank)),
            sha256_hex(&build_detector_prompt(&s, &bank))
        );
    }

    #[test]
    fn bank_rejects_oversized_n() {
        assert!(FewShotBank::builtin_with_shots(7).is_err());
        assert!(FewShotBank::new(Vec::new(), 1).is_err());
    }

    #[test]
    fn parse_detector_pairs() {
        let parsed = parse_detector_output("three, number / apples, object", ParsePolicy::Strict)
            .unwrap();
        assert_eq!(
            parsed.spans,
            vec![
                DetectedSpan {
                    text: "three".to_string(),
                    error_type: ErrorType::Number
                },
                DetectedSpan {
                    text: "apples".to_string(),
                    error_type: ErrorType::Object
                },
            ]
        );
        assert!(parsed.skipped.is_empty());
    }

    #[test]
    fn parse_detector_none_and_case() {
        for raw in ["none", "None", "  NONE \n", ""] {
            assert_eq!(
                parse_detector_output(raw, ParsePolicy::Strict).unwrap(),
                DetectorParse::default()
            );
        }
    }

    #[test]
    fn parse_detector_last_comma_split() {
        let parsed =
            parse_detector_output("John F. Kennedy Center, named_entities_fact", ParsePolicy::Strict)
                .unwrap();
        assert_eq!(
            parsed.spans,
            vec![DetectedSpan {
                text: "John F. Kennedy Center".to_string(),
                error_type: ErrorType::Fact
            }]
        );
    }

    #[test]
    fn parse_detector_policy_split() {
        let raw = "three, number / nonsense item / apples, object";
        let lenient = parse_detector_output(raw, ParsePolicy::Lenient).unwrap();
        assert_eq!(lenient.spans.len(), 2);
        assert_eq!(lenient.skipped.len(), 1);
        assert!(matches!(
            &lenient.skipped[0],
            GrammarError::UnparseableItem { fragment, .. } if fragment == "nonsense item"
        ));
        assert!(parse_detector_output(raw, ParsePolicy::Strict).is_err());
    }

    #[test]
    fn parse_detector_position_points_at_fragment() {
        let raw = "three, number / bad";
        let parsed = parse_detector_output(raw, ParsePolicy::Lenient).unwrap();
        let GrammarError::UnparseableItem { position, .. } = &parsed.skipped[0] else {
            panic!("expected unparseable item");
        };
        assert_eq!(*position, 16); // char offset of "bad"
    }

    #[test]
    fn reviewer_prompt_single_tag_contract() {
        let z = insert_tag("three cats", "three", ErrorType::Number, 1).unwrap();
        let prompt = build_reviewer_prompt(&z, "Two cats.").unwrap();
        assert!(prompt.contains(&z.raw));
        assert!(prompt.contains("Two cats."));

        let two = TaggedText::parse("<number>three</number> <object>cats</object>").unwrap();
        assert_eq!(
            build_reviewer_prompt(&two, "x"),
            Err(PromptError::MultiTagInput(2))
        );
    }

    #[test]
    fn parse_reviewer_line() {
        let (tagged, replacement) = parse_reviewer_output("<number>three</number>: two").unwrap();
        assert_eq!(tagged.parsed.spans[0].text, "three");
        assert_eq!(tagged.parsed.spans[0].error_type, ErrorType::Number);
        assert_eq!(replacement, "two");

        let (tagged, replacement) = parse_reviewer_output("<object>chair</object>: book").unwrap();
        assert_eq!(tagged.parsed.spans[0].error_type, ErrorType::Object);
        assert_eq!(replacement, "book");
    }

    #[test]
    fn parse_reviewer_rejects_missing_colon() {
        let err = parse_reviewer_output("<number>three</number> two").unwrap_err();
        assert!(matches!(err, GrammarError::MalformedReviewerLine { .. }));
    }

    #[test]
    fn parse_reviewer_multiword_replacement() {
        let (_t, replacement) = parse_reviewer_output(
            "<named_entities_fact>John F. Kennedy Center</named_entities_fact>: White House",
        )
        .unwrap();
        assert_eq!(replacement, "White House");
    }

    fn scripted_pair(s: &Sample, bank: &FewShotBank, det_out: &str) -> ScriptedBackend {
        let mut det = ScriptedBackend::new();
        det.script(&build_detector_prompt(s, bank), det_out);
        det
    }

    #[test]
    fn pipeline_none_case() {
        let s = sample("three cats", "Two cats.");
        let bank = FewShotBank::builtin();
        let det = scripted_pair(&s, &bank, "none");
        let rev = ScriptedBackend::new();
        let out = run_pipeline(&s, &det, &rev, &bank, &PipelineOptions::default()).unwrap();
        assert!(out.spans.is_empty());
        assert_eq!(out.final_tagged, "three cats");
    }

    #[test]
    fn pipeline_three_cats_exemplar() {
        let s = sample("three cats", "Two cats are on the sofa.");
        let bank = FewShotBank::builtin();
        let det = scripted_pair(&s, &bank, "three, number");
        let z = insert_tag("three cats", "three", ErrorType::Number, 1).unwrap();
        let rev_prompt = build_reviewer_prompt(&z, "Two cats are on the sofa.").unwrap();
        let mut rev = ScriptedBackend::new();
        rev.script(&rev_prompt, "<number>three</number>: two");
        let out = run_pipeline(&s, &det, &rev, &bank, &PipelineOptions::default()).unwrap();
        assert_eq!(out.final_tagged, "<number>two</number> cats");
        assert_eq!(out.spans.len(), 1);
        assert_eq!(out.edits[0].replacement, "two");
    }

    #[test]
    fn pipeline_reviewer_echo_drops_span() {
        let s = sample("three cats", "Three cats.");
        let bank = FewShotBank::builtin();
        let det = scripted_pair(&s, &bank, "three, number");
        let z = insert_tag("three cats", "three", ErrorType::Number, 1).unwrap();
        let rev_prompt = build_reviewer_prompt(&z, "Three cats.").unwrap();
        let mut rev = ScriptedBackend::new();
        rev.script(&rev_prompt, "<number>three</number>: three");
        let out = run_pipeline(&s, &det, &rev, &bank, &PipelineOptions::default()).unwrap();
        assert!(out.spans.is_empty());
        assert_eq!(out.final_tagged, "three cats");
        assert!(out.trace.iter().any(|t| t.note.contains("span dropped")));
    }

    #[test]
    fn pipeline_drops_absent_and_overlapping_spans() {
        let s = sample("three cats", "Two cats.");
        let bank = FewShotBank::builtin();
        // "dogs" is absent; the second "three" item overlaps the first.
        let det = scripted_pair(&s, &bank, "three, number / dogs, object / three, attribute");
        let z = insert_tag("three cats", "three", ErrorType::Number, 1).unwrap();
        let rev_prompt = build_reviewer_prompt(&z, "Two cats.").unwrap();
        let mut rev = ScriptedBackend::new();
        rev.script(&rev_prompt, "<number>three</number>: two");
        let out = run_pipeline(&s, &det, &rev, &bank, &PipelineOptions::default()).unwrap();
        assert_eq!(out.final_tagged, "<number>two</number> cats");
        assert_eq!(out.warnings.len(), 2);
    }

    #[test]
    fn pipeline_retries_transport_failures() {
        let s = sample("three cats", "Two cats.");
        let bank = FewShotBank::builtin();
        let attempts = AtomicUsize::new(0);
        let det = FnBackend::new("flaky", |_p, _i| {
            if attempts.fetch_add(1, Ordering::SeqCst) < 2 {
                Err(BackendError::Transport {
                    backend: "flaky".to_string(),
                    message: "connection reset".to_string(),
                })
            } else {
                Ok("none".to_string())
            }
        });
        let rev = ScriptedBackend::new();
        let out = run_pipeline(&s, &det, &rev, &bank, &PipelineOptions::default()).unwrap();
        assert!(out.spans.is_empty());
        assert_eq!(attempts.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn pipeline_detector_failure_is_reported() {
        let s = sample("three cats", "Two cats.");
        let bank = FewShotBank::builtin();
        let det = ScriptedBackend::new(); // nothing scripted
        let rev = ScriptedBackend::new();
        let err = run_pipeline(&s, &det, &rev, &bank, &PipelineOptions::default()).unwrap_err();
        assert_eq!(err.stage, Stage::Detector);
    }

    #[test]
    fn corpus_preserves_order_under_parallelism() {
        let bank = FewShotBank::builtin();
        let mut det = ScriptedBackend::new();
        let samples: Vec<Sample> = (0..100)
            .map(|i| sample(&format!("caption number {i}"), "ref"))
            .collect();
        for s in &samples {
            det.script(&build_detector_prompt(s, &bank), "none");
        }
        let rev = ScriptedBackend::new();
        let results = run_corpus(&samples, &det, &rev, &bank, &PipelineOptions::default(), 8);
        assert_eq!(results.len(), 100);
        for (i, result) in results.iter().enumerate() {
            assert_eq!(
                result.as_ref().unwrap().final_tagged,
                format!("caption number {i}")
            );
        }
    }

    #[test]
    fn corpus_records_per_sample_failures() {
        let bank = FewShotBank::builtin();
        let samples = vec![sample("a dog", "a dog"), sample("a cat", "a cat")];
        let mut det = ScriptedBackend::new();
        det.script(&build_detector_prompt(&samples[0], &bank), "none");
        // samples[1] deliberately unscripted.
        let rev = ScriptedBackend::new();
        let results = run_corpus(&samples, &det, &rev, &bank, &PipelineOptions::default(), 2);
        assert!(results[0].is_ok());
        assert!(results[1].is_err());
    }
}
