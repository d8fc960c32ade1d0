//! Rule-based linter for annotated error-insertion records.
//!
//! `validate` checks a `generated_xml` markup string against its source
//! sentence using a fixed registry of mechanical rules (R1-R11). Rules
//! that would require world knowledge (semantic equivalence, proper-noun
//! classification, justified modifications) are deliberately excluded
//! from the deterministic pass; `semantic_check` exposes them as an
//! optional backend-assisted review that only ever yields advisory
//! warnings.
//!
//! The scanner here is intentionally lenient: unknown tag names, broken
//! id sequences, nested tags and the like are reported as rule
//! violations rather than parse failures, so a single bad record yields
//! as many findings as possible. Only structurally irrecoverable markup
//! (unbalanced tags, missing attributes, bad attribute syntax) aborts
//! with a single parse violation.

use crate::annotation::{ErrorType, Sample};
use crate::backend::{Backend, BackendError};
use crate::synthgraph::build_revision_prompt;
use serde::{Deserialize, Serialize};

/// Identifier of the rule a violation cites. The registry is closed:
/// reports never invent ad-hoc rule names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    /// The markup could not be scanned at all.
    #[serde(rename = "parse")]
    Parse,
    /// Tag names limited to the six error types.
    R1,
    /// Ids are sequential (E1, E2, ...) with no duplicates.
    R2,
    /// Parent references resolve to an existing id and never to self.
    R3,
    /// No nested tags.
    R4,
    /// Modifications cover whole words only.
    R5,
    /// A closing tag is never glued directly to the next opening tag.
    R6,
    /// Replacement must not be word-equal to the original (including the
    /// article-to-"one" subcase).
    R7,
    /// No article-for-article swaps.
    R8,
    /// Untagged occurrences of a tagged word elsewhere in the sentence.
    R9,
    /// Tagged content must not repeat boundary words of the original.
    R10,
    /// Restoring every original reproduces the source sentence exactly.
    R11,
    /// Backend-assisted semantic review flagged the record.
    #[serde(rename = "semantic")]
    Semantic,
    /// Sample hygiene: span offsets out of bounds or inverted.
    #[serde(rename = "sample_bounds")]
    SampleBounds,
    /// Sample hygiene: spans overlap or are unsorted.
    #[serde(rename = "sample_order")]
    SampleOrder,
    /// Sample hygiene: span text disagrees with its offsets.
    #[serde(rename = "sample_text")]
    SampleText,
    /// Sample hygiene: a span carries the no-hallucination type.
    #[serde(rename = "sample_no_hallucination")]
    SampleNoHallucination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// A single rule finding. `start`/`end` are char offsets into the string
/// the rule inspected: `generated_xml` for everything except R11, whose
/// range points into the source sentence at the first divergence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule_id: RuleId,
    pub start: usize,
    pub end: usize,
    pub severity: Severity,
    pub message: String,
}

impl Violation {
    fn new(rule_id: RuleId, start: usize, end: usize, severity: Severity, message: String) -> Self {
        Violation {
            rule_id,
            start,
            end,
            severity,
            message,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ValidateOptions {
    /// Promote R2 gap warnings (unique but non-contiguous ids) to errors.
    pub strict: bool,
}

/// One scanned error tag, flattened even when the input nests.
#[derive(Debug)]
struct ScannedNode {
    name: String,
    original: String,
    id: Option<String>,
    parent: Option<String>,
    replacement: String,
    /// Char range of the whole element in the markup string.
    xml_start: usize,
    xml_end: usize,
    /// Char offset of `original` in the restored sentence.
    base_start: usize,
}

/// Plain text between tags, with its offset in the markup string.
#[derive(Debug)]
struct PlainSegment {
    xml_start: usize,
    text: String,
}

struct Scanned {
    nodes: Vec<ScannedNode>,
    plain: Vec<PlainSegment>,
    restored: String,
    /// Positions of inner opening tags found inside another tag (R4).
    nested_at: Vec<usize>,
    /// Positions where a closing tag abuts the next opening tag (R6).
    glued_at: Vec<usize>,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

fn parse_abort(pos: usize, detail: &str) -> Vec<Violation> {
    vec![Violation::new(
        RuleId::Parse,
        pos,
        pos + 1,
        Severity::Error,
        format!("malformed markup: {detail}"),
    )]
}

/// Lenient tag scanner. Returns the flattened node list, plain segments,
/// and the sentence restored by substituting each top-level tag with its
/// `original` attribute. Structural breakage aborts via `Err`.
fn scan(xml: &str) -> Result<Scanned, Vec<Violation>> {
    let chars: Vec<char> = xml.chars().collect();
    let mut i = 0usize;
    let mut nodes = Vec::new();
    let mut plain = Vec::new();
    let mut restored = String::new();
    let mut nested_at = Vec::new();
    let mut glued_at = Vec::new();

    // Stack of open elements: (name, attrs, xml_start, content).
    let mut stack: Vec<(String, Vec<(String, String)>, usize, String)> = Vec::new();
    let mut segment = String::new();
    let mut segment_start = 0usize;

    while i < chars.len() {
        if chars[i] != '<' {
            if let Some(frame) = stack.last_mut() {
                frame.3.push(chars[i]);
            } else {
                if segment.is_empty() {
                    segment_start = i;
                }
                segment.push(chars[i]);
            }
            i += 1;
            continue;
        }
        let tag_start = i;
        i += 1;
        let closing = i < chars.len() && chars[i] == '/';
        if closing {
            i += 1;
        }
        let name_start = i;
        while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
            i += 1;
        }
        let name: String = chars[name_start..i].iter().collect();
        if name.is_empty() {
            return Err(parse_abort(tag_start, "empty tag name"));
        }
        // Attributes: key="value" pairs separated by whitespace.
        let mut attrs = Vec::new();
        loop {
            while i < chars.len() && chars[i].is_whitespace() {
                i += 1;
            }
            if i >= chars.len() {
                return Err(parse_abort(tag_start, "unterminated tag"));
            }
            if chars[i] == '>' {
                i += 1;
                break;
            }
            if closing {
                return Err(parse_abort(i, "attribute in closing tag"));
            }
            let key_start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let key: String = chars[key_start..i].iter().collect();
            if key.is_empty() || i >= chars.len() || chars[i] != '=' {
                return Err(parse_abort(key_start, "expected key=\"value\" attribute"));
            }
            i += 1;
            if i >= chars.len() || chars[i] != '"' {
                return Err(parse_abort(i, "attribute value must be double-quoted"));
            }
            i += 1;
            let mut value = String::new();
            while i < chars.len() && chars[i] != '"' {
                value.push(chars[i]);
                i += 1;
            }
            if i >= chars.len() {
                return Err(parse_abort(key_start, "unterminated attribute value"));
            }
            i += 1;
            attrs.push((key, unescape(&value)));
        }

        if closing {
            let Some((open_name, attrs, open_start, content)) = stack.pop() else {
                return Err(parse_abort(tag_start, format!("stray closing tag </{name}>").as_str()));
            };
            if open_name != name {
                return Err(parse_abort(
                    tag_start,
                    format!("closing </{name}> does not match <{open_name}>").as_str(),
                ));
            }
            if let Some(outer) = stack.last_mut() {
                // Nested element: flatten its text into the enclosing tag
                // and keep only the R4 evidence recorded at its open.
                outer.3.push_str(&content);
            } else {
                let find = |k: &str| attrs.iter().find(|(key, _)| key == k).map(|(_, v)| v.clone());
                let Some(original) = find("original") else {
                    return Err(parse_abort(open_start, "missing original attribute"));
                };
                if content.is_empty() {
                    return Err(parse_abort(open_start, "empty tag content"));
                }
                let base_start = restored.chars().count();
                restored.push_str(&original);
                nodes.push(ScannedNode {
                    name,
                    original,
                    id: find("id"),
                    parent: find("parent"),
                    replacement: content,
                    xml_start: open_start,
                    xml_end: i,
                    base_start,
                });
                if i < chars.len() && chars[i] == '<' && chars.get(i + 1) != Some(&'/') {
                    glued_at.push(i);
                }
            }
        } else {
            if !stack.is_empty() {
                nested_at.push(tag_start);
            } else if !segment.is_empty() {
                restored.push_str(&segment);
                plain.push(PlainSegment {
                    xml_start: segment_start,
                    text: std::mem::take(&mut segment),
                });
            }
            stack.push((name, attrs, tag_start, String::new()));
        }
    }
    if let Some((name, _, open_start, _)) = stack.pop() {
        return Err(parse_abort(open_start, format!("unclosed tag <{name}>").as_str()));
    }
    if !segment.is_empty() {
        restored.push_str(&segment);
        plain.push(PlainSegment {
            xml_start: segment_start,
            text: segment,
        });
    }
    Ok(Scanned {
        nodes,
        plain,
        restored,
        nested_at,
        glued_at,
    })
}

fn unescape(s: &str) -> String {
    s.replace("&lt;", "<").replace("&gt;", ">").replace("&amp;", "&")
}

fn norm_words(s: &str) -> Vec<String> {
    s.split_whitespace().map(|w| w.to_lowercase()).collect()
}

fn is_article(w: &str) -> bool {
    matches!(w.to_lowercase().as_str(), "a" | "an" | "the")
}

/// Whole-word occurrences of `needle` in `haystack` (char offsets).
fn whole_word_find(haystack: &[char], needle: &[char]) -> Vec<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return Vec::new();
    }
    let mut hits = Vec::new();
    for start in 0..=haystack.len() - needle.len() {
        if haystack[start..start + needle.len()] != *needle {
            continue;
        }
        let before_ok = start == 0 || !is_word_char(haystack[start - 1]);
        let end = start + needle.len();
        let after_ok = end == haystack.len() || !is_word_char(haystack[end]);
        if before_ok && after_ok {
            hits.push(start);
        }
    }
    hits
}

/// Runs the full deterministic rule registry over one record.
pub fn validate(original: &str, generated_xml: &str) -> Vec<Violation> {
    validate_with(original, generated_xml, &ValidateOptions::default())
}

pub fn validate_with(
    original: &str,
    generated_xml: &str,
    options: &ValidateOptions,
) -> Vec<Violation> {
    let scanned = match scan(generated_xml) {
        Ok(s) => s,
        Err(abort) => return abort,
    };
    let mut out = Vec::new();

    // R1: tag names drawn from the six error types (either naming style).
    for node in &scanned.nodes {
        if crate::annotation::error_type_from_tag(&node.name).is_err() {
            out.push(Violation::new(
                RuleId::R1,
                node.xml_start,
                node.xml_end,
                Severity::Error,
                format!("unknown error type tag <{}>", node.name),
            ));
        }
    }
    for &pos in &scanned.nested_at {
        out.push(Violation::new(
            RuleId::R4,
            pos,
            pos + 1,
            Severity::Error,
            "error tags must not be nested".to_string(),
        ));
    }
    for &pos in &scanned.glued_at {
        out.push(Violation::new(
            RuleId::R6,
            pos,
            pos + 1,
            Severity::Error,
            "missing space between closing tag and next tag".to_string(),
        ));
    }

    // R2: id presence, form, uniqueness, then sequence shape.
    let mut id_numbers = Vec::new();
    let mut seen_ids: Vec<&str> = Vec::new();
    let mut ids_broken = false;
    for node in &scanned.nodes {
        let pos = (node.xml_start, node.xml_end);
        match &node.id {
            None => {
                ids_broken = true;
                out.push(Violation::new(
                    RuleId::R2,
                    pos.0,
                    pos.1,
                    Severity::Error,
                    "tag is missing its id attribute".to_string(),
                ));
            }
            Some(id) => {
                let number = id
                    .strip_prefix('E')
                    .and_then(|n| n.parse::<u64>().ok())
                    .filter(|&n| n > 0);
                match number {
                    None => {
                        ids_broken = true;
                        out.push(Violation::new(
                            RuleId::R2,
                            pos.0,
                            pos.1,
                            Severity::Error,
                            format!("id \"{id}\" is not of the form E1, E2, ..."),
                        ));
                    }
                    Some(n) => {
                        if seen_ids.contains(&id.as_str()) {
                            ids_broken = true;
                            out.push(Violation::new(
                                RuleId::R2,
                                pos.0,
                                pos.1,
                                Severity::Error,
                                format!("duplicate id \"{id}\""),
                            ));
                        }
                        id_numbers.push(n);
                    }
                }
                seen_ids.push(id);
            }
        }
    }
    if !ids_broken && !id_numbers.is_empty() {
        let expected: Vec<u64> = (1..=id_numbers.len() as u64).collect();
        if id_numbers != expected {
            let severity = if options.strict {
                Severity::Error
            } else {
                Severity::Warning
            };
            out.push(Violation::new(
                RuleId::R2,
                scanned.nodes[0].xml_start,
                scanned.nodes.last().unwrap().xml_end,
                severity,
                format!(
                    "ids are not the contiguous sequence E1..E{} in order (found {})",
                    id_numbers.len(),
                    seen_ids.join(", ")
                ),
            ));
        }
    }

    // R3: parents resolve and are never self.
    for node in &scanned.nodes {
        if let Some(parent) = &node.parent {
            if node.id.as_deref() == Some(parent.as_str()) {
                out.push(Violation::new(
                    RuleId::R3,
                    node.xml_start,
                    node.xml_end,
                    Severity::Error,
                    format!("tag {parent} names itself as parent"),
                ));
            } else if !seen_ids.contains(&parent.as_str()) {
                out.push(Violation::new(
                    RuleId::R3,
                    node.xml_start,
                    node.xml_end,
                    Severity::Error,
                    format!("parent \"{parent}\" does not match any id"),
                ));
            }
        }
    }

    // R5: the replaced text must sit on word boundaries in the restored
    // sentence — no sub-word splices.
    let restored_chars: Vec<char> = scanned.restored.chars().collect();
    for node in &scanned.nodes {
        let start = node.base_start;
        let end = start + node.original.chars().count();
        let first_inside = node.original.chars().next().map(is_word_char).unwrap_or(false);
        let last_inside = node.original.chars().last().map(is_word_char).unwrap_or(false);
        let before_bad = first_inside && start > 0 && is_word_char(restored_chars[start - 1]);
        let after_bad =
            last_inside && end < restored_chars.len() && is_word_char(restored_chars[end]);
        if before_bad || after_bad {
            out.push(Violation::new(
                RuleId::R5,
                node.xml_start,
                node.xml_end,
                Severity::Error,
                format!("\"{}\" replaces part of a word, not whole words", node.original),
            ));
        }
    }

    // R7 / R8: lexical equivalence and article swaps.
    for node in &scanned.nodes {
        let orig_words = norm_words(&node.original);
        let repl_words = norm_words(&node.replacement);
        let article_to_one = orig_words.len() == 1
            && repl_words.len() == 1
            && matches!(orig_words[0].as_str(), "a" | "an")
            && matches!(repl_words[0].as_str(), "one" | "1");
        if orig_words == repl_words || article_to_one {
            out.push(Violation::new(
                RuleId::R7,
                node.xml_start,
                node.xml_end,
                Severity::Error,
                format!(
                    "replacement \"{}\" is equivalent to original \"{}\"",
                    node.replacement, node.original
                ),
            ));
        } else if orig_words.len() == 1
            && repl_words.len() == 1
            && is_article(&orig_words[0])
            && is_article(&repl_words[0])
        {
            out.push(Violation::new(
                RuleId::R8,
                node.xml_start,
                node.xml_end,
                Severity::Error,
                format!(
                    "article swap \"{}\" -> \"{}\" is not allowed",
                    node.original, node.replacement
                ),
            ));
        }
    }

    // R9: tagged originals reappearing untagged elsewhere.
    for node in &scanned.nodes {
        let needle: Vec<char> = node.original.chars().collect();
        for segment in &scanned.plain {
            let seg_chars: Vec<char> = segment.text.chars().collect();
            for hit in whole_word_find(&seg_chars, &needle) {
                out.push(Violation::new(
                    RuleId::R9,
                    segment.xml_start + hit,
                    segment.xml_start + hit + needle.len(),
                    Severity::Warning,
                    format!(
                        "\"{}\" is tagged once but appears unmodified here",
                        node.original
                    ),
                ));
            }
        }
    }

    // R10: replacement repeating the original's boundary words means the
    // tag covers more than the actual modification.
    for node in &scanned.nodes {
        let orig_words = norm_words(&node.original);
        let repl_words = norm_words(&node.replacement);
        if orig_words.is_empty() || repl_words.is_empty() || orig_words == repl_words {
            continue;
        }
        let prefix = orig_words.first() == repl_words.first();
        let suffix = orig_words.last() == repl_words.last();
        if prefix || suffix {
            out.push(Violation::new(
                RuleId::R10,
                node.xml_start,
                node.xml_end,
                Severity::Error,
                format!(
                    "tag repeats unchanged words of \"{}\"; tag only the modified words",
                    node.original
                ),
            ));
        }
    }

    // R11: restoring every original must reproduce the source sentence.
    if scanned.restored != original {
        let diff = original
            .chars()
            .zip(scanned.restored.chars())
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| original.chars().count().min(restored_chars.len()));
        out.push(Violation::new(
            RuleId::R11,
            diff,
            (diff + 1).min(original.chars().count().max(1)),
            Severity::Error,
            format!(
                "restored sentence diverges from the source at char {diff}: {:?} vs {:?}",
                scanned.restored, original
            ),
        ));
    }

    out.sort_by(|a, b| (a.start, a.rule_id).cmp(&(b.start, b.rule_id)));
    out
}

/// Structural hygiene checks on an in-memory annotated sample. Offsets in
/// the report refer to `s.description`.
pub fn validate_sample(s: &Sample) -> Vec<Violation> {
    let mut out = Vec::new();
    let len = s.description.chars().count();
    let text_chars: Vec<char> = s.description.chars().collect();
    let mut prev_end: Option<usize> = None;
    for span in &s.annotations {
        if span.start >= span.end || span.end > len {
            out.push(Violation::new(
                RuleId::SampleBounds,
                span.start.min(len),
                span.end.min(len),
                Severity::Error,
                format!("span {}..{} out of bounds for text of length {len}", span.start, span.end),
            ));
            prev_end = Some(span.end);
            continue;
        }
        if let Some(prev) = prev_end {
            if span.start < prev {
                out.push(Violation::new(
                    RuleId::SampleOrder,
                    span.start,
                    span.end,
                    Severity::Error,
                    "spans overlap or are not sorted by start offset".to_string(),
                ));
            }
        }
        let actual: String = text_chars[span.start..span.end].iter().collect();
        if actual != span.text {
            out.push(Violation::new(
                RuleId::SampleText,
                span.start,
                span.end,
                Severity::Error,
                format!("span text {:?} disagrees with offsets ({actual:?})", span.text),
            ));
        }
        if span.error_type == ErrorType::NoHallucination {
            out.push(Violation::new(
                RuleId::SampleNoHallucination,
                span.start,
                span.end,
                Severity::Error,
                "no-hallucination is not a taggable span type".to_string(),
            ));
        }
        prev_end = Some(span.end);
    }
    out
}

#[derive(Deserialize)]
struct RevisionVerdict {
    need_update: bool,
    #[serde(default)]
    reason: Option<String>,
}

/// Optional backend-assisted review for the rules a deterministic linter
/// cannot decide (semantic equivalence, justified modification, proper
/// vs. common noun). Findings are always advisory warnings; they never
/// change the mechanical verdict.
pub fn semantic_check(
    original: &str,
    generated_xml: &str,
    backend: &dyn Backend,
) -> Result<Vec<Violation>, BackendError> {
    let prompt = build_revision_prompt(original, generated_xml);
    let response = backend.complete(&prompt, None)?;
    let json_body = extract_json_object(&response).ok_or_else(|| BackendError::BadResponse {
        backend: backend.name().to_string(),
        message: "no JSON object in reviser response".to_string(),
    })?;
    let verdict: RevisionVerdict =
        serde_json::from_str(json_body).map_err(|e| BackendError::BadResponse {
            backend: backend.name().to_string(),
            message: format!("bad reviser JSON: {e}"),
        })?;
    if verdict.need_update {
        Ok(vec![Violation::new(
            RuleId::Semantic,
            0,
            generated_xml.chars().count(),
            Severity::Warning,
            verdict
                .reason
                .unwrap_or_else(|| "reviser flagged the record without a reason".to_string()),
        )])
    } else {
        Ok(Vec::new())
    }
}

/// Pulls the first balanced `{...}` out of a response that may wrap the
/// JSON in prose or a code fence.
fn extract_json_object(s: &str) -> Option<&str> {
    let start = s.find('{')?;
    let bytes = s.as_bytes();
    let mut depth = 0i32;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&s[start..start + offset + 1]);
                }
            }
            _ => {}
        }
    }
    None
}
