//! The inline tagged-markup codec: deterministic tag insertion around a
//! detected span, parsing tagged text back into spans, applying reviewer
//! edits, and stripping tags.
//!
//! The pipeline-facing grammar is `<name>content</name>` with no
//! attributes; names resolve through [`error_type_from_tag`]. Tags are
//! never nested. Attributed tags belong to the synthgraph XML dialect.

use crate::annotation::{
    check_spans_sorted, error_type_from_tag, error_type_to_tag, Edit, ErrorType, Span, SpanError,
    TagStyle,
};
use thiserror::Error;

/// What went wrong while scanning tag markup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkupErrorKind {
    /// A closing tag with no matching opener, a mismatched name, or an
    /// opener left unclosed at end of input.
    Unbalanced,
    /// An opening tag inside another tag pair.
    Nested,
    /// A tag name outside the taxonomy, or unparseable tag syntax.
    UnknownTag,
    /// A tag pair wrapping no content.
    EmptySpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed markup at char {position}: {kind:?}")]
pub struct MalformedMarkup {
    /// Char offset into the raw input where the problem was detected.
    pub position: usize,
    pub kind: MarkupErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TagInsertError {
    #[error("occurrence {occurrence} of {span_text:?} not found in description")]
    SpanNotFound { span_text: String, occurrence: usize },
    #[error("{span_text:?} only matches by splitting a word (whole words required)")]
    NotWholeWord { span_text: String },
    #[error("the no-hallucination class cannot be tagged")]
    NoHallucinationNotTaggable,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ApplyEditsError {
    #[error("edit span [{start},{end}) {text:?} is not a span of the annotated text")]
    EditSpanMismatch {
        start: usize,
        end: usize,
        text: String,
    },
}

/// Plain text plus its extracted spans; the canonical parse result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedText {
    pub text: String,
    pub spans: Vec<Span>,
}

impl AnnotatedText {
    pub fn new(text: impl Into<String>, spans: Vec<Span>) -> Result<Self, SpanError> {
        let text = text.into();
        for span in &spans {
            span.check_against(&text)?;
        }
        check_spans_sorted(&spans)?;
        Ok(AnnotatedText { text, spans })
    }

    pub fn plain(text: impl Into<String>) -> Self {
        AnnotatedText {
            text: text.into(),
            spans: Vec::new(),
        }
    }
}

/// A raw tagged string paired with its parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedText {
    pub raw: String,
    pub parsed: AnnotatedText,
}

impl TaggedText {
    pub fn parse(raw: impl Into<String>) -> Result<Self, MalformedMarkup> {
        let raw = raw.into();
        let parsed = parse_tagged(&raw)?;
        Ok(TaggedText { raw, parsed })
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

fn is_tag_name_char(c: char) -> bool {
    c.is_ascii_lowercase() || c == '_'
}

/// Extracts every `<tag>…</tag>` pair into a [`Span`] with offsets into
/// the stripped text. Unknown names, nesting, and unbalanced tags are
/// errors; plain text with no tags parses to itself.
pub fn parse_tagged(raw: &str) -> Result<AnnotatedText, MalformedMarkup> {
    let chars: Vec<char> = raw.chars().collect();
    let mut text = String::new();
    let mut text_len = 0usize; // chars in `text`
    let mut spans = Vec::new();
    let mut open: Option<(usize, ErrorType, usize)> = None; // (raw pos, type, text start)
    let mut i = 0usize;

    while i < chars.len() {
        let c = chars[i];
        if c != '<' {
            text.push(c);
            text_len += 1;
            i += 1;
            continue;
        }
        let tag_pos = i;
        i += 1;
        let closing = i < chars.len() && chars[i] == '/';
        if closing {
            i += 1;
        }
        let name_start = i;
        while i < chars.len() && is_tag_name_char(chars[i]) {
            i += 1;
        }
        let name: String = chars[name_start..i].iter().collect();
        if i >= chars.len() {
            return Err(MalformedMarkup {
                position: tag_pos,
                kind: MarkupErrorKind::Unbalanced,
            });
        }
        if chars[i] != '>' || name.is_empty() {
            return Err(MalformedMarkup {
                position: tag_pos,
                kind: MarkupErrorKind::UnknownTag,
            });
        }
        i += 1; // consume '>'
        let error_type = error_type_from_tag(&name).map_err(|_| MalformedMarkup {
            position: tag_pos,
            kind: MarkupErrorKind::UnknownTag,
        })?;
        if closing {
            match open.take() {
                Some((_, open_type, span_start)) => {
                    if open_type != error_type {
                        return Err(MalformedMarkup {
                            position: tag_pos,
                            kind: MarkupErrorKind::Unbalanced,
                        });
                    }
                    if span_start == text_len {
                        return Err(MalformedMarkup {
                            position: tag_pos,
                            kind: MarkupErrorKind::EmptySpan,
                        });
                    }
                    let span_text: String =
                        text.chars().skip(span_start).collect();
                    spans.push(Span::new(span_start, text_len, span_text, open_type));
                }
                None => {
                    return Err(MalformedMarkup {
                        position: tag_pos,
                        kind: MarkupErrorKind::Unbalanced,
                    })
                }
            }
        } else {
            if open.is_some() {
                return Err(MalformedMarkup {
                    position: tag_pos,
                    kind: MarkupErrorKind::Nested,
                });
            }
            open = Some((tag_pos, error_type, text_len));
        }
    }
    if let Some((pos, _, _)) = open {
        return Err(MalformedMarkup {
            position: pos,
            kind: MarkupErrorKind::Unbalanced,
        });
    }
    Ok(AnnotatedText { text, spans })
}

/// Removes all tag markup, preserving every other character exactly.
pub fn strip_tags(raw: &str) -> Result<String, MalformedMarkup> {
    parse_tagged(raw).map(|a| a.text)
}

/// Renders an annotated text back to tagged markup in the given style.
///
/// `parse_tagged(render_tagged(a)) == a` for every valid `a`.
pub fn render_tagged_with_style(a: &AnnotatedText, style: TagStyle) -> String {
    let chars: Vec<char> = a.text.chars().collect();
    let mut out = String::new();
    let mut cursor = 0usize;
    for span in &a.spans {
        out.extend(&chars[cursor..span.start]);
        // Spans never carry NoHallucination, so the tag name always exists.
        let name = error_type_to_tag(span.error_type, style).expect("taggable span");
        out.push('<');
        out.push_str(name);
        out.push('>');
        out.extend(&chars[span.start..span.end]);
        out.push_str("</");
        out.push_str(name);
        out.push('>');
        cursor = span.end;
    }
    out.extend(&chars[cursor..]);
    out
}

/// Canonical-style rendering.
pub fn render_tagged(a: &AnnotatedText) -> String {
    render_tagged_with_style(a, TagStyle::Canonical)
}

/// All substring matches of `needle` in `haystack`, flagged whole-word or
/// not. Whole-word matches do not overlap each other; a partial match
/// only advances the scan by one char so it cannot shadow a whole-word
/// match starting inside it. Offsets are in chars.
fn word_matches(haystack: &[char], needle: &[char]) -> Vec<(usize, bool)> {
    let mut out = Vec::new();
    if needle.is_empty() {
        return out;
    }
    let mut i = 0usize;
    while i + needle.len() <= haystack.len() {
        if &haystack[i..i + needle.len()] == needle {
            let end = i + needle.len();
            let left_ok = i == 0
                || !is_word_char(haystack[i - 1])
                || !is_word_char(needle[0]);
            let right_ok = end == haystack.len()
                || !is_word_char(haystack[end])
                || !is_word_char(needle[needle.len() - 1]);
            let whole = left_ok && right_ok;
            out.push((i, whole));
            i = if whole { end } else { i + 1 };
        } else {
            i += 1;
        }
    }
    out
}

/// The deterministic tag-insertion function: wraps the `occurrence`-th
/// whole-word match of `span_text` in the tag for `t`, copying every
/// other character of the description verbatim. Tags are emitted in the
/// prompt-alias style since the result feeds reviewer prompts.
pub fn insert_tag(
    description: &str,
    span_text: &str,
    t: ErrorType,
    occurrence: usize,
) -> Result<TaggedText, TagInsertError> {
    if t == ErrorType::NoHallucination {
        return Err(TagInsertError::NoHallucinationNotTaggable);
    }
    let occurrence = occurrence.max(1);
    let haystack: Vec<char> = description.chars().collect();
    let needle: Vec<char> = span_text.chars().collect();
    let matches = word_matches(&haystack, &needle);
    let mut seen_partial = false;
    let mut nth = 0usize;
    let mut chosen = None;
    for (pos, whole) in &matches {
        if *whole {
            nth += 1;
            if nth == occurrence {
                chosen = Some(*pos);
                break;
            }
        } else {
            seen_partial = true;
        }
    }
    let start = match chosen {
        Some(pos) => pos,
        None if seen_partial => {
            return Err(TagInsertError::NotWholeWord {
                span_text: span_text.to_string(),
            })
        }
        None => {
            return Err(TagInsertError::SpanNotFound {
                span_text: span_text.to_string(),
                occurrence,
            })
        }
    };
    let span = Span::new(start, start + needle.len(), span_text, t);
    let annotated = AnnotatedText {
        text: description.to_string(),
        spans: vec![span],
    };
    let raw = render_tagged_with_style(&annotated, TagStyle::PromptAlias);
    Ok(TaggedText {
        raw,
        parsed: annotated,
    })
}

/// One replacement applied by [`apply_edits`], mapping the replacement
/// back to the original span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditAlignment {
    /// Char range in the *original* text.
    pub start: usize,
    pub end: usize,
    pub original: String,
    pub replacement: String,
}

/// Tagged output of [`apply_edits`] plus the replacement→original map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditedTagged {
    pub tagged: TaggedText,
    pub alignment: Vec<EditAlignment>,
    original_text: String,
}

impl EditedTagged {
    /// Reverts every replacement, reproducing the original plain text.
    pub fn reverted(&self) -> String {
        self.original_text.clone()
    }
}

/// Renders each edited span as `<tag>replacement</tag>`, leaving all
/// other characters identical to the original text. Unedited spans keep
/// their tags around the original span text.
pub fn apply_edits(a: &AnnotatedText, edits: &[Edit]) -> Result<EditedTagged, ApplyEditsError> {
    let mut replacements: Vec<Option<&str>> = vec![None; a.spans.len()];
    for edit in edits {
        let idx = a
            .spans
            .iter()
            .position(|s| *s == edit.span)
            .ok_or(ApplyEditsError::EditSpanMismatch {
                start: edit.span.start,
                end: edit.span.end,
                text: edit.span.text.clone(),
            })?;
        replacements[idx] = Some(&edit.replacement);
    }
    let chars: Vec<char> = a.text.chars().collect();
    let mut raw = String::new();
    let mut spans = Vec::new();
    let mut alignment = Vec::new();
    let mut cursor = 0usize;
    let mut out_len = 0usize; // chars in stripped output so far
    for (span, replacement) in a.spans.iter().zip(&replacements) {
        let before: String = chars[cursor..span.start].iter().collect();
        out_len += before.chars().count();
        raw.push_str(&before);
        let content = match replacement {
            Some(r) => {
                alignment.push(EditAlignment {
                    start: span.start,
                    end: span.end,
                    original: span.text.clone(),
                    replacement: (*r).to_string(),
                });
                (*r).to_string()
            }
            None => span.text.clone(),
        };
        let name = error_type_to_tag(span.error_type, TagStyle::Canonical).expect("taggable span");
        raw.push('<');
        raw.push_str(name);
        raw.push('>');
        raw.push_str(&content);
        raw.push_str("</");
        raw.push_str(name);
        raw.push('>');
        let content_len = content.chars().count();
        spans.push(Span::new(
            out_len,
            out_len + content_len,
            content,
            span.error_type,
        ));
        out_len += content_len;
        cursor = span.end;
    }
    let tail: String = chars[cursor..].iter().collect();
    raw.push_str(&tail);
    // Rebuild the stripped text directly rather than re-parsing.
    let mut text = String::new();
    let mut c2 = 0usize;
    for (span, replacement) in a.spans.iter().zip(&replacements) {
        text.extend(&chars[c2..span.start]);
        match replacement {
            Some(r) => text.push_str(r),
            None => text.push_str(&span.text),
        }
        c2 = span.end;
    }
    text.extend(&chars[c2..]);
    Ok(EditedTagged {
        tagged: TaggedText {
            raw,
            parsed: AnnotatedText { text, spans },
        },
        alignment,
        original_text: a.text.clone(),
    })
}
