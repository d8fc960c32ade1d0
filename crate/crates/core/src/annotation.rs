//! Core domain vocabulary: the error taxonomy, spans, samples, and the
//! mapping between canonical tag names and prompt-facing aliases.
//!
//! All offsets throughout the crate are counted in Unicode scalar values
//! (chars), never bytes, so they stay portable across serializations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The six hallucination categories plus the no-hallucination class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorType {
    /// Wrong object or entity (common nouns).
    Object,
    /// Wrong descriptive attribute (adjective/adverb).
    Attribute,
    /// Wrong quantity or numerical value.
    Number,
    /// Wrong scene text (text visible in the image).
    Text,
    /// Wrong spatial relationship between objects.
    Relation,
    /// Wrong named entity (proper names only).
    Fact,
    /// Not a hallucination. Never rendered as a tag.
    NoHallucination,
}

/// Which surface form of a tag name to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TagStyle {
    /// `object`, `attribute`, `number`, `text`, `relation`, `fact`.
    #[default]
    Canonical,
    /// Prompt-facing aliases: `spatial_relation` for Relation and
    /// `named_entities_fact` for Fact; identical otherwise.
    PromptAlias,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TagNameError {
    #[error("unknown tag name: {0:?}")]
    UnknownTag(String),
    #[error("the no-hallucination class has no tag name")]
    NoHallucinationNotTaggable,
}

/// Resolves a tag name (canonical or prompt alias) to its error type.
pub fn error_type_from_tag(tag: &str) -> Result<ErrorType, TagNameError> {
    match tag {
        "object" => Ok(ErrorType::Object),
        "attribute" => Ok(ErrorType::Attribute),
        "number" => Ok(ErrorType::Number),
        "text" => Ok(ErrorType::Text),
        "relation" | "spatial_relation" => Ok(ErrorType::Relation),
        "fact" | "named_entities_fact" => Ok(ErrorType::Fact),
        other => Err(TagNameError::UnknownTag(other.to_string())),
    }
}

/// Renders an error type as a tag name in the requested style.
///
/// Inverse of [`error_type_from_tag`] for every type except
/// `NoHallucination`, which is never taggable.
pub fn error_type_to_tag(t: ErrorType, style: TagStyle) -> Result<&'static str, TagNameError> {
    Ok(match (t, style) {
        (ErrorType::Object, _) => "object",
        (ErrorType::Attribute, _) => "attribute",
        (ErrorType::Number, _) => "number",
        (ErrorType::Text, _) => "text",
        (ErrorType::Relation, TagStyle::Canonical) => "relation",
        (ErrorType::Relation, TagStyle::PromptAlias) => "spatial_relation",
        (ErrorType::Fact, TagStyle::Canonical) => "fact",
        (ErrorType::Fact, TagStyle::PromptAlias) => "named_entities_fact",
        (ErrorType::NoHallucination, _) => {
            return Err(TagNameError::NoHallucinationNotTaggable)
        }
    })
}

impl ErrorType {
    /// All taggable variants, in canonical order.
    pub const TAGGABLE: [ErrorType; 6] = [
        ErrorType::Object,
        ErrorType::Attribute,
        ErrorType::Number,
        ErrorType::Text,
        ErrorType::Relation,
        ErrorType::Fact,
    ];
}

/// A contiguous char range of a description carrying one error type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    /// Inclusive char offset into the owning text.
    pub start: usize,
    /// Exclusive char offset.
    pub end: usize,
    /// The substring at `[start, end)`.
    pub text: String,
    pub error_type: ErrorType,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpanError {
    #[error("span [{start},{end}) is empty or out of bounds for text of length {len}")]
    OutOfBounds { start: usize, end: usize, len: usize },
    #[error("span text {span_text:?} does not match substring {actual:?} at [{start},{end})")]
    TextMismatch {
        start: usize,
        end: usize,
        span_text: String,
        actual: String,
    },
    #[error("span [{start},{end}) carries the no-hallucination class")]
    NoHallucinationSpan { start: usize, end: usize },
    #[error("spans [{a_start},{a_end}) and [{b_start},{b_end}) overlap or are out of order")]
    OverlapOrUnsorted {
        a_start: usize,
        a_end: usize,
        b_start: usize,
        b_end: usize,
    },
}

impl Span {
    pub fn new(start: usize, end: usize, text: impl Into<String>, error_type: ErrorType) -> Self {
        Span {
            start,
            end,
            text: text.into(),
            error_type,
        }
    }

    /// Checks this span against its owning text.
    pub fn check_against(&self, owner: &str) -> Result<(), SpanError> {
        let len = owner.chars().count();
        if self.start >= self.end || self.end > len {
            return Err(SpanError::OutOfBounds {
                start: self.start,
                end: self.end,
                len,
            });
        }
        if self.error_type == ErrorType::NoHallucination {
            return Err(SpanError::NoHallucinationSpan {
                start: self.start,
                end: self.end,
            });
        }
        let actual: String = owner
            .chars()
            .skip(self.start)
            .take(self.end - self.start)
            .collect();
        if actual != self.text {
            return Err(SpanError::TextMismatch {
                start: self.start,
                end: self.end,
                span_text: self.text.clone(),
                actual,
            });
        }
        Ok(())
    }
}

/// Checks that spans are sorted by start and pairwise non-overlapping.
pub fn check_spans_sorted(spans: &[Span]) -> Result<(), SpanError> {
    for pair in spans.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(SpanError::OverlapOrUnsorted {
                a_start: pair[0].start,
                a_end: pair[0].end,
                b_start: pair[1].start,
                b_end: pair[1].end,
            });
        }
    }
    Ok(())
}

/// One evaluation unit: an image locator, the model-generated description,
/// a human reference, and gold span annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    /// Opaque locator (path or URL); never dereferenced by this crate's core.
    pub image_ref: String,
    pub description: String,
    pub reference: String,
    pub annotations: Vec<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_model: Option<String>,
}

impl Sample {
    /// Builds a sample, enforcing span sortedness, non-overlap, and
    /// substring agreement with the description.
    pub fn new(
        image_ref: impl Into<String>,
        description: impl Into<String>,
        reference: impl Into<String>,
        annotations: Vec<Span>,
    ) -> Result<Self, SpanError> {
        let description = description.into();
        for span in &annotations {
            span.check_against(&description)?;
        }
        check_spans_sorted(&annotations)?;
        Ok(Sample {
            image_ref: image_ref.into(),
            description,
            reference: reference.into(),
            annotations,
            source_model: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditError {
    #[error("edit replacement is empty")]
    EmptyReplacement,
    #[error("edit replacement {0:?} equals the span text (no-op edit)")]
    NoOpEdit(String),
}

/// A suggested correction for one hallucinated span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub span: Span,
    pub replacement: String,
}

impl Edit {
    pub fn new(span: Span, replacement: impl Into<String>) -> Result<Self, EditError> {
        let replacement = replacement.into();
        if replacement.is_empty() {
            return Err(EditError::EmptyReplacement);
        }
        if replacement.to_lowercase() == span.text.to_lowercase() {
            return Err(EditError::NoOpEdit(replacement));
        }
        Ok(Edit { span, replacement })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_aliases_resolve() {
        assert_eq!(error_type_from_tag("spatial_relation"), Ok(ErrorType::Relation));
        assert_eq!(error_type_from_tag("relation"), Ok(ErrorType::Relation));
        assert_eq!(error_type_from_tag("named_entities_fact"), Ok(ErrorType::Fact));
        assert_eq!(error_type_from_tag("object"), Ok(ErrorType::Object));
        assert!(matches!(
            error_type_from_tag("color"),
            Err(TagNameError::UnknownTag(_))
        ));
    }

    #[test]
    fn tag_rendering() {
        assert_eq!(
            error_type_to_tag(ErrorType::Fact, TagStyle::PromptAlias),
            Ok("named_entities_fact")
        );
        assert_eq!(
            error_type_to_tag(ErrorType::Attribute, TagStyle::Canonical),
            Ok("attribute")
        );
        assert_eq!(
            error_type_to_tag(ErrorType::NoHallucination, TagStyle::Canonical),
            Err(TagNameError::NoHallucinationNotTaggable)
        );
    }

    #[test]
    fn tag_round_trip_both_styles() {
        for t in ErrorType::TAGGABLE {
            for style in [TagStyle::Canonical, TagStyle::PromptAlias] {
                let tag = error_type_to_tag(t, style).unwrap();
                assert_eq!(error_type_from_tag(tag), Ok(t));
            }
        }
    }

    #[test]
    fn sample_rejects_overlap() {
        let err = Sample::new(
            "img",
            "one two three",
            "ref",
            vec![
                Span::new(0, 5, "one t", ErrorType::Object),
                Span::new(4, 7, "two", ErrorType::Object),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, SpanError::OverlapOrUnsorted { .. }));
    }

    #[test]
    fn sample_rejects_text_mismatch() {
        let err = Sample::new(
            "img",
            "one two",
            "ref",
            vec![Span::new(0, 3, "two", ErrorType::Object)],
        )
        .unwrap_err();
        assert!(matches!(err, SpanError::TextMismatch { .. }));
    }

    #[test]
    fn span_offsets_are_chars_not_bytes() {
        // "café" is 5 bytes but 4 chars; the span must index chars.
        let s = Span::new(2, 6, "fé i", ErrorType::Object);
        s.check_against("café is open").unwrap();
    }

    #[test]
    fn edit_rejects_noop() {
        let span = Span::new(0, 3, "Red", ErrorType::Attribute);
        assert!(matches!(
            Edit::new(span.clone(), "red"),
            Err(EditError::NoOpEdit(_))
        ));
        assert!(Edit::new(span, "Blue").is_ok());
    }
}
