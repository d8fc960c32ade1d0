//! Parser and renderer for the error-insertion XML dialect.
//!
//! Grammar: `<type original="..." id="E1" parent="E2">replacement</type>`
//! interleaved with plain sentence text. Tag names are the six taxonomy
//! names (canonical or prompt-alias). Attribute values are double-quoted;
//! the only entities are `&amp;`, `&lt;`, `&gt;`. Tags never nest.

use super::{id_number, ErrorGraph, ErrorNode};
use crate::annotation::{error_type_from_tag, error_type_to_tag, TagStyle};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ErrorXmlError {
    #[error("malformed XML at char {position}: {detail}")]
    MalformedXml { position: usize, detail: String },
    #[error("duplicate node id {0:?}")]
    DuplicateId(String),
    #[error("node {0:?} lists itself as parent")]
    SelfParent(String),
    #[error("nested error tags at char {position}")]
    NestedTags { position: usize },
    #[error("no space after closing tag at char {position} (adjacent tags)")]
    MissingSpaceAfterClosingTag { position: usize },
}

fn unescape(s: &str, at: usize) -> Result<String, ErrorXmlError> {
    let mut out = String::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '&' {
            let rest: String = chars[i..].iter().take(5).collect();
            if rest.starts_with("&amp;") {
                out.push('&');
                i += 5;
            } else if rest.starts_with("&lt;") {
                out.push('<');
                i += 4;
            } else if rest.starts_with("&gt;") {
                out.push('>');
                i += 4;
            } else {
                return Err(ErrorXmlError::MalformedXml {
                    position: at + i,
                    detail: "unknown entity".into(),
                });
            }
        } else {
            out.push(chars[i]);
            i += 1;
        }
    }
    Ok(out)
}

pub(crate) fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct RawTag {
    name: String,
    original: Option<String>,
    id: Option<String>,
    parent: Option<String>,
    content: String,
    /// Char position of the opening `<` in the input.
    position: usize,
    /// Char position just past the closing tag.
    after: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_lowercase() || c == '_'
}

/// Scans one attributed tag starting at `chars[start] == '<'`.
fn scan_tag(chars: &[char], start: usize) -> Result<RawTag, ErrorXmlError> {
    let mut i = start + 1;
    let name_start = i;
    while i < chars.len() && is_name_char(chars[i]) {
        i += 1;
    }
    let name: String = chars[name_start..i].iter().collect();
    if name.is_empty() {
        return Err(ErrorXmlError::MalformedXml {
            position: start,
            detail: "expected tag name after '<'".into(),
        });
    }
    let mut original = None;
    let mut id = None;
    let mut parent = None;
    loop {
        while i < chars.len() && chars[i].is_whitespace() {
            i += 1;
        }
        if i >= chars.len() {
            return Err(ErrorXmlError::MalformedXml {
                position: start,
                detail: "unterminated opening tag".into(),
            });
        }
        if chars[i] == '>' {
            i += 1;
            break;
        }
        let key_start = i;
        while i < chars.len() && is_name_char(chars[i]) {
            i += 1;
        }
        let key: String = chars[key_start..i].iter().collect();
        if key.is_empty() || i >= chars.len() || chars[i] != '=' {
            return Err(ErrorXmlError::MalformedXml {
                position: key_start,
                detail: "expected attribute 'key=\"value\"'".into(),
            });
        }
        i += 1;
        if i >= chars.len() || chars[i] != '"' {
            return Err(ErrorXmlError::MalformedXml {
                position: i.min(chars.len()),
                detail: "expected '\"' to open attribute value".into(),
            });
        }
        i += 1;
        let val_start = i;
        while i < chars.len() && chars[i] != '"' {
            i += 1;
        }
        if i >= chars.len() {
            return Err(ErrorXmlError::MalformedXml {
                position: val_start,
                detail: "unterminated attribute value".into(),
            });
        }
        let value: String = chars[val_start..i].iter().collect();
        let value = unescape(&value, val_start)?;
        i += 1;
        match key.as_str() {
            "original" => original = Some(value),
            "id" => id = Some(value),
            "parent" => parent = Some(value),
            other => {
                return Err(ErrorXmlError::MalformedXml {
                    position: key_start,
                    detail: format!("unknown attribute {other:?}"),
                })
            }
        }
    }
    // Content runs until the matching closing tag; a further '<' that is
    // not the closer means nesting.
    let content_start = i;
    let closer: Vec<char> = format!("</{name}>").chars().collect();
    loop {
        if i >= chars.len() {
            return Err(ErrorXmlError::MalformedXml {
                position: start,
                detail: format!("missing closing tag </{name}>"),
            });
        }
        if chars[i] == '<' {
            if chars[i..].starts_with(&closer) {
                break;
            }
            if i + 1 < chars.len() && chars[i + 1] == '/' {
                return Err(ErrorXmlError::MalformedXml {
                    position: i,
                    detail: format!("mismatched closing tag (expected </{name}>)"),
                });
            }
            return Err(ErrorXmlError::NestedTags { position: i });
        }
        i += 1;
    }
    let content: String = chars[content_start..i].iter().collect();
    let content = unescape(&content, content_start)?;
    Ok(RawTag {
        name,
        original,
        id,
        parent,
        content,
        position: start,
        after: i + closer.len(),
    })
}

/// Parses a `modified` sentence containing attributed error tags into an
/// [`ErrorGraph`]. The base text is the sentence with every tag replaced
/// by its `original` attribute value.
///
/// A `parent` attribute referring to a non-existent node is repaired:
/// the edge is dropped, the node kept as a root, and a warning recorded.
pub fn parse_error_xml(modified: &str) -> Result<ErrorGraph, ErrorXmlError> {
    let chars: Vec<char> = modified.chars().collect();
    let mut base = String::new();
    let mut base_len = 0usize;
    let mut nodes: Vec<ErrorNode> = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    let mut i = 0usize;
    let mut last_close: Option<usize> = None; // char pos just past a closing tag

    while i < chars.len() {
        if chars[i] != '<' {
            if chars[i] == '&' {
                let rest: String = chars[i..].iter().take(5).collect();
                if rest.starts_with("&amp;") {
                    base.push('&');
                    base_len += 1;
                    i += 5;
                    continue;
                } else if rest.starts_with("&lt;") {
                    base.push('<');
                    base_len += 1;
                    i += 4;
                    continue;
                } else if rest.starts_with("&gt;") {
                    base.push('>');
                    base_len += 1;
                    i += 4;
                    continue;
                } else {
                    return Err(ErrorXmlError::MalformedXml {
                        position: i,
                        detail: "unknown entity".into(),
                    });
                }
            }
            base.push(chars[i]);
            base_len += 1;
            i += 1;
            continue;
        }
        if let Some(close_pos) = last_close {
            // Two tags back to back with nothing between them.
            if close_pos == i {
                return Err(ErrorXmlError::MissingSpaceAfterClosingTag { position: i });
            }
        }
        let tag = scan_tag(&chars, i)?;
        let error_type = error_type_from_tag(&tag.name).map_err(|_| ErrorXmlError::MalformedXml {
            position: tag.position,
            detail: format!("unknown error tag {:?}", tag.name),
        })?;
        let id = tag.id.ok_or_else(|| ErrorXmlError::MalformedXml {
            position: tag.position,
            detail: "missing id attribute".into(),
        })?;
        if id_number(&id) == u64::MAX {
            return Err(ErrorXmlError::MalformedXml {
                position: tag.position,
                detail: format!("id {id:?} is not of the form E<integer>"),
            });
        }
        let original = tag.original.ok_or_else(|| ErrorXmlError::MalformedXml {
            position: tag.position,
            detail: "missing original attribute".into(),
        })?;
        if !seen_ids.insert(id.clone()) {
            return Err(ErrorXmlError::DuplicateId(id));
        }
        if tag.parent.as_deref() == Some(id.as_str()) {
            return Err(ErrorXmlError::SelfParent(id));
        }
        let original_len = original.chars().count();
        nodes.push(ErrorNode {
            id,
            original: original.clone(),
            replacement: tag.content,
            error_type,
            parent: tag.parent,
            start: base_len,
            end: base_len + original_len,
        });
        base.push_str(&original);
        base_len += original_len;
        last_close = Some(tag.after);
        i = tag.after;
    }

    let mut warnings = Vec::new();
    for node in &nodes {
        if node.replacement.to_lowercase() == node.original.to_lowercase() {
            warnings.push(format!(
                "node {} replacement equals its original text",
                node.id
            ));
        }
    }
    // Repair dangling parents: drop the edge, keep the node as a root.
    let ids: HashSet<String> = nodes.iter().map(|n| n.id.clone()).collect();
    let mut edges = Vec::new();
    for node in &mut nodes {
        if let Some(parent) = node.parent.clone() {
            if ids.contains(&parent) {
                edges.push((parent, node.id.clone()));
            } else {
                warnings.push(format!(
                    "node {} referenced missing parent {parent}; edge dropped",
                    node.id
                ));
                node.parent = None;
            }
        }
    }
    Ok(ErrorGraph {
        base_text: base,
        nodes,
        edges,
        warnings,
    })
}

/// Renders a graph back to the XML dialect: attributes in the order
/// (original, id, parent), double-quoted, with `&`, `<`, `>` escaped.
pub fn render_error_xml(g: &ErrorGraph) -> String {
    let chars: Vec<char> = g.base_text.chars().collect();
    let mut out = String::new();
    let mut cursor = 0usize;
    for node in &g.nodes {
        out.extend(&chars[cursor..node.start]);
        let name = error_type_to_tag(node.error_type, TagStyle::PromptAlias)
            .expect("taggable node type");
        out.push('<');
        out.push_str(name);
        out.push_str(&format!(" original=\"{}\"", escape(&node.original)));
        out.push_str(&format!(" id=\"{}\"", node.id));
        if let Some(p) = &node.parent {
            out.push_str(&format!(" parent=\"{p}\""));
        }
        out.push('>');
        out.push_str(&escape(&node.replacement));
        out.push_str(&format!("</{name}>"));
        cursor = node.end;
    }
    out.extend(&chars[cursor..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::ErrorType;

    #[test]
    fn two_node_example() {
        let g = parse_error_xml(
            "<number original=\"Two\" id=\"E1\">nine</number> \
             <object original=\"apples\" id=\"E2\">bananas</object> on a mat",
        )
        .unwrap();
        assert_eq!(g.base_text, "Two apples on a mat");
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges.len(), 0);
        assert_eq!(g.nodes[0].replacement, "nine");
        assert_eq!(g.nodes[0].error_type, ErrorType::Number);
        assert_eq!((g.nodes[1].start, g.nodes[1].end), (4, 10));
        assert!(g.warnings.is_empty());
    }

    #[test]
    fn plain_sentence() {
        let g = parse_error_xml("just a plain sentence").unwrap();
        assert_eq!(g.base_text, "just a plain sentence");
        assert!(g.nodes.is_empty());
    }

    #[test]
    fn dangling_parent_repaired_with_warning() {
        let g = parse_error_xml("<object original=\"cat\" id=\"E1\" parent=\"E9\">dog</object> x")
            .unwrap();
        assert_eq!(g.edges.len(), 0);
        assert_eq!(g.nodes[0].parent, None);
        assert_eq!(g.warnings.len(), 1);
        assert!(g.warnings[0].contains("E9"));
    }

    #[test]
    fn duplicate_and_self_parent_rejected() {
        let err = parse_error_xml(
            "<object original=\"a\" id=\"E1\">b</object> <object original=\"c\" id=\"E1\">d</object>",
        )
        .unwrap_err();
        assert_eq!(err, ErrorXmlError::DuplicateId("E1".into()));

        let err =
            parse_error_xml("<object original=\"a\" id=\"E1\" parent=\"E1\">b</object> x").unwrap_err();
        assert_eq!(err, ErrorXmlError::SelfParent("E1".into()));
    }

    #[test]
    fn nested_tags_rejected() {
        let err = parse_error_xml(
            "<object original=\"a\" id=\"E1\"><attribute original=\"b\" id=\"E2\">c</attribute></object>",
        )
        .unwrap_err();
        assert!(matches!(err, ErrorXmlError::NestedTags { .. }));
    }

    #[test]
    fn adjacent_tags_need_space() {
        let err = parse_error_xml(
            "<attribute original=\"red\" id=\"E1\">blue</attribute><object original=\"cat\" id=\"E2\">dog</object>",
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ErrorXmlError::MissingSpaceAfterClosingTag { .. }
        ));
        // Punctuation directly after a closing tag is fine.
        parse_error_xml("<object original=\"a cat\" id=\"E1\">a table</object>. The end").unwrap();
    }

    #[test]
    fn multi_error_full_example_round_trips() {
        let src = "<number original=\"Two\" id=\"E1\">nine</number> \
                   <object original=\"apples\" id=\"E2\">bananas</object> \
                   <spatial_relation original=\"in front of\" id=\"E3\">on</spatial_relation> \
                   <object original=\"a cat\" id=\"E4\">a table</object>. The \
                   <object original=\"apples\" id=\"E5\" parent=\"E2\">bananas</object> are \
                   <named_entities_fact original=\"Fuji\" id=\"E6\">Cavendish</named_entities_fact>.";
        let g = parse_error_xml(src).unwrap();
        assert_eq!(
            g.base_text,
            "Two apples in front of a cat. The apples are Fuji."
        );
        assert_eq!(g.nodes.len(), 6);
        assert_eq!(g.edges, vec![("E2".to_string(), "E5".to_string())]);
        assert_eq!(render_error_xml(&g), src);
    }

    #[test]
    fn entities_round_trip() {
        let g = parse_error_xml(
            "<object original=\"salt &amp; pepper\" id=\"E1\">oil &amp; vinegar</object> here",
        )
        .unwrap();
        assert_eq!(g.base_text, "salt & pepper here");
        assert_eq!(g.nodes[0].replacement, "oil & vinegar");
        assert!(render_error_xml(&g).contains("&amp;"));
    }
}
