//! Scoring: exact-match detection P/R/F1, embedding-based span F1,
//! sentence-level image-text similarity scores, and binary
//! classification metrics.

mod embed;

pub use embed::{EmbedError, Embedder, HashEmbedder};

use crate::annotation::{ErrorType, Span};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero-norm vector has no cosine")]
    ZeroNormVector,
    #[error(transparent)]
    Embedder(#[from] EmbedError),
    #[error("prediction and gold lists differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
}

/// Precision, recall, and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        Prf {
            precision,
            recall,
            f1: harmonic_f1(precision, recall),
        }
    }

    pub const PERFECT: Prf = Prf {
        precision: 1.0,
        recall: 1.0,
        f1: 1.0,
    };
}

/// `2pr/(p+r)`, zero when both are zero.
pub fn harmonic_f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Cosine similarity of two equal-dimension, nonzero vectors.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::DimensionMismatch(a.len(), b.len()));
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        dot += *x as f64 * *y as f64;
        na += (*x as f64).powi(2);
        nb += (*y as f64).powi(2);
    }
    if na == 0.0 || nb == 0.0 {
        return Err(MetricError::ZeroNormVector);
    }
    // Guard against rounding pushing identical vectors past ±1.
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

fn normalize_text(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Exact-match detection metric over (span text, error type) pairs.
///
/// A prediction matches an unconsumed gold pair iff the texts are equal
/// after whitespace normalization and case folding and the types are
/// equal; matching is one-to-one, greedy in gold order. Empty prediction
/// and gold both empty scores 1 across the board.
pub fn detection_prf(pred: &[(String, ErrorType)], gold: &[(String, ErrorType)]) -> Prf {
    if pred.is_empty() && gold.is_empty() {
        return Prf::PERFECT;
    }
    let mut consumed = vec![false; pred.len()];
    let mut matches = 0usize;
    for (g_text, g_type) in gold {
        let g_norm = normalize_text(g_text);
        for (i, (p_text, p_type)) in pred.iter().enumerate() {
            if !consumed[i] && p_type == g_type && normalize_text(p_text) == g_norm {
                consumed[i] = true;
                matches += 1;
                break;
            }
        }
    }
    let p = if pred.is_empty() {
        0.0
    } else {
        matches as f64 / pred.len() as f64
    };
    let r = if gold.is_empty() {
        0.0
    } else {
        matches as f64 / gold.len() as f64
    };
    Prf::new(p, r)
}

/// A predicted span with an optional suggested edit. When an edit is
/// present its replacement is the text scored against the gold span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictedSpan {
    pub span: Span,
    pub edit: Option<String>,
}

impl PredictedSpan {
    pub fn detected(span: Span) -> Self {
        PredictedSpan { span, edit: None }
    }

    fn scored_text(&self) -> &str {
        self.edit.as_deref().unwrap_or(&self.span.text)
    }
}

/// Scoring granularity for [`span_f1_with_unit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpanUnit {
    /// One item per annotated span.
    #[default]
    Span,
    /// One item per word inside each span.
    Word,
}

/// Embedding-similarity span F1 (BERT-F1 / CLIP-F1 depending on the
/// embedder supplied), at span granularity.
pub fn span_f1(
    pred: &[PredictedSpan],
    gold: &[Span],
    emb: &dyn Embedder,
) -> Result<Prf, MetricError> {
    span_f1_with_unit(pred, gold, emb, SpanUnit::Span)
}

fn overlap(a: &Span, b: &Span) -> usize {
    let lo = a.start.max(b.start);
    let hi = a.end.min(b.end);
    hi.saturating_sub(lo)
}

fn explode_words(span: &Span) -> Vec<Span> {
    let mut out = Vec::new();
    let chars: Vec<char> = span.text.chars().collect();
    let mut i = 0usize;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        let word: String = chars[start..i].iter().collect();
        out.push(Span {
            start: span.start + start,
            end: span.start + i,
            text: word,
            error_type: span.error_type,
        });
    }
    out
}

/// Span F1 with a selectable scoring unit.
///
/// Prediction and gold items are aligned one-to-one by maximal char
/// overlap (embedding similarity breaks ties); the numerator sums
/// clamped cosines over aligned pairs, the denominators count predicted
/// and gold items respectively.
pub fn span_f1_with_unit(
    pred: &[PredictedSpan],
    gold: &[Span],
    emb: &dyn Embedder,
    unit: SpanUnit,
) -> Result<Prf, MetricError> {
    let (pred_items, gold_items): (Vec<(Span, String)>, Vec<Span>) = match unit {
        SpanUnit::Span => (
            pred.iter()
                .map(|p| (p.span.clone(), p.scored_text().to_string()))
                .collect(),
            gold.to_vec(),
        ),
        SpanUnit::Word => (
            pred.iter()
                .flat_map(|p| {
                    explode_words(&p.span)
                        .into_iter()
                        .map(|w| {
                            let t = w.text.clone();
                            (w, t)
                        })
                        .collect::<Vec<_>>()
                })
                .collect(),
            gold.iter().flat_map(explode_words).collect(),
        ),
    };
    if pred_items.is_empty() && gold_items.is_empty() {
        return Ok(Prf::PERFECT);
    }
    if pred_items.is_empty() || gold_items.is_empty() {
        return Ok(Prf::new(0.0, 0.0));
    }
    // Candidate pairs with positive char overlap, their similarity
    // computed up front.
    let mut pairs: Vec<(usize, usize, usize, f64)> = Vec::new();
    for (pi, (p_span, p_text)) in pred_items.iter().enumerate() {
        for (gi, g_span) in gold_items.iter().enumerate() {
            let ov = overlap(p_span, g_span);
            if ov == 0 {
                continue;
            }
            let pv = emb.embed(p_text)?;
            let gv = emb.embed(&g_span.text)?;
            let sim = cosine(&pv, &gv)?.max(0.0);
            pairs.push((pi, gi, ov, sim));
        }
    }
    pairs.sort_by(|a, b| {
        b.2.cmp(&a.2)
            .then(b.3.partial_cmp(&a.3).expect("finite sims"))
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    let mut pred_used = vec![false; pred_items.len()];
    let mut gold_used = vec![false; gold_items.len()];
    let mut numerator = 0.0f64;
    for (pi, gi, _, sim) in pairs {
        if pred_used[pi] || gold_used[gi] {
            continue;
        }
        pred_used[pi] = true;
        gold_used[gi] = true;
        numerator += sim;
    }
    let p = numerator / pred_items.len() as f64;
    let r = numerator / gold_items.len() as f64;
    Ok(Prf::new(p, r))
}

/// Rescale factor and clamping for the sentence-level scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub rescale_w: f64,
    pub clamp_negative: bool,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            rescale_w: 2.5,
            clamp_negative: true,
        }
    }
}

fn rescaled(cos: f64, cfg: &ScoreConfig) -> f64 {
    let c = if cfg.clamp_negative { cos.max(0.0) } else { cos };
    cfg.rescale_w * c
}

/// Sentence-level similarity: the mean of `w·max(cos(t,v),0)` and
/// `w·max(cos(t,r),0)` for text, image, and reference embeddings.
pub fn clip_s(
    t_emb: &[f32],
    v_emb: &[f32],
    r_emb: &[f32],
    cfg: &ScoreConfig,
) -> Result<f64, MetricError> {
    let sv = rescaled(cosine(t_emb, v_emb)?, cfg);
    let sr = rescaled(cosine(t_emb, r_emb)?, cfg);
    Ok((sv + sr) / 2.0)
}

const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "no.", "etc.", "e.g.", "i.e.", "vs.", "fig.",
    "approx.",
];

fn ends_with_abbreviation(sentence: &str) -> bool {
    let last = match sentence.split_whitespace().last() {
        Some(w) => w.to_lowercase(),
        None => return false,
    };
    if ABBREVIATIONS.contains(&last.as_str()) {
        return true;
    }
    // Single-letter initials like "F." stay attached to their sentence.
    let mut cs = last.chars();
    matches!((cs.next(), cs.next(), cs.next()), (Some(c), Some('.'), None) if c.is_alphabetic())
}

/// Splits on `.`, `!`, `?` followed by whitespace, keeping the
/// terminator, with a small abbreviation guard list.
pub fn split_sentences(paragraph: &str) -> Vec<String> {
    let chars: Vec<char> = paragraph.chars().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        if (c == '.' || c == '!' || c == '?')
            && (i + 1 >= chars.len() || chars[i + 1].is_whitespace())
        {
            let candidate: String = chars[start..=i].iter().collect();
            if c == '.' && ends_with_abbreviation(&candidate) {
                i += 1;
                continue;
            }
            let trimmed = candidate.trim();
            if !trimmed.is_empty() {
                out.push(trimmed.to_string());
            }
            start = i + 1;
        }
        i += 1;
    }
    let tail: String = chars[start..].iter().collect();
    let tail = tail.trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

/// Scores a paragraph sentence-by-sentence and averages: each sentence
/// is embedded on its own (keeping inputs short), scored via [`clip_s`]
/// against the image and the mean over references, then the per-sentence
/// scores are averaged arithmetically.
pub fn paragraph_score(
    paragraph: &str,
    image_ref: &str,
    refs: &[String],
    emb: &dyn Embedder,
    cfg: &ScoreConfig,
) -> Result<f64, MetricError> {
    let sentences = split_sentences(paragraph);
    if sentences.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let v = emb.embed_image(image_ref)?;
    let ref_embs: Vec<Vec<f32>> = refs.iter().map(|r| emb.embed(r)).collect::<Result<_, _>>()?;
    let mut total = 0.0f64;
    for sentence in &sentences {
        let t = emb.embed(sentence)?;
        let sv = rescaled(cosine(&t, &v)?, cfg);
        let score = if ref_embs.is_empty() {
            sv
        } else {
            let mut sr = 0.0f64;
            for r in &ref_embs {
                sr += rescaled(cosine(&t, r)?, cfg);
            }
            (sv + sr / ref_embs.len() as f64) / 2.0
        };
        total += score;
    }
    Ok(total / sentences.len() as f64)
}

/// Confusion-matrix metrics for binary hallucination labels
/// (`true` = hallucinatory).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    pub hallucinatory: Prf,
    pub non_hallucinatory: Prf,
    /// For binary single-label classification this equals accuracy.
    pub micro_f1: f64,
    /// Mean of the two per-class F1 scores.
    pub macro_f1: f64,
}

pub fn binary_detection_metrics(
    preds: &[bool],
    golds: &[bool],
) -> Result<BinaryMetrics, MetricError> {
    if preds.len() != golds.len() {
        return Err(MetricError::LengthMismatch(preds.len(), golds.len()));
    }
    if preds.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut tn = 0usize;
    let mut fn_ = 0usize;
    for (&p, &g) in preds.iter().zip(golds) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let pos = Prf::new(ratio(tp, tp + fp), ratio(tp, tp + fn_));
    let neg = Prf::new(ratio(tn, tn + fn_), ratio(tn, tn + fp));
    let accuracy = (tp + tn) as f64 / preds.len() as f64;
    Ok(BinaryMetrics {
        accuracy,
        hallucinatory: pos,
        non_hallucinatory: neg,
        micro_f1: accuracy,
        macro_f1: (pos.f1 + neg.f1) / 2.0,
    })
}

/// Per-corpus metric report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub detection: Prf,
    pub bert_f1: Prf,
    pub clip_f1: Prf,
    pub clip_s: f64,
    pub pac_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binary: Option<BinaryMetrics>,
}

/// One sample's worth of evaluation input.
#[derive(Debug, Clone)]
pub struct EvalItem {
    /// The description being judged (the span offsets index into it).
    pub candidate: String,
    pub image_ref: String,
    pub references: Vec<String>,
    pub pred: Vec<PredictedSpan>,
    pub gold: Vec<Span>,
}

/// Embedder slots for [`evaluate_corpus`]: a text-similarity embedder
/// for the BERT-style span score, an image-text embedder for the
/// CLIP-style scores, and an optional separately-tuned embedder for the
/// PAC-style score (falls back to the CLIP slot).
pub struct EmbedderSlots<'a> {
    pub text: &'a dyn Embedder,
    pub clip: &'a dyn Embedder,
    pub pac: Option<&'a dyn Embedder>,
}

/// Scores a corpus: span-level detection and similarity F1s, averaged
/// sentence-wise caption scores, and corpus-level binary detection.
/// Per-sample precision/recall are macro-averaged; the reported F1 is the
/// harmonic mean of the averages.
pub fn evaluate_corpus(
    items: &[EvalItem],
    slots: &EmbedderSlots,
    cfg: &ScoreConfig,
) -> Result<EvalReport, MetricError> {
    if items.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let mut detection = MeanPrf::default();
    let mut bert = MeanPrf::default();
    let mut clip = MeanPrf::default();
    let mut clip_s_sum = 0.0;
    let mut pac_s_sum = 0.0;
    let mut pred_flags = Vec::with_capacity(items.len());
    let mut gold_flags = Vec::with_capacity(items.len());
    for item in items {
        let pred_pairs: Vec<(String, ErrorType)> = item
            .pred
            .iter()
            .map(|p| (p.span.text.clone(), p.span.error_type))
            .collect();
        let gold_pairs: Vec<(String, ErrorType)> = item
            .gold
            .iter()
            .map(|g| (g.text.clone(), g.error_type))
            .collect();
        detection.add(&detection_prf(&pred_pairs, &gold_pairs));
        bert.add(&span_f1(&item.pred, &item.gold, slots.text)?);
        clip.add(&span_f1(&item.pred, &item.gold, slots.clip)?);
        clip_s_sum += paragraph_score(
            &item.candidate,
            &item.image_ref,
            &item.references,
            slots.clip,
            cfg,
        )?;
        pac_s_sum += paragraph_score(
            &item.candidate,
            &item.image_ref,
            &item.references,
            slots.pac.unwrap_or(slots.clip),
            cfg,
        )?;
        pred_flags.push(!item.pred.is_empty());
        gold_flags.push(!item.gold.is_empty());
    }
    let n = items.len() as f64;
    Ok(EvalReport {
        detection: detection.mean(),
        bert_f1: bert.mean(),
        clip_f1: clip.mean(),
        clip_s: clip_s_sum / n,
        pac_s: pac_s_sum / n,
        binary: Some(binary_detection_metrics(&pred_flags, &gold_flags)?),
    })
}

#[derive(Default)]
struct MeanPrf {
    p: f64,
    r: f64,
    n: usize,
}

impl MeanPrf {
    fn add(&mut self, prf: &Prf) {
        self.p += prf.precision;
        self.r += prf.recall;
        self.n += 1;
    }

    fn mean(&self) -> Prf {
        let n = self.n.max(1) as f64;
        Prf::new(self.p / n, self.r / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::ErrorType;

    fn pair(t: &str, e: ErrorType) -> (String, ErrorType) {
        (t.to_string(), e)
    }

    #[test]
    fn evaluate_corpus_perfect_on_identity() {
        let gold = vec![Span::new(0, 5, "three", ErrorType::Number)];
        let items = vec![EvalItem {
            candidate: "three cats sit here.".to_string(),
            image_ref: "img://1".to_string(),
            references: vec!["Two cats sit here.".to_string()],
            pred: gold.iter().cloned().map(PredictedSpan::detected).collect(),
            gold,
        }];
        let emb = HashEmbedder::default();
        let slots = EmbedderSlots {
            text: &emb,
            clip: &emb,
            pac: None,
        };
        let report = evaluate_corpus(&items, &slots, &ScoreConfig::default()).unwrap();
        assert_eq!(report.detection.f1, 1.0);
        assert_eq!(report.bert_f1.f1, 1.0);
        assert_eq!(report.clip_f1.f1, 1.0);
        assert_eq!(report.binary.as_ref().unwrap().accuracy, 1.0);
        assert!(report.clip_s.is_finite());
        assert_eq!(report.clip_s, report.pac_s);
    }

    #[test]
    fn evaluate_corpus_rejects_empty() {
        let emb = HashEmbedder::default();
        let slots = EmbedderSlots {
            text: &emb,
            clip: &emb,
            pac: None,
        };
        assert!(matches!(
            evaluate_corpus(&[], &slots, &ScoreConfig::default()),
            Err(MetricError::EmptyInput)
        ));
    }

    #[test]
    fn harmonic_f1_values() {
        assert_eq!(harmonic_f1(1.0, 1.0), 1.0);
        assert_eq!(harmonic_f1(1.0, 0.0), 0.0);
        assert!((harmonic_f1(1.0, 0.5) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn detection_identity_and_partial() {
        let gold = vec![
            pair("three", ErrorType::Number),
            pair("apples", ErrorType::Object),
        ];
        let p = detection_prf(&gold, &gold);
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));

        let pred = vec![pair("three", ErrorType::Number)];
        let p = detection_prf(&pred, &gold);
        assert_eq!(p.precision, 1.0);
        assert_eq!(p.recall, 0.5);
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn detection_type_sensitive_and_empty() {
        let gold = vec![pair("three", ErrorType::Number)];
        let pred = vec![pair("three", ErrorType::Object)];
        let p = detection_prf(&pred, &gold);
        assert_eq!(p.f1, 0.0);
        assert_eq!(detection_prf(&[], &[]), Prf::PERFECT);
        assert_eq!(detection_prf(&[], &gold).precision, 0.0);
    }

    #[test]
    fn detection_swap_symmetry() {
        let a = vec![pair("x", ErrorType::Object), pair("y", ErrorType::Text)];
        let b = vec![pair("x", ErrorType::Object)];
        assert_eq!(detection_prf(&a, &b).precision, detection_prf(&b, &a).recall);
    }

    #[test]
    fn detection_normalizes_whitespace_and_case() {
        let gold = vec![pair("John  F. Kennedy", ErrorType::Fact)];
        let pred = vec![pair("john f. kennedy", ErrorType::Fact)];
        assert_eq!(detection_prf(&pred, &gold).f1, 1.0);
    }

    #[test]
    fn span_f1_identity() {
        let emb = HashEmbedder::default();
        let gold = vec![Span::new(0, 5, "three", ErrorType::Number)];
        let pred = vec![PredictedSpan::detected(gold[0].clone())];
        let p = span_f1(&pred, &gold, &emb).unwrap();
        assert!((p.f1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn span_f1_empty_pred() {
        let emb = HashEmbedder::default();
        let gold = vec![Span::new(0, 5, "three", ErrorType::Number)];
        let p = span_f1(&[], &gold, &emb).unwrap();
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 0.0, 0.0));
        assert_eq!(span_f1(&[], &[], &emb).unwrap(), Prf::PERFECT);
    }

    /// Embedder whose similarity is controlled: vectors are 2-d with a
    /// fixed angle table per text.
    struct TableEmbedder;
    impl Embedder for TableEmbedder {
        fn name(&self) -> &str {
            "table"
        }
        fn dim(&self) -> usize {
            2
        }
        fn embed(&self, text: &str) -> Result<Vec<f32>, EmbedError> {
            // cos("pred-a", "gold-a") = 0.8 by construction.
            let angle: f32 = match text {
                "gold-a" => 0.0,
                "pred-a" => 0.8f32.acos(),
                other => (other.len() as f32) * 0.7,
            };
            Ok(vec![angle.cos(), angle.sin()])
        }
    }

    #[test]
    fn span_f1_hand_case() {
        // 2 gold, 1 aligned pred with cos = 0.8 → P = 0.8, R = 0.4.
        let gold = vec![
            Span::new(0, 6, "gold-a", ErrorType::Object),
            Span::new(10, 16, "gold-b", ErrorType::Object),
        ];
        let pred = vec![PredictedSpan::detected(Span::new(
            0,
            6,
            "pred-a",
            ErrorType::Object,
        ))];
        let p = span_f1(&pred, &gold, &TableEmbedder).unwrap();
        assert!((p.precision - 0.8).abs() < 1e-6);
        assert!((p.recall - 0.4).abs() < 1e-6);
        assert!((p.f1 - harmonic_f1(0.8, 0.4)).abs() < 1e-6);
    }

    #[test]
    fn clip_s_formula() {
        let cfg = ScoreConfig::default();
        // unit vectors with known cosines to t = (1, 0)
        let t = vec![1.0f32, 0.0];
        let at = |c: f32| vec![c, (1.0 - c * c).sqrt()];
        let s = clip_s(&t, &at(0.4), &at(0.4), &cfg).unwrap();
        assert!((s - 1.0).abs() < 1e-6);
        let s = clip_s(&t, &at(-0.3), &at(0.0), &cfg).unwrap();
        assert!((s - 0.0).abs() < 1e-6);
        let s = clip_s(&t, &t, &t, &cfg).unwrap();
        assert!((s - cfg.rescale_w).abs() < 1e-9);
    }

    #[test]
    fn clip_s_errors() {
        let cfg = ScoreConfig::default();
        assert!(matches!(
            clip_s(&[1.0, 0.0], &[1.0], &[1.0, 0.0], &cfg),
            Err(MetricError::DimensionMismatch(..))
        ));
        assert!(matches!(
            clip_s(&[0.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], &cfg),
            Err(MetricError::ZeroNormVector)
        ));
    }

    #[test]
    fn sentence_splitting() {
        assert_eq!(
            split_sentences("One cat. Two dogs! Three? Yes"),
            vec!["One cat.", "Two dogs!", "Three?", "Yes"]
        );
        assert_eq!(
            split_sentences("The John F. Kennedy Center is big. It is white."),
            vec!["The John F. Kennedy Center is big.", "It is white."]
        );
        assert_eq!(
            split_sentences("See Fig. 3 for details."),
            vec!["See Fig. 3 for details."]
        );
    }

    #[test]
    fn paragraph_score_matches_per_sentence_mean() {
        let emb = HashEmbedder::default();
        let cfg = ScoreConfig::default();
        let refs = vec!["a reference caption".to_string()];
        let text = "One cat sits. Two dogs run. Three birds fly.";
        let whole = paragraph_score(text, "img-1", &refs, &emb, &cfg).unwrap();
        let per: Vec<f64> = split_sentences(text)
            .iter()
            .map(|s| paragraph_score(s, "img-1", &refs, &emb, &cfg).unwrap())
            .collect();
        let mean = per.iter().sum::<f64>() / per.len() as f64;
        assert!((whole - mean).abs() < 1e-9);
    }

    #[test]
    fn binary_metrics_cases() {
        let all_true = vec![true, false, true, false];
        let m = binary_detection_metrics(&all_true, &all_true).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.macro_f1, 1.0);

        // all-positive predictions on balanced gold
        let preds = vec![true, true, true, true];
        let golds = vec![true, false, true, false];
        let m = binary_detection_metrics(&preds, &golds).unwrap();
        assert_eq!(m.hallucinatory.precision, 0.5);
        assert_eq!(m.hallucinatory.recall, 1.0);

        // perfect anti-prediction
        let anti: Vec<bool> = golds.iter().map(|b| !b).collect();
        let m = binary_detection_metrics(&anti, &golds).unwrap();
        assert_eq!(m.accuracy, 0.0);

        assert!(matches!(
            binary_detection_metrics(&[true], &[]),
            Err(MetricError::LengthMismatch(..))
        ));
        assert!(matches!(
            binary_detection_metrics(&[], &[]),
            Err(MetricError::EmptyInput)
        ));
    }

    #[test]
    fn scale_invariance() {
        let a = vec![0.3f32, -0.4, 0.5];
        let b = vec![0.1f32, 0.9, 0.2];
        let scaled: Vec<f32> = a.iter().map(|x| x * 37.0).collect();
        let c1 = cosine(&a, &b).unwrap();
        let c2 = cosine(&scaled, &b).unwrap();
        assert!((c1 - c2).abs() < 1e-6);
    }
}
