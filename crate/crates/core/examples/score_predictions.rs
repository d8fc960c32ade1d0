// Scores predicted hallucination spans against gold annotations with
// the deterministic hash embedder: detection F1, embedding-similarity
// span F1s, and sentence-averaged caption scores.

use halledit::annotation::{ErrorType, Span};
use halledit::metrics::{
    evaluate_corpus, EmbedderSlots, EvalItem, HashEmbedder, PredictedSpan, ScoreConfig,
};

fn main() {
    let candidate = "There are three cats on the sofa. The sofa is red.";
    let gold = vec![
        Span::new(10, 15, "three", ErrorType::Number),
        Span::new(45, 48, "red", ErrorType::Attribute),
    ];
    // the model found the number error (and proposed a fix) but missed
    // the attribute
    let pred = vec![PredictedSpan {
        span: gold[0].clone(),
        edit: Some("two".to_string()),
    }];

    let items = vec![EvalItem {
        candidate: candidate.to_string(),
        image_ref: "img://sofa".to_string(),
        references: vec!["Two cats sit on a blue sofa.".to_string()],
        pred,
        gold,
    }];

    let embedder = HashEmbedder::default();
    let slots = EmbedderSlots {
        text: &embedder,
        clip: &embedder,
        pac: None,
    };
    let report = evaluate_corpus(&items, &slots, &ScoreConfig::default()).unwrap();

    println!(
        "detection  P {:.3} R {:.3} F1 {:.3}",
        report.detection.precision, report.detection.recall, report.detection.f1
    );
    println!("bert_f1    {:.3}", report.bert_f1.f1);
    println!("clip_f1    {:.3}", report.clip_f1.f1);
    println!("clip_s     {:.3}", report.clip_s);
    println!("pac_s      {:.3}", report.pac_s);
    if let Some(binary) = &report.binary {
        println!("binary acc {:.3}", binary.accuracy);
    }
}
