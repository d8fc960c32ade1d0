// Runs the two-stage detect-then-review pipeline against scripted
// backends, so the whole flow is reproducible without any model server.

use halledit::backend::ScriptedBackend;
use halledit::pipeline::{
    build_detector_prompt, build_reviewer_prompt, run_pipeline, FewShotBank, PipelineOptions,
};
use halledit::tagger::insert_tag;
use halledit::{ErrorType, Sample};

fn main() {
    let sample = Sample::new(
        "img://sofa",
        "There are three cats.",
        "Two cats are on the sofa.",
        Vec::new(),
    )
    .unwrap();
    let bank = FewShotBank::builtin();

    // Script the exact exchanges a live model would produce. The keys
    // are prompt hashes, so any drift in prompt construction shows up
    // as a missing script entry rather than a silent mismatch.
    let mut detector = ScriptedBackend::new();
    detector.script(&build_detector_prompt(&sample, &bank), "three, number");

    let z = insert_tag(&sample.description, "three", ErrorType::Number, 1).unwrap();
    let mut reviewer = ScriptedBackend::new();
    reviewer.script(
        &build_reviewer_prompt(&z, &sample.reference).unwrap(),
        "<number>three</number>: two",
    );

    let output = run_pipeline(
        &sample,
        &detector,
        &reviewer,
        &bank,
        &PipelineOptions::default(),
    )
    .unwrap();

    println!("input : {}", sample.description);
    println!("output: {}", output.final_tagged);
    for entry in &output.trace {
        println!("  [{}] {}", entry.stage, entry.note);
    }
    for warning in &output.warnings {
        println!("  warning: {warning}");
    }
}
