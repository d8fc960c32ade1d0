// Round-trips a caption through the tagged-span codec, then marks a
// detected word and applies a correction.

use halledit::annotation::{Edit, ErrorType};
use halledit::tagger::{apply_edits, insert_tag, parse_tagged, render_tagged, strip_tags};

fn main() {
    let tagged = "There are <number>three</number> cats on the <object>sofa</object>.";
    let parsed = parse_tagged(tagged).unwrap();
    println!("plain text : {}", parsed.text);
    for span in &parsed.spans {
        println!(
            "  span [{}, {}) {:?} -> {:?}",
            span.start, span.end, span.text, span.error_type
        );
    }

    // render is the exact inverse of parse
    assert_eq!(render_tagged(&parsed), tagged);
    assert_eq!(strip_tags(tagged).unwrap(), parsed.text);

    // wrap the second occurrence of a word without touching anything else
    let description = "A cat watches a cat.";
    let z = insert_tag(description, "cat", ErrorType::Object, 2).unwrap();
    println!("tag insert : {}", z.raw);
    assert_eq!(strip_tags(&z.raw).unwrap(), description);

    // swap a hallucinated word for its correction; the original text
    // stays recoverable
    let edit = Edit::new(parsed.spans[0].clone(), "two").unwrap();
    let edited = apply_edits(&parsed, &[edit]).unwrap();
    println!("corrected  : {}", edited.tagged.raw);
    assert_eq!(edited.reverted(), parsed.text);
}
