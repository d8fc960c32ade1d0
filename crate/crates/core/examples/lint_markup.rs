// Runs the rule-based linter over a few error-insertion outputs, good
// and bad, and prints each finding.

use halledit::validator::validate;

fn main() {
    let cases = [
        (
            "A dog sits on the mat.",
            "A <object original=\"dog\" id=\"E1\">cat</object> sits \
             <spatial_relation original=\"on\" id=\"E2\">under</spatial_relation> the mat.",
        ),
        // article replaced by "one": a semantically equivalent swap
        ("a cat", "<number original=\"a\" id=\"E1\">one</number> cat"),
        // the tag repeats unchanged words of the original
        (
            "To the left of the box.",
            "<spatial_relation original=\"To the left\" id=\"E1\">To the right</spatial_relation> of the box.",
        ),
        // one occurrence tagged, the other left alone
        (
            "The red car and the red bike.",
            "The <attribute original=\"red\" id=\"E1\">blue</attribute> car and the red bike.",
        ),
    ];

    for (original, xml) in cases {
        println!("original: {original}");
        println!("markup  : {xml}");
        let violations = validate(original, xml);
        if violations.is_empty() {
            println!("  clean\n");
            continue;
        }
        for v in violations {
            println!(
                "  {:?} [{}..{}] {:?}: {}",
                v.rule_id, v.start, v.end, v.severity, v.message
            );
        }
        println!();
    }
}
