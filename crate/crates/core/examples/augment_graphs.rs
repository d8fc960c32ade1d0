// Parses an error-insertion output into a dependency graph, prunes it
// with a few different seeds, and prints the resulting training
// variants.

use halledit::synthgraph::{build_dag, parse_error_xml, prune, realize_variant};
use std::collections::BTreeSet;

fn main() {
    let modified = concat!(
        "<number original=\"Two\" id=\"E1\">nine</number> ",
        "<object original=\"apples\" id=\"E2\">bananas</object> in front of a cat. ",
        "The <object original=\"apples\" id=\"E3\" parent=\"E2\">bananas</object> are red."
    );
    let graph = parse_error_xml(modified).unwrap();
    println!("base text: {}", graph.base_text);
    println!("nodes    : {}", graph.nodes.len());
    println!("edges    : {:?}", graph.edges);

    let dag = build_dag(&graph);
    for seed in 0..4 {
        let removed = prune(&dag, 0.5, seed).unwrap();
        let kept: BTreeSet<String> = dag
            .nodes
            .iter()
            .map(|n| n.id.clone())
            .filter(|id| !removed.contains(id))
            .collect();
        let variant = realize_variant(&dag, &kept).unwrap();
        println!("\nseed {seed}: kept {kept:?}");
        println!("  input : {}", variant.input_text);
        println!("  target: {}", variant.target_tagged);
    }
}
