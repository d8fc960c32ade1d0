// Structural statistics over a small corpus of error graphs: node,
// edge, and connected-component averages.

use halledit::synthgraph::{graph_stats, parse_error_xml};

fn main() {
    let corpus = [
        "A <object original=\"dog\" id=\"E1\">cat</object> and its \
         <object original=\"dog\" id=\"E2\" parent=\"E1\">cat</object> toy.",
        "<attribute original=\"Red\" id=\"E1\">Blue</attribute> sky over \
         <number original=\"two\" id=\"E2\">five</number> hills.",
        "A sign says <text original=\"'Open'\" id=\"E1\">'Closed'</text>.",
    ];
    let graphs: Vec<_> = corpus
        .iter()
        .map(|xml| parse_error_xml(xml).unwrap())
        .collect();
    let stats = graph_stats(&graphs);

    println!("total graphs : {}", stats.total_graphs);
    println!("total nodes  : {}", stats.total_nodes);
    let fmt = |v: Option<f64>| v.map_or("-".into(), |x| format!("{x:.3}"));
    println!("avg components per graph : {}", fmt(stats.avg_components));
    println!("avg nodes per graph      : {}", fmt(stats.avg_nodes));
    println!("avg edges per graph      : {}", fmt(stats.avg_edges));
    println!("avg degree               : {}", fmt(stats.avg_degree));
}
