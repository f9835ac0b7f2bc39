//! Build the four-scenario family of the first segment and write it as JSON.
//!
//! cargo run --example build_family [out.json]

use shs_lab::io::{to_json_pretty, MatricesDoc};
use shs_lab::segmentation::reference_assignment;
use shs_lab::ssbuild::{build_family, prepare_segments, ContingencySpec};

fn main() -> shs_lab::Result<()> {
    let segments = prepare_segments(&shs_lab::grid::reference_network(), &reference_assignment())?;
    let family = build_family(&segments[0], &ContingencySpec::standard_set([1, 4], 1))?;
    println!("segment {}: n = {}, p = {}", family.segment_id, family.n(), family.p());
    let s0 = &family.scenarios[0];
    println!("states  {:?}", s0.state_labels);
    println!("inputs  {:?}", s0.input_labels);
    println!("outputs {:?}", s0.output_labels);
    for s in &family.scenarios {
        let changed = (0..s.n())
            .flat_map(|i| (0..s.n()).map(move |j| (i, j)))
            .filter(|&(i, j)| s.a[(i, j)] != s0.a[(i, j)])
            .count();
        println!("alpha_{} {:<28} {changed:>3} entries of A differ from normal operation", s.alpha, s.name);
    }
    if let Some(out) = std::env::args().nth(1) {
        std::fs::write(&out, to_json_pretty(&MatricesDoc::new("six_bus", &[family]))?)?;
        println!("wrote {out}");
    }
    Ok(())
}
