//! Parse a network document and report every invariant violation.
//!
//! cargo run --example validate_network [path/to/network.json]

use shs_lab::grid::{parse_network_unchecked, validate};

fn main() -> shs_lab::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/six_bus.json").to_string());
    let model = parse_network_unchecked(&std::fs::read_to_string(&path)?)?;
    println!(
        "{}: {} buses, {} lines, omega = {:.3} rad/s",
        model.name,
        model.buses.len(),
        model.lines.len(),
        model.omega_nom
    );
    println!("PV-B buses: {:?}", model.pvb_buses());

    let report = validate(&model);
    if report.is_empty() {
        println!("valid");
    } else {
        for v in &report.violations {
            println!("{} at {}: {}", v.kind, v.location, v.message);
        }
    }

    // the same network with a broken line shows what a failing report looks like
    let mut broken = model.clone();
    broken.lines[0].r = -1.0;
    broken.lines[1].to = 99;
    println!("after breaking two lines: {}", validate(&broken));
    Ok(())
}
