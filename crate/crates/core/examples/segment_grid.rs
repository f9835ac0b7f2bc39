//! Partition the bundled six-bus network into one segment per PV-B unit.
//!
//! cargo run --example segment_grid

use shs_lab::grid::reference_network;
use shs_lab::segmentation::{nearest_pvb_assignment, neighbor_sets, reference_assignment, segment_network};

fn main() -> shs_lab::Result<()> {
    let model = reference_network();
    let segments = segment_network(&model, &reference_assignment())?;
    for s in &segments {
        println!("segment {} (PV-B at bus {}, monitored bus {})", s.id, s.pvb_bus, s.monitored_bus);
        println!("  buses {:?}", s.bus_ids());
        for l in &s.internal_lines {
            println!("  line {}-{}: R = {} ohm, L = {:.3e} H", l.from, l.to, l.r, l.l);
        }
        for a in &s.aux_buses {
            println!(
                "  aux {} on bus {} (half of line to {}): R = {} ohm, L = {:.3e} H, peer {:?}",
                a.aux_id, a.attach_bus, a.far_bus, a.r, a.l, a.peer
            );
        }
    }
    println!("neighbor buses: {:?}", neighbor_sets(&segments));
    println!("nearest-PV-B assignment: {:?}", nearest_pvb_assignment(&model).segments());
    Ok(())
}
