//! Design the magnitude-modulated probe for the first segment.
//!
//! cargo run --release --example design_probe

use shs_lab::pipeline::{REFERENCE_DELTA_MIN, REFERENCE_MU0, REFERENCE_MU1};
use shs_lab::probing::{design_mami, scan_delta, threshold, Channel, DEFAULT_MARGIN};
use shs_lab::segmentation::reference_assignment;
use shs_lab::ssbuild::{build_family, prepare_segments, ContingencySpec};

fn main() -> shs_lab::Result<()> {
    let segments = prepare_segments(&shs_lab::grid::reference_network(), &reference_assignment())?;
    let family = build_family(&segments[0], &ContingencySpec::standard_set([1, 4], 1))?;
    let (tau0, ts) = (0.01, 1e-6);

    let design = design_mami(&family, &family.nominal_equilibrium(), Channel::Delta, tau0, ts, DEFAULT_MARGIN)?;
    println!("mu0 = {:.4}  mu1 = {:.4}  delta_min = {:.4}", design.mu0, design.mu1, design.delta_min);
    println!("R0 = {:.6}  R = {:.6}  (margin {DEFAULT_MARGIN})", design.r0, design.r);

    let scan = scan_delta(&family, Channel::Delta, tau0, ts, false)?;
    for ((i, j), gap) in &scan.pairs {
        println!("  max gap alpha_{i} vs alpha_{j}: {gap:.3}");
    }
    for ch in [Channel::D, Channel::MA] {
        let s = scan_delta(&family, ch, tau0, ts, false)?;
        println!("on channel {ch:?}: delta_min = {:.4} at {:?}", s.delta_min, s.argmin_pair);
    }
    println!("published figures give R0 = {:.6}", threshold(REFERENCE_MU0, REFERENCE_MU1, REFERENCE_DELTA_MIN));
    Ok(())
}
