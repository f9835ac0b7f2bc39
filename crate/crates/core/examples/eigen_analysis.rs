//! Spectra of every scenario of the first segment.
//!
//! cargo run --example eigen_analysis

use shs_lab::experiment::eigen_report;
use shs_lab::segmentation::reference_assignment;
use shs_lab::ssbuild::{build_family, prepare_segments, ContingencySpec};

fn main() -> shs_lab::Result<()> {
    let segments = prepare_segments(&shs_lab::grid::reference_network(), &reference_assignment())?;
    let family = build_family(&segments[0], &ContingencySpec::standard_set([1, 4], 1))?;
    let report = eigen_report(&family)?;
    for s in &report.spectra {
        println!(
            "alpha_{} {} max Re = {:.4e} ({})",
            s.alpha,
            s.name,
            s.max_real,
            if s.stable { "stable" } else { "unstable" }
        );
        for (re, im) in s.eigenvalues.iter().filter(|(_, im)| *im >= 0.0) {
            println!("    {re:>14.4e} {im:>+14.4e}j");
        }
    }
    println!("all stable: {}, most damped: alpha_{}", report.all_stable, report.most_damped);
    Ok(())
}
