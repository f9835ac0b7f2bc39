//! Full six-bus pipeline: segment, build, analyze, design, run and score.
//!
//! cargo run --release --example reproduce [seeds] [out_dir]

use shs_lab::config::reference_config;
use shs_lab::io::{to_json_pretty, MatricesDoc};
use shs_lab::pipeline::{self, ReproReport};

fn main() -> shs_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    let seeds: Vec<u64> = (0..n).collect();
    let cfg = reference_config();
    let (report, families, outcomes) = pipeline::reproduce(&cfg, &seeds)?;

    println!("segment dimensions {:?}", report.dimensions);
    println!("all scenarios stable: {}", report.eigen.all_stable);
    let d = &report.design;
    println!(
        "delta_min = {:.3} (reference {}), R0 = {:.5}, R = {:.5}",
        d.delta_min, report.reference_delta_min, d.r0, d.r
    );
    println!("reference R0 = {:.5}", report.reference_r0);
    println!("probed accuracy   {:?} mean {:.3}", report.probed_accuracy, ReproReport::mean(&report.probed_accuracy));
    println!(
        "unprobed accuracy {:?} mean {:.3}",
        report.unprobed_accuracy,
        ReproReport::mean(&report.unprobed_accuracy)
    );

    if let Some(dir) = args.next() {
        let dir = std::path::PathBuf::from(dir);
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("matrices.json"), to_json_pretty(&MatricesDoc::new("six_bus", &families))?)?;
        std::fs::write(dir.join("repro.json"), to_json_pretty(&report)?)?;
        let family = pipeline::target_family(&families, &cfg)?;
        pipeline::write_run(&dir.join("run"), family, &outcomes[0])?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
