//! Random switching sequence, probed detection on every interval, and the
//! same run without a probe and with measurement noise.
//!
//! cargo run --release --example switching_experiment [seed]

use shs_lab::config::reference_config;
use shs_lab::pipeline;

fn main() -> shs_lab::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut cfg = reference_config();
    let model = cfg.load_network()?;
    let families = cfg.build_families(&model)?;
    let family = pipeline::target_family(&families, &cfg)?;
    let (design, _) = pipeline::design_probe(family, &cfg)?;
    let probe = pipeline::applied_probe(&design, &cfg);

    let out = pipeline::run(family, &design, &cfg, seed, probe)?;
    println!("true     {:?}", out.sequence.alphas);
    println!("detected {:?}", out.report.detected);
    println!("probe R = {:.4}: accuracy {:.3}", probe.magnitude, out.accuracy());

    cfg.experiment.noise_sigma = 0.1;
    let off = shs_lab::probing::ProbeSignal { magnitude: 0.0, ..probe };
    let noisy = pipeline::run(family, &design, &cfg, seed, off)?;
    println!("no probe, noise 0.1: accuracy {:.3}", noisy.accuracy());
    let noisy_probed = pipeline::run(family, &design, &cfg, seed, probe)?;
    println!("probe on, noise 0.1: accuracy {:.3}", noisy_probed.accuracy());
    Ok(())
}
