//! Write a window trace and its manifest, then read both back and verify.
//!
//! cargo run --example artifacts [out_dir]

use std::fs::File;

use nalgebra::DVector;
use shs_lab::detection::MeasurementWindow;
use shs_lab::io::{manifest_path, read_trace_csv, write_trace_csv, RunManifest};
use shs_lab::linalg::{simulate, Signal};
use shs_lab::probing::{Channel, ProbeSignal};
use shs_lab::segmentation::reference_assignment;
use shs_lab::ssbuild::{build_family, prepare_segments, ContingencySpec};

fn main() -> shs_lab::Result<()> {
    let dir = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "artifacts".into()));
    std::fs::create_dir_all(&dir)?;
    let segments = prepare_segments(&shs_lab::grid::reference_network(), &reference_assignment())?;
    let family = build_family(&segments[0], &[ContingencySpec::Normal])?;
    let s = &family.scenarios[0];
    let sys = shs_lab::linalg::discretize_zoh(s, 1e-5)?;
    let probe = ProbeSignal { channel: Channel::Delta, magnitude: 0.5, tau0: 1e-3 };
    let u2 = DVector::zeros(sys.n_disturbances());
    let trace = simulate(
        &sys,
        &DVector::zeros(sys.n()),
        &Signal::Constant(probe.input(3)),
        &Signal::Constant(u2.clone()),
        100,
        false,
    )?;
    let window = MeasurementWindow { t_start: 0.0, ts: 1e-5, samples: trace.outputs, probe, u2: vec![u2; 101] };

    let path = dir.join("window.csv");
    write_trace_csv(File::create(&path)?, std::slice::from_ref(&window), &s.output_labels, &s.disturbance_labels)?;
    let mut manifest = RunManifest::start("artifacts example", serde_json::json!({ "ts": 1e-5, "steps": 100 }));
    manifest.output(&path)?;
    let manifest = manifest.finish(&manifest_path(&path))?;
    println!("wrote {} ({})", path.display(), manifest.outputs[0].sha256);

    let back = read_trace_csv(File::open(&path)?, &s.output_labels, &s.disturbance_labels, 1e-5, probe)?;
    let max_err = back[0].samples.iter().zip(&window.samples).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    println!("read back {} window(s), max deviation {max_err:e}", back.len());
    println!("manifest digests verify: {}", manifest.verify()?);
    Ok(())
}
