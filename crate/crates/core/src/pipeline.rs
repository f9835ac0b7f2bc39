//! End-to-end compositions of the stages: design a probe for a configured
//! family, run the switching experiment and write its artifacts.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::detection::DetectionReport;
use crate::error::{Error, Result};
use crate::experiment::{eigen_report, generate_sequence, run_experiment, EigenReport, ExperimentOutcome};
use crate::io::{to_json_pretty, write_sequence_csv, write_trace_csv};
use crate::probing::{design_mami, scan_delta, threshold, DeltaScan, ProbeSignal, ProbingDesign};
use crate::ssbuild::ScenarioFamily;

/// Published design figures, kept for side-by-side reporting.
pub const REFERENCE_MU0: f64 = 5.63;
pub const REFERENCE_MU1: f64 = 1.0;
pub const REFERENCE_DELTA_MIN: f64 = 112.15;
pub const REFERENCE_R: f64 = 0.101;

pub fn target_family<'a>(families: &'a [ScenarioFamily], cfg: &PipelineConfig) -> Result<&'a ScenarioFamily> {
    families
        .iter()
        .find(|f| f.segment_id == cfg.target_segment)
        .ok_or_else(|| Error::InvalidArgument(format!("no family for segment {}", cfg.target_segment)))
}

pub fn design_probe(family: &ScenarioFamily, cfg: &PipelineConfig) -> Result<(ProbingDesign, DeltaScan)> {
    let p = &cfg.probe;
    let eq = family.nominal_equilibrium();
    let mut design = design_mami(family, &eq, p.channel, p.tau0, p.ts, p.margin)?;
    let scan = scan_delta(family, p.channel, p.tau0, p.ts, p.per_component)?;
    if p.per_component {
        design = ProbingDesign::from_bounds(design.mu0, design.mu1, scan.delta_min, p.margin, p.channel, p.tau0, p.ts)?;
        design.argmin_pair = Some(scan.argmin_pair);
    }
    Ok((design, scan))
}

/// Probe actually applied: the designed one unless the config overrides the magnitude.
pub fn applied_probe(design: &ProbingDesign, cfg: &PipelineConfig) -> ProbeSignal {
    let mut s = design.signal();
    if let Some(m) = cfg.probe.magnitude {
        s.magnitude = m;
    }
    s
}

/// One configured experiment run.
pub fn run(
    family: &ScenarioFamily,
    design: &ProbingDesign,
    cfg: &PipelineConfig,
    seed: u64,
    probe: ProbeSignal,
) -> Result<ExperimentOutcome> {
    let mut ex = cfg.experiment.clone();
    ex.seed = seed;
    let seq = generate_sequence(ex.intervals, family.len(), seed)?;
    let bound = ex.x0_bound.unwrap_or(design.mu0);
    run_experiment(family, &probe, &ex, &seq, bound)
}

/// Write `truth.csv`, `detected.csv`, `sequence.csv`, `windows/*.csv` and
/// `report.json` under `dir`; returns the written paths.
pub fn write_run(dir: &Path, family: &ScenarioFamily, outcome: &ExperimentOutcome) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir.join("windows"))?;
    let s0 = &family.scenarios[0];
    let mut written = Vec::new();

    let truth = dir.join("truth.csv");
    write_sequence_csv(File::create(&truth)?, ["k", "alpha"], &outcome.sequence.alphas)?;
    written.push(truth);
    let detected = dir.join("detected.csv");
    write_sequence_csv(File::create(&detected)?, ["k", "alpha"], &outcome.report.detected)?;
    written.push(detected);

    let seq = dir.join("sequence.csv");
    let mut w = csv::Writer::from_path(&seq)?;
    w.write_record(["k", "true", "detected"])?;
    for (k, (t, d)) in outcome.sequence.alphas.iter().zip(&outcome.report.detected).enumerate() {
        w.write_record([k.to_string(), t.to_string(), d.to_string()])?;
    }
    w.flush()?;
    written.push(seq);

    for (k, win) in outcome.windows.iter().enumerate() {
        let path = dir.join("windows").join(format!("window_{k:03}.csv"));
        write_trace_csv(
            BufWriter::new(File::create(&path)?),
            std::slice::from_ref(win),
            &s0.output_labels,
            &s0.disturbance_labels,
        )?;
        written.push(path);
    }
    let trace = dir.join("run.csv");
    write_trace_csv(
        BufWriter::new(File::create(&trace)?),
        &outcome.windows,
        &s0.output_labels,
        &s0.disturbance_labels,
    )?;
    written.push(trace);

    let report = dir.join("report.json");
    std::fs::write(&report, to_json_pretty(&RunReport::new(family, &outcome.report))?)?;
    written.push(report);
    Ok(written)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub segment: u32,
    pub alpha_names: Vec<String>,
    pub accuracy: Option<f64>,
    pub matches: Option<usize>,
    pub intervals: usize,
    pub detection: DetectionReport,
}

impl RunReport {
    pub fn new(family: &ScenarioFamily, report: &DetectionReport) -> Self {
        RunReport {
            segment: family.segment_id,
            alpha_names: family.alpha_names(),
            accuracy: report.accuracy,
            matches: report.matches,
            intervals: report.detected.len(),
            detection: report.clone(),
        }
    }
}

/// Summary of the full reproduction run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReproReport {
    pub dimensions: Vec<(u32, usize)>,
    pub eigen: EigenReport,
    pub design: ProbingDesign,
    pub delta_pairs: Vec<((usize, usize), f64)>,
    pub reference_r0: f64,
    pub reference_delta_min: f64,
    pub reference_r: f64,
    pub seeds: Vec<u64>,
    pub probed_accuracy: Vec<f64>,
    pub unprobed_accuracy: Vec<f64>,
}

impl ReproReport {
    pub fn mean(v: &[f64]) -> f64 {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }
}

pub fn reproduce(
    cfg: &PipelineConfig,
    seeds: &[u64],
) -> Result<(ReproReport, Vec<ScenarioFamily>, Vec<ExperimentOutcome>)> {
    let model = cfg.load_network()?;
    let families = cfg.build_families(&model)?;
    let family = target_family(&families, cfg)?;
    let eigen = eigen_report(family)?;
    let (design, scan) = design_probe(family, cfg)?;
    let probe = applied_probe(&design, cfg);
    let off = ProbeSignal { magnitude: 0.0, ..probe };
    let mut outcomes = Vec::new();
    let mut probed = Vec::new();
    let mut unprobed = Vec::new();
    for &seed in seeds {
        let on = run(family, &design, cfg, seed, probe)?;
        probed.push(on.accuracy());
        outcomes.push(on);
        unprobed.push(run(family, &design, cfg, seed, off)?.accuracy());
    }
    let report = ReproReport {
        dimensions: families.iter().map(|f| (f.segment_id, f.n())).collect(),
        eigen,
        design,
        delta_pairs: scan.pairs,
        reference_r0: threshold(REFERENCE_MU0, REFERENCE_MU1, REFERENCE_DELTA_MIN),
        reference_delta_min: REFERENCE_DELTA_MIN,
        reference_r: REFERENCE_R,
        seeds: seeds.to_vec(),
        probed_accuracy: probed,
        unprobed_accuracy: unprobed,
    };
    Ok((report, families, outcomes))
}
