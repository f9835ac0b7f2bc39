use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use shs_lab::config::PipelineConfig;
use shs_lab::detection::{Detector, DEFAULT_SUBSAMPLE};
use shs_lab::experiment::eigen_report;
use shs_lab::grid::{parse_network, parse_network_unchecked, validate};
use shs_lab::io::{manifest_path, read_sequence_csv, read_trace_csv, to_json_pretty, MatricesDoc, RunManifest};
use shs_lab::pipeline::{self, RunReport};
use shs_lab::probing::{design_mami, window_steps, Channel, ProbingDesign, DEFAULT_MARGIN};
use shs_lab::{Error, Result};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "shs-lab", version, about = "Segmented grid models, probe design and contingency detection")]
struct Cli {
    /// Worker threads for internal parallelism.
    #[arg(long, global = true, env = "SHS_LAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network document against every invariant.
    Validate { network: PathBuf },
    /// Split a network into segments.
    Segment {
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        /// Write the segment models as JSON.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Build the scenario family of every segment.
    Build {
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Eigenvalues of every scenario as CSV (alpha, name, re, im).
    Analyze {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        segment: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Design the magnitude-modulated probe.
    DesignProbe {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        segment: Option<u32>,
        #[arg(long)]
        tau0: f64,
        #[arg(long)]
        ts: f64,
        #[arg(long, default_value = "delta")]
        channel: Channel,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a random switching sequence and detect every window.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Probe magnitude override; 0 disables probing.
        #[arg(long)]
        magnitude: Option<f64>,
    },
    /// Detect the active scenario in recorded windows.
    Detect {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        segment: Option<u32>,
        #[arg(long)]
        probe: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SUBSAMPLE)]
        subsample: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the complete six-bus reproduction on the bundled configuration.
    ReproPaper {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "repro")]
        out_dir: PathBuf,
        /// Number of seeds (0..n) for the probed and unprobed runs.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(EXIT_USAGE);
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_NUMERICAL })
        }
    }
}

fn load_config(path: &Path, network: Option<&PathBuf>) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(n) = network {
        cfg.network = n.clone();
    }
    Ok(cfg)
}

fn load_family(path: &Path, segment: Option<u32>) -> Result<shs_lab::ssbuild::ScenarioFamily> {
    MatricesDoc::parse(&std::fs::read_to_string(path)?)?.family(segment)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, to_json_pretty(value)?)?;
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Validate { network } => {
            let text = std::fs::read_to_string(&network)?;
            let model = parse_network_unchecked(&text)?;
            let report = validate(&model);
            if !report.is_empty() {
                return Err(Error::InvalidNetwork { report });
            }
            println!(
                "{}: {} buses, {} lines, {} PV-B units, valid",
                model.name,
                model.buses.len(),
                model.lines.len(),
                model.pvb_buses().len()
            );
            Ok(())
        }
        Command::Segment { network, config, dump } => {
            let cfg = load_config(&config, network.as_ref())?;
            let model = cfg.load_network()?;
            let segments = cfg.segments_for(&model)?;
            for s in &segments {
                println!(
                    "segment {}: PV-B {}, buses {:?}, internal lines {}, aux buses {:?}",
                    s.id,
                    s.pvb_bus,
                    s.bus_ids(),
                    s.internal_lines.len(),
                    s.aux_buses.iter().map(|a| a.aux_id.as_str()).collect::<Vec<_>>()
                );
            }
            if let Some(out) = dump {
                write_json(&out, &segments)?;
                let mut m = RunManifest::start("segment", serde_json::to_value(&cfg)?);
                m.input(&config)?;
                m.input(&cfg.network)?;
                m.output(&out)?;
                m.finish(&manifest_path(&out))?;
            }
            Ok(())
        }
        Command::Build { network, config, out } => {
            let cfg = load_config(&config, network.as_ref())?;
            let model = cfg.load_network()?;
            let families = cfg.build_families(&model)?;
            for f in &families {
                println!("segment {}: n = {}, p = {}, scenarios {:?}", f.segment_id, f.n(), f.p(), f.alpha_names());
            }
            write_json(&out, &MatricesDoc::new(&model.name, &families))?;
            let mut m = RunManifest::start("build", serde_json::to_value(&cfg)?);
            m.input(&config)?;
            m.input(&cfg.network)?;
            m.output(&out)?;
            m.finish(&manifest_path(&out))?;
            Ok(())
        }
        Command::Analyze { family, segment, out } => {
            let fam = load_family(&family, segment)?;
            let report = eigen_report(&fam)?;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&out, report.to_csv()?)?;
            for s in &report.spectra {
                println!(
                    "alpha {} ({}): max Re = {:.6e} {}",
                    s.alpha,
                    s.name,
                    s.max_real,
                    if s.stable { "stable" } else { "UNSTABLE" }
                );
            }
            println!("all stable: {}", report.all_stable);
            let mut m = RunManifest::start("analyze", json!({ "family": family, "segment": segment }));
            m.input(&family)?;
            m.output(&out)?;
            m.finish(&manifest_path(&out))?;
            Ok(())
        }
        Command::DesignProbe { family, segment, tau0, ts, channel, margin, out } => {
            let fam = load_family(&family, segment)?;
            let design = design_mami(&fam, &fam.nominal_equilibrium(), channel, tau0, ts, margin)?;
            println!(
                "mu0 = {:.6}, mu1 = {:.6}, delta_min = {:.6} (pair {:?}), R0 = {:.6}, R = {:.6}",
                design.mu0, design.mu1, design.delta_min, design.argmin_pair, design.r0, design.r
            );
            write_json(&out, &design)?;
            let mut m = RunManifest::start(
                "design-probe",
                json!({ "family": family, "segment": segment, "tau0": tau0, "ts": ts, "channel": channel, "margin": margin }),
            );
            m.input(&family)?;
            m.output(&out)?;
            m.finish(&manifest_path(&out))?;
            Ok(())
        }
        Command::Run { config, out_dir, seed, magnitude } => {
            let mut cfg = load_config(&config, None)?;
            if magnitude.is_some() {
                cfg.probe.magnitude = magnitude;
            }
            let seed = seed.unwrap_or(cfg.experiment.seed);
            cfg.experiment.seed = seed;
            let model = cfg.load_network()?;
            let families = cfg.build_families(&model)?;
            let family = pipeline::target_family(&families, &cfg)?;
            let (design, _) = pipeline::design_probe(family, &cfg)?;
            let probe = pipeline::applied_probe(&design, &cfg);
            let outcome = pipeline::run(family, &design, &cfg, seed, probe)?;
            let mut written = pipeline::write_run(&out_dir, family, &outcome)?;
            let probe_path = out_dir.join("probe.json");
            write_json(&probe_path, &design)?;
            written.push(probe_path);
            println!(
                "segment {}: R = {:.6} (R0 = {:.6}), applied magnitude {:.6}, accuracy {:.4} over {} intervals",
                family.segment_id,
                design.r,
                design.r0,
                probe.magnitude,
                outcome.accuracy(),
                outcome.sequence.alphas.len()
            );
            let mut m = RunManifest::start("run", serde_json::to_value(&cfg)?);
            m.input(&config)?;
            m.input(&cfg.network)?;
            for p in &written {
                m.output(p)?;
            }
            m.finish(&out_dir.join("manifest.json"))?;
            Ok(())
        }
        Command::Detect { family, segment, probe, trace, truth, subsample, out } => {
            let fam = load_family(&family, segment)?;
            let design: ProbingDesign = serde_json::from_str(&std::fs::read_to_string(&probe)?)
                .map_err(|e| Error::schema(probe.display().to_string(), e.to_string()))?;
            let s0 = &fam.scenarios[0];
            let windows = read_trace_csv(
                File::open(&trace)?,
                &s0.output_labels,
                &s0.disturbance_labels,
                design.ts,
                design.signal(),
            )?;
            let truth_seq = truth.as_ref().map(|t| read_sequence_csv(File::open(t)?)).transpose()?;
            let steps = window_steps(design.tau0, design.ts)?;
            if let Some(w) = windows.iter().find(|w| w.steps() != steps) {
                return Err(Error::Dimension(format!(
                    "window at t = {} has {} steps, expected {steps}",
                    w.t_start,
                    w.steps()
                )));
            }
            let systems = fam.discretize(design.ts)?;
            let detector = Detector::new(&systems, steps, subsample)?;
            let report = detector.detect_sequence(&windows, truth_seq.as_deref())?;
            println!("detected {:?}", report.detected);
            if let Some(acc) = report.accuracy {
                println!("accuracy {acc:.4}");
            }
            write_json(&out, &RunReport::new(&fam, &report))?;
            let mut m =
                RunManifest::start("detect", json!({ "family": family, "segment": segment, "subsample": subsample }));
            m.input(&family)?;
            m.input(&probe)?;
            m.input(&trace)?;
            if let Some(t) = &truth {
                m.input(t)?;
            }
            m.output(&out)?;
            m.finish(&manifest_path(&out))?;
            Ok(())
        }
        Command::ReproPaper { config, out_dir, seeds } => {
            let cfg = match &config {
                Some(p) => PipelineConfig::load(p)?,
                None => shs_lab::config::reference_config(),
            };
            parse_network(&std::fs::read_to_string(&cfg.network)?)?;
            let seed_list: Vec<u64> = (0..seeds.max(1)).collect();
            let (report, families, outcomes) = pipeline::reproduce(&cfg, &seed_list)?;
            std::fs::create_dir_all(&out_dir)?;
            let matrices = out_dir.join("matrices.json");
            write_json(&matrices, &MatricesDoc::new("six_bus", &families))?;
            let family = pipeline::target_family(&families, &cfg)?;
            let eigs = out_dir.join("eigs.csv");
            std::fs::write(&eigs, report.eigen.to_csv()?)?;
            let probe_path = out_dir.join("probe.json");
            write_json(&probe_path, &report.design)?;
            let mut written = vec![matrices, eigs, probe_path];
            written.extend(pipeline::write_run(&out_dir.join("run"), family, &outcomes[0])?);
            let summary = out_dir.join("repro.json");
            write_json(&summary, &report)?;
            written.push(summary);

            let d = &report.design;
            println!("segment dimensions: {:?}", report.dimensions);
            println!("all scenarios Hurwitz: {}", report.eigen.all_stable);
            println!("mu0 = {:.4}, mu1 = {:.4}", d.mu0, d.mu1);
            println!(
                "delta_min = {:.4} (pair {:?}); reference value {:.2}",
                d.delta_min, d.argmin_pair, report.reference_delta_min
            );
            println!(
                "R0 = {:.6}, R = {:.6}; reference R0 = {:.5}, R = {}",
                d.r0, d.r, report.reference_r0, report.reference_r
            );
            println!("probed accuracy per seed: {:?}", report.probed_accuracy);
            println!("unprobed (R = 0) accuracy per seed: {:?}", report.unprobed_accuracy);
            println!(
                "mean accuracy: probed {:.4}, unprobed {:.4}",
                pipeline::ReproReport::mean(&report.probed_accuracy),
                pipeline::ReproReport::mean(&report.unprobed_accuracy)
            );
            let mut m = RunManifest::start("repro-paper", serde_json::to_value(&cfg)?);
            if let Some(p) = &config {
                m.input(p)?;
            }
            m.input(&cfg.network)?;
            for p in &written {
                m.output(p)?;
            }
            m.finish(&out_dir.join("manifest.json"))?;
            Ok(())
        }
    }
}
