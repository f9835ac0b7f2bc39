//! Pipeline configuration document: which network, how it is segmented,
//! the scenario set of each segment, probe design and experiment settings.
//!
//! ```json
//! {
//!   "network": "six_bus.json",
//!   "segments": {"1": [1, 4], "2": [2, 5], "3": [3, 6]},
//!   "contingencies": {"1": [{"kind": "Normal"}, {"kind": "LineOutage", "line": [1, 4]}]},
//!   "target_segment": 1,
//!   "probe": {"channel": "delta", "margin": 1.01, "tau0": 0.01, "ts": 1e-6},
//!   "experiment": {"tau": 0.6, "tau0": 0.01, "ts": 1e-6, "K": 40, "seed": 1}
//! }
//! ```
//!
//! `network` is resolved relative to the directory of the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::grid::{parse_network, BusId, NetworkModel};
use crate::probing::{Channel, DEFAULT_MARGIN};
use crate::segmentation::{Assignment, SegmentId, SegmentModel};
use crate::ssbuild::{build_family, prepare_segments, ContingencySpec, ScenarioFamily};

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

fn default_channel() -> Channel {
    Channel::Delta
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default = "default_channel")]
    pub channel: Channel,
    #[serde(default = "default_margin")]
    pub margin: f64,
    pub tau0: f64,
    pub ts: f64,
    /// Evaluate the output gap per component instead of on the aggregate.
    #[serde(default)]
    pub per_component: bool,
    /// Apply this magnitude instead of the designed one (0 disables the probe).
    #[serde(default)]
    pub magnitude: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub network: PathBuf,
    /// Segment id (as a string key) to its buses.
    pub segments: BTreeMap<String, Vec<BusId>>,
    /// Scenario list per segment; segments not listed get normal operation only.
    #[serde(default)]
    pub contingencies: BTreeMap<String, Vec<ContingencySpec>>,
    /// Override of the bus whose load current is measured, per segment.
    #[serde(default)]
    pub monitored_bus: BTreeMap<String, BusId>,
    /// Segment the probe and experiment run on.
    #[serde(default = "default_target")]
    pub target_segment: SegmentId,
    pub probe: ProbeConfig,
    pub experiment: ExperimentConfig,
}

fn default_target() -> SegmentId {
    1
}

fn segment_key(key: &str) -> Result<SegmentId> {
    key.parse().map_err(|_| Error::schema(format!("segments.{key}"), "segment ids must be non-negative integers"))
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| Error::schema(format!("line {}", e.line()), e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Parse `path`, resolving `network` against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        if cfg.network.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.network = dir.join(&cfg.network);
            }
        }
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        for key in self.segments.keys().chain(self.contingencies.keys()).chain(self.monitored_bus.keys()) {
            segment_key(key)?;
        }
        for key in self.contingencies.keys().chain(self.monitored_bus.keys()) {
            if !self.segments.contains_key(key) {
                return Err(Error::schema(key.clone(), "refers to a segment that is not defined"));
            }
        }
        if !self.segments.contains_key(&self.target_segment.to_string()) {
            return Err(Error::schema("target_segment", format!("segment {} is not defined", self.target_segment)));
        }
        if !(self.probe.margin > 1.0) {
            return Err(Error::schema("probe.margin", "must be > 1"));
        }
        if let Some(m) = self.probe.magnitude {
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::schema("probe.magnitude", "must be finite and >= 0"));
            }
        }
        self.experiment.validate()?;
        if (self.probe.tau0 - self.experiment.tau0).abs() > 1e-15 || (self.probe.ts - self.experiment.ts).abs() > 1e-18
        {
            return Err(Error::schema("probe", "tau0 and ts must match the experiment"));
        }
        Ok(())
    }

    pub fn assignment(&self) -> Result<Assignment> {
        let segs =
            self.segments.iter().map(|(k, v)| Ok((segment_key(k)?, v.clone()))).collect::<Result<BTreeMap<_, _>>>()?;
        Assignment::from_segments(&segs)
    }

    pub fn load_network(&self) -> Result<NetworkModel> {
        parse_network(&std::fs::read_to_string(&self.network)?)
    }

    /// Segments with monitored-bus overrides applied.
    pub fn segments_for(&self, model: &NetworkModel) -> Result<Vec<SegmentModel>> {
        let mut segments = prepare_segments(model, &self.assignment()?)?;
        for seg in segments.iter_mut() {
            if let Some(&bus) = self.monitored_bus.get(&seg.id.to_string()) {
                if !seg.contains(bus) {
                    return Err(Error::Segmentation(format!("monitored bus {bus} is not in segment {}", seg.id)));
                }
                seg.monitored_bus = bus;
            }
        }
        Ok(segments)
    }

    pub fn contingencies_for(&self, segment: SegmentId) -> Vec<ContingencySpec> {
        self.contingencies.get(&segment.to_string()).cloned().unwrap_or_else(|| vec![ContingencySpec::Normal])
    }

    /// Build every segment's scenario family.
    pub fn build_families(&self, model: &NetworkModel) -> Result<Vec<ScenarioFamily>> {
        let segments = self.segments_for(model)?;
        segments.par_iter().map(|s| build_family(s, &self.contingencies_for(s.id))).collect()
    }
}

/// Bundled configuration reproducing the six-bus experiment.
pub fn reference_config() -> PipelineConfig {
    let mut cfg =
        PipelineConfig::parse(include_str!("../examples/reference_experiment.json")).expect("bundled config is valid");
    cfg.network = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/six_bus.json"));
    cfg
}
