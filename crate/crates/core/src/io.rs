//! File formats: scenario families (`matrices.json`), probe designs,
//! measurement traces as CSV and run manifests.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::detection::MeasurementWindow;
use crate::error::{Error, Result};
use crate::probing::ProbeSignal;
use crate::segmentation::SegmentId;
use crate::ssbuild::{OperatingPoint, ScenarioFamily, StateKind, StateSpaceModel};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixDoc {
    fn from(m: &DMatrix<f64>) -> Self {
        MatrixDoc { rows: m.nrows(), cols: m.ncols(), data: m.transpose().iter().copied().collect() }
    }
}

impl MatrixDoc {
    pub fn to_matrix(&self, what: &str) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::schema(
                what,
                format!("{}x{} matrix with {} entries", self.rows, self.cols, self.data.len()),
            ));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub alpha: usize,
    pub name: String,
    #[serde(rename = "A")]
    pub a: MatrixDoc,
    #[serde(rename = "B1")]
    pub b1: MatrixDoc,
    #[serde(rename = "B2")]
    pub b2: MatrixDoc,
    #[serde(rename = "C")]
    pub c: MatrixDoc,
    #[serde(rename = "D2")]
    pub d2: MatrixDoc,
    pub equilibrium: OperatingPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyDoc {
    pub segment: SegmentId,
    pub n: usize,
    pub p: usize,
    pub alpha_names: Vec<String>,
    pub state_labels: Vec<String>,
    pub state_kinds: Vec<StateKind>,
    pub input_labels: Vec<String>,
    pub disturbance_labels: Vec<String>,
    pub output_labels: Vec<String>,
    pub scenarios: Vec<ScenarioDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatricesDoc {
    pub network: String,
    pub families: Vec<FamilyDoc>,
}

impl FamilyDoc {
    pub fn from_family(f: &ScenarioFamily) -> Self {
        let s0 = &f.scenarios[0];
        FamilyDoc {
            segment: f.segment_id,
            n: f.n(),
            p: f.p(),
            alpha_names: f.alpha_names(),
            state_labels: s0.state_labels.clone(),
            state_kinds: s0.state_kinds.clone(),
            input_labels: s0.input_labels.clone(),
            disturbance_labels: s0.disturbance_labels.clone(),
            output_labels: s0.output_labels.clone(),
            scenarios: f
                .scenarios
                .iter()
                .map(|s| ScenarioDoc {
                    alpha: s.alpha,
                    name: s.name.clone(),
                    a: (&s.a).into(),
                    b1: (&s.b1).into(),
                    b2: (&s.b2).into(),
                    c: (&s.c).into(),
                    d2: (&s.d2).into(),
                    equilibrium: s.operating_point.clone(),
                })
                .collect(),
        }
    }

    pub fn to_family(&self) -> Result<ScenarioFamily> {
        let scenarios = self
            .scenarios
            .iter()
            .map(|s| {
                let loc = |m: &str| format!("families[{}].scenarios[{}].{m}", self.segment, s.alpha);
                let model = StateSpaceModel {
                    alpha: s.alpha,
                    name: s.name.clone(),
                    a: s.a.to_matrix(&loc("A"))?,
                    b1: s.b1.to_matrix(&loc("B1"))?,
                    b2: s.b2.to_matrix(&loc("B2"))?,
                    c: s.c.to_matrix(&loc("C"))?,
                    d2: s.d2.to_matrix(&loc("D2"))?,
                    state_labels: self.state_labels.clone(),
                    state_kinds: self.state_kinds.clone(),
                    input_labels: self.input_labels.clone(),
                    disturbance_labels: self.disturbance_labels.clone(),
                    output_labels: self.output_labels.clone(),
                    operating_point: s.equilibrium.clone(),
                };
                model.check_dims()?;
                Ok(model)
            })
            .collect::<Result<Vec<_>>>()?;
        ScenarioFamily::new(self.segment, scenarios)
    }
}

impl MatricesDoc {
    pub fn new(network: &str, families: &[ScenarioFamily]) -> Self {
        MatricesDoc { network: network.to_string(), families: families.iter().map(FamilyDoc::from_family).collect() }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::schema(format!("line {}", e.line()), e.to_string()))
    }

    pub fn families(&self) -> Result<Vec<ScenarioFamily>> {
        self.families.iter().map(FamilyDoc::to_family).collect()
    }

    /// Family of `segment`, or the only family when `segment` is `None`.
    pub fn family(&self, segment: Option<SegmentId>) -> Result<ScenarioFamily> {
        let doc = match segment {
            Some(id) => self.families.iter().find(|f| f.segment == id),
            None if self.families.len() == 1 => self.families.first(),
            None => self.families.iter().find(|f| f.scenarios.len() > 1).or(self.families.first()),
        };
        doc.ok_or_else(|| Error::InvalidArgument(format!("no family for segment {segment:?}")))?.to_family()
    }
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Write a measurement record: one row per sample with the window index,
/// time, outputs and disturbances.
pub fn write_trace_csv<W: Write>(
    out: W,
    windows: &[MeasurementWindow],
    output_labels: &[String],
    disturbance_labels: &[String],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["window".to_string(), "t".to_string()];
    header.extend(output_labels.iter().cloned());
    header.extend(disturbance_labels.iter().cloned());
    w.write_record(&header)?;
    for (k, win) in windows.iter().enumerate() {
        for (i, y) in win.samples.iter().enumerate() {
            let mut row = vec![k.to_string(), format!("{:e}", win.t_start + i as f64 * win.ts)];
            row.extend(y.iter().map(|v| format!("{v:e}")));
            if let Some(u2) = win.u2.get(i) {
                row.extend(u2.iter().map(|v| format!("{v:e}")));
            } else {
                row.extend(disturbance_labels.iter().map(|_| "0".to_string()));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read windows written by [`write_trace_csv`]. Columns are matched by label.
pub fn read_trace_csv<R: Read>(
    input: R,
    output_labels: &[String],
    disturbance_labels: &[String],
    ts: f64,
    probe: ProbeSignal,
) -> Result<Vec<MeasurementWindow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::MissingLabel(format!("trace column {name}")))
    };
    let (wcol, tcol) = (col("window")?, col("t")?);
    let ycols = output_labels.iter().map(|l| col(l)).collect::<Result<Vec<_>>>()?;
    let ucols = disturbance_labels.iter().map(|l| col(l)).collect::<Result<Vec<_>>>()?;
    let mut windows: Vec<MeasurementWindow> = Vec::new();
    let mut current: Option<usize> = None;
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::schema(format!("trace row {}", line + 2), format!("column {c} is not a number")))
        };
        let k: usize = rec
            .get(wcol)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::schema(format!("trace row {}", line + 2), "bad window index"))?;
        if current != Some(k) {
            if current.is_some_and(|c| k < c) {
                return Err(Error::schema(format!("trace row {}", line + 2), "windows must be in order"));
            }
            windows.push(MeasurementWindow { t_start: num(tcol)?, ts, samples: Vec::new(), probe, u2: Vec::new() });
            current = Some(k);
        }
        let win = windows.last_mut().expect("pushed above");
        win.samples
            .push(DVector::from_iterator(ycols.len(), ycols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?));
        win.u2.push(DVector::from_iterator(ucols.len(), ucols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?));
    }
    Ok(windows)
}

/// Two-column `k,alpha` sequence file.
pub fn write_sequence_csv<W: Write>(out: W, header: [&str; 2], values: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for (k, v) in values.iter().enumerate() {
        w.write_record([k.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sequence_csv<R: Read>(input: R) -> Result<Vec<usize>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let v = rec
            .get(1)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::schema(format!("sequence row {}", line + 2), "expected k,alpha"))?;
        out.push(v);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(FileDigest { path: path.display().to_string(), sha256: sha256_hex(&bytes) })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Provenance record written next to every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub config: Value,
    pub started_unix: f64,
    pub finished_unix: f64,
}

impl RunManifest {
    pub fn start(command: &str, config: Value) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            config,
            started_unix: unix_now(),
            finished_unix: 0.0,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(FileDigest::of(path)?);
        Ok(())
    }

    /// Stamp the finish time and write the manifest to `path`.
    pub fn finish(mut self, path: &Path) -> Result<Self> {
        self.finished_unix = unix_now();
        std::fs::write(path, to_json_pretty(&self)?)?;
        Ok(self)
    }

    /// Every recorded digest still matches the file on disk.
    pub fn verify(&self) -> Result<bool> {
        for d in self.inputs.iter().chain(&self.outputs) {
            if FileDigest::of(Path::new(&d.path))?.sha256 != d.sha256 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// `<file>.manifest.json` next to `output`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_doc_is_row_major() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let d = MatrixDoc::from(&m);
        assert_eq!(d.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(d.to_matrix("m").unwrap(), m);
        assert!(MatrixDoc { rows: 2, cols: 2, data: vec![1.0] }.to_matrix("m").is_err());
    }

    #[test]
    fn digest_of_known_bytes() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_path_appends_suffix() {
        assert_eq!(manifest_path(Path::new("out/m.json")), PathBuf::from("out/m.json.manifest.json"));
    }
}
