//! NDJSON diagnostics stream: one JSON object per line, ordered by sample
//! time, each line carrying the config hash. Non-finite numbers are emitted
//! as `null` with the offending fields named in `null_reason`.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::LabError;

#[derive(Serialize, Debug, Clone)]
pub struct SampleRecord {
    pub kind: &'static str,
    pub cfg: String,
    pub t: f64,
    pub psi_l2: Option<f64>,
    pub psi_linf: Option<f64>,
    pub minus_linf: Option<f64>,
    pub v_l2: Option<f64>,
    pub v_linf: Option<f64>,
    pub v_weighted_linf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ed_inst: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ed_ghost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ed_ghost_mod: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g1_ghost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g1_ghost_mod: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_conformal: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ext_psi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ext_v: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aux_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minus_residual: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub null_reason: Vec<String>,
}

impl SampleRecord {
    pub fn new(cfg: String, t: f64) -> Self {
        SampleRecord {
            kind: "sample",
            cfg,
            t,
            psi_l2: None,
            psi_linf: None,
            minus_linf: None,
            v_l2: None,
            v_linf: None,
            v_weighted_linf: None,
            ed_inst: None,
            ed_ghost: None,
            ed_ghost_mod: None,
            e1: None,
            g1_ghost: None,
            g1_ghost_mod: None,
            e0: None,
            f_conformal: None,
            ext_psi: None,
            ext_v: None,
            aux_residual: None,
            minus_residual: None,
            null_reason: Vec::new(),
        }
    }

    /// Stores a value, mapping non-finite to `null` plus a named reason.
    pub fn put(&mut self, slot: fn(&mut Self) -> &mut Option<f64>, name: &str, value: f64) {
        if value.is_finite() {
            *slot(self) = Some(value);
        } else {
            *slot(self) = None;
            self.null_reason.push(format!("{name}: non-finite ({value})"));
        }
    }
}

#[derive(Serialize, Debug)]
pub struct HeaderRecord<'a> {
    pub kind: &'static str,
    pub cfg: String,
    pub config_hash: String,
    pub config: &'a crate::config::RunConfig,
    pub smallness_norm: f64,
    pub support_radius: f64,
    pub t_wrap: f64,
    pub delta: f64,
    pub delta1: f64,
}

#[derive(Serialize, Debug)]
pub struct DecayFitRecord {
    pub kind: &'static str,
    pub cfg: String,
    pub series: String,
    pub window: [f64; 2],
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub n_samples: usize,
}

#[derive(Serialize, Debug)]
pub struct ScatterRecord {
    pub kind: &'static str,
    pub cfg: String,
    pub times: Vec<f64>,
    pub dirac_l2: Vec<f64>,
    pub dirac_h1: Vec<f64>,
    pub kg_energy: Vec<f64>,
}

#[derive(Serialize, Debug)]
pub struct FailureRecord {
    pub kind: &'static str,
    pub cfg: String,
    pub t: f64,
    pub error: String,
    pub last_good_snapshot: String,
}

pub struct NdjsonWriter {
    out: std::io::BufWriter<std::fs::File>,
    path: std::path::PathBuf,
}

impl NdjsonWriter {
    pub fn create(path: &Path) -> Result<Self, LabError> {
        let file = std::fs::File::create(path)
            .map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        Ok(NdjsonWriter { out: std::io::BufWriter::new(file), path: path.to_path_buf() })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<(), LabError> {
        let line = serde_json::to_string(record)
            .map_err(|e| LabError::Io(format!("serializing record: {e}")))?;
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .map_err(|e| LabError::Io(format!("{}: {e}", self.path.display())))
    }

    pub fn finish(mut self) -> Result<(), LabError> {
        self.out
            .flush()
            .map_err(|e| LabError::Io(format!("{}: {e}", self.path.display())))
    }
}

/// Two-column CSV mirror of one decay series.
pub fn write_csv(path: &Path, series: &[(f64, f64)]) -> Result<(), LabError> {
    let mut out = String::from("t,value\n");
    for (t, v) in series {
        out.push_str(&format!("{t},{v}\n"));
    }
    std::fs::write(path, out).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))
}
