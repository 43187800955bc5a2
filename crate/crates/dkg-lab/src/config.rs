//! Run configuration: TOML files with sections, preset defaults, validation,
//! and a content hash for provenance.
//!
//! Precedence is flag > file > preset default. The effective configuration is
//! echoed verbatim into every output header so a run is reproducible from its
//! artifacts alone.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::LabError;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub half_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: 256, half_width: 40.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between diagnostic samples.
    pub sample_every: usize,
    pub dealias: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { dt: 0.01, t_end: 20.0, sample_every: 50, dealias: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// gaussian | ring | plane-modulated
    pub family: String,
    pub amplitude: f64,
    pub width: f64,
    pub center: [f64; 2],
    /// Spinor polarization as [re0, im0, re1, im1]; normalized internally.
    pub polarization: [f64; 4],
    pub kg_amplitude: f64,
    pub kg_width: f64,
    pub ring_radius: f64,
    pub mode: [i32; 2],
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            family: "gaussian".into(),
            amplitude: 0.01,
            width: 1.5,
            center: [0.0, 0.0],
            polarization: [1.0, 0.0, 0.0, 0.0],
            kg_amplitude: 0.01,
            kg_width: 1.5,
            ring_radius: 3.0,
            mode: [2, 0],
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub energies: bool,
    /// Per-sample bracket-identity residual (needs the auxiliary pair).
    pub transforms: bool,
    pub scattering: bool,
    /// Simulation-time spacing of scattering snapshots.
    pub scatter_every: f64,
    /// Decay-fit window override; default [t_wrap/4, 0.9 t_wrap].
    pub decay_window: Option<[f64; 2]>,
    /// Ghost-weight exponent delta; delta1 defaults to 3 delta.
    pub delta: f64,
    pub delta1: Option<f64>,
    /// Track the auxiliary wave pair.
    pub track_aux: bool,
    /// Randomized trials for the identities preset.
    pub trials: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            energies: true,
            transforms: false,
            scattering: true,
            scatter_every: 5.0,
            decay_window: None,
            delta: 0.05,
            delta1: None,
            track_aux: true,
            trials: 1000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    /// Samples between periodic snapshots; 0 writes only the final one.
    pub snapshot_every: usize,
    /// Mirror the decay series as two-column CSV files.
    pub csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into(), snapshot_every: 0, csv: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub grid: GridConfig,
    pub integrator: IntegratorConfig,
    pub data: DataConfig,
    pub diagnostics: DiagnosticsConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    /// Defaults for a named preset.
    pub fn preset(name: &str) -> Result<RunConfig, LabError> {
        let mut cfg = RunConfig { preset: Some(name.to_string()), ..RunConfig::default() };
        match name {
            "identities" => {
                cfg.grid = GridConfig { n: 64, half_width: 10.0 };
                cfg.integrator.t_end = 0.0;
            }
            "free-decay" => {
                cfg.grid = GridConfig { n: 1024, half_width: 120.0 };
                cfg.integrator = IntegratorConfig {
                    dt: 0.01,
                    t_end: 100.0,
                    sample_every: 500,
                    dealias: true,
                };
                cfg.data.amplitude = 0.01;
                cfg.data.kg_amplitude = 0.01;
                cfg.diagnostics.track_aux = false;
                cfg.diagnostics.scattering = false;
                cfg.diagnostics.decay_window = Some([20.0, 100.0]);
            }
            "dkg-small" => {
                cfg.grid = GridConfig { n: 512, half_width: 80.0 };
                cfg.integrator = IntegratorConfig {
                    dt: 0.01,
                    t_end: 60.0,
                    sample_every: 50,
                    dealias: true,
                };
                cfg.data.amplitude = 0.01;
                cfg.data.kg_amplitude = 0.01;
                cfg.diagnostics.track_aux = true;
                cfg.diagnostics.transforms = true;
            }
            "convergence" => {
                cfg.grid = GridConfig { n: 256, half_width: 40.0 };
                cfg.integrator = IntegratorConfig {
                    dt: 0.04,
                    t_end: 2.0,
                    sample_every: 10,
                    dealias: true,
                };
                cfg.data.amplitude = 0.05;
                cfg.data.kg_amplitude = 0.05;
                cfg.diagnostics.track_aux = true;
            }
            other => {
                return Err(LabError::config(
                    "preset",
                    format!("unknown preset '{other}' (expected identities | free-decay | dkg-small | convergence)"),
                ))
            }
        }
        Ok(cfg)
    }

    /// Parses a config file: the file's `preset` key (if any) supplies the
    /// defaults, then explicit keys overlay them.
    pub fn load(path: &Path) -> Result<RunConfig, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Io(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<RunConfig, LabError> {
        let file_val: toml::Value = toml::from_str(text)
            .map_err(|e| LabError::config("<file>", format!("parse error: {e}")))?;
        let base = match file_val.get("preset").and_then(|v| v.as_str()) {
            Some(name) => RunConfig::preset(name)?,
            None => RunConfig::default(),
        };
        let mut merged = toml::Value::try_from(&base)
            .map_err(|e| LabError::config("<defaults>", e.to_string()))?;
        deep_merge(&mut merged, &file_val);
        let cfg: RunConfig = merged
            .try_into()
            .map_err(|e| LabError::config("<file>", format!("invalid value: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        if self.grid.n < 16 || !self.grid.n.is_power_of_two() {
            return Err(LabError::config("grid.n", "must be a power of two >= 16"));
        }
        if !(self.grid.half_width > 0.0) {
            return Err(LabError::config("grid.half_width", "must be positive"));
        }
        if !(self.integrator.dt > 0.0) {
            return Err(LabError::config("integrator.dt", "must be positive"));
        }
        if self.integrator.dt > dkg_core::evolver::DT_MAX {
            return Err(LabError::config(
                "integrator.dt",
                format!("exceeds the splitting cap {}", dkg_core::evolver::DT_MAX),
            ));
        }
        if !(self.integrator.t_end >= 0.0) {
            return Err(LabError::config("integrator.t_end", "must be nonnegative"));
        }
        let steps = self.integrator.t_end / self.integrator.dt;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(LabError::config(
                "integrator.t_end",
                "must be an integer number of steps of integrator.dt",
            ));
        }
        if self.integrator.sample_every == 0 {
            return Err(LabError::config("integrator.sample_every", "must be >= 1"));
        }
        match self.data.family.as_str() {
            "gaussian" | "ring" | "plane-modulated" => {}
            other => {
                return Err(LabError::config(
                    "data.family",
                    format!("unknown family '{other}'"),
                ))
            }
        }
        if self.data.amplitude < 0.0 || self.data.kg_amplitude < 0.0 {
            return Err(LabError::config("data.amplitude", "must be nonnegative"));
        }
        if !(self.data.width > 0.0) || !(self.data.kg_width > 0.0) {
            return Err(LabError::config("data.width", "must be positive"));
        }
        if !(self.diagnostics.delta > 0.0 && self.diagnostics.delta < 0.5) {
            return Err(LabError::config("diagnostics.delta", "must lie in (0, 0.5)"));
        }
        if let Some(d1) = self.diagnostics.delta1 {
            if !(d1 > 0.0 && d1 < 1.0) {
                return Err(LabError::config("diagnostics.delta1", "must lie in (0, 1)"));
            }
        }
        if !(self.diagnostics.scatter_every > 0.0) {
            return Err(LabError::config("diagnostics.scatter_every", "must be positive"));
        }
        if self.output.dir.is_empty() {
            return Err(LabError::config("output.dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn delta1(&self) -> f64 {
        self.diagnostics.delta1.unwrap_or(3.0 * self.diagnostics.delta)
    }

    /// SHA-256 over the canonical serialized form of the effective config.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }

    /// Short hash embedded in every diagnostics line.
    pub fn short_hash(&self) -> String {
        self.hash()[..16].to_string()
    }

    pub fn data_spec(&self) -> Result<dkg_core::evolver::InitialDataSpec, LabError> {
        use dkg_core::evolver::{DataFamily, InitialDataSpec};
        use dkg_core::spinor::{Spinor, C64};
        let family = match self.data.family.as_str() {
            "gaussian" => DataFamily::Gaussian,
            "ring" => DataFamily::Ring,
            "plane-modulated" => DataFamily::PlaneModulated,
            other => return Err(LabError::config("data.family", format!("unknown family '{other}'"))),
        };
        let p = self.data.polarization;
        Ok(InitialDataSpec {
            family,
            amplitude: self.data.amplitude,
            width: self.data.width,
            center: (self.data.center[0], self.data.center[1]),
            polarization: Spinor::new(C64::new(p[0], p[1]), C64::new(p[2], p[3])),
            kg_amplitude: self.data.kg_amplitude,
            kg_width: self.data.kg_width,
            ring_radius: self.data.ring_radius,
            mode: (self.data.mode[0], self.data.mode[1]),
            seed: self.data.seed,
            with_aux: self.diagnostics.track_aux,
        })
    }
}

fn deep_merge(base: &mut toml::Value, overlay: &toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}
