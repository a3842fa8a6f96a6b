//! Pipeline configuration (TOML). Relative paths are resolved against the
//! directory of the configuration file.

use std::path::{Path, PathBuf};

use rom_core::fe::Material;
use rom_core::rom::NewmarkParams;
use rom_core::signal::LoadSpec;
use serde::{Deserialize, Serialize};

use crate::error::{ToolError, ToolResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub identify: IdentifyConfig,
    #[serde(default)]
    pub load: LoadConfig,
    #[serde(default)]
    pub integration: IntegrationConfig,
    #[serde(default)]
    pub psd: PsdConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub mesh: PathBuf,
    pub youngs_modulus: f64,
    pub density: f64,
    /// Rectangular section; the pressure acts over this width.
    pub width: f64,
    pub thickness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisConfig {
    /// Vibration modes computed.
    pub modes: usize,
    /// Explicit mode indices; overrides `smpf_top_k`.
    pub vms: Option<Vec<usize>>,
    pub smpf_top_k: usize,
    /// Keep the top-k derivatives by MDPF; all when absent.
    pub smd_top_k: Option<usize>,
    /// Derivative step as a fraction of the thickness.
    pub smd_step_fraction: f64,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            modes: 20,
            vms: None,
            smpf_top_k: 4,
            smd_top_k: None,
            smd_step_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    /// Manifold amplitude `α` as a multiple of the thickness.
    pub alpha_factor: f64,
    pub n_train: usize,
    pub n_validate: usize,
    pub tau: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            alpha_factor: 0.6,
            n_train: 60,
            n_validate: 20,
            tau: 1e-3,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct IdentifyConfig {
    /// Imposed amplitude as a multiple of the thickness; defaults to the
    /// training `alpha_factor`.
    pub alpha_id_factor: Option<f64>,
    /// Also build the direct-projection tensors and report the difference.
    pub compare_direct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadConfig {
    pub oaspl_db: f64,
    pub cutoff_hz: f64,
    pub filter_order: usize,
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
}

impl Default for LoadConfig {
    fn default() -> Self {
        Self {
            oaspl_db: 144.0,
            cutoff_hz: 500.0,
            filter_order: 12,
            dt: 1.0 / 24000.0,
            duration: 1.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrationConfig {
    pub enabled: bool,
    pub beta: f64,
    pub gamma: f64,
    /// Modal damping ratio fitted by Rayleigh damping on the selected modes.
    pub damping_ratio: f64,
    /// Nodes whose transverse displacement is recorded; mid-span when empty.
    pub monitor_nodes: Vec<usize>,
    /// Also integrate the full model for reference.
    pub hfm_reference: bool,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            beta: 0.25,
            gamma: 0.5,
            damping_ratio: 0.02,
            monitor_nodes: Vec::new(),
            hfm_reference: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsdConfig {
    pub segment_len: usize,
    pub overlap: f64,
}

impl Default for PsdConfig {
    fn default() -> Self {
        Self {
            segment_len: 9000,
            overlap: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> ToolResult<()> {
    if ok {
        Ok(())
    } else {
        Err(ToolError::Config(msg()))
    }
}

fn apply_overrides(text: &str, overrides: &[String]) -> ToolResult<String> {
    if overrides.is_empty() {
        return Ok(text.to_string());
    }
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ToolError::Config(e.to_string()))?;
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| ToolError::Config(format!("override {o:?} is not key=value")))?;
        let (section, field) = key
            .trim()
            .split_once('.')
            .ok_or_else(|| ToolError::Config(format!("override key {key:?} is not section.key")))?;
        let raw = raw.trim();
        let value = match format!("v = {raw}").parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").expect("parsed key"),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        let entry = table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        match entry {
            toml::Value::Table(t) => {
                t.insert(field.to_string(), value);
            }
            _ => return Err(ToolError::Config(format!("{section:?} is not a section"))),
        }
    }
    Ok(table.to_string())
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base: &Path) -> ToolResult<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| ToolError::Config(e.to_string()))?;
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> ToolResult<Self> {
        Self::load_with(path, &[])
    }

    /// Loads `path` after applying `section.key=value` overrides; values are
    /// TOML literals, or bare strings when they do not parse as one.
    pub fn load_with(path: &Path, overrides: &[String]) -> ToolResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ToolError::from(e).at(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let text = apply_overrides(&text, overrides)?;
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }

    fn resolve(&mut self, base: &Path) {
        if self.model.mesh.is_relative() {
            self.model.mesh = base.join(&self.model.mesh);
        }
        if self.output.directory.is_relative() {
            self.output.directory = base.join(&self.output.directory);
        }
    }

    pub fn validate(&self) -> ToolResult<()> {
        check(self.model.mesh.is_file(), || {
            format!("mesh file {} does not exist", self.model.mesh.display())
        })?;
        self.material()?;
        let b = &self.basis;
        check(b.modes > 0, || "basis.modes must be positive".into())?;
        match &b.vms {
            Some(v) => {
                check(!v.is_empty(), || "basis.vms is empty".into())?;
                check(v.iter().all(|&i| i < b.modes), || {
                    format!("basis.vms must index 0..{}", b.modes)
                })?;
                let mut s = v.clone();
                s.sort_unstable();
                s.dedup();
                check(s.len() == v.len(), || "basis.vms has duplicates".into())?;
            }
            None => check((1..=b.modes).contains(&b.smpf_top_k), || {
                format!("basis.smpf_top_k must be in 1..={}", b.modes)
            })?,
        }
        check(b.smd_step_fraction > 0.0, || {
            "basis.smd_step_fraction must be positive".into()
        })?;
        let t = &self.training;
        check(t.alpha_factor > 0.0, || "training.alpha_factor must be positive".into())?;
        check(t.n_train > 0, || "training.n_train must be positive".into())?;
        check(t.tau > 0.0 && t.tau < 1.0, || "training.tau must be in (0, 1)".into())?;
        if let Some(a) = self.identify.alpha_id_factor {
            check(a > 0.0, || "identify.alpha_id_factor must be positive".into())?;
        }
        self.load_spec()
            .validate()
            .map_err(|e| ToolError::Config(format!("load: {e}")))?;
        let i = &self.integration;
        check(i.beta > 0.0 && i.gamma >= 0.5, || {
            "integration needs beta > 0 and gamma >= 0.5".into()
        })?;
        check(i.damping_ratio >= 0.0, || {
            "integration.damping_ratio must be non-negative".into()
        })?;
        check(self.psd.segment_len >= 2, || {
            "psd.segment_len must be at least 2".into()
        })?;
        check((0.0..1.0).contains(&self.psd.overlap), || {
            "psd.overlap must be in [0, 1)".into()
        })?;
        Ok(())
    }

    pub fn material(&self) -> ToolResult<Material> {
        let m = &self.model;
        Material::rectangular(m.youngs_modulus, m.density, m.width, m.thickness)
            .map_err(|e| ToolError::Config(format!("material: {e}")))
    }

    pub fn alpha_id_factor(&self) -> f64 {
        self.identify.alpha_id_factor.unwrap_or(self.training.alpha_factor)
    }

    pub fn load_spec(&self) -> LoadSpec {
        let l = &self.load;
        LoadSpec {
            cutoff_hz: l.cutoff_hz,
            oaspl_db: l.oaspl_db,
            dt: l.dt,
            duration: l.duration,
            filter_order: l.filter_order,
            seed: l.seed,
        }
    }

    pub fn newmark(&self) -> NewmarkParams {
        NewmarkParams {
            beta: self.integration.beta,
            gamma: self.integration.gamma,
            ..Default::default()
        }
    }
}
